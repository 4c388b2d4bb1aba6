use std::fmt;

use crate::{Error, Result};

/// Largest taxon count representable by [`Bipartition`].
pub const MAX_BIPARTITION_TAXA: usize = 128;

/// Bitmask with the low `k` bits set.
pub fn taxon_mask(k: usize) -> u128 {
    if k >= 128 {
        u128::MAX
    } else {
        (1u128 << k) - 1
    }
}

pub(crate) fn check_taxa(k: usize) -> Result<()> {
    if k > MAX_BIPARTITION_TAXA {
        return Err(Error::domain(format!("bipartitions support at most {MAX_BIPARTITION_TAXA} taxa, got {k}")));
    }
    Ok(())
}

/// A split of taxa `0..k` into two sides, stored as the side that does not
/// contain taxon 0.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bipartition(u128);

impl Bipartition {
    /// Canonical form of the split `{cluster, complement}` over `k` taxa.
    pub fn from_cluster(cluster: u128, k: usize) -> Self {
        let mask = taxon_mask(k);
        let cluster = cluster & mask;
        if cluster & 1 == 1 {
            Bipartition(!cluster & mask)
        } else {
            Bipartition(cluster)
        }
    }

    /// Canonical side as a bitmask (bit 0 never set).
    pub fn bits(self) -> u128 {
        self.0
    }

    /// Number of taxa on the canonical side.
    pub fn side_len(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Both sides hold at least two of the `k` taxa.
    pub fn is_nontrivial(self, k: usize) -> bool {
        let n = self.side_len();
        n >= 2 && k - n >= 2
    }

    pub fn contains(self, taxon: usize) -> bool {
        taxon < 128 && self.0 >> taxon & 1 == 1
    }

    /// Taxa on the canonical side, ascending.
    pub fn taxa(self) -> Vec<usize> {
        (0..128).filter(|&t| self.contains(t)).collect()
    }
}

impl fmt::Debug for Bipartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bipartition{:?}", self.taxa())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_side_excludes_taxon_zero() {
        let a = Bipartition::from_cluster(0b0011, 4);
        let b = Bipartition::from_cluster(0b1100, 4);
        assert_eq!(a, b);
        assert_eq!(a.taxa(), vec![2, 3]);
        assert!(!a.contains(0));
        assert!(a.is_nontrivial(4));
        assert!(!Bipartition::from_cluster(0b0001, 4).is_nontrivial(4));
    }

    #[test]
    fn full_width() {
        assert_eq!(taxon_mask(128), u128::MAX);
        let b = Bipartition::from_cluster(1, 128);
        assert_eq!(b.side_len(), 127);
    }
}
