//! Sample-size bounds for bipartition covers under the multispecies
//! coalescent.
//!
//! A collection of gene trees is a *bipartition cover* of a species tree when
//! every nontrivial bipartition of the species tree appears in at least one
//! gene tree. This crate computes topology-free upper bounds on the number of
//! independent gene trees needed to obtain a cover with a given probability,
//! given only the number of species `k` and the minimum internal branch
//! length `t_min` (coalescent units):
//!
//! * [`bounds::original_bound`]: the classical worst-edge union bound,
//! * [`bounds::caterpillar_bound`]: sums over descendant counts 2..k-2,
//! * [`bounds::one_step_bound`]: also accounts for coalescence one branch below,
//! * [`bounds::balanced_bound`]: accounts for the whole balanced subtree below.
//!
//! ```
//! use bipcover::bounds::{BoundReport, BoundSpec};
//!
//! let report = BoundReport::compute(&BoundSpec::new(12, 0.5, 0.9)?)?;
//! assert!(report.m_b <= report.m_s && report.m_s <= report.m_c && report.m_c <= report.m_o);
//! # Ok::<(), bipcover::Error>(())
//! ```
//!
//! The modules underneath are:
//!
//! * [`coalescent`]: Kingman transition probabilities `g(i, j, T)` and
//!   lineage-count distributions,
//! * [`treegen`]: species trees (caterpillar, balanced, Yule, Newick),
//!   bipartitions and descendant counts,
//! * [`mscsim`]: gene-tree simulation and empirical cover experiments,
//! * [`asymptotics`]: hypoexponential machinery and closed-form approximations,
//! * [`checks`]: the oracle / dominance / asymptotic self-check suites.

pub mod asymptotics;
pub mod bounds;
pub mod checks;
pub mod coalescent;
mod error;
pub mod mscsim;
mod numeric;
pub mod rng;
pub mod treegen;

pub use error::{Error, Result};
