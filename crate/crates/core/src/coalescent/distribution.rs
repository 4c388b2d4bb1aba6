use serde::Serialize;

use crate::numeric::compensated_sum;
use crate::{Error, Result};

/// Upper-tail entries below this are dropped.
pub const TRIM_THRESHOLD: f64 = 1e-15;
/// Largest total mass that trimming may discard.
const MAX_TRIMMED_MASS: f64 = 1e-12;
/// Allowed deviation of the total mass from 1.
const MASS_TOLERANCE: f64 = 1e-10;

/// Probability mass function over lineage counts `>= 1`.
///
/// `probs()[m]` is the probability of count `min_support() + m`. Only the
/// upper tail is trimmed: the low counts (in particular count 1, whose
/// probability drives every bound) are kept even when tiny.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineageDistribution {
    min_support: usize,
    probs: Vec<f64>,
}

impl LineageDistribution {
    /// Validated constructor.
    pub fn new(min_support: usize, probs: Vec<f64>) -> Result<Self> {
        if min_support == 0 {
            return Err(Error::InvalidDistribution("support must start at 1 or above".into()));
        }
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty probability vector".into()));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidDistribution(format!("probability {p} outside [0, 1]")));
        }
        let dist = Self::trimmed(min_support, probs)?;
        let total = dist.total_mass();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("total mass {total} is not 1")));
        }
        Ok(dist)
    }

    /// Point mass at `count`.
    pub fn point(count: usize) -> Result<Self> {
        Self::new(count, vec![1.0])
    }

    /// Applies upper-tail trimming; renormalizes by the trimmed mass.
    fn trimmed(min_support: usize, mut probs: Vec<f64>) -> Result<Self> {
        let mut dropped = Vec::new();
        while probs.len() > 1 && *probs.last().unwrap() < TRIM_THRESHOLD {
            dropped.push(probs.pop().unwrap());
        }
        let lost = compensated_sum(dropped);
        if lost > MAX_TRIMMED_MASS {
            return Err(Error::InvalidDistribution(format!("trimming would discard mass {lost}")));
        }
        if lost > 0.0 {
            let kept = compensated_sum(probs.iter().copied());
            for p in &mut probs {
                *p /= kept;
            }
        }
        Ok(Self { min_support, probs })
    }

    /// Builds from computed probabilities, clamping rounding noise below zero.
    pub(crate) fn from_computed(min_support: usize, probs: Vec<f64>) -> Result<Self> {
        let probs = probs.into_iter().map(|p| p.clamp(0.0, 1.0)).collect();
        Self::new(min_support, probs)
    }

    pub fn min_support(&self) -> usize {
        self.min_support
    }

    pub fn max_support(&self) -> usize {
        self.min_support + self.probs.len() - 1
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `P(X = count)`.
    pub fn pmf(&self, count: usize) -> f64 {
        count.checked_sub(self.min_support).and_then(|m| self.probs.get(m)).copied().unwrap_or(0.0)
    }

    /// `P(X <= count)`.
    pub fn cdf(&self, count: usize) -> f64 {
        if count < self.min_support {
            return 0.0;
        }
        let upto = (count - self.min_support + 1).min(self.probs.len());
        compensated_sum(self.probs[..upto].iter().copied())
    }

    /// `P(X > count)`, summed over the upper tail directly.
    pub fn sf(&self, count: usize) -> f64 {
        if count < self.min_support {
            return self.total_mass();
        }
        let from = count - self.min_support + 1;
        if from >= self.probs.len() {
            return 0.0;
        }
        compensated_sum(self.probs[from..].iter().copied())
    }

    pub fn mean(&self) -> f64 {
        compensated_sum(self.iter().map(|(n, p)| n as f64 * p))
    }

    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.probs.iter().copied())
    }

    /// `(count, probability)` pairs in increasing count order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.probs.iter().enumerate().map(move |(m, &p)| (self.min_support + m, p))
    }
}

/// Distribution of the sum of independent draws from `a` and `b`.
pub fn convolve(a: &LineageDistribution, b: &LineageDistribution) -> LineageDistribution {
    let mut probs = vec![0.0; a.probs.len() + b.probs.len() - 1];
    for (x, &pa) in a.probs.iter().enumerate() {
        for (y, &pb) in b.probs.iter().enumerate() {
            probs[x + y] += pa * pb;
        }
    }
    LineageDistribution::from_computed(a.min_support + b.min_support, probs)
        .expect("convolution of valid distributions is valid")
}
