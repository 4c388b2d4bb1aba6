//! Gene-count bounds for a bipartition cover with probability `q`.
//!
//! All four bounds have the form "least `n` with
//! `Σ_ℓ (1 - h(ℓ))^n <= 1 - q`" for some per-edge success probability `h`,
//! summed over descendant counts `ℓ = 2..=k-2`:
//!
//! | bound | `h(ℓ)` |
//! |---|---|
//! | original | `g(k-2, 1, t)` for every edge |
//! | caterpillar | `g(ℓ, 1, t)` |
//! | one-step | `E g(Z_⌊ℓ/2⌋ + Z_⌈ℓ/2⌉, 1, t)` |
//! | balanced | `P(W_ℓ = 1)` for the balanced-subtree recursion |
//!
//! Each refinement can only raise `h`, so `m_b <= m_s <= m_c <= m_o`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::Serialize;

use crate::coalescent::{convolve, g, LineageDistribution, TransitionKernel, MAX_LINEAGES};
use crate::numeric::CompensatedSum;
use crate::{Error, Result};

/// Largest gene count a bound may return.
pub const GENE_COUNT_CAP: u64 = 1 << 53;

/// Species count, minimum internal branch length and target probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundSpec {
    pub k: usize,
    pub t_min: f64,
    pub q: f64,
}

impl BoundSpec {
    pub fn new(k: usize, t_min: f64, q: f64) -> Result<Self> {
        let spec = Self { k, t_min, q };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 4 {
            return Err(Error::domain(format!("k must be >= 4, got {}", self.k)));
        }
        if self.k - 2 > MAX_LINEAGES {
            return Err(Error::domain(format!("k must be <= {}, got {}", MAX_LINEAGES + 2, self.k)));
        }
        if !(self.t_min.is_finite() && self.t_min > 0.0) {
            return Err(Error::domain(format!("t_min must be positive and finite, got {}", self.t_min)));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::domain(format!("q must lie in (0, 1), got {}", self.q)));
        }
        Ok(())
    }

    /// `ln((k - 3) / (1 - q))`.
    pub fn kappa(&self) -> f64 {
        ((self.k - 3) as f64).ln() - (-self.q).ln_1p()
    }
}

/// `Σ_ℓ exp(n ln(1 - h_ℓ))`, summed in the given order.
fn miss_probability(n: u64, log_miss: &[f64]) -> f64 {
    let n = n as f64;
    log_miss.iter().map(|&l| (n * l).exp()).sum()
}

/// Least `n >= 1` with `miss_probability(n) <= budget`, by doubling then
/// bisection.
fn least_count(log_miss: &[f64], budget: f64) -> Result<u64> {
    let ok = |n: u64| miss_probability(n, log_miss) <= budget;
    if ok(1) {
        return Ok(1);
    }
    let mut hi = 2u64;
    while !ok(hi) {
        if hi >= GENE_COUNT_CAP {
            return Err(Error::Overflow { cap: GENE_COUNT_CAP });
        }
        hi = (hi * 2).min(GENE_COUNT_CAP);
    }
    let mut lo = hi / 2; // fails
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn check_q(q: f64) -> Result<()> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!("q must lie in (0, 1), got {q}")));
    }
    Ok(())
}

/// `inf { n >= 1 : Σ_ℓ (1 - h_ℓ)^n <= 1 - q }`.
pub fn invert_sum_bound(h: &[f64], q: f64) -> Result<u64> {
    check_q(q)?;
    if h.is_empty() {
        return Err(Error::domain("need at least one success probability"));
    }
    if let Some(p) = h.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::domain(format!("success probability {p} outside [0, 1]")));
    }
    if h.contains(&0.0) {
        return Err(Error::NeverSatisfiable);
    }
    let log_miss: Vec<f64> = h.iter().map(|&p| (-p).ln_1p()).collect();
    least_count(&log_miss, 1.0 - q)
}

/// The worst-edge bound before rounding: `ln((1-q)/(k-3)) / ln(1 - g(k-2, 1, t))`.
pub fn original_bound_real(spec: &BoundSpec) -> Result<f64> {
    spec.validate()?;
    let worst = g(spec.k - 2, 1, spec.t_min)?;
    Ok(-spec.kappa() / (-worst).ln_1p())
}

/// Worst-edge bound rounded up to an integer, minimum 1.
pub fn original_bound(spec: &BoundSpec) -> Result<u64> {
    spec.validate()?;
    let worst = g(spec.k - 2, 1, spec.t_min)?;
    if worst == 0.0 {
        return Err(Error::Overflow { cap: GENE_COUNT_CAP });
    }
    // same objective as the other bounds, with k - 3 copies of the worst edge
    let log_miss = vec![(-worst).ln_1p(); spec.k - 3];
    least_count(&log_miss, 1.0 - spec.q)
}

/// `g(ℓ, 1, t)` for `ℓ = 2..=k-2`.
pub fn caterpillar_successes(spec: &BoundSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    (2..=spec.k - 2).map(|l| g(l, 1, spec.t_min)).collect()
}

pub fn caterpillar_bound(spec: &BoundSpec) -> Result<u64> {
    invert_sum_bound(&caterpillar_successes(spec)?, spec.q)
}

/// `Σ_i P(X = i) g(i, 1, t)`: probability that `X` lineages reach one.
fn absorption(dist: &LineageDistribution, kernel: &TransitionKernel) -> f64 {
    let mut acc = CompensatedSum::default();
    for (i, p) in dist.iter() {
        acc.add(p * kernel.get(i, 1));
    }
    acc.value().clamp(0.0, 1.0)
}

fn point(n: usize) -> LineageDistribution {
    LineageDistribution::point(n).expect("n >= 1")
}

fn one_step_with(l: usize, kernel: &TransitionKernel) -> Result<f64> {
    let low = kernel.apply(&point(l / 2))?;
    let high = kernel.apply(&point(l.div_ceil(2)))?;
    Ok(absorption(&convolve(&low, &high), kernel))
}

fn check_len(l: usize) -> Result<()> {
    if !(2..=MAX_LINEAGES).contains(&l) {
        return Err(Error::domain(format!("descendant count must be in 2..={MAX_LINEAGES}, got {l}")));
    }
    Ok(())
}

/// Success probability of an edge with `l` descendants, accounting for
/// coalescence on the two edges directly below it.
pub fn one_step_success(l: usize, t_min: f64) -> Result<f64> {
    check_len(l)?;
    one_step_with(l, &TransitionKernel::new(l, t_min)?)
}

/// One-step success probabilities for `ℓ = 2..=k-2`.
pub fn one_step_successes(spec: &BoundSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let kernel = TransitionKernel::new(spec.k - 2, spec.t_min)?;
    (2..=spec.k - 2).map(|l| one_step_with(l, &kernel)).collect()
}

pub fn one_step_bound(spec: &BoundSpec) -> Result<u64> {
    invert_sum_bound(&one_step_successes(spec)?, spec.q)
}

/// Lineage-count distributions of balanced subtrees with every branch of
/// length `t_min`: `X_ℓ` enters the top edge of an `ℓ`-leaf balanced
/// subtree and `W_ℓ` leaves it.
#[derive(Debug)]
pub struct BalancedTable {
    t_min: f64,
    kernel: TransitionKernel,
    entering: Vec<LineageDistribution>,
    leaving: Vec<LineageDistribution>,
}

impl BalancedTable {
    fn build(max_len: usize, t_min: f64) -> Result<Self> {
        let kernel = TransitionKernel::new(max_len, t_min)?;
        let mut entering = vec![point(1)];
        let mut leaving = vec![point(1)];
        for l in 2..=max_len {
            let x = convolve(&leaving[l.div_ceil(2) - 1], &leaving[l / 2 - 1]);
            let w = kernel.apply(&x)?;
            entering.push(x);
            leaving.push(w);
        }
        Ok(Self { t_min, kernel, entering, leaving })
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    /// Largest tabulated subtree size.
    pub fn max_len(&self) -> usize {
        self.entering.len()
    }

    /// Lineages entering the top edge of an `l`-leaf balanced subtree.
    pub fn entering(&self, l: usize) -> &LineageDistribution {
        &self.entering[l - 1]
    }

    /// Lineages leaving the top of that edge.
    pub fn leaving(&self, l: usize) -> &LineageDistribution {
        &self.leaving[l - 1]
    }

    /// `P(W_ℓ = 1)`.
    pub fn success(&self, l: usize) -> f64 {
        absorption(self.entering(l), &self.kernel)
    }
}

type TableCache = Mutex<HashMap<u64, Arc<BalancedTable>>>;

fn table_cache() -> &'static TableCache {
    static CACHE: OnceLock<TableCache> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Balanced-subtree distributions for `ℓ = 1..=max_len`, memoized by
/// the exact bits of `t_min`.
pub fn balanced_lineage_distributions(max_len: usize, t_min: f64) -> Result<Arc<BalancedTable>> {
    if !(1..=MAX_LINEAGES).contains(&max_len) {
        return Err(Error::domain(format!("max_len must be in 1..={MAX_LINEAGES}, got {max_len}")));
    }
    if !(t_min.is_finite() && t_min > 0.0) {
        return Err(Error::domain(format!("t_min must be positive and finite, got {t_min}")));
    }
    let key = t_min.to_bits();
    if let Some(table) = table_cache().lock().unwrap().get(&key) {
        if table.max_len() >= max_len {
            return Ok(Arc::clone(table));
        }
    }
    let table = Arc::new(BalancedTable::build(max_len, t_min)?);
    let mut cache = table_cache().lock().unwrap();
    let slot = cache.entry(key).or_insert_with(|| Arc::clone(&table));
    if slot.max_len() < table.max_len() {
        *slot = Arc::clone(&table);
    }
    Ok(table)
}

/// `P(W_ℓ = 1)` for `ℓ = 2..=k-2`.
pub fn balanced_successes(spec: &BoundSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let table = balanced_lineage_distributions(spec.k - 2, spec.t_min)?;
    Ok((2..=spec.k - 2).map(|l| table.success(l)).collect())
}

pub fn balanced_bound(spec: &BoundSpec) -> Result<u64> {
    invert_sum_bound(&balanced_successes(spec)?, spec.q)
}

/// Closed-form upper envelope of the balanced bound (not rounded):
/// the worst-edge formula with `g(⌈E X_{k-2}⌉, 1, t)` in place of
/// `g(k-2, 1, t)`. Rounding the mean up is conservative because `g(·, 1, t)`
/// decreases in its first argument.
pub fn balanced_envelope(spec: &BoundSpec) -> Result<f64> {
    spec.validate()?;
    let table = balanced_lineage_distributions(spec.k - 2, spec.t_min)?;
    let index = (table.entering(spec.k - 2).mean() - 1e-12).ceil().max(1.0) as usize;
    let p = g(index, 1, spec.t_min)?;
    Ok(-spec.kappa() / (-p).ln_1p())
}

/// All four bounds with the success probabilities behind them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub spec: BoundSpec,
    pub m_o: u64,
    pub m_c: u64,
    pub m_s: u64,
    pub m_b: u64,
    /// Worst-edge success probability `g(k-2, 1, t_min)`.
    pub h_original: f64,
    /// Per-edge successes for `ℓ = 2..=k-2`.
    pub h_caterpillar: Vec<f64>,
    pub h_one_step: Vec<f64>,
    pub h_balanced: Vec<f64>,
}

impl BoundReport {
    pub fn compute(spec: &BoundSpec) -> Result<Self> {
        spec.validate()?;
        let h_caterpillar = caterpillar_successes(spec)?;
        let h_one_step = one_step_successes(spec)?;
        let h_balanced = balanced_successes(spec)?;
        Ok(Self {
            spec: *spec,
            m_o: original_bound(spec)?,
            m_c: invert_sum_bound(&h_caterpillar, spec.q)?,
            m_s: invert_sum_bound(&h_one_step, spec.q)?,
            m_b: invert_sum_bound(&h_balanced, spec.q)?,
            h_original: g(spec.k - 2, 1, spec.t_min)?,
            h_caterpillar,
            h_one_step,
            h_balanced,
        })
    }

    /// Improvement ratios `m_o / m_x` for the caterpillar, one-step and
    /// balanced bounds.
    pub fn improvement_ratios(&self) -> [f64; 3] {
        let o = self.m_o as f64;
        [o / self.m_c as f64, o / self.m_s as f64, o / self.m_b as f64]
    }
}
