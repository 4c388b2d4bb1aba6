//! Kingman-coalescent transition probabilities and lineage-count
//! distributions.
//!
//! `g(i, j, T)` is the probability that `i` gene lineages have coalesced to
//! exactly `j` lineages after time `T` (coalescent units). The closed-form
//! alternating series ([`g_tavare`]) is fast but loses digits to
//! cancellation for large `i` and small `T`; [`g_stable`] computes the same
//! quantity as the transient law of the pure-death chain by uniformization,
//! using only nonnegative terms. [`g`] tries the former and falls back to
//! the latter when the error estimate is too large.

mod distribution;
pub(crate) mod uniformization;

pub use distribution::{convolve, LineageDistribution, TRIM_THRESHOLD};

use crate::numeric::{ln_factorial, CompensatedSum};
use crate::{Error, Result};

/// Largest supported number of lineages.
pub const MAX_LINEAGES: usize = 512;

/// A raw series value further than this outside `[0, 1]` is unstable.
const BOUNDARY_SLACK: f64 = 1e-9;
/// Largest accepted absolute error estimate for the series.
const MAX_ABS_ERROR: f64 = 1e-8;
/// Largest accepted error estimate relative to the series value.
const MAX_REL_ERROR: f64 = 1e-10;

/// Pairwise coalescence rate `m(m-1)/2` with `m` lineages.
pub fn kingman_rate(m: usize) -> f64 {
    (m * m.saturating_sub(1)) as f64 / 2.0
}

/// Coalescence rates `λ_m = m(m-1)/2` for `m = 2..=k_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoalescentRates {
    k_max: usize,
    rates: Vec<f64>,
}

impl CoalescentRates {
    pub fn new(k_max: usize) -> Result<Self> {
        if k_max < 2 {
            return Err(Error::domain(format!("k_max must be >= 2, got {k_max}")));
        }
        let rates = (2..=k_max).map(kingman_rate).collect();
        Ok(Self { k_max, rates })
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Rate with `m` lineages, `2 <= m <= k_max`.
    pub fn rate(&self, m: usize) -> f64 {
        self.rates[m - 2]
    }

    /// Rates in increasing order, starting at `λ_2 = 1`.
    pub fn as_slice(&self) -> &[f64] {
        &self.rates
    }
}

fn check_args(i: usize, j: usize, t: f64) -> Result<()> {
    if j == 0 || j > i {
        return Err(Error::domain(format!("need 1 <= j <= i, got i={i}, j={j}")));
    }
    if i > MAX_LINEAGES {
        return Err(Error::domain(format!("i={i} exceeds the lineage cap {MAX_LINEAGES}")));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::domain(format!("time must be finite and >= 0, got {t}")));
    }
    Ok(())
}

/// Alternating series with its accumulated rounding-error estimate.
fn tavare_raw(i: usize, j: usize, t: f64) -> (f64, f64) {
    let lf = ln_factorial;
    let mut acc = CompensatedSum::default();
    let mut abs_err = 0.0;
    let mut abs_sum = 0.0;
    for k in j..=i {
        let rate_t = kingman_rate(k) * t;
        let log_parts = [
            ((2 * k - 1) as f64).ln(),
            lf(j + k - 2) - lf(j - 1),
            lf(i) - lf(i - k),
            -lf(j),
            -lf(k - j),
            -(lf(i + k - 1) - lf(i - 1)),
        ];
        let log_mag = log_parts.iter().sum::<f64>() - rate_t;
        let magnitude = log_mag.exp();
        let term = if (k - j).is_multiple_of(2) { magnitude } else { -magnitude };
        acc.add(term);
        // each log component carries relative rounding of order eps * |component|
        let log_scale: f64 = log_parts.iter().map(|x| x.abs()).sum::<f64>() + rate_t + 8.0;
        abs_err += magnitude * log_scale * f64::EPSILON;
        abs_sum += magnitude;
    }
    (acc.value(), abs_err + abs_sum * f64::EPSILON)
}

/// `g(i, j, T)` from the closed-form alternating series.
///
/// Fails with [`Error::UnstableEvaluation`] when the raw value lies outside
/// `[-1e-9, 1 + 1e-9]`, or its error estimate exceeds `1e-8` absolutely or
/// `1e-10` relative to the value.
pub fn g_tavare(i: usize, j: usize, t: f64) -> Result<f64> {
    check_args(i, j, t)?;
    if t == 0.0 {
        return Ok(if i == j { 1.0 } else { 0.0 });
    }
    if i == j {
        return Ok((-kingman_rate(i) * t).exp());
    }
    let (value, error_estimate) = tavare_raw(i, j, t);
    let out_of_range = !(-BOUNDARY_SLACK..=1.0 + BOUNDARY_SLACK).contains(&value);
    if out_of_range || error_estimate > MAX_ABS_ERROR || error_estimate > MAX_REL_ERROR * value.abs() {
        return Err(Error::UnstableEvaluation { value, error_estimate });
    }
    Ok(value.clamp(0.0, 1.0))
}

/// Distribution of the lineage count after time `t` starting from `i`,
/// as `row[j - 1] = g(i, j, t)`, by uniformization.
fn uniformized_row(i: usize, t: f64) -> Vec<f64> {
    // chain states are i, i-1, ..., 1 in that order
    let exit_rates: Vec<f64> = (2..=i).rev().map(kingman_rate).collect();
    let mut occ = uniformization::occupancy(&exit_rates, t);
    occ.reverse();
    occ.iter_mut().for_each(|p| *p = p.clamp(0.0, 1.0));
    occ
}

/// `g(i, j, T)` by uniformization of the pure-death chain.
pub fn g_stable(i: usize, j: usize, t: f64) -> Result<f64> {
    check_args(i, j, t)?;
    if i == j {
        return Ok((-kingman_rate(i) * t).exp());
    }
    // states below j are lumped into one absorbing state
    let exit_rates: Vec<f64> = (j..=i).rev().map(kingman_rate).collect();
    let occ = uniformization::occupancy(&exit_rates, t);
    Ok(occ[i - j].clamp(0.0, 1.0))
}

/// `g(i, j, T)`, always in `[0, 1]`.
pub fn g(i: usize, j: usize, t: f64) -> Result<f64> {
    match g_tavare(i, j, t) {
        Err(Error::UnstableEvaluation { .. }) => g_stable(i, j, t),
        other => other,
    }
}

/// `[g(i, 1, t), ..., g(i, i, t)]`.
pub fn transition_row(i: usize, t: f64) -> Result<Vec<f64>> {
    check_args(i, 1, t)?;
    let mut row = Vec::with_capacity(i);
    let mut unstable = false;
    for j in 1..=i {
        match g_tavare(i, j, t) {
            Ok(p) => row.push(p),
            Err(Error::UnstableEvaluation { .. }) => {
                unstable = true;
                row.push(f64::NAN);
            }
            Err(e) => return Err(e),
        }
    }
    if unstable {
        let fallback = uniformized_row(i, t);
        for (p, q) in row.iter_mut().zip(fallback) {
            if p.is_nan() {
                *p = q;
            }
        }
    }
    Ok(row)
}

/// Rows `g(i, ·, t)` for `i = 1..=max_lineages`.
#[derive(Debug, Clone)]
pub struct TransitionKernel {
    t: f64,
    rows: Vec<Vec<f64>>,
}

impl TransitionKernel {
    pub fn new(max_lineages: usize, t: f64) -> Result<Self> {
        if max_lineages == 0 {
            return Err(Error::domain("kernel needs at least one lineage"));
        }
        let rows = (1..=max_lineages).map(|i| transition_row(i, t)).collect::<Result<_>>()?;
        Ok(Self { t, rows })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn max_lineages(&self) -> usize {
        self.rows.len()
    }

    /// `[g(i, 1, t), ..., g(i, i, t)]`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i - 1]
    }

    /// `g(i, j, t)`; zero for `j > i`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i - 1].get(j - 1).copied().unwrap_or(0.0)
    }

    /// Pushes `dist` through the kernel: `π'_j = Σ_i π_i g(i, j, t)`.
    pub fn apply(&self, dist: &LineageDistribution) -> Result<LineageDistribution> {
        if dist.max_support() > self.max_lineages() {
            return Err(Error::domain(format!(
                "distribution support {} exceeds kernel size {}",
                dist.max_support(),
                self.max_lineages()
            )));
        }
        let mut acc = vec![CompensatedSum::default(); dist.max_support()];
        for (i, p) in dist.iter() {
            for (slot, g) in acc.iter_mut().zip(self.row(i)) {
                slot.add(p * g);
            }
        }
        LineageDistribution::from_computed(1, acc.iter().map(CompensatedSum::value).collect())
    }
}

/// Distribution of lineage counts after evolving `dist` for time `t`.
pub fn evolve(dist: &LineageDistribution, t: f64) -> Result<LineageDistribution> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::domain(format!("time must be finite and >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(dist.clone());
    }
    TransitionKernel::new(dist.max_support(), t)?.apply(dist)
}

/// Upper bound `1 / (1 - (1 - 1/i) e^{-t/2})` on the expected number of
/// lineages left from `i` after time `t`.
pub fn expected_lineages_bound(i: usize, t: f64) -> Result<f64> {
    if i == 0 {
        return Err(Error::domain("need at least one lineage"));
    }
    if t.is_nan() || t <= 0.0 {
        return Err(Error::domain(format!("time must be > 0, got {t}")));
    }
    Ok(1.0 / (1.0 - (1.0 - 1.0 / i as f64) * (-t / 2.0).exp()))
}
