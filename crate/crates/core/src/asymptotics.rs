//! Hypoexponential distributions and asymptotic approximations of `g(k, 1, T)`
//! and of the original bound.
//!
//! The absorption time of Kingman's coalescent started from `k` lineages is
//! hypoexponential with rates `m(m-1)/2`, `m = 2..=k`. As `k → ∞` it
//! converges to `S_∞`, whose CDF `s(T)` has the closed form
//!
//! ```text
//! s(T) = Σ_{k≥1} (-1)^{k-1} (2k-1) e^{-k(k-1)T/2}
//!      = e^{T/8} (2π/T)^{3/2} Σ_{n odd} (-1)^{(n-1)/2} n e^{-n²π²/(2T)}
//! ```
//!
//! (the second form is the theta-function dual, used for `T < 1`).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::bounds::{original_bound, original_bound_real, BoundSpec};
use crate::coalescent::{g, kingman_rate, uniformization};
use crate::numeric::CompensatedSum;
use crate::{Error, Result};

/// Truncation used by [`s_infinity_truncated`] and [`f_infinity_truncated`].
pub const TRUNCATION: usize = 400;
/// Largest number of rates evaluated with the coefficient formula.
const COEFFICIENT_MAX_RATES: usize = 40;

/// Rates of a sum of independent exponentials, strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct HypoexponentialSpec {
    rates: Vec<f64>,
}

impl HypoexponentialSpec {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::domain("need at least one rate"));
        }
        if rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::domain("rates must be positive and finite"));
        }
        if rates.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("rates must be strictly increasing"));
        }
        Ok(Self { rates })
    }

    /// Absorption time of Kingman's coalescent from `k` lineages.
    pub fn kingman(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::domain(format!("need k >= 2, got {k}")));
        }
        Self::new((2..=k).map(kingman_rate).collect())
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// `ln|C_i|` and sign of `C_i = Π_{m≠i} λ_m / (λ_m - λ_i)`.
    fn log_coefficients(&self) -> Vec<(f64, bool)> {
        let r = &self.rates;
        (0..r.len())
            .map(|i| {
                let mut log = 0.0;
                let mut negative = false;
                for (m, &rate) in r.iter().enumerate() {
                    if m != i {
                        let gap = rate - r[i];
                        log += rate.ln() - gap.abs().ln();
                        negative ^= gap < 0.0;
                    }
                }
                (log, negative)
            })
            .collect()
    }

    /// `Σ C_i w_i e^{-λ_i T}` with an error estimate; `w_i = λ_i` when
    /// `density`, else 1.
    fn coefficient_sum(&self, t: f64, density: bool) -> (f64, f64) {
        let n = self.rates.len() as f64;
        let mut acc = CompensatedSum::default();
        let mut err = 0.0;
        for ((log_c, negative), &rate) in self.log_coefficients().into_iter().zip(&self.rates) {
            let weight = if density { rate.ln() } else { 0.0 };
            let log_term = log_c + weight - rate * t;
            let mag = log_term.exp();
            acc.add(if negative { -mag } else { mag });
            err += mag * f64::EPSILON * (4.0 * n + log_c.abs() + rate * t + 8.0);
        }
        (acc.value(), err)
    }

    fn stages_fallback(&self, t: f64) -> Vec<f64> {
        uniformization::occupancy(&self.rates, t)
    }
}

fn accept(value: f64, err: f64, lo: f64, hi: f64) -> bool {
    value >= lo - 1e-9 && value <= hi + 1e-9 && err <= 1e-8 && err <= 1e-10 * value.abs()
}

fn check_time(t: f64) -> Result<()> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::domain(format!("time must be finite and >= 0, got {t}")));
    }
    Ok(())
}

fn check_positive(t: f64) -> Result<()> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::domain(format!("time must be positive and finite, got {t}")));
    }
    Ok(())
}

/// `P(Σ τ_i <= T)` for independent `τ_i ~ Exp(λ_i)`.
pub fn hypoexp_cdf(spec: &HypoexponentialSpec, t: f64) -> Result<f64> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    if spec.rates.len() <= COEFFICIENT_MAX_RATES {
        let (tail, err) = spec.coefficient_sum(t, false);
        let value = 1.0 - tail;
        if accept(value, err + f64::EPSILON, 0.0, 1.0) {
            return Ok(value.clamp(0.0, 1.0));
        }
    }
    let occ = spec.stages_fallback(t);
    Ok(occ[occ.len() - 1].clamp(0.0, 1.0))
}

/// Density of `Σ τ_i` at `T`.
pub fn hypoexp_pdf(spec: &HypoexponentialSpec, t: f64) -> Result<f64> {
    check_time(t)?;
    let n = spec.rates.len();
    if t == 0.0 {
        return Ok(if n == 1 { spec.rates[0] } else { 0.0 });
    }
    if n <= COEFFICIENT_MAX_RATES {
        let (value, err) = spec.coefficient_sum(t, true);
        if accept(value, err, 0.0, f64::INFINITY) {
            return Ok(value.max(0.0));
        }
    }
    // absorption happens only out of the last stage
    let occ = spec.stages_fallback(t);
    Ok(spec.rates[n - 1] * occ[n - 1])
}

/// `ln s(T)` without underflow.
pub fn log_s_infinity(t: f64) -> Result<f64> {
    check_positive(t)?;
    if t >= 1.0 {
        return Ok(direct_series(t, false).ln());
    }
    Ok(dual_log_series(t))
}

/// Logarithm of the dual form, factored around its leading term.
fn dual_log_series(t: f64) -> f64 {
    let a1 = PI * PI / 2.0;
    let mut acc = CompensatedSum::default();
    for (idx, n) in (1..).step_by(2).enumerate().take(200) {
        let a_n = (n * n) as f64 * PI * PI / 2.0;
        let term = n as f64 * (-(a_n - a1) / t).exp();
        if term == 0.0 {
            break;
        }
        acc.add(if idx % 2 == 0 { term } else { -term });
    }
    t / 8.0 + 1.5 * (2.0 * PI / t).ln() - a1 / t + acc.value().ln()
}

/// `s(T) = P(S_∞ <= T)`.
pub fn s_infinity(t: f64) -> Result<f64> {
    check_positive(t)?;
    if t >= 1.0 {
        return Ok(direct_series(t, false));
    }
    Ok(log_s_infinity(t)?.exp())
}

/// `Σ_{k≥1} (-1)^{k-1} (2k-1) w_k e^{-λ_k T}` with `w_k = 1`, or its
/// negated T-derivative when `derivative`.
fn direct_series(t: f64, derivative: bool) -> f64 {
    let mut acc = CompensatedSum::default();
    for k in 1usize.. {
        let rate = kingman_rate(k);
        let mag = (2 * k - 1) as f64 * (-rate * t).exp() * if derivative { rate } else { 1.0 };
        if k > 1 && mag < 1e-300 {
            break;
        }
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        acc.add(if derivative { -sign * mag } else { sign * mag });
    }
    acc.value()
}

/// Density of `S_∞` at `T`.
pub fn f_infinity(t: f64) -> Result<f64> {
    check_positive(t)?;
    if t >= 1.0 {
        return Ok(direct_series(t, true));
    }
    // d/dT of the dual form: s (1/8 - 3/(2T)) + prefactor Σ c_n a_n/T² e^{-a_n/T}
    let a1 = PI * PI / 2.0;
    let mut plain = CompensatedSum::default();
    let mut weighted = CompensatedSum::default();
    for (idx, n) in (1..).step_by(2).enumerate().take(200) {
        let a_n = (n * n) as f64 * PI * PI / 2.0;
        let term = n as f64 * (-(a_n - a1) / t).exp();
        if term == 0.0 {
            break;
        }
        let sign = if idx % 2 == 0 { 1.0 } else { -1.0 };
        plain.add(sign * term);
        weighted.add(sign * term * a_n / (t * t));
    }
    let log_prefactor = t / 8.0 + 1.5 * (2.0 * PI / t).ln() - a1 / t;
    let inner = plain.value() * (0.125 - 1.5 / t) + weighted.value();
    Ok((log_prefactor.exp() * inner).max(0.0))
}

/// Estimate of `s(T)` from `g(400, 1, T)` corrected by the gap law
/// `g(k, 1, T) - s(T) ≈ 2 f_∞(T) / (k + 1)`, with `f_∞` itself estimated by
/// the `k = 400` density. Kept as a cross-check of [`s_infinity`].
pub fn s_infinity_truncated(t: f64) -> Result<f64> {
    check_positive(t)?;
    let f_hat = f_infinity_truncated(t)?;
    Ok(g(TRUNCATION, 1, t)? - 2.0 * f_hat / (TRUNCATION + 1) as f64)
}

/// Density of the absorption time from 400 lineages.
pub fn f_infinity_truncated(t: f64) -> Result<f64> {
    check_positive(t)?;
    hypoexp_pdf(&HypoexponentialSpec::kingman(TRUNCATION)?, t)
}

/// `(k + 1)/2 · (g(k, 1, T) - s(T))`, which tends to `f_∞(T)`.
pub fn scaled_gap(k: usize, t: f64) -> Result<f64> {
    Ok((k + 1) as f64 / 2.0 * (g(k, 1, t)? - s_infinity(t)?))
}

fn check_lineages(k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::domain(format!("need k >= 2, got {k}")));
    }
    Ok(())
}

/// Small-time form `k! / 2^{k-1} · T^{k-1}` of `g(k, 1, T)`.
pub fn g_small_t_approx(k: usize, t: f64) -> Result<f64> {
    check_lineages(k)?;
    check_positive(t)?;
    let log_fact: f64 = (2..=k).map(|m| (m as f64).ln()).sum();
    let km1 = (k - 1) as f64;
    Ok((log_fact - km1 * 2f64.ln() + km1 * t.ln()).exp())
}

/// Large-time form `1 - 3(k-1)/(k+1) · e^{-T}` of `g(k, 1, T)`.
pub fn g_large_t_approx(k: usize, t: f64) -> Result<f64> {
    check_lineages(k)?;
    check_time(t)?;
    Ok(1.0 - 3.0 * (k - 1) as f64 / (k + 1) as f64 * (-t).exp())
}

/// `u(T) = (2 - e^{-T/2}) / (1 - e^{-T/2})`, an upper bound on the mean
/// number of lineages entering the root of a balanced tree.
pub fn u_of_t(t: f64) -> Result<f64> {
    check_positive(t)?;
    let e = (-t / 2.0).exp();
    Ok((2.0 - e) / -(-t / 2.0).exp_m1())
}

/// Improvement factor of the balanced envelope over the limiting worst case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaReport {
    pub t: f64,
    /// `⌈u(T)⌉`, the lineage index used in place of the real `u(T)`.
    pub index: usize,
    pub beta: f64,
    /// `π² / (2T)`.
    pub asymptote: f64,
}

impl BetaReport {
    /// `beta / asymptote`.
    pub fn scaled(&self) -> f64 {
        self.beta / self.asymptote
    }
}

/// `β_T = ln(1 - g(⌈u(T)⌉, 1, T)) / ln(1 - s(T))`.
pub fn beta_t(t: f64) -> Result<BetaReport> {
    let index = u_of_t(t)?.ceil() as usize;
    let numerator = (-g(index, 1, t)?).ln_1p();
    let denominator = (-s_infinity(t)?).ln_1p();
    Ok(BetaReport { t, index, beta: numerator / denominator, asymptote: PI * PI / (2.0 * t) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    SmallT,
    LargeT,
    LargeK,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::SmallT => "small-T",
            Regime::LargeT => "large-T",
            Regime::LargeK => "large-k",
        })
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "small-t" => Ok(Regime::SmallT),
            "large-t" => Ok(Regime::LargeT),
            "large-k" => Ok(Regime::LargeK),
            _ => Err(Error::domain(format!("unknown regime '{s}' (expected small-T, large-T or large-k)"))),
        }
    }
}

/// Asymptotic form of the original bound next to its exact real value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticReport {
    pub regime: Regime,
    pub approximation: f64,
    /// Unrounded worst-edge bound.
    pub exact: f64,
    /// The bound as an integer gene count.
    pub exact_count: u64,
    /// `exact / approximation`.
    pub ratio: f64,
}

/// Compares the original bound with its asymptotic form in `regime`.
pub fn m_o_asymptotics(k: usize, t: f64, q: f64, regime: Regime) -> Result<AsymptoticReport> {
    let spec = BoundSpec::new(k, t, q)?;
    let kappa = spec.kappa();
    let approximation = match regime {
        Regime::LargeT => kappa / t,
        Regime::SmallT => {
            let log_fact: f64 = (2..=k - 2).map(|m| (m as f64).ln()).sum();
            let km3 = (k - 3) as f64;
            kappa * (km3 * 2f64.ln() - log_fact - km3 * t.ln()).exp()
        }
        Regime::LargeK => kappa / -(-s_infinity(t)?).ln_1p(),
    };
    let exact = original_bound_real(&spec)?;
    let exact_count = original_bound(&spec)?;
    Ok(AsymptoticReport { regime, approximation, exact, exact_count, ratio: exact / approximation })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_rate_closed_form() {
        let spec = HypoexponentialSpec::new(vec![1.0, 3.0]).unwrap();
        let want = 1.0 - 1.5 * (-1.0f64).exp() + 0.5 * (-3.0f64).exp();
        assert!((hypoexp_cdf(&spec, 1.0).unwrap() - want).abs() < 1e-15);
        let single = HypoexponentialSpec::new(vec![2.5]).unwrap();
        assert!((hypoexp_cdf(&single, 0.3).unwrap() + (-0.75f64).exp_m1()).abs() < 1e-16);
        assert!((hypoexp_pdf(&single, 0.3).unwrap() - 2.5 * (-0.75f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn spec_validation() {
        assert!(HypoexponentialSpec::new(vec![]).is_err());
        assert!(HypoexponentialSpec::new(vec![1.0, 1.0]).is_err());
        assert!(HypoexponentialSpec::new(vec![3.0, 1.0]).is_err());
        assert!(HypoexponentialSpec::new(vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn series_forms_agree_at_the_seam() {
        for &t in &[0.3, 0.6, 0.9, 1.0, 1.3, 2.0] {
            let direct = direct_series(t, false);
            let dual = dual_log_series(t).exp();
            // the direct series cancels to an absolute error of a few ulps of 1
            assert!((direct - dual).abs() < 1e-14, "t={t}: {direct} vs {dual}");
        }
    }

    #[test]
    fn regime_parsing() {
        assert_eq!("large-T".parse::<Regime>().unwrap(), Regime::LargeT);
        assert_eq!("small-t".parse::<Regime>().unwrap(), Regime::SmallT);
        assert_eq!(Regime::LargeK.to_string().parse::<Regime>().unwrap(), Regime::LargeK);
        assert!("medium".parse::<Regime>().is_err());
    }

    #[test]
    fn u_values() {
        assert!((u_of_t(2.0 * 2f64.ln()).unwrap() - 3.0).abs() < 1e-12);
        assert!((u_of_t(80.0).unwrap() - 2.0).abs() < 1e-12);
        assert!(u_of_t(0.0).is_err());
    }
}
