//! Self-check suites: independent oracles, dominance properties and
//! asymptotic trends, each reported as one pass/fail line per check.
//!
//! The oracle suite takes the transition kernel as a closure so a harness can
//! feed it a deliberately perturbed kernel and confirm the suite notices.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::asymptotics::{
    beta_t, f_infinity, hypoexp_cdf, log_s_infinity, s_infinity, scaled_gap, u_of_t, HypoexponentialSpec,
};
use crate::bounds::{balanced_lineage_distributions, BoundReport, BoundSpec};
use crate::coalescent::{convolve, evolve, g, kingman_rate, transition_row, LineageDistribution};
use crate::mscsim::exact::root_lineages;
use crate::rng::trial_rng;
use crate::treegen::{all_edge_counts, balanced, caterpillar, descendant_counts, enumerate_topologies};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckLine {
    /// Runs `body`; an error counts as a failure.
    pub fn run(name: &str, body: impl FnOnce() -> Result<(bool, String)>) -> Self {
        let (passed, detail) = body().unwrap_or_else(|e| (false, format!("error: {e}")));
        CheckLine { name: name.to_string(), passed, detail }
    }
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckReport {
    pub lines: Vec<CheckLine>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.lines.iter().all(|l| l.passed)
    }

    pub fn failures(&self) -> usize {
        self.lines.iter().filter(|l| !l.passed).count()
    }

    fn extend(&mut self, other: CheckReport) {
        self.lines.extend(other.lines);
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for line in &self.lines {
            writeln!(f, "{line}")?;
        }
        write!(f, "{} checks, {} failed", self.lines.len(), self.failures())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Oracles,
    Dominance,
    Asymptotics,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracles" => Ok(Suite::Oracles),
            "dominance" => Ok(Suite::Dominance),
            "asymptotics" => Ok(Suite::Asymptotics),
            "all" => Ok(Suite::All),
            _ => Err(Error::Domain(format!("unknown suite {s:?} (oracles, dominance, asymptotics, all)"))),
        }
    }
}

pub fn run(suite: Suite) -> CheckReport {
    match suite {
        Suite::Oracles => oracles(),
        Suite::Dominance => dominance(),
        Suite::Asymptotics => asymptotics(),
        Suite::All => {
            let mut report = oracles();
            report.extend(dominance());
            report.extend(asymptotics());
            report
        }
    }
}

pub const MONTE_CARLO_SEED: u64 = 0x6b69_6e67;

pub fn oracles() -> CheckReport {
    oracles_with(&|i, j, t| g(i, j, t))
}

pub fn oracles_with<G>(kernel: &G) -> CheckReport
where
    G: Fn(usize, usize, f64) -> Result<f64> + Sync,
{
    CheckReport {
        lines: vec![
            closed_forms(kernel),
            hypoexponential_identity(kernel),
            monte_carlo(kernel, 1_000_000, MONTE_CARLO_SEED),
        ],
    }
}

pub fn closed_forms<G: Fn(usize, usize, f64) -> Result<f64>>(kernel: &G) -> CheckLine {
    CheckLine::run("closed forms", || {
        let mut worst: f64 = 0.0;
        for &t in &[0.01, 0.1, 0.5, 1.0, 2.0, 5.0] {
            worst = worst.max((kernel(2, 1, t)? - -(-t).exp_m1()).abs());
        }
        let e = std::f64::consts::E;
        worst = worst.max((kernel(3, 1, 1.0)? - (1.0 - 1.5 / e + 0.5 * (-3.0f64).exp())).abs());
        for i in 1..=20 {
            for j in 1..=i {
                worst = worst.max((kernel(i, j, 0.0)? - f64::from(u8::from(i == j))).abs());
            }
        }
        Ok((worst <= 1e-12, format!("max abs error {worst:.3e} (tol 1e-12)")))
    })
}

pub fn hypoexponential_identity<G: Fn(usize, usize, f64) -> Result<f64>>(kernel: &G) -> CheckLine {
    CheckLine::run("hypoexponential identity k<=30", || {
        let mut worst: f64 = 0.0;
        for k in 2..=30 {
            let spec = HypoexponentialSpec::kingman(k)?;
            for &t in &[0.05, 0.2, 1.0, 5.0] {
                worst = worst.max((kernel(k, 1, t)? - hypoexp_cdf(&spec, t)?).abs());
            }
        }
        Ok((worst <= 1e-9, format!("max abs error {worst:.3e} (tol 1e-9)")))
    })
}

/// Lineages left after time `t` starting from `i`, by direct simulation.
pub fn simulate_lineages<R: Rng>(i: usize, t: f64, rng: &mut R) -> usize {
    let mut m = i;
    let mut elapsed = 0.0;
    while m > 1 {
        let wait: f64 = rng.sample(Exp1);
        elapsed += wait / kingman_rate(m);
        if elapsed > t {
            break;
        }
        m -= 1;
    }
    m
}

const MONTE_CARLO_CHUNK: u64 = 10_000;

pub fn monte_carlo<G>(kernel: &G, trials: u64, seed: u64) -> CheckLine
where
    G: Fn(usize, usize, f64) -> Result<f64> + Sync,
{
    CheckLine::run("Monte-Carlo lineage counts", || {
        let mut details = Vec::new();
        let mut ok = true;
        for (case, &(i, t)) in [(5usize, 0.3), (10, 1.0), (20, 0.1)].iter().enumerate() {
            let chunks = trials.div_ceil(MONTE_CARLO_CHUNK);
            let counts = (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut rng = trial_rng(seed, (case as u64) << 32 | c);
                    let mut counts = vec![0u64; i + 1];
                    let n = MONTE_CARLO_CHUNK.min(trials - c * MONTE_CARLO_CHUNK);
                    for _ in 0..n {
                        counts[simulate_lineages(i, t, &mut rng)] += 1;
                    }
                    counts
                })
                .reduce(
                    || vec![0u64; i + 1],
                    |mut a, b| {
                        a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                        a
                    },
                );
            let mut worst: f64 = 0.0;
            for (j, &c) in counts.iter().enumerate().skip(1) {
                let p = kernel(i, j, t)?;
                let expected = trials as f64 * p;
                if expected < 10.0 {
                    continue;
                }
                let se = (expected * (1.0 - p)).sqrt();
                worst = worst.max((c as f64 - expected).abs() / se);
            }
            ok &= worst <= 4.0;
            details.push(format!("Z({i},{t}) max |z| {worst:.2}"));
        }
        Ok((ok, format!("{} (tol 4 SE, N={trials})", details.join(", "))))
    })
}

pub fn dominance() -> CheckReport {
    CheckReport {
        lines: vec![
            deterministic_balancing(),
            balanced_worst_case(),
            ultra_log_concavity(),
            likelihood_ratio_order(),
            bound_chain(),
            extremality(),
        ],
    }
}

fn evolved(i: usize, t: f64) -> Result<LineageDistribution> {
    evolve(&LineageDistribution::point(i)?, t)
}

/// Splitting k lineages more evenly between two branches stochastically
/// raises the number that survive, as exact CDF dominance.
pub fn deterministic_balancing() -> CheckLine {
    CheckLine::run("deterministic balancing k<=16", || {
        let mut worst: f64 = 0.0;
        for &t in &[0.1, 0.5, 1.0, 2.0] {
            for k in 2..=16usize {
                let sums = (1..=k / 2)
                    .map(|i| Ok(convolve(&evolved(i, t)?, &evolved(k - i, t)?)))
                    .collect::<Result<Vec<_>>>()?;
                for (a, lo) in sums.iter().enumerate() {
                    for hi in &sums[a..] {
                        for x in 1..=k {
                            worst = worst.max(hi.cdf(x) - lo.cdf(x));
                        }
                    }
                }
            }
        }
        Ok((worst <= 1e-12, format!("max CDF violation {worst:.3e}")))
    })
}

/// The balanced tree's root count dominates every other topology's.
pub fn balanced_worst_case() -> CheckLine {
    CheckLine::run("balanced worst case over all topologies k<=8", || {
        let mut worst: f64 = 0.0;
        let mut trees = 0usize;
        for &t in &[0.3, 1.0] {
            let table = balanced_lineage_distributions(8, t)?;
            for k in 4..=8 {
                let top = table.entering(k);
                for tree in enumerate_topologies(k)? {
                    let x = root_lineages(&tree.with_uniform_lengths(t)?)?;
                    trees += 1;
                    for c in 1..=k {
                        worst = worst.max(x.sf(c) - top.sf(c));
                    }
                }
            }
        }
        Ok((worst <= 1e-12, format!("{trees} trees, max tail violation {worst:.3e}")))
    })
}

fn ulc_violation(d: &LineageDistribution) -> f64 {
    (d.min_support()..=d.max_support())
        .map(|j| (j + 1) as f64 * d.pmf(j - 1) * d.pmf(j + 1) - j as f64 * d.pmf(j) * d.pmf(j))
        .fold(0.0, f64::max)
}

pub fn ultra_log_concavity() -> CheckLine {
    CheckLine::run("ultra log-concave balanced counts l<=64", || {
        let mut worst: f64 = 0.0;
        for &t in &[0.05, 0.2, 1.0, 3.0] {
            let table = balanced_lineage_distributions(64, t)?;
            for l in 1..=64 {
                worst = worst.max(ulc_violation(table.entering(l))).max(ulc_violation(table.leaving(l)));
            }
        }
        Ok((worst <= 1e-14, format!("max violation {worst:.3e}")))
    })
}

pub fn likelihood_ratio_order() -> CheckLine {
    CheckLine::run("likelihood-ratio order i<=j<=20", || {
        let mut worst: f64 = 0.0;
        for &t in &[0.1, 0.5, 1.0] {
            let rows = (1..=20).map(|i| transition_row(i, t)).collect::<Result<Vec<_>>>()?;
            let at = |i: usize, m: usize| rows[i - 1].get(m - 1).copied().unwrap_or(0.0);
            for i in 1..=20 {
                for j in i..=20 {
                    for m in 1..=20 {
                        for n in m..=20 {
                            worst = worst.max(at(i, n) * at(j, m) - at(i, m) * at(j, n));
                        }
                    }
                }
            }
        }
        Ok((worst <= 1e-14, format!("max violation {worst:.3e}")))
    })
}

pub const CHAIN_KS: std::ops::RangeInclusive<usize> = 4..=20;
pub const CHAIN_TS: [f64; 6] = [0.05, 0.1, 0.2, 0.5, 1.0, 2.0];
pub const CHAIN_QS: [f64; 3] = [0.5, 0.9, 0.99];

/// Balanced <= one-step <= caterpillar <= original on the grid, and every
/// bound monotone in k, t_min and q.
pub fn bound_chain() -> CheckLine {
    CheckLine::run("bound chain and monotonicity", || {
        let mut grid = HashMap::new();
        let mut problems = Vec::new();
        for k in CHAIN_KS {
            for &t in &CHAIN_TS {
                for &q in &CHAIN_QS {
                    let r = BoundReport::compute(&BoundSpec::new(k, t, q)?)?;
                    if !(r.m_b <= r.m_s && r.m_s <= r.m_c && r.m_c <= r.m_o) {
                        problems.push(format!("chain k={k} t={t} q={q}"));
                    }
                    grid.insert((k, t.to_bits(), q.to_bits()), [r.m_o, r.m_c, r.m_s, r.m_b]);
                }
            }
        }
        let at = |k: usize, t: f64, q: f64| grid[&(k, t.to_bits(), q.to_bits())];
        for k in CHAIN_KS {
            for (ti, &t) in CHAIN_TS.iter().enumerate() {
                for (qi, &q) in CHAIN_QS.iter().enumerate() {
                    let here = at(k, t, q);
                    let in_k = k == 4 || (0..4).all(|b| at(k - 1, t, q)[b] <= here[b]);
                    let in_t = ti == 0 || (0..4).all(|b| at(k, CHAIN_TS[ti - 1], q)[b] >= here[b]);
                    let in_q = qi == 0 || (0..4).all(|b| at(k, t, CHAIN_QS[qi - 1])[b] <= here[b]);
                    if !(in_k && in_t && in_q) {
                        problems.push(format!("monotonicity k={k} t={t} q={q}"));
                    }
                }
            }
        }
        let detail = match problems.first() {
            None => format!("{} cells", grid.len()),
            Some(p) => format!("{} problems, first: {p}", problems.len()),
        };
        Ok((problems.is_empty(), detail))
    })
}

/// Caterpillars maximize increasing sums of descendant counts; balanced
/// trees minimize convex sums over all edges.
pub fn extremality() -> CheckLine {
    let increasing: [fn(usize) -> f64; 3] =
        [|x| x as f64, |x| (x * x) as f64, |x| 2f64.powi(x as i32) * x.min(20) as f64];
    let convex: [fn(usize) -> f64; 3] = [|x| x as f64, |x| (x * x) as f64, |x| 2f64.powi(x as i32)];
    CheckLine::run("extremality k=5..7", || {
        let mut trees = 0usize;
        let mut ok = true;
        for k in 5..=7 {
            let cat = descendant_counts(&caterpillar(k, 1.0)?)?;
            let bal = all_edge_counts(&balanced(k, 1.0)?);
            for tree in enumerate_topologies(k)? {
                trees += 1;
                let counts = descendant_counts(&tree)?;
                let edges = all_edge_counts(&tree);
                ok &= increasing.iter().all(|&f| counts.sum_by(f) <= cat.sum_by(f) + 1e-9);
                ok &= convex.iter().all(|f| {
                    let s: f64 = edges.iter().map(|&a| f(a)).sum();
                    s >= bal.iter().map(|&a| f(a)).sum::<f64>() - 1e-9
                });
            }
        }
        Ok((ok, format!("{trees} topologies")))
    })
}

pub fn asymptotics() -> CheckReport {
    CheckReport { lines: vec![large_time(), small_time(), gap_law(), improvement_factor(), log_limit()] }
}

fn in_band(r: f64) -> bool {
    (0.99..=1.01).contains(&r)
}

/// Strictly shrinking distance to `target` along the sequence.
fn approaches(values: &[f64], target: f64) -> bool {
    values.windows(2).all(|w| (w[1] - target).abs() < (w[0] - target).abs())
}

fn list(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.6e}")).collect::<Vec<_>>().join(", ")
}

pub fn large_time() -> CheckLine {
    CheckLine::run("large-T tail of g(10,1,T)", || {
        let r = (1.0 - g(10, 1, 20.0)?) * 20f64.exp() * 11.0 / 27.0;
        Ok((in_band(r), format!("ratio {r:.6} (band [0.99, 1.01])")))
    })
}

pub fn small_time() -> CheckLine {
    CheckLine::run("small-T power law of g(5,1,T)", || {
        let t: f64 = 1e-3;
        let r = g(5, 1, t)? / (120.0 / 16.0 * t.powi(4));
        Ok((in_band(r), format!("ratio {r:.6} (band [0.99, 1.01])")))
    })
}

pub fn gap_law() -> CheckLine {
    CheckLine::run("gap law toward f_infinity(1)", || {
        let f = f_infinity(1.0)?;
        let a = [100, 200, 400].iter().map(|&k| scaled_gap(k, 1.0)).collect::<Result<Vec<_>>>()?;
        Ok((approaches(&a, f), format!("k=100,200,400: {} vs {f:.6e}", list(&a))))
    })
}

pub const SMALL_TIMES: [f64; 3] = [0.2, 0.1, 0.05];

pub fn improvement_factor() -> CheckLine {
    CheckLine::run("improvement factor scaled by 2T/pi^2", || {
        let r = SMALL_TIMES.iter().map(|&t| Ok(beta_t(t)?.scaled())).collect::<Result<Vec<_>>>()?;
        // the gap-law substitute 1 + 2f/(u s), shown for comparison only
        let approx = SMALL_TIMES
            .iter()
            .map(|&t| Ok((1.0 + 2.0 * f_infinity(t)? / (u_of_t(t)? * s_infinity(t)?)) * 2.0 * t / (PI * PI)))
            .collect::<Result<Vec<_>>>()?;
        Ok((approaches(&r, 1.0), format!("T=0.2,0.1,0.05: {} (gap-law form: {})", list(&r), list(&approx))))
    })
}

pub fn log_limit() -> CheckLine {
    CheckLine::run("log s(T) scaled by T/(-pi^2/2)", || {
        let r =
            SMALL_TIMES.iter().map(|&t| Ok(log_s_infinity(t)? * t / -(PI * PI / 2.0))).collect::<Result<Vec<_>>>()?;
        Ok((approaches(&r, 1.0), format!("T=0.2,0.1,0.05: {}", list(&r))))
    })
}
