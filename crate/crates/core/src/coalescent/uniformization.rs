//! Transient distribution of a pure-death (sequential) Markov chain by
//! uniformization. Every term is nonnegative, so there is no cancellation.

/// Standard deviations of Poisson mass kept on each side of the mean.
const TAIL_SIGMAS: f64 = 40.0;
/// Extra steps kept beyond the sigma window (matters for small means).
const TAIL_SLACK: f64 = 60.0;

/// Poisson(mean) weights on `[lo, hi]`, normalized over that window.
///
/// Weights are built by ratio recursion outward from the mode, so large
/// means do not underflow the way `exp(-mean)` would.
fn poisson_window(mean: f64) -> (usize, Vec<f64>) {
    let spread = TAIL_SIGMAS * mean.sqrt() + TAIL_SLACK;
    let lo = (mean - spread).floor().max(0.0) as usize;
    let hi = (mean + spread).ceil() as usize;
    let mode = (mean.floor() as usize).clamp(lo, hi);

    let mut w = vec![0.0; hi - lo + 1];
    w[mode - lo] = 1.0;
    for n in mode + 1..=hi {
        w[n - lo] = w[n - 1 - lo] * mean / n as f64;
    }
    for n in (lo..mode).rev() {
        w[n - lo] = w[n + 1 - lo] * (n + 1) as f64 / mean;
    }
    let total: f64 = crate::numeric::compensated_sum(w.iter().copied());
    for x in &mut w {
        *x /= total;
    }
    (lo, w)
}

/// Occupancy probabilities at time `t` of a chain on states `0..=n`
/// (`n = exit_rates.len()`) that starts in state 0 and moves from state `s`
/// to `s + 1` at rate `exit_rates[s]`. State `n` is absorbing.
pub(crate) fn occupancy(exit_rates: &[f64], t: f64) -> Vec<f64> {
    let n = exit_rates.len();
    let mut out = vec![0.0; n + 1];
    let max_rate = exit_rates.iter().copied().fold(0.0, f64::max);
    if t == 0.0 || max_rate == 0.0 {
        out[0] = 1.0;
        return out;
    }

    let move_p: Vec<f64> = exit_rates.iter().map(|r| r / max_rate).collect();
    let stay_p: Vec<f64> = exit_rates.iter().map(|r| (max_rate - r) / max_rate).collect();
    let (lo, weights) = poisson_window(max_rate * t);
    let hi = lo + weights.len() - 1;

    let mut v = vec![0.0; n + 1];
    v[0] = 1.0;
    for step in 0..=hi {
        if step >= lo {
            let w = weights[step - lo];
            if w > 0.0 {
                for (o, x) in out.iter_mut().zip(&v) {
                    *o += w * x;
                }
            }
        }
        // one jump of the uniformized chain; descending order keeps v[s-1] old
        let top = step.min(n - 1) + 1;
        if top == n {
            v[n] += v[n - 1] * move_p[n - 1];
        } else {
            v[top] = v[top - 1] * move_p[top - 1];
        }
        for s in (1..top).rev() {
            v[s] = v[s] * stay_p[s] + v[s - 1] * move_p[s - 1];
        }
        v[0] *= stay_p[0];
    }
    out
}
