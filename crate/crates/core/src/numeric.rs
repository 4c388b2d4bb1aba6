//! Small numeric helpers shared across modules.

use std::sync::OnceLock;

/// Largest `n` for which `ln_factorial` is tabulated.
const LN_FACTORIAL_MAX: usize = 2100;

/// Neumaier-compensated accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::default();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub(crate) fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

fn ln_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = Vec::with_capacity(LN_FACTORIAL_MAX + 1);
        let mut acc = CompensatedSum::default();
        table.push(0.0);
        for n in 1..=LN_FACTORIAL_MAX {
            acc.add((n as f64).ln());
            table.push(acc.value());
        }
        table
    })
}

/// `ln(n!)`, tabulated up to 2100.
pub(crate) fn ln_factorial(n: usize) -> f64 {
    ln_factorial_table()[n]
}

/// Formats like C's `%.17g`: 17 significant digits, trailing zeros removed.
pub(crate) fn format_g17(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exponent) = sci.split_once('e').expect("scientific format");
    let exponent: i32 = exponent.parse().expect("exponent");
    if (-5..17).contains(&exponent) {
        let decimals = (16 - exponent).max(0) as usize;
        strip_zeros(format!("{:.*}", decimals, x))
    } else {
        let mantissa = strip_zeros(mantissa.to_string());
        let sign = if exponent < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exponent.abs())
    }
}

fn strip_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(xs), 2.0);
    }

    #[test]
    fn ln_factorial_matches_direct_product() {
        assert_eq!(ln_factorial(0), 0.0);
        assert!((ln_factorial(10) - 3628800f64.ln()).abs() < 1e-13);
        // Stirling with two correction terms at n = 1000
        let n = 1000f64;
        let stirling =
            n * n.ln() - n + 0.5 * (2.0 * std::f64::consts::PI * n).ln() + 1.0 / (12.0 * n) - 1.0 / (360.0 * n.powi(3));
        assert!((ln_factorial(1000) - stirling).abs() < 1e-10);
    }

    #[test]
    fn g17_matches_printf() {
        assert_eq!(format_g17(0.5), "0.5");
        assert_eq!(format_g17(0.2), "0.20000000000000001");
        assert_eq!(format_g17(1.0), "1");
        assert_eq!(format_g17(0.3), "0.29999999999999999");
        assert_eq!(format_g17(1e-7), "9.9999999999999995e-08");
        assert_eq!(format_g17(123456.0), "123456");
        assert_eq!(format_g17(1e20), "1e+20");
    }
}
