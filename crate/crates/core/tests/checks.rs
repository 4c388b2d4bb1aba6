use bipcover::checks::{self, oracles_with, CheckReport, Suite};
use bipcover::coalescent::g;

fn line<'a>(report: &'a CheckReport, prefix: &str) -> &'a checks::CheckLine {
    report.lines.iter().find(|l| l.name.starts_with(prefix)).unwrap()
}

#[test]
fn oracle_suite_passes() {
    let report = checks::run(Suite::Oracles);
    assert!(report.passed(), "{report}");
    assert_eq!(report.lines.len(), 3);
}

#[test]
fn oracle_suite_catches_perturbed_kernel() {
    let report = oracles_with(&|i, j, t| Ok(g(i, j, t)? + 1e-6));
    assert!(!report.passed());
    assert!(!line(&report, "hypoexponential").passed);
    assert!(!line(&report, "closed forms").passed);
}

#[test]
fn dominance_suite_passes() {
    let report = checks::run(Suite::Dominance);
    assert!(report.passed(), "{report}");
}

#[test]
fn asymptotic_limits_and_tails() {
    let report = checks::run(Suite::Asymptotics);
    for name in ["large-T", "small-T", "gap law", "log s(T)"] {
        let l = line(&report, name);
        assert!(l.passed, "{l}");
    }
}

#[test]
fn report_format() {
    let report = checks::run(Suite::Asymptotics);
    let text = report.to_string();
    assert_eq!(text.lines().count(), report.lines.len() + 1);
    assert!(text.lines().take(report.lines.len()).all(|l| l.starts_with("PASS ") || l.starts_with("FAIL ")));
}
