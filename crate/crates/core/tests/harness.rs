use approx::assert_relative_eq;

use lab_core::grid::{Extension, Grid, RealFunction};
use lab_core::harness::{self, parse_spec, run_with, ExperimentReport, TestFunction};
use lab_core::lorentz::{weak_norm, MeasureView};
use lab_core::operators::multiplier::{direct_multiplier, AtomicMeasure, Symbol};

fn run(text: &str) -> ExperimentReport {
    harness::run(&parse_spec(text).unwrap()).unwrap()
}

fn run_on(text: &str, inputs: &[(TestFunction, TestFunction)]) -> ExperimentReport {
    run_with(&parse_spec(text).unwrap(), inputs).unwrap()
}

fn chi01() -> TestFunction {
    TestFunction::Indicator { a: 0.0, b: 1.0 }
}

fn check_row_invariants(report: &ExperimentReport) {
    assert!(!report.rows.is_empty());
    for r in &report.rows {
        if r.rhs > 0.0 && r.lhs > 0.0 {
            assert_relative_eq!(r.ratio * r.rhs, r.lhs, max_relative = 1e-12);
        } else if r.lhs == 0.0 {
            assert_eq!(r.ratio, 0.0);
        }
    }
    let max = report.rows.iter().filter(|r| !r.vacuous).map(|r| r.ratio).fold(0.0, f64::max);
    assert_eq!(report.summary.max_ratio, max);
    let ids: Vec<&str> = report.rows.iter().map(|r| r.case_id.as_str()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
}

#[test]
fn rows_satisfy_ratio_and_maximum_invariants() {
    for text in [
        "e1 { p1=2 p2=2 w1=power(0.5) w2=one family=mixed(8) N=1024 seed=3 }",
        "e2 { p1=3 p2=1.5 w1=one w2=power(0.25) family=steps(8) N=1024 seed=4 }",
        "e5 { w1=power(-0.25) w2=one mu=random(2) family=indicators(8) N=1024 seed=5 }",
        "e7 { p1=2 p2=2 w1=one w2=one family=bumps(6) N=1024 seed=6 }",
    ] {
        check_row_invariants(&run(text));
    }
}

#[test]
fn identical_spec_and_seed_give_identical_reports() {
    let text = "e2 { p1=2 p2=2 w1=power(1) w2=power(1) family=mixed(10) N=1024 seed=9 }";
    let a = run(text);
    let b = run(text);
    assert_eq!(a, b);
    let dir = tempfile_dir();
    harness::write_report(&a, &dir.join("a")).unwrap();
    harness::write_report(&b, &dir.join("b")).unwrap();
    let rows = |d: &str| std::fs::read(dir.join(d).join(harness::ROWS_FILE)).unwrap();
    assert_eq!(rows("a"), rows("b"));
    let c = run("e2 { p1=2 p2=2 w1=power(1) w2=power(1) family=mixed(10) N=1024 seed=10 }");
    assert_ne!(a.rows, c.rows);
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("lab-core-harness-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn maximal_trace_is_monotone_under_refinement() {
    let report = run("e2 { p1=2 p2=2 w1=one w2=one family=indicators(12) N=1024 seed=2 }");
    let trace = &report.summary.trace;
    assert_eq!(trace.len(), 2);
    assert_eq!(trace[1].n, 2 * trace[0].n);
    let h = 16.0 / trace[0].n as f64;
    assert!(trace[1].max_lhs >= trace[0].max_lhs * (1.0 - 2.0 * h), "{trace:?}");
}

#[test]
fn e1_indicator_right_side_and_zero_input() {
    let text = "e1 { p1=2 p2=2 p=1 w1=one w2=one }";
    let report = run_on(text, &[(chi01(), chi01()), (chi01(), TestFunction::Zero)]);
    let full = report.rows.iter().find(|r| !r.description.contains("zero")).unwrap();
    // ||chi_E||_{L^{2,1}} = 2 |E|^{1/2}
    assert_relative_eq!(full.rhs, 4.0, max_relative = 1e-12);
    assert!(full.lhs > 0.0 && full.ratio.is_finite());
    let zero = report.rows.iter().find(|r| r.description.contains("zero")).unwrap();
    assert_eq!(zero.lhs, 0.0);
    assert_eq!(zero.ratio, 0.0);
}

#[test]
fn e4_unit_weights_match_the_weak_l1_norm_of_m_chi() {
    let report = run_on("e4 { q=1 t=id u=one v=one }", &[(chi01(), TestFunction::Zero)]);
    let row = report.rows_of_kind("maximal").next().unwrap();
    assert_relative_eq!(row.rhs, 1.0, max_relative = 1e-12);
    // M chi_[0,1] = 1/(1 + d) at distance d; the level set above lambda, cut to the
    // window [-4, 4), has measure min(1/lambda, 4) + min(1/lambda - 1, 4)
    let g = |l: f64| l * ((1.0 / l).min(4.0) + (1.0 / l - 1.0).min(4.0));
    let exact = (1..=100_000).map(|k| g(k as f64 / 100_000.0)).fold(0.0, f64::max);
    assert_relative_eq!(exact, 1.75, max_relative = 1e-9);
    assert_relative_eq!(row.lhs, exact, max_relative = 1e-2);

    let zero = run_on("e4 { q=1 t=id u=one v=one }", &[(TestFunction::Zero, TestFunction::Zero)]);
    assert!(zero.rows.iter().all(|r| r.lhs == 0.0));
}

#[test]
fn e5_dirac_measure_matches_the_direct_sum() {
    let report = run_on("e5 { w1=one w2=one mu=dirac(0,0) }", &[(chi01(), chi01()), (TestFunction::Zero, chi01())]);
    let row = report.rows.iter().find(|r| r.rhs > 0.0).unwrap();
    assert_relative_eq!(row.rhs, 1.0, max_relative = 1e-12);

    let g = Grid::desk();
    let chi = RealFunction::indicator(g, 0.0, 1.0).with_extension(Extension::Periodic);
    let direct = direct_multiplier(&chi, &chi, &Symbol::FromMeasure(AtomicMeasure::dirac(0.0, 0.0))).unwrap();
    let nu = MeasureView::lebesgue(g, g.inner_window());
    let expect = weak_norm(&direct.map(|z| z.norm()), &nu, 0.5).unwrap();
    // the experiment uses the zero-padded quadrature, the oracle the periodic spectral sum
    assert_relative_eq!(row.lhs, expect, max_relative = 5e-2);

    let empty = report.rows.iter().find(|r| r.rhs == 0.0).unwrap();
    assert_eq!(empty.lhs, 0.0);
}

#[test]
fn e6_indicator_right_side_has_the_closed_form() {
    let report = run_on("e6 { p1=2 p2=2 q1=3 q2=3 w1=one w2=one mu=dirac(0,0) }", &[(chi01(), TestFunction::Indicator { a: -1.0, b: 1.0 })]);
    // (p/r)^{1/r} |E|^{1/p} with r = p/q
    let factor = |len: f64| 3.0f64.powf(1.5) * len.sqrt();
    assert_relative_eq!(report.rows[0].rhs, factor(1.0) * factor(2.0), max_relative = 1e-12);
}

#[test]
fn e7_chain_is_homogeneous() {
    let text = "e7 { p1=2 p2=2 w1=one w2=one }";
    let c = 3.0;
    let base = run_on(text, &[(chi01(), chi01())]);
    let scaled = run_on(text, &[(chi01(), TestFunction::Scaled(Box::new(chi01()), c))]);
    let (a, b) = (&base.rows[0], &scaled.rows[0]);
    // p = 1 for (2, 2; 1)
    assert_relative_eq!(b.lhs, c * a.lhs, max_relative = 1e-10);
    assert_relative_eq!(b.rhs, c * a.rhs, max_relative = 1e-10);
    assert_relative_eq!(b.readings["factor1"], a.readings["factor1"], max_relative = 1e-10);
    assert_relative_eq!(b.readings["factor2"], c * a.readings["factor2"], max_relative = 1e-10);
    assert!(a.ratio.is_finite() && a.lhs > 0.0);
}

#[test]
fn e3_identity_hypothesis_never_exceeds_one() {
    let report = run("e3 { q=2 t=id u=one v=one w=[one, power(1), power(-0.5)] p0=[0.5,2] family=mixed(10) N=1024 seed=8 }");
    let hyp: Vec<f64> = report.rows_of_kind("hypothesis").map(|r| r.ratio).collect();
    assert_eq!(hyp.len(), 3 * 2 * 10);
    assert!(hyp.iter().all(|r| *r <= 1.0));
    assert!(report.summary.violations.is_empty(), "{:?}", report.summary.violations);
}

mod envelope {
    use lab_core::harness::EnvelopeFit;
    use proptest::collection::vec;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn nondecreasing_readings_have_no_excess(mut pts in vec((0.1f64..10.0, 0.1f64..10.0), 2..24)) {
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut run = 0.0f64;
            for p in &mut pts {
                run = run.max(p.1);
                p.1 = run;
            }
            let fit = EnvelopeFit::new(pts, 0.15);
            prop_assert_eq!(fit.worst_excess, 0.0);
            prop_assert!(fit.within_slack);
        }

        #[test]
        fn excess_is_scale_free(pts in vec((0.1f64..10.0, 0.1f64..10.0), 2..24), c in 0.01f64..100.0) {
            let a = EnvelopeFit::new(pts.clone(), 0.15);
            let b = EnvelopeFit::new(pts.iter().map(|&(x, y)| (x * c, y * c)).collect(), 0.15);
            prop_assert!((a.worst_excess - b.worst_excess).abs() <= 1e-12 * (1.0 + a.worst_excess));
        }
    }
}
