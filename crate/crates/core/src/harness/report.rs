//! Report files: `rows.csv`, `summary.json`, and scatter plots under `plots/`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::experiments::{ExperimentReport, Summary};
use super::HarnessError;

pub const ROWS_FILE: &str = "rows.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    summary: &'a Summary,
    /// Case id to case description.
    cases: BTreeMap<&'a str, &'a str>,
}

/// Writes the report into `dir`, creating it if needed.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir.join("plots"))?;
    write_rows(report, &dir.join(ROWS_FILE))?;
    let file = SummaryFile {
        summary: &report.summary,
        cases: report.rows.iter().map(|r| (r.case_id.as_str(), r.description.as_str())).collect(),
    };
    fs::write(dir.join(SUMMARY_FILE), serde_json::to_string_pretty(&file)? + "\n")?;
    let points: Vec<(f64, f64)> =
        report.rows.iter().filter(|r| !r.vacuous).enumerate().map(|(i, r)| (i as f64, r.ratio)).collect();
    fs::write(dir.join("plots").join("ratio_by_case.svg"), scatter(&points, "case", "LHS / RHS"))?;
    for (name, fit) in &report.summary.envelopes {
        fs::write(dir.join("plots").join(format!("{name}.svg")), scatter(&fit.points, "certified constant", "measured constant"))?;
    }
    Ok(())
}

fn write_rows(report: &ExperimentReport, path: &Path) -> Result<(), HarnessError> {
    let columns: BTreeSet<&str> = report.rows.iter().flat_map(|r| r.readings.keys().map(String::as_str)).collect();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["case_id", "lhs", "rhs", "ratio"];
    header.extend(columns.iter().copied());
    header.push("vacuous");
    w.write_record(&header)?;
    for r in &report.rows {
        let mut record = vec![r.case_id.clone(), format_real(r.lhs), format_real(r.rhs), format_real(r.ratio)];
        record.extend(columns.iter().map(|c| r.readings.get(*c).map_or(String::new(), |v| format_real(*v))));
        record.push(u8::from(r.vacuous).to_string());
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// A bare scatter plot with linear axes.
pub fn scatter(points: &[(f64, f64)], x_label: &str, y_label: &str) -> String {
    const W: f64 = 480.0;
    const H: f64 = 320.0;
    const M: f64 = 48.0;
    let finite: Vec<(f64, f64)> = points.iter().copied().filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
    let bounds = |sel: fn(&(f64, f64)) -> f64| {
        let lo = finite.iter().map(sel).fold(f64::INFINITY, f64::min);
        let hi = finite.iter().map(sel).fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        }
    };
    let (x0, x1) = bounds(|p| p.0);
    let (y0, y1) = bounds(|p| p.1);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<path d="M{M} {M} V{} H{}" stroke="black" fill="none"/>"#, H - M, W - M);
    for (x, y) in &finite {
        let px = M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
        let py = H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
        let _ = writeln!(s, r#"<circle cx="{px:.2}" cy="{py:.2}" r="3" fill="steelblue"/>"#);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{x_label} [{x0:.4}, {x1:.4}]</text>"#, W / 2.0, H - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {})">{y_label} [{y0:.4}, {y1:.4}]</text>"#,
        H / 2.0,
        H / 2.0
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, 6.02e23, -2.5e-300, 4.0] {
            let s = format_real(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
            assert_eq!(mantissa.len(), 17);
        }
        assert_eq!(format_real(f64::INFINITY), "inf");
    }

    #[test]
    fn scatter_handles_degenerate_input() {
        assert!(scatter(&[], "x", "y").contains("</svg>"));
        assert_eq!(scatter(&[(1.0, 1.0), (1.0, f64::NAN)], "x", "y").matches("<circle").count(), 1);
    }
}
