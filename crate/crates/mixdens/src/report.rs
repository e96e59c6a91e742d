//! Result tables: CSV files for machines and a fixed-width text layout for
//! people.

use std::fmt::Write as _;

use mixdens_core::copulas::format_nu;
use mixdens_core::evaluation::{CvResult, LossReport, RatioSummary};
use mixdens_core::simulation::{Loss, ReplicationOutcome};

use crate::csvio::{format_number, write_records};

fn to_csv(header: &[&str], records: &[Vec<String>]) -> String {
    let mut buf = Vec::new();
    write_records(&mut buf, header, records).expect("writing to memory");
    String::from_utf8(buf).expect("csv output is utf-8")
}

fn non_reference(report: &LossReport) -> impl Iterator<Item = (usize, &RatioSummary)> {
    report
        .rows
        .iter()
        .enumerate()
        .filter(move |(_, r)| r.name != report.reference)
}

/// One row per estimator: median log ratio against the reference, its
/// standard error, the signed-rank p-value and the stars. The reference row
/// is all zeros with p-value 1.
pub fn ratio_csv(report: &LossReport) -> String {
    let records: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.name.clone(),
                format_number(r.median),
                format_number(r.std_error),
                format_number(r.p_value),
                r.stars().to_string(),
                r.used.to_string(),
                r.non_positive.to_string(),
                r.non_finite.to_string(),
            ]
        })
        .collect();
    to_csv(
        &[
            "estimator",
            "median",
            "se",
            "p_value",
            "stars",
            "used",
            "non_positive",
            "non_finite",
        ],
        &records,
    )
}

/// Text table with one column per estimator and, for each loss, a row of
/// medians (with stars) above a row of bracketed standard errors. The
/// reference column reads 0 and carries no stars.
pub fn text_table(reports: &[(Loss, &LossReport)]) -> String {
    let Some((_, first)) = reports.first() else {
        return String::new();
    };
    let names: Vec<&str> = first.rows.iter().map(|r| r.name.as_str()).collect();
    let width = names.iter().map(|n| n.len()).max().unwrap_or(0).max(10) + 2;
    let mut out = String::new();
    let _ = writeln!(out, "Median log loss ratio against {}", first.reference);
    let _ = write!(out, "{:<6}", "");
    for n in &names {
        let _ = write!(out, "{n:>width$}");
    }
    out.push('\n');
    for (loss, report) in reports {
        let _ = write!(out, "{:<6}", loss.key());
        for r in &report.rows {
            let stars = if r.name == report.reference {
                ""
            } else {
                r.stars()
            };
            let cell = format!("{:.3}{stars}", r.median);
            let _ = write!(out, "{cell:>width$}");
        }
        out.push('\n');
        let _ = write!(out, "{:<6}", "");
        for r in &report.rows {
            let cell = format!("[{:.3}]", r.std_error);
            let _ = write!(out, "{cell:>width$}");
        }
        out.push('\n');
    }
    out.push_str("** p > 0.05, * 0.01 < p <= 0.05 (Wilcoxon signed-rank test of a zero median)\n");
    out
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Every loss of every estimator in every replication.
pub fn losses_csv(outcomes: &[ReplicationOutcome], labels: &[String]) -> String {
    let mut records = Vec::new();
    for o in outcomes {
        for (fit, label) in o.fits.iter().zip(labels) {
            records.push(vec![
                o.index.to_string(),
                label.clone(),
                format_number(fit.kl),
                format_number(fit.l2),
                fit.floored.to_string(),
                opt(fit.components),
                opt(fit.nu.map(format_number)),
                fit.error.clone().unwrap_or_default(),
            ]);
        }
    }
    to_csv(
        &[
            "replication",
            "estimator",
            "KL",
            "L2",
            "floored",
            "components",
            "nu",
            "error",
        ],
        &records,
    )
}

/// Long-format log ratios for plotting: one row per replication,
/// non-reference estimator and loss. Replications without a usable ratio
/// are left out.
pub fn plot_data_csv(reports: &[(Loss, &LossReport)], replication_ids: &[usize]) -> String {
    let mut records = Vec::new();
    for (loss, report) in reports {
        let reference = report
            .rows
            .iter()
            .position(|r| r.name == report.reference)
            .expect("reference row");
        for (j, row) in non_reference(report) {
            for (r, values) in report.losses.iter().enumerate() {
                let (a, b) = (values[j], values[reference]);
                if a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0 {
                    records.push(vec![
                        replication_ids.get(r).copied().unwrap_or(r).to_string(),
                        row.name.clone(),
                        loss.key().to_string(),
                        format_number(a.ln() - b.ln()),
                    ]);
                }
            }
        }
    }
    to_csv(&["replication", "estimator", "loss", "log_ratio"], &records)
}

/// Rank by LPS, 1 for the highest; estimators without a score come last.
pub fn lps_ranks(lps: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..lps.len()).collect();
    order.sort_by(|&a, &b| {
        let key = |v: f64| if v.is_nan() { f64::NEG_INFINITY } else { v };
        key(lps[b]).total_cmp(&key(lps[a])).then(a.cmp(&b))
    });
    let mut ranks = vec![0; lps.len()];
    for (rank, i) in order.into_iter().enumerate() {
        ranks[i] = rank + 1;
    }
    ranks
}

fn mean_cell(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.1}")).unwrap_or_default()
}

/// Cross-validation table: LPS, rank, mean number of components and mean
/// degrees of freedom over folds.
pub fn cv_csv(results: &[(String, CvResult)]) -> String {
    let ranks = lps_ranks(&results.iter().map(|(_, r)| r.lps).collect::<Vec<_>>());
    let records: Vec<Vec<String>> = results
        .iter()
        .zip(ranks)
        .map(|((name, r), rank)| {
            vec![
                name.clone(),
                format_number(r.lps),
                rank.to_string(),
                mean_cell(r.mean_components()),
                r.mean_nu().map(format_nu).unwrap_or_default(),
                r.failed().to_string(),
            ]
        })
        .collect();
    to_csv(
        &["estimator", "lps", "rank", "NoC", "DoF", "failed_folds"],
        &records,
    )
}

/// Human-readable version of [`cv_csv`].
pub fn cv_text(results: &[(String, CvResult)], folds: usize) -> String {
    let ranks = lps_ranks(&results.iter().map(|(_, r)| r.lps).collect::<Vec<_>>());
    let mut out = format!("{folds}-fold cross-validated log predictive score\n");
    let _ = writeln!(
        out,
        "{:<10}{:>14}{:>6}{:>7}{:>8}{:>8}",
        "estimator", "LPS", "rank", "NoC", "DoF", "failed"
    );
    for ((name, r), rank) in results.iter().zip(ranks) {
        let _ = writeln!(
            out,
            "{:<10}{:>14.3}{:>6}{:>7}{:>8}{:>8}",
            name,
            r.lps,
            rank,
            mean_cell(r.mean_components()),
            r.mean_nu().map(format_nu).unwrap_or_default(),
            r.failed()
        );
    }
    out
}
