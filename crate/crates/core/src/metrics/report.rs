use std::fmt::Write;

use super::{EvalReport, StepScore};

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"))
}

fn full(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

struct Row<'a> {
    label: String,
    steps: &'a [StepScore],
    rmse_star: Option<&'a [f64]>,
    mae_star: Option<&'a [f64]>,
    missing_rate: Option<f64>,
}

fn rows(report: &EvalReport) -> Vec<Row<'_>> {
    let prompts = report.per_method.iter().map(|(kind, s)| Row {
        label: kind.display_name().to_string(),
        steps: &s.per_step,
        rmse_star: s.rmse_star.as_deref(),
        mae_star: s.mae_star.as_deref(),
        missing_rate: Some(s.missing_rate),
    });
    let classical = report.baselines.iter().map(|b| Row {
        label: b.label.clone(),
        steps: &b.per_step,
        rmse_star: None,
        mae_star: None,
        missing_rate: None,
    });
    prompts.chain(classical).collect()
}

/// Markdown tables with 6-decimal display rounding.
///
/// One-step reports use a single RMSE/MAE/RMSE*/MAE* table; multi-step
/// reports get one table per metric with a column per forecasting step.
pub fn to_markdown(report: &EvalReport) -> String {
    let mut out = String::new();
    let h = report.horizon;
    let rows = rows(report);
    let _ = writeln!(out, "# {} (horizon {h})\n", report.dataset_id);
    let _ = writeln!(
        out,
        "RMSE* and MAE* are evaluated over the {} samples parsed under every prompting method.\n",
        report.n_common
    );

    if h == 1 {
        out.push_str("| Method | RMSE | MAE | RMSE* | MAE* | Missing rate |\n");
        out.push_str("|---|---|---|---|---|---|\n");
        for r in &rows {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} |",
                r.label,
                cell(r.steps[0].rmse),
                cell(r.steps[0].mae),
                cell(r.rmse_star.map(|s| s[0])),
                cell(r.mae_star.map(|s| s[0])),
                cell(r.missing_rate),
            );
        }
        return out;
    }

    let header = {
        let mut s = "| Forecasting step |".to_string();
        for k in 1..=h {
            let _ = write!(s, " {k} |");
        }
        s.push_str("\n|---|");
        s.push_str(&"---|".repeat(h));
        s.push('\n');
        s
    };
    type Pick<'r> = fn(&Row<'r>, usize) -> Option<f64>;
    let tables: [(&str, Pick); 4] = [
        ("RMSE", |r, k| r.steps[k].rmse),
        ("MAE", |r, k| r.steps[k].mae),
        ("RMSE*", |r, k| r.rmse_star.map(|s| s[k])),
        ("MAE*", |r, k| r.mae_star.map(|s| s[k])),
    ];
    for (title, pick) in tables {
        let _ = writeln!(out, "## {title}\n");
        out.push_str(&header);
        for r in &rows {
            if title.ends_with('*') && r.missing_rate.is_none() {
                continue;
            }
            let _ = write!(out, "| {} |", r.label);
            for k in 0..h {
                let _ = write!(out, " {} |", cell(pick(r, k)));
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out.push_str("## Missing rate\n\n| Method | Missing rate |\n|---|---|\n");
    for r in rows.iter().filter(|r| r.missing_rate.is_some()) {
        let _ = writeln!(out, "| {} | {} |", r.label, cell(r.missing_rate));
    }
    out
}

/// One row per (method, step) at full precision.
pub fn to_csv(report: &EvalReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = [
        "method", "step", "rmse", "mae", "n_scored", "rmse_star", "mae_star", "n_common", "missing_rate",
    ];
    w.write_record(header).expect("in-memory write");
    for r in rows(report) {
        for (k, s) in r.steps.iter().enumerate() {
            let is_prompt = r.missing_rate.is_some();
            w.write_record([
                r.label.clone(),
                (k + 1).to_string(),
                full(s.rmse),
                full(s.mae),
                s.n_scored.to_string(),
                full(r.rmse_star.map(|v| v[k])),
                full(r.mae_star.map(|v| v[k])),
                if is_prompt { report.n_common.to_string() } else { String::new() },
                full(r.missing_rate),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8 csv")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{MethodScores, StepScore};
    use crate::prompt::PromptKind;

    fn report(h: usize) -> EvalReport {
        let step = StepScore { rmse: Some(1.0 / 3.0), mae: Some(0.25), n_scored: 4 };
        let scores = MethodScores {
            per_step: vec![step; h],
            missing_rate: 0.2,
            n_samples: 5,
            rmse_star: Some(vec![0.5; h]),
            mae_star: None,
            n_common: 4,
        };
        EvalReport {
            dataset_id: "sg".into(),
            horizon: h,
            n_common: 4,
            per_method: vec![(PromptKind::Baseline, scores.clone()), (PromptKind::ZeroShotLst, scores)],
            baselines: Vec::new(),
        }
    }

    #[test]
    fn single_step_markdown() {
        let md = to_markdown(&report(1));
        assert!(md.contains("| Baseline | 0.333333 | 0.250000 | 0.500000 | - | 0.200000 |"), "{md}");
        let b = md.find("| Baseline").unwrap();
        assert!(b < md.find("| Zero-shot LST").unwrap());
    }

    #[test]
    fn multi_step_markdown_has_step_columns() {
        let md = to_markdown(&report(6));
        assert!(md.contains("| Forecasting step | 1 | 2 | 3 | 4 | 5 | 6 |"));
        assert!(md.contains("## MAE*"));
    }

    #[test]
    fn csv_is_full_precision() {
        let csv = to_csv(&report(2));
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "method,step,rmse,mae,n_scored,rmse_star,mae_star,n_common,missing_rate"
        );
        assert_eq!(lines.next().unwrap(), "Baseline,1,0.3333333333333333,0.25,4,0.5,,4,0.2");
        assert_eq!(csv.lines().count(), 5);
    }
}
