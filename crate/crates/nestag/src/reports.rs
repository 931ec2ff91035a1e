//! Report writers: CSV tables (overall with averages and mean span
//! length, per class, per word-length, per nested level, confusion
//! matrix), a JSON mirror of the whole report, and the training epoch
//! log.

use std::collections::BTreeMap;

use nestag_core::evaluation::{EvalReport, GroupKey, Prf};
use nestag_core::training::EpochRecord;
use serde::Serialize;

fn fmt(v: f64) -> String {
    format!("{v:.4}")
}

/// Overall row: macro/micro precision, recall, F1 and the average
/// predicted span length.
pub fn overall_csv(report: &EvalReport) -> String {
    let mut out = String::from("p_ma,p_mi,r_ma,r_mi,f1_ma,f1_mi,avg_len\n");
    out.push_str(&format!(
        "{},{},{},{},{},{},{}\n",
        fmt(report.macro_scores.precision),
        fmt(report.micro.precision()),
        fmt(report.macro_scores.recall),
        fmt(report.micro.recall()),
        fmt(report.macro_scores.f1),
        fmt(report.micro.f1()),
        fmt(report.average_predicted_length),
    ));
    out
}

fn group_csv(header: &str, map: &BTreeMap<GroupKey, Prf>) -> String {
    let mut out = format!("{header},tp,fp,fn,precision,recall,f1\n");
    for (key, prf) in map {
        out.push_str(&format!(
            "{key},{},{},{},{},{},{}\n",
            prf.tp,
            prf.fp,
            prf.fn_,
            fmt(prf.precision()),
            fmt(prf.recall()),
            fmt(prf.f1()),
        ));
    }
    out
}

pub fn per_length_csv(report: &EvalReport) -> String {
    group_csv("length", &report.per_length)
}

pub fn per_class_csv(report: &EvalReport) -> String {
    group_csv("class", &report.per_class)
}

pub fn per_level_csv(report: &EvalReport) -> String {
    group_csv("level", &report.per_level)
}

/// Confusion matrix: rows are gold labels, columns predictions; `none`
/// covers intervals seen on only one side.
pub fn confusion_csv(report: &EvalReport) -> String {
    let cm = &report.confusion;
    let mut names = vec!["none".to_string()];
    names.extend(cm.labels.iter().cloned());
    let mut out = String::from("gold\\predicted");
    for n in &names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for (gi, gname) in names.iter().enumerate() {
        out.push_str(gname);
        for pi in 0..names.len() {
            out.push_str(&format!(",{}", cm.count(gi, pi)));
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct PrfJson {
    tp: usize,
    fp: usize,
    #[serde(rename = "fn")]
    fn_: usize,
    precision: f64,
    recall: f64,
    f1: f64,
}

impl From<&Prf> for PrfJson {
    fn from(p: &Prf) -> Self {
        PrfJson {
            tp: p.tp,
            fp: p.fp,
            fn_: p.fn_,
            precision: p.precision(),
            recall: p.recall(),
            f1: p.f1(),
        }
    }
}

#[derive(Serialize)]
struct ReportJson {
    micro: PrfJson,
    macro_precision: f64,
    macro_recall: f64,
    macro_f1: f64,
    per_length: BTreeMap<String, PrfJson>,
    per_class: BTreeMap<String, PrfJson>,
    per_nested_level: BTreeMap<String, PrfJson>,
    average_predicted_length: f64,
    confusion_labels: Vec<String>,
    confusion_counts: Vec<Vec<usize>>,
}

pub fn report_json(report: &EvalReport) -> String {
    let flat = |map: &BTreeMap<GroupKey, Prf>| -> BTreeMap<String, PrfJson> {
        map.iter().map(|(k, v)| (k.to_string(), v.into())).collect()
    };
    let size = report.confusion.size();
    let counts = (0..size)
        .map(|g| (0..size).map(|p| report.confusion.count(g, p)).collect())
        .collect();
    let json = ReportJson {
        micro: (&report.micro).into(),
        macro_precision: report.macro_scores.precision,
        macro_recall: report.macro_scores.recall,
        macro_f1: report.macro_scores.f1,
        per_length: flat(&report.per_length),
        per_class: flat(&report.per_class),
        per_nested_level: flat(&report.per_level),
        average_predicted_length: report.average_predicted_length,
        confusion_labels: report.confusion.labels.clone(),
        confusion_counts: counts,
    };
    let mut s = serde_json::to_string_pretty(&json).expect("report serializes");
    s.push('\n');
    s
}

pub const EPOCH_LOG_HEADER: &str =
    "epoch,task,loss,val_ma_p,val_ma_r,val_ma_f1,val_mi_p,val_mi_r,val_mi_f1";

/// Training log: one row per (epoch, task); validation columns repeat the
/// epoch's scores on every task row and stay empty when the epoch was not
/// validated.
pub fn epoch_log_csv(log: &[EpochRecord]) -> String {
    let mut out = String::from(EPOCH_LOG_HEADER);
    out.push('\n');
    for record in log {
        for (task_idx, loss) in record.task_losses.iter().enumerate() {
            let val = match &record.validation {
                Some(v) => format!(
                    "{},{},{},{},{},{}",
                    format_args!("{:.6}", v.macro_p),
                    format_args!("{:.6}", v.macro_r),
                    format_args!("{:.6}", v.macro_f1),
                    format_args!("{:.6}", v.micro_p),
                    format_args!("{:.6}", v.micro_r),
                    format_args!("{:.6}", v.micro_f1),
                ),
                None => ",,,,,".to_string(),
            };
            out.push_str(&format!(
                "{},{},{:.6},{}\n",
                record.epoch,
                task_idx + 1,
                loss,
                val
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nestag_core::evaluation::{evaluate, DocSpan};
    use nestag_core::training::ValidationScores;
    use nestag_core::Span;

    fn sample_report() -> EvalReport {
        let labels = vec!["Protein".to_string(), "DNA".to_string()];
        let gold = vec![
            DocSpan::new(0, Span::new(0, 1, "Protein")),
            DocSpan::new(0, Span::new(0, 2, "DNA")),
            DocSpan::new(1, Span::new(2, 1, "Protein")),
        ];
        let pred = vec![
            DocSpan::new(0, Span::new(0, 1, "Protein")),
            DocSpan::new(0, Span::new(0, 2, "Protein")),
            DocSpan::new(1, Span::new(3, 1, "DNA")),
        ];
        evaluate(&gold, &pred, &labels)
    }

    #[test]
    fn overall_csv_has_exact_shape() {
        let csv = overall_csv(&sample_report());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "p_ma,p_mi,r_ma,r_mi,f1_ma,f1_mi,avg_len");
        assert_eq!(lines[1].split(',').count(), 7);
    }

    #[test]
    fn per_group_csvs_list_groups_in_order() {
        let report = sample_report();
        let csv = per_length_csv(&report);
        assert!(csv.starts_with("length,tp,fp,fn,precision,recall,f1\n"));
        assert_eq!(csv.lines().count(), 1 + report.per_length.len());
        let csv = per_class_csv(&report);
        assert!(csv.contains("\nDNA,"));
        assert!(csv.contains("\nProtein,"));
    }

    #[test]
    fn confusion_csv_is_square() {
        let report = sample_report();
        let csv = confusion_csv(&report);
        let lines: Vec<&str> = csv.lines().collect();
        let cols = lines[0].split(',').count();
        assert_eq!(lines.len(), cols);
        for line in &lines[1..] {
            assert_eq!(line.split(',').count(), cols);
        }
    }

    #[test]
    fn json_is_valid_and_complete() {
        let json = report_json(&sample_report());
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert!(value.get("micro").is_some());
        assert!(value.get("per_length").is_some());
        assert!(value.get("per_nested_level").is_some());
        assert!(value.get("confusion_counts").is_some());
    }

    #[test]
    fn epoch_log_matches_contract() {
        let log = vec![EpochRecord {
            epoch: 1,
            task_losses: vec![0.5, 0.25],
            validation: Some(ValidationScores {
                macro_p: 0.1,
                macro_r: 0.2,
                macro_f1: 0.15,
                micro_p: 0.3,
                micro_r: 0.4,
                micro_f1: 0.35,
            }),
        }];
        let csv = epoch_log_csv(&log);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], EPOCH_LOG_HEADER);
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("1,1,0.500000,"));
        assert!(lines[2].starts_with("1,2,0.250000,"));
    }
}
