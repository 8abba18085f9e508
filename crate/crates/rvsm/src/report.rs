//! Evaluation report output: JSON and a plain-text per-class table.

use std::fmt::Write as _;
use std::path::Path;

use rvsm_core::{ClassDictionary, ClassTrainSummary, EvalReport};

use crate::{json, Result};

/// Fills class names from the dictionary.
pub fn name_classes(report: &mut EvalReport, dict: &ClassDictionary) {
    for c in &mut report.per_class {
        if let Some(e) = dict.get(c.class_id) {
            c.name = Some(e.name.clone());
        }
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"))
}

/// One row per class plus the average, columns aligned.
pub fn eval_table(report: &EvalReport) -> String {
    let names: Vec<String> =
        report.per_class.iter().map(|c| c.name.clone().unwrap_or_else(|| format!("class_{}", c.class_id))).collect();
    let width = names.iter().map(String::len).chain(["Average".len(), "class".len()]).max().unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:>6}  {:>8}  {:>8}  {:>11}", "class", "id", "support", "AUC", "sensitivity");
    for (c, name) in report.per_class.iter().zip(&names) {
        let _ = writeln!(
            out,
            "{:<width$}  {:>6}  {:>8}  {:>8}  {:>11}",
            name,
            c.class_id,
            c.support,
            cell(c.auc),
            cell(c.mean_sensitivity)
        );
    }
    let _ = writeln!(
        out,
        "{:<width$}  {:>6}  {:>8}  {:>8}  {:>11}",
        "Average",
        "",
        "",
        cell(report.average_auc),
        cell(report.average_sensitivity)
    );
    out
}

/// Relevance-vector counts against positive and negative instance counts.
pub fn training_table(summaries: &[ClassTrainSummary], dict: &ClassDictionary) -> String {
    let names: Vec<String> = summaries
        .iter()
        .map(|s| dict.get(s.class_id).map_or_else(|| format!("class_{}", s.class_id), |e| e.name.clone()))
        .collect();
    let width = names.iter().map(String::len).chain(["class".len()]).max().unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:>6}  {:>9}  {:>9}  {:>8}  {:>10}", "class", "id", "positive", "negative", "RVs", "iterations");
    for (s, name) in summaries.iter().zip(&names) {
        let rvs = if s.untrainable.is_some() { "-".to_string() } else { s.relevance_vectors.to_string() };
        let _ = writeln!(
            out,
            "{:<width$}  {:>6}  {:>9}  {:>9}  {:>8}  {:>10}",
            name, s.class_id, s.positives, s.negatives, rvs, s.iterations
        );
    }
    out
}

pub fn save_report(report: &EvalReport, path: &Path) -> Result<()> {
    json::write_file(path, report)
}
