use std::collections::BTreeSet;
use std::path::Path;

use vqart_core::abx::{AbxReport, FusionPoint};
use vqart_core::experiment::ExperimentResult;

use crate::error::{Error, Result};

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_rows(path: &Path, rows: Vec<Vec<String>>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    for r in rows {
        w.write_record(&r).map_err(|e| Error::format(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Square matrix with A consonants as rows and B consonants as columns.
/// Cells without tests are left empty.
pub fn write_pairwise_csv(path: &Path, report: &AbxReport) -> Result<()> {
    let labels: BTreeSet<&str> = report
        .pairwise
        .iter()
        .flat_map(|c| [c.consonant_a.as_str(), c.consonant_b.as_str()])
        .collect();
    let mut rows = vec![std::iter::once("a\\b".to_string()).chain(labels.iter().map(|s| s.to_string())).collect()];
    for a in &labels {
        let mut row = vec![a.to_string()];
        for b in &labels {
            let score = report
                .pairwise
                .iter()
                .find(|c| c.consonant_a == *a && c.consonant_b == *b && c.tests > 0)
                .map(|c| c.score());
            row.push(cell(score));
        }
        rows.push(row);
    }
    write_rows(path, rows)
}

/// `omega,overall,manner_score,place_score`, one row per grid point.
pub fn write_fusion_csv(path: &Path, points: &[FusionPoint]) -> Result<()> {
    let mut rows = vec![vec!["omega", "overall", "manner_score", "place_score"]
        .into_iter()
        .map(String::from)
        .collect()];
    for p in points {
        rows.push(vec![p.omega.to_string(), p.overall.to_string(), cell(p.manner), cell(p.place)]);
    }
    write_rows(path, rows)
}

/// Mean scores per speaker and modality, plus the failure count.
pub fn write_summary_csv(path: &Path, results: &[ExperimentResult]) -> Result<()> {
    let mut rows = vec![vec!["speaker", "modality", "repetitions", "overall", "manner_score", "place_score"]
        .into_iter()
        .map(String::from)
        .collect()];
    for r in results {
        for row in &r.summary.rows {
            rows.push(vec![
                r.speaker.clone(),
                row.modality.to_string(),
                row.repetitions.to_string(),
                row.overall.to_string(),
                cell(row.manner),
                cell(row.place),
            ]);
        }
    }
    write_rows(path, rows)
}

/// Markdown table of the experiment summaries.
pub fn render_markdown(results: &[ExperimentResult]) -> String {
    let pct = |v: Option<f64>| v.map(|x| format!("{:.1}", 100.0 * x)).unwrap_or_else(|| "-".into());
    let mut out = String::from("| speaker | modality | reps | overall % | manner % | place % |\n|---|---|---|---|---|---|\n");
    for r in results {
        for row in &r.summary.rows {
            out.push_str(&format!(
                "| {} | {} | {} | {} | {} | {} |\n",
                r.speaker,
                row.modality,
                row.repetitions,
                pct(Some(row.overall)),
                pct(row.manner),
                pct(row.place)
            ));
        }
        if let Some(best) = r
            .summary
            .fusion
            .iter()
            .filter(|p| p.manner.is_some() && p.place.is_some())
            .max_by(|a, b| {
                let key = |p: &FusionPoint| p.manner.unwrap().min(p.place.unwrap());
                key(a).total_cmp(&key(b))
            })
        {
            out.push_str(&format!(
                "| {} | late fusion, omega = {:.3} | {} | {} | {} | {} |\n",
                r.speaker,
                best.omega,
                r.summary.rows.first().map(|x| x.repetitions).unwrap_or(0),
                pct(Some(best.overall)),
                pct(best.manner),
                pct(best.place)
            ));
        }
        if !r.summary.failed_repetitions.is_empty() {
            out.push_str(&format!("\n{}: failed repetitions {:?}\n", r.speaker, r.summary.failed_repetitions));
        }
    }
    out
}
