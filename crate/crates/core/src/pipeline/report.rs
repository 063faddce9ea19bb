use std::path::{Path, PathBuf};

use super::closed_loop::{ClosedLoopReport, ForceTraces};
use super::compare::{ComparisonReport, TrainedModel};
use super::svg::{Plot, Series};
use crate::error::{Error, Result};
use crate::net::{write_loss_csv, ModelKind};

fn color(kind: Option<ModelKind>) -> &'static str {
    match kind {
        Some(ModelKind::Pmdrnn) => "#d62728",
        Some(ModelKind::Pmnn) => "#1f77b4",
        None => "#7f7f7f",
    }
}

fn write_file(path: &Path, bytes: &[u8], written: &mut Vec<PathBuf>) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    written.push(path.to_path_buf());
    Ok(())
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))
}

pub fn checkpoint_file_name(dataset: &str, model: ModelKind, seed: u64) -> String {
    format!("checkpoints/{dataset}_{model}_seed{seed}.json")
}

/// Writes `compare_<dataset>.json`, a final-loss table, one loss CSV per
/// run, a loss plot and, when asked, every checkpoint. Returns the paths.
pub fn write_comparison(dir: &Path, report: &ComparisonReport, models: &[TrainedModel], checkpoints: bool) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let name = &report.dataset;
    write_file(
        &dir.join(format!("compare_{name}.json")),
        serde_json::to_string_pretty(report)?.as_bytes(),
        &mut written,
    )?;
    let table = csv_bytes(
        &["model", "seed", "epochs", "initial_ssr", "final_ssr", "curve_file"],
        report.rows.iter().map(|r| {
            vec![
                r.model.to_string(),
                r.seed.to_string(),
                r.epochs.to_string(),
                r.initial_ssr.to_string(),
                r.final_ssr.to_string(),
                r.curve_file.clone(),
            ]
        }),
    )?;
    write_file(&dir.join(format!("compare_{name}.csv")), &table, &mut written)?;

    let mut plot = Plot::new(&format!("Training loss, {name}"), "epoch", "mean sequence SSR (normalized)");
    plot.log_y = true;
    for (row, m) in report.rows.iter().zip(models) {
        let mut bytes = Vec::new();
        write_loss_csv(&mut bytes, &m.loss_curve)?;
        write_file(&dir.join(&row.curve_file), &bytes, &mut written)?;
        let pts = m.loss_curve.iter().enumerate().map(|(i, l)| ((i + 1) as f64, *l)).collect();
        let s = Series::new(format!("{} seed {}", row.model, row.seed), pts, color(Some(row.model)));
        plot.series.push(if row.model == ModelKind::Pmnn { s.dashed("6 3") } else { s });
        if checkpoints {
            write_file(
                &dir.join(checkpoint_file_name(name, row.model, row.seed)),
                m.checkpoint.to_json()?.as_bytes(),
                &mut written,
            )?;
        }
    }
    write_file(&dir.join(format!("loss_{name}.svg")), plot.to_svg().as_bytes(), &mut written)?;
    Ok(written)
}

/// Writes `closed_loop.json`, the per-sample normal force of every run and
/// a force plot with the desired band. The plot shows the first run of
/// each model.
pub fn write_closed_loop(dir: &Path, report: &ClosedLoopReport, traces: &ForceTraces) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    write_file(
        &dir.join("closed_loop.json"),
        serde_json::to_string_pretty(report)?.as_bytes(),
        &mut written,
    )?;
    let mut header = vec!["t".to_owned(), "desired".to_owned()];
    header.extend(traces.runs.iter().map(|(l, _)| l.clone()));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..traces.time.len()).map(|k| {
        let mut r = vec![traces.time[k].to_string(), traces.desired[k].to_string()];
        r.extend(traces.runs.iter().map(|(_, f)| f[k].to_string()));
        r
    });
    write_file(&dir.join("closed_loop_force.csv"), &csv_bytes(&header_refs, rows)?, &mut written)?;

    let mut plot = Plot::new("Normal force under perturbation", "time (s)", "normal force (N)");
    plot.band = Some((report.reference.desired_band[0], report.reference.desired_band[1]));
    let series = |f: &[f64]| traces.time.iter().copied().zip(f.iter().copied()).collect::<Vec<_>>();
    plot.series.push(Series::new("desired", series(&traces.desired), "black"));
    let kinds: Vec<Option<ModelKind>> = std::iter::once(None).chain(report.runs.iter().map(|r| r.model)).collect();
    let mut shown = Vec::new();
    for ((label, f), kind) in traces.runs.iter().zip(kinds) {
        if shown.contains(&kind) {
            continue;
        }
        shown.push(kind);
        let s = Series::new(label.clone(), series(f), color(kind));
        plot.series.push(match kind {
            None => s.dashed("2 3"),
            Some(ModelKind::Pmnn) => s.dashed("8 3 2 3"),
            Some(ModelKind::Pmdrnn) => s.dashed("6 3"),
        });
    }
    write_file(&dir.join("closed_loop_force.svg"), plot.to_svg().as_bytes(), &mut written)?;
    Ok(written)
}
