//! CSV, JSON, SVG and markdown renderings of evaluation results.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

use super::latent::{Histogram, LatentAnalysis};
use super::roc::RocResult;
use super::sweep::SweepResult;

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

/// `fpr,tpr,threshold`
pub fn write_roc_csv(path: &Path, roc: &RocResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for p in &roc.points {
        w.serialize(p)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct SweepRow<'a> {
    gamma: f64,
    mode: &'a str,
    variant: &'a str,
    seed: u64,
    auc: Option<f64>,
    error: Option<&'a str>,
}

/// `gamma,mode,variant,seed,auc` plus an `error` column for failed cells.
pub fn write_sweep_csv(path: &Path, result: &SweepResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for c in &result.cells {
        w.serialize(SweepRow {
            gamma: c.gamma,
            mode: c.mode.as_str(),
            variant: c.variant.as_str(),
            seed: c.seed,
            auc: c.auc,
            error: c.error.as_deref(),
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `latent_coeffs.csv`, `latent_norms.csv`, `latent_histograms.csv` and `projection.csv` into `dir`.
pub fn write_latent_csvs(dir: &Path, analysis: &LatentAnalysis) -> Result<()> {
    let path = dir.join("latent_coeffs.csv");
    let mut w = csv::Writer::from_path(&path)?;
    let mut header = vec!["source_id".to_string(), "label".to_string()];
    header.extend((0..analysis.latent_dim).map(|i| format!("z{i}")));
    w.write_record(&header)?;
    for s in &analysis.samples {
        let mut row = vec![s.source_id.clone(), s.label.as_str().to_string()];
        row.extend(s.latent.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("latent_norms.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["source_id", "label", "norm"])?;
    for s in &analysis.samples {
        w.write_record([s.source_id.as_str(), s.label.as_str(), &s.norm.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("latent_histograms.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["label", "bin_lo", "bin_hi", "count"])?;
    for s in &analysis.per_label {
        for (i, c) in s.histogram.counts.iter().enumerate() {
            let (lo, hi) = (s.histogram.edges[i], s.histogram.edges[i + 1]);
            w.write_record([s.label.as_str(), &lo.to_string(), &hi.to_string(), &c.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("projection.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["source_id", "label", "pc1", "pc2"])?;
    for s in &analysis.samples {
        w.write_record([
            s.source_id.as_str(),
            s.label.as_str(),
            &s.projection[0].to_string(),
            &s.projection[1].to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

const W: f64 = 360.0;
const H: f64 = 240.0;
const PAD: f64 = 30.0;

fn svg_frame(title: &str, body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{PAD}\" y=\"16\">{title}</text>\n\
         <rect x=\"{PAD}\" y=\"{PAD}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888\"/>\n{body}</svg>\n",
        W - 2.0 * PAD,
        H - 2.0 * PAD
    )
}

pub fn roc_svg(roc: &RocResult, title: &str) -> String {
    let (pw, ph) = (W - 2.0 * PAD, H - 2.0 * PAD);
    let pts: Vec<String> = roc
        .points
        .iter()
        .map(|p| format!("{:.2},{:.2}", PAD + p.fpr * pw, PAD + (1.0 - p.tpr) * ph))
        .collect();
    let body = format!(
        "<line x1=\"{PAD}\" y1=\"{}\" x2=\"{}\" y2=\"{PAD}\" stroke=\"#ccc\" stroke-dasharray=\"4\"/>\n\
         <polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"{}\"/>\n\
         <text x=\"{}\" y=\"{}\">AUC {:.3}</text>\n",
        PAD + ph,
        PAD + pw,
        pts.join(" "),
        W - PAD - 70.0,
        H - PAD - 8.0,
        roc.auc
    );
    svg_frame(title, &body)
}

/// Overlaid normalized histograms, one colour per series.
pub fn histogram_svg(series: &[(&str, &Histogram)], title: &str) -> String {
    const COLOURS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let (pw, ph) = (W - 2.0 * PAD, H - 2.0 * PAD);
    let mut body = String::new();
    let density = |h: &Histogram| -> Vec<f64> {
        let t = h.total().max(1) as f64;
        h.counts.iter().map(|&c| c as f64 / t).collect()
    };
    let peak = series.iter().flat_map(|(_, h)| density(h)).fold(1e-12, f64::max);
    for (k, (name, h)) in series.iter().enumerate() {
        let colour = COLOURS[k % COLOURS.len()];
        let bins = h.counts.len() as f64;
        let mut pts = vec![format!("{PAD:.2},{:.2}", PAD + ph)];
        for (i, d) in density(h).iter().enumerate() {
            let y = PAD + ph * (1.0 - d / peak);
            pts.push(format!("{:.2},{y:.2}", PAD + pw * i as f64 / bins));
            pts.push(format!("{:.2},{y:.2}", PAD + pw * (i + 1) as f64 / bins));
        }
        pts.push(format!("{:.2},{:.2}", PAD + pw, PAD + ph));
        let _ = writeln!(
            body,
            "<polyline fill=\"none\" stroke=\"{colour}\" stroke-width=\"1.5\" points=\"{}\"/>\n\
             <text x=\"{}\" y=\"{}\" fill=\"{colour}\">{name}</text>",
            pts.join(" "),
            W - PAD - 70.0,
            PAD + 14.0 * (k + 1) as f64
        );
    }
    svg_frame(title, &body)
}

/// Markdown table of median AUC, one row per (mode, variant), one column per γ.
pub fn sweep_markdown(result: &SweepResult) -> String {
    let table = result.table();
    let gammas: Vec<f64> = table.values().next().map(|r| r.iter().map(|(g, _)| *g).collect()).unwrap_or_default();
    let mut out = String::from("| encoder | score |");
    for g in &gammas {
        let _ = write!(out, " γ={:.0}% |", g * 100.0);
    }
    out.push_str("\n|---|---|");
    out.push_str(&"---|".repeat(gammas.len()));
    out.push('\n');
    for ((mode, variant), row) in &table {
        let _ = write!(out, "| {mode} | {variant} |");
        for (_, v) in row {
            match v {
                Some(a) => {
                    let _ = write!(out, " {a:.3} |");
                }
                None => out.push_str(" failed |"),
            }
        }
        out.push('\n');
    }
    let _ = writeln!(
        out,
        "\nMedian AUC over seeds {:?}; {} steps per growth phase.",
        result.seeds, result.steps_per_phase
    );
    out
}
