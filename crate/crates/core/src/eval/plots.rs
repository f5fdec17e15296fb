use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use super::histogram::HistogramReport;
use crate::error::{Error, Result};
use crate::trainer::MetricsLog;

pub const SMOOTHING_WINDOW: usize = 10;

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Plot(e.to_string())
}

/// Trailing moving average over up to `window` points; `None` entries are
/// skipped and produce `None` until the first value arrives.
pub fn smooth(values: &[Option<f64>], window: usize) -> Vec<Option<f64>> {
    let mut seen: Vec<f64> = Vec::new();
    values
        .iter()
        .map(|v| {
            if let Some(x) = v {
                seen.push(*x);
            }
            if seen.is_empty() {
                return None;
            }
            let tail = &seen[seen.len().saturating_sub(window)..];
            Some(tail.iter().sum::<f64>() / tail.len() as f64)
        })
        .collect()
}

/// Mean and min/max envelope across runs at each shared iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub label: String,
    pub n_runs: usize,
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Combines runs, truncated to the shortest, into a [`Band`].
pub fn band(label: &str, runs: &[&MetricsLog], window: usize) -> Band {
    let len = runs.iter().map(|r| r.records.len()).min().unwrap_or(0);
    let smoothed: Vec<Vec<Option<f64>>> = runs
        .iter()
        .map(|r| {
            let ys: Vec<Option<f64>> = r.records[..len].iter().map(|m| m.episodic_return_mean).collect();
            smooth(&ys, window)
        })
        .collect();
    let mut out = Band {
        label: label.to_string(),
        n_runs: runs.len(),
        x: Vec::new(),
        mean: Vec::new(),
        lo: Vec::new(),
        hi: Vec::new(),
    };
    for i in 0..len {
        let ys: Vec<f64> = smoothed.iter().filter_map(|s| s[i]).collect();
        if ys.len() != runs.len() {
            continue;
        }
        out.x.push(runs[0].records[i].global_step as f64);
        out.mean.push(ys.iter().sum::<f64>() / ys.len() as f64);
        out.lo.push(ys.iter().copied().fold(f64::INFINITY, f64::min));
        out.hi.push(ys.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    out
}

fn run_label(log: &MetricsLog) -> String {
    let agent = log.config_value("agent").unwrap_or("run");
    match (agent, log.config_value("fusion_method")) {
        ("pg-rainbow", Some(f)) => format!("pg-rainbow/{f}"),
        _ => agent.to_string(),
    }
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-9 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

/// Writes `returns_<env>.svg` and `returns_<env>.tsv` for one environment.
pub fn plot_return_curves(env: &str, bands: &[Band], out_dir: &Path) -> Result<Vec<PathBuf>> {
    let stem = file_stem(env);
    let tsv_path = out_dir.join(format!("returns_{stem}.tsv"));
    let mut tsv = String::from("label\tglobal_step\tmean\tmin\tmax\tn_runs\n");
    for b in bands {
        for i in 0..b.x.len() {
            let _ = writeln!(tsv, "{}\t{}\t{}\t{}\t{}\t{}", b.label, b.x[i], b.mean[i], b.lo[i], b.hi[i], b.n_runs);
        }
    }
    fs::write(&tsv_path, tsv)?;

    let svg_path = out_dir.join(format!("returns_{stem}.svg"));
    let (x0, x1) = bounds(bands.iter().flat_map(|b| b.x.iter().copied()));
    let (y0, y1) = bounds(bands.iter().flat_map(|b| b.lo.iter().chain(&b.hi).copied()));
    {
        let root = SVGBackend::new(&svg_path, (900, 540)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(format!("{env}: episodic return"), ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d(x0..x1, y0..y1)
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .x_desc("global step")
            .y_desc("return")
            .draw()
            .map_err(plot_err)?;
        for (i, b) in bands.iter().enumerate() {
            let color = Palette99::pick(i).to_rgba();
            let mut outline: Vec<(f64, f64)> = b.x.iter().copied().zip(b.hi.iter().copied()).collect();
            outline.extend(b.x.iter().copied().zip(b.lo.iter().copied()).rev());
            chart
                .draw_series(std::iter::once(Polygon::new(outline, color.mix(0.2).filled())))
                .map_err(plot_err)?;
            chart
                .draw_series(LineSeries::new(b.x.iter().copied().zip(b.mean.iter().copied()), color.stroke_width(2)))
                .map_err(plot_err)?
                .label(b.label.clone())
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(plot_err)?;
        root.present().map_err(plot_err)?;
    }
    Ok(vec![svg_path, tsv_path])
}

/// Writes the two overlaid histograms of a report as SVG plus TSV.
pub fn plot_histogram(report: &HistogramReport, out_dir: &Path, name: &str) -> Result<Vec<PathBuf>> {
    let stem = file_stem(name);
    let tsv_path = out_dir.join(format!("hist_{stem}.tsv"));
    let mut tsv = String::from("bin_lo\tbin_hi\tv_count\tq_count\n");
    for i in 0..report.v_counts.len() {
        let _ = writeln!(
            tsv,
            "{}\t{}\t{}\t{}",
            report.bins[i],
            report.bins[i + 1],
            report.v_counts[i],
            report.q_counts[i]
        );
    }
    fs::write(&tsv_path, tsv)?;

    let svg_path = out_dir.join(format!("hist_{stem}.svg"));
    let x0 = report.bins[0];
    let x1 = *report.bins.last().unwrap_or(&1.0);
    let frac = |c: u64, n: usize| if n == 0 { 0.0 } else { c as f64 / n as f64 };
    let y1 = report
        .v_counts
        .iter()
        .map(|&c| frac(c, report.n_free))
        .chain(report.q_counts.iter().map(|&c| frac(c, report.n_fixed)))
        .fold(0.0, f64::max)
        .max(1e-3)
        * 1.1;
    {
        let root = SVGBackend::new(&svg_path, (900, 540)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(
                format!("{}: V(s0) vs return with first action {}", report.env, report.fixed_action),
                ("sans-serif", 20),
            )
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d(x0..x1, 0.0..y1)
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .x_desc("value / return")
            .y_desc("fraction")
            .draw()
            .map_err(plot_err)?;
        let series = [
            ("V(s0)", &report.v_counts, report.n_free, BLUE),
            ("fixed action", &report.q_counts, report.n_fixed, RED),
        ];
        for (label, counts, n, color) in series {
            let bars: Vec<Rectangle<(f64, f64)>> = counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(i, &c)| {
                    Rectangle::new(
                        [(report.bins[i], 0.0), (report.bins[i + 1], frac(c, n))],
                        color.mix(0.45).filled(),
                    )
                })
                .collect();
            chart
                .draw_series(bars)
                .map_err(plot_err)?
                .label(label)
                .legend(move |(x, y)| Rectangle::new([(x, y - 5), (x + 15, y + 5)], color.mix(0.45).filled()));
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(plot_err)?;
        root.present().map_err(plot_err)?;
    }
    Ok(vec![svg_path, tsv_path])
}

/// Renders every input: metrics files (`.jsonl`) become per-environment
/// return curves with a min/max band across runs; histogram reports
/// (`.json`) become histogram figures. Returns the written paths.
pub fn emit_plots(inputs: &[PathBuf], out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut by_env: BTreeMap<String, BTreeMap<String, Vec<MetricsLog>>> = BTreeMap::new();
    let mut written = Vec::new();
    let mut n_metrics = 0;
    for path in inputs {
        if path.extension().is_some_and(|e| e == "json") {
            let text = fs::read_to_string(path)?;
            let report: HistogramReport = serde_json::from_str(&text).map_err(|e| Error::Parse {
                path: path.clone(),
                line: e.line(),
                msg: e.to_string(),
            })?;
            let name = path.file_stem().map_or("report".into(), |s| s.to_string_lossy().into_owned());
            written.extend(plot_histogram(&report, out_dir, &name)?);
            continue;
        }
        let log = MetricsLog::read_file(path)?;
        let env = log.config_value("env").unwrap_or("unknown").to_string();
        by_env.entry(env).or_default().entry(run_label(&log)).or_default().push(log);
        n_metrics += 1;
    }
    if n_metrics == 0 && written.is_empty() {
        return Err(Error::Empty("plot inputs"));
    }
    for (env, groups) in &by_env {
        let bands: Vec<Band> = groups
            .iter()
            .map(|(label, logs)| band(label, &logs.iter().collect::<Vec<_>>(), SMOOTHING_WINDOW))
            .collect();
        written.extend(plot_return_curves(env, &bands, out_dir)?);
    }
    Ok(written)
}
