//! Plottable reward-curve data.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub const MA_WINDOW: usize = 50;
pub const STD_WINDOW: usize = 20;

/// Trailing moving average; the first `window − 1` points average what is available.
pub fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(xs.len());
    let mut sum = 0.0;
    for i in 0..xs.len() {
        sum += xs[i];
        if i >= window {
            sum -= xs[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

/// Trailing population standard deviation over the same kind of window.
pub fn moving_std(xs: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    (0..xs.len())
        .map(|i| {
            let w = &xs[(i + 1).saturating_sub(window)..=i];
            let n = w.len() as f64;
            let mean = w.iter().sum::<f64>() / n;
            (w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub episode: usize,
    pub reward: f64,
    pub moving_average: f64,
    pub moving_std: f64,
}

pub fn curve(rewards: &[f64]) -> Vec<CurveRow> {
    let ma = moving_average(rewards, MA_WINDOW);
    let sd = moving_std(rewards, STD_WINDOW);
    rewards
        .iter()
        .enumerate()
        .map(|(i, &r)| CurveRow {
            episode: i,
            reward: r,
            moving_average: ma[i],
            moving_std: sd[i],
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlayRow {
    pub episode: usize,
    /// Runs that reached this episode.
    pub runs: usize,
    pub mean: f64,
    pub std: f64,
    pub mean_moving_average: f64,
    pub std_moving_average: f64,
}

/// Across-run mean and std bands, per episode, over however many runs reached it.
pub fn overlay(runs: &[Vec<f64>]) -> Vec<OverlayRow> {
    let smoothed: Vec<Vec<f64>> = runs.iter().map(|r| moving_average(r, MA_WINDOW)).collect();
    let len = runs.iter().map(|r| r.len()).max().unwrap_or(0);
    (0..len)
        .map(|i| {
            let raw: Vec<f64> = runs.iter().filter_map(|r| r.get(i).copied()).collect();
            let ma: Vec<f64> = smoothed.iter().filter_map(|r| r.get(i).copied()).collect();
            let (mean, std) = mean_std(&raw);
            let (mean_ma, std_ma) = mean_std(&ma);
            OverlayRow {
                episode: i,
                runs: raw.len(),
                mean,
                std,
                mean_moving_average: mean_ma,
                std_moving_average: std_ma,
            }
        })
        .collect()
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (mean, (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt())
}

/// A CSV row type with a fixed column list, so empty tables still get a header.
pub trait CsvRow: Serialize {
    const HEADER: &'static [&'static str];
}

impl CsvRow for CurveRow {
    const HEADER: &'static [&'static str] = &["episode", "reward", "moving_average", "moving_std"];
}

impl CsvRow for OverlayRow {
    const HEADER: &'static [&'static str] = &[
        "episode",
        "runs",
        "mean",
        "std",
        "mean_moving_average",
        "std_moving_average",
    ];
}

pub fn write_csv<T: CsvRow>(rows: &[T], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(T::HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the `reward` column of a run's metrics file.
pub fn read_rewards(metrics_csv: &Path) -> Result<Vec<f64>> {
    let mut rd = csv::Reader::from_path(metrics_csv)?;
    let col = rd
        .headers()?
        .iter()
        .position(|h| h == "reward")
        .ok_or_else(|| Error::Schema(format!("{} has no reward column", metrics_csv.display())))?;
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let v = rec
            .get(col)
            .and_then(|s| s.parse::<f64>().ok())
            .ok_or_else(|| Error::Schema(format!("bad reward in {}", metrics_csv.display())))?;
        out.push(v);
    }
    Ok(out)
}

/// Writes `curve.csv` into each run directory and, for several runs,
/// `overlay.csv` into `out_dir`.
pub fn emit_plots(run_dirs: &[&Path], out_dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut written = Vec::new();
    let mut all = Vec::new();
    for dir in run_dirs {
        let rewards = read_rewards(&dir.join("metrics.csv"))?;
        let path = dir.join("curve.csv");
        write_csv(&curve(&rewards), &path)?;
        written.push(path);
        all.push(rewards);
    }
    if all.len() > 1 {
        std::fs::create_dir_all(out_dir)?;
        let path = out_dir.join("overlay.csv");
        write_csv(&overlay(&all), &path)?;
        written.push(path);
    }
    Ok(written)
}
