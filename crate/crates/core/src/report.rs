//! Per-run series export: accuracy and naive fraction against iteration, as CSV and PNG.

use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};

use crate::data::{read_metrics, MetricsRecord};
use crate::error::{Result, SaaError};

pub const PLOT_DIR: &str = "plots";
const WIDTH: u32 = 640;
const HEIGHT: u32 = 360;
const MARGIN: u32 = 30;

#[derive(Clone, Debug, PartialEq)]
pub struct PlotArtifacts {
    pub accuracy_csv: PathBuf,
    pub naive_fraction_csv: PathBuf,
    pub accuracy_png: PathBuf,
    pub naive_fraction_png: PathBuf,
    pub points: usize,
}

/// `(iteration, value)` pairs of one metrics column.
pub fn series(records: &[MetricsRecord], column: fn(&MetricsRecord) -> f64) -> Vec<(u64, f64)> {
    records.iter().map(|r| (r.iteration, column(r))).collect()
}

pub fn write_series_csv(path: &Path, header: &str, points: &[(u64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| SaaError::format("CSV", format!("{}: {e}", path.display())))?;
    let wrap = |e: csv::Error| SaaError::format("CSV", format!("{}: {e}", path.display()));
    w.write_record(["iteration", header]).map_err(wrap)?;
    for (it, v) in points {
        w.serialize((it, v)).map_err(wrap)?;
    }
    w.flush().map_err(|e| SaaError::io(path, e))
}

fn draw_line(img: &mut RgbImage, (x0, y0): (f64, f64), (x1, y1): (f64, f64), color: Rgb<u8>) {
    let steps = (x1 - x0).abs().max((y1 - y0).abs()).ceil().max(1.0) as usize;
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        let (x, y) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        if x >= 0.0 && y >= 0.0 && (x as u32) < img.width() && (y as u32) < img.height() {
            img.put_pixel(x as u32, y as u32, color);
        }
    }
}

/// Line plot of values in `[0, 1]` against iteration, with quarter grid lines.
pub fn render_plot(points: &[(u64, f64)]) -> RgbImage {
    let mut img = RgbImage::from_pixel(WIDTH, HEIGHT, Rgb([255, 255, 255]));
    let (left, right) = (MARGIN as f64, (WIDTH - MARGIN) as f64);
    let (top, bottom) = (MARGIN as f64, (HEIGHT - MARGIN) as f64);
    for q in 0..=4 {
        let y = bottom - (bottom - top) * q as f64 / 4.0;
        let shade = if q == 0 { Rgb([0, 0, 0]) } else { Rgb([210, 210, 210]) };
        draw_line(&mut img, (left, y), (right, y), shade);
    }
    draw_line(&mut img, (left, top), (left, bottom), Rgb([0, 0, 0]));
    let max_it = points.iter().map(|p| p.0).max().unwrap_or(1).max(1) as f64;
    let to_px = |(it, v): (u64, f64)| {
        (left + (right - left) * it as f64 / max_it, bottom - (bottom - top) * v.clamp(0.0, 1.0))
    };
    let color = Rgb([31, 119, 180]);
    for pair in points.windows(2) {
        draw_line(&mut img, to_px(pair[0]), to_px(pair[1]), color);
    }
    for &p in points {
        let (x, y) = to_px(p);
        for dx in -2..=2 {
            for dy in -2..=2 {
                let (px, py) = (x as i64 + dx, y as i64 + dy);
                if px >= 0 && py >= 0 && (px as u32) < WIDTH && (py as u32) < HEIGHT {
                    img.put_pixel(px as u32, py as u32, color);
                }
            }
        }
    }
    img
}

/// Writes accuracy and naive-fraction series of `run_dir/metrics.csv` into `run_dir/plots`.
pub fn export_plots(run_dir: &Path) -> Result<PlotArtifacts> {
    let metrics = run_dir.join(crate::trainer::METRICS_FILE);
    if !metrics.exists() {
        return Err(SaaError::invalid(format!("no metrics file at {}", metrics.display())));
    }
    let records = read_metrics(&metrics)?;
    let out = run_dir.join(PLOT_DIR);
    std::fs::create_dir_all(&out).map_err(|e| SaaError::io(&out, e))?;
    let acc = series(&records, |r| r.test_acc);
    let naive = series(&records, |r| r.naive_fraction);
    let artifacts = PlotArtifacts {
        accuracy_csv: out.join("accuracy.csv"),
        naive_fraction_csv: out.join("naive_fraction.csv"),
        accuracy_png: out.join("accuracy.png"),
        naive_fraction_png: out.join("naive_fraction.png"),
        points: records.len(),
    };
    write_series_csv(&artifacts.accuracy_csv, "test_acc", &acc)?;
    write_series_csv(&artifacts.naive_fraction_csv, "naive_fraction", &naive)?;
    for (path, pts) in [(&artifacts.accuracy_png, &acc), (&artifacts.naive_fraction_png, &naive)] {
        render_plot(pts)
            .save(path)
            .map_err(|e| SaaError::format("PNG", format!("{}: {e}", path.display())))?;
    }
    Ok(artifacts)
}

/// Reads a series written by [`write_series_csv`].
pub fn read_series_csv(path: &Path) -> Result<Vec<(u64, f64)>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| SaaError::format("CSV", format!("{}: {e}", path.display())))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<(u64, f64)>, _>>()
        .map_err(|e| SaaError::format("CSV", format!("{}: {e}", path.display())))
}
