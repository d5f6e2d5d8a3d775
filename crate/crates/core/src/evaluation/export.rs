//! CSV tables and SVG rate-distortion plots.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::error::{Error, Result};
use crate::evaluation::rd::{RdPoint, RdRow};

pub const CSV_HEADER: &str = "method,image,qf,bpp_side,bpp_central,psnr_side,ssim_side,psnr_central,ssim_central";

/// Serializes rows with six decimals, in the given order.
pub fn rd_csv(rows: &[RdRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Config("no rate-distortion rows to export".into()));
    }
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for r in rows {
        let p = &r.point;
        let record = [
            r.method.clone(),
            r.image.clone(),
            p.qf.to_string(),
            format!("{:.6}", p.bpp_side),
            format!("{:.6}", p.bpp_central),
            format!("{:.6}", p.psnr_side),
            format!("{:.6}", p.ssim_side),
            format!("{:.6}", p.psnr_central),
            format!("{:.6}", p.ssim_central),
        ];
        w.write_record(&record)?;
    }
    let body = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    out.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
    Ok(out)
}

pub fn export_rd(rows: &[RdRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = rd_csv(rows)?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_rd(path: impl AsRef<Path>) -> Result<Vec<RdRow>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Format(format!(
            "{}: unexpected header {:?}",
            path.display(),
            header.join(",")
        )));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .parse()
                .map_err(|_| Error::Format(format!("{}: bad number {:?}", path.display(), &rec[k])))
        };
        rows.push(RdRow {
            method: rec[0].to_string(),
            image: rec[1].to_string(),
            point: RdPoint {
                qf: rec[2]
                    .parse()
                    .map_err(|_| Error::Format(format!("{}: bad qf {:?}", path.display(), &rec[2])))?,
                bpp_side: num(3)?,
                bpp_central: num(4)?,
                psnr_side: num(5)?,
                ssim_side: num(6)?,
                psnr_central: num(7)?,
                ssim_central: num(8)?,
            },
        });
    }
    Ok(rows)
}

/// The four plot panels: (file stem, y label, extractor of (bpp, value)).
type Panel = (&'static str, &'static str, fn(&RdPoint) -> (f64, f64));

const PANELS: [Panel; 4] = [
    ("psnr_side", "PSNR (dB), side", |p| (p.bpp_side, p.psnr_side)),
    ("psnr_central", "PSNR (dB), central", |p| {
        (p.bpp_central, p.psnr_central)
    }),
    ("ssim_side", "SSIM, side", |p| (p.bpp_side, p.ssim_side)),
    ("ssim_central", "SSIM, central", |p| (p.bpp_central, p.ssim_central)),
];

/// Groups rows into series by method, keeping first-appearance order of
/// methods and the input order of points within each.
fn series(rows: &[RdRow]) -> Vec<(String, Vec<RdPoint>)> {
    let mut out: Vec<(String, Vec<RdPoint>)> = Vec::new();
    for r in rows {
        match out.iter_mut().find(|(m, _)| *m == r.method) {
            Some((_, pts)) => pts.push(r.point),
            None => out.push((r.method.clone(), vec![r.point])),
        }
    }
    out
}

fn padded_range(values: impl Iterator<Item = f64>) -> std::ops::Range<f64> {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return 0.0..1.0;
    }
    let pad = ((hi - lo) * 0.05).max(1e-3);
    (lo - pad)..(hi + pad)
}

/// Writes one SVG per panel (side/central × PSNR/SSIM) into `dir`, one
/// line series per method. Returns the written paths.
pub fn plot_rd(rows: &[RdRow], dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    if rows.is_empty() {
        return Err(Error::Config("no rate-distortion rows to plot".into()));
    }
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let groups = series(rows);
    let mut written = Vec::new();
    for (stem, label, extract) in PANELS {
        let path = dir.join(format!("{stem}.svg"));
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| extract(&r.point)).collect();
        draw_panel(&path, label, &groups, extract, &pts)
            .map_err(|e| Error::Plot(format!("{}: {e}", path.display())))?;
        written.push(path);
    }
    Ok(written)
}

fn draw_panel(
    path: &Path,
    label: &str,
    groups: &[(String, Vec<RdPoint>)],
    extract: fn(&RdPoint) -> (f64, f64),
    all: &[(f64, f64)],
) -> std::result::Result<(), Box<dyn std::error::Error>> {
    let root = SVGBackend::new(path, (640, 480)).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(label, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(56)
        .build_cartesian_2d(
            padded_range(all.iter().map(|p| p.0)),
            padded_range(all.iter().map(|p| p.1)),
        )?;
    chart.configure_mesh().x_desc("bits per pixel").y_desc(label).draw()?;
    for (k, (method, points)) in groups.iter().enumerate() {
        let color = Palette99::pick(k).to_rgba();
        let xy: Vec<(f64, f64)> = points.iter().map(extract).collect();
        chart
            .draw_series(LineSeries::new(xy.clone(), color.stroke_width(2)))?
            .label(method.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color.stroke_width(2)));
        chart.draw_series(xy.into_iter().map(|p| Circle::new(p, 3, color.filled())))?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()?;
    root.present()?;
    Ok(())
}
