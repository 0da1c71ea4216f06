//! `plot`: standalone SVG line chart of one metrics column across runs,
//! with data-point markers so rendered figures stay diffable.

use std::fs;
use std::path::{Path, PathBuf};

use flsnn_core::error::{Error, Result};
use flsnn_core::fl::RoundMetrics;

use crate::run::RunManifest;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

const W: f64 = 800.0;
const H: f64 = 500.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 30.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 50.0;

/// One curve: (round, value) pairs plus a legend label.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn column_index(field: &str) -> Result<usize> {
    RoundMetrics::CSV_HEADER
        .split(',')
        .position(|c| c == field)
        .ok_or_else(|| {
            Error::input(format!("unknown field {field:?} (one of: {})", RoundMetrics::CSV_HEADER))
        })
}

pub fn load_series(run_dirs: &[PathBuf], field: &str) -> Result<Vec<Series>> {
    let col = column_index(field)?;
    let mut series = Vec::with_capacity(run_dirs.len());
    for dir in run_dirs {
        let path = dir.join("metrics.csv");
        let text = fs::read_to_string(&path)?;
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h == RoundMetrics::CSV_HEADER => {}
            other => {
                return Err(Error::Format(format!(
                    "{}: unexpected header {other:?}",
                    path.display()
                )))
            }
        }
        let mut points = Vec::new();
        for line in lines {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 10 {
                return Err(Error::Format(format!("{}: malformed row {line:?}", path.display())));
            }
            let x: f64 = fields[0]
                .parse()
                .map_err(|_| Error::Format(format!("{}: bad round {:?}", path.display(), fields[0])))?;
            let y: f64 = fields[col]
                .parse()
                .map_err(|_| Error::Format(format!("{}: bad value {:?}", path.display(), fields[col])))?;
            points.push((x, y));
        }
        if points.is_empty() {
            return Err(Error::Format(format!("{}: no data rows to plot", path.display())));
        }
        let label = RunManifest::load(dir)
            .map(|m| m.label)
            .unwrap_or_else(|_| dir.file_name().unwrap_or_default().to_string_lossy().into_owned());
        series.push(Series { label, points });
    }
    Ok(series)
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    (0..=4).map(|i| lo + (hi - lo) * i as f64 / 4.0).collect()
}

pub fn render_svg(series: &[Series], field: &str) -> String {
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let ys = series.iter().flat_map(|s| s.points.iter().map(|p| p.1));
    let (x_lo, x_hi) = bounds(xs);
    let (mut y_lo, mut y_hi) = bounds(ys);
    if y_lo == y_hi {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    let pad = 0.05 * (y_hi - y_lo);
    let (y_lo, y_hi) = (y_lo - pad, y_hi + pad);
    let sx = |x: f64| MARGIN_L + (x - x_lo) / (x_hi - x_lo).max(1e-12) * (W - MARGIN_L - MARGIN_R);
    let sy = |y: f64| H - MARGIN_B - (y - y_lo) / (y_hi - y_lo) * (H - MARGIN_T - MARGIN_B);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    ));
    // axes
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_L}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
         <line x1=\"{MARGIN_L}\" y1=\"{MARGIN_T}\" x2=\"{MARGIN_L}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - MARGIN_B,
        W - MARGIN_R,
        H - MARGIN_B,
        H - MARGIN_B
    ));
    for t in nice_ticks(x_lo, x_hi) {
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">{t:.0}</text>\n",
            sx(t),
            H - MARGIN_B + 18.0
        ));
    }
    for t in nice_ticks(y_lo, y_hi) {
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"end\">{t:.3}</text>\n",
            MARGIN_L - 6.0,
            sy(t) + 4.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\">round</text>\n\
         <text x=\"16\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{field}</text>\n",
        (MARGIN_L + W - MARGIN_R) / 2.0,
        H - 12.0,
        H / 2.0,
        H / 2.0
    ));

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> =
            s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            path.join(" ")
        ));
        for &(x, y) in &s.points {
            svg.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2\" fill=\"{color}\"/>\n",
                sx(x),
                sy(y)
            ));
        }
        let ly = MARGIN_T + 16.0 * i as f64 + 8.0;
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\">{}</text>\n",
            MARGIN_L + 10.0,
            MARGIN_L + 34.0,
            MARGIN_L + 40.0,
            ly + 4.0,
            escape(&s.label)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// `flsnn plot`: one SVG overlaying `field` across the run directories.
/// Nothing is written if any metrics file is missing, malformed or empty.
pub fn cmd_plot(run_dirs: &[PathBuf], field: &str, out: Option<&Path>) -> Result<PathBuf> {
    if run_dirs.is_empty() {
        return Err(Error::input("plot needs at least one run directory".to_string()));
    }
    let series = load_series(run_dirs, field)?;
    let svg = render_svg(&series, field);
    let out_dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| run_dirs[0].parent().unwrap_or(Path::new(".")).to_path_buf());
    fs::create_dir_all(&out_dir)?;
    let path = out_dir.join(format!("plot-{field}.svg"));
    fs::write(&path, svg)?;
    println!("{}", path.display());
    Ok(path)
}
