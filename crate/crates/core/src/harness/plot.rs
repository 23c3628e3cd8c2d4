//! Minimal standalone SVG output: convergence traces and success heatmaps.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::harness::grid::CellResult;
use crate::hwf::TracePoint;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 20.0;
const MARGIN_B: f64 = 50.0;
const MAX_POLYLINE_POINTS: usize = 4000;
const COLORS: [&str; 6] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
/// Values at or below zero are drawn at this floor on the log axis.
const LOG_FLOOR: f64 = 1e-16;

/// A labelled curve of `(iteration, value)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSeries {
    pub label: String,
    pub points: Vec<(usize, f64)>,
}

impl TraceSeries {
    /// Relative error per iteration when the trace has it, otherwise the risk.
    pub fn from_trace(label: impl Into<String>, trace: &[TracePoint]) -> Self {
        TraceSeries {
            label: label.into(),
            points: trace
                .iter()
                .map(|p| (p.iteration, p.rel_error.unwrap_or(p.risk)))
                .collect(),
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders iteration against `log₁₀` value as an SVG polyline per series and
/// writes the raw points next to it (same stem, `.csv`). Returns the CSV path.
pub fn emit_trace_plot(series: &[TraceSeries], path: &Path) -> Result<PathBuf> {
    if series.is_empty() || series.iter().all(|s| s.points.is_empty()) {
        return Err(Error::param("cannot plot an empty trace"));
    }
    let log_value = |v: f64| v.max(LOG_FLOOR).log10();
    let all = series.iter().flat_map(|s| s.points.iter());
    let x_max = all.clone().map(|p| p.0).max().unwrap_or(0).max(1) as f64;
    let (mut y_lo, mut y_hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let l = log_value(p.1);
        (lo.min(l), hi.max(l))
    });
    y_lo = y_lo.floor();
    y_hi = y_hi.ceil();
    if y_hi - y_lo < 1.0 {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let px = |it: f64| MARGIN_L + it / x_max * plot_w;
    let py = |l: f64| MARGIN_T + (y_hi - l) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let mut decade = y_lo.ceil() as i64;
    while decade as f64 <= y_hi {
        let y = py(decade as f64);
        let _ = writeln!(
            svg,
            r##"<line x1="{MARGIN_L}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{decade}</text>"##,
            WIDTH - MARGIN_R,
            MARGIN_L - 6.0,
            y + 4.0
        );
        decade += 1;
    }
    for i in 0..=5 {
        let it = x_max * i as f64 / 5.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            px(it),
            HEIGHT - MARGIN_B + 18.0,
            it.round()
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">iteration</text>"#,
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">relative error (log scale)</text>"#,
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0
    );

    for (si, s) in series.iter().enumerate() {
        let color = COLORS[si % COLORS.len()];
        let stride = s.points.len().div_ceil(MAX_POLYLINE_POINTS).max(1);
        let mut pts = String::new();
        for (i, &(it, v)) in s.points.iter().enumerate() {
            if i % stride == 0 || i + 1 == s.points.len() {
                let _ = write!(pts, "{:.2},{:.2} ", px(it as f64), py(log_value(v)));
            }
        }
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.trim_end()
        );
        let ly = MARGIN_T + 16.0 + 16.0 * si as f64;
        let lx = WIDTH - MARGIN_R - 150.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    write_file(path, &svg)?;

    let mut csv = String::from("series,iteration,value\n");
    for s in series {
        for &(it, v) in &s.points {
            let _ = writeln!(csv, "{},{it},{v}", s.label.replace(',', ";"));
        }
    }
    let csv_path = path.with_extension("csv");
    write_file(&csv_path, &csv)?;
    Ok(csv_path)
}

/// Success-rate heatmap over `(k, m)` (red: high, blue: low), with an
/// optional reference curve given as `(k, m)` points.
pub fn emit_heatmap(cells: &[CellResult], path: &Path, reference: Option<&[(f64, f64)]>) -> Result<()> {
    if cells.is_empty() {
        return Err(Error::param("cannot plot an empty heatmap"));
    }
    let mut ks: Vec<usize> = cells.iter().map(|c| c.k).collect();
    let mut ms: Vec<usize> = cells.iter().map(|c| c.m).collect();
    ks.sort_unstable();
    ks.dedup();
    ms.sort_unstable();
    ms.dedup();
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let cw = plot_w / ks.len() as f64;
    let ch = plot_h / ms.len() as f64;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for c in cells {
        let xi = ks.binary_search(&c.k).expect("k present");
        let yi = ms.binary_search(&c.m).expect("m present");
        let r = c.success_rate();
        let (red, blue) = ((255.0 * r).round() as u8, (255.0 * (1.0 - r)).round() as u8);
        let _ = writeln!(
            svg,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({red},0,{blue})"><title>k={} m={} success={r}</title></rect>"#,
            MARGIN_L + xi as f64 * cw,
            MARGIN_T + (ms.len() - 1 - yi) as f64 * ch,
            cw,
            ch,
            c.k,
            c.m
        );
    }
    for (i, k) in ks.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{k}</text>"#,
            MARGIN_L + (i as f64 + 0.5) * cw,
            HEIGHT - MARGIN_B + 16.0
        );
    }
    for (i, m) in ms.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{m}</text>"#,
            MARGIN_L - 6.0,
            MARGIN_T + (ms.len() - 1 - i) as f64 * ch + ch / 2.0 + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">sparsity k</text><text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">measurements m</text>"#,
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 10.0,
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0
    );

    if let Some(curve) = reference.filter(|c| !c.is_empty()) {
        // Cell centres sit at the grid values; interpolate linearly between them.
        let axis = |vals: &[usize], v: f64| -> f64 {
            if vals.len() == 1 {
                return 0.5;
            }
            let (lo, hi) = (vals[0] as f64, vals[vals.len() - 1] as f64);
            0.5 + (v - lo) / (hi - lo) * (vals.len() - 1) as f64
        };
        let mut pts = String::new();
        for &(k, m) in curve {
            let x = MARGIN_L + axis(&ks, k) * cw;
            let y = MARGIN_T + plot_h - axis(&ms, m) * ch;
            let _ = write!(pts, "{:.2},{:.2} ", x, y.clamp(MARGIN_T, MARGIN_T + plot_h));
        }
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="black" stroke-width="2" points="{}"/>"#,
            pts.trim_end()
        );
    }
    svg.push_str("</svg>\n");
    write_file(path, &svg)
}

/// Mean of `max_i |x_i| / ‖x‖` over `samples` Gaussian vectors of length `k`,
/// i.e. the expected largest normalized coordinate of a Gaussian k-sparse signal.
pub fn mean_max_coordinate<R: Rng + ?Sized>(k: usize, samples: usize, rng: &mut R) -> Result<f64> {
    if k == 0 || samples == 0 {
        return Err(Error::param("need k >= 1 and samples >= 1"));
    }
    let mut total = 0.0;
    let mut buf = vec![0.0f64; k];
    for _ in 0..samples {
        buf.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        let norm = buf.iter().map(|v| v * v).sum::<f64>().sqrt();
        let max = buf.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        total += max / norm;
    }
    Ok(total / samples as f64)
}

/// Reference sample-complexity curve `m = (1/3) k x_max⁻² ln(n/k)`.
pub fn reference_curve<R: Rng + ?Sized>(
    n: usize,
    ks: &[usize],
    samples: usize,
    rng: &mut R,
) -> Result<Vec<(f64, f64)>> {
    ks.iter()
        .map(|&k| {
            let x_max = mean_max_coordinate(k, samples, rng)?;
            let m = k as f64 / (3.0 * x_max * x_max) * (n as f64 / k as f64).ln();
            Ok((k as f64, m))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_trace_is_horizontal() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("flat.svg");
        let s = TraceSeries {
            label: "flat".into(),
            points: (0..10).map(|i| (i, 0.1)).collect(),
        };
        let csv = emit_trace_plot(&[s], &path).unwrap();
        let svg = fs::read_to_string(&path).unwrap();
        let line = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        let pts = line.split("points=\"").nth(1).unwrap().trim_end_matches("\"/>");
        let ys: Vec<&str> = pts.split(' ').map(|p| p.split(',').nth(1).unwrap()).collect();
        assert!(ys.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(fs::read_to_string(csv).unwrap().lines().count(), 11);
    }

    #[test]
    fn empty_trace_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_trace_plot(&[], &dir.path().join("x.svg")).is_err());
        let empty = TraceSeries {
            label: "e".into(),
            points: vec![],
        };
        assert!(emit_trace_plot(&[empty], &dir.path().join("x.svg")).is_err());
    }

    #[test]
    fn max_coordinate_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(mean_max_coordinate(1, 10, &mut rng).unwrap(), 1.0);
        let v = mean_max_coordinate(10, 20_000, &mut rng).unwrap();
        // Between the flat value 1/sqrt(10) and 1.
        assert!(v > 0.3163 && v < 1.0, "{v}");
        let curve = reference_curve(1000, &[5, 10], 1000, &mut rng).unwrap();
        assert!(curve[1].1 > curve[0].1);
    }
}
