//! CSV and SVG emission. CSV files are comma-separated with a header row,
//! `.` decimals and LF line endings; numbers use the shortest decimal form
//! that round-trips. SVG output depends only on its input.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sweep::Polyline;

/// Column headers of every CSV the toolkit writes.
pub mod headers {
    pub const MODES: &[&str] = &["index", "n_eff", "polarization", "symmetry", "polarization_fraction", "residual"];
    pub const FIELD: &[&str] = &["x_um", "y_um", "Ex", "Ey"];
    pub const COUPLING: &[&str] = &[
        "gap_nm", "delta_n_TE", "delta_n_TM", "xi", "n_sym_TE", "n_anti_TE", "n_sym_TM", "n_anti_TM",
    ];
    pub const XI_MAP: &[&str] = &["width_nm", "etch_depth_nm", "xi"];
    pub const XI_CONTOUR: &[&str] = &["polyline", "width_nm", "etch_depth_nm"];
    pub const SPLIT: &[&str] = &["L_c_um", "P3_TE", "P4_TE", "P3_TM", "P4_TM", "zeta"];
    pub const DELTA: &[&str] = &["g_nm", "delta"];
    pub const ERROR: &[&str] = &["Lc_um", "error"];
    pub const NA: &[&str] = &["NA", "eta_TE", "eta_TM"];
    pub const TRANSFER: &[&str] = &["polarization", "t", "r", "P3", "P4", "bend_angle_rad", "total_angle_rad", "transmission_factor"];
    pub const DENSITY: &[&str] = &["row", "col", "re", "im"];
    pub const SUMMARY: &[&str] = &["figure", "quantity", "value", "band_min", "band_max", "status"];
}

/// Shortest round-trip decimal; empty for missing values.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn csv_string(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        if r.len() != header.len() {
            return Err(Error::invalid("csv", format!("row has {} fields, header {}", r.len(), header.len())));
        }
        w.write_record(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    write_file(path, &csv_string(header, rows)?)
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series { label: label.into(), points }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Axes {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
}

impl Axes {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Axes { title: title.into(), x_label: x_label.into(), y_label: y_label.into(), log_y: false }
    }

    pub fn log_y(mut self) -> Self {
        self.log_y = true;
        self
    }
}

/// Sampled scalar field on a rectilinear grid, with overlays.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GridData {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major over `ys`.
    pub values: Vec<Option<f64>>,
    pub contours: Vec<Polyline>,
    pub markers: Vec<(f64, f64)>,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    log_y: bool,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        let (y, lo, hi) = if self.log_y { (y.log10(), self.y.0.log10(), self.y.1.log10()) } else { (y, self.y.0, self.y.1) };
        H - BOTTOM - (y - lo) / (hi - lo) * (H - TOP - BOTTOM)
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        let d = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        (lo - d, hi + d)
    }
}

/// Tick positions at 1, 2 or 5 × 10^k spacing.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let (k0, k1) = ((lo / step - 1e-9).ceil() as i64, (hi / step + 1e-9).floor() as i64);
    (k0..=k1).map(|k| k as f64 * step).collect()
}

fn label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open(svg: &mut String, axes: &Axes, frame: &Frame) {
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(&axes.title));
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    for t in ticks(frame.x.0, frame.x.1) {
        let x = frame.px(t);
        let _ = writeln!(svg, r##"<line x1="{x:.2}" y1="{y1:.2}" x2="{x:.2}" y2="{:.2}" stroke="#000"/>"##, y1 + 5.0);
        let _ = writeln!(svg, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, y1 + 19.0, label(t));
    }
    let yt: Vec<f64> = if frame.log_y {
        let (a, b) = (frame.y.0.log10().ceil() as i32, frame.y.1.log10().floor() as i32);
        (a..=b).map(|k| 10f64.powi(k)).collect()
    } else {
        ticks(frame.y.0, frame.y.1)
    };
    for t in yt {
        let y = frame.py(t);
        let _ = writeln!(svg, r##"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="#000"/>"##, x0 - 5.0);
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 8.0, y + 4.0, label(t));
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        H - 18.0,
        escape(&axes.x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(&axes.y_label)
    );
}

fn close_frame(svg: &mut String) {
    let _ = writeln!(
        svg,
        r##"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#000"/>"##,
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );
    svg.push_str("</svg>\n");
}

fn polyline(svg: &mut String, frame: &Frame, pts: &[(f64, f64)], color: &str, width: f64) {
    let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y))).collect();
    let _ = writeln!(
        svg,
        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="{width}"/>"#,
        coords.join(" ")
    );
}

/// Line plot of one or more series with a legend.
pub fn line_plot(axes: &Axes, series: &[Series]) -> Result<String> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(|p| p.0.is_finite() && p.1.is_finite() && (!axes.log_y || p.1 > 0.0))
        .collect();
    if pts.is_empty() {
        return Err(Error::EmptyData(format!("nothing to plot in `{}`", axes.title)));
    }
    let fold = |f: fn(&(f64, f64)) -> f64| {
        pts.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let (xr, yr) = (fold(|p| p.0), fold(|p| p.1));
    let y = if axes.log_y {
        let (lo, hi) = (yr.0.log10().floor(), yr.1.log10().ceil().max(yr.0.log10().floor() + 1.0));
        (10f64.powf(lo), 10f64.powf(hi))
    } else {
        padded(yr.0, yr.1)
    };
    let frame = Frame { x: padded(xr.0, xr.1), y, log_y: axes.log_y };
    let mut svg = String::new();
    open(&mut svg, axes, &frame);
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let visible: Vec<(f64, f64)> =
            s.points.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite() && (!axes.log_y || p.1 > 0.0)).collect();
        if !visible.is_empty() {
            polyline(&mut svg, &frame, &visible, color, 1.5);
        }
        let ly = TOP + 10.0 + 18.0 * k as f64;
        let lx = W - RIGHT + 12.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{lx:.2}" y="{:.2}" width="16" height="3" fill="{color}"/>"#,
            ly - 4.0
        );
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{ly:.2}">{}</text>"#, lx + 22.0, escape(&s.label));
    }
    close_frame(&mut svg);
    Ok(svg)
}

fn color_for(t: f64) -> String {
    // dark blue → teal → yellow
    const STOPS: [(f64, [f64; 3]); 3] = [(0.0, [68.0, 1.0, 84.0]), (0.5, [33.0, 145.0, 140.0]), (1.0, [253.0, 231.0, 37.0])];
    let t = t.clamp(0.0, 1.0);
    let k = if t <= 0.5 { 0 } else { 1 };
    let (a, b) = (STOPS[k], STOPS[k + 1]);
    let u = (t - a.0) / (b.0 - a.0);
    let c: Vec<u8> = (0..3).map(|i| (a.1[i] + u * (b.1[i] - a.1[i])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Heat map of a gridded field with contour and marker overlays.
pub fn grid_plot(axes: &Axes, data: &GridData) -> Result<String> {
    let (nx, ny) = (data.xs.len(), data.ys.len());
    if nx == 0 || ny == 0 || data.values.len() != nx * ny {
        return Err(Error::EmptyData(format!("grid plot `{}` has no cells", axes.title)));
    }
    let present: Vec<f64> = data.values.iter().flatten().copied().filter(|v| v.is_finite()).collect();
    let (vmin, vmax) = padded(
        present.iter().copied().fold(f64::INFINITY, f64::min),
        present.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    // cell edges halfway between samples
    let edges = |v: &[f64]| -> Vec<f64> {
        if v.len() == 1 {
            return vec![v[0] - 0.5, v[0] + 0.5];
        }
        let mut e = vec![v[0] - 0.5 * (v[1] - v[0])];
        e.extend(v.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        e.push(v[v.len() - 1] + 0.5 * (v[v.len() - 1] - v[v.len() - 2]));
        e
    };
    let (ex, ey) = (edges(&data.xs), edges(&data.ys));
    let frame = Frame { x: (ex[0], ex[nx]), y: (ey[0], ey[ny]), log_y: false };
    let mut svg = String::new();
    open(&mut svg, axes, &frame);
    for j in 0..ny {
        for i in 0..nx {
            let fill = match data.values[j * nx + i] {
                Some(v) if v.is_finite() => color_for((v - vmin) / (vmax - vmin)),
                _ => "#cccccc".into(),
            };
            let (x0, x1) = (frame.px(ex[i]), frame.px(ex[i + 1]));
            let (y0, y1) = (frame.py(ey[j + 1]), frame.py(ey[j]));
            let _ = writeln!(
                svg,
                r#"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                x1 - x0,
                y1 - y0
            );
        }
    }
    for c in &data.contours {
        polyline(&mut svg, &frame, c, "#ffffff", 2.0);
    }
    for &(x, y) in &data.markers {
        let _ = writeln!(
            svg,
            r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="#d62728" stroke="#000"/>"##,
            frame.px(x),
            frame.py(y)
        );
    }
    // color bar
    let bx = W - RIGHT + 20.0;
    for k in 0..20 {
        let t = k as f64 / 19.0;
        let y = H - BOTTOM - (k as f64 + 1.0) * (H - TOP - BOTTOM) / 20.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{bx:.2}" y="{y:.2}" width="18" height="{:.2}" fill="{}"/>"#,
            (H - TOP - BOTTOM) / 20.0 + 0.5,
            color_for(t)
        );
    }
    let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, bx + 24.0, H - BOTTOM, label(vmin));
    let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, bx + 24.0, TOP + 10.0, label(vmax));
    close_frame(&mut svg);
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let s = csv_string(headers::DELTA, &[vec![num(40.0), num(0.0125)], vec![num(50.5), opt(None)]]).unwrap();
        assert_eq!(s, "g_nm,delta\n40,0.0125\n50.5,\n");
        assert!(csv_string(headers::DELTA, &[vec![num(1.0)]]).is_err());
    }

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1e-300, 2.48e-4, -3.5, 1234567.0] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn two_point_series_has_one_polyline() {
        let svg = line_plot(&Axes::new("t", "x", "y"), &[Series::new("a", vec![(0.0, 1.0), (1.0, 2.0)])]).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        let start = svg.find("points=\"").unwrap() + 8;
        let pts = &svg[start..start + svg[start..].find('"').unwrap()];
        assert_eq!(pts.split(' ').count(), 2);
    }

    #[test]
    fn svg_is_deterministic_and_rejects_empty_input() {
        let s = [Series::new("E", vec![(12.5, 1e-2), (13.0, 1e-6), (15.0, 3e-2)])];
        let a = line_plot(&Axes::new("t", "x", "y").log_y(), &s).unwrap();
        assert_eq!(a, line_plot(&Axes::new("t", "x", "y").log_y(), &s).unwrap());
        assert!(line_plot(&Axes::default(), &[]).is_err());
        assert!(line_plot(&Axes::default(), &[Series::new("e", vec![])]).is_err());
        assert!(grid_plot(&Axes::default(), &GridData::default()).is_err());
    }

    #[test]
    fn grid_plot_draws_contours() {
        let data = GridData {
            xs: vec![400.0, 450.0, 500.0],
            ys: vec![80.0, 110.0],
            values: vec![Some(0.9), Some(1.0), Some(1.1), Some(0.95), None, Some(1.2)],
            contours: vec![vec![(450.0, 80.0), (460.0, 110.0)]],
            markers: vec![(475.0, 110.0)],
        };
        let svg = grid_plot(&Axes::new("xi", "w", "h"), &data).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains("#cccccc"));
        assert_eq!(svg, grid_plot(&Axes::new("xi", "w", "h"), &data).unwrap());
    }

    #[test]
    fn tick_spacing() {
        let close = |a: Vec<f64>, b: &[f64]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
        assert!(close(ticks(0.0, 1.0), &[0.0, 0.2, 0.4, 0.6, 0.8, 1.0]));
        assert!(close(ticks(12.5, 15.0), &[12.5, 13.0, 13.5, 14.0, 14.5, 15.0]));
        assert!(close(ticks(-0.15, 0.15), &[-0.1, 0.0, 0.1]));
    }
}
