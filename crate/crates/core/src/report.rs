//! Static report artifacts: CSV tables, skeleton renderings coloured by
//! attribution, and response-curve plots. All output is plain text (CSV or
//! SVG) with fixed number formatting.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use crate::cohort::RiskGroup;
use crate::error::{Error, Result};
use crate::perturb::{read_curves_csv, write_curves_csv, Mode, ResponseCurve};
use crate::pipeline::WindowPrediction;
use crate::skeleton::{MotionWindow, SkeletonTopology};
use crate::xai::{AttributionResult, Color};

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

pub fn write_curves(curves: &[ResponseCurve], path: &Path) -> Result<()> {
    write_curves_csv(curves, create(path)?)
}

pub fn read_curves(path: &Path) -> Result<Vec<ResponseCurve>> {
    read_curves_csv(File::open(path).map_err(|e| Error::io(path, e))?)
}

pub fn write_predictions_csv(preds: &[WindowPrediction], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["window", "subject_id", "split", "label", "median", "p25", "p75", "predicted"])?;
    for p in preds {
        w.write_record([
            p.id.clone(),
            p.subject_id.clone(),
            format!("{:?}", p.split).to_lowercase(),
            p.label.to_string(),
            p.prediction.median.to_string(),
            p.prediction.p25.to_string(),
            p.prediction.p75.to_string(),
            p.predicted.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One row per (window, joint).
pub fn write_scores_csv(
    topo: &SkeletonTopology,
    rows: &[(&str, RiskGroup, &AttributionResult)],
    path: &Path,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["window", "group", "joint", "median", "p25", "p75", "color"])?;
    for (id, group, result) in rows {
        for (j, a) in result.joints.iter().enumerate() {
            w.write_record([
                id.to_string(),
                group.to_string(),
                topo.joint_names()[j].clone(),
                a.median.to_string(),
                a.p25.to_string(),
                a.p75.to_string(),
                a.color.as_str().to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

const PANEL_W: f64 = 300.0;
const PLOT_TOP: f64 = 50.0;
const PLOT_H: f64 = 220.0;
const MARGIN_L: f64 = 60.0;
const PANEL_GAP: f64 = 50.0;

fn risk_y(v: f64) -> f64 {
    PLOT_TOP + (1.0 - v.clamp(0.0, 1.0)) * PLOT_H
}

/// Two panels (slowdown, speedup) with factors on a categorical x axis:
/// median risk line, shaded interquartile band, dashed prediction threshold
/// and, when given, a dotted baseline.
pub fn curve_svg(curve: &ResponseCurve, baseline_median: Option<f64>, threshold: f64) -> String {
    let width = MARGIN_L + 2.0 * PANEL_W + PANEL_GAP + 20.0;
    let height = PLOT_TOP + PLOT_H + 60.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" font-size="14" text-anchor="middle">{} perturbation | {} | {} | {}</text>"#,
        width / 2.0,
        curve.kind,
        curve.method,
        curve.group,
        curve.joint_set
    );
    for (k, mode) in [Mode::Slowdown, Mode::Speedup].into_iter().enumerate() {
        let left = MARGIN_L + k as f64 * (PANEL_W + PANEL_GAP);
        let right = left + PANEL_W;
        let pts: Vec<_> = curve.mode_points(mode).collect();
        let _ = writeln!(
            s,
            r##"<rect x="{left}" y="{PLOT_TOP}" width="{PANEL_W}" height="{PLOT_H}" fill="none" stroke="#444"/>"##
        );
        for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let y = risk_y(tick);
            let _ = writeln!(
                s,
                r##"<line x1="{:.2}" y1="{y:.2}" x2="{left}" y2="{y:.2}" stroke="#444"/><text x="{:.2}" y="{:.2}" text-anchor="end">{tick}</text>"##,
                left - 4.0,
                left - 6.0,
                y + 4.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{mode} multiplier</text>"#,
            left + PANEL_W / 2.0,
            PLOT_TOP + PLOT_H + 40.0
        );
        if pts.is_empty() {
            continue;
        }
        let step = PANEL_W / pts.len() as f64;
        let xs: Vec<f64> = (0..pts.len()).map(|i| left + step * (i as f64 + 0.5)).collect();
        for (x, p) in xs.iter().zip(&pts) {
            let _ = writeln!(
                s,
                r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                PLOT_TOP + PLOT_H + 18.0,
                p.factor
            );
        }
        // A single factor is drawn across the whole panel.
        let (xs, pts) = if pts.len() == 1 {
            (vec![left, right], vec![pts[0], pts[0]])
        } else {
            (xs, pts)
        };
        let mut band = String::new();
        for (x, p) in xs.iter().zip(&pts) {
            let _ = write!(band, "{x:.2},{:.2} ", risk_y(p.p75));
        }
        for (x, p) in xs.iter().zip(&pts).rev() {
            let _ = write!(band, "{x:.2},{:.2} ", risk_y(p.p25));
        }
        let _ = writeln!(
            s,
            r##"<polygon class="iqr" points="{}" fill="#1f77b4" fill-opacity="0.25" stroke="none"/>"##,
            band.trim_end()
        );
        let line: Vec<String> = xs.iter().zip(&pts).map(|(x, p)| format!("{x:.2},{:.2}", risk_y(p.median))).collect();
        let _ = writeln!(
            s,
            r##"<polyline class="median" points="{}" fill="none" stroke="#1f77b4" stroke-width="2"/>"##,
            line.join(" ")
        );
        let ty = risk_y(threshold);
        let _ = writeln!(
            s,
            r##"<line class="threshold" x1="{left}" y1="{ty:.2}" x2="{right}" y2="{ty:.2}" stroke="#d62728" stroke-dasharray="6 4"/>"##
        );
        if let Some(b) = baseline_median {
            let by = risk_y(b);
            let _ = writeln!(
                s,
                r##"<line class="baseline" x1="{left}" y1="{by:.2}" x2="{right}" y2="{by:.2}" stroke="#777" stroke-dasharray="2 3"/>"##
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" transform="rotate(-90 16 {:.2})" text-anchor="middle">predicted risk</text>"#,
        PLOT_TOP + PLOT_H / 2.0,
        PLOT_TOP + PLOT_H / 2.0
    );
    s.push_str("</svg>\n");
    s
}

/// Mean pose of the window with bones in grey and joints filled with their
/// attribution colour, next to the per-joint score table. The y axis points
/// up.
pub fn skeleton_svg(topo: &SkeletonTopology, window: &MotionWindow, result: &AttributionResult, title: &str) -> String {
    let joints = topo.joint_count();
    let mut pose = vec![[0.0f64; 2]; joints];
    for t in 0..window.frames() {
        for (j, p) in pose.iter_mut().enumerate() {
            let q = window.at(t, j);
            p[0] += q[0] / window.frames() as f64;
            p[1] += q[1] / window.frames() as f64;
        }
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &pose {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let (box_w, box_h, box_x, box_y) = (300.0f64, 380.0f64, 30.0f64, 60.0f64);
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9);
    let scale = box_w.min(box_h) / span;
    let cx = box_x + box_w / 2.0 - (lo[0] + hi[0]) / 2.0 * scale;
    let cy = box_y + box_h / 2.0 + (lo[1] + hi[1]) / 2.0 * scale;
    let to_px = |p: [f64; 2]| (cx + p[0] * scale, cy - p[1] * scale);

    let row_h = 18.0;
    let width = 760.0;
    let height = (box_y + box_h + 20.0).max(box_y + 40.0 + row_h * joints as f64);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="20" y="28" font-size="14">{}</text>"#, escape(title));
    for (c, p) in topo.edges() {
        let ((x1, y1), (x2, y2)) = (to_px(pose[c]), to_px(pose[p]));
        let _ = writeln!(
            s,
            r##"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="#999" stroke-width="3"/>"##
        );
    }
    for (j, a) in result.joints.iter().enumerate() {
        let (x, y) = to_px(pose[j]);
        let _ = writeln!(
            s,
            r##"<circle class="joint" data-joint="{j}" cx="{x:.2}" cy="{y:.2}" r="8" fill="{}" stroke="#222"/><text x="{:.2}" y="{:.2}" font-size="10">{j}</text>"##,
            a.color.hex(),
            x + 9.0,
            y - 6.0
        );
    }
    let tx = 380.0;
    let _ = writeln!(
        s,
        r#"<text x="{tx}" y="{box_y}" font-weight="bold">joint</text><text x="{}" y="{box_y}" font-weight="bold">median</text><text x="{}" y="{box_y}" font-weight="bold">P25 - P75</text>"#,
        tx + 150.0,
        tx + 220.0
    );
    for (j, a) in result.joints.iter().enumerate() {
        let y = box_y + row_h * (j as f64 + 1.0);
        let _ = writeln!(
            s,
            r##"<rect x="{tx}" y="{:.2}" width="10" height="10" fill="{}" stroke="#222"/><text x="{}" y="{y:.2}">{j} {}</text><text x="{}" y="{y:.2}">{:.3}</text><text x="{}" y="{y:.2}">{:.3} - {:.3}</text>"##,
            y - 9.0,
            a.color.hex(),
            tx + 16.0,
            escape(&topo.joint_names()[j]),
            tx + 150.0,
            a.median,
            tx + 220.0,
            a.p25,
            a.p75
        );
    }
    let legend_y = box_y + row_h * (joints as f64 + 2.0);
    for (k, c) in [Color::Green, Color::Yellow, Color::Orange, Color::Red].into_iter().enumerate() {
        let x = tx + 90.0 * k as f64;
        let _ = writeln!(
            s,
            r##"<rect x="{x}" y="{:.2}" width="10" height="10" fill="{}" stroke="#222"/><text x="{}" y="{legend_y:.2}">{}</text>"##,
            legend_y - 9.0,
            c.hex(),
            x + 14.0,
            c.as_str()
        );
    }
    s.push_str("</svg>\n");
    s
}
