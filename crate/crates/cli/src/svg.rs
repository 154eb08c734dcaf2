//! Minimal SVG figures: a set boundary with one inscribed shape, and a line
//! plot for `f(t)` profiles. The y axis points up.

use std::f64::consts::TAU;
use std::fmt::Write;

use inbox_core::{ConvexSet, Result};
use nalgebra::DVector;

/// Segments used to trace a curved boundary.
const BOUNDARY_SEGMENTS: usize = 512;

fn boundary_points(set: &ConvexSet) -> Result<Vec<[f64; 2]>> {
    if let Some(p) = set.polygon() {
        return Ok(p.vertices().iter().map(|v| [v.x, v.y]).collect());
    }
    let origin = set.interior_point()?;
    let mut pts = Vec::with_capacity(BOUNDARY_SEGMENTS);
    for k in 0..BOUNDARY_SEGMENTS {
        let a = TAU * k as f64 / BOUNDARY_SEGMENTS as f64;
        let dir = DVector::from_vec(vec![a.cos(), a.sin()]);
        if let Some(s) = set.ray_exit(&origin, &dir) {
            pts.push([origin[0] + s * dir[0], origin[1] + s * dir[1]]);
        }
    }
    Ok(pts)
}

fn points_attr(pts: &[[f64; 2]]) -> String {
    pts.iter().map(|p| format!("{:.6},{:.6}", p[0], -p[1])).collect::<Vec<_>>().join(" ")
}

/// Set boundary as one path and `shape` (corners in order) as one polygon.
pub fn scene(set: &ConvexSet, shape: &[[f64; 2]]) -> Result<String> {
    let boundary = boundary_points(set)?;
    let all = boundary.iter().chain(shape);
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in all {
        for i in 0..2 {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    let pad = 0.05 * (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let (x0, y0) = (lo[0] - pad, -hi[1] - pad);
    let (w, h) = (hi[0] - lo[0] + 2.0 * pad, hi[1] - lo[1] + 2.0 * pad);
    let stroke = 0.004 * w.max(h);

    let mut d = String::new();
    for (i, p) in boundary.iter().enumerate() {
        let _ = write!(d, "{}{:.6},{:.6} ", if i == 0 { "M" } else { "L" }, p[0], -p[1]);
    }
    d.push('Z');

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{x0:.6} {y0:.6} {w:.6} {h:.6}" width="600" height="{:.0}">"#,
        600.0 * h / w
    );
    let _ = writeln!(out, r#"  <path d="{d}" fill="none" stroke="black" stroke-width="{stroke:.6}"/>"#);
    let _ = writeln!(
        out,
        r##"  <polygon points="{}" fill="#4a90d9" fill-opacity="0.35" stroke="#1f4e8c" stroke-width="{stroke:.6}"/>"##,
        points_attr(shape)
    );
    out.push_str("</svg>\n");
    Ok(out)
}

/// Line plot of `(t, f(t))` samples.
pub fn profile_plot(samples: &[(f64, f64)]) -> String {
    let (w, h, m) = (640.0, 400.0, 40.0);
    let fmax = samples.iter().map(|s| s.1).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let px = |t: f64| m + (t + 1.0) / 2.0 * (w - 2.0 * m);
    let py = |f: f64| h - m - f / fmax * (h - 2.0 * m);
    let pts: Vec<String> = samples.iter().map(|&(t, f)| format!("{:.3},{:.3}", px(t), py(f))).collect();
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {w} {h}" width="{w}" height="{h}">"#);
    let _ = writeln!(
        out,
        r#"  <line x1="{m}" y1="{0}" x2="{1}" y2="{0}" stroke="gray"/>"#,
        h - m,
        w - m
    );
    let _ = writeln!(out, r#"  <line x1="{m}" y1="{m}" x2="{m}" y2="{}" stroke="gray"/>"#, h - m);
    let _ = writeln!(out, r#"  <text x="{}" y="{}" font-size="12">t</text>"#, w - m, h - m / 3.0);
    let _ = writeln!(out, r#"  <text x="4" y="{}" font-size="12">{fmax:.4}</text>"#, m);
    let _ = writeln!(
        out,
        r##"  <polyline points="{}" fill="none" stroke="#c0392b" stroke-width="1.5"/>"##,
        pts.join(" ")
    );
    out.push_str("</svg>\n");
    out
}
