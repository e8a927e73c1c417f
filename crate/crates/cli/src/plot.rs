//! Minimal CSV/SVG emitters for curves and quiver plots.

use std::fmt::Write as _;

use bff_core::evaluate::CurveResult;
use bff_core::{DirectionalGrid, OccupancyGrid, Probability};

/// One arrow per (cell, direction) entry with probability >= `min_prob`.
pub struct QuiverEntry {
    pub x: f64,
    pub y: f64,
    pub direction: usize,
    pub angle: f64,
    pub probability: f64,
}

pub fn quiver_entries<T: Probability>(model: &DirectionalGrid<T>, min_prob: f64) -> Vec<QuiverEntry> {
    let g = model.geometry();
    let b = model.binning();
    let mut out = Vec::new();
    for (cell, probs) in model.cells().enumerate() {
        let (x, y) = g.cell_center(g.cell_at(cell));
        for (direction, p) in probs.iter().enumerate() {
            let probability = p.to_f64_lossless();
            if probability >= min_prob {
                out.push(QuiverEntry { x, y, direction, angle: b.center(direction), probability });
            }
        }
    }
    out
}

pub fn quiver_csv(entries: &[QuiverEntry]) -> String {
    let mut out = String::from("x,y,direction_index,angle,probability\n");
    for e in entries {
        let _ = writeln!(out, "{},{},{},{},{}", e.x, e.y, e.direction, e.angle, e.probability);
    }
    out
}

const CELL_PX: f64 = 24.0;

pub fn quiver_svg<T: Probability, U: Probability>(
    model: &DirectionalGrid<T>,
    entries: &[QuiverEntry],
    underlay: Option<&OccupancyGrid<U>>,
) -> String {
    let g = model.geometry();
    let (w, h) = (g.width as f64 * CELL_PX, g.height as f64 * CELL_PX);
    let px = |x: f64| (x - g.origin_x) / g.resolution * CELL_PX;
    // SVG y grows downwards; world row 0 is at the bottom
    let py = |y: f64| h - (y - g.origin_y) / g.resolution * CELL_PX;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    if let Some(map) = underlay {
        let _ = writeln!(s, r#"<g class="map">"#);
        for cell in 0..g.cell_count() {
            let c = g.cell_at(cell);
            let (cx, cy) = g.cell_center(c);
            let occ = map.sample_bilinear(cx, cy, 0.5);
            let level = (255.0 * (1.0 - occ)).round() as u8;
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="{CELL_PX}" height="{CELL_PX}" fill="rgb({level},{level},{level})"/>"#,
                c.col as f64 * CELL_PX,
                h - (c.row + 1) as f64 * CELL_PX,
            );
        }
        let _ = writeln!(s, "</g>");
    }
    let _ = writeln!(s, r#"<g stroke="crimson" stroke-linecap="round">"#);
    for e in entries {
        let len = e.probability * 0.5 * CELL_PX;
        let (x0, y0) = (px(e.x), py(e.y));
        let (x1, y1) = (x0 + len * e.angle.cos(), y0 - len * e.angle.sin());
        let _ = writeln!(
            s,
            r#"<line class="arrow" x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y1:.2}" stroke-width="{:.2}"/>"#,
            0.5 + 1.5 * e.probability
        );
    }
    let _ = writeln!(s, "</g>\n</svg>");
    s
}

pub fn curve_svg(curve: &CurveResult) -> String {
    let (w, h) = (800.0, 480.0);
    let (left, right, top, bottom) = (70.0, 20.0, 20.0, 50.0);
    let max_n = curve.points.last().map(|p| p.0).unwrap_or(1).max(1) as f64;
    let mut max_l = curve.points.iter().map(|p| p.1).fold(0.0f64, f64::max);
    if let Some(u) = curve.meta.upper_bound {
        max_l = max_l.max(u);
    }
    let max_l = (max_l * 1.1).clamp(0.05, 1.0);
    let sx = |n: f64| left + n / max_n * (w - left - right);
    let sy = |l: f64| h - bottom - l / max_l * (h - top - bottom);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{left},{top} V{} H{}" fill="none" stroke="black"/>"#,
        h - bottom,
        w - right
    );
    for i in 0..=5 {
        let l = max_l * i as f64 / 5.0;
        let n = max_n * i as f64 / 5.0;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{l:.3}</text>"#, left - 6.0, sy(l) + 4.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, sx(n), h - bottom + 18.0, n.round());
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">n</text>"#, (left + w - right) / 2.0, h - 8.0);
    if let Some(u) = curve.meta.upper_bound {
        let _ = writeln!(
            s,
            r#"<line class="upper-bound" x1="{left}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="gray" stroke-dasharray="4 4"/>"#,
            w - right,
            y = sy(u)
        );
    }
    let pts: Vec<String> = curve.points.iter().map(|(n, l)| format!("{:.2},{:.2}", sx(*n as f64), sy(*l))).collect();
    let _ = writeln!(s, r#"<polyline class="curve" points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#, pts.join(" "));
    let label = match curve.meta.alpha {
        Some(a) => format!("prior {} (alpha {a})", curve.meta.prior),
        None => "floor field".to_string(),
    };
    let _ = writeln!(s, r#"<text x="{}" y="{}">{label}</text>"#, left + 10.0, top + 14.0);
    s.push_str("</svg>\n");
    s
}
