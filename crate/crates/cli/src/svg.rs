//! SVG rendering of a pseudospectrum scan.

use std::fmt::Write;

use hwlab::scan::ScanResult;

const MAX_SIDE: f64 = 800.0;
const LOG_FLOOR: f64 = -8.0;

/// Grey level for `σ_min`: black at `10^-8` and below, white at 1 and above.
fn shade(sigma: f64) -> u8 {
    let t = (sigma.max(1e-300).log10().clamp(LOG_FLOOR, 0.0) - LOG_FLOOR) / -LOG_FLOOR;
    (t * 255.0).round() as u8
}

/// SVG 1.1 document. Everything inside the plot group is drawn in the
/// complex plane's own coordinates (the group flips and scales), so the bulb
/// outline is literally `<circle cx="1" cy="0" r="1"/>`.
pub fn render(result: &ScanResult) -> String {
    let g = &result.grid;
    let (w_re, w_im) = (g.re.1 - g.re.0, g.im.1 - g.im.0);
    let scale = MAX_SIDE / w_re.max(w_im);
    let (width, height) = (w_re * scale, w_im * scale);
    let (dx, dy) = (w_re / (g.nx - 1) as f64, w_im / (g.ny - 1) as f64);
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.3}" height="{height:.3}" viewBox="0 0 {width:.3} {height:.3}">"#
    );
    let _ = writeln!(out, "<title>smallest singular value of A_N - lambda, N = {}</title>", result.n);
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{width:.3}" height="{height:.3}" style="fill:#ffffff"/>"#);
    let _ = writeln!(
        out,
        r#"<g transform="matrix({scale:.6} 0 0 {neg:.6} {tx:.6} {ty:.6})">"#,
        neg = -scale,
        tx = -g.re.0 * scale,
        ty = g.im.1 * scale
    );
    for (z, s) in result.rows() {
        let v = shade(s);
        let _ = writeln!(
            out,
            r#"<rect x="{:.6}" y="{:.6}" width="{dx:.6}" height="{dy:.6}" style="fill:rgb({v},{v},{v});stroke:none"/>"#,
            z.re - dx / 2.0,
            z.im - dy / 2.0
        );
    }
    let stroke = "fill:none;stroke:#d62728;stroke-width:2;vector-effect:non-scaling-stroke";
    let _ = writeln!(out, r#"<line x1="-1" y1="0" x2="0" y2="0" style="{stroke}"/>"#);
    let _ = writeln!(out, r#"<circle cx="1" cy="0" r="1" style="{stroke}"/>"#);
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, "</svg>");
    out
}
