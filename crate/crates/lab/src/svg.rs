use std::fmt::Write;

use crate::fit::LogFit;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 56.0;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Scatter of `y` against `log x` with the fitted curve, as a standalone SVG.
pub fn ratio_plot(title: &str, x_label: &str, points: &[(f64, f64)], fit: Option<&LogFit>) -> String {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && y.is_finite())
        .map(|&(x, y)| (x.ln(), y))
        .collect();
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, esc(title));
    if pts.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (0.0f64, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if let Some(f) = fit {
        for k in 0..=32 {
            let x = x0 + (x1 - x0) * k as f64 / 32.0;
            let y = f.predict(x.exp());
            if y.is_finite() {
                y0 = y0.min(y);
                y1 = y1.max(y);
            }
        }
    }
    if x1 - x0 < 1e-12 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    y1 += 0.05 * (y1 - y0);
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let _ = writeln!(
        out,
        r#"<path d="M{PAD},{} H{} M{PAD},{} V{}" stroke="black" fill="none"/>"#,
        H - PAD,
        W - PAD,
        H - PAD,
        PAD
    );
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let (x, y) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{:.3}</text>"#,
            sx(x),
            H - PAD + 16.0,
            x
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3}</text>"#,
            PAD - 6.0,
            sy(y) + 4.0,
            y
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">log {}</text>"#,
        W / 2.0,
        H - 12.0,
        esc(x_label)
    );
    for &(x, y) in &pts {
        let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#, sx(x), sy(y));
    }
    if let Some(f) = fit {
        let mut d = String::new();
        for k in 0..=64 {
            let x = x0 + (x1 - x0) * k as f64 / 64.0;
            let y = f.predict(x.exp());
            if y.is_finite() {
                let _ = write!(d, "{}{:.2},{:.2} ", if d.is_empty() { "M" } else { "L" }, sx(x), sy(y));
            }
        }
        let _ = writeln!(out, r#"<path d="{}" stroke="firebrick" fill="none"/>"#, d.trim_end());
        let _ = writeln!(
            out,
            r#"<text x="{}" y="40" text-anchor="end" fill="firebrick">p = {:.4}, C = {:.4}, rms = {:.4}</text>"#,
            W - PAD,
            f.p,
            f.c,
            f.rms
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::fit_log_exponent;

    #[test]
    fn plot_contains_points_and_curve() {
        let pts: Vec<(f64, f64)> = (3..8).map(|k| (2f64.powi(k), (k as f64).sqrt())).collect();
        let fit = fit_log_exponent(&pts).unwrap();
        let s = ratio_plot("a < b", "N", &pts, Some(&fit));
        assert!(s.starts_with("<svg"));
        assert!(s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<circle").count(), 5);
        assert!(s.contains("firebrick"));
        assert!(s.contains("a &lt; b"));
        let empty = ratio_plot("none", "N", &[], None);
        assert!(!empty.contains("<circle"));
    }
}
