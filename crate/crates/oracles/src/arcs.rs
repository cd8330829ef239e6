//! Composite Simpson rules on arcs of the unit circle.

use std::f64::consts::TAU;

/// `int_a^b f(theta) dtheta` with `2m` Simpson panels.
pub fn simpson(a: f64, b: f64, m: usize, f: impl Fn(f64) -> f64) -> f64 {
    let k = 2 * m.max(1);
    let h = (b - a) / k as f64;
    let mut s = f(a) + f(b);
    for i in 1..k {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// `int_a^b w(theta) e^{-2 pi i y . (cos theta, sin theta)} dtheta` as (re, im).
pub fn arc_fourier(a: f64, b: f64, m: usize, y: [f64; 2], w: impl Fn(f64) -> f64) -> (f64, f64) {
    let arg = |t: f64| -TAU * (y[0] * t.cos() + y[1] * t.sin());
    let re = simpson(a, b, m, |t| w(t) * arg(t).cos());
    let im = simpson(a, b, m, |t| w(t) * arg(t).sin());
    (re, im)
}
