//! Bessel functions of the first kind, integer order.

/// Power series, accurate to about 1e-12 absolute for |x| <= 12.
pub fn series_j(n: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = 1.0;
    for k in 1..=n {
        term *= half / k as f64;
    }
    let mut sum = term;
    let h2 = half * half;
    let mut k = 0u32;
    loop {
        k += 1;
        term *= -h2 / (k as f64 * (k + n) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) && k > 5 {
            break;
        }
        if k > 500 {
            break;
        }
    }
    sum
}

/// Miller's backward recurrence normalised by `J_0 + 2 sum J_{2k} = 1`.
/// Returns `J_0 .. J_{n_max}` at `x > 0`.
pub fn miller(x: f64, n_max: usize) -> Vec<f64> {
    assert!(x > 0.0);
    let start = {
        let base = x.max(n_max as f64) + 40.0 + 12.0 * x.cbrt();
        let s = base as usize + 2;
        s + (s % 2)
    };
    let mut vals = vec![0.0; start + 2];
    vals[start + 1] = 0.0;
    vals[start] = 1e-30;
    for k in (1..=start).rev() {
        vals[k - 1] = 2.0 * k as f64 / x * vals[k] - vals[k + 1];
        if vals[k - 1].abs() > 1e250 {
            for v in vals[k - 1..].iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let mut norm = vals[0];
    let mut k = 2;
    while k <= start {
        norm += 2.0 * vals[k];
        k += 2;
    }
    vals.truncate(n_max + 1);
    vals.iter().map(|v| v / norm).collect()
}

/// `J_n(x)` for integer `n >= 0` and real `x`.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    let sign = if x < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
    let ax = x.abs();
    if ax == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if ax <= 12.0 {
        return sign * series_j(n, ax);
    }
    sign * miller(ax, n as usize)[n as usize]
}

pub fn bessel_j0(x: f64) -> f64 {
    bessel_j(0, x)
}

/// Leading-order Hankel asymptotic of `J_0`, used only as a sanity comparison.
pub fn j0_asymptotic(x: f64) -> f64 {
    let ax = x.abs();
    (2.0 / (std::f64::consts::PI * ax)).sqrt() * (ax - std::f64::consts::FRAC_PI_4).cos()
}
