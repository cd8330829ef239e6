//! Shell multipliers `S^delta` and their cap pieces `S_alpha` on a periodic grid.

mod sumset;

pub use sumset::{coin_polygon, minkowski_sum, polygon_area, sumset_multiplicity, SumsetReport};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use crate::error::{LabError, Result};
use crate::extension_field::nufft::{fft_nd, smooth_size};
use crate::extension_field::RatioReport;
use crate::geom::Point;
use crate::sphere_caps::{cap_decompose, mem_budget, BumpProfile, CapSystem};

/// Radial profile `Phi`, applied as `Phi((|xi| - 1) / delta)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ShellProfile {
    pub phi: BumpProfile,
}

impl ShellProfile {
    pub fn multiplier(&self, xi_norm: f64, delta: f64) -> f64 {
        self.phi.eval((xi_norm - 1.0) / delta)
    }

    pub fn max(&self) -> f64 {
        self.phi.eval(0.0)
    }
}

/// Samples of a function on the torus `(R / P Z)^n` at `x = j P / m`, row-major,
/// last axis fastest.
#[derive(Debug, Clone)]
pub struct PeriodicField {
    pub n: usize,
    pub side: f64,
    pub m: usize,
    pub values: Vec<Complex64>,
    pub seed: Option<u64>,
}

fn wrap(i: usize, m: usize) -> i64 {
    if i < m / 2 {
        i as i64
    } else {
        i as i64 - m as i64
    }
}

impl PeriodicField {
    pub fn zeros(n: usize, side: f64, m: usize) -> Result<PeriodicField> {
        if n != 2 && n != 3 {
            return Err(LabError::UnsupportedDimension(n));
        }
        if m < 2 || m % 2 != 0 {
            return Err(LabError::InvalidArgument(format!("samples per side {m} must be even")));
        }
        if !(side > 0.0) {
            return Err(LabError::range("side", side, "(0, inf)"));
        }
        let count = m.pow(n as u32);
        let bytes = count as u64 * 16;
        if bytes > mem_budget() {
            return Err(LabError::BudgetExceeded {
                what: "periodic field",
                required: bytes,
                budget: mem_budget(),
            });
        }
        Ok(PeriodicField {
            n,
            side,
            m,
            values: vec![Complex64::new(0.0, 0.0); count],
            seed: None,
        })
    }

    /// Torus of side `P = side_factor / delta` whose lattice reaches past `|xi| = 1 + delta`.
    pub fn for_shell(n: usize, delta: f64, side_factor: f64) -> Result<PeriodicField> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(LabError::range("delta", delta, "(0, 1)"));
        }
        let side = side_factor / delta;
        let m = smooth_size(2 * (side * (1.0 + delta)).ceil() as usize + 4);
        PeriodicField::zeros(n, side, m)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.side / self.m as f64
    }

    fn lattice(&self, flat: usize) -> [i64; 3] {
        let mut k = [0i64; 3];
        let mut r = flat;
        for a in (0..self.n).rev() {
            k[a] = wrap(r % self.m, self.m);
            r /= self.m;
        }
        k
    }

    /// Frequency `k / P` of spectrum entry `flat`, in FFT order.
    pub fn frequency(&self, flat: usize) -> Point {
        let k = self.lattice(flat);
        let s = 1.0 / self.side;
        [k[0] as f64 * s, k[1] as f64 * s, k[2] as f64 * s]
    }

    /// Representative of sample `flat` in `[-P/2, P/2)^n`.
    pub fn position(&self, flat: usize) -> Point {
        let k = self.lattice(flat);
        let h = self.spacing();
        [k[0] as f64 * h, k[1] as f64 * h, k[2] as f64 * h]
    }

    fn flat_of(&self, k: [i64; 3]) -> usize {
        let m = self.m as i64;
        (0..self.n).fold(0usize, |acc, a| acc * self.m + k[a].rem_euclid(m) as usize)
    }

    /// Unnormalised forward DFT.
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut out = self.values.clone();
        fft_nd(&mut out, self.m, self.n, false);
        out
    }

    /// Inverse of [`PeriodicField::spectrum`].
    pub fn set_from_spectrum(&mut self, mut spectrum: Vec<Complex64>) {
        fft_nd(&mut spectrum, self.m, self.n, true);
        let norm = 1.0 / spectrum.len() as f64;
        for v in &mut spectrum {
            *v *= norm;
        }
        self.values = spectrum;
    }

    /// `e^{2 pi i k . x / P}`.
    pub fn mode(n: usize, side: f64, m: usize, k: [i64; 3]) -> Result<PeriodicField> {
        let mut f = PeriodicField::zeros(n, side, m)?;
        if (0..n).any(|a| k[a] < -(m as i64) / 2 || k[a] >= m as i64 / 2) {
            return Err(LabError::InvalidArgument(format!("mode {k:?} beyond Nyquist")));
        }
        let mut spec = vec![Complex64::new(0.0, 0.0); f.len()];
        spec[f.flat_of(k)] = Complex64::new(f.len() as f64, 0.0);
        f.set_from_spectrum(spec);
        Ok(f)
    }

    /// Complex Gaussian coefficients on the lattice points with `||xi| - 1| <= delta`.
    pub fn random_shell(n: usize, delta: f64, side_factor: f64, seed: u64) -> Result<PeriodicField> {
        let mut f = PeriodicField::for_shell(n, delta, side_factor)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut spec = vec![Complex64::new(0.0, 0.0); f.len()];
        for (flat, s) in spec.iter_mut().enumerate() {
            let xi = f.frequency(flat);
            let r = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
            if (r - 1.0).abs() <= delta {
                *s = Complex64::new(gauss(&mut rng), gauss(&mut rng));
            }
        }
        f.set_from_spectrum(spec);
        f.seed = Some(seed);
        Ok(f)
    }

    /// `(sum |f|^q h^n)^{1/q}` over the torus, or over `|x| <= radius`; `q = inf` gives the max.
    pub fn lq_norm(&self, q: f64, radius: Option<f64>) -> f64 {
        let moduli: Vec<f64> = self.values.iter().map(|v| v.norm()).collect();
        lq_of(self, &moduli, q, radius)
    }

    /// `|f|` on the slice through the origin (last axis `0` for `n = 3`) as an 8-bit PGM.
    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let m = self.m;
        let offset = if self.n == 3 { 0 } else { usize::MAX };
        let at = |i: usize, j: usize| -> f64 {
            let (i, j) = ((i + m / 2) % m, (j + m / 2) % m);
            let flat = if offset == usize::MAX { i * m + j } else { (i * m + j) * m };
            self.values[flat].norm()
        };
        let mut top = 0.0f64;
        for i in 0..m {
            for j in 0..m {
                top = top.max(at(i, j));
            }
        }
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(out, "P5\n{m} {m}\n255\n")?;
        let mut row = vec![0u8; m];
        for i in 0..m {
            for (j, px) in row.iter_mut().enumerate() {
                *px = if top > 0.0 { (255.0 * at(i, j) / top).round() as u8 } else { 0 };
            }
            out.write_all(&row)?;
        }
        Ok(())
    }
}

fn gauss<R: Rng>(rng: &mut R) -> f64 {
    let u: f64 = 1.0 - rng.gen::<f64>();
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

fn lq_of(f: &PeriodicField, moduli: &[f64], q: f64, radius: Option<f64>) -> f64 {
    let inside = |flat: usize| match radius {
        None => true,
        Some(r) => {
            let x = f.position(flat);
            x[0] * x[0] + x[1] * x[1] + x[2] * x[2] <= r * r
        }
    };
    if q.is_infinite() {
        return moduli
            .iter()
            .enumerate()
            .filter(|(i, _)| inside(*i))
            .fold(0.0, |m, (_, v)| m.max(*v));
    }
    let cell = f.spacing().powi(f.n as i32);
    let s: f64 = moduli
        .iter()
        .enumerate()
        .filter(|(i, _)| inside(*i))
        .map(|(_, v)| v.powf(q))
        .sum();
    (s * cell).powf(1.0 / q)
}

/// Lattice points of the shell `||xi| - 1| < delta` with their multiplier
/// values, and the cap bumps `phi_alpha(xi / |xi|)` at each.
pub struct ShellPieces {
    pub delta: f64,
    pub profile: ShellProfile,
    pub caps: CapSystem,
    /// `(flat, Phi)` for every shell lattice point.
    pub entries: Vec<(usize, f64)>,
    /// Per cap: `(entry, phi_alpha)`.
    pub per_cap: Vec<Vec<(u32, f64)>>,
}

impl ShellPieces {
    /// Caps at angular scale `delta^{1/2}`.
    pub fn new(f: &PeriodicField, delta: f64, profile: ShellProfile) -> Result<ShellPieces> {
        let caps = cap_decompose(f.n, delta.sqrt(), profile.phi)?;
        ShellPieces::with_caps(f, delta, profile, caps)
    }

    pub fn with_caps(f: &PeriodicField, delta: f64, profile: ShellProfile, caps: CapSystem) -> Result<ShellPieces> {
        check_resolved(f, delta)?;
        if caps.n != f.n {
            return Err(LabError::Mismatch(format!("caps in n={} for a field in n={}", caps.n, f.n)));
        }
        let mut entries = Vec::new();
        let mut per_cap = vec![Vec::new(); caps.len()];
        let mut bumps = Vec::new();
        for flat in 0..f.len() {
            let xi = f.frequency(flat);
            let r = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
            let w = profile.multiplier(r, delta);
            if w == 0.0 {
                continue;
            }
            let e = entries.len() as u32;
            entries.push((flat, w));
            caps.bumps_at(&[xi[0] / r, xi[1] / r, xi[2] / r], &mut bumps);
            for &(a, v) in &bumps {
                per_cap[a as usize].push((e, v));
            }
        }
        Ok(ShellPieces {
            delta,
            profile,
            caps,
            entries,
            per_cap,
        })
    }

    /// Spectrum of `S^delta f` from the spectrum of `f`.
    pub fn sdelta_spectrum(&self, spec: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); spec.len()];
        for &(flat, w) in &self.entries {
            out[flat] = spec[flat] * w;
        }
        out
    }

    /// Spectrum of `S_alpha f`, written into `out` (which is cleared first).
    pub fn cap_spectrum(&self, spec: &[Complex64], alpha: usize, out: &mut Vec<Complex64>) {
        out.clear();
        out.resize(spec.len(), Complex64::new(0.0, 0.0));
        for &(e, v) in &self.per_cap[alpha] {
            let (flat, w) = self.entries[e as usize];
            out[flat] = spec[flat] * (w * v);
        }
    }
}

fn check_resolved(f: &PeriodicField, delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(LabError::range("delta", delta, "(0, 1)"));
    }
    if 1.0 / f.side > delta / 8.0 * (1.0 + 1e-12) {
        return Err(LabError::InvalidArgument(format!(
            "unresolved shell: 1/P = {} > delta/8 = {}",
            1.0 / f.side,
            delta / 8.0
        )));
    }
    if (f.m / 2) as f64 / f.side <= 1.0 + delta {
        return Err(LabError::InvalidArgument(format!(
            "unresolved shell: Nyquist {} <= 1 + delta",
            (f.m / 2) as f64 / f.side
        )));
    }
    Ok(())
}

pub fn apply_sdelta(f: &PeriodicField, delta: f64, profile: ShellProfile) -> Result<PeriodicField> {
    check_resolved(f, delta)?;
    let mut spec = f.spectrum();
    for (flat, s) in spec.iter_mut().enumerate() {
        let xi = f.frequency(flat);
        *s *= profile.multiplier((xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt(), delta);
    }
    let mut out = f.clone();
    out.set_from_spectrum(spec);
    Ok(out)
}

/// `S_alpha f` for cap `alpha` of `caps`.
pub fn apply_cap_multiplier(
    f: &PeriodicField,
    caps: &CapSystem,
    alpha: usize,
    delta: f64,
    profile: ShellProfile,
) -> Result<PeriodicField> {
    check_resolved(f, delta)?;
    if alpha >= caps.len() || caps.n != f.n {
        return Err(LabError::InvalidArgument(format!("cap {alpha} of {} in n={}", caps.len(), caps.n)));
    }
    let mut spec = f.spectrum();
    let mut bumps = Vec::new();
    for (flat, s) in spec.iter_mut().enumerate() {
        let xi = f.frequency(flat);
        let r = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
        let w = profile.multiplier(r, delta);
        if w == 0.0 {
            *s = Complex64::new(0.0, 0.0);
            continue;
        }
        caps.bumps_at(&[xi[0] / r, xi[1] / r, xi[2] / r], &mut bumps);
        let v = bumps.iter().find(|b| b.0 as usize == alpha).map_or(0.0, |b| b.1);
        *s *= w * v;
    }
    let mut out = f.clone();
    out.set_from_spectrum(spec);
    Ok(out)
}

/// `r` paired with `q`: 2 up to `2n/(n-1)`, then the dual of `q(n-1)/n`.
pub fn default_r(n: usize, q: f64) -> f64 {
    let crit = 2.0 * n as f64 / (n as f64 - 1.0);
    if q <= crit {
        2.0
    } else if q.is_infinite() {
        1.0
    } else {
        let rp = q * (n as f64 - 1.0) / n as f64;
        rp / (rp - 1.0)
    }
}

/// `(||S^delta f||_q, ||(sum_alpha |S_alpha f|^r)^{1/r}||_q)`.
pub fn piece_norms(pieces: &ShellPieces, f: &PeriodicField, q: f64, r: f64, radius: Option<f64>) -> (f64, f64) {
    let spec = f.spectrum();
    let mut work = f.clone();
    work.set_from_spectrum(pieces.sdelta_spectrum(&spec));
    let lhs = work.lq_norm(q, radius);
    let mut acc = vec![0.0f64; f.len()];
    let mut buf = Vec::new();
    for alpha in 0..pieces.caps.len() {
        if pieces.per_cap[alpha].is_empty() {
            continue;
        }
        pieces.cap_spectrum(&spec, alpha, &mut buf);
        work.set_from_spectrum(std::mem::take(&mut buf));
        for (a, v) in acc.iter_mut().zip(&work.values) {
            *a += if r == 2.0 { v.norm_sqr() } else { v.norm().powf(r) };
        }
        buf = std::mem::take(&mut work.values);
    }
    for a in &mut acc {
        *a = a.powf(1.0 / r);
    }
    (lhs, lq_of(f, &acc, q, radius))
}

fn report(op: &str, f: &PeriodicField, delta: f64, q: f64, r: f64, lhs: f64, rhs: f64, local: bool, t: Instant) -> Result<RatioReport> {
    if !(rhs > 0.0) {
        return Err(LabError::Degenerate(format!("{op}: rhs = {rhs}")));
    }
    Ok(RatioReport {
        module: "shell_multiplier".into(),
        op: op.into(),
        n: f.n,
        delta: Some(delta),
        big_r: None,
        q,
        r: Some(r),
        seed: f.seed,
        lhs,
        rhs,
        ratio: lhs / rhs,
        stderr: 0.0,
        runtime_s: t.elapsed().as_secs_f64(),
        method: "fft".into(),
        norm: if local { "local_ball" } else { "full_grid" }.into(),
        converged: true,
    })
}

/// `||S^delta f||_q / ||(sum |S_alpha f|^2)^{1/2}||_q`; `local` restricts both to `|x| <= 1/delta`.
pub fn rlp_multiplier_ratio(f: &PeriodicField, delta: f64, q: f64, local: bool) -> Result<RatioReport> {
    let t = Instant::now();
    if !(q >= 2.0) {
        return Err(LabError::range("q", q, "[2, inf]"));
    }
    let radius = local_radius(f, delta, local)?;
    let pieces = ShellPieces::new(f, delta, ShellProfile::default())?;
    let (lhs, rhs) = piece_norms(&pieces, f, q, 2.0, radius);
    report(if local { "rlp_local" } else { "rlp" }, f, delta, q, 2.0, lhs, rhs, local, t)
}

fn local_radius(f: &PeriodicField, delta: f64, local: bool) -> Result<Option<f64>> {
    if !local {
        return Ok(None);
    }
    if f.side < 4.0 / delta * (1.0 - 1e-12) {
        return Err(LabError::InvalidArgument(format!(
            "local norm needs P >= 4/delta, got P = {}",
            f.side
        )));
    }
    Ok(Some(1.0 / delta))
}

/// Ratio with the `l^r` sum inside the `L^q` norm; `r` defaults to [`default_r`].
pub fn decoupling_ratio(f: &PeriodicField, delta: f64, q: f64, r: Option<f64>) -> Result<RatioReport> {
    let t = Instant::now();
    if !(q >= 2.0) {
        return Err(LabError::range("q", q, "[2, inf]"));
    }
    let r = r.unwrap_or_else(|| default_r(f.n, q));
    if !(r >= 1.0) || r.is_infinite() {
        return Err(LabError::range("r", r, "[1, inf)"));
    }
    let pieces = ShellPieces::new(f, delta, ShellProfile::default())?;
    let (lhs, rhs) = piece_norms(&pieces, f, q, r, None);
    report("decoupling", f, delta, q, r, lhs, rhs, false, t)
}

/// Kernel of `S^delta` on the torus (scaled to approximate the kernel on `R^n`)
/// and the fraction of its `L^1` mass outside `|x| <= k / delta`.
pub fn kernel_tail_fraction(n: usize, delta: f64, side_factor: f64, k: f64) -> Result<f64> {
    let mut f = PeriodicField::for_shell(n, delta, side_factor)?;
    if k / delta > f.side / 2.0 {
        return Err(LabError::InvalidArgument(format!(
            "radius {} exceeds the half side {}",
            k / delta,
            f.side / 2.0
        )));
    }
    let profile = ShellProfile::default();
    let mut spec = vec![Complex64::new(0.0, 0.0); f.len()];
    for (flat, s) in spec.iter_mut().enumerate() {
        let xi = f.frequency(flat);
        *s = Complex64::new(profile.multiplier((xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt(), delta), 0.0);
    }
    f.set_from_spectrum(spec);
    let (mut total, mut tail) = (0.0, 0.0);
    let r2 = (k / delta).powi(2);
    for (flat, v) in f.values.iter().enumerate() {
        let x = f.position(flat);
        let a = v.norm();
        total += a;
        if x[0] * x[0] + x[1] * x[1] + x[2] * x[2] > r2 {
            tail += a;
        }
    }
    Ok(tail / total)
}

#[cfg(test)]
mod tests;
