//! Per-cap extension tables in the cap's tangent frame.
//!
//! For a cap with centre `c` and tangent basis `e`, put
//! `xi(u) = sqrt(1 - |u|^2) c + sum u_i e_i`. Then
//! `F_a(y) = e^{-2 pi i y_n} E(y_t, y_n)` with
//! `E = int a(u) e^{-2 pi i y_n (sqrt(1-|u|^2) - 1)} e^{-2 pi i y_t . u} du`
//! and `a = phi_a(xi(u)) / sqrt(1 - |u|^2)`. For each sampled `y_n` the map
//! `y_t -> E` is one FFT; values in between come from Lagrange interpolation.
//! `E` is negligible outside the cone `|y_t| <= slope |y_n| + W`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::density::{phase, Density};
use super::direct::PieceSums;
use super::nufft::{fft_nd, smooth_size};
use crate::error::{LabError, Result};
use crate::geom::{dot, sub, tangent_basis, Point};
use crate::sphere_caps::CapSystem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapFrameParams {
    /// Oversampling of the tangential table relative to its Nyquist rate.
    pub oversample: f64,
    /// Oversampling along the normal direction.
    pub oversample_normal: f64,
    /// Lagrange stencil length (even).
    pub stencil: usize,
    /// Decay margin `W` in units of `1 / sin(support)`.
    pub margin: f64,
    /// Certification tolerance relative to the cap mass.
    pub tolerance: f64,
    /// Reference checks per cap.
    pub checks_per_cap: usize,
}

impl Default for CapFrameParams {
    fn default() -> Self {
        CapFrameParams {
            oversample: 4.0,
            oversample_normal: 6.0,
            stencil: 12,
            margin: 16.0,
            tolerance: 1e-6,
            checks_per_cap: 2,
        }
    }
}

impl CapFrameParams {
    /// About 5e-5 of the cap mass; enough for norms sampled to 2%.
    pub fn fast() -> Self {
        CapFrameParams {
            stencil: 8,
            margin: 8.0,
            tolerance: 1e-4,
            ..CapFrameParams::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct CapTable {
    d: usize,
    center: Point,
    basis: Vec<Point>,
    slope: f64,
    margin: f64,
    n: usize,
    du: f64,
    dx: f64,
    z0: f64,
    dz: f64,
    nz: usize,
    band: f64,
    stencil: usize,
    /// Nonzero amplitude samples: (flat u index, u, a(u)).
    amp: Vec<(usize, Point, f64)>,
    data: Vec<Complex64>,
    pub mass: f64,
}

fn lagrange(x: f64, p: usize, w: &mut [f64]) {
    for i in 0..p {
        let mut v = 1.0;
        for m in 0..p {
            if m != i {
                v *= (x - m as f64) / (i as f64 - m as f64);
            }
        }
        w[i] = v;
    }
}

/// Stencil start and weights for position `pos` on a grid of `len` points.
fn stencil_at(pos: f64, len: usize, p: usize, w: &mut [f64]) -> usize {
    let start = (pos.floor() as i64 - (p as i64 / 2 - 1)).clamp(0, (len - p) as i64) as usize;
    lagrange(pos - start as f64, p, w);
    start
}

impl CapTable {
    /// Table for cap `alpha` valid for `y . c` in `[n_lo, n_hi]`.
    pub fn build(sys: &CapSystem, alpha: usize, n_lo: f64, n_hi: f64, params: &CapFrameParams) -> Result<CapTable> {
        let cap = &sys.caps[alpha];
        if cap.support >= 1.3 {
            return Err(LabError::range("cap support for tangent frame", cap.support, "< 1.3"));
        }
        let d = sys.n - 1;
        let s_u = cap.support.sin();
        let slope = s_u / (1.0 - s_u * s_u).sqrt();
        let margin = params.margin / s_u;
        let p = params.stencil;
        let u_box = params.oversample * 2.0 * s_u;
        let dx = 1.0 / u_box;
        let y_max = n_lo.abs().max(n_hi.abs());
        let reach = slope * y_max + margin + (p as f64 / 2.0 + 1.0) * dx;
        let n = smooth_size((2.0 * reach * u_box).ceil() as usize);
        let du = u_box / n as f64;
        let band = 1.0 - (1.0 - s_u * s_u).sqrt();
        let dz = 1.0 / (params.oversample_normal * band);
        let z0 = n_lo - (p as f64 / 2.0) * dz;
        let nz = ((n_hi - n_lo) / dz).ceil() as usize + p + 1;

        let center = cap.center;
        let basis = tangent_basis(sys.n, &center);
        let mut amp = Vec::new();
        let mut buf = Vec::new();
        let half = (n / 2) as i64;
        let r = (s_u / du).ceil() as i64 + 1;
        let mut mass = 0.0;
        let mut visit = |m: &[i64]| {
            let mut u = [0.0; 3];
            let mut flat = 0usize;
            for i in 0..d {
                u[i] = m[i] as f64 * du;
                flat = flat * n + (m[i] + half) as usize;
            }
            let u2 = dot(&u, &u);
            if u2 >= s_u * s_u {
                return;
            }
            let root = (1.0 - u2).sqrt();
            let mut xi = [0.0; 3];
            for k in 0..3 {
                xi[k] = root * center[k] + (0..d).map(|i| u[i] * basis[i][k]).sum::<f64>();
            }
            sys.bumps_at(&xi, &mut buf);
            if let Some(e) = buf.iter().find(|e| e.0 as usize == alpha) {
                let a = e.1 / root;
                mass += a;
                amp.push((flat, u, a));
            }
        };
        if d == 1 {
            for i in -r..=r {
                visit(&[i]);
            }
        } else {
            for i in -r..=r {
                for j in -r..=r {
                    visit(&[i, j]);
                }
            }
        }
        let dud = du.powi(d as i32);
        let mut table = CapTable {
            d,
            center,
            basis,
            slope,
            margin,
            n,
            du,
            dx,
            z0,
            dz,
            nz,
            band,
            stencil: p,
            amp,
            data: Vec::new(),
            mass: mass * dud,
        };
        table.fill();
        Ok(table)
    }

    fn fill(&mut self) {
        let (d, n) = (self.d, self.n);
        let plane = n.pow(d as u32);
        let mut data = vec![Complex64::new(0.0, 0.0); plane * self.nz];
        let dud = self.du.powi(d as i32);
        let sign_of = |flat: usize| -> f64 {
            let mut s = 0usize;
            let mut r = flat;
            for _ in 0..d {
                s += r % n;
                r /= n;
            }
            if s % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        };
        let post = if (d * n / 2) % 2 == 0 { dud } else { -dud };
        for k in 0..self.nz {
            let z = self.z0 + k as f64 * self.dz;
            let slab = &mut data[k * plane..(k + 1) * plane];
            for &(flat, u, a) in &self.amp {
                let root = (1.0 - dot(&u, &u)).sqrt();
                slab[flat] = a * sign_of(flat) * phase(-z * (root - 1.0));
            }
            fft_nd(slab, n, d, false);
            let demod = phase(-0.5 * z * self.band);
            for (j, v) in slab.iter_mut().enumerate() {
                *v *= demod * (post * sign_of(j));
            }
        }
        self.data = data;
    }

    pub fn frame(&self, y: &Point) -> (f64, [f64; 2]) {
        let mut t = [0.0; 2];
        for i in 0..self.d {
            t[i] = dot(y, &self.basis[i]);
        }
        (dot(y, &self.center), t)
    }

    /// `F_a(y)`; zero outside the cone where the table is negligible.
    pub fn eval(&self, y: &Point) -> Complex64 {
        let (yn, yt) = self.frame(y);
        let rt = (yt[0] * yt[0] + yt[1] * yt[1]).sqrt();
        if rt > self.slope * yn.abs() + self.margin {
            return Complex64::new(0.0, 0.0);
        }
        let p = self.stencil;
        let mut wz = [0.0; 16];
        let mut w0 = [0.0; 16];
        let mut w1 = [0.0; 16];
        let kz = stencil_at((yn - self.z0) / self.dz, self.nz, p, &mut wz);
        let half = (self.n / 2) as f64;
        let j0 = stencil_at(yt[0] / self.dx + half, self.n, p, &mut w0);
        let plane = self.n.pow(self.d as u32);
        let mut acc = Complex64::new(0.0, 0.0);
        if self.d == 1 {
            for a in 0..p {
                let slab = &self.data[(kz + a) * plane..];
                let mut s = Complex64::new(0.0, 0.0);
                for b in 0..p {
                    s += slab[j0 + b] * w0[b];
                }
                acc += s * wz[a];
            }
        } else {
            let j1 = stencil_at(yt[1] / self.dx + half, self.n, p, &mut w1);
            for a in 0..p {
                let slab = &self.data[(kz + a) * plane..];
                let mut s = Complex64::new(0.0, 0.0);
                for b in 0..p {
                    let row = &slab[(j0 + b) * self.n + j1..];
                    let mut r = Complex64::new(0.0, 0.0);
                    for c in 0..p {
                        r += row[c] * w1[c];
                    }
                    s += r * w0[b];
                }
                acc += s * wz[a];
            }
        }
        acc * phase(0.5 * yn * self.band) * phase(-yn)
    }

    /// Reference value by a direct sum over a `refine`-times finer u-grid.
    pub fn reference(&self, sys: &CapSystem, alpha: usize, y: &Point, refine: usize) -> Complex64 {
        let du = self.du / refine as f64;
        let s_u = sys.caps[alpha].support.sin();
        let r = (s_u / du).ceil() as i64 + 1;
        let (yn, yt) = self.frame(y);
        let mut buf = Vec::new();
        let mut acc = Complex64::new(0.0, 0.0);
        let mut visit = |u: [f64; 3]| {
            let u2 = dot(&u, &u);
            if u2 >= s_u * s_u {
                return;
            }
            let root = (1.0 - u2).sqrt();
            let mut xi = [0.0; 3];
            for k in 0..3 {
                xi[k] = root * self.center[k] + (0..self.d).map(|i| u[i] * self.basis[i][k]).sum::<f64>();
            }
            sys.bumps_at(&xi, &mut buf);
            if let Some(e) = buf.iter().find(|e| e.0 as usize == alpha) {
                let t = yn * root + yt[0] * u[0] + yt[1] * u[1];
                acc += (e.1 / root) * phase(-t);
            }
        };
        if self.d == 1 {
            for i in -r..=r {
                visit([i as f64 * du, 0.0, 0.0]);
            }
        } else {
            for i in -r..=r {
                for j in -r..=r {
                    visit([i as f64 * du, j as f64 * du, 0.0]);
                }
            }
        }
        acc * du.powi(self.d as i32)
    }

    pub fn describe(&self) -> String {
        format!(
            "n={} nz={} du={:.3e} dx={:.3} dz={:.2} amp={} slope={:.3} margin={:.1}",
            self.n,
            self.nz,
            self.du,
            self.dx,
            self.dz,
            self.amp.len(),
            self.slope,
            self.margin
        )
    }

    pub fn table_bytes(&self) -> usize {
        self.data.len() * 16
    }
}

/// Largest reference discrepancy observed, relative to cap mass.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CapFrameCheck {
    pub checks: usize,
    pub max_rel_error: f64,
}

/// Per-cap sums at `points` for several densities on the same caps.
/// Modulated pieces are handled by translation: the extension of
/// `e^{2 pi i l.xi} phi_a` at `x` is `F_a(x - l)`.
pub fn capframe_sums(
    densities: &[&Density],
    points: &[Point],
    params: &CapFrameParams,
    seed: u64,
) -> Result<(Vec<PieceSums>, CapFrameCheck)> {
    let Some(first) = densities.first() else {
        return Ok((Vec::new(), CapFrameCheck::default()));
    };
    let sys = first.caps;
    if densities.iter().any(|d| !std::ptr::eq(d.caps, sys)) {
        return Err(LabError::Mismatch("densities on different cap systems".into()));
    }
    let mut out: Vec<PieceSums> = densities.iter().map(|_| PieceSums::zeros(points.len())).collect();
    let mut check = CapFrameCheck::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xcafe_f00d);
    for alpha in 0..sys.len() {
        let users: Vec<usize> = (0..densities.len())
            .filter(|&k| densities[k].coefficients[alpha] > 0.0)
            .collect();
        if users.is_empty() {
            continue;
        }
        let c = sys.caps[alpha].center;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &k in &users {
            let l = densities[k].modulations[alpha];
            for x in points {
                let v = dot(&sub(x, &l), &c);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        let mut attempt = *params;
        let table = loop {
            let table = CapTable::build(sys, alpha, lo, hi, &attempt)?;
            let mut worst = 0.0f64;
            for _ in 0..params.checks_per_cap {
                let k = users[rng.gen_range(0..users.len())];
                let x = points[rng.gen_range(0..points.len())];
                let y = sub(&x, &densities[k].modulations[alpha]);
                let err = (table.eval(&y) - table.reference(sys, alpha, &y, 2)).norm();
                worst = worst.max(err / table.mass);
            }
            check.checks += params.checks_per_cap;
            if worst <= params.tolerance {
                check.max_rel_error = check.max_rel_error.max(worst);
                break table;
            }
            if attempt.margin > 4.0 * params.margin {
                return Err(LabError::Uncertified {
                    what: "cap-frame table",
                    detail: format!("cap {alpha}: relative error {worst:.3e} > {:.1e}", params.tolerance),
                });
            }
            attempt.margin *= 1.5;
            attempt.stencil = (attempt.stencil + 2).min(16);
            attempt.oversample *= 1.25;
        };
        // Densities sharing a modulation share the table lookups.
        let mut groups: Vec<(Point, Vec<usize>)> = Vec::new();
        for &k in &users {
            let l = densities[k].modulations[alpha];
            match groups.iter_mut().find(|(m, _)| *m == l) {
                Some((_, ks)) => ks.push(k),
                None => groups.push((l, vec![k])),
            }
        }
        for (l, ks) in &groups {
            let amps: Vec<f64> = ks.iter().map(|&k| densities[k].amplitude(alpha)).collect();
            for (i, x) in points.iter().enumerate() {
                let v = table.eval(&sub(x, l));
                if v.re == 0.0 && v.im == 0.0 {
                    continue;
                }
                let sq = v.norm_sqr();
                for (&k, &a) in ks.iter().zip(&amps) {
                    let o = &mut out[k];
                    o.total[i] += v * a;
                    o.square[i] += sq * a * a;
                }
            }
        }
    }
    Ok((out, check))
}
