use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::error::{LabError, Result};
use crate::extension_field::RatioReport;

use super::raster::BoxGrid;
use super::{Tube, TubeFamily};

/// Largest family the pairwise exact evaluation accepts.
pub const EXACT_MAX_TUBES: usize = 4096;

const MC_TARGET: f64 = 0.02;
const MC_MAX_PER_STRATUM: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DualMethod {
    /// Grid when it fits the memory budget, Monte Carlo otherwise.
    Auto,
    Grid,
    MonteCarlo { seed: u64 },
    /// Pairwise overlap areas; `n = 2`, `r` in {1, 2}.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualNorm {
    pub value: f64,
    pub stderr: f64,
    /// "grid", "monte_carlo" or "exact".
    pub method: String,
    pub samples: usize,
}

/// `c^r` with the common exponents done without `powf`.
fn pow_r(c: f64, r: f64) -> f64 {
    if r == 1.0 {
        c
    } else if r == 2.0 {
        c * c
    } else if r == 1.5 {
        c * c.sqrt()
    } else if r == 3.0 {
        c * c * c
    } else {
        c.powf(r)
    }
}

/// `|| sum_alpha c_alpha chi_{T_alpha} ||_r`.
pub fn dual_norm(family: &TubeFamily, r: f64, method: DualMethod) -> Result<DualNorm> {
    if !(r >= 1.0) || r.is_infinite() {
        return Err(LabError::range("r", r, "[1, inf)"));
    }
    match method {
        DualMethod::Grid => grid_norm(family, r),
        DualMethod::MonteCarlo { seed } => monte_carlo_norm(family, r, seed),
        DualMethod::Exact => exact_norm(family, r),
        DualMethod::Auto => match grid_norm(family, r) {
            Err(e) if e.is_budget() => monte_carlo_norm(family, r, 0),
            other => other,
        },
    }
}

fn grid_norm(family: &TubeFamily, r: f64) -> Result<DualNorm> {
    let grid = BoxGrid::around(family.n(), family.bounding_radius() + family.width, family.width / 8.0)?;
    let mut acc = vec![0.0f64; grid.len()];
    for (t, &c) in family.tubes.iter().zip(&family.coefficients) {
        if c == 0.0 {
            continue;
        }
        grid.raster(t, 0.0, |base, stride, k| {
            for i in 0..k {
                acc[base + i * stride] += c;
            }
        });
    }
    let s: f64 = acc.iter().filter(|v| **v > 0.0).map(|&v| pow_r(v, r)).sum();
    Ok(DualNorm {
        value: (s * grid.cell_volume()).powf(1.0 / r),
        stderr: 0.0,
        method: "grid".into(),
        samples: grid.len(),
    })
}

fn monte_carlo_norm(family: &TubeFamily, r: f64, seed: u64) -> Result<DualNorm> {
    let n = family.n();
    let per_axis = if n == 2 { 64 } else { 16 };
    let radius = family.bounding_radius() + family.width;
    let strata = BoxGrid::around(n, radius, 2.0 * radius / per_axis as f64)?;
    let big_h = strata.h;
    let reach = big_h * (n as f64).sqrt() / 2.0;
    let mut candidates: Vec<Vec<u32>> = vec![Vec::new(); strata.len()];
    for (a, t) in family.tubes.iter().enumerate() {
        if family.coefficients[a] == 0.0 {
            continue;
        }
        strata.raster(t, reach, |base, stride, k| {
            for i in 0..k {
                candidates[base + i * stride].push(a as u32);
            }
        });
    }
    let vol = strata.cell_volume();
    let mut sum = vec![0.0f64; strata.len()];
    let mut sum2 = vec![0.0f64; strata.len()];
    let mut k = 0usize;
    let mut target = 4usize;
    loop {
        for (s, cands) in candidates.iter().enumerate() {
            if cands.is_empty() {
                continue;
            }
            let lo = strata.center(s);
            for g in k..target {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream((s as u64) << 20 | g as u64);
                let mut x = [0.0; 3];
                for a in 0..n {
                    x[a] = lo[a] + (rng.gen::<f64>() - 0.5) * big_h;
                }
                let v: f64 = cands
                    .iter()
                    .filter(|&&a| family.tubes[a as usize].contains(&x))
                    .map(|&a| family.coefficients[a as usize])
                    .sum();
                let p = pow_r(v, r);
                sum[s] += p;
                sum2[s] += p * p;
            }
        }
        k = target;
        let kf = k as f64;
        let integral: f64 = sum.iter().map(|s| vol * s / kf).sum();
        let var: f64 = sum
            .iter()
            .zip(&sum2)
            .map(|(s, s2)| {
                let m = s / kf;
                let sv = ((s2 / kf - m * m) * kf / (kf - 1.0)).max(0.0);
                vol * vol * sv / kf
            })
            .sum();
        let value = integral.powf(1.0 / r);
        let stderr = if integral > 0.0 { value * var.sqrt() / (r * integral) } else { 0.0 };
        if stderr <= MC_TARGET * value || target * 2 > MC_MAX_PER_STRATUM {
            let samples = candidates.iter().filter(|c| !c.is_empty()).count() * k;
            if stderr > MC_TARGET * value {
                return Err(LabError::Uncertified {
                    what: "monte carlo dual norm",
                    detail: format!("relative stderr {} after {samples} samples", stderr / value),
                });
            }
            return Ok(DualNorm {
                value,
                stderr,
                method: "monte_carlo".into(),
                samples,
            });
        }
        target *= 2;
    }
}

type P2 = [f64; 2];

/// Clips convex `subject` by each edge of convex counter-clockwise `clip`.
fn clip_convex(subject: &[P2], clip: &[P2]) -> Vec<P2> {
    let mut out = subject.to_vec();
    for i in 0..clip.len() {
        let (a, b) = (clip[i], clip[(i + 1) % clip.len()]);
        let side = |p: P2| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        let input = std::mem::take(&mut out);
        for j in 0..input.len() {
            let (p, q) = (input[j], input[(j + 1) % input.len()]);
            let (sp, sq) = (side(p), side(q));
            if sp >= 0.0 {
                out.push(p);
            }
            if (sp >= 0.0) != (sq >= 0.0) {
                let t = sp / (sp - sq);
                out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
            }
        }
        if out.is_empty() {
            break;
        }
    }
    out
}

fn area(p: &[P2]) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        let (u, v) = (p[i], p[(i + 1) % p.len()]);
        s += u[0] * v[1] - u[1] * v[0];
    }
    0.5 * s.abs()
}

/// Area of `T_a` meet `T_b` for planar tubes.
pub(crate) fn overlap_area(a: &Tube, b: &Tube) -> f64 {
    let d = ((a.center[0] - b.center[0]).powi(2) + (a.center[1] - b.center[1]).powi(2)).sqrt();
    if d > (a.length + a.width + b.length + b.width) / 2.0 {
        return 0.0;
    }
    area(&clip_convex(&a.polygon(), &b.polygon()))
}

fn exact_norm(family: &TubeFamily, r: f64) -> Result<DualNorm> {
    if family.n() != 2 || !(r == 1.0 || r == 2.0) {
        return Err(LabError::InvalidArgument(format!(
            "exact dual norm needs n = 2 and r in {{1, 2}}, got n = {}, r = {r}",
            family.n()
        )));
    }
    if family.len() > EXACT_MAX_TUBES {
        return Err(LabError::InvalidArgument(format!("exact dual norm on {} tubes", family.len())));
    }
    let c = &family.coefficients;
    let value = if r == 1.0 {
        family.tubes.iter().zip(c).map(|(t, c)| c * t.volume()).sum()
    } else {
        let mut s = 0.0;
        for a in 0..family.len() {
            if c[a] == 0.0 {
                continue;
            }
            s += c[a] * c[a] * family.tubes[a].volume();
            for b in a + 1..family.len() {
                if c[b] != 0.0 {
                    s += 2.0 * c[a] * c[b] * overlap_area(&family.tubes[a], &family.tubes[b]);
                }
            }
        }
        s.sqrt()
    };
    Ok(DualNorm {
        value,
        stderr: 0.0,
        method: "exact".into(),
        samples: family.len(),
    })
}

fn report(op: &str, family: &TubeFamily, r: f64, d: &DualNorm, rhs: f64, seed: Option<u64>, t: Instant) -> Result<RatioReport> {
    if !(rhs > 0.0) {
        return Err(LabError::Degenerate(format!("{op}: rhs = {rhs}")));
    }
    Ok(RatioReport {
        module: "kakeya_tubes".into(),
        op: op.into(),
        n: family.n(),
        delta: None,
        big_r: Some(family.big_n),
        q: r,
        r: Some(r),
        seed,
        lhs: d.value,
        rhs,
        ratio: d.value / rhs,
        stderr: d.stderr / rhs,
        runtime_s: t.elapsed().as_secs_f64(),
        method: d.method.clone(),
        norm: d.method.clone(),
        converged: true,
    })
}

fn seed_of(method: DualMethod) -> Option<u64> {
    match method {
        DualMethod::MonteCarlo { seed } => Some(seed),
        _ => None,
    }
}

/// `dual_norm / (N^{1/r} lambda^{n/r} (sum c^r)^{1/r})`.
pub fn cov_ratio(family: &TubeFamily, r: f64, method: DualMethod) -> Result<RatioReport> {
    let t = Instant::now();
    let d = dual_norm(family, r, method)?;
    let n = family.n() as f64;
    let sc: f64 = family.coefficients.iter().map(|&c| pow_r(c, r)).sum();
    let rhs = (family.big_n * family.width.powf(n) * sc).powf(1.0 / r);
    report("cov_ratio", family, r, &d, rhs, seed_of(method), t)
}

/// Dual norm at `r = n/(n-1)` against `(log N)^{1/r} N^{1/r} (sum c^r)^{1/r}`.
pub fn bush_bound_check(family: &TubeFamily, method: DualMethod) -> Result<RatioReport> {
    let t = Instant::now();
    let n = family.n() as f64;
    let r = n / (n - 1.0);
    let d = dual_norm(family, r, method)?;
    let sc: f64 = family.coefficients.iter().map(|&c| pow_r(c, r)).sum();
    let rhs = (family.big_n.ln() * family.big_n * sc).powf(1.0 / r);
    report("bush_bound_check", family, r, &d, rhs, seed_of(method), t)
}
