use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use super::{random_unit, sphere_measure, CapSystem};
use crate::error::Result;
use crate::geom::{angle_between, norm, rotate_2d, Point};

/// One measured invariant: `value` must not exceed `limit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: &str, value: f64, limit: f64) -> Check {
        Check {
            name: name.into(),
            value,
            limit,
            pass: value <= limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapAudit {
    pub n: usize,
    pub scale: f64,
    pub caps: usize,
    pub checks: Vec<Check>,
}

impl CapAudit {
    pub fn passes(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

/// `Gamma(k / 2)` for a positive integer `k`.
fn gamma_half(k: u32) -> f64 {
    let (mut v, mut t) = if k % 2 == 0 { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
    while t < k as f64 / 2.0 - 0.25 {
        v *= t;
        t += 1.0;
    }
    v
}

/// `int_{S^2} x^a y^b z^c dsigma`.
fn sphere_moment(a: u32, b: u32, c: u32) -> f64 {
    if a % 2 == 1 || b % 2 == 1 || c % 2 == 1 {
        return 0.0;
    }
    2.0 * gamma_half(a + 1) * gamma_half(b + 1) * gamma_half(c + 1) / gamma_half(a + b + c + 3)
}

/// Largest error over low-degree test integrands, relative to the sphere measure.
fn exactness_error(sys: &CapSystem, degree: u32) -> f64 {
    let mass = sphere_measure(sys.n);
    let mut worst: f64 = 0.0;
    if sys.n == 2 {
        for k in 1..=degree {
            let k = k as f64;
            worst = worst.max(sys.integrate(|p| (k * p[1].atan2(p[0])).cos()).abs());
            worst = worst.max(sys.integrate(|p| (k * p[1].atan2(p[0])).sin()).abs());
        }
        // int_0^{2 pi} cos^8 = 2 pi 35/128
        let v = sys.integrate(|p| p[0].powi(8));
        worst = worst.max((v - TAU * 35.0 / 128.0).abs());
    } else {
        for a in 0..=degree {
            for b in 0..=degree - a {
                for c in 0..=degree - a - b {
                    let v = sys.integrate(|p| p[0].powi(a as i32) * p[1].powi(b as i32) * p[2].powi(c as i32));
                    worst = worst.max((v - sphere_moment(a, b, c)).abs());
                }
            }
        }
    }
    worst / mass
}

/// Measures every structural invariant of `sys` with `samples` random points,
/// including a refinement to half the scale and the oscillatory quadrature
/// self-check at bandwidth `1 / scale`.
pub fn audit(sys: &CapSystem, samples: usize, seed: u64) -> Result<CapAudit> {
    let n = sys.n;
    let s = sys.scale;
    let mass = sphere_measure(n);
    let mut checks = Vec::new();

    let target = if n == 2 { (TAU / s).ceil() } else { (4.0 * PI / (s * s)).ceil() };
    let ratio = sys.len() as f64 / target;
    checks.push(Check::at_most("count factor", ratio.max(1.0 / ratio), 2.0));

    let center_err = sys.caps.iter().map(|c| (norm(&c.center) - 1.0).abs()).fold(0.0, f64::max);
    checks.push(Check::at_most("center norm", center_err, 1e-12));
    let bad_scale = sys
        .caps
        .iter()
        .filter(|c| !(c.angular_scale > 0.0 && c.angular_scale <= PI))
        .count();
    checks.push(Check::at_most("scale range violations", bad_scale as f64, 0.0));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = Vec::new();
    let mut pou: f64 = 0.0;
    let mut escape: f64 = 0.0;
    for _ in 0..samples {
        let p: Point = random_unit(n, &mut rng);
        sys.bumps_at(&p, &mut buf);
        pou = pou.max((buf.iter().map(|e| e.1).sum::<f64>() - 1.0).abs());
        for &(a, _) in &buf {
            let cap = &sys.caps[a as usize];
            escape = escape.max(angle_between(&p, &cap.center) / (2.0 * cap.radius));
        }
    }
    let declared = sys.caps.iter().map(|c| c.support / (2.0 * c.radius)).fold(0.0, f64::max);
    checks.push(Check::at_most("partition of unity", pou, 1e-8));
    checks.push(Check::at_most("support / dilate", escape.max(declared), 1.0));

    let w = &sys.quadrature.weights;
    let weight_err = (w.iter().sum::<f64>() - mass).abs();
    checks.push(Check::at_most("weight sum", weight_err, 1e-9));
    let nonpositive = w.iter().filter(|&&w| !(w > 0.0)).count();
    checks.push(Check::at_most("nonpositive weights", nonpositive as f64, 0.0));
    let bumps: f64 = (0..sys.len()).map(|a| sys.bump_mass(a)).sum();
    checks.push(Check::at_most("bump mass", (bumps - mass).abs(), 1e-8));
    checks.push(Check::at_most("degree 8 exactness", exactness_error(sys, 8), 1e-8));

    let fine = sys.refine(s / 2.0)?;
    let map = fine.parent_map.as_deref().unwrap_or(&[]);
    let mut wrong = (fine.len() - map.len()) as f64;
    let mut reach: f64 = 0.0;
    for (b, cap) in fine.caps.iter().enumerate().take(map.len()) {
        let parent = &sys.caps[map[b]];
        if !parent.cell.contains(&cap.center) || sys.cell_of(&cap.center) != map[b] {
            wrong += 1.0;
        }
        reach = reach.max((angle_between(&cap.center, &parent.center) + cap.radius) / (2.0 * parent.radius));
    }
    checks.push(Check::at_most("parent map errors", wrong, 0.0));
    checks.push(Check::at_most("child / parent dilate", reach, 1.0));
    let expect = 2f64.powi(n as i32 - 1);
    let kids = fine.children().unwrap_or_default();
    let spread = kids
        .iter()
        .map(|k| {
            let r = k.len() as f64 / expect;
            r.max(1.0 / r)
        })
        .fold(1.0, f64::max);
    checks.push(Check::at_most("children factor", spread, 4.0));
    let fine_mass: f64 = (0..fine.len()).map(|b| fine.bump_mass(b)).sum();
    checks.push(Check::at_most("refined mass", (fine_mass - mass).abs(), 1e-8));

    let mut wide = sys.clone();
    let freq = 1.0 / s;
    let certified = wide.set_bandwidth(freq, super::mem_budget()).is_ok();
    checks.push(Check::at_most("oscillatory self-check failures", if certified { 0.0 } else { 1.0 }, 0.0));
    if certified {
        checks.push(Check::at_most(
            "node spacing x 8 f",
            wide.quadrature.spacing * 8.0 * freq,
            1.0 + 1e-12,
        ));
    }

    if n == 2 {
        let theta = 0.377;
        let rot = sys.rotated(theta)?;
        let f = |p: &Point| (3.0 * p[0] + p[1]).exp() * (1.0 + p[1] * p[1]);
        let a = sys.integrate(f);
        let b = rot.integrate(|p| f(&rotate_2d(p, -theta)));
        checks.push(Check::at_most("rotation equivariance", (a - b).abs() / a.abs(), 1e-10));
    }

    Ok(CapAudit {
        n,
        scale: s,
        caps: sys.len(),
        checks,
    })
}
