//! Local averages `A_t u` on the sphere and the dt/t integral built from them.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{LabError, Result};
use crate::geom::{angle_between, chord, tangent_basis, Point, SpatialHash};
use crate::sphere_caps::quadrature::{for_bandwidth, gauss_legendre};
use crate::sphere_caps::{mem_budget, CapSystem};

use super::density::Density;

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0 && t <= PI) {
        return Err(LabError::range("t", t, "(0, pi]"));
    }
    Ok(())
}

/// `A_t u` at the quadrature nodes of `sys`: the weighted mean of `u` over
/// the nodes within geodesic distance `t`.
pub fn at_average(sys: &CapSystem, u: &[f64], t: f64) -> Result<Vec<f64>> {
    check_t(t)?;
    let q = &sys.quadrature;
    if u.len() != q.nodes.len() {
        return Err(LabError::Mismatch(format!("{} values for {} nodes", u.len(), q.nodes.len())));
    }
    if t >= PI {
        let mass: f64 = q.weights.iter().sum();
        let mean = u.iter().zip(&q.weights).map(|(v, w)| v * w).sum::<f64>() / mass;
        return Ok(vec![mean; u.len()]);
    }
    let radius = chord(t);
    let hash = SpatialHash::new(&q.nodes, radius.max(q.spacing), 1.0);
    Ok(q.nodes
        .iter()
        .map(|p| {
            let (mut s, mut m) = (0.0, 0.0);
            hash.for_candidates(p, radius, |k| {
                if angle_between(p, &q.nodes[k]) < t {
                    s += q.weights[k] * u[k];
                    m += q.weights[k];
                }
            });
            s / m
        })
        .collect())
}

/// Product rule on the cap of radius `t` about `w`, resolving features of
/// size `scale`: Gauss-Legendre in `cos rho` (in `rho` for n = 2) times the
/// trapezoid rule in the azimuth. Weights sum to the cap measure.
fn cap_rule(n: usize, w: &Point, t: f64, scale: f64) -> Vec<(Point, f64)> {
    let e = tangent_basis(n, w);
    let mut out = Vec::new();
    if n == 2 {
        let nr = (4.0 * t / scale).ceil() as usize + 6;
        let (x, wx) = gauss_legendre(nr);
        for (x, wx) in x.iter().zip(&wx) {
            let rho = x * t;
            let p = [0, 1, 2].map(|k| rho.cos() * w[k] + rho.sin() * e[0][k]);
            out.push((p, wx * t));
        }
        return out;
    }
    let nr = (2.0 * t / scale).ceil() as usize + 6;
    let na = (4.0 * PI * t.sin() / scale).ceil() as usize + 8;
    let (x, wx) = gauss_legendre(nr);
    let z0 = t.cos();
    for (x, wx) in x.iter().zip(&wx) {
        let z = z0 + (1.0 - z0) * (x + 1.0) / 2.0;
        let s = (1.0 - z * z).max(0.0).sqrt();
        let wz = wx * (1.0 - z0) / 2.0 * TAU / na as f64;
        for a in 0..na {
            let psi = TAU * (a as f64 + 0.5) / na as f64;
            let (sp, cp) = psi.sin_cos();
            let p = [0, 1, 2].map(|k| z * w[k] + s * (cp * e[0][k] + sp * e[1][k]));
            out.push((p, wz));
        }
    }
    out
}

/// `A_t u` at the nodes of an outer rule with spacing about
/// `max(t, scale) / 4`, for `u` varying on length `scale`. Returns the outer
/// nodes, their weights and the averages.
pub fn at_average_at(
    n: usize,
    u: impl Fn(&Point) -> f64,
    t: f64,
    scale: f64,
) -> Result<(Vec<Point>, Vec<f64>, Vec<f64>)> {
    check_t(t)?;
    let outer = for_bandwidth(n, 0.5 / t.max(scale).min(PI), mem_budget())?;
    let measure = if n == 2 { 2.0 * t } else { TAU * (1.0 - t.cos()) };
    let values = outer
        .nodes
        .iter()
        .map(|w| {
            cap_rule(n, w, t, scale)
                .iter()
                .map(|(p, wt)| wt * u(p))
                .sum::<f64>()
                / measure
        })
        .collect();
    Ok((outer.nodes, outer.weights, values))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemarkOptions {
    /// Relative disagreement allowed between the dyadic rule and its
    /// two-fold refinement.
    pub refine_tolerance: f64,
}

impl Default for RemarkOptions {
    fn default() -> Self {
        RemarkOptions {
            refine_tolerance: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemarkValue {
    pub value: f64,
    /// Same quantity from the unrefined dyadic levels.
    pub coarse: f64,
    pub levels: usize,
}

/// `(int_{R^{-1/2}}^1 int (A_t |g|^2)^{n/(n-1)} dsigma dt/t)^{(n-1)/(2n)}` by the
/// trapezoid rule in `log t` on dyadic levels, checked against a rule with
/// twice as many levels.
pub fn remark_rhs(g: &Density, big_r: f64, opts: &RemarkOptions) -> Result<RemarkValue> {
    if !(big_r >= 4.0) {
        return Err(LabError::range("R", big_r, "[4, inf)"));
    }
    let n = g.caps.n;
    let p = n as f64 / (n as f64 - 1.0);
    let span = 0.5 * big_r.ln();
    let coarse_levels = (span / std::f64::consts::LN_2).ceil().max(1.0) as usize;
    let scale = g.caps.scale;
    let support = g.support();
    let level = |t: f64| -> Result<f64> {
        if support.is_empty() {
            return Ok(0.0);
        }
        let (_, w, a) = at_average_at(n, |x| g.value_at(x).norm_sqr(), t, scale)?;
        Ok(w.iter().zip(&a).map(|(w, a)| w * a.max(0.0).powf(p)).sum())
    };
    let fine_levels = 2 * coarse_levels;
    let mut vals = Vec::with_capacity(fine_levels + 1);
    for k in 0..=fine_levels {
        let log_t = -span * k as f64 / fine_levels as f64;
        vals.push(level(log_t.exp())?);
    }
    let trap = |stride: usize| -> f64 {
        let m = fine_levels / stride;
        let h = span / m as f64;
        (0..=m)
            .map(|i| {
                let v = vals[i * stride];
                if i == 0 || i == m {
                    0.5 * v * h
                } else {
                    v * h
                }
            })
            .sum()
    };
    let expo = (n as f64 - 1.0) / (2.0 * n as f64);
    let fine = trap(1).powf(expo);
    let coarse = trap(2).powf(expo);
    if fine > 0.0 && ((fine - coarse) / fine).abs() > opts.refine_tolerance {
        return Err(LabError::Uncertified {
            what: "remark dt/t rule",
            detail: format!("{coarse} vs refined {fine}"),
        });
    }
    Ok(RemarkValue {
        value: fine,
        coarse,
        levels: fine_levels + 1,
    })
}
