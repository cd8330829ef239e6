//! The extension operator `h -> (h dsigma)^`, square functions and L^q norms.

mod capframe;
mod density;
mod direct;
mod export;
pub mod nufft;
mod ratios;
mod remark;
mod sampling;

pub use capframe::{capframe_sums, CapFrameCheck, CapFrameParams, CapTable};
pub use density::{rademacher, Density};
pub use direct::{extend_nodes_at, DirectEngine, PieceSums};
pub use export::{read_field, write_field, FieldHeader, RatioReport, ReportSink, CSV_COLUMNS};
pub use ratios::{
    piece_sums, restriction_ratio, rlp_extension_ratio, EvalMethod, NormPolicy, PairedNorms,
};
pub use remark::{at_average, at_average_at, remark_rhs, RemarkOptions, RemarkValue};
pub use sampling::{lq_estimate, ratio_estimate, Estimate, NormMethod, SamplePlan};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{LabError, Result};
use crate::geom::Point;
use crate::sphere_caps::Quadrature;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplingPolicy {
    FullGrid,
    Stratified { replicates: usize, seed: u64 },
}

/// The cube `[-L, L)^n` sampled at `k h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    pub box_radius: f64,
    pub spacing: f64,
    pub policy: SamplingPolicy,
}

impl GridSpec {
    pub fn new(n: usize, box_radius: f64, spacing: f64) -> Result<GridSpec> {
        if n != 2 && n != 3 {
            return Err(LabError::UnsupportedDimension(n));
        }
        if !(spacing > 0.0 && spacing <= 0.25) {
            return Err(LabError::range("grid spacing", spacing, "(0, 1/4]"));
        }
        if !(box_radius > 0.0) {
            return Err(LabError::range("box radius", box_radius, "(0, inf)"));
        }
        let g = GridSpec {
            n,
            box_radius,
            spacing,
            policy: SamplingPolicy::FullGrid,
        };
        let k = 2.0 * box_radius / spacing;
        if (k - k.round()).abs() > 1e-9 || k.round() as usize % 2 != 0 {
            return Err(LabError::InvalidArgument(format!(
                "2L/h = {k} must be an even integer"
            )));
        }
        Ok(g)
    }

    /// Points per axis.
    pub fn side(&self) -> usize {
        (2.0 * self.box_radius / self.spacing).round() as usize
    }

    pub fn point_count(&self) -> usize {
        self.side().pow(self.n as u32)
    }

    pub fn point(&self, flat: usize) -> Point {
        let k = self.side();
        let half = (k / 2) as f64;
        let mut p = [0.0; 3];
        let mut r = flat;
        for a in (0..self.n).rev() {
            p[a] = ((r % k) as f64 - half) * self.spacing;
            r /= k;
        }
        p
    }

    pub fn points(&self) -> Vec<Point> {
        (0..self.point_count()).map(|i| self.point(i)).collect()
    }

    /// Largest `|x|` on the grid.
    pub fn diameter(&self) -> f64 {
        self.box_radius * (self.n as f64).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct Field {
    pub grid: GridSpec,
    pub values: Vec<Complex64>,
}

#[derive(Debug, Clone)]
pub struct RealField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtendMethod {
    Direct,
    Gridded,
}

/// Gridded-vs-direct agreement required of every gridded evaluation,
/// relative to `int |h| dsigma`.
pub const GRIDDED_TOLERANCE: f64 = 1e-6;

fn check_bandwidth(q: &Quadrature, grid: &GridSpec) -> Result<()> {
    if q.max_frequency + 1e-9 < grid.diameter() {
        return Err(LabError::Uncertified {
            what: "quadrature",
            detail: format!(
                "certified to |x| <= {}, grid reaches {}",
                q.max_frequency,
                grid.diameter()
            ),
        });
    }
    Ok(())
}

/// Extension of node values `h` on the grid.
pub fn extend(q: &Quadrature, h: &[Complex64], grid: &GridSpec, method: ExtendMethod) -> Result<Field> {
    if h.len() != q.nodes.len() {
        return Err(LabError::Mismatch(format!("{} values for {} nodes", h.len(), q.nodes.len())));
    }
    if q.nodes.first().map_or(false, |p| grid.n == 2 && p[2] != 0.0) {
        return Err(LabError::Mismatch("planar grid for spatial nodes".into()));
    }
    check_bandwidth(q, grid)?;
    let values = match method {
        ExtendMethod::Direct => {
            let mut out = Vec::with_capacity(grid.point_count());
            for i in 0..grid.point_count() {
                out.push(extend_nodes_at(q, h, &grid.point(i)));
            }
            out
        }
        ExtendMethod::Gridded => {
            let out = gridded(q, h, grid)?;
            certify_gridded(q, h, grid, &out)?;
            out
        }
    };
    Ok(Field { grid: *grid, values })
}

fn gridded(q: &Quadrature, h: &[Complex64], grid: &GridSpec) -> Result<Vec<Complex64>> {
    let scale = TAU * grid.spacing;
    let t: Vec<Point> = q.nodes.iter().map(|p| p.map(|v| v * scale)).collect();
    let c: Vec<Complex64> = h.iter().zip(&q.weights).map(|(v, w)| v * *w).collect();
    nufft::type1(grid.n, &t, &c, grid.side(), nufft::NufftParams::default())
}

fn certify_gridded(q: &Quadrature, h: &[Complex64], grid: &GridSpec, values: &[Complex64]) -> Result<()> {
    let mass: f64 = h.iter().zip(&q.weights).map(|(v, w)| v.norm() * w).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(values.len() as u64);
    for _ in 0..100 {
        let i = rng.gen_range(0..values.len());
        let exact = extend_nodes_at(q, h, &grid.point(i));
        let err = (values[i] - exact).norm();
        if err > GRIDDED_TOLERANCE * mass.max(f64::MIN_POSITIVE) {
            return Err(LabError::Uncertified {
                what: "gridded extension",
                detail: format!("at {:?}: |{} - {}| = {err:.3e}", grid.point(i), values[i], exact),
            });
        }
    }
    Ok(())
}

pub fn extend_density(d: &Density, grid: &GridSpec, method: ExtendMethod) -> Result<Field> {
    extend(&d.caps.quadrature, &d.node_values, grid, method)
}

/// `(sum_a |(g_a dsigma)^|^2)^{1/2}` on the grid.
pub fn square_function(d: &Density, grid: &GridSpec, method: ExtendMethod) -> Result<RealField> {
    if d.caps.n != grid.n {
        return Err(LabError::Mismatch(format!("caps in n={}, grid in n={}", d.caps.n, grid.n)));
    }
    check_bandwidth(&d.caps.quadrature, grid)?;
    let mut sq = vec![0.0; grid.point_count()];
    match method {
        ExtendMethod::Direct => {
            let sums = DirectEngine::new(d).sums(&grid.points());
            sq = sums.square;
        }
        ExtendMethod::Gridded => {
            let q = &d.caps.quadrature;
            for alpha in d.support() {
                let (js, phis) = d.caps.cap_nodes.row(alpha);
                let sub = Quadrature {
                    nodes: js.iter().map(|&j| q.nodes[j as usize]).collect(),
                    weights: js.iter().map(|&j| q.weights[j as usize]).collect(),
                    max_frequency: q.max_frequency,
                    spacing: q.spacing,
                };
                let vals: Vec<Complex64> = js
                    .iter()
                    .zip(phis)
                    .map(|(&j, &phi)| d.piece(alpha, &q.nodes[j as usize], phi))
                    .collect();
                let f = gridded(&sub, &vals, grid)?;
                certify_gridded(&sub, &vals, grid, &f)?;
                for (s, v) in sq.iter_mut().zip(&f) {
                    *s += v.norm_sqr();
                }
            }
        }
    }
    Ok(RealField {
        grid: *grid,
        values: sq.into_iter().map(f64::sqrt).collect(),
    })
}

fn ball_sum(grid: &GridSpec, radius: f64, q: f64, modulus: impl Fn(usize) -> f64) -> Result<f64> {
    if radius > grid.box_radius {
        return Err(LabError::range("ball radius", radius, format!("(0, {}]", grid.box_radius)));
    }
    if q < 1.0 {
        return Err(LabError::range("q", q, "[1, inf)"));
    }
    let hn = grid.spacing.powi(grid.n as i32);
    let mut s = 0.0;
    for i in 0..grid.point_count() {
        let p = grid.point(i);
        if p[0] * p[0] + p[1] * p[1] + p[2] * p[2] <= radius * radius {
            s += modulus(i).powf(q) * hn;
        }
    }
    Ok(s.powf(1.0 / q))
}

/// `(sum_{|x| <= radius} |F(x)|^q h^n)^{1/q}`.
pub fn lq_norm(field: &Field, radius: f64, q: f64) -> Result<f64> {
    ball_sum(&field.grid, radius, q, |i| field.values[i].norm())
}

pub fn lq_norm_real(field: &RealField, radius: f64, q: f64) -> Result<f64> {
    ball_sum(&field.grid, radius, q, |i| field.values[i].abs())
}

/// `2n / (n - 1)`.
pub fn critical_q(n: usize) -> f64 {
    2.0 * n as f64 / (n as f64 - 1.0)
}
