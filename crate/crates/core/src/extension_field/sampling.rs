//! Point sets for L^q norms over balls: the full grid, or radial shells by
//! angular cells with a fixed number of random replicates per stratum.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{LabError, Result};
use crate::geom::{from_angle, from_spherical, Point};
use crate::sphere_caps::{circle_cells, sphere_cells, CellShape};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMethod {
    FullGrid,
    Stratified,
}

#[derive(Debug, Clone)]
pub struct SamplePlan {
    pub n: usize,
    pub radius: f64,
    pub method: NormMethod,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// Replicate index of each point; used for the jackknife.
    pub groups: Vec<u32>,
    pub n_groups: usize,
}

fn ball_volume(n: usize, r: f64) -> f64 {
    if n == 2 {
        PI * r * r
    } else {
        4.0 / 3.0 * PI * r * r * r
    }
}

impl SamplePlan {
    /// Grid points `k h` with `|k h| <= radius`, weight `h^n`.
    pub fn full_grid(n: usize, radius: f64, h: f64) -> Result<SamplePlan> {
        if n != 2 && n != 3 {
            return Err(LabError::UnsupportedDimension(n));
        }
        let k = (radius / h).floor() as i64;
        let mut points = Vec::new();
        let zs: Vec<i64> = if n == 3 { (-k..=k).collect() } else { vec![0] };
        for i in -k..=k {
            for j in -k..=k {
                for &l in &zs {
                    let p = [i as f64 * h, j as f64 * h, l as f64 * h];
                    if p[0] * p[0] + p[1] * p[1] + p[2] * p[2] <= radius * radius {
                        points.push(p);
                    }
                }
            }
        }
        let m = points.len();
        Ok(SamplePlan {
            n,
            radius,
            method: NormMethod::FullGrid,
            points,
            weights: vec![h.powi(n as i32); m],
            groups: vec![0; m],
            n_groups: 1,
        })
    }

    pub fn full_grid_count(n: usize, radius: f64, h: f64) -> f64 {
        ball_volume(n, radius) / h.powi(n as i32)
    }

    /// Shell edges `0, 1, ..` geometric up to `radius`, angular cells from the
    /// equal-measure constructions, `replicates` random points per stratum.
    /// Replicate `g` is a pure function of `(seed, stratum, g)`, so plans with
    /// more replicates contain plans with fewer.
    pub fn stratified(n: usize, radius: f64, seed: u64, replicates: usize) -> Result<SamplePlan> {
        if n != 2 && n != 3 {
            return Err(LabError::UnsupportedDimension(n));
        }
        let mut plan = SamplePlan {
            n,
            radius,
            method: NormMethod::Stratified,
            points: Vec::new(),
            weights: Vec::new(),
            groups: Vec::new(),
            n_groups: 0,
        };
        plan.add_replicates(seed, replicates)?;
        Ok(plan)
    }

    /// Appends replicates `n_groups..total` and reweights; returns the index
    /// of the first new point.
    pub fn add_replicates(&mut self, seed: u64, total: usize) -> Result<usize> {
        if self.method != NormMethod::Stratified {
            return Err(LabError::InvalidArgument("replicates of a full grid".into()));
        }
        if total < 2 || total < self.n_groups {
            return Err(LabError::InvalidArgument(format!(
                "replicate count {total} (have {})",
                self.n_groups
            )));
        }
        let n = self.n;
        let start = self.points.len();
        let old = self.n_groups;
        for w in &mut self.weights {
            *w *= old as f64 / total as f64;
        }
        let edges = shell_edges(self.radius);
        let cells = angular_cells(n);
        let sphere = if n == 2 { TAU } else { 4.0 * PI };
        let mut stratum = 0u64;
        for s in 0..edges.len() - 1 {
            let (a, b) = (edges[s], edges[s + 1]);
            let shell = ball_volume(n, b) - ball_volume(n, a);
            for cell in &cells {
                let vol = shell * cell.measure() / sphere;
                for g in old..total {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(stratum << 20 | g as u64);
                    let t: f64 = rng.gen();
                    let r = (a.powi(n as i32) + t * (b.powi(n as i32) - a.powi(n as i32))).powf(1.0 / n as f64);
                    let dir = sample_cell(cell, &mut rng);
                    self.points.push([r * dir[0], r * dir[1], r * dir[2]]);
                    self.weights.push(vol / total as f64);
                    self.groups.push(g as u32);
                }
                stratum += 1;
            }
        }
        self.n_groups = total;
        Ok(start)
    }

    pub fn strata(n: usize, radius: f64) -> usize {
        (shell_edges(radius).len() - 1) * angular_cells(n).len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn shell_edges(radius: f64) -> Vec<f64> {
    let mut edges = vec![0.0];
    if radius <= 1.0 {
        edges.push(radius);
        return edges;
    }
    let k = (2.0 * radius.log2()).ceil().max(1.0) as usize;
    for i in 0..=k {
        edges.push(radius.powf(i as f64 / k as f64));
    }
    edges
}

fn angular_cells(n: usize) -> Vec<CellShape> {
    if n == 2 {
        circle_cells(64)
    } else {
        sphere_cells(96)
    }
}

fn sample_cell<R: Rng>(cell: &CellShape, rng: &mut R) -> Point {
    match *cell {
        CellShape::Arc { start, len } => from_angle(start + len * rng.gen::<f64>()),
        CellShape::Zone { theta0, theta1, phi0, dphi } => {
            let (z0, z1) = (theta1.cos(), theta0.cos());
            let z = z0 + (z1 - z0) * rng.gen::<f64>();
            from_spherical(z.clamp(-1.0, 1.0).acos(), phi0 + dphi * rng.gen::<f64>())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, stderr: 0.0 }
    }

    pub fn relative_error(&self) -> f64 {
        if self.value == 0.0 {
            0.0
        } else {
            self.stderr / self.value.abs()
        }
    }
}

/// Per-group partial sums of `w |v|^q`.
fn group_sums(plan: &SamplePlan, moduli: &[f64], q: f64) -> Vec<f64> {
    let mut sums = vec![0.0; plan.n_groups];
    for ((w, v), g) in plan.weights.iter().zip(moduli).zip(&plan.groups) {
        sums[*g as usize] += w * v.powf(q);
    }
    sums
}

fn jackknife(n_groups: usize, full: f64, leave_out: impl Fn(usize) -> f64) -> Estimate {
    if n_groups < 2 {
        return Estimate::exact(full);
    }
    let g = n_groups as f64;
    let vals: Vec<f64> = (0..n_groups).map(leave_out).collect();
    let mean = vals.iter().sum::<f64>() / g;
    let var = (g - 1.0) / g * vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    Estimate {
        value: full,
        stderr: var.sqrt(),
    }
}

/// `(sum w |v|^q)^{1/q}` with a grouped jackknife error.
pub fn lq_estimate(plan: &SamplePlan, moduli: &[f64], q: f64) -> Estimate {
    let sums = group_sums(plan, moduli, q);
    let total: f64 = sums.iter().sum();
    let g = plan.n_groups as f64;
    jackknife(plan.n_groups, total.powf(1.0 / q), |k| {
        ((total - sums[k]) * g / (g - 1.0)).powf(1.0 / q)
    })
}

/// Norms of two fields on the same points and their ratio, with the ratio's
/// jackknife error computed from the paired group sums.
pub fn ratio_estimate(plan: &SamplePlan, lhs: &[f64], rhs: &[f64], q: f64) -> (Estimate, Estimate, Estimate) {
    let a = group_sums(plan, lhs, q);
    let b = group_sums(plan, rhs, q);
    let (ta, tb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    let full = (ta / tb).powf(1.0 / q);
    let ratio = jackknife(plan.n_groups, full, |k| ((ta - a[k]) / (tb - b[k])).powf(1.0 / q));
    (lq_estimate(plan, lhs, q), lq_estimate(plan, rhs, q), ratio)
}
