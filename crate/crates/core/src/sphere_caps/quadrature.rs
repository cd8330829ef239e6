//! Spherical quadrature rules sized by an oscillation bandwidth.

use std::f64::consts::{PI, TAU};

use crate::error::{LabError, Result};
use crate::geom::{from_angle, from_spherical, Point};

/// Nodes per unit of frequency along a geodesic: spacing <= 1 / (8 F).
pub const NODES_PER_WAVELENGTH: f64 = 8.0;
/// Bytes charged per node (coordinates, weight, bump table).
pub const BYTES_PER_NODE: u64 = 96;

#[derive(Debug, Clone)]
pub struct Quadrature {
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
    /// Largest `|x|` for which `exp(-2 pi i x.xi)` is resolved.
    pub max_frequency: f64,
    /// Largest geodesic gap between neighbouring nodes.
    pub spacing: f64,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, Newton iteration on the
/// three-term recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn circle_count(freq: f64) -> usize {
    ((TAU * NODES_PER_WAVELENGTH * freq).ceil() as usize).max(64)
}

fn sphere_layout(freq: f64) -> (usize, Vec<f64>, Vec<f64>, Vec<usize>) {
    let n_theta = ((PI * NODES_PER_WAVELENGTH * freq).ceil() as usize).max(9);
    let (z, w) = gauss_legendre(n_theta);
    let per_ring: Vec<usize> = z
        .iter()
        .map(|&zi| {
            let s = (1.0 - zi * zi).max(0.0).sqrt();
            ((TAU * NODES_PER_WAVELENGTH * freq * s).ceil() as usize).max(17)
        })
        .collect();
    let total = per_ring.iter().sum();
    (total, z, w, per_ring)
}

/// Node count the rule for `(n, freq)` would allocate.
pub fn node_count(n: usize, freq: f64) -> usize {
    match n {
        2 => circle_count(freq),
        _ => {
            let n_theta = ((PI * NODES_PER_WAVELENGTH * freq).ceil() as usize).max(9);
            // Ring sizes integrate to ~ 4 n_theta^2 / pi; exact count is cheap enough
            // only after allocation, so estimate generously here.
            (4 * n_theta * n_theta) / 3 + 17 * n_theta
        }
    }
}

/// Builds a rule resolving frequencies up to `freq`. Fails if the node count
/// exceeds `budget_bytes`.
pub fn for_bandwidth(n: usize, freq: f64, budget_bytes: u64) -> Result<Quadrature> {
    if !(freq > 0.0) {
        return Err(LabError::range("max_frequency", freq, "(0, inf)"));
    }
    let estimate = node_count(n, freq) as u64 * BYTES_PER_NODE;
    if estimate > budget_bytes {
        return Err(LabError::BudgetExceeded {
            what: "quadrature nodes",
            required: estimate,
            budget: budget_bytes,
        });
    }
    match n {
        2 => {
            let m = circle_count(freq);
            let nodes = (0..m).map(|j| from_angle(TAU * j as f64 / m as f64)).collect();
            Ok(Quadrature {
                nodes,
                weights: vec![TAU / m as f64; m],
                max_frequency: freq,
                spacing: TAU / m as f64,
            })
        }
        3 => {
            let (total, z, w, per_ring) = sphere_layout(freq);
            let mut nodes = Vec::with_capacity(total);
            let mut weights = Vec::with_capacity(total);
            let mut spacing = 0.0f64;
            let thetas: Vec<f64> = z.iter().map(|zi| zi.clamp(-1.0, 1.0).acos()).collect();
            for (i, &m) in per_ring.iter().enumerate() {
                let theta = thetas[i];
                let offset = if i % 2 == 1 { 0.5 } else { 0.0 };
                for j in 0..m {
                    nodes.push(from_spherical(theta, TAU * (j as f64 + offset) / m as f64));
                    weights.push(w[i] * TAU / m as f64);
                }
                spacing = spacing.max(TAU * theta.sin() / m as f64);
                if i + 1 < thetas.len() {
                    spacing = spacing.max((thetas[i + 1] - theta).abs());
                }
            }
            spacing = spacing.max(thetas[0]).max(PI - thetas[thetas.len() - 1]);
            Ok(Quadrature {
                nodes,
                weights,
                max_frequency: freq,
                spacing,
            })
        }
        _ => Err(LabError::UnsupportedDimension(n)),
    }
}
