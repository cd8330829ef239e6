use num_complex::Complex64;

use super::density::{phase, Density};
use crate::geom::{dot, Point};
use crate::sphere_caps::{CapSystem, Quadrature};

/// Pointwise sums `F(x) = sum_a F_a(x)` and `S(x)^2 = sum_a |F_a(x)|^2`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PieceSums {
    pub total: Vec<Complex64>,
    pub square: Vec<f64>,
}

impl PieceSums {
    pub fn zeros(len: usize) -> Self {
        PieceSums {
            total: vec![Complex64::new(0.0, 0.0); len],
            square: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.total.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total.is_empty()
    }

    pub fn extend_from(&mut self, other: PieceSums) {
        self.total.extend(other.total);
        self.square.extend(other.square);
    }
}

/// `sum_j w_j h_j e^{-2 pi i x . xi_j}`.
pub fn extend_nodes_at(q: &Quadrature, values: &[Complex64], x: &Point) -> Complex64 {
    q.nodes
        .iter()
        .zip(&q.weights)
        .zip(values)
        .map(|((p, w), v)| v * (*w * phase(-dot(x, p))))
        .sum()
}

/// Quadrature weights of each cap piece, restricted to caps with nonzero
/// coefficient and to the nodes those caps touch.
#[derive(Debug, Clone)]
pub struct DirectEngine {
    nodes: Vec<Point>,
    caps: Vec<usize>,
    offsets: Vec<usize>,
    slot: Vec<u32>,
    weight: Vec<Complex64>,
}

impl DirectEngine {
    pub fn new(d: &Density) -> Self {
        let sys = d.caps;
        let q = &sys.quadrature;
        let mut local = vec![u32::MAX; q.nodes.len()];
        let mut nodes = Vec::new();
        let mut caps = Vec::new();
        let mut offsets = vec![0];
        let mut slot = Vec::new();
        let mut weight = Vec::new();
        for alpha in d.support() {
            let (js, phis) = sys.cap_nodes.row(alpha);
            for (&j, &phi) in js.iter().zip(phis) {
                let j = j as usize;
                if local[j] == u32::MAX {
                    local[j] = nodes.len() as u32;
                    nodes.push(q.nodes[j]);
                }
                slot.push(local[j]);
                weight.push(q.weights[j] * d.piece(alpha, &q.nodes[j], phi));
            }
            caps.push(alpha);
            offsets.push(slot.len());
        }
        DirectEngine {
            nodes,
            caps,
            offsets,
            slot,
            weight,
        }
    }

    /// Pieces `(h phi_a dsigma)^` of the node function `h` (values at the
    /// quadrature nodes of `sys`), over the caps where `h` is not identically zero.
    pub fn from_node_values(sys: &CapSystem, values: &[Complex64]) -> Self {
        let q = &sys.quadrature;
        let mut local = vec![u32::MAX; q.nodes.len()];
        let mut nodes = Vec::new();
        let mut caps = Vec::new();
        let mut offsets = vec![0];
        let mut slot = Vec::new();
        let mut weight = Vec::new();
        for alpha in 0..sys.len() {
            let (js, phis) = sys.cap_nodes.row(alpha);
            if js.iter().all(|&j| values[j as usize] == Complex64::new(0.0, 0.0)) {
                continue;
            }
            for (&j, &phi) in js.iter().zip(phis) {
                let j = j as usize;
                if local[j] == u32::MAX {
                    local[j] = nodes.len() as u32;
                    nodes.push(q.nodes[j]);
                }
                slot.push(local[j]);
                weight.push(q.weights[j] * phi * values[j]);
            }
            caps.push(alpha);
            offsets.push(slot.len());
        }
        DirectEngine {
            nodes,
            caps,
            offsets,
            slot,
            weight,
        }
    }

    /// Caps carried by the engine, in the order used by [`Self::pieces_at`].
    pub fn caps(&self) -> &[usize] {
        &self.caps
    }

    pub fn work_per_point(&self) -> usize {
        self.nodes.len() + self.slot.len()
    }

    /// Per-cap values `F_a(x)` into `out` (same order as [`Self::caps`]).
    pub fn pieces_at(&self, x: &Point, phases: &mut Vec<Complex64>, out: &mut Vec<Complex64>) {
        phases.clear();
        phases.extend(self.nodes.iter().map(|p| phase(-dot(x, p))));
        out.clear();
        for k in 0..self.caps.len() {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in self.offsets[k]..self.offsets[k + 1] {
                acc += self.weight[i] * phases[self.slot[i] as usize];
            }
            out.push(acc);
        }
    }

    pub fn sums(&self, points: &[Point]) -> PieceSums {
        let mut out = PieceSums::zeros(points.len());
        let (mut ph, mut pieces) = (Vec::new(), Vec::new());
        for (i, x) in points.iter().enumerate() {
            self.pieces_at(x, &mut ph, &mut pieces);
            out.total[i] = pieces.iter().sum();
            out.square[i] = pieces.iter().map(|v| v.norm_sqr()).sum();
        }
        out
    }
}
