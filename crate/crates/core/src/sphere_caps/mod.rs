//! Cap decompositions of S^{n-1} (n = 2, 3) with smooth partitions of unity
//! and bandwidth-sized quadrature.

mod audit;
mod bump;
mod cells;
mod io;
pub mod quadrature;

pub use audit::{audit, CapAudit, Check};
pub use bump::BumpProfile;
pub use cells::{circle_cells, sphere_cells, CellShape};
pub use io::CapSystemDoc;
pub use quadrature::Quadrature;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{PI, TAU};

use crate::error::{LabError, Result};
use crate::geom::{angle_between, chord, dot, rotate_2d, Point, SpatialHash};

/// Ratio of bump support radius to cell covering radius.
pub const SUPPORT_FACTOR: f64 = 1.5;

#[derive(Debug, Clone)]
pub struct Cap {
    pub index: usize,
    pub center: Point,
    pub angular_scale: f64,
    /// Covering radius of the cell: every point of the cell is within this
    /// geodesic distance of `center`.
    pub radius: f64,
    /// Support radius of the bump; at most twice `radius`.
    pub support: f64,
    pub cell: CellShape,
}

/// Sparse table of nonzero normalised bump values, either by node or by cap.
#[derive(Debug, Clone, Default)]
pub struct Incidence {
    pub offsets: Vec<u32>,
    pub index: Vec<u32>,
    pub value: Vec<f64>,
}

impl Incidence {
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.offsets[i] as usize, self.offsets[i + 1] as usize);
        (&self.index[a..b], &self.value[a..b])
    }

    pub fn len(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn transpose(&self, columns: usize) -> Incidence {
        let mut counts = vec![0u32; columns + 1];
        for &c in &self.index {
            counts[c as usize + 1] += 1;
        }
        for i in 0..columns {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut index = vec![0u32; self.index.len()];
        let mut value = vec![0.0; self.index.len()];
        for row in 0..self.len() {
            let (cols, vals) = self.row(row);
            for (&c, &v) in cols.iter().zip(vals) {
                let slot = fill[c as usize] as usize;
                index[slot] = row as u32;
                value[slot] = v;
                fill[c as usize] += 1;
            }
        }
        Incidence {
            offsets: counts,
            index,
            value,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CapSystem {
    pub n: usize,
    pub scale: f64,
    pub profile: BumpProfile,
    pub caps: Vec<Cap>,
    /// Fine cap index -> coarse cap index, when built by [`CapSystem::refine`].
    pub parent_map: Option<Vec<usize>>,
    pub parent_scale: Option<f64>,
    pub quadrature: Quadrature,
    /// Node -> (cap, phi_cap(node)).
    pub node_bumps: Incidence,
    /// Cap -> (node, phi_cap(node)).
    pub cap_nodes: Incidence,
    /// Node -> index of the cell containing it.
    pub node_cell: Vec<u32>,
    hash: SpatialHash,
    max_support: f64,
}

/// Memory budget for grid and node allocations: `LAB_MEM_BUDGET_BYTES`, else 3 GiB.
pub fn mem_budget() -> u64 {
    std::env::var("LAB_MEM_BUDGET_BYTES")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(3 << 30)
}

pub fn sphere_measure(n: usize) -> f64 {
    if n == 2 {
        TAU
    } else {
        4.0 * PI
    }
}

/// Decomposes S^{n-1} into caps at angular scale `s`: equal arcs for n = 2,
/// equal-area zones for n = 3.
pub fn cap_decompose(n: usize, s: f64, profile: BumpProfile) -> Result<CapSystem> {
    if n != 2 && n != 3 {
        return Err(LabError::UnsupportedDimension(n));
    }
    if !(s > 0.0 && s <= PI / 4.0) {
        return Err(LabError::range("angular scale", s, "(0, pi/4]"));
    }
    let cells = if n == 2 {
        circle_cells((TAU / s).ceil() as usize)
    } else {
        sphere_cells((4.0 * PI / (s * s)).ceil() as usize)
    };
    CapSystem::from_cells(n, s, profile, cells, None, None)
}

impl CapSystem {
    fn from_cells(
        n: usize,
        scale: f64,
        profile: BumpProfile,
        cells: Vec<CellShape>,
        parent_map: Option<Vec<usize>>,
        parent_scale: Option<f64>,
    ) -> Result<CapSystem> {
        let caps: Vec<Cap> = cells
            .into_iter()
            .enumerate()
            .map(|(index, cell)| {
                let radius = cell.covering_radius();
                Cap {
                    index,
                    center: cell.center(),
                    angular_scale: scale,
                    radius,
                    support: SUPPORT_FACTOR * radius,
                    cell,
                }
            })
            .collect();
        let max_support = caps.iter().map(|c| c.support).fold(0.0, f64::max);
        let centers: Vec<Point> = caps.iter().map(|c| c.center).collect();
        let hash = SpatialHash::new(&centers, chord(max_support), 1.0);
        let mut sys = CapSystem {
            n,
            scale,
            profile,
            caps,
            parent_map,
            parent_scale,
            quadrature: Quadrature {
                nodes: Vec::new(),
                weights: Vec::new(),
                max_frequency: 0.0,
                spacing: f64::INFINITY,
            },
            node_bumps: Incidence::default(),
            cap_nodes: Incidence::default(),
            node_cell: Vec::new(),
            hash,
            max_support,
        };
        let default_freq = 0.5 / scale;
        sys.install_quadrature(quadrature::for_bandwidth(n, default_freq, mem_budget())?);
        Ok(sys)
    }

    pub fn len(&self) -> usize {
        self.caps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.caps.is_empty()
    }

    pub fn sphere_measure(&self) -> f64 {
        sphere_measure(self.n)
    }

    /// Largest bump support radius over all caps.
    pub fn max_support(&self) -> f64 {
        self.max_support
    }

    /// Normalised bump values `phi_a(p) > 0` at the unit vector `p`, written into `out`.
    pub fn bumps_at(&self, p: &Point, out: &mut Vec<(u32, f64)>) {
        out.clear();
        let mut total = 0.0;
        self.hash.for_candidates(p, chord(self.max_support), |i| {
            let cap = &self.caps[i];
            let d = angle_between(p, &cap.center);
            if d < cap.support {
                let v = self.profile.eval(d / cap.support);
                if v > 0.0 {
                    out.push((i as u32, v));
                    total += v;
                }
            }
        });
        out.sort_unstable_by_key(|e| e.0);
        for e in out.iter_mut() {
            e.1 /= total;
        }
    }

    /// `phi_alpha(p)`.
    pub fn bump(&self, alpha: usize, p: &Point) -> f64 {
        let mut buf = Vec::new();
        self.bumps_at(p, &mut buf);
        buf.iter()
            .find(|e| e.0 as usize == alpha)
            .map_or(0.0, |e| e.1)
    }

    pub fn partition_sum(&self, p: &Point) -> f64 {
        let mut buf = Vec::new();
        self.bumps_at(p, &mut buf);
        buf.iter().map(|e| e.1).sum()
    }

    /// Index of the cell containing `p`.
    pub fn cell_of(&self, p: &Point) -> usize {
        let mut best = (usize::MAX, f64::INFINITY);
        let mut hit = None;
        self.hash.for_candidates(p, chord(self.max_support), |i| {
            if hit.is_none() && self.caps[i].cell.contains(p) {
                hit = Some(i);
            }
            let d = angle_between(p, &self.caps[i].center);
            if d < best.1 {
                best = (i, d);
            }
        });
        hit.unwrap_or(best.0)
    }

    fn install_quadrature(&mut self, q: Quadrature) {
        let mut offsets = Vec::with_capacity(q.nodes.len() + 1);
        let mut index = Vec::new();
        let mut value = Vec::new();
        let mut node_cell = Vec::with_capacity(q.nodes.len());
        let mut buf = Vec::new();
        offsets.push(0u32);
        for p in &q.nodes {
            self.bumps_at(p, &mut buf);
            for &(c, v) in &buf {
                index.push(c);
                value.push(v);
            }
            offsets.push(index.len() as u32);
            node_cell.push(self.cell_of(p) as u32);
        }
        self.node_bumps = Incidence {
            offsets,
            index,
            value,
        };
        self.cap_nodes = self.node_bumps.transpose(self.caps.len());
        self.node_cell = node_cell;
        self.quadrature = q;
    }

    /// Replaces the quadrature with one resolving `exp(-2 pi i x.xi)` for
    /// `|x| <= max_frequency`, and self-checks it against a rule of twice the
    /// resolution at ten random `x`.
    pub fn quadrature_for_bandwidth(mut self, max_frequency: f64) -> Result<CapSystem> {
        self.set_bandwidth(max_frequency, mem_budget())?;
        Ok(self)
    }

    pub fn set_bandwidth(&mut self, max_frequency: f64, budget: u64) -> Result<()> {
        let q = quadrature::for_bandwidth(self.n, max_frequency, budget)?;
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0f_ba4d);
        let xs: Vec<Point> = (0..10)
            .map(|_| {
                let r = max_frequency * rng.gen::<f64>();
                let dir = random_unit(self.n, &mut rng);
                [r * dir[0], r * dir[1], r * dir[2]]
            })
            .collect();
        let fine = quadrature::for_bandwidth(self.n, 2.0 * max_frequency, u64::MAX)?;
        let mass = sphere_measure(self.n);
        for x in &xs {
            let a = plane_wave_integral(&q, x);
            let b = plane_wave_integral(&fine, x);
            if (a - b).norm() > 1e-6 * mass {
                return Err(LabError::Uncertified {
                    what: "quadrature",
                    detail: format!("plane wave at |x|={:.3}: {a} vs {b}", crate::geom::norm(x)),
                });
            }
        }
        self.install_quadrature(q);
        Ok(())
    }

    /// `sum_j w_j f(xi_j)`.
    pub fn integrate(&self, f: impl Fn(&Point) -> f64) -> f64 {
        self.quadrature
            .nodes
            .iter()
            .zip(&self.quadrature.weights)
            .map(|(p, w)| w * f(p))
            .sum()
    }

    /// `int phi_alpha dsigma` by quadrature.
    pub fn bump_mass(&self, alpha: usize) -> f64 {
        let (nodes, vals) = self.cap_nodes.row(alpha);
        nodes
            .iter()
            .zip(vals)
            .map(|(&j, v)| v * self.quadrature.weights[j as usize])
            .sum()
    }

    /// Builds the finer system whose cells subdivide this one's cells; the
    /// parent map records the containing coarse cell.
    pub fn refine(&self, fine_scale: f64) -> Result<CapSystem> {
        if !(fine_scale > 0.0 && fine_scale < self.scale) {
            return Err(LabError::range(
                "fine scale",
                fine_scale,
                format!("(0, {})", self.scale),
            ));
        }
        let mut cells = Vec::new();
        let mut parents = Vec::new();
        for cap in &self.caps {
            let k = match self.n {
                2 => ((cap.cell.measure() / fine_scale) - 1e-9).ceil().max(1.0) as usize,
                _ => (cap.cell.measure() / (fine_scale * fine_scale)).round().max(1.0) as usize,
            };
            for child in cap.cell.split(k) {
                cells.push(child);
                parents.push(cap.index);
            }
        }
        let mut fine = CapSystem::from_cells(
            self.n,
            fine_scale,
            self.profile,
            cells,
            Some(parents),
            Some(self.scale),
        )?;
        if fine.quadrature.max_frequency < self.quadrature.max_frequency {
            fine.set_bandwidth(self.quadrature.max_frequency, mem_budget())?;
        }
        Ok(fine)
    }

    /// Fine caps grouped by parent.
    pub fn children(&self) -> Option<Vec<Vec<usize>>> {
        let map = self.parent_map.as_ref()?;
        let parents = map.iter().copied().max().map_or(0, |m| m + 1);
        let mut out = vec![Vec::new(); parents];
        for (beta, &alpha) in map.iter().enumerate() {
            out[alpha].push(beta);
        }
        Some(out)
    }

    /// Rotates every cap centre and quadrature node by `angle` (n = 2 only).
    pub fn rotated(&self, angle: f64) -> Result<CapSystem> {
        if self.n != 2 {
            return Err(LabError::UnsupportedDimension(self.n));
        }
        let mut out = self.clone();
        for cap in &mut out.caps {
            cap.center = rotate_2d(&cap.center, angle);
            if let CellShape::Arc { start, .. } = &mut cap.cell {
                *start += angle;
            }
        }
        for p in &mut out.quadrature.nodes {
            *p = rotate_2d(p, angle);
        }
        let centers: Vec<Point> = out.caps.iter().map(|c| c.center).collect();
        out.hash = SpatialHash::new(&centers, chord(out.max_support), 1.0);
        Ok(out)
    }

    pub fn to_doc(&self) -> CapSystemDoc {
        CapSystemDoc::from_system(self)
    }
}

/// `sum_j w_j exp(-2 pi i x.xi_j)`.
pub fn plane_wave_integral(q: &Quadrature, x: &Point) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (p, w) in q.nodes.iter().zip(&q.weights) {
        let t = dot(x, p);
        let (s, c) = (TAU * (t - t.round())).sin_cos();
        acc += Complex64::new(w * c, -w * s);
    }
    acc
}

pub fn random_unit<R: Rng>(n: usize, rng: &mut R) -> Point {
    if n == 2 {
        crate::geom::from_angle(TAU * rng.gen::<f64>())
    } else {
        let z: f64 = 2.0 * rng.gen::<f64>() - 1.0;
        crate::geom::from_spherical(z.acos(), TAU * rng.gen::<f64>())
    }
}
