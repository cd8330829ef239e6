use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geom::Point;

use super::raster::GridFunction;
use super::{dual_exponent, DirectionNet, Tube, TubeFamily};

const REFINE_CHECKS: usize = 5;
const REFINE_TOLERANCE: f64 = 0.15;
const DUALITY_SLACK: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximalValues {
    /// `M_N f(omega)` per net direction.
    pub values: Vec<f64>,
    /// Centre of a maximising tube per direction.
    pub centers: Vec<Point>,
    pub stride: f64,
    /// `(direction, value, value at stride / 4)` for the refinement checks.
    pub checks: Vec<(usize, f64, f64)>,
}

/// Running sums of the grid values along each axis.
struct Prefix<'a> {
    f: &'a GridFunction,
    sums: Vec<Vec<f64>>,
    strides: [usize; 3],
}

impl<'a> Prefix<'a> {
    fn new(f: &'a GridFunction) -> Prefix<'a> {
        let g = &f.grid;
        let mut strides = [1usize; 3];
        for a in (0..g.n - 1).rev() {
            strides[a] = strides[a + 1] * g.dims[a + 1];
        }
        let sums = (0..g.n)
            .map(|a| {
                let mut s = f.values.clone();
                for flat in 0..s.len() {
                    if (flat / strides[a]) % g.dims[a] > 0 {
                        s[flat] += s[flat - strides[a]];
                    }
                }
                s
            })
            .collect();
        Prefix { f, sums, strides }
    }

    fn average(&self, tube: &Tube) -> f64 {
        let g = &self.f.grid;
        let mut s = 0.0;
        let count = g.raster(tube, 0.0, |base, stride, k| {
            let a = self.strides.iter().position(|&x| x == stride).unwrap_or(g.n - 1);
            let p = &self.sums[a];
            s += p[base + (k - 1) * stride];
            if (base / stride) % g.dims[a] > 0 {
                s -= p[base - stride];
            }
        });
        if count == 0 {
            0.0
        } else {
            s / count as f64
        }
    }
}

fn lattice(f: &GridFunction, stride: f64) -> Vec<Point> {
    let g = &f.grid;
    let mut axes: Vec<Vec<f64>> = Vec::new();
    for a in 0..g.n {
        let extent = g.dims[a] as f64 * g.h;
        let k = (extent / stride + 1e-9).floor() as usize;
        axes.push((0..=k).map(|j| g.lo[a] + j as f64 * stride).collect());
    }
    let mut out = Vec::new();
    if g.n == 2 {
        for &x in &axes[0] {
            for &y in &axes[1] {
                out.push([x, y, 0.0]);
            }
        }
    } else {
        for &x in &axes[0] {
            for &y in &axes[1] {
                for &z in &axes[2] {
                    out.push([x, y, z]);
                }
            }
        }
    }
    out
}

fn best(pre: &Prefix, dir: Point, big_n: f64, centers: impl Iterator<Item = Point>) -> Result<(f64, Point)> {
    let mut top = (0.0, [0.0; 3]);
    for c in centers {
        let t = Tube::new(pre.f.grid.n, dir, c, 1.0, big_n)?;
        let v = pre.average(&t);
        if v > top.0 {
            top = (v, c);
        }
    }
    Ok(top)
}

/// `M_N f` on the net: the largest average of `f` over `1 x .. x N` tubes
/// centred on a lattice of spacing `stride` covering the grid.
pub fn kakeya_max(f: &GridFunction, big_n: f64, net: &DirectionNet, stride: f64, seed: u64) -> Result<MaximalValues> {
    kakeya_max_with(f, big_n, net, stride, seed, &[])
}

/// As [`kakeya_max`], also trying `extra[alpha]` as centres for direction `alpha`.
pub fn kakeya_max_with(
    f: &GridFunction,
    big_n: f64,
    net: &DirectionNet,
    stride: f64,
    seed: u64,
    extra: &[Vec<Point>],
) -> Result<MaximalValues> {
    if f.grid.n != net.n {
        return Err(LabError::Mismatch(format!("grid in n={}, net in n={}", f.grid.n, net.n)));
    }
    if f.grid.h > 0.25 {
        return Err(LabError::range("grid spacing", f.grid.h, "(0, 1/4]"));
    }
    if !(stride > 0.0 && stride <= 0.5) {
        return Err(LabError::range("stride", stride, "(0, 1/2]"));
    }
    let pre = Prefix::new(f);
    let coarse = lattice(f, stride);
    let mut values = Vec::with_capacity(net.len());
    let mut centers = Vec::with_capacity(net.len());
    for (a, &dir) in net.directions.iter().enumerate() {
        let more = extra.get(a).map(|v| v.as_slice()).unwrap_or(&[]);
        let (v, c) = best(&pre, dir, big_n, coarse.iter().chain(more).copied())?;
        values.push(v);
        centers.push(c);
    }
    let fine = lattice(f, stride / 4.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = sample(&mut rng, net.len(), REFINE_CHECKS.min(net.len())).into_vec();
    let mut checks = Vec::new();
    for a in picks {
        let (v, _) = best(&pre, net.directions[a], big_n, fine.iter().copied())?;
        let v = v.max(values[a]);
        if v - values[a] > REFINE_TOLERANCE * v {
            return Err(LabError::Uncertified {
                what: "kakeya maximal function",
                detail: format!("direction {a}: {} at stride {stride}, {v} at stride {}", values[a], stride / 4.0),
            });
        }
        checks.push((a, values[a], v));
    }
    Ok(MaximalValues {
        values,
        centers,
        stride,
        checks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub r: f64,
    /// `sum_alpha c_alpha |T_alpha| avg_{T_alpha} f`.
    pub pairing: f64,
    /// `||f||_{r'}`.
    pub f_norm: f64,
    /// `||sum c_alpha chi_{T_alpha}||_r` on the grid of `f`.
    pub tube_norm: f64,
    pub pairing_holds: bool,
    /// Largest `avg_{T_alpha} f / M_N f(omega_alpha)`.
    pub worst_average_ratio: f64,
    pub averages_hold: bool,
}

impl DualityReport {
    pub fn holds(&self) -> bool {
        self.pairing_holds && self.averages_hold
    }
}

/// The Hoelder pairing behind the dual form, and `avg_T f <= M_N f` for every
/// tube of the family (unit-width families only).
pub fn maximal_duality_check(f: &GridFunction, family: &TubeFamily, r: f64, stride: f64, seed: u64) -> Result<DualityReport> {
    if (family.width - 1.0).abs() > 1e-12 {
        return Err(LabError::InvalidArgument("duality check takes unit-width tubes".into()));
    }
    if !(r >= 1.0) || r.is_infinite() {
        return Err(LabError::range("r", r, "[1, inf)"));
    }
    let g = &f.grid;
    let mut acc = vec![0.0f64; g.len()];
    let mut pairing = 0.0;
    let mut averages = Vec::with_capacity(family.len());
    for (t, &c) in family.tubes.iter().zip(&family.coefficients) {
        let mut s = 0.0;
        let count = g.raster(t, 0.0, |base, stride, k| {
            for i in 0..k {
                acc[base + i * stride] += c;
                s += f.values[base + i * stride];
            }
        });
        pairing += c * s * g.cell_volume();
        averages.push(if count > 0 { s / count as f64 } else { 0.0 });
    }
    let tube_norm = GridFunction {
        grid: g.clone(),
        values: acc,
    }
    .lr_norm(r);
    let f_norm = f.lr_norm(dual_exponent(r));
    let extra: Vec<Vec<Point>> = family.tubes.iter().map(|t| vec![t.center]).collect();
    let m = kakeya_max_with(f, family.big_n, &family.net, stride, seed, &extra)?;
    let mut worst: f64 = 0.0;
    for (avg, mv) in averages.iter().zip(&m.values) {
        if *avg > 0.0 {
            worst = worst.max(if *mv > 0.0 { avg / mv } else { f64::INFINITY });
        }
    }
    Ok(DualityReport {
        r,
        pairing,
        f_norm,
        tube_norm,
        pairing_holds: pairing <= (1.0 + DUALITY_SLACK) * f_norm * tube_norm,
        worst_average_ratio: worst,
        averages_hold: worst <= 1.0 + DUALITY_SLACK,
    })
}
