use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::sphere_caps::{cap_decompose, mem_budget, BumpProfile, CellShape};

type P2 = [f64; 2];

/// Convex hull of the annular sector `1 - delta <= r <= 1 + delta`,
/// `start <= theta <= start + len`, with `segments` chords on the outer arc.
/// Counter-clockwise.
pub fn coin_polygon(start: f64, len: f64, delta: f64, segments: usize) -> Vec<P2> {
    let (a, b) = (1.0 - delta, 1.0 + delta);
    let at = |r: f64, t: f64| [r * t.cos(), r * t.sin()];
    let mut out = vec![at(a, start)];
    for i in 0..=segments {
        out.push(at(b, start + len * i as f64 / segments as f64));
    }
    out.push(at(a, start + len));
    out
}

pub fn polygon_area(p: &[P2]) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        let (u, v) = (p[i], p[(i + 1) % p.len()]);
        s += u[0] * v[1] - u[1] * v[0];
    }
    0.5 * s
}

fn lowest(p: &[P2]) -> usize {
    (0..p.len())
        .min_by(|&i, &j| (p[i][1], p[i][0]).partial_cmp(&(p[j][1], p[j][0])).unwrap())
        .unwrap()
}

fn cross(u: P2, v: P2) -> f64 {
    u[0] * v[1] - u[1] * v[0]
}

/// Minkowski sum of two convex counter-clockwise polygons.
pub fn minkowski_sum(a: &[P2], b: &[P2]) -> Vec<P2> {
    let (ia, ib) = (lowest(a), lowest(b));
    let a: Vec<P2> = (0..a.len()).map(|k| a[(ia + k) % a.len()]).collect();
    let b: Vec<P2> = (0..b.len()).map(|k| b[(ib + k) % b.len()]).collect();
    let edge = |p: &[P2], k: usize| {
        let (u, v) = (p[k % p.len()], p[(k + 1) % p.len()]);
        [v[0] - u[0], v[1] - u[1]]
    };
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        out.push([a[i % a.len()][0] + b[j % b.len()][0], a[i % a.len()][1] + b[j % b.len()][1]]);
        let c = if i == a.len() {
            -1.0
        } else if j == b.len() {
            1.0
        } else {
            cross(edge(&a, i), edge(&b, j))
        };
        if c >= 0.0 {
            i += 1;
        }
        if c <= 0.0 {
            j += 1;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumsetReport {
    pub delta: f64,
    pub caps: usize,
    /// Ordered pairs rasterized.
    pub pairs: usize,
    /// Pairs with cyclic index gap below this are skipped.
    pub min_gap: usize,
    pub cell: f64,
    pub max_multiplicity: u32,
    /// Centre of a cell of maximal multiplicity.
    pub argmax: [f64; 2],
}

/// Largest number of differences `E_alpha - E_alpha'` (ordered pairs, cyclic
/// gap at least `min_gap`) covering a common grid cell centre, for the n = 2
/// coins at tangential scale `delta^{1/2}` and radial half-width `delta`.
pub fn sumset_multiplicity(delta: f64, min_gap: usize, cell: f64) -> Result<SumsetReport> {
    if !(delta > 0.0 && delta <= 1.0 / 16.0) {
        return Err(LabError::range("delta", delta, "(0, 1/16]"));
    }
    if min_gap == 0 {
        return Err(LabError::InvalidArgument("min_gap must be at least 1".into()));
    }
    let sys = cap_decompose(2, delta.sqrt(), BumpProfile::default())?;
    let coins: Vec<Vec<P2>> = sys
        .caps
        .iter()
        .map(|c| match c.cell {
            CellShape::Arc { start, len } => Ok(coin_polygon(start, len, delta, 4)),
            _ => Err(LabError::Mismatch("expected arc cells".into())),
        })
        .collect::<Result<_>>()?;
    let negs: Vec<Vec<P2>> = coins.iter().map(|p| p.iter().map(|v| [-v[0], -v[1]]).collect()).collect();

    let extent = 2.0 + 4.0 * delta;
    let side = (2.0 * extent / cell).ceil() as usize;
    let bytes = (side * side * 2) as u64;
    if bytes > mem_budget() {
        return Err(LabError::BudgetExceeded {
            what: "sumset raster",
            required: bytes,
            budget: mem_budget(),
        });
    }
    let mut depth = vec![0u16; side * side];
    let k = coins.len();
    let mut pairs = 0;
    for a in 0..k {
        for b in 0..k {
            let gap = a.abs_diff(b).min(k - a.abs_diff(b));
            if gap < min_gap {
                continue;
            }
            pairs += 1;
            raster(&minkowski_sum(&coins[a], &negs[b]), extent, cell, side, &mut depth);
        }
    }
    let (mut best, mut at) = (0u16, 0usize);
    for (i, &d) in depth.iter().enumerate() {
        if d > best {
            best = d;
            at = i;
        }
    }
    let centre = |i: usize| -extent + (i as f64 + 0.5) * cell;
    let (x, y) = (centre(at % side), centre(at / side));
    Ok(SumsetReport {
        delta,
        caps: k,
        pairs,
        min_gap,
        cell,
        max_multiplicity: best as u32,
        argmax: [x, y],
    })
}

/// Adds one to every cell whose centre lies in the convex polygon.
fn raster(p: &[P2], extent: f64, cell: f64, side: usize, depth: &mut [u16]) {
    let (y0, y1) = p.iter().fold((f64::MAX, f64::MIN), |(lo, hi), v| (lo.min(v[1]), hi.max(v[1])));
    let row = |y: f64| ((y + extent) / cell - 0.5).ceil().max(0.0) as usize;
    let (r0, r1) = (row(y0), row(y1).min(side));
    for r in r0..r1 {
        let y = -extent + (r as f64 + 0.5) * cell;
        let (mut xl, mut xr) = (f64::MAX, f64::MIN);
        for i in 0..p.len() {
            let (u, v) = (p[i], p[(i + 1) % p.len()]);
            if (u[1] <= y && y <= v[1]) || (v[1] <= y && y <= u[1]) {
                let x = if u[1] == v[1] {
                    xl = xl.min(u[0].min(v[0]));
                    u[0].max(v[0])
                } else {
                    u[0] + (y - u[1]) * (v[0] - u[0]) / (v[1] - u[1])
                };
                xl = xl.min(x);
                xr = xr.max(x);
            }
        }
        if xl > xr {
            continue;
        }
        let c0 = ((xl + extent) / cell - 0.5).ceil().max(0.0) as usize;
        let c1 = (((xr + extent) / cell - 0.5).floor() + 1.0).clamp(0.0, side as f64) as usize;
        for d in &mut depth[r * side + c0.min(c1)..r * side + c1] {
            *d = d.saturating_add(1);
        }
    }
}
