use crate::error::{LabError, Result};
use crate::geom::Point;
use crate::sphere_caps::mem_budget;

use super::Tube;

/// Cells of side `h` from `lo`, `dims[a]` along axis `a`; last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxGrid {
    pub n: usize,
    pub lo: Point,
    pub h: f64,
    pub dims: [usize; 3],
}

impl BoxGrid {
    /// The cube `[-radius, radius]^n`, rounded out to whole cells.
    pub fn around(n: usize, radius: f64, h: f64) -> Result<BoxGrid> {
        if n != 2 && n != 3 {
            return Err(LabError::UnsupportedDimension(n));
        }
        if !(h > 0.0 && radius > 0.0) {
            return Err(LabError::InvalidArgument(format!("grid radius {radius}, spacing {h}")));
        }
        let k = 2 * (radius / h).ceil() as usize;
        let mut lo = [0.0; 3];
        let mut dims = [1; 3];
        for a in 0..n {
            lo[a] = -(k as f64) * h / 2.0;
            dims[a] = k;
        }
        let g = BoxGrid { n, lo, h, dims };
        let bytes = g.len() as u64 * 8;
        if bytes > mem_budget() {
            return Err(LabError::BudgetExceeded {
                what: "tube grid",
                required: bytes,
                budget: mem_budget(),
            });
        }
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.dims[..self.n].iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.n as i32)
    }

    fn strides(&self) -> [usize; 3] {
        let mut s = [1usize; 3];
        for a in (0..self.n.saturating_sub(1)).rev() {
            s[a] = s[a + 1] * self.dims[a + 1];
        }
        s
    }

    pub fn center(&self, flat: usize) -> Point {
        let s = self.strides();
        let mut p = [0.0; 3];
        let mut r = flat;
        for a in 0..self.n {
            let i = r / s[a];
            r %= s[a];
            p[a] = self.lo[a] + (i as f64 + 0.5) * self.h;
        }
        p
    }

    fn index_range(&self, a: usize, lo: f64, hi: f64) -> (i64, i64) {
        let i0 = ((lo - self.lo[a]) / self.h - 0.5).ceil() as i64;
        let i1 = ((hi - self.lo[a]) / self.h - 0.5).floor() as i64;
        (i0, i1)
    }

    /// Visits the cells whose centres lie in `tube` grown by `dilate` on every
    /// side, one run per grid line along the tube's dominant axis:
    /// `visit(first_flat, stride, count)`. Returns the number of such cells
    /// including those outside the grid.
    pub fn raster(&self, tube: &Tube, dilate: f64, mut visit: impl FnMut(usize, usize, usize)) -> usize {
        let n = self.n;
        let a = (0..n)
            .max_by(|&i, &j| tube.direction[i].abs().partial_cmp(&tube.direction[j].abs()).unwrap())
            .unwrap();
        let others: Vec<usize> = (0..n).filter(|&j| j != a).collect();
        let half = tube.half_widths();
        let w: Vec<f64> = (0..tube.axes.len()).map(|k| half[k] + dilate).collect();
        let reach: Vec<f64> = (0..3)
            .map(|j| tube.axes.iter().zip(&w).map(|(u, wk)| u[j].abs() * wk).sum())
            .collect();
        let ranges: Vec<(i64, i64)> = others
            .iter()
            .map(|&j| self.index_range(j, tube.center[j] - reach[j], tube.center[j] + reach[j]))
            .collect();
        let strides = self.strides();
        let mut total = 0usize;
        let mut idx: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        if ranges.iter().any(|r| r.0 > r.1) {
            return 0;
        }
        loop {
            let (mut t0, mut t1) = (f64::MIN, f64::MAX);
            for (u, &wk) in tube.axes.iter().zip(&w) {
                let s: f64 = others
                    .iter()
                    .zip(&idx)
                    .map(|(&j, &i)| (self.lo[j] + (i as f64 + 0.5) * self.h - tube.center[j]) * u[j])
                    .sum();
                if u[a].abs() < 1e-15 {
                    if s.abs() > wk {
                        t0 = f64::MAX;
                    }
                    continue;
                }
                let (p, q) = ((-wk - s) / u[a], (wk - s) / u[a]);
                t0 = t0.max(p.min(q));
                t1 = t1.min(p.max(q));
            }
            if t0 <= t1 {
                let (i0, i1) = self.index_range(a, tube.center[a] + t0, tube.center[a] + t1);
                if i1 >= i0 {
                    total += (i1 - i0 + 1) as usize;
                    let inside = others.iter().zip(&idx).all(|(&j, &i)| i >= 0 && (i as usize) < self.dims[j]);
                    let (c0, c1) = (i0.max(0), i1.min(self.dims[a] as i64 - 1));
                    if inside && c1 >= c0 {
                        let base: usize = others.iter().zip(&idx).map(|(&j, &i)| i as usize * strides[j]).sum::<usize>()
                            + c0 as usize * strides[a];
                        visit(base, strides[a], (c1 - c0 + 1) as usize);
                    }
                }
            }
            let mut k = 0;
            loop {
                if k == idx.len() {
                    return total;
                }
                idx[k] += 1;
                if idx[k] <= ranges[k].1 {
                    break;
                }
                idx[k] = ranges[k].0;
                k += 1;
            }
        }
    }
}

/// Nonnegative samples at the cell centres of a [`BoxGrid`].
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub grid: BoxGrid,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn from_fn(grid: BoxGrid, f: impl Fn(&Point) -> f64) -> Result<GridFunction> {
        let values: Vec<f64> = (0..grid.len()).map(|i| f(&grid.center(i))).collect();
        if values.iter().any(|v| !(*v >= 0.0)) {
            return Err(LabError::InvalidArgument("grid function must be nonnegative".into()));
        }
        Ok(GridFunction { grid, values })
    }

    /// `(sum f^r h^n)^{1/r}`, the max at `r = inf`.
    pub fn lr_norm(&self, r: f64) -> f64 {
        if r.is_infinite() {
            return self.values.iter().fold(0.0, |m, v| m.max(*v));
        }
        let s: f64 = self.values.iter().map(|v| v.powf(r)).sum();
        (s * self.grid.cell_volume()).powf(1.0 / r)
    }

    /// Sum of the values over the cells in `tube`, and the cell count
    /// including cells outside the grid (where the function is zero).
    pub fn tube_sum(&self, tube: &Tube) -> (f64, usize) {
        let mut s = 0.0;
        let count = self.grid.raster(tube, 0.0, |base, stride, k| {
            for i in 0..k {
                s += self.values[base + i * stride];
            }
        });
        (s, count)
    }
}
