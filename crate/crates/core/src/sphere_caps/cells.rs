//! Equal-measure cells: arcs on the circle, lat-long zones on the 2-sphere.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::geom::{angle_between, from_angle, from_spherical, Point};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CellShape {
    /// Arc of the unit circle starting at angle `start`.
    Arc { start: f64, len: f64 },
    /// `theta0 <= theta <= theta1`, `phi0 <= phi < phi0 + dphi`. A zone with
    /// `theta0 == 0` (or `theta1 == pi`) and `dphi == 2 pi` is a polar cap.
    Zone {
        theta0: f64,
        theta1: f64,
        phi0: f64,
        dphi: f64,
    },
}

fn full_ring(dphi: f64) -> bool {
    dphi >= TAU - 1e-12
}

impl CellShape {
    pub fn measure(&self) -> f64 {
        match *self {
            CellShape::Arc { len, .. } => len,
            CellShape::Zone {
                theta0,
                theta1,
                dphi,
                ..
            } => dphi * (theta0.cos() - theta1.cos()),
        }
    }

    fn polar(&self) -> Option<bool> {
        match *self {
            CellShape::Zone {
                theta0,
                theta1,
                dphi,
                ..
            } if full_ring(dphi) => {
                if theta0 == 0.0 {
                    Some(true)
                } else if theta1 == PI {
                    Some(false)
                } else {
                    None
                }
            }
            _ => None,
        }
    }

    pub fn center(&self) -> Point {
        match *self {
            CellShape::Arc { start, len } => from_angle(start + 0.5 * len),
            CellShape::Zone {
                theta0,
                theta1,
                phi0,
                dphi,
            } => match self.polar() {
                Some(true) => [0.0, 0.0, 1.0],
                Some(false) => [0.0, 0.0, -1.0],
                None => {
                    let z = 0.5 * (theta0.cos() + theta1.cos());
                    from_spherical(z.clamp(-1.0, 1.0).acos(), phi0 + 0.5 * dphi)
                }
            },
        }
    }

    /// Largest geodesic distance from the centre to a point of the cell.
    pub fn covering_radius(&self) -> f64 {
        let c = self.center();
        match *self {
            CellShape::Arc { len, .. } => 0.5 * len,
            CellShape::Zone {
                theta0,
                theta1,
                phi0,
                dphi,
            } => {
                if let Some(north) = self.polar() {
                    return if north { theta1 } else { PI - theta0 };
                }
                let steps = 16;
                let mut r = 0.0f64;
                for i in 0..=steps {
                    let f = i as f64 / steps as f64;
                    let phi = phi0 + f * dphi;
                    let th = theta0 + f * (theta1 - theta0);
                    for p in [
                        from_spherical(theta0, phi),
                        from_spherical(theta1, phi),
                        from_spherical(th, phi0),
                        from_spherical(th, phi0 + dphi),
                    ] {
                        r = r.max(angle_between(&c, &p));
                    }
                }
                r
            }
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        match *self {
            CellShape::Arc { start, len } => {
                let a = (p[1].atan2(p[0]) - start).rem_euclid(TAU);
                a < len
            }
            CellShape::Zone {
                theta0,
                theta1,
                phi0,
                dphi,
            } => {
                let th = p[2].clamp(-1.0, 1.0).acos();
                if th < theta0 || th > theta1 {
                    return false;
                }
                full_ring(dphi) || (p[1].atan2(p[0]) - phi0).rem_euclid(TAU) < dphi
            }
        }
    }

    /// Splits the cell into `k` cells of equal measure nested inside it.
    pub fn split(&self, k: usize) -> Vec<CellShape> {
        assert!(k >= 1);
        if k == 1 {
            return vec![*self];
        }
        match *self {
            CellShape::Arc { start, len } => (0..k)
                .map(|j| CellShape::Arc {
                    start: start + j as f64 * len / k as f64,
                    len: len / k as f64,
                })
                .collect(),
            CellShape::Zone {
                theta0,
                theta1,
                phi0,
                dphi,
            } => match self.polar() {
                Some(north) if k >= 5 => {
                    let area = self.measure();
                    let cap_h = area / k as f64 / TAU;
                    let mut out = Vec::with_capacity(k);
                    if north {
                        let t_in = (1.0 - cap_h).clamp(-1.0, 1.0).acos();
                        out.push(CellShape::Zone {
                            theta0: 0.0,
                            theta1: t_in,
                            phi0,
                            dphi: TAU,
                        });
                        out.extend(split_band(t_in, theta1, phi0, TAU, k - 1));
                    } else {
                        let t_in = (-1.0 + cap_h).clamp(-1.0, 1.0).acos();
                        out.extend(split_band(theta0, t_in, phi0, TAU, k - 1));
                        out.push(CellShape::Zone {
                            theta0: t_in,
                            theta1: PI,
                            phi0,
                            dphi: TAU,
                        });
                    }
                    out
                }
                Some(_) => (0..k)
                    .map(|j| CellShape::Zone {
                        theta0,
                        theta1,
                        phi0: phi0 + j as f64 * TAU / k as f64,
                        dphi: TAU / k as f64,
                    })
                    .collect(),
                None => split_band(theta0, theta1, phi0, dphi, k),
            },
        }
    }
}

/// Equal-area split of a zone into rows of near-equal height, each row cut
/// into equal sectors. Row boundaries are moved so every cell has exactly
/// `area / k`.
fn split_band(theta0: f64, theta1: f64, phi0: f64, dphi: f64, k: usize) -> Vec<CellShape> {
    let area = dphi * (theta0.cos() - theta1.cos());
    let target = area / k as f64;
    let ring = full_ring(dphi);
    let min_per_row = if ring { 3.min(k) } else { 1 };
    let max_rows = (k / min_per_row).max(1);
    let rows = (((theta1 - theta0) / target.sqrt()).round() as usize).clamp(1, max_rows);

    let h = (theta1 - theta0) / rows as f64;
    let mut counts = Vec::with_capacity(rows);
    let mut carry = 0.0;
    let mut used = 0usize;
    for i in 0..rows {
        let ta = theta0 + i as f64 * h;
        let ideal = dphi * (ta.cos() - (ta + h).cos()) / target;
        let remaining_rows = rows - i - 1;
        let m = if remaining_rows == 0 {
            k - used
        } else {
            let m = (ideal + carry).round().max(min_per_row as f64) as usize;
            m.min(k - used - remaining_rows * min_per_row)
        };
        carry += ideal - m as f64;
        used += m;
        counts.push(m);
    }

    let mut out = Vec::with_capacity(k);
    let mut z = theta0.cos();
    let mut ta = theta0;
    for (i, &m) in counts.iter().enumerate() {
        let tb = if i + 1 == rows {
            theta1
        } else {
            z -= m as f64 * target / dphi;
            z.clamp(-1.0, 1.0).acos()
        };
        let w = dphi / m as f64;
        let offset = if ring && i % 2 == 1 { 0.5 * w } else { 0.0 };
        for j in 0..m {
            out.push(CellShape::Zone {
                theta0: ta,
                theta1: tb,
                phi0: phi0 + offset + j as f64 * w,
                dphi: w,
            });
        }
        ta = tb;
    }
    out
}

/// Top-level partition of S^1 into `m` equal arcs.
pub fn circle_cells(m: usize) -> Vec<CellShape> {
    CellShape::Arc { start: 0.0, len: TAU }.split(m)
}

/// Top-level equal-area zonal partition of S^2 into `m >= 3` cells: two polar
/// caps and collars cut into sectors.
pub fn sphere_cells(m: usize) -> Vec<CellShape> {
    assert!(m >= 3);
    let cap_h = 2.0 / m as f64;
    let tc = (1.0 - cap_h).acos();
    let mut out = vec![CellShape::Zone {
        theta0: 0.0,
        theta1: tc,
        phi0: 0.0,
        dphi: TAU,
    }];
    out.extend(split_band(tc, PI - tc, 0.0, TAU, m - 2));
    out.push(CellShape::Zone {
        theta0: PI - tc,
        theta1: PI,
        phi0: 0.0,
        dphi: TAU,
    });
    out
}
