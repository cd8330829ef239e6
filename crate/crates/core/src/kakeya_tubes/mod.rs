//! Tubes, direction nets, the Kakeya maximal function and dual superposition norms.

mod dual;
mod maximal;
mod raster;

pub use dual::{bush_bound_check, cov_ratio, dual_norm, DualMethod, DualNorm, EXACT_MAX_TUBES};
pub use maximal::{kakeya_max, kakeya_max_with, maximal_duality_check, DualityReport, MaximalValues};
pub use raster::{BoxGrid, GridFunction};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{LabError, Result};
use crate::geom::{angle_between, dot, sub, tangent_basis, Point};
use crate::sphere_caps::sphere_cells;

/// `lambda x .. x lambda x lambda N` box with a square cross-section.
#[derive(Debug, Clone, PartialEq)]
pub struct Tube {
    pub n: usize,
    pub direction: Point,
    pub center: Point,
    pub width: f64,
    pub length: f64,
    /// `direction` followed by the cross-section axes.
    pub axes: Vec<Point>,
}

impl Tube {
    pub fn new(n: usize, direction: Point, center: Point, width: f64, length: f64) -> Result<Tube> {
        if n != 2 && n != 3 {
            return Err(LabError::UnsupportedDimension(n));
        }
        if (dot(&direction, &direction).sqrt() - 1.0).abs() > 1e-12 {
            return Err(LabError::InvalidArgument("tube direction must be a unit vector".into()));
        }
        if !(width > 0.0 && length >= width) {
            return Err(LabError::InvalidArgument(format!("tube {width} x {length}")));
        }
        let mut axes = vec![direction];
        axes.extend(tangent_basis(n, &direction));
        Ok(Tube {
            n,
            direction,
            center,
            width,
            length,
            axes,
        })
    }

    pub fn half_widths(&self) -> [f64; 3] {
        [self.length / 2.0, self.width / 2.0, self.width / 2.0]
    }

    pub fn contains(&self, x: &Point) -> bool {
        let d = sub(x, &self.center);
        let h = self.half_widths();
        self.axes.iter().zip(h).all(|(u, w)| dot(&d, u).abs() <= w)
    }

    pub fn volume(&self) -> f64 {
        self.width.powi(self.n as i32 - 1) * self.length
    }

    /// Corners of the tube (4 in the plane, 8 in space).
    pub fn corners(&self) -> Vec<Point> {
        let h = self.half_widths();
        let k = self.axes.len();
        (0..1usize << k)
            .map(|mask| {
                let mut p = self.center;
                for (a, u) in self.axes.iter().enumerate() {
                    let s = if mask >> a & 1 == 1 { h[a] } else { -h[a] };
                    for i in 0..3 {
                        p[i] += s * u[i];
                    }
                }
                p
            })
            .collect()
    }

    /// Counter-clockwise rectangle, for `n = 2`.
    pub fn polygon(&self) -> Vec<[f64; 2]> {
        let (u, v) = (self.axes[0], self.axes[1]);
        let h = self.half_widths();
        [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
            .iter()
            .map(|&(a, b)| {
                [
                    self.center[0] + a * h[0] * u[0] + b * h[1] * v[0],
                    self.center[1] + a * h[0] * u[1] + b * h[1] * v[1],
                ]
            })
            .collect()
    }
}

/// Geodesic distance between the lines spanned by `a` and `b`.
pub fn line_distance(a: &Point, b: &Point) -> f64 {
    let t = angle_between(a, b);
    t.min(PI - t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionNet {
    pub n: usize,
    pub big_n: f64,
    pub directions: Vec<Point>,
}

/// Directions modulo sign at separation about `1/N`: equally spaced on a half
/// circle for `n = 2`, upper-hemisphere centres of an equal-area partition
/// with `4 N^2` cells for `n = 3`.
pub fn direction_net(n: usize, big_n: f64) -> Result<DirectionNet> {
    if !(big_n >= 2.0) {
        return Err(LabError::range("N", big_n, "[2, inf)"));
    }
    let directions = match n {
        2 => {
            let m = (PI * big_n - 1e-9).ceil() as usize;
            (0..m)
                .map(|k| {
                    let t = PI * k as f64 / m as f64;
                    [t.cos(), t.sin(), 0.0]
                })
                .collect()
        }
        3 => {
            let m = (4.0 * big_n * big_n).ceil() as usize;
            sphere_cells(m)
                .iter()
                .map(|c| c.center())
                .filter(|p| p[2] > 1e-12 || (p[2].abs() <= 1e-12 && p[1].atan2(p[0]).rem_euclid(2.0 * PI) < PI))
                .collect()
        }
        _ => return Err(LabError::UnsupportedDimension(n)),
    };
    Ok(DirectionNet { n, big_n, directions })
}

impl DirectionNet {
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Smallest pairwise line distance, by brute force.
    pub fn min_separation(&self) -> f64 {
        let d = &self.directions;
        let mut best = f64::MAX;
        for i in 0..d.len() {
            for j in i + 1..d.len() {
                best = best.min(line_distance(&d[i], &d[j]));
            }
        }
        best
    }
}

/// One tube per net direction, with nonnegative coefficients.
#[derive(Debug, Clone)]
pub struct TubeFamily {
    pub net: DirectionNet,
    pub tubes: Vec<Tube>,
    pub coefficients: Vec<f64>,
    pub width: f64,
    pub big_n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TubeFamilyDoc {
    pub n: usize,
    pub width: f64,
    pub big_n: f64,
    pub directions: Vec<Point>,
    pub centers: Vec<Point>,
    pub coefficients: Vec<f64>,
}

impl TubeFamily {
    pub fn new(net: DirectionNet, centers: Vec<Point>, coefficients: Vec<f64>, width: f64) -> Result<TubeFamily> {
        if centers.len() != net.len() || coefficients.len() != net.len() {
            return Err(LabError::Mismatch(format!(
                "{} directions, {} centers, {} coefficients",
                net.len(),
                centers.len(),
                coefficients.len()
            )));
        }
        if coefficients.iter().any(|c| !(*c >= 0.0)) {
            return Err(LabError::InvalidArgument("coefficients must be nonnegative".into()));
        }
        let big_n = net.big_n;
        let tubes = net
            .directions
            .iter()
            .zip(&centers)
            .map(|(d, c)| Tube::new(net.n, *d, *c, width, width * big_n))
            .collect::<Result<_>>()?;
        Ok(TubeFamily {
            net,
            tubes,
            coefficients,
            width,
            big_n,
        })
    }

    pub fn n(&self) -> usize {
        self.net.n
    }

    pub fn len(&self) -> usize {
        self.tubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tubes.is_empty()
    }

    /// Same tubes, coefficients replaced.
    pub fn with_coefficients(&self, coefficients: Vec<f64>) -> Result<TubeFamily> {
        let centers = self.tubes.iter().map(|t| t.center).collect();
        TubeFamily::new(self.net.clone(), centers, coefficients, self.width)
    }

    /// Smallest ball about the origin containing every tube.
    pub fn bounding_radius(&self) -> f64 {
        self.tubes
            .iter()
            .flat_map(|t| t.corners())
            .map(|p| dot(&p, &p).sqrt())
            .fold(0.0, f64::max)
    }

    pub fn to_doc(&self) -> TubeFamilyDoc {
        TubeFamilyDoc {
            n: self.n(),
            width: self.width,
            big_n: self.big_n,
            directions: self.net.directions.clone(),
            centers: self.tubes.iter().map(|t| t.center).collect(),
            coefficients: self.coefficients.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_doc())?)
    }

    pub fn from_json(s: &str) -> Result<TubeFamily> {
        let doc: TubeFamilyDoc = serde_json::from_str(s)?;
        let net = DirectionNet {
            n: doc.n,
            big_n: doc.big_n,
            directions: doc.directions,
        };
        TubeFamily::new(net, doc.centers, doc.coefficients, doc.width)
    }
}

/// Every net direction through `center`, coefficients one.
pub fn bush(n: usize, big_n: f64, width: f64, center: Point) -> Result<TubeFamily> {
    let net = direction_net(n, big_n)?;
    let k = net.len();
    TubeFamily::new(net, vec![center; k], vec![1.0; k], width)
}

/// `r' = r / (r - 1)`, infinite at `r = 1`.
pub fn dual_exponent(r: f64) -> f64 {
    if r == 1.0 {
        f64::INFINITY
    } else {
        r / (r - 1.0)
    }
}

#[cfg(test)]
mod tests;
