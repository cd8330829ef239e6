//! Small fixed-size vector helpers. Points of R^2 carry a zero third component.

use crate::error::{LabError, Result};

pub type Point = [f64; 3];

#[inline]
pub fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: &Point, b: &Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: &Point, s: f64) -> Point {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn normalize(a: &Point) -> Point {
    let r = norm(a);
    scale(a, 1.0 / r)
}

/// Angle between two unit vectors, computed with `atan2` so that both tiny and
/// near-antipodal separations keep full precision.
#[inline]
pub fn angle_between(a: &Point, b: &Point) -> f64 {
    norm(&cross(a, b)).atan2(dot(a, b))
}

/// Geodesic distance on the unit sphere; rejects inputs that are not unit vectors.
pub fn geodesic_distance(a: &Point, b: &Point) -> Result<f64> {
    for v in [a, b] {
        let r = norm(v);
        if (r - 1.0).abs() > 1e-9 {
            return Err(LabError::InvalidArgument(format!(
                "geodesic_distance: |v| = {r}, expected a unit vector"
            )));
        }
    }
    Ok(angle_between(a, b))
}

/// Chord length corresponding to a geodesic distance.
#[inline]
pub fn chord(angle: f64) -> f64 {
    2.0 * (0.5 * angle.min(std::f64::consts::PI)).sin()
}

/// Orthonormal basis of the tangent space at unit vector `c`, `n - 1` vectors.
pub fn tangent_basis(n: usize, c: &Point) -> Vec<Point> {
    if n == 2 {
        return vec![[-c[1], c[0], 0.0]];
    }
    let helper = if c[0].abs() < 0.6 {
        [1.0, 0.0, 0.0]
    } else if c[1].abs() < 0.6 {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let e1 = normalize(&sub(&helper, &scale(c, dot(&helper, c))));
    let e2 = cross(c, &e1);
    vec![e1, e2]
}

pub fn from_spherical(theta: f64, phi: f64) -> Point {
    let s = theta.sin();
    [s * phi.cos(), s * phi.sin(), theta.cos()]
}

pub fn from_angle(theta: f64) -> Point {
    [theta.cos(), theta.sin(), 0.0]
}

pub fn rotate_2d(p: &Point, angle: f64) -> Point {
    let (s, c) = angle.sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]]
}

/// Uniform bucket grid over a bounding cube for fixed-radius neighbour queries.
#[derive(Debug, Clone)]
pub struct SpatialHash {
    cell: f64,
    dims: [usize; 3],
    origin: Point,
    starts: Vec<u32>,
    items: Vec<u32>,
}

impl SpatialHash {
    /// Buckets `points` (which lie in `[-extent, extent]^3`) into cells of side `cell`.
    pub fn new(points: &[Point], cell: f64, extent: f64) -> Self {
        let cell = cell.max(extent * 2.0 / 512.0);
        let side = ((2.0 * extent / cell).ceil() as usize).max(1);
        let mut dims = [side; 3];
        if points.iter().all(|p| p[2] == 0.0) {
            dims[2] = 1;
        }
        let origin = [-extent, -extent, if dims[2] == 1 { 0.0 } else { -extent }];
        let mut hash = SpatialHash {
            cell,
            dims,
            origin,
            starts: Vec::new(),
            items: Vec::new(),
        };
        let ncell = dims[0] * dims[1] * dims[2];
        let mut counts = vec![0u32; ncell + 1];
        let keys: Vec<usize> = points.iter().map(|p| hash.key(p)).collect();
        for &k in &keys {
            counts[k + 1] += 1;
        }
        for i in 0..ncell {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut items = vec![0u32; points.len()];
        for (i, &k) in keys.iter().enumerate() {
            items[fill[k] as usize] = i as u32;
            fill[k] += 1;
        }
        hash.starts = counts;
        hash.items = items;
        hash
    }

    fn coord(&self, p: &Point) -> [isize; 3] {
        let mut c = [0isize; 3];
        for d in 0..3 {
            if self.dims[d] == 1 {
                continue;
            }
            let v = ((p[d] - self.origin[d]) / self.cell).floor() as isize;
            c[d] = v.clamp(0, self.dims[d] as isize - 1);
        }
        c
    }

    fn key(&self, p: &Point) -> usize {
        let c = self.coord(p);
        (c[0] as usize * self.dims[1] + c[1] as usize) * self.dims[2] + c[2] as usize
    }

    /// Calls `f` with every item index whose bucket lies within `radius` (Euclidean)
    /// of `p`. Candidates are a superset; callers filter by exact distance.
    pub fn for_candidates(&self, p: &Point, radius: f64, mut f: impl FnMut(usize)) {
        let reach = (radius / self.cell).ceil() as isize;
        let c = self.coord(p);
        let mut lo = [0isize; 3];
        let mut hi = [0isize; 3];
        for d in 0..3 {
            lo[d] = (c[d] - reach).max(0);
            hi[d] = (c[d] + reach).min(self.dims[d] as isize - 1);
        }
        for i in lo[0]..=hi[0] {
            for j in lo[1]..=hi[1] {
                for k in lo[2]..=hi[2] {
                    let key = (i as usize * self.dims[1] + j as usize) * self.dims[2] + k as usize;
                    for &it in &self.items[self.starts[key] as usize..self.starts[key + 1] as usize] {
                        f(it as usize);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn geodesic_examples() {
        let e1 = [1.0, 0.0, 0.0];
        let e2 = [0.0, 1.0, 0.0];
        let m1 = [-1.0, 0.0, 0.0];
        assert_eq!(geodesic_distance(&e1, &e1).unwrap(), 0.0);
        assert!((geodesic_distance(&e1, &m1).unwrap() - PI).abs() < 1e-15);
        assert!((geodesic_distance(&e1, &e2).unwrap() - PI / 2.0).abs() < 1e-15);
        assert!(geodesic_distance(&[2.0, 0.0, 0.0], &e1).is_err());
    }

    #[test]
    fn tangent_basis_is_orthonormal() {
        for c in [[0.0, 0.0, 1.0], normalize(&[0.3, -0.8, 0.2]), [1.0, 0.0, 0.0]] {
            let b = tangent_basis(3, &c);
            assert!(dot(&b[0], &c).abs() < 1e-14);
            assert!(dot(&b[1], &c).abs() < 1e-14);
            assert!(dot(&b[0], &b[1]).abs() < 1e-14);
            assert!((norm(&b[0]) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn hash_finds_all_neighbours() {
        let pts: Vec<Point> = (0..500)
            .map(|i| from_spherical(0.013 * i as f64 % PI, 0.37 * i as f64))
            .collect();
        let h = SpatialHash::new(&pts, 0.2, 1.0);
        let q = pts[17];
        let mut found = Vec::new();
        h.for_candidates(&q, 0.2, |i| {
            if norm(&sub(&pts[i], &q)) <= 0.2 {
                found.push(i)
            }
        });
        let brute: Vec<usize> = (0..pts.len())
            .filter(|&i| norm(&sub(&pts[i], &q)) <= 0.2)
            .collect();
        found.sort();
        assert_eq!(found, brute);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;
        use std::f64::consts::PI;

        fn unit() -> impl Strategy<Value = Point> {
            (0.0..PI, 0.0..2.0 * PI).prop_map(|(t, p)| from_spherical(t, p))
        }

        proptest! {
            #[test]
            fn triangle_inequality(a in unit(), b in unit(), c in unit()) {
                let ab = geodesic_distance(&a, &b).unwrap();
                let bc = geodesic_distance(&b, &c).unwrap();
                let ac = geodesic_distance(&a, &c).unwrap();
                prop_assert!(ac <= ab + bc + 1e-12);
                prop_assert!((ab - geodesic_distance(&b, &a).unwrap()).abs() < 1e-15);
                prop_assert!((0.0..=PI).contains(&ab));
            }
        }
    }
}
