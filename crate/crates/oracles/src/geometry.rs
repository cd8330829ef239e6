//! Closed-form measures.

use std::f64::consts::PI;

/// Surface measure of a geodesic cap of radius `t` on the unit sphere in R^n.
pub fn cap_measure(n: usize, t: f64) -> f64 {
    match n {
        2 => 2.0 * t.min(PI),
        3 => 2.0 * PI * (1.0 - t.min(PI).cos()),
        _ => panic!("cap_measure: n={n}"),
    }
}

pub fn sphere_measure(n: usize) -> f64 {
    cap_measure(n, PI)
}

/// Area of the intersection of two infinitely long strips of widths `w1`, `w2`
/// crossing at angle `theta` (in (0, pi/2]).
pub fn crossing_strips_area(w1: f64, w2: f64, theta: f64) -> f64 {
    w1 * w2 / theta.sin()
}

/// `|| sum_i chi_{R_i} ||_2^2` for two `w x len` rectangles sharing a centre and
/// crossing at angle `theta`, assuming the crossing parallelogram fits inside both.
pub fn two_crossing_rectangles_l2_sq(w: f64, len: f64, theta: f64) -> f64 {
    2.0 * w * len + 2.0 * crossing_strips_area(w, w, theta)
}

/// Number of integer lattice points `k` with `| |k|/p - 1 | <= d` in the plane,
/// by direct enumeration.
pub fn shell_lattice_count_2d(p: f64, d: f64) -> usize {
    let kmax = ((1.0 + d) * p).ceil() as i64 + 1;
    let mut count = 0;
    for i in -kmax..=kmax {
        for j in -kmax..=kmax {
            let r = ((i * i + j * j) as f64).sqrt() / p;
            if (r - 1.0).abs() <= d {
                count += 1;
            }
        }
    }
    count
}

/// Whether two convex polygons (any orientation) share a point, by the
/// separating axis test over all edge normals.
pub fn convex_polygons_meet(a: &[[f64; 2]], b: &[[f64; 2]]) -> bool {
    for poly in [a, b] {
        for i in 0..poly.len() {
            let (u, v) = (poly[i], poly[(i + 1) % poly.len()]);
            let nrm = [u[1] - v[1], v[0] - u[0]];
            let proj = |p: &[[f64; 2]]| {
                p.iter()
                    .map(|q| q[0] * nrm[0] + q[1] * nrm[1])
                    .fold((f64::MAX, f64::MIN), |(lo, hi), t| (lo.min(t), hi.max(t)))
            };
            let ((alo, ahi), (blo, bhi)) = (proj(a), proj(b));
            if ahi < blo || bhi < alo {
                return false;
            }
        }
    }
    true
}

/// `x` lies in `A - B` exactly when `A` meets `B + x`.
pub fn in_difference(a: &[[f64; 2]], b: &[[f64; 2]], x: [f64; 2]) -> bool {
    let shifted: Vec<[f64; 2]> = b.iter().map(|p| [p[0] + x[0], p[1] + x[1]]).collect();
    convex_polygons_meet(a, &shifted)
}

fn inside_convex(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let k = poly.len();
    let mut sign = 0.0;
    for i in 0..k {
        let (a, b) = (poly[i], poly[(i + 1) % k]);
        let c = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        if c.abs() < 1e-14 {
            continue;
        }
        if sign == 0.0 {
            sign = c.signum();
        } else if c.signum() != sign {
            return false;
        }
    }
    true
}

fn segment_crossing(p: [f64; 2], q: [f64; 2], a: [f64; 2], b: [f64; 2]) -> Option<[f64; 2]> {
    let r = [q[0] - p[0], q[1] - p[1]];
    let s = [b[0] - a[0], b[1] - a[1]];
    let den = r[0] * s[1] - r[1] * s[0];
    if den.abs() < 1e-300 {
        return None;
    }
    let t = ((a[0] - p[0]) * s[1] - (a[1] - p[1]) * s[0]) / den;
    let u = ((a[0] - p[0]) * r[1] - (a[1] - p[1]) * r[0]) / den;
    ((0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u)).then(|| [p[0] + t * r[0], p[1] + t * r[1]])
}

/// Area of the intersection of two convex polygons: the convex hull of the
/// vertices of each inside the other together with all edge crossings.
pub fn convex_intersection_area(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    let mut pts: Vec<[f64; 2]> = Vec::new();
    pts.extend(a.iter().filter(|p| inside_convex(**p, b)));
    pts.extend(b.iter().filter(|p| inside_convex(**p, a)));
    for i in 0..a.len() {
        for j in 0..b.len() {
            if let Some(x) = segment_crossing(a[i], a[(i + 1) % a.len()], b[j], b[(j + 1) % b.len()]) {
                pts.push(x);
            }
        }
    }
    if pts.len() < 3 {
        return 0.0;
    }
    pts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let cross = |o: [f64; 2], p: [f64; 2], q: [f64; 2]| (p[0] - o[0]) * (q[1] - o[1]) - (p[1] - o[1]) * (q[0] - o[0]);
    let mut hull: Vec<[f64; 2]> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    let mut s = 0.0;
    for i in 0..hull.len() {
        let (u, v) = (hull[i], hull[(i + 1) % hull.len()]);
        s += u[0] * v[1] - u[1] * v[0];
    }
    0.5 * s.abs()
}

/// Corners of the `w x len` rectangle centred at the origin with long axis at angle `theta`.
pub fn centered_rectangle(w: f64, len: f64, theta: f64) -> Vec<[f64; 2]> {
    let (c, s) = (theta.cos(), theta.sin());
    [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
        .iter()
        .map(|&(a, b)| {
            let (x, y) = (a * len / 2.0, b * w / 2.0);
            [c * x - s * y, s * x + c * y]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measures() {
        assert!((sphere_measure(2) - 2.0 * PI).abs() < 1e-15);
        assert!((sphere_measure(3) - 4.0 * PI).abs() < 1e-14);
        assert!((two_crossing_rectangles_l2_sq(1.0, 8.0, PI / 2.0) - 18.0).abs() < 1e-12);
    }

    #[test]
    fn intersection_areas() {
        let a = centered_rectangle(1.0, 8.0, 0.0);
        let b = centered_rectangle(1.0, 8.0, PI / 2.0);
        assert!((convex_intersection_area(&a, &b) - 1.0).abs() < 1e-12);
        assert!((convex_intersection_area(&a, &a) - 8.0).abs() < 1e-12);
        let t = 0.7;
        let c = centered_rectangle(1.0, 100.0, t);
        assert!((convex_intersection_area(&centered_rectangle(1.0, 100.0, 0.0), &c) - crossing_strips_area(1.0, 1.0, t)).abs() < 1e-9);
    }

    #[test]
    fn separating_axes() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert!(in_difference(&sq, &sq, [0.9, -0.9]));
        assert!(!in_difference(&sq, &sq, [1.1, 0.0]));
        let tri = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(!in_difference(&tri, &tri, [0.6, 0.6]));
        assert!(in_difference(&tri, &tri, [0.4, 0.4]));
    }
}
