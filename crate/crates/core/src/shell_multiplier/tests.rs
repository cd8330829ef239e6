use super::*;
use lab_oracles::geometry::{in_difference, shell_lattice_count_2d};
use num_complex::Complex64;
use rand::SeedableRng;

fn c0() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn max_diff(a: &PeriodicField, b: &PeriodicField) -> f64 {
    a.values.iter().zip(&b.values).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

#[test]
fn geometry_and_lattice() {
    let f = PeriodicField::for_shell(2, 1.0 / 8.0, 8.0).unwrap();
    assert_eq!(f.side, 64.0);
    assert!(f.m % 2 == 0 && (f.m / 2) as f64 / f.side > 1.125);
    assert_eq!(f.frequency(1), [0.0, 1.0 / 64.0, 0.0]);
    assert_eq!(f.frequency(f.m - 1), [0.0, -1.0 / 64.0, 0.0]);
    assert_eq!(f.position(f.m), [f.spacing(), 0.0, 0.0]);

    let pieces = ShellPieces::new(&f, 1.0 / 8.0, ShellProfile::default()).unwrap();
    // Open shell `||xi| - 1| < delta` vs the closed count; boundary points carry Phi = 0.
    let closed = shell_lattice_count_2d(64.0, 1.0 / 8.0);
    assert!(pieces.entries.len() <= closed && pieces.entries.len() + 16 >= closed);

    assert!(PeriodicField::zeros(4, 1.0, 8).is_err());
    assert!(PeriodicField::zeros(2, 1.0, 7).is_err());
    let coarse = PeriodicField::for_shell(2, 1.0 / 8.0, 4.0).unwrap();
    assert!(apply_sdelta(&coarse, 1.0 / 8.0, ShellProfile::default()).is_err());
}

#[test]
fn modes() {
    let p = ShellProfile::default();
    let f = PeriodicField::for_shell(2, 1.0 / 8.0, 8.0).unwrap();
    let on = PeriodicField::mode(2, f.side, f.m, [64, 0, 0]).unwrap();
    let out = apply_sdelta(&on, 1.0 / 8.0, p).unwrap();
    assert!(max_diff(&on, &out) < 1e-12);
    assert!((on.values[f.m] - Complex64::from_polar(1.0, std::f64::consts::TAU * f.spacing())).norm() < 1e-12);

    let off = PeriodicField::mode(2, 64.0, 400, [192, 0, 0]).unwrap();
    let out = apply_sdelta(&off, 1.0 / 8.0, p).unwrap();
    assert!(out.values.iter().all(|v| v.norm() < 1e-12));

    // A mode at the centre of a cap passes that cap alone.
    let delta = 1.0 / 16.0;
    let f = PeriodicField::for_shell(2, delta, 8.0).unwrap();
    let caps = cap_decompose(2, delta.sqrt(), BumpProfile::default()).unwrap();
    let c = caps.caps[0].center;
    let caps = caps.rotated(-c[1].atan2(c[0])).unwrap();
    let k = f.side as i64;
    let g = PeriodicField::mode(2, f.side, f.m, [k, 0, 0]).unwrap();
    let own = apply_cap_multiplier(&g, &caps, 0, delta, p).unwrap();
    assert!(max_diff(&own, &g) < 1e-12);
    for alpha in 1..caps.len() {
        let other = apply_cap_multiplier(&g, &caps, alpha, delta, p).unwrap();
        assert!(other.values.iter().all(|v| v.norm() < 1e-12), "cap {alpha}");
    }
}

fn random_field(n: usize, side: f64, m: usize, seed: u64) -> PeriodicField {
    let mut f = PeriodicField::zeros(n, side, m).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for v in &mut f.values {
        *v = Complex64::new(gauss(&mut rng), gauss(&mut rng));
    }
    f
}

#[test]
fn parseval_against_frequency_recomputation() {
    let delta = 1.0 / 16.0;
    let base = PeriodicField::for_shell(2, delta, 8.0).unwrap();
    let f = random_field(2, base.side, base.m, 3);
    let p = ShellProfile::default();
    let out = apply_sdelta(&f, delta, p).unwrap();
    assert!(out.lq_norm(2.0, None) <= p.max() * f.lq_norm(2.0, None));

    // sum_j |S f(x_j)|^2 h^2 = h^2 / m^2 sum_k |Phi_k F_k|^2
    let spec = f.spectrum();
    let mut s = 0.0;
    for (flat, v) in spec.iter().enumerate() {
        let xi = f.frequency(flat);
        let r = xi[0].hypot(xi[1]);
        let w = if ((r - 1.0) / delta).abs() < 1.0 {
            (1.0 - 1.0 / (1.0 - ((r - 1.0) / delta).powi(2))).exp()
        } else {
            0.0
        };
        s += (v * w).norm_sqr();
    }
    let h = f.spacing();
    let oracle = (s * h * h / f.len() as f64).sqrt();
    assert!((out.lq_norm(2.0, None) / oracle - 1.0).abs() < 1e-12);
}

#[test]
fn caps_reconstruct_sdelta() {
    for (n, delta) in [(2, 1.0 / 32.0), (3, 1.0 / 4.0)] {
        let f = PeriodicField::random_shell(n, delta, 8.0, 5).unwrap();
        let p = ShellProfile::default();
        let pieces = ShellPieces::new(&f, delta, p).unwrap();
        let spec = f.spectrum();
        let mut sum = vec![c0(); f.len()];
        let mut buf = Vec::new();
        for alpha in 0..pieces.caps.len() {
            pieces.cap_spectrum(&spec, alpha, &mut buf);
            for (s, b) in sum.iter_mut().zip(&buf) {
                *s += b;
            }
        }
        let mut a = f.clone();
        a.set_from_spectrum(sum);
        let b = apply_sdelta(&f, delta, p).unwrap();
        let scale = b.values.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        assert!(max_diff(&a, &b) <= 1e-10 * scale.max(1.0), "n={n}");

        if n == 2 {
            // The table-driven piece matches the standalone multiplier.
            let mut one = f.clone();
            pieces.cap_spectrum(&spec, 3, &mut buf);
            one.set_from_spectrum(buf.clone());
            let direct = apply_cap_multiplier(&f, &pieces.caps, 3, delta, p).unwrap();
            assert!(max_diff(&one, &direct) < 1e-12 * scale.max(1.0));
        }
    }
}

#[test]
fn pythagoras_and_plancherel_ratio() {
    let delta = 1.0 / 32.0;
    let f = PeriodicField::random_shell(2, delta, 8.0, 7).unwrap();
    let pieces = ShellPieces::new(&f, delta, ShellProfile::default()).unwrap();
    let spec = f.spectrum();
    let whole: f64 = pieces.entries.iter().map(|&(k, w)| (spec[k] * w).norm_sqr()).sum();
    let mut parts = 0.0;
    for caps in &pieces.per_cap {
        for &(e, v) in caps {
            let (k, w) = pieces.entries[e as usize];
            parts += (spec[k] * w * v).norm_sqr();
        }
    }
    let ratio = whole / parts;
    assert!((0.5..=2.0).contains(&ratio), "{ratio}");

    let rep = rlp_multiplier_ratio(&f, delta, 2.0, false).unwrap();
    assert!((rep.ratio - ratio.sqrt()).abs() < 1e-10, "{} vs {}", rep.ratio, ratio.sqrt());
    assert!(rep.ratio <= 1.5);
}

#[test]
fn single_cap_ratios_are_one() {
    let delta = 1.0 / 32.0;
    let mut f = PeriodicField::for_shell(2, delta, 8.0).unwrap();
    let caps = cap_decompose(2, delta.sqrt(), BumpProfile::default()).unwrap();
    let c = caps.caps[2].center;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let mut spec = vec![c0(); f.len()];
    for (flat, s) in spec.iter_mut().enumerate() {
        let xi = f.frequency(flat);
        let r = xi[0].hypot(xi[1]);
        let ang = ((xi[0] * c[0] + xi[1] * c[1]) / r).clamp(-1.0, 1.0).acos();
        if (r - 1.0).abs() <= delta / 2.0 && ang < 0.2 * delta.sqrt() {
            *s = Complex64::new(gauss(&mut rng), gauss(&mut rng));
        }
    }
    f.set_from_spectrum(spec);
    for q in [2.0, 4.0, 6.0] {
        let r = rlp_multiplier_ratio(&f, delta, q, false).unwrap();
        assert!((r.ratio - 1.0).abs() < 1e-10, "q={q}: {}", r.ratio);
    }
    for (q, r) in [(4.0, None), (8.0, None), (f64::INFINITY, None), (3.0, Some(1.0))] {
        let rep = decoupling_ratio(&f, delta, q, r).unwrap();
        assert!((rep.ratio - 1.0).abs() < 1e-10, "q={q}: {}", rep.ratio);
    }
}

#[test]
fn random_shell_ratios() {
    let delta = 1.0 / 32.0;
    let f = PeriodicField::random_shell(2, delta, 8.0, 11).unwrap();
    let rlp = rlp_multiplier_ratio(&f, delta, 4.0, false).unwrap();
    assert!(rlp.ratio <= 10.0 && rlp.ratio > 0.5, "{}", rlp.ratio);
    assert_eq!(rlp.seed, Some(11));
    let local = rlp_multiplier_ratio(&f, delta, 4.0, true).unwrap();
    assert!(local.ratio <= 10.0 && local.lhs < rlp.lhs);

    let two = decoupling_ratio(&f, delta, 2.0, Some(2.0)).unwrap();
    let rlp2 = rlp_multiplier_ratio(&f, delta, 2.0, false).unwrap();
    assert!((two.ratio - rlp2.ratio).abs() < 1e-14);

    assert!((default_r(2, 8.0) - 4.0 / 3.0).abs() < 1e-15);
    assert_eq!(default_r(2, 4.0), 2.0);
    assert_eq!(default_r(3, 3.0), 2.0);
    assert_eq!(default_r(2, f64::INFINITY), 1.0);

    // l^r nesting: smaller r, larger rhs.
    let rhs: Vec<f64> = [1.0, 4.0 / 3.0, 2.0]
        .iter()
        .map(|&r| decoupling_ratio(&f, delta, 8.0, Some(r)).unwrap().rhs)
        .collect();
    assert!(rhs[0] >= rhs[1] && rhs[1] >= rhs[2], "{rhs:?}");
    let inf = decoupling_ratio(&f, delta, f64::INFINITY, None).unwrap();
    assert_eq!(inf.r, Some(1.0));
    assert!(inf.ratio <= 1.0 + 1e-12);

    assert!(decoupling_ratio(&f, delta, 1.5, None).is_err());
    assert!(decoupling_ratio(&f, delta, 4.0, Some(0.5)).is_err());
    let small = PeriodicField::random_shell(2, delta, 8.0, 1).unwrap();
    assert!(rlp_multiplier_ratio(&small, delta / 2.0, 4.0, false).is_err());
}

#[test]
fn kernel_is_localised() {
    let tail = kernel_tail_fraction(2, 1.0 / 16.0, 20.0, 8.0).unwrap();
    assert!(tail <= 0.1, "{tail}");
    assert!(kernel_tail_fraction(2, 1.0 / 16.0, 8.0, 8.0).is_err());
}

#[test]
fn pgm_dump() {
    let f = PeriodicField::random_shell(2, 1.0 / 8.0, 8.0, 2).unwrap();
    let dir = std::env::temp_dir().join(format!("lab-pgm-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("s.pgm");
    f.write_pgm(&path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let header = format!("P5\n{} {}\n255\n", f.m, f.m);
    assert!(bytes.starts_with(header.as_bytes()));
    assert_eq!(bytes.len(), header.len() + f.m * f.m);
    assert_eq!(bytes[header.len()..].iter().max(), Some(&255));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn minkowski_sums() {
    let tri = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let neg: Vec<[f64; 2]> = tri.iter().map(|p| [-p[0], -p[1]]).collect();
    let hex = minkowski_sum(&tri, &neg);
    assert_eq!(hex.len(), 6);
    assert!((polygon_area(&hex) - 3.0).abs() < 1e-12);
    let a = vec![[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [0.0, 1.0]];
    let b = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    assert!((polygon_area(&minkowski_sum(&a, &b)) - 6.0).abs() < 1e-12);

    // Sector, plus the inner circular segment, minus four outer ones.
    let (t, d) = (0.25f64, 1.0 / 16.0);
    let seg = |r: f64, a: f64| 0.5 * r * r * (a - a.sin());
    let coin = coin_polygon(0.3, t, d, 4);
    let area = 0.5 * t * ((1.0 + d).powi(2) - (1.0 - d).powi(2)) + seg(1.0 - d, t) - 4.0 * seg(1.0 + d, t / 4.0);
    assert!((polygon_area(&coin) - area).abs() < 1e-14);
}

#[test]
fn sumset_depth() {
    let delta = 1.0 / 64.0;
    let r = sumset_multiplicity(delta, 2, delta / 2.0).unwrap();
    assert_eq!(r.caps, 51);
    assert_eq!(r.pairs, 51 * 48);
    assert_eq!(r.max_multiplicity, 13);

    // Recount at the deepest cell with separating axes.
    let sys = cap_decompose(2, delta.sqrt(), BumpProfile::default()).unwrap();
    let coins: Vec<Vec<[f64; 2]>> = sys
        .caps
        .iter()
        .map(|c| match c.cell {
            crate::sphere_caps::CellShape::Arc { start, len } => coin_polygon(start, len, delta, 4),
            _ => unreachable!(),
        })
        .collect();
    let k = coins.len();
    let mut count = 0;
    for a in 0..k {
        for b in 0..k {
            let gap = a.abs_diff(b).min(k - a.abs_diff(b));
            if gap >= 2 && in_difference(&coins[a], &coins[b], r.argmax) {
                count += 1;
            }
        }
    }
    assert_eq!(count, 13);

    // Adjacent pairs all meet at the origin.
    let all = sumset_multiplicity(delta, 1, delta / 2.0).unwrap();
    assert_eq!(all.max_multiplicity as usize, k);
}
