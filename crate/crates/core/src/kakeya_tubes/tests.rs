use super::*;
use lab_oracles::geometry::{centered_rectangle, convex_intersection_area};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sphere_caps::random_unit;

const O: Point = [0.0, 0.0, 0.0];

#[test]
fn nets() {
    assert_eq!(direction_net(2, 4.0).unwrap().len(), 13);
    for n_big in [4.0, 8.0, 32.0] {
        let net = direction_net(2, n_big).unwrap();
        assert!(net.min_separation() >= 1.0 / (2.0 * n_big));
    }
    for n_big in [4.0, 8.0] {
        let net = direction_net(3, n_big).unwrap();
        let k = net.len() as f64;
        assert!(k >= n_big * n_big / 4.0 && k <= 4.0 * n_big * n_big, "{k}");
        assert!(net.min_separation() >= 1.0 / (2.0 * n_big), "{}", net.min_separation());
        assert!(net.directions.iter().all(|d| d[2] >= -1e-12));
    }
    assert!(direction_net(2, 1.0).is_err());
    assert!(direction_net(4, 8.0).is_err());
}

#[test]
fn tube_membership_and_raster_volume() {
    let t = Tube::new(2, [0.6, 0.8, 0.0], [1.0, 2.0, 0.0], 1.0, 8.0).unwrap();
    assert!(t.contains(&[1.0 + 3.9 * 0.6, 2.0 + 3.9 * 0.8, 0.0]));
    assert!(!t.contains(&[1.0 + 4.1 * 0.6, 2.0 + 4.1 * 0.8, 0.0]));
    assert!(t.contains(&[1.0 - 0.49 * 0.8, 2.0 + 0.49 * 0.6, 0.0]));
    assert!(!t.contains(&[1.0 - 0.51 * 0.8, 2.0 + 0.51 * 0.6, 0.0]));
    assert_eq!(t.volume(), 8.0);
    assert!(Tube::new(2, [1.0, 1.0, 0.0], O, 1.0, 8.0).is_err());

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for n in [2, 3] {
        for _ in 0..5 {
            let (w, big_n) = (0.5 + rng.gen::<f64>(), 8.0);
            let c = [rng.gen::<f64>(), rng.gen::<f64>(), if n == 3 { rng.gen::<f64>() } else { 0.0 }];
            let t = Tube::new(n, random_unit(n, &mut rng), c, w, w * big_n).unwrap();
            let grid = BoxGrid::around(n, w * big_n, w / 8.0).unwrap();
            let mut cells = 0;
            let count = grid.raster(&t, 0.0, |base, stride, k| {
                for i in 0..k {
                    assert!(t.contains(&grid.center(base + i * stride)));
                }
                cells += k;
            });
            assert_eq!(cells, count);
            let vol = count as f64 * grid.cell_volume();
            assert!((vol / t.volume() - 1.0).abs() < 0.05, "n={n}: {vol} vs {}", t.volume());
        }
    }
}

fn single(dirs: &[f64], centers: Vec<Point>, coeffs: Vec<f64>, big_n: f64) -> TubeFamily {
    let net = DirectionNet {
        n: 2,
        big_n,
        directions: dirs.iter().map(|t| [t.cos(), t.sin(), 0.0]).collect(),
    };
    TubeFamily::new(net, centers, coeffs, 1.0).unwrap()
}

#[test]
fn dual_norm_examples() {
    let one = single(&[0.3], vec![O], vec![1.0], 8.0);
    let exact = dual_norm(&one, 2.0, DualMethod::Exact).unwrap();
    assert!((exact.value - 8f64.sqrt()).abs() < 1e-12);
    let grid = dual_norm(&one, 2.0, DualMethod::Grid).unwrap();
    assert!((grid.value / 8f64.sqrt() - 1.0).abs() < 0.02, "{}", grid.value);

    let cross = single(&[0.0, std::f64::consts::FRAC_PI_2], vec![O, O], vec![1.0, 1.0], 8.0);
    let exact = dual_norm(&cross, 2.0, DualMethod::Exact).unwrap();
    assert!((exact.value - 18f64.sqrt()).abs() < 1e-12);
    let grid = dual_norm(&cross, 2.0, DualMethod::Grid).unwrap();
    assert!((grid.value / 18f64.sqrt() - 1.0).abs() < 0.03);

    let scaled = cross.with_coefficients(vec![3.0, 3.0]).unwrap();
    let g3 = dual_norm(&scaled, 2.0, DualMethod::Grid).unwrap();
    assert!((g3.value - 3.0 * grid.value).abs() < 1e-12 * g3.value);
    let r3 = dual_norm(&scaled, 1.5, DualMethod::Grid).unwrap().value;
    let r1 = dual_norm(&cross, 1.5, DualMethod::Grid).unwrap().value;
    assert!((r3 - 3.0 * r1).abs() < 1e-12 * r3);

    assert!(dual_norm(&cross, 0.5, DualMethod::Grid).is_err());
    assert!(dual_norm(&cross, 3.0, DualMethod::Exact).is_err());
}

#[test]
fn exact_overlaps_match_oracle() {
    let fam = bush(2, 2.0, 1.0, O).unwrap();
    assert_eq!(fam.len(), 7);
    let angles: Vec<f64> = fam.net.directions.iter().map(|d| d[1].atan2(d[0])).collect();
    let mut s = 0.0;
    for &a in &angles {
        for &b in &angles {
            s += convex_intersection_area(&centered_rectangle(1.0, 2.0, a), &centered_rectangle(1.0, 2.0, b));
        }
    }
    let exact = dual_norm(&fam, 2.0, DualMethod::Exact).unwrap().value;
    assert!((exact - s.sqrt()).abs() < 1e-12, "{exact} vs {}", s.sqrt());
    let grid = dual_norm(&fam, 2.0, DualMethod::Grid).unwrap().value;
    assert!((grid / exact - 1.0).abs() < 0.03);
    let rep = bush_bound_check(&fam, DualMethod::Exact).unwrap();
    assert!(rep.ratio.is_finite() && rep.ratio > 0.0);
}

#[test]
fn cov_ratio_cases() {
    let one = single(&[1.0], vec![[2.0, -1.0, 0.0]], vec![1.0], 16.0);
    let r = cov_ratio(&one, 2.0, DualMethod::Exact).unwrap();
    assert!((r.ratio - 1.0).abs() < 1e-12);

    // Parallel-ish tubes spread far apart.
    let dirs = [0.0, 0.1, 0.2, 0.3];
    let centers = (0..4).map(|i| [0.0, 20.0 * i as f64, 0.0]).collect();
    let spread = single(&dirs, centers, vec![1.0, 2.0, 0.5, 1.0], 8.0);
    let r = cov_ratio(&spread, 2.0, DualMethod::Exact).unwrap();
    assert!((r.ratio - 1.0).abs() < 1e-12);
    let r = cov_ratio(&spread, 2.0, DualMethod::Grid).unwrap();
    assert!((r.ratio - 1.0).abs() < 0.03);
    assert_eq!(r.big_r, Some(8.0));

    // Coefficients on one tube of a bush.
    let b = bush(2, 16.0, 1.0, O).unwrap();
    let mut c = vec![0.0; b.len()];
    c[5] = 1.0;
    let r = bush_bound_check(&b.with_coefficients(c).unwrap(), DualMethod::Exact).unwrap();
    assert!((r.ratio - 16f64.ln().powf(-0.5)).abs() < 1e-12);
}

#[test]
fn bush_geometry() {
    let b = bush(2, 4.0, 1.0, [0.5, 0.25, 0.0]).unwrap();
    assert_eq!(b.len(), 13);
    assert!(b.tubes.iter().all(|t| t.contains(&[0.5, 0.25, 0.0])));
    assert_eq!(b.tubes.iter().filter(|t| t.contains(&[0.5, 0.25, 0.0])).count(), 13);
    let b3 = bush(3, 4.0, 1.0, O).unwrap();
    assert_eq!(b3.len(), b3.net.len());
    assert!(b3.tubes.iter().all(|t| t.contains(&O)));
}

#[test]
fn bush_profile_decay() {
    for (n, big_n) in [(2, 64.0), (3, 16.0)] {
        let b = bush(n, big_n, 1.0, O).unwrap();
        let grid = BoxGrid::around(n, big_n / 2.0 + 1.0, 0.125).unwrap();
        let mut acc = vec![0.0f64; grid.len()];
        for t in &b.tubes {
            grid.raster(t, 0.0, |base, stride, k| {
                for i in 0..k {
                    acc[base + i * stride] += 1.0;
                }
            });
        }
        let bins = 12;
        let (lo, hi) = (2.0f64, big_n / 2.0);
        let mut sum = vec![0.0; bins];
        let mut cnt = vec![0.0; bins];
        for (flat, v) in acc.iter().enumerate() {
            let x = grid.center(flat);
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            if r >= lo && r < hi {
                let k = ((r / lo).ln() / (hi / lo).ln() * bins as f64) as usize;
                sum[k] += v;
                cnt[k] += 1.0;
            }
        }
        let pts: Vec<(f64, f64)> = (0..bins)
            .map(|k| {
                let r = lo * (hi / lo).powf((k as f64 + 0.5) / bins as f64);
                (r.ln(), (sum[k] / cnt[k]).ln())
            })
            .collect();
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / bins as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / bins as f64;
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!((-slope - (n as f64 - 1.0)).abs() <= 0.3, "n={n}: slope {slope}");
    }
}

#[test]
fn monte_carlo_agrees_with_grid() {
    for (n, big_n, r) in [(2, 16.0, 2.0), (3, 4.0, 1.5)] {
        let b = bush(n, big_n, 1.0, O).unwrap();
        let g = dual_norm(&b, r, DualMethod::Grid).unwrap();
        let mc = dual_norm(&b, r, DualMethod::MonteCarlo { seed: 9 }).unwrap();
        assert!(mc.stderr <= 0.02 * mc.value);
        assert!((mc.value - g.value).abs() <= 3.0 * mc.stderr, "n={n}: {} vs {} +- {}", g.value, mc.value, mc.stderr);
        let again = dual_norm(&b, r, DualMethod::MonteCarlo { seed: 9 }).unwrap();
        assert_eq!(again, mc);
    }
}

fn disc_grid(big_n: f64, h: f64, f: impl Fn(&Point) -> f64) -> GridFunction {
    GridFunction::from_fn(BoxGrid::around(2, big_n / 2.0 + 2.0, h).unwrap(), f).unwrap()
}

#[test]
fn maximal_function() {
    let big_n = 8.0;
    let net = direction_net(2, big_n).unwrap();
    let ones = disc_grid(big_n, 0.25, |_| 1.0);
    let m = kakeya_max(&ones, big_n, &net, 0.5, 1).unwrap();
    assert!(m.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
    assert_eq!(m.checks.len(), 5);

    let zero = disc_grid(big_n, 0.25, |_| 0.0);
    assert!(kakeya_max(&zero, big_n, &net, 0.5, 1).unwrap().values.iter().all(|v| *v == 0.0));

    let disc = disc_grid(big_n, 1.0 / 16.0, |x| if x[0] * x[0] + x[1] * x[1] <= 0.25 { 1.0 } else { 0.0 });
    let m = kakeya_max(&disc, big_n, &net, 0.5, 2).unwrap();
    let expect = std::f64::consts::PI / 4.0 / big_n;
    for v in &m.values {
        assert!((v / expect - 1.0).abs() < 0.05, "{v} vs {expect}");
    }

    // Homogeneous and monotone.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let vals: Vec<f64> = (0..ones.values.len()).map(|_| rng.gen::<f64>()).collect();
    let f = GridFunction { grid: ones.grid.clone(), values: vals.clone() };
    let f2 = GridFunction { grid: ones.grid.clone(), values: vals.iter().map(|v| 2.0 * v).collect() };
    let g = GridFunction { grid: ones.grid.clone(), values: vals.iter().map(|v| v + 0.1).collect() };
    let (mf, mf2, mg) = (
        kakeya_max(&f, big_n, &net, 0.5, 3).unwrap(),
        kakeya_max(&f2, big_n, &net, 0.5, 3).unwrap(),
        kakeya_max(&g, big_n, &net, 0.5, 3).unwrap(),
    );
    for i in 0..net.len() {
        assert_eq!(mf2.values[i], 2.0 * mf.values[i]);
        assert!(mg.values[i] >= mf.values[i]);
    }

    assert!(kakeya_max(&ones, big_n, &net, 0.75, 1).is_err());
    let coarse = GridFunction::from_fn(BoxGrid::around(2, 6.0, 0.5).unwrap(), |_| 1.0).unwrap();
    assert!(kakeya_max(&coarse, big_n, &net, 0.5, 1).is_err());
}

#[test]
fn duality_pairing() {
    let big_n = 8.0;
    let net = direction_net(2, big_n).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let centers: Vec<Point> = (0..net.len()).map(|_| [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), 0.0]).collect();
    let coeffs: Vec<f64> = (0..net.len()).map(|_| rng.gen::<f64>()).collect();
    let fam = TubeFamily::new(net, centers, coeffs, 1.0).unwrap();
    let f = disc_grid(big_n, 0.25, |x| (x[0] * 0.7).sin().abs() + 0.1 * x[1].abs());
    for r in [1.5, 2.0, 3.0] {
        let rep = maximal_duality_check(&f, &fam, r, 0.5, 7).unwrap();
        assert!(rep.holds(), "{rep:?}");
        assert!(rep.pairing > 0.0);
    }
    let zero = disc_grid(big_n, 0.25, |_| 0.0);
    let rep = maximal_duality_check(&zero, &fam, 2.0, 0.5, 7).unwrap();
    assert_eq!(rep.pairing, 0.0);
    assert!(rep.holds());

    // f = 1 on the support: equality when the superposition is constant there.
    let lone = single(&[0.3], vec![O], vec![1.0], big_n);
    let cross = single(&[0.3, 1.9], vec![O, O], vec![1.0, 1.0], big_n);
    for (fam, equal) in [(&lone, true), (&cross, false)] {
        let f = disc_grid(big_n, 0.25, |x| if fam.tubes.iter().any(|t| t.contains(x)) { 1.0 } else { 0.0 });
        let rep = maximal_duality_check(&f, fam, 2.0, 0.5, 7).unwrap();
        let gap = rep.f_norm * rep.tube_norm - rep.pairing;
        assert!(rep.holds());
        assert_eq!(gap.abs() < 1e-9 * rep.pairing, equal, "{rep:?}");
    }
}

#[test]
fn family_json() {
    let b = bush(3, 4.0, 1.0, [1.0, 0.0, 0.5]).unwrap();
    let s = b.to_json().unwrap();
    let back = TubeFamily::from_json(&s).unwrap();
    assert_eq!(back.to_doc(), b.to_doc());
    let bad = s.replacen("{", "{\"extra\":1,", 1);
    assert!(TubeFamily::from_json(&bad).is_err());
}
