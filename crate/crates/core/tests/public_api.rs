use lab_core::extension_field::{extend_nodes_at, Density};
use lab_core::kakeya_tubes::{bush, cov_ratio, DualMethod};
use lab_core::sphere_caps::{audit, cap_decompose, BumpProfile};
use lab_core::two_scale_chain::{chain_caps, counting_identity, exponent_audit};
use lab_oracles::geometry::sphere_measure;

#[test]
fn constant_density_at_origin_is_sphere_measure() {
    for (n, s) in [(2, 0.125), (3, 0.25)] {
        let sys = cap_decompose(n, s, BumpProfile::default()).unwrap();
        let g = Density::cap_constant(&sys, vec![1.0; sys.len()]).unwrap();
        let v = extend_nodes_at(&sys.quadrature, &g.node_values, &[0.0; 3]);
        assert!((v.re - sphere_measure(n)).abs() < 1e-9, "n={n}: {v}");
    }
}

#[test]
fn refined_systems_audit_clean() {
    let coarse = cap_decompose(3, 0.5, BumpProfile::default()).unwrap();
    let fine = coarse.refine(0.25).unwrap();
    let a = audit(&fine, 2000, 1).unwrap();
    assert!(a.passes(), "{:?}", a.failures());
    let parents = fine.parent_map.as_ref().unwrap();
    assert_eq!(parents.len(), fine.len());
    assert!(parents.iter().all(|&p| p < coarse.len()));
}

#[test]
fn counting_with_unit_coefficients() {
    let caps = chain_caps(2, 1.0 / 16.0).unwrap();
    let fine = caps.refine(1.0 / 16.0).unwrap();
    let rep = counting_identity(&vec![1.0; caps.len()], &fine, 1.0 / 16.0).unwrap();
    assert_eq!(rep.residual, 0.0);
    assert_eq!(rep.min_children, rep.max_children);
}

#[test]
fn bush_ratio_grows_and_exponents_close() {
    let small = cov_ratio(&bush(2, 16.0, 1.0, [0.0; 3]).unwrap(), 2.0, DualMethod::Auto).unwrap();
    let large = cov_ratio(&bush(2, 128.0, 1.0, [0.0; 3]).unwrap(), 2.0, DualMethod::Auto).unwrap();
    assert!(large.ratio > small.ratio);
    for n in 2..=5 {
        assert!(exponent_audit(n).unwrap().holds);
    }
}
