use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{LabError, Result};
use crate::extension_field::{critical_q, lq_estimate, Density, DirectEngine, NormMethod, NormPolicy, SamplePlan};
use crate::geom::{dot, norm, tangent_basis, Point};
use crate::kakeya_tubes::{Tube, TubeFamily};
use crate::sphere_caps::CapSystem;

use super::{build_test_density, cap_family, chain_caps, SignVector};

const BOOTSTRAP_RESAMPLES: usize = 2000;
const INTERIOR_BUMP: f64 = 0.9;

#[inline]
fn phase(t: f64) -> Complex64 {
    let (s, c) = (TAU * (t - t.round())).sin_cos();
    Complex64::new(c, s)
}

fn uncertified(have: f64, need: f64) -> LabError {
    LabError::Uncertified {
        what: "quadrature",
        detail: format!("certified to {have} but evaluation reaches {need}"),
    }
}

/// Weights `w_j phi_a(xi_j)` and nodes of one cap.
fn cap_weights(caps: &CapSystem, alpha: usize) -> (Vec<Point>, Vec<f64>) {
    let (js, phis) = caps.cap_nodes.row(alpha);
    js.iter()
        .zip(phis)
        .map(|(&j, &phi)| (caps.quadrature.nodes[j as usize], phi * caps.quadrature.weights[j as usize]))
        .unzip()
}

fn eval_weights(nodes: &[Point], weights: &[f64], y: &Point) -> Complex64 {
    nodes.iter().zip(weights).map(|(p, w)| *w * phase(-dot(y, p))).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FtBound {
    pub alpha: usize,
    /// `min |(e^{2 pi i lambda . xi} phi_a dsigma)^| / delta^{(n-1)/2}` over the box.
    pub c_ft: f64,
    /// Same ratio at the tube centre.
    pub center_ratio: f64,
    /// Offset of the minimiser from the tube centre.
    pub argmin: Point,
    pub points: usize,
}

/// Minimum of the modulated piece over the central box of `tube` scaled by
/// `fraction` (1/2 for the middle half), on `per_axis` points per axis. The
/// modulus depends only on `x - lambda`, so the piece is evaluated at the
/// offset from the tube centre.
pub fn ft_lower_bound(
    caps: &CapSystem,
    alpha: usize,
    tube: &Tube,
    delta: f64,
    fraction: f64,
    per_axis: usize,
) -> Result<FtBound> {
    if alpha >= caps.len() {
        return Err(LabError::range("cap", alpha as f64, format!("[0, {})", caps.len())));
    }
    if !(fraction > 0.0 && fraction <= 1.0) || per_axis < 2 {
        return Err(LabError::InvalidArgument(format!("box fraction {fraction}, {per_axis} points per axis")));
    }
    let half: Vec<f64> = tube.half_widths()[..caps.n].iter().map(|h| h * fraction).collect();
    let reach = half.iter().map(|h| h * h).sum::<f64>().sqrt();
    if caps.quadrature.max_frequency + 1e-9 < reach {
        return Err(uncertified(caps.quadrature.max_frequency, reach));
    }
    let (nodes, weights) = cap_weights(caps, alpha);
    let norm_pow = delta.powf((caps.n as f64 - 1.0) / 2.0);
    let steps: Vec<f64> = (0..per_axis)
        .map(|i| -1.0 + 2.0 * i as f64 / (per_axis - 1) as f64)
        .collect();
    let mut best = (f64::INFINITY, [0.0; 3]);
    let mut idx = vec![0usize; caps.n];
    let mut points = 0;
    loop {
        let mut y = [0.0; 3];
        for (k, &i) in idx.iter().enumerate() {
            for c in 0..3 {
                y[c] += steps[i] * half[k] * tube.axes[k][c];
            }
        }
        let v = eval_weights(&nodes, &weights, &y).norm();
        points += 1;
        if v < best.0 {
            best = (v, y);
        }
        let mut k = 0;
        loop {
            if k == idx.len() {
                let center = eval_weights(&nodes, &weights, &[0.0; 3]).norm();
                return Ok(FtBound {
                    alpha,
                    c_ft: best.0 / norm_pow,
                    center_ratio: center / norm_pow,
                    argmin: best.1,
                    points,
                });
            }
            idx[k] += 1;
            if idx[k] < per_axis {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// `ft_lower_bound` on the middle half of the tube of cap 0, for caps at
/// scale `delta^{1/2}` with the quadrature certified to twice the reach of that box.
pub fn ft_constant(n: usize, delta: f64, per_axis: usize) -> Result<FtBound> {
    let caps = chain_caps(n, delta)?;
    let family = cap_family(&caps, delta, vec![[0.0; 3]; caps.len()], vec![1.0; caps.len()])?;
    let tube = &family.tubes[0];
    let reach = tube.half_widths()[..n].iter().map(|h| h * h / 4.0).sum::<f64>().sqrt();
    let freq = (2.0 * reach).max(caps.quadrature.max_frequency);
    let caps = caps.quadrature_for_bandwidth(freq)?;
    ft_lower_bound(&caps, 0, tube, delta, 0.5, per_axis)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineReport {
    /// Fine caps with a nonzero parent coefficient.
    pub count: usize,
    /// Fine caps whose parent coefficient is zero.
    pub excluded: usize,
    pub a_min: f64,
    pub a_max: f64,
    /// Fine caps whose centre has parent bump at least 0.9.
    pub interior_count: usize,
    pub interior_min: f64,
    pub interior_max: f64,
    /// Largest `|g(xi) - g(xi_beta)| / c^{1/2}` over the nodes of a fine cell.
    pub max_oscillation: f64,
}

/// `a_beta = g(xi_beta) / c_{alpha(beta)}^{1/2}` at the fine-cap centres.
pub fn refine_density(g: &Density, fine: &CapSystem) -> Result<RefineReport> {
    let parents = fine
        .parent_map
        .as_ref()
        .ok_or_else(|| LabError::InvalidArgument("fine caps carry no parent map".into()))?;
    if parents.iter().any(|&a| a >= g.caps.len()) || fine.n != g.caps.n {
        return Err(LabError::Mismatch("fine caps do not refine the density's caps".into()));
    }
    let m = fine.len();
    let mut centre_value = vec![Complex64::new(0.0, 0.0); m];
    let mut osc = vec![0.0f64; m];
    let mut rep = RefineReport {
        count: 0,
        excluded: 0,
        a_min: 0.0,
        a_max: 0.0,
        interior_count: 0,
        interior_min: 0.0,
        interior_max: 0.0,
        max_oscillation: 0.0,
    };
    let (mut lo, mut hi, mut ilo, mut ihi) = (f64::INFINITY, 0.0f64, f64::INFINITY, 0.0f64);
    for beta in 0..m {
        let alpha = parents[beta];
        let c = g.coefficients[alpha];
        if c == 0.0 {
            rep.excluded += 1;
            continue;
        }
        let xi = fine.caps[beta].center;
        centre_value[beta] = g.value_at(&xi);
        let a = centre_value[beta].norm() / c.sqrt();
        rep.count += 1;
        lo = lo.min(a);
        hi = hi.max(a);
        if g.caps.bump(alpha, &xi) >= INTERIOR_BUMP {
            rep.interior_count += 1;
            ilo = ilo.min(a);
            ihi = ihi.max(a);
        }
    }
    for (j, xi) in fine.quadrature.nodes.iter().enumerate() {
        let beta = fine.node_cell[j] as usize;
        let c = g.coefficients[parents[beta]];
        if c > 0.0 {
            osc[beta] = osc[beta].max((g.value_at(xi) - centre_value[beta]).norm() / c.sqrt());
        }
    }
    if rep.count > 0 {
        rep.a_min = lo;
        rep.a_max = hi;
        rep.max_oscillation = osc.iter().fold(0.0, |a, b| a.max(*b));
    }
    if rep.interior_count > 0 {
        rep.interior_min = ilo;
        rep.interior_max = ihi;
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbetaReport {
    pub beta: usize,
    pub delta: f64,
    /// `min |psi_beta dsigma^| / delta^{n-1}` over the middle half of `R_beta`.
    pub c_lo: f64,
    /// Share of `int |psi_beta dsigma^|^q` over `B(0, delta^{-2})` outside `4 R_beta`.
    pub leak: f64,
    /// `|psi_beta dsigma^(0)| / delta^{n-1}`.
    pub origin_ratio: f64,
    pub points: usize,
}

/// Two-sided comparison of `|psi_beta dsigma^|` with `delta^{n-1} chi_{R_beta}`,
/// `R_beta` the `delta^{-1} x .. x delta^{-2}` tube through the origin along the
/// cap centre. Sampled on a lattice aligned with `R_beta` at spacing
/// `delta^{-1} / per_width`.
pub fn rbeta_main_term(fine: &CapSystem, beta: usize, delta: f64, per_width: usize) -> Result<RbetaReport> {
    if beta >= fine.len() {
        return Err(LabError::range("cap", beta as f64, format!("[0, {})", fine.len())));
    }
    if per_width < 2 {
        return Err(LabError::range("points per width", per_width as f64, "[2, inf)"));
    }
    let n = fine.n;
    let radius = delta.powi(-2);
    if fine.quadrature.max_frequency + 1e-9 < radius {
        return Err(uncertified(fine.quadrature.max_frequency, radius));
    }
    let c = fine.caps[beta].center;
    let basis = tangent_basis(n, &c);
    let h = 1.0 / (delta * per_width as f64);
    let k = (radius / h).floor() as i64;
    let (nodes, weights) = cap_weights(fine, beta);
    let q = critical_q(n);
    let main = delta.powi(n as i32 - 1);
    let (mid_t, mid_u) = (radius / 4.0, 1.0 / (4.0 * delta));
    let (out_t, out_u) = (2.0 * radius, 2.0 / delta);
    let step: Vec<Complex64> = nodes.iter().map(|p| phase(-h * dot(&c, p))).collect();
    let mut ph = vec![Complex64::new(0.0, 0.0); nodes.len()];
    let (mut total, mut outside, mut c_lo, mut points) = (0.0, 0.0, f64::INFINITY, 0usize);
    let transverse: Vec<Vec<f64>> = if n == 2 {
        (-k..=k).map(|i| vec![i as f64 * h]).collect()
    } else {
        (-k..=k)
            .flat_map(|i| (-k..=k).map(move |j| vec![i as f64 * h, j as f64 * h]))
            .collect()
    };
    for u in &transverse {
        let u2: f64 = u.iter().map(|v| v * v).sum();
        if u2 > radius * radius {
            continue;
        }
        let tmax = ((radius * radius - u2).sqrt() / h).floor() as i64;
        let mut x0 = [0.0; 3];
        for a in 0..3 {
            x0[a] = -(tmax as f64) * h * c[a] + u.iter().zip(&basis).map(|(v, e)| v * e[a]).sum::<f64>();
        }
        for (p, node) in ph.iter_mut().zip(&nodes) {
            *p = phase(-dot(&x0, node));
        }
        let wide = u.iter().any(|v| v.abs() > out_u);
        let narrow = u.iter().all(|v| v.abs() <= mid_u);
        for i in -tmax..=tmax {
            let t = i as f64 * h;
            let mut acc = Complex64::new(0.0, 0.0);
            for ((p, s), w) in ph.iter_mut().zip(&step).zip(&weights) {
                acc += *w * *p;
                *p *= s;
            }
            let v = acc.norm();
            let vq = v.powf(q);
            total += vq;
            if wide || t.abs() > out_t {
                outside += vq;
            }
            if narrow && t.abs() <= mid_t {
                c_lo = c_lo.min(v);
            }
            points += 1;
        }
    }
    let origin: f64 = weights.iter().sum::<f64>().abs();
    Ok(RbetaReport {
        beta,
        delta,
        c_lo: c_lo / main,
        leak: if total > 0.0 { outside / total } else { 0.0 },
        origin_ratio: origin / main,
        points,
    })
}

/// Sampled moduli on a ball: one column per tracked function.
pub(crate) struct Columns {
    pub plan: SamplePlan,
    pub cols: Vec<Vec<f64>>,
    pub converged: bool,
}

/// Evaluates `eval` on the full grid when its cost fits the policy's work
/// budget, otherwise on stratified samples with doubling replicates until
/// the `L^q` norms of the columns in `check` reach the target error.
pub(crate) fn sample_columns(
    n: usize,
    radius: f64,
    q: f64,
    policy: &NormPolicy,
    cost_per_point: f64,
    check: &[usize],
    mut eval: impl FnMut(&[Point]) -> Vec<Vec<f64>>,
) -> Result<Columns> {
    let converged = |plan: &SamplePlan, cols: &[Vec<f64>]| {
        check
            .iter()
            .all(|&c| lq_estimate(plan, &cols[c], q).relative_error() <= policy.target_rel_stderr)
    };
    if SamplePlan::full_grid_count(n, radius, policy.spacing) * cost_per_point <= policy.work_budget {
        let plan = SamplePlan::full_grid(n, radius, policy.spacing)?;
        let cols = eval(&plan.points);
        return Ok(Columns {
            plan,
            cols,
            converged: true,
        });
    }
    let mut reps = policy.min_replicates.max(2);
    let mut plan = SamplePlan::stratified(n, radius, policy.seed, reps)?;
    let mut cols = eval(&plan.points);
    loop {
        let ok = converged(&plan, &cols);
        if ok || reps * 2 > policy.max_replicates {
            return Ok(Columns {
                plan,
                cols,
                converged: ok,
            });
        }
        reps *= 2;
        let start = plan.add_replicates(policy.seed, reps)?;
        for (c, more) in cols.iter_mut().zip(eval(&plan.points[start..])) {
            c.extend(more);
        }
    }
}

/// Columns `S`, then `|sum_a eps_a F_a|` for each sign vector, where
/// `F_a = (c_a^{1/2} e^{2 pi i lambda_a . xi} phi_a dsigma)^` and
/// `S = (sum_a |F_a|^2)^{1/2}`, on `B(0, radius)`.
pub(crate) fn signed_columns(
    g: &Density,
    radius: f64,
    signs: &[Vec<i8>],
    policy: &NormPolicy,
    check: &[usize],
) -> Result<Columns> {
    let lmax = g.modulations.iter().map(norm).fold(0.0, f64::max);
    let need = radius + lmax;
    if g.caps.quadrature.max_frequency + 1e-9 < need {
        return Err(uncertified(g.caps.quadrature.max_frequency, need));
    }
    let m = g.caps.len();
    let base = Density::new(g.caps, g.coefficients.clone(), vec![1; m], g.modulations.clone())?;
    let engine = DirectEngine::new(&base);
    let caps = engine.caps().to_vec();
    let cost = engine.work_per_point() as f64 + (signs.len() * caps.len()) as f64;
    sample_columns(g.caps.n, radius, critical_q(g.caps.n), policy, cost, check, |points| {
        let mut cols = vec![Vec::with_capacity(points.len()); signs.len() + 1];
        let (mut ph, mut pieces) = (Vec::new(), Vec::new());
        for x in points {
            engine.pieces_at(x, &mut ph, &mut pieces);
            cols[0].push(pieces.iter().map(|p| p.norm_sqr()).sum::<f64>().sqrt());
            for (k, eps) in signs.iter().enumerate() {
                let v: Complex64 = caps.iter().zip(&pieces).map(|(&a, p)| eps[a] as f64 * p).sum();
                cols[k + 1].push(v.norm());
            }
        }
        cols
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KhintchineReport {
    pub draws: usize,
    /// `||(g_eps dsigma)^||_q / ||S||_q` per draw.
    pub ratios: Vec<f64>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Percentile bootstrap interval for the mean.
    pub ci: [f64; 2],
    pub square_norm: f64,
    pub radius: f64,
    pub points: usize,
    pub norm: NormMethod,
    pub converged: bool,
}

pub(crate) fn khintchine_from(
    plan: &SamplePlan,
    square: &[f64],
    draws: &[Vec<f64>],
    converged: bool,
    radius: f64,
    seed: u64,
) -> KhintchineReport {
    let q = critical_q(plan.n);
    let s = lq_estimate(plan, square, q).value;
    let ratios: Vec<f64> = draws.iter().map(|c| lq_estimate(plan, c, q).value / s).collect();
    let m = ratios.len();
    let mean = ratios.iter().sum::<f64>() / m as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| (0..m).map(|_| ratios[rng.gen_range(0..m)]).sum::<f64>() / m as f64)
        .collect();
    means.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pick = |p: f64| means[((p * BOOTSTRAP_RESAMPLES as f64) as usize).min(BOOTSTRAP_RESAMPLES - 1)];
    KhintchineReport {
        draws: m,
        mean,
        min: ratios.iter().fold(f64::INFINITY, |a, b| a.min(*b)),
        max: ratios.iter().fold(0.0, |a, b| a.max(*b)),
        ci: [pick(0.025), pick(0.975)],
        ratios,
        square_norm: s,
        radius,
        points: plan.len(),
        norm: plan.method,
        converged,
    }
}

pub(crate) fn draw_signs(m: usize, draws: usize, seed: u64) -> Vec<SignVector> {
    (0..draws)
        .map(|k| SignVector::new(m, seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(k as u64)))
        .collect()
}

/// `M` Rademacher draws of the test density of `family`, each compared in
/// `L^q(B(0, rho))` with the square function, `rho` the family's bounding radius.
pub fn khintchine_average(
    family: &TubeFamily,
    caps: &CapSystem,
    draws: usize,
    seed: u64,
    policy: &NormPolicy,
) -> Result<KhintchineReport> {
    if draws < 8 {
        return Err(LabError::range("draws", draws as f64, "[8, inf)"));
    }
    let signs = draw_signs(caps.len(), draws, seed);
    let g = build_test_density(family, &signs[0], caps)?;
    let radius = family.bounding_radius();
    let sets: Vec<Vec<i8>> = signs.into_iter().map(|s| s.signs).collect();
    let cols = signed_columns(&g, radius, &sets, policy, &[0, 1])?;
    Ok(khintchine_from(&cols.plan, &cols.cols[0], &cols.cols[1..], cols.converged, radius, seed))
}
