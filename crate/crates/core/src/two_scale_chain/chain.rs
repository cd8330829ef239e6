use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::extension_field::{critical_q, lq_estimate, DirectEngine, NormPolicy};
use crate::geom::{norm, Point};
use crate::kakeya_tubes::{dual_norm, DirectionNet, DualMethod, Tube, TubeFamily, TubeFamilyDoc};
use crate::sphere_caps::{mem_budget, random_unit, CapSystem};

use super::steps::{
    draw_signs, ft_lower_bound, khintchine_from, rbeta_main_term, refine_density, sample_columns, signed_columns,
    KhintchineReport, RbetaReport, RefineReport,
};
use super::{build_test_density, cap_family, chain_caps, chain_exponent, counting_identity, tube_exponent};
use super::{CountingReport, SignVector};

/// Relative slack allowed when a recorded step is recomputed.
pub const STEP_TOLERANCE: f64 = 1e-9;
/// Recorded constants are rounded up by this relative amount so that each
/// step holds in floating point.
const ROUND_UP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainOptions {
    /// Norms on the ball around the family (`S_g`, `g_eps dsigma^`).
    pub inner: NormPolicy,
    /// Norms on `B(0, delta^{-2})`.
    pub outer: NormPolicy,
    pub khintchine_draws: usize,
    pub ft_per_axis: usize,
    pub rbeta_per_width: usize,
    pub dual: DualMethod,
}

impl Default for ChainOptions {
    fn default() -> Self {
        ChainOptions {
            inner: NormPolicy::default(),
            outer: NormPolicy {
                target_rel_stderr: 0.05,
                max_replicates: 16,
                ..NormPolicy::default()
            },
            khintchine_draws: 8,
            ft_per_axis: 17,
            rbeta_per_width: 16,
            dual: DualMethod::Auto,
        }
    }
}

/// `lhs <= constant * factor * rhs`; the constant enters the assembled bound
/// to the power `weight`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub factor: f64,
    pub constant: f64,
    pub weight: i32,
    /// The step is the unproved local inequality at scale `delta^2`.
    pub conjectural: bool,
}

impl StepRecord {
    fn new(name: &str, lhs: f64, rhs: f64, factor: f64, weight: i32, conjectural: bool) -> Result<StepRecord> {
        let scale = factor * rhs;
        let constant = if lhs == 0.0 {
            0.0
        } else if scale > 0.0 {
            lhs / scale * (1.0 + ROUND_UP)
        } else {
            return Err(LabError::Degenerate(format!("step {name}: rhs = {rhs}, factor = {factor}")));
        };
        Ok(StepRecord {
            name: name.into(),
            lhs,
            rhs,
            factor,
            constant,
            weight,
            conjectural,
        })
    }

    pub fn holds(&self) -> bool {
        self.lhs <= self.constant * self.factor * self.rhs * (1.0 + STEP_TOLERANCE)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoScaleTrace {
    pub n: usize,
    pub delta: f64,
    pub family: TubeFamilyDoc,
    pub signs: SignVector,
    /// Pointwise stationary-phase constant, minimum over the caps in use.
    pub c_ft: f64,
    pub c_ft_cap: usize,
    pub refine: RefineReport,
    pub repl: RbetaReport,
    pub khintchine: KhintchineReport,
    pub counting: CountingReport,
    pub steps: Vec<StepRecord>,
    /// Exponent of `delta` in the assembly, as an exact fraction.
    pub exponent: String,
    pub exponent_value: f64,
    /// `(log 1/delta)^{(n-1)/n}`.
    pub log_factor: f64,
    /// `(sum c^r)^{1/r}`.
    pub coefficient_norm: f64,
    /// Product of the step constants to their weights.
    pub constant: f64,
    /// `||sum c chi_T||_r` from the tube module.
    pub direct_lhs: f64,
    pub assembled_bound: f64,
    /// Whether the sampled norms reached their target errors.
    pub converged: bool,
}

fn rel_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= STEP_TOLERANCE * a.abs().max(b.abs())
}

impl TwoScaleTrace {
    /// The bound rebuilt from each step's constant and factor.
    pub fn reassemble(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| (s.constant * s.factor).powi(s.weight))
            .product::<f64>()
            * self.coefficient_norm
    }

    /// The bound from the constant product and the explicit powers.
    pub fn formula_bound(&self) -> f64 {
        self.constant * self.log_factor * self.delta.powf(self.exponent_value) * self.coefficient_norm
    }

    pub fn steps_hold(&self) -> bool {
        self.steps.iter().all(StepRecord::holds)
    }

    pub fn conjectural_steps(&self) -> Vec<&str> {
        self.steps.iter().filter(|s| s.conjectural).map(|s| s.name.as_str()).collect()
    }

    pub fn sound(&self) -> bool {
        self.steps_hold()
            && rel_close(self.reassemble(), self.assembled_bound)
            && rel_close(self.formula_bound(), self.assembled_bound)
            && self.direct_lhs <= self.assembled_bound
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<TwoScaleTrace> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Runs every step for one family and sign vector. `caps` are the caps of
/// the family at scale `delta^{1/2}`; `fine` refines them at scale `delta`.
/// Quadratures must be certified on the balls they are evaluated on.
pub fn run_chain(
    family: &TubeFamily,
    caps: &CapSystem,
    fine: &CapSystem,
    delta: f64,
    signs: &SignVector,
    opts: &ChainOptions,
) -> Result<TwoScaleTrace> {
    let n = caps.n;
    let r = tube_exponent(n);
    let q = critical_q(n);
    let nf = n as f64;
    let g = build_test_density(family, signs, caps)?;
    let c = &family.coefficients;
    let parents = fine
        .parent_map
        .clone()
        .ok_or_else(|| LabError::InvalidArgument("fine caps carry no parent map".into()))?;

    let mut ft: Option<(f64, usize)> = None;
    for (a, t) in family.tubes.iter().enumerate() {
        if c[a] > 0.0 {
            let b = ft_lower_bound(caps, a, t, delta, 0.5, opts.ft_per_axis)?;
            if ft.map_or(true, |(v, _)| b.c_ft < v) {
                ft = Some((b.c_ft, a));
            }
        }
    }
    let (c_ft, c_ft_cap) = ft.ok_or_else(|| LabError::Degenerate("all coefficients are zero".into()))?;
    let refine = refine_density(&g, fine)?;
    let direct = dual_norm(family, r, opts.dual)?.value;

    let rho = family.bounding_radius();
    let draws = draw_signs(caps.len(), opts.khintchine_draws, signs.seed);
    let mut sets = vec![signs.signs.clone()];
    sets.extend(draws.into_iter().map(|s| s.signs));
    let inner = signed_columns(&g, rho, &sets, &opts.inner, &[0, 1])?;
    let sq_inner = lq_estimate(&inner.plan, &inner.cols[0], q).value;
    let g_inner = lq_estimate(&inner.plan, &inner.cols[1], q).value;
    let khintchine = khintchine_from(&inner.plan, &inner.cols[0], &inner.cols[2..], inner.converged, rho, signs.seed);

    let outer_radius = delta.powi(-2);
    let lmax = g.modulations.iter().map(norm).fold(0.0, f64::max);
    if fine.quadrature.max_frequency + 1e-9 < outer_radius + lmax {
        return Err(LabError::Uncertified {
            what: "quadrature",
            detail: format!(
                "fine caps certified to {} but evaluation reaches {}",
                fine.quadrature.max_frequency,
                outer_radius + lmax
            ),
        });
    }
    let values: Vec<Complex64> = fine.quadrature.nodes.iter().map(|xi| g.value_at(xi)).collect();
    let engine = DirectEngine::from_node_values(fine, &values);
    let d: Vec<f64> = parents.iter().map(|&a| c[a]).collect();
    let width = 1.0 / delta;
    let rtubes: Vec<(Tube, f64)> = fine
        .caps
        .iter()
        .zip(&d)
        .filter(|(_, &dv)| dv > 0.0)
        .map(|(cap, &dv)| Ok((Tube::new(n, cap.center, [0.0; 3], width, outer_radius)?, dv)))
        .collect::<Result<_>>()?;
    let cost = engine.work_per_point() as f64 + 4.0 * rtubes.len() as f64;
    let outer = sample_columns(n, outer_radius, q, &opts.outer, cost, &[0, 1, 2], |points| {
        let mut cols = vec![Vec::with_capacity(points.len()); 3];
        let (mut ph, mut pieces) = (Vec::new(), Vec::new());
        for x in points {
            engine.pieces_at(x, &mut ph, &mut pieces);
            cols[0].push(pieces.iter().sum::<Complex64>().norm());
            cols[1].push(pieces.iter().map(|p| p.norm_sqr()).sum::<f64>().sqrt());
            let s: f64 = rtubes.iter().filter(|(t, _)| t.contains(x)).map(|(_, dv)| dv).sum();
            cols[2].push(s.sqrt());
        }
        cols
    })?;
    let g_outer = lq_estimate(&outer.plan, &outer.cols[0], q).value;
    let sq_outer = lq_estimate(&outer.plan, &outer.cols[1], q).value;
    let sr_outer = lq_estimate(&outer.plan, &outer.cols[2], q).value;

    let beta = (0..fine.len()).find(|&b| d[b] > 0.0).unwrap_or(0);
    let repl = rbeta_main_term(fine, beta, delta, opts.rbeta_per_width)?;

    let rnet = DirectionNet {
        n,
        big_n: width,
        directions: fine.caps.iter().map(|cap| cap.center).collect(),
    };
    let rfamily = TubeFamily::new(rnet, vec![[0.0; 3]; fine.len()], d.clone(), width)?;
    let bush = dual_norm(&rfamily, r, opts.dual)?.value;
    let counting = counting_identity(c, fine, delta)?;
    let d_norm = d.iter().map(|v| v.powf(r)).sum::<f64>().powf(1.0 / r);
    let c_norm = c.iter().map(|v| v.powf(r)).sum::<f64>().powf(1.0 / r);

    let log_factor = (1.0 / delta).ln().powf((nf - 1.0) / nf);
    let steps = vec![
        StepRecord::new("stationary_phase", direct.sqrt(), sq_inner, delta.powf(-(nf - 1.0) / 2.0), 2, false)?,
        StepRecord::new("khintchine", sq_inner, g_inner, 1.0, 2, false)?,
        StepRecord::new("nested_balls", g_inner, g_outer, 1.0, 2, false)?,
        StepRecord::new("local_decoupling", g_outer, sq_outer, 1.0, 2, true)?,
        StepRecord::new("rbeta_replacement", sq_outer, sr_outer, delta.powf(nf - 1.0), 2, false)?,
        StepRecord::new("sampling", sr_outer, bush.sqrt(), 1.0, 2, false)?,
        StepRecord::new(
            "bush",
            bush,
            d_norm,
            log_factor * delta.powf(-(nf + 1.0) * (nf - 1.0) / nf),
            1,
            false,
        )?,
        StepRecord::new("counting", d_norm, c_norm, delta.powf(-(nf - 1.0) * (nf - 1.0) / (2.0 * nf)), 1, false)?,
    ];
    let constant: f64 = steps.iter().map(|s| s.constant.powi(s.weight)).product();
    let e = chain_exponent(n);
    let exponent_value = *e.numer() as f64 / *e.denom() as f64;
    let assembled_bound = constant * log_factor * delta.powf(exponent_value) * c_norm;
    Ok(TwoScaleTrace {
        n,
        delta,
        family: family.to_doc(),
        signs: signs.clone(),
        c_ft,
        c_ft_cap,
        refine,
        repl,
        khintchine,
        counting,
        steps,
        exponent: e.to_string(),
        exponent_value,
        log_factor,
        coefficient_norm: c_norm,
        constant,
        direct_lhs: direct,
        assembled_bound,
        converged: inner.converged && outer.converged,
    })
}

/// How a random trial family is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSetup {
    pub n: usize,
    pub delta: f64,
    pub seed: u64,
    /// Tube centres uniform in `B(0, translate * delta^{-1})`.
    pub translate: f64,
    /// Coefficients uniform in `(0, 1]` instead of all one.
    pub random_coefficients: bool,
}

impl ChainSetup {
    pub fn new(n: usize, delta: f64, seed: u64) -> ChainSetup {
        ChainSetup {
            n,
            delta,
            seed,
            translate: 0.25,
            random_coefficients: false,
        }
    }
}

/// Draws a family with random translates, prepares both cap systems and runs the chain.
pub fn chain_trial(setup: &ChainSetup, opts: &ChainOptions) -> Result<TwoScaleTrace> {
    let (n, delta) = (setup.n, setup.delta);
    if !(setup.translate >= 0.0 && setup.translate <= 1.0) {
        return Err(LabError::range("translate", setup.translate, "[0, 1]"));
    }
    let caps = chain_caps(n, delta)?;
    let m = caps.len();
    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
    let reach = setup.translate / delta;
    let centers: Vec<Point> = (0..m)
        .map(|_| {
            let u = random_unit(n, &mut rng);
            let t = reach * rng.gen::<f64>().powf(1.0 / n as f64);
            [t * u[0], t * u[1], t * u[2]]
        })
        .collect();
    let coefficients: Vec<f64> = (0..m)
        .map(|_| if setup.random_coefficients { 1.0 - rng.gen::<f64>() } else { 1.0 })
        .collect();
    let signs = SignVector::new(m, rng.gen());
    let family = cap_family(&caps, delta, centers, coefficients)?;
    let lmax = family.tubes.iter().map(|t| norm(&t.center)).fold(0.0, f64::max);
    let caps = caps.quadrature_for_bandwidth(family.bounding_radius() + lmax + 1.0)?;
    let mut fine = caps.refine(delta)?;
    fine.set_bandwidth(delta.powi(-2) + lmax + 1.0, mem_budget())?;
    run_chain(&family, &caps, &fine, delta, &signs, opts)
}
