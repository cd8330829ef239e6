use serde::{Deserialize, Serialize};
use std::time::Instant;

use super::capframe::{capframe_sums, CapFrameParams};
use super::density::Density;
use super::direct::{DirectEngine, PieceSums};
use super::export::RatioReport;
use super::sampling::{ratio_estimate, Estimate, NormMethod, SamplePlan};
use super::critical_q;
use crate::error::{LabError, Result};
use crate::geom::{norm, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMethod {
    Direct,
    CapFrame,
    Auto,
}

/// How norms over balls are computed. The full grid is used when its total
/// evaluation work (points times per-point cost) fits `work_budget`;
/// otherwise stratified sampling doubles its replicates until the relative
/// standard error is at most `target_rel_stderr`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormPolicy {
    pub spacing: f64,
    pub work_budget: f64,
    pub target_rel_stderr: f64,
    pub min_replicates: usize,
    pub max_replicates: usize,
    pub seed: u64,
    pub method: EvalMethod,
    pub capframe: CapFrameParams,
}

impl Default for NormPolicy {
    fn default() -> Self {
        NormPolicy {
            spacing: 0.25,
            work_budget: 2e8,
            target_rel_stderr: 0.02,
            min_replicates: 4,
            max_replicates: 64,
            seed: 0,
            method: EvalMethod::Auto,
            capframe: CapFrameParams::fast(),
        }
    }
}

/// Rough cost of one cap-frame evaluation relative to one direct node.
const CAPFRAME_COST_PER_CAP: f64 = 150.0;

fn resolve(densities: &[&Density], points: &[Point], method: EvalMethod) -> EvalMethod {
    let reach = points.iter().map(norm).fold(0.0, f64::max)
        + densities
            .iter()
            .flat_map(|d| d.modulations.iter())
            .map(norm)
            .fold(0.0, f64::max);
    let direct_ok = densities
        .first()
        .map_or(true, |d| d.caps.quadrature.max_frequency + 1e-9 >= reach);
    match method {
        EvalMethod::Auto if !direct_ok => EvalMethod::CapFrame,
        EvalMethod::Auto => {
            let direct: f64 = densities
                .iter()
                .map(|d| DirectEngine::new(d).work_per_point() as f64)
                .sum();
            let frame: f64 = densities.iter().map(|d| d.support().len() as f64).sum::<f64>()
                * CAPFRAME_COST_PER_CAP;
            if direct <= frame * 4.0 {
                EvalMethod::Direct
            } else {
                EvalMethod::CapFrame
            }
        }
        m => m,
    }
}

/// Per-cap sums for each density at `points`.
pub fn piece_sums(
    densities: &[&Density],
    points: &[Point],
    method: EvalMethod,
    params: &CapFrameParams,
    seed: u64,
) -> Result<(Vec<PieceSums>, EvalMethod)> {
    match resolve(densities, points, method) {
        EvalMethod::Direct => {
            let reach = points.iter().map(norm).fold(0.0, f64::max);
            for d in densities {
                let lmax = d.modulations.iter().map(norm).fold(0.0, f64::max);
                if d.caps.quadrature.max_frequency + 1e-9 < reach + lmax {
                    return Err(LabError::Uncertified {
                        what: "quadrature",
                        detail: format!(
                            "certified to {} but evaluation reaches {}",
                            d.caps.quadrature.max_frequency,
                            reach + lmax
                        ),
                    });
                }
            }
            let out = densities.iter().map(|d| DirectEngine::new(d).sums(points)).collect();
            Ok((out, EvalMethod::Direct))
        }
        _ => Ok((capframe_sums(densities, points, params, seed)?.0, EvalMethod::CapFrame)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedNorms {
    pub lhs: Estimate,
    pub rhs: Estimate,
    pub ratio: Estimate,
    pub norm: NormMethod,
    pub eval: EvalMethod,
    pub points: usize,
    /// False when sampling stopped at `max_replicates` above the target error.
    pub converged: bool,
}

fn per_point_cost(densities: &[&Density], method: EvalMethod, points: &[Point]) -> f64 {
    match resolve(densities, points, method) {
        EvalMethod::Direct => densities
            .iter()
            .map(|d| DirectEngine::new(d).work_per_point() as f64)
            .sum(),
        _ => densities.iter().map(|d| d.support().len() as f64).sum::<f64>() * CAPFRAME_COST_PER_CAP,
    }
}

/// `||lhs||_{L^q(B(0, radius))}` and `||rhs||` for every density, where
/// `lhs`, `rhs` map a point's per-cap sums to a modulus. All densities share
/// the sample points.
pub fn paired_norms(
    densities: &[&Density],
    radius: f64,
    q: f64,
    policy: &NormPolicy,
    lhs: impl Fn(&PieceSums, usize) -> f64,
    rhs: impl Fn(&PieceSums, usize, &Density) -> f64,
) -> Result<Vec<PairedNorms>> {
    let Some(first) = densities.first() else {
        return Ok(Vec::new());
    };
    let n = first.caps.n;
    let probe = [[radius, 0.0, 0.0]];
    let full_points = SamplePlan::full_grid_count(n, radius, policy.spacing);
    let cost = per_point_cost(densities, policy.method, &probe);
    let finish = |plan: &SamplePlan, sums: &[PieceSums], eval: EvalMethod| -> Vec<PairedNorms> {
        sums.iter()
            .zip(densities)
            .map(|(s, d)| {
                let a: Vec<f64> = (0..s.len()).map(|i| lhs(s, i)).collect();
                let b: Vec<f64> = (0..s.len()).map(|i| rhs(s, i, d)).collect();
                let (l, r, ratio) = ratio_estimate(plan, &a, &b, q);
                let tol = policy.target_rel_stderr;
                PairedNorms {
                    lhs: l,
                    rhs: r,
                    ratio,
                    norm: plan.method,
                    eval,
                    points: plan.len(),
                    converged: l.relative_error() <= tol
                        && r.relative_error() <= tol
                        && ratio.relative_error() <= tol,
                }
            })
            .collect()
    };
    if full_points * cost <= policy.work_budget {
        let plan = SamplePlan::full_grid(n, radius, policy.spacing)?;
        let (sums, eval) = piece_sums(densities, &plan.points, policy.method, &policy.capframe, policy.seed)?;
        return Ok(finish(&plan, &sums, eval));
    }
    let mut reps = policy.min_replicates.max(2);
    let mut plan = SamplePlan::stratified(n, radius, policy.seed, reps)?;
    let (mut sums, eval) = piece_sums(densities, &plan.points, policy.method, &policy.capframe, policy.seed)?;
    loop {
        let out = finish(&plan, &sums, eval);
        if out.iter().all(|p| p.converged) || reps * 2 > policy.max_replicates {
            return Ok(out);
        }
        reps *= 2;
        let start = plan.add_replicates(policy.seed, reps)?;
        let (more, _) = piece_sums(densities, &plan.points[start..], eval, &policy.capframe, policy.seed ^ reps as u64)?;
        for (s, m) in sums.iter_mut().zip(more) {
            s.extend_from(m);
        }
    }
}

fn report(
    op: &str,
    d: &Density,
    delta: Option<f64>,
    big_r: Option<f64>,
    q: f64,
    p: &PairedNorms,
    seed: u64,
    started: Instant,
) -> Result<RatioReport> {
    if !(p.rhs.value > 0.0) {
        return Err(LabError::Degenerate(format!("{op}: rhs = {}", p.rhs.value)));
    }
    Ok(RatioReport {
        module: "extension_field".into(),
        op: op.into(),
        n: d.caps.n,
        delta,
        big_r,
        q,
        r: None,
        seed: Some(seed),
        lhs: p.lhs.value,
        rhs: p.rhs.value,
        ratio: p.ratio.value,
        stderr: p.ratio.stderr,
        runtime_s: started.elapsed().as_secs_f64(),
        method: format!("{:?}", p.eval).to_lowercase(),
        norm: format!("{:?}", p.norm).to_lowercase(),
        converged: p.converged,
    })
}

/// `||(g dsigma)^||_{L^q(B(0, 1/delta))} / ||(sum_a |(g_a dsigma)^|^2)^{1/2}||`,
/// `q = 2n/(n-1)`, for each density (caps at scale `delta^{1/2}`).
pub fn rlp_extension_ratio(densities: &[&Density], delta: f64, policy: &NormPolicy) -> Result<Vec<RatioReport>> {
    let Some(first) = densities.first() else {
        return Ok(Vec::new());
    };
    if !(delta > 0.0 && delta < 1.0) {
        return Err(LabError::range("delta", delta, "(0, 1)"));
    }
    let started = Instant::now();
    let q = critical_q(first.caps.n);
    let norms = paired_norms(
        densities,
        1.0 / delta,
        q,
        policy,
        |s, i| s.total[i].norm(),
        |s, i, _| s.square[i].sqrt(),
    )?;
    densities
        .iter()
        .zip(&norms)
        .map(|(d, p)| report("rlp_extension_ratio", d, Some(delta), None, q, p, policy.seed, started))
        .collect()
}

/// `||(g dsigma)^||_{L^q(B(0,R))} / ((log R)^{(n-1)/(2n)} ||g||_{L^q(S^{n-1})})`.
pub fn restriction_ratio(densities: &[&Density], big_r: f64, policy: &NormPolicy) -> Result<Vec<RatioReport>> {
    let Some(first) = densities.first() else {
        return Ok(Vec::new());
    };
    if !(big_r >= 4.0) {
        return Err(LabError::range("R", big_r, "[4, inf)"));
    }
    let started = Instant::now();
    let n = first.caps.n;
    let q = critical_q(n);
    let norms = paired_norms(
        densities,
        big_r,
        q,
        policy,
        |s, i| s.total[i].norm(),
        |s, i, _| s.total[i].norm(),
    )?;
    let log_factor = big_r.ln().powf((n as f64 - 1.0) / (2.0 * n as f64));
    densities
        .iter()
        .zip(&norms)
        .map(|(d, p)| {
            let rhs = log_factor * d.sphere_norm(q);
            let lhs = p.lhs;
            let ratio = Estimate {
                value: lhs.value / rhs,
                stderr: lhs.stderr / rhs,
            };
            let fixed = PairedNorms {
                rhs: Estimate::exact(rhs),
                ratio,
                converged: lhs.relative_error() <= policy.target_rel_stderr,
                ..*p
            };
            report("restriction_ratio", d, None, Some(big_r), q, &fixed, policy.seed, started)
        })
        .collect()
}
