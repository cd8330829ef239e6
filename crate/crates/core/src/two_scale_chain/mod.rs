//! The two-scale argument run as a measured pipeline: a test density built
//! from a tube family, the pointwise and norm steps at scales `delta` and
//! `delta^2`, and the bound assembled from the per-step constants.

mod chain;
mod steps;

pub use chain::{chain_trial, run_chain, ChainOptions, ChainSetup, StepRecord, TwoScaleTrace, STEP_TOLERANCE};
pub use steps::{
    ft_constant, ft_lower_bound, khintchine_average, rbeta_main_term, refine_density, FtBound, KhintchineReport,
    RbetaReport, RefineReport,
};

use num_rational::Ratio;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::extension_field::{rademacher, Density};
use crate::geom::{angle_between, norm, Point};
use crate::kakeya_tubes::{DirectionNet, TubeFamily};
use crate::sphere_caps::{cap_decompose, BumpProfile, CapSystem};

/// Rademacher signs, one per cap, drawn from `seed`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignVector {
    pub signs: Vec<i8>,
    pub seed: u64,
}

impl SignVector {
    pub fn new(m: usize, seed: u64) -> SignVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SignVector {
            signs: rademacher(m, &mut rng),
            seed,
        }
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }
}

/// `r = n / (n - 1)`.
pub fn tube_exponent(n: usize) -> f64 {
    n as f64 / (n as f64 - 1.0)
}

/// Caps at angular scale `delta^{1/2}`.
pub fn chain_caps(n: usize, delta: f64) -> Result<CapSystem> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(LabError::range("delta", delta, "(0, 1)"));
    }
    cap_decompose(n, delta.sqrt(), BumpProfile::default())
}

/// One `delta^{-1/2} x .. x delta^{-1}` tube per cap, pointing along the cap centre.
pub fn cap_family(caps: &CapSystem, delta: f64, centers: Vec<Point>, coefficients: Vec<f64>) -> Result<TubeFamily> {
    let s = delta.sqrt();
    if (caps.scale - s).abs() > 1e-12 * s {
        return Err(LabError::Mismatch(format!("caps at scale {}, delta^(1/2) = {s}", caps.scale)));
    }
    let net = DirectionNet {
        n: caps.n,
        big_n: 1.0 / s,
        directions: caps.caps.iter().map(|c| c.center).collect(),
    };
    TubeFamily::new(net, centers, coefficients, 1.0 / s)
}

/// `g = sum_a eps_a c_a^{1/2} e^{2 pi i lambda_a . xi} phi_a` with `lambda_a` the
/// tube centres.
pub fn build_test_density<'a>(family: &TubeFamily, signs: &SignVector, caps: &'a CapSystem) -> Result<Density<'a>> {
    let m = caps.len();
    if family.len() != m || signs.len() != m || family.n() != caps.n {
        return Err(LabError::Mismatch(format!(
            "{} tubes, {} signs, {m} caps",
            family.len(),
            signs.len()
        )));
    }
    if (family.width - family.big_n).abs() > 1e-12 * family.big_n {
        return Err(LabError::InvalidArgument(format!(
            "tubes must be N x .. x N^2, got width {} and N = {}",
            family.width, family.big_n
        )));
    }
    let delta = family.big_n.powi(-2);
    for (a, (t, cap)) in family.tubes.iter().zip(&caps.caps).enumerate() {
        if angle_between(&t.direction, &cap.center) > 1e-9 {
            return Err(LabError::Mismatch(format!("tube {a} does not point along cap {a}")));
        }
        if norm(&t.center) > 2.0 / delta * (1.0 + 1e-12) {
            return Err(LabError::range("|lambda|", norm(&t.center), format!("[0, {}]", 2.0 / delta)));
        }
    }
    Density::new(
        caps,
        family.coefficients.clone(),
        signs.signs.clone(),
        family.tubes.iter().map(|t| t.center).collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingReport {
    pub n: usize,
    pub delta: f64,
    /// `sum_beta c_{alpha(beta)}^r`.
    pub lhs: f64,
    /// `delta^{-(n-1)/2} sum_alpha c_alpha^r`.
    pub rhs: f64,
    /// `lhs / rhs - 1`.
    pub residual: f64,
    pub min_children: usize,
    pub max_children: usize,
}

/// Both sides of the counting identity with the actual children counts of `fine`.
pub fn counting_identity(coefficients: &[f64], fine: &CapSystem, delta: f64) -> Result<CountingReport> {
    let children = fine
        .children()
        .ok_or_else(|| LabError::InvalidArgument("fine caps carry no parent map".into()))?;
    if children.len() > coefficients.len() {
        return Err(LabError::Mismatch(format!(
            "{} coefficients for {} parents",
            coefficients.len(),
            children.len()
        )));
    }
    let n = fine.n;
    let r = tube_exponent(n);
    let mut lhs = 0.0;
    let mut sum = 0.0;
    for (a, &c) in coefficients.iter().enumerate() {
        let cr = c.powf(r);
        sum += cr;
        lhs += children.get(a).map_or(0, |k| k.len()) as f64 * cr;
    }
    let rhs = delta.powf(-(n as f64 - 1.0) / 2.0) * sum;
    let counts = children.iter().map(|k| k.len());
    Ok(CountingReport {
        n,
        delta,
        lhs,
        rhs,
        residual: if rhs > 0.0 { lhs / rhs - 1.0 } else { 0.0 },
        min_children: counts.clone().min().unwrap_or(0),
        max_children: counts.max().unwrap_or(0),
    })
}

/// The three `delta`-exponents of the assembly and their sum, exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentAudit {
    pub n: usize,
    pub terms: Vec<String>,
    pub total: String,
    pub expected: String,
    pub holds: bool,
}

fn chain_terms(n: usize) -> [Ratio<i64>; 3] {
    let n = n as i64;
    [
        Ratio::from_integer(n - 1),
        -Ratio::new((n - 1) * (n - 1), 2 * n),
        -Ratio::new((n + 1) * (n - 1), n),
    ]
}

/// Exponent of `delta` in the assembled bound.
pub fn chain_exponent(n: usize) -> Ratio<i64> {
    chain_terms(n).iter().sum()
}

pub fn exponent_audit(n: usize) -> Result<ExponentAudit> {
    if n < 2 {
        return Err(LabError::UnsupportedDimension(n));
    }
    let terms = chain_terms(n);
    let total = chain_exponent(n);
    let m = n as i64;
    let expected = -Ratio::new((m + 1) * (m - 1), 2 * m);
    Ok(ExponentAudit {
        n,
        terms: terms.iter().map(|t| t.to_string()).collect(),
        total: total.to_string(),
        expected: expected.to_string(),
        holds: total == expected,
    })
}
