use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::TAU;

use crate::error::{LabError, Result};
use crate::geom::{dot, Point};
use crate::sphere_caps::CapSystem;

/// `g = sum_a eps_a c_a^{1/2} e^{2 pi i lambda_a . xi} phi_a(xi)` on the caps of one system.
#[derive(Debug, Clone)]
pub struct Density<'a> {
    pub caps: &'a CapSystem,
    pub coefficients: Vec<f64>,
    pub signs: Vec<i8>,
    pub modulations: Vec<Point>,
    /// `g` at the quadrature nodes of `caps`.
    pub node_values: Vec<Complex64>,
}

#[inline]
pub(crate) fn phase(t: f64) -> Complex64 {
    // e^{2 pi i t}, reduced first so large |t| keeps full precision.
    let (s, c) = (TAU * (t - t.round())).sin_cos();
    Complex64::new(c, s)
}

impl<'a> Density<'a> {
    pub fn new(
        caps: &'a CapSystem,
        coefficients: Vec<f64>,
        signs: Vec<i8>,
        modulations: Vec<Point>,
    ) -> Result<Self> {
        let m = caps.len();
        if coefficients.len() != m || signs.len() != m || modulations.len() != m {
            return Err(LabError::Mismatch(format!(
                "density arrays ({}, {}, {}) for {m} caps",
                coefficients.len(),
                signs.len(),
                modulations.len()
            )));
        }
        if let Some(c) = coefficients.iter().find(|c| !(**c >= 0.0 && c.is_finite())) {
            return Err(LabError::InvalidArgument(format!("coefficient {c} is not >= 0")));
        }
        if signs.iter().any(|s| *s != 1 && *s != -1) {
            return Err(LabError::InvalidArgument("signs must be +-1".into()));
        }
        let mut d = Density {
            caps,
            coefficients,
            signs,
            modulations,
            node_values: Vec::new(),
        };
        d.node_values = (0..caps.quadrature.nodes.len()).map(|j| d.node_value(j)).collect();
        Ok(d)
    }

    /// Unmodulated, all signs +1.
    pub fn cap_constant(caps: &'a CapSystem, coefficients: Vec<f64>) -> Result<Self> {
        let m = caps.len();
        Density::new(caps, coefficients, vec![1; m], vec![[0.0; 3]; m])
    }

    /// Unmodulated with Rademacher signs drawn from `rng`.
    pub fn random_signs<R: Rng>(caps: &'a CapSystem, coefficients: Vec<f64>, rng: &mut R) -> Result<Self> {
        let m = caps.len();
        let signs = rademacher(m, rng);
        Density::new(caps, coefficients, signs, vec![[0.0; 3]; m])
    }

    pub fn zero(caps: &'a CapSystem) -> Self {
        Density::cap_constant(caps, vec![0.0; caps.len()]).expect("zero density")
    }

    /// `eps_a c_a^{1/2}`.
    #[inline]
    pub fn amplitude(&self, alpha: usize) -> f64 {
        self.signs[alpha] as f64 * self.coefficients[alpha].sqrt()
    }

    pub fn is_modulated(&self) -> bool {
        self.modulations.iter().any(|l| l.iter().any(|v| *v != 0.0))
    }

    /// `g_alpha(xi)` given `phi_alpha(xi)`.
    #[inline]
    pub fn piece(&self, alpha: usize, xi: &Point, phi: f64) -> Complex64 {
        let a = self.amplitude(alpha) * phi;
        let l = &self.modulations[alpha];
        if l[0] == 0.0 && l[1] == 0.0 && l[2] == 0.0 {
            Complex64::new(a, 0.0)
        } else {
            a * phase(dot(l, xi))
        }
    }

    fn node_value(&self, j: usize) -> Complex64 {
        let xi = &self.caps.quadrature.nodes[j];
        let (cols, vals) = self.caps.node_bumps.row(j);
        cols.iter()
            .zip(vals)
            .map(|(&a, &phi)| self.piece(a as usize, xi, phi))
            .sum()
    }

    /// `g(xi)` at an arbitrary unit vector.
    pub fn value_at(&self, xi: &Point) -> Complex64 {
        let mut buf = Vec::new();
        self.caps.bumps_at(xi, &mut buf);
        buf.iter().map(|&(a, phi)| self.piece(a as usize, xi, phi)).sum()
    }

    /// `int |g| dsigma`, the sup bound of the extension.
    pub fn total_variation(&self) -> f64 {
        self.node_values
            .iter()
            .zip(&self.caps.quadrature.weights)
            .map(|(v, w)| v.norm() * w)
            .sum()
    }

    /// `||g||_{L^q(S^{n-1})}` by quadrature.
    pub fn sphere_norm(&self, q: f64) -> f64 {
        self.node_values
            .iter()
            .zip(&self.caps.quadrature.weights)
            .map(|(v, w)| v.norm().powf(q) * w)
            .sum::<f64>()
            .powf(1.0 / q)
    }

    /// Caps with a nonzero piece.
    pub fn support(&self) -> Vec<usize> {
        (0..self.caps.len()).filter(|&a| self.coefficients[a] > 0.0).collect()
    }

    /// Same data scaled by `t >= 0` (coefficients scale by `t^2`).
    pub fn scaled(&self, t: f64) -> Result<Density<'a>> {
        Density::new(
            self.caps,
            self.coefficients.iter().map(|c| c * t * t).collect(),
            self.signs.clone(),
            self.modulations.clone(),
        )
    }
}

pub fn rademacher<R: Rng>(m: usize, rng: &mut R) -> Vec<i8> {
    (0..m).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect()
}
