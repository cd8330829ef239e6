use serde::{Deserialize, Serialize};
use std::f64::consts::E;

use lab_core::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// `y = C (log x)^p`
    LogPower,
    /// `y = C x^p`
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogFit {
    pub model: Model,
    pub c: f64,
    pub p: f64,
    /// Root mean square of the residuals of `log y`.
    pub rms: f64,
    pub points: usize,
}

impl LogFit {
    pub fn predict(&self, x: f64) -> f64 {
        match self.model {
            Model::LogPower => self.c * x.ln().powf(self.p),
            Model::Power => self.c * x.powf(self.p),
        }
    }
}

pub fn fit_log_exponent(points: &[(f64, f64)]) -> Result<LogFit> {
    if points.len() < 4 {
        return Err(LabError::InvalidArgument(format!("{} points, need at least 4", points.len())));
    }
    let mut uv = Vec::with_capacity(points.len());
    for &(x, y) in points {
        if !(x >= E) {
            return Err(LabError::InvalidArgument(format!("x = {x} below e")));
        }
        uv.push((x.ln().ln(), log_y(x, y)?));
    }
    least_squares(&uv, Model::LogPower)
}

/// `y = C x^p` by least squares of `log y` on `log x`; two points suffice.
pub fn fit_power(points: &[(f64, f64)]) -> Result<LogFit> {
    if points.len() < 2 {
        return Err(LabError::InvalidArgument(format!("{} points, need at least 2", points.len())));
    }
    let mut uv = Vec::with_capacity(points.len());
    for &(x, y) in points {
        if !(x > 0.0) {
            return Err(LabError::InvalidArgument(format!("x = {x} is not positive")));
        }
        uv.push((x.ln(), log_y(x, y)?));
    }
    least_squares(&uv, Model::Power)
}

fn log_y(x: f64, y: f64) -> Result<f64> {
    if !(y > 0.0) || !y.is_finite() {
        return Err(LabError::InvalidArgument(format!("y = {y} at x = {x} is not positive")));
    }
    Ok(y.ln())
}

fn least_squares(uv: &[(f64, f64)], model: Model) -> Result<LogFit> {
    let m = uv.len() as f64;
    let mu = uv.iter().map(|p| p.0).sum::<f64>() / m;
    let mv = uv.iter().map(|p| p.1).sum::<f64>() / m;
    let suu: f64 = uv.iter().map(|(a, _)| (a - mu) * (a - mu)).sum();
    if !(suu > 1e-12 * m) {
        return Err(LabError::Degenerate("x range too narrow for a fit".into()));
    }
    let suv: f64 = uv.iter().map(|(a, b)| (a - mu) * (b - mv)).sum();
    let p = suv / suu;
    let b = mv - p * mu;
    let rms = (uv.iter().map(|(a, y)| (y - b - p * a).powi(2)).sum::<f64>() / m).sqrt();
    Ok(LogFit {
        model,
        c: b.exp(),
        p,
        rms,
        points: uv.len(),
    })
}
