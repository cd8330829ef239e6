use serde::{Deserialize, Serialize};

/// Smooth even bump on `[-1, 1]`: `exp(1 - 1/(1 - t^2))`, so `eta(0) = 1`.
///
/// Every derivative vanishes at `t = +-1`; `derivative_bound_order` is the
/// number of derivatives the lab checks for boundedness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpProfile {
    pub derivative_bound_order: usize,
}

impl Default for BumpProfile {
    fn default() -> Self {
        BumpProfile {
            derivative_bound_order: 4,
        }
    }
}

impl BumpProfile {
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        let t2 = t * t;
        if t2 >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - t2)).exp()
        }
    }

    /// Central finite-difference estimate of `sup |eta^(k)|` over a grid on
    /// `[-1, 1]`, for `k <= derivative_bound_order`.
    pub fn derivative_bounds(&self, step: f64) -> Vec<f64> {
        let samples = (2.0 / step) as usize + 1;
        let xs: Vec<f64> = (0..samples).map(|i| -1.0 + i as f64 * step).collect();
        let mut vals: Vec<f64> = xs.iter().map(|&x| self.eval(x)).collect();
        let mut out = vec![vals.iter().fold(0.0f64, |m, v| m.max(v.abs()))];
        for _ in 0..self.derivative_bound_order {
            let next: Vec<f64> = (0..vals.len())
                .map(|i| {
                    let lo = if i == 0 { 0.0 } else { vals[i - 1] };
                    let hi = if i + 1 == vals.len() { 0.0 } else { vals[i + 1] };
                    (hi - lo) / (2.0 * step)
                })
                .collect();
            out.push(next.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            vals = next;
        }
        out
    }
}
