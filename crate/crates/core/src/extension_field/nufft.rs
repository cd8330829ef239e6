//! Type-1 nonuniform FFT with the "exponential of semicircle" spreading kernel.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

use crate::error::{LabError, Result};
use crate::geom::Point;
use crate::sphere_caps::quadrature::gauss_legendre;

#[derive(Debug, Clone, Copy)]
pub struct NufftParams {
    /// Kernel support in fine-grid points.
    pub width: usize,
    pub upsample: f64,
}

impl Default for NufftParams {
    fn default() -> Self {
        NufftParams {
            width: 12,
            upsample: 2.0,
        }
    }
}

impl NufftParams {
    fn beta(&self) -> f64 {
        2.30 * self.width as f64
    }

    fn kernel(&self, z: f64) -> f64 {
        let s = 1.0 - z * z;
        if s <= 0.0 {
            0.0
        } else {
            (self.beta() * (s.sqrt() - 1.0)).exp()
        }
    }

    /// `(w/2) int_{-1}^{1} phi(z) cos(k z w Delta / 2) dz`, the per-axis
    /// transform of the spreading kernel on a grid of spacing `Delta`.
    fn kernel_transform(&self, modes: usize, delta: f64) -> Vec<f64> {
        let (z, wz) = gauss_legendre(4 * self.width + 40);
        let half = self.width as f64 / 2.0;
        let phi: Vec<f64> = z.iter().map(|&z| self.kernel(z)).collect();
        let kmin = -(modes as i64) / 2;
        (0..modes)
            .map(|i| {
                let k = (kmin + i as i64) as f64;
                half * z
                    .iter()
                    .zip(&wz)
                    .zip(&phi)
                    .map(|((z, w), p)| w * p * (k * z * half * delta).cos())
                    .sum::<f64>()
            })
            .collect()
    }
}

/// Smallest even `m >= target` whose only prime factors are 2, 3 and 5.
pub fn smooth_size(target: usize) -> usize {
    let mut m = target.max(2);
    loop {
        if m % 2 == 0 {
            let mut r = m;
            for p in [2, 3, 5] {
                while r % p == 0 {
                    r /= p;
                }
            }
            if r == 1 {
                return m;
            }
        }
        m += 1;
    }
}

/// `f_k = sum_j c_j e^{-i k . t_j}` for `k in [-K/2, K/2)^d`, row-major with
/// the last axis fastest. Coordinates of `t` beyond `d` are ignored.
pub fn type1(d: usize, t: &[Point], c: &[Complex64], modes: usize, params: NufftParams) -> Result<Vec<Complex64>> {
    if !(1..=3).contains(&d) {
        return Err(LabError::UnsupportedDimension(d));
    }
    if modes % 2 != 0 {
        return Err(LabError::InvalidArgument(format!("odd mode count {modes}")));
    }
    let w = params.width;
    let m = smooth_size(((params.upsample * modes as f64).ceil() as usize).max(2 * w));
    let delta = 2.0 * PI / m as f64;
    let half = w as f64 / 2.0;
    let total = m.pow(d as u32);
    let mut fine = vec![Complex64::new(0.0, 0.0); total];

    let mut idx = vec![vec![0usize; w + 1]; d];
    let mut ker = vec![vec![0.0; w + 1]; d];
    for (tj, cj) in t.iter().zip(c) {
        for a in 0..d {
            let p = tj[a] / delta;
            let l0 = (p - half).ceil() as i64;
            for s in 0..=w {
                let l = l0 + s as i64;
                ker[a][s] = params.kernel((l as f64 - p) / half);
                idx[a][s] = l.rem_euclid(m as i64) as usize;
            }
        }
        match d {
            1 => {
                for s in 0..=w {
                    fine[idx[0][s]] += cj * ker[0][s];
                }
            }
            2 => {
                for s0 in 0..=w {
                    let v = cj * ker[0][s0];
                    let row = idx[0][s0] * m;
                    for s1 in 0..=w {
                        fine[row + idx[1][s1]] += v * ker[1][s1];
                    }
                }
            }
            _ => {
                for s0 in 0..=w {
                    let v0 = cj * ker[0][s0];
                    for s1 in 0..=w {
                        let v1 = v0 * ker[1][s1];
                        let row = (idx[0][s0] * m + idx[1][s1]) * m;
                        for s2 in 0..=w {
                            fine[row + idx[2][s2]] += v1 * ker[2][s2];
                        }
                    }
                }
            }
        }
    }

    fft_nd(&mut fine, m, d, false);

    let corr = params.kernel_transform(modes, delta);
    let inv: Vec<f64> = corr.iter().map(|v| 1.0 / v).collect();
    let wrap = |i: usize| ((i as i64 - modes as i64 / 2).rem_euclid(m as i64)) as usize;
    let mut out = vec![Complex64::new(0.0, 0.0); modes.pow(d as u32)];
    match d {
        1 => {
            for i in 0..modes {
                out[i] = fine[wrap(i)] * inv[i];
            }
        }
        2 => {
            for i in 0..modes {
                for j in 0..modes {
                    out[i * modes + j] = fine[wrap(i) * m + wrap(j)] * (inv[i] * inv[j]);
                }
            }
        }
        _ => {
            for i in 0..modes {
                for j in 0..modes {
                    let f_row = (wrap(i) * m + wrap(j)) * m;
                    let o_row = (i * modes + j) * modes;
                    let s = inv[i] * inv[j];
                    for k in 0..modes {
                        out[o_row + k] = fine[f_row + wrap(k)] * (s * inv[k]);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// In-place d-dimensional FFT of an `m^d` row-major array.
pub fn fft_nd(data: &mut [Complex64], m: usize, d: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(m)
    } else {
        planner.plan_fft_forward(m)
    };
    let mut line = vec![Complex64::new(0.0, 0.0); m];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for axis in 0..d {
        let stride = m.pow((d - 1 - axis) as u32);
        let outer = data.len() / (m * stride);
        for o in 0..outer {
            for s in 0..stride {
                let base = o * m * stride + s;
                if stride == 1 {
                    fft.process_with_scratch(&mut data[base..base + m], &mut scratch);
                    continue;
                }
                for i in 0..m {
                    line[i] = data[base + i * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for i in 0..m {
                    data[base + i * stride] = line[i];
                }
            }
        }
    }
}
