//! Thin FFT helpers over `rustfft` (unnormalized forward, unnormalized inverse).

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Forward/inverse plans for one transform length.
#[derive(Clone)]
pub(crate) struct Dft {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Dft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Dft({})", self.forward.len())
    }
}

impl Dft {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
    }
}

/// Integer wavenumber of DFT bin `m` for length `n`; the Nyquist bin maps to `+n/2`.
pub fn wavenumber(m: usize, n: usize) -> i64 {
    if m <= n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

/// Unnormalized forward 2D DFT of a row-major `ny x nx` grid.
pub(crate) fn fft2(values: &[f64], nx: usize, ny: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let row = Dft::new(nx);
    for r in buf.chunks_exact_mut(nx) {
        row.forward(r);
    }
    let col = Dft::new(ny);
    let mut scratch = vec![Complex64::new(0.0, 0.0); ny];
    for x in 0..nx {
        for y in 0..ny {
            scratch[y] = buf[y * nx + x];
        }
        col.forward(&mut scratch);
        for y in 0..ny {
            buf[y * nx + x] = scratch[y];
        }
    }
    buf
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavenumber_order() {
        let k: Vec<i64> = (0..8).map(|m| wavenumber(m, 8)).collect();
        assert_eq!(k, vec![0, 1, 2, 3, 4, -3, -2, -1]);
    }

    #[test]
    fn fft2_matches_direct_sum() {
        let (nx, ny) = (4, 2);
        let v: Vec<f64> = (0..8).map(|i| (i as f64 * 0.7).sin()).collect();
        let out = fft2(&v, nx, ny);
        for ky in 0..ny {
            for kx in 0..nx {
                let mut s = Complex64::new(0.0, 0.0);
                for y in 0..ny {
                    for x in 0..nx {
                        let ang = -2.0 * std::f64::consts::PI
                            * (kx as f64 * x as f64 / nx as f64 + ky as f64 * y as f64 / ny as f64);
                        s += v[y * nx + x] * Complex64::cis(ang);
                    }
                }
                assert!((out[ky * nx + kx] - s).norm() < 1e-12);
            }
        }
    }
}
