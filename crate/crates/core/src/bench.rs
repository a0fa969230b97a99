//! Gate-count and timing comparison between dense diagonal application and
//! the per-amplitude lazy query.

use std::fmt::Write as _;
use std::hint::black_box;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::layout::SubsystemLayout;
use crate::unitary::{multi_step_operator, DiagonalHamiltonian, PhaseEncodedState};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub qubits: u32,
    pub gate_count: usize,
    /// Nanoseconds per full diagonal matrix-vector product; `None` above the cap.
    pub dense_ns: Option<f64>,
    /// Nanoseconds per single-amplitude evolved query.
    pub lazy_ns: f64,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub min_qubits: u32,
    pub max_qubits: u32,
    pub repetitions: usize,
    pub dense_cap: u32,
    pub lazy_queries: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            min_qubits: 4,
            max_qubits: 20,
            repetitions: 5,
            dense_cap: 24,
            lazy_queries: 4096,
            seed: 0,
        }
    }
}

/// Times every qubit count in the configured range. Each timing is the
/// minimum over `repetitions` runs.
pub fn complexity_table(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let reps = cfg.repetitions.max(1);
    (cfg.min_qubits..=cfg.max_qubits)
        .map(|n| {
            let layout = SubsystemLayout::single(1 << n)?;
            let alphas: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h = DiagonalHamiltonian::new(layout, vec![alphas])?;
            let dt = 0.1;
            let k = 60;
            let gate_count = multi_step_operator(&h, 0, dt, k)?.gate_count();
            let t = k as f64 * dt;

            let dense_ns = if n <= cfg.dense_cap {
                let diag: Vec<Complex64> = h.eigenvalues(0)?.iter().map(|l| Complex64::cis(l * t)).collect();
                let mut state = vec![Complex64::new((1u64 << n) as f64, 0.0).inv().sqrt(); 1 << n];
                let mut best = f64::INFINITY;
                for _ in 0..reps {
                    let start = Instant::now();
                    for (s, d) in state.iter_mut().zip(&diag) {
                        *s *= d;
                    }
                    black_box(&mut state);
                    best = best.min(start.elapsed().as_nanos() as f64);
                }
                Some(best)
            } else {
                None
            };

            let phases: Vec<f64> = (0..1usize << n).map(|l| (l as f64).sin()).collect();
            let encoded = PhaseEncodedState::encode(&phases)?;
            let queries: Vec<usize> = (0..cfg.lazy_queries).map(|_| rng.random_range(0..1usize << n)).collect();
            let mut best = f64::INFINITY;
            for _ in 0..reps {
                let start = Instant::now();
                let mut acc = Complex64::new(0.0, 0.0);
                for &l in &queries {
                    acc += encoded.evolved_amplitude(&h, 0, black_box(l), t)?;
                }
                black_box(acc);
                best = best.min(start.elapsed().as_nanos() as f64 / queries.len() as f64);
            }
            Ok(BenchRow {
                qubits: n,
                gate_count,
                dense_ns,
                lazy_ns: best,
            })
        })
        .collect()
}

/// `qubits,gate_count,dense_ns,lazy_ns`; skipped dense cells read `skipped`.
pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("qubits,gate_count,dense_ns,lazy_ns\n");
    for r in rows {
        let dense = r.dense_ns.map_or("skipped".to_string(), |v| format!("{v:.1}"));
        writeln!(out, "{},{},{},{:.3}", r.qubits, r.gate_count, dense, r.lazy_ns).unwrap();
    }
    out
}

/// Least-squares slope of `log2(y)` against `n`.
pub fn log2_slope(points: &[(u32, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1.log2()).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 as f64 - mx) * (p.1.log2() - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 as f64 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_table() {
        let cfg = BenchConfig {
            min_qubits: 2,
            max_qubits: 6,
            repetitions: 1,
            dense_cap: 4,
            lazy_queries: 16,
            seed: 1,
        };
        let rows = complexity_table(&cfg).unwrap();
        assert_eq!(rows.len(), 5);
        for r in &rows {
            assert_eq!(r.gate_count, r.qubits as usize);
            assert_eq!(r.dense_ns.is_some(), r.qubits <= 4);
        }
        let csv = to_csv(&rows);
        assert!(csv.lines().nth(5).unwrap().contains("skipped"));
    }

    #[test]
    fn slope_of_doubling() {
        let pts: Vec<(u32, f64)> = (3..9).map(|n| (n, 5.0 * 2f64.powi(n as i32))).collect();
        assert!((log2_slope(&pts) - 1.0).abs() < 1e-12);
    }
}
