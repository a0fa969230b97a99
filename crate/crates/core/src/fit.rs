//! Recovers Hamiltonian coefficients from observed phase trajectories.
//!
//! Per-step phase rates follow `delta = M * alpha (+ g)` with
//! `M[l][k] = -(dt/2) * z_k(l)`. The parity columns are mutually orthogonal
//! and zero-sum, so on the full index set the least-squares solution is a
//! per-column projection. Masked fits (some indices excluded) fall back to
//! a generic SVD solve.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::layout::SubsystemLayout;
use crate::model::KoopmanModel;
use crate::unitary::{wrap_phase, DiagonalHamiltonian};

/// Phases of one subsystem sampled at `k * dt`, `k = 0..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrajectory {
    dt: f64,
    width: usize,
    phases: Vec<f64>,
}

impl PhaseTrajectory {
    pub fn new(dt: f64, rows: &[Vec<f64>]) -> Result<Self> {
        let width = rows.first().map(Vec::len).unwrap_or(0);
        let mut phases = Vec::with_capacity(width * rows.len());
        for (k, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::Shape(format!(
                    "row {k} has {} phases, expected {width}",
                    row.len()
                )));
            }
            phases.extend_from_slice(row);
        }
        Self::from_flat(dt, width, phases)
    }

    /// Builds from a time-major flat array of `(T+1) * width` phases.
    pub fn from_flat(dt: f64, width: usize, phases: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Domain(format!("time step must be positive, got {dt}")));
        }
        if width < 2 || !width.is_power_of_two() {
            return Err(Error::Shape(format!("width {width} is not a power of two >= 2")));
        }
        if phases.is_empty() || phases.len() % width != 0 {
            return Err(Error::Shape(format!(
                "{} phases do not form whole rows of {width}",
                phases.len()
            )));
        }
        Ok(Self { dt, width, phases })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Step count `T` (rows minus one).
    pub fn steps(&self) -> usize {
        self.phases.len() / self.width - 1
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.phases[k * self.width..(k + 1) * self.width]
    }

    pub fn column(&self, l: usize) -> impl Iterator<Item = f64> + '_ {
        self.phases.iter().skip(l).step_by(self.width).copied()
    }
}

/// Removes `2*pi` jumps so every consecutive difference lies in `(-pi, pi]`.
///
/// True per-step increments must satisfy `|delta| < pi`; larger increments
/// alias silently.
pub fn unwrap_phases(trajectory: &PhaseTrajectory) -> PhaseTrajectory {
    let w = trajectory.width;
    let mut out = trajectory.phases.clone();
    for k in 1..=trajectory.steps() {
        for l in 0..w {
            let raw_prev = trajectory.phases[(k - 1) * w + l];
            let raw = trajectory.phases[k * w + l];
            out[k * w + l] = out[(k - 1) * w + l] + wrap_phase(raw - raw_prev);
        }
    }
    PhaseTrajectory {
        dt: trajectory.dt,
        width: w,
        phases: out,
    }
}

/// Ordinary least-squares slope of each index's phase against step number
/// (radians per step).
pub fn estimate_rates(unwrapped: &PhaseTrajectory) -> Result<Vec<f64>> {
    let t = unwrapped.steps();
    if t == 0 {
        return Err(Error::Fit("rate estimation needs at least two snapshots".into()));
    }
    if t == 1 {
        return Ok(unwrapped
            .row(1)
            .iter()
            .zip(unwrapped.row(0))
            .map(|(b, a)| b - a)
            .collect());
    }
    let mean_k = t as f64 / 2.0;
    let sxx: f64 = (0..=t).map(|k| (k as f64 - mean_k).powi(2)).sum();
    Ok((0..unwrapped.width)
        .map(|l| {
            let mean_phi = unwrapped.column(l).sum::<f64>() / (t + 1) as f64;
            unwrapped
                .column(l)
                .enumerate()
                .map(|(k, p)| (k as f64 - mean_k) * (p - mean_phi))
                .sum::<f64>()
                / sxx
        })
        .collect())
}

/// Outcome of fitting one subsystem.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub alphas: Vec<f64>,
    /// Uniform phase drift in radians per step, when enabled.
    pub global_phase_rate: Option<f64>,
    /// RMS of observed minus modelled rate over the fitted indices (radians per step).
    pub residual_rms: f64,
    pub per_index_rates: Vec<f64>,
    /// Observed minus modelled rate for every index (including masked ones).
    pub residuals: Vec<f64>,
    /// Indices that took part in the fit.
    pub active: Vec<bool>,
    /// The system was square (`N_j = n_j + 1`), so the residual is zero by construction.
    pub exact_by_construction: bool,
}

impl FitResult {
    /// Largest absolute residual among fitted indices, with its index.
    pub fn worst_index(&self) -> Option<(usize, f64)> {
        self.residuals
            .iter()
            .zip(&self.active)
            .enumerate()
            .filter(|(_, (_, &a))| a)
            .map(|(l, (r, _))| (l, r.abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// Line-oriented report for subsystem `j`.
    pub fn to_report(&self, j: usize) -> String {
        let mut out = format!("subsystem {j}\n");
        for (k, a) in self.alphas.iter().enumerate() {
            writeln!(out, "alpha {k} {a:.16e}").unwrap();
        }
        match self.global_phase_rate {
            Some(g) => writeln!(out, "global_phase_rate {g:.16e}").unwrap(),
            None => out.push_str("global_phase_rate none\n"),
        }
        writeln!(out, "residual_rms {:.16e}", self.residual_rms).unwrap();
        out
    }

    /// Modelled rate for index `l` (radians per step).
    pub fn model_rate(&self, l: usize, dt: f64) -> f64 {
        let n = self.alphas.len() as u32;
        let parity_part: f64 = self
            .alphas
            .iter()
            .enumerate()
            .map(|(k, a)| -0.5 * dt * a * z(l, k as u32, n))
            .sum();
        parity_part + self.global_phase_rate.unwrap_or(0.0)
    }
}

#[inline]
fn z(l: usize, k: u32, n: u32) -> f64 {
    if (l >> (n - 1 - k)) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Fits subsystem `j` of `layout` to per-index rates over the full index set.
pub fn fit_alphas(
    rates: &[f64],
    layout: &SubsystemLayout,
    j: usize,
    dt: f64,
    include_global_phase: bool,
) -> Result<FitResult> {
    let n = layout.dim(j)?;
    if rates.len() != n {
        return Err(Error::Shape(format!(
            "subsystem {j} has dimension {n}, got {} rates",
            rates.len()
        )));
    }
    fit_rates(rates, dt, include_global_phase, None)
}

/// Fits a block of `2^n` rates, optionally restricted to `mask`.
pub fn fit_rates(
    rates: &[f64],
    dt: f64,
    include_global_phase: bool,
    mask: Option<&[bool]>,
) -> Result<FitResult> {
    let size = rates.len();
    if size < 2 || !size.is_power_of_two() {
        return Err(Error::Shape(format!("{size} rates is not a power of two >= 2")));
    }
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("time step must be positive, got {dt}")));
    }
    if let Some(l) = rates.iter().position(|r| !r.is_finite()) {
        return Err(Error::Fit(format!("rate {l} is not finite")));
    }
    let n = size.trailing_zeros();
    let columns = n as usize + usize::from(include_global_phase);
    let active: Vec<bool> = match mask {
        Some(m) if m.len() != size => {
            return Err(Error::Shape(format!("mask has {} entries for {size} rates", m.len())))
        }
        Some(m) => m.to_vec(),
        None => vec![true; size],
    };
    let active_count = active.iter().filter(|&&a| a).count();
    if active_count < columns {
        return Err(Error::Fit(format!(
            "underdetermined: {active_count} usable rates for {columns} unknowns"
        )));
    }

    let (alphas, global) = if active_count == size {
        project(rates, dt, n, include_global_phase)
    } else {
        solve_masked(rates, dt, n, include_global_phase, &active)?
    };

    let mut result = FitResult {
        alphas,
        global_phase_rate: global,
        residual_rms: 0.0,
        per_index_rates: rates.to_vec(),
        residuals: Vec::new(),
        active,
        exact_by_construction: active_count == columns,
    };
    result.residuals = (0..size).map(|l| rates[l] - result.model_rate(l, dt)).collect();
    let sq: f64 = result
        .residuals
        .iter()
        .zip(&result.active)
        .filter(|(_, &a)| a)
        .map(|(r, _)| r * r)
        .sum();
    result.residual_rms = (sq / active_count as f64).sqrt();
    Ok(result)
}

fn project(rates: &[f64], dt: f64, n: u32, include_global: bool) -> (Vec<f64>, Option<f64>) {
    let size = rates.len() as f64;
    // column k has squared norm size * dt^2 / 4
    let alphas = (0..n)
        .map(|k| {
            let dot: f64 = rates
                .iter()
                .enumerate()
                .map(|(l, r)| -0.5 * dt * z(l, k, n) * r)
                .sum();
            dot / (size * dt * dt / 4.0)
        })
        .collect();
    let global = include_global.then(|| rates.iter().sum::<f64>() / size);
    (alphas, global)
}

fn solve_masked(
    rates: &[f64],
    dt: f64,
    n: u32,
    include_global: bool,
    active: &[bool],
) -> Result<(Vec<f64>, Option<f64>)> {
    let rows: Vec<usize> = (0..rates.len()).filter(|&l| active[l]).collect();
    let cols = n as usize + usize::from(include_global);
    let design = DMatrix::from_fn(rows.len(), cols, |i, k| {
        if k < n as usize {
            -0.5 * dt * z(rows[i], k as u32, n)
        } else {
            1.0
        }
    });
    let rhs = DVector::from_iterator(rows.len(), rows.iter().map(|&l| rates[l]));
    let svd = design.svd(true, true);
    let max_sv = svd.singular_values.max();
    let min_sv = svd.singular_values.min();
    if !(min_sv > 1e-12 * max_sv) {
        return Err(Error::Fit(
            "masked design matrix is rank deficient; too many indices excluded".into(),
        ));
    }
    let solution = svd
        .solve(&rhs, 1e-14 * max_sv)
        .map_err(|e| Error::Fit(e.to_string()))?;
    let alphas = solution.iter().take(n as usize).copied().collect();
    let global = include_global.then(|| solution[n as usize]);
    Ok((alphas, global))
}

/// Marks indices whose modulus stays above `relative_threshold` times the
/// largest modulus of the block at every step. Phases of (near-)zero
/// modulus entries carry no information and are excluded from fits.
pub fn modulus_mask(modulus_rows: &[&[f64]], relative_threshold: f64) -> Vec<bool> {
    let width = modulus_rows.first().map_or(0, |r| r.len());
    let peak = modulus_rows
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |m, &v| m.max(v));
    let cutoff = relative_threshold * peak;
    (0..width)
        .map(|l| modulus_rows.iter().all(|r| r[l] > cutoff))
        .collect()
}

/// Per-block fits assembled into a block-diagonal model.
#[derive(Debug, Clone)]
pub struct SystemFit {
    pub model: KoopmanModel,
    pub blocks: Vec<FitResult>,
}

impl SystemFit {
    /// `(subsystem, index, |residual|)` of the worst fitted index overall.
    pub fn worst_index(&self) -> Option<(usize, usize, f64)> {
        self.blocks
            .iter()
            .enumerate()
            .filter_map(|(j, b)| b.worst_index().map(|(l, r)| (j, l, r)))
            .max_by(|a, b| a.2.total_cmp(&b.2))
    }

    pub fn max_residual_rms(&self) -> f64 {
        self.blocks.iter().map(|b| b.residual_rms).fold(0.0, f64::max)
    }

    pub fn to_report(&self) -> String {
        let mut out: String = self
            .blocks
            .iter()
            .enumerate()
            .map(|(j, b)| {
                let mut s = b.to_report(j);
                if b.exact_by_construction {
                    s.push_str("note zero_residual_by_construction\n");
                }
                s
            })
            .collect();
        if let Some((j, l, r)) = self.worst_index() {
            writeln!(out, "worst_index {j} {l} {r:.16e}").unwrap();
        }
        out
    }
}

/// Unwraps, estimates rates and fits every subsystem independently.
pub fn fit_system(
    trajectories: &[PhaseTrajectory],
    layout: &SubsystemLayout,
    dt: f64,
    include_global_phase: bool,
) -> Result<SystemFit> {
    fit_system_masked(trajectories, layout, dt, include_global_phase, None)
}

/// As [`fit_system`], with an optional per-subsystem index mask.
pub fn fit_system_masked(
    trajectories: &[PhaseTrajectory],
    layout: &SubsystemLayout,
    dt: f64,
    include_global_phase: bool,
    masks: Option<&[Vec<bool>]>,
) -> Result<SystemFit> {
    fit_ensemble(&[trajectories.to_vec()], layout, dt, include_global_phase, masks)
}

/// Fits one model to several trajectories of the same system. Every
/// trajectory contributes the same design matrix, so the stacked least-squares
/// problem reduces to fitting the per-index rates averaged over trajectories.
pub fn fit_ensemble(
    ensemble: &[Vec<PhaseTrajectory>],
    layout: &SubsystemLayout,
    dt: f64,
    include_global_phase: bool,
    masks: Option<&[Vec<bool>]>,
) -> Result<SystemFit> {
    let h = layout.subsystem_count();
    if ensemble.is_empty() {
        return Err(Error::Shape("no trajectories to fit".into()));
    }
    for trajectories in ensemble {
        if trajectories.len() != h {
            return Err(Error::Layout(format!(
                "{} phase trajectories for {h} subsystems",
                trajectories.len()
            )));
        }
        for (j, tr) in trajectories.iter().enumerate() {
            if tr.width() != layout.dims()[j] {
                return Err(Error::Layout(format!(
                    "subsystem {j} has dimension {}, trajectory width is {}",
                    layout.dims()[j],
                    tr.width()
                )));
            }
            if (tr.dt() - dt).abs() > 1e-12 * dt.abs() {
                return Err(Error::Domain(format!(
                    "trajectory {j} has time step {}, expected {dt}",
                    tr.dt()
                )));
            }
        }
    }
    if masks.is_some_and(|m| m.len() != h) {
        return Err(Error::Layout(format!("mask count does not match {h} subsystems")));
    }
    let blocks = (0..h)
        .into_par_iter()
        .map(|j| {
            let mut rates = vec![0.0; layout.dims()[j]];
            for trajectories in ensemble {
                for (acc, r) in rates.iter_mut().zip(estimate_rates(&unwrap_phases(&trajectories[j]))?) {
                    *acc += r;
                }
            }
            rates.iter_mut().for_each(|r| *r /= ensemble.len() as f64);
            fit_rates(&rates, dt, include_global_phase, masks.map(|m| m[j].as_slice()))
        })
        .collect::<Result<Vec<_>>>()?;
    let hamiltonian = DiagonalHamiltonian::new(
        layout.clone(),
        blocks.iter().map(|b| b.alphas.clone()).collect(),
    )?;
    let global = include_global_phase.then(|| {
        blocks
            .iter()
            .map(|b| b.global_phase_rate.unwrap_or(0.0) / dt)
            .collect()
    });
    Ok(SystemFit {
        model: KoopmanModel::new(hamiltonian, global)?,
        blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rates_from(alphas: &[f64], dt: f64) -> Vec<f64> {
        let layout = SubsystemLayout::single(1 << alphas.len()).unwrap();
        let h = DiagonalHamiltonian::new(layout, vec![alphas.to_vec()]).unwrap();
        h.eigenvalues(0).unwrap().iter().map(|l| l * dt).collect()
    }

    /// Normal equations solved by Gaussian elimination with partial pivoting.
    fn normal_equation_oracle(rates: &[f64], dt: f64, include_global: bool) -> Vec<f64> {
        let n = rates.len().trailing_zeros();
        let cols = n as usize + usize::from(include_global);
        let col = |l: usize, k: usize| {
            if k < n as usize {
                -0.5 * dt * if (l >> (n as usize - 1 - k)) & 1 == 0 { 1.0 } else { -1.0 }
            } else {
                1.0
            }
        };
        let mut a = vec![vec![0.0; cols + 1]; cols];
        for i in 0..cols {
            for j in 0..cols {
                a[i][j] = (0..rates.len()).map(|l| col(l, i) * col(l, j)).sum();
            }
            a[i][cols] = (0..rates.len()).map(|l| col(l, i) * rates[l]).sum();
        }
        for p in 0..cols {
            let pivot = (p..cols).max_by(|&x, &y| a[x][p].abs().total_cmp(&a[y][p].abs())).unwrap();
            a.swap(p, pivot);
            for r in 0..cols {
                if r != p {
                    let f = a[r][p] / a[p][p];
                    for c in p..=cols {
                        a[r][c] -= f * a[p][c];
                    }
                }
            }
        }
        (0..cols).map(|i| a[i][cols] / a[i][i]).collect()
    }

    #[test]
    fn unwrap_examples() {
        let constant = PhaseTrajectory::new(0.1, &[vec![0.5, -1.0], vec![0.5, -1.0], vec![0.5, -1.0]]).unwrap();
        assert_eq!(unwrap_phases(&constant), constant);

        let raw = [0.0, 3.0, wrap_phase(6.0)];
        let tr = PhaseTrajectory::new(1.0, &raw.iter().map(|&p| vec![p, 0.0]).collect::<Vec<_>>()).unwrap();
        let un = unwrap_phases(&tr);
        let col: Vec<f64> = un.column(0).collect();
        assert_eq!(col[0], 0.0);
        assert_eq!(col[1], 3.0);
        assert!((col[2] - 6.0).abs() < 1e-14);

        // exact pi increments go to +pi
        let tr = PhaseTrajectory::new(1.0, &[vec![0.0, 0.0], vec![-PI, PI]]).unwrap();
        let un = unwrap_phases(&tr);
        assert_eq!(un.row(1), &[PI, PI]);
    }

    use std::f64::consts::PI;

    #[test]
    fn rate_examples() {
        let slope = 0.0123;
        let rows: Vec<Vec<f64>> = (0..=10).map(|k| vec![0.3 + slope * k as f64, 1.0]).collect();
        let rates = estimate_rates(&PhaseTrajectory::new(0.5, &rows).unwrap()).unwrap();
        assert!((rates[0] - slope).abs() < 1e-12);
        assert!(rates[1].abs() < 1e-15);

        let single = PhaseTrajectory::new(0.5, &[vec![0.0, 1.0]]).unwrap();
        assert!(matches!(estimate_rates(&single), Err(Error::Fit(_))));

        let two = PhaseTrajectory::new(0.5, &[vec![0.1, 1.0], vec![0.4, 0.5]]).unwrap();
        assert_eq!(estimate_rates(&two).unwrap(), vec![0.4 - 0.1, 0.5 - 1.0]);
    }

    #[test]
    fn noisy_rate_estimate() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let slope = -0.37;
        let rows: Vec<Vec<f64>> = (0..=60)
            .map(|k| vec![slope * k as f64 + rng.random_range(-1e-6..1e-6), 0.0])
            .collect();
        let rates = estimate_rates(&PhaseTrajectory::new(1.0, &rows).unwrap()).unwrap();
        assert!((rates[0] - slope).abs() < 1e-6);
    }

    #[test]
    fn fit_examples() {
        let layout = SubsystemLayout::single(16).unwrap();
        let alphas = [0.8, -1.5, 0.25, 2.0];
        let dt = 0.1;
        let fit = fit_alphas(&rates_from(&alphas, dt), &layout, 0, dt, false).unwrap();
        for (a, b) in fit.alphas.iter().zip(&alphas) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(fit.residual_rms <= 1e-12);
        assert_eq!(fit.global_phase_rate, None);

        let zero = fit_alphas(&[0.0; 16], &layout, 0, dt, false).unwrap();
        assert!(zero.alphas.iter().all(|&a| a == 0.0));
        assert_eq!(zero.residual_rms, 0.0);

        let c = 0.042;
        let uniform = fit_alphas(&[c; 16], &layout, 0, dt, true).unwrap();
        assert!(uniform.alphas.iter().all(|a| a.abs() < 1e-14));
        assert!((uniform.global_phase_rate.unwrap() - c).abs() < 1e-15);
        assert!(uniform.residual_rms < 1e-15);

        assert!(matches!(fit_alphas(&[0.0; 8], &layout, 0, dt, false), Err(Error::Shape(_))));
    }

    #[test]
    fn square_system_is_flagged() {
        let fit = fit_rates(&[0.3, -0.1], 0.5, true, None).unwrap();
        assert!(fit.exact_by_construction);
        assert!(fit.residual_rms < 1e-15);
        let fit = fit_rates(&[0.3, -0.1], 0.5, false, None).unwrap();
        assert!(!fit.exact_by_construction);
    }

    #[test]
    fn masked_fit_ignores_excluded_indices() {
        let alphas = [0.5, -0.9, 1.1];
        let dt = 0.2;
        let mut rates = rates_from(&alphas, dt);
        rates.iter_mut().for_each(|r| *r += 0.01);
        rates[5] = 100.0;
        let mut mask = vec![true; 8];
        mask[5] = false;
        let fit = fit_rates(&rates, dt, true, Some(&mask)).unwrap();
        for (a, b) in fit.alphas.iter().zip(&alphas) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!((fit.global_phase_rate.unwrap() - 0.01).abs() < 1e-12);
        assert!(fit.residual_rms < 1e-12);
        assert_eq!(fit.worst_index().map(|(l, _)| l == 5), Some(false));

        let mask = [true, false, false, false, false, false, false, true];
        assert!(matches!(fit_rates(&rates, dt, true, Some(&mask)), Err(Error::Fit(_))));
    }

    #[test]
    fn projection_agrees_with_generic_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=8u32 {
            let rates: Vec<f64> = (0..1 << n).map(|_| rng.random_range(-1.0..1.0)).collect();
            for global in [false, true] {
                if global && n == 0 {
                    continue;
                }
                let fit = fit_rates(&rates, 0.3, global, None).unwrap();
                let oracle = normal_equation_oracle(&rates, 0.3, global);
                for (a, b) in fit.alphas.iter().zip(&oracle) {
                    assert!((a - b).abs() < 1e-10);
                }
                if global {
                    assert!((fit.global_phase_rate.unwrap() - oracle[n as usize]).abs() < 1e-10);
                }
                // the SVD route on a full mask must agree as well
                let (svd_alphas, svd_global) =
                    solve_masked(&rates, 0.3, n, global, &vec![true; 1 << n]).unwrap();
                for (a, b) in fit.alphas.iter().zip(&svd_alphas) {
                    assert!((a - b).abs() < 1e-10);
                }
                assert_eq!(svd_global.is_some(), global);
            }
        }
    }

    #[test]
    fn residual_is_orthogonal_to_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in 1..=10u32 {
            let rates: Vec<f64> = (0..1 << n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let dt = 0.05;
            let fit = fit_rates(&rates, dt, true, None).unwrap();
            for k in 0..n {
                let dot: f64 = fit
                    .residuals
                    .iter()
                    .enumerate()
                    .map(|(l, r)| -0.5 * dt * z(l, k, n) * r)
                    .sum();
                assert!(dot.abs() < 1e-9);
            }
            assert!(fit.residuals.iter().sum::<f64>().abs() < 1e-9);
        }
    }

    #[test]
    fn parity_columns_are_balanced() {
        for n in 1..=12u32 {
            for k in 0..n {
                let sum: f64 = (0..1usize << n).map(|l| z(l, k, n)).sum();
                assert_eq!(sum, 0.0);
                for k2 in 0..k {
                    let dot: f64 = (0..1usize << n).map(|l| z(l, k, n) * z(l, k2, n)).sum();
                    assert_eq!(dot, 0.0);
                }
            }
        }
    }

    #[test]
    fn two_blocks_recovered_independently() {
        let layout = SubsystemLayout::new(4, 2, 2).unwrap();
        let truth = vec![vec![0.3, -0.6, 0.9], vec![-1.2, 0.45]];
        let h = DiagonalHamiltonian::new(layout.clone(), truth.clone()).unwrap();
        let dt = 0.1;
        let trajectories: Vec<PhaseTrajectory> = (0..2)
            .map(|j| {
                let lam = h.eigenvalues(j).unwrap();
                let rows: Vec<Vec<f64>> = (0..=20)
                    .map(|k| lam.iter().map(|l| wrap_phase(0.2 + l * k as f64 * dt)).collect())
                    .collect();
                PhaseTrajectory::new(dt, &rows).unwrap()
            })
            .collect();
        let fit = fit_system(&trajectories, &layout, dt, false).unwrap();
        for (got, want) in fit.model.hamiltonian().alphas().iter().zip(&truth) {
            for (a, b) in got.iter().zip(want) {
                assert!((a - b).abs() < 1e-10);
            }
        }
        assert!(fit.max_residual_rms() < 1e-12);
        assert!(fit.to_report().contains("subsystem 1\nalpha 0 "));
        assert!(matches!(
            fit_system(&trajectories[..1], &layout, dt, false),
            Err(Error::Layout(_))
        ));
    }

    #[test]
    fn doubled_step_gives_same_alphas() {
        let alphas = [0.7, -0.2, 1.3, 0.05, -0.9];
        let layout = SubsystemLayout::single(32).unwrap();
        let h = DiagonalHamiltonian::new(layout.clone(), vec![alphas.to_vec()]).unwrap();
        let lam = h.eigenvalues(0).unwrap();
        let fit_with = |dt: f64, steps: usize| {
            let rows: Vec<Vec<f64>> = (0..=steps)
                .map(|k| lam.iter().map(|l| wrap_phase(l * k as f64 * dt)).collect())
                .collect();
            fit_system(&[PhaseTrajectory::new(dt, &rows).unwrap()], &layout, dt, false).unwrap()
        };
        let a = fit_with(0.05, 60);
        let b = fit_with(0.1, 30);
        for (x, y) in a.model.hamiltonian().alphas()[0]
            .iter()
            .zip(&b.model.hamiltonian().alphas()[0])
        {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn report_format() {
        let fit = fit_rates(&[0.1, -0.1], 1.0, false, None).unwrap();
        let text = fit.to_report(0);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "subsystem 0");
        assert!(lines[1].starts_with("alpha 0 "));
        assert_eq!(lines[2], "global_phase_rate none");
        assert!(lines[3].starts_with("residual_rms "));
    }

    #[test]
    fn mask_from_modulus() {
        let a = [1.0, 1e-14, 0.5, 2.0];
        let b = [1.0, 0.0, 1e-12, 2.0];
        assert_eq!(modulus_mask(&[&a, &b], 1e-9), vec![true, false, false, true]);
    }
}
