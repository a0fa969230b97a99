//! Losses, relative error and statistical diagnostics (energy spectra,
//! PDFs and structure functions).

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::dataset::TrajectoryDataset;
use crate::encoders::ObservableEncoder;
use crate::error::{Error, Result};
use crate::model::KoopmanModel;
use crate::spectral::{fft2, wavenumber};

/// Whether relative errors are reported as the squared-norm ratio or its square root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorMode {
    /// `||pred - truth|| / ||truth||`.
    #[default]
    Rooted,
    /// `||pred - truth||^2 / ||truth||^2`.
    Squared,
}

impl ErrorMode {
    pub fn name(self) -> &'static str {
        match self {
            ErrorMode::Rooted => "rooted",
            ErrorMode::Squared => "squared",
        }
    }
}

pub fn relative_l2(pred: &[f64], truth: &[f64], mode: ErrorMode) -> Result<f64> {
    let ratio = squared_relative(pred, truth)?;
    Ok(match mode {
        ErrorMode::Rooted => ratio.sqrt(),
        ErrorMode::Squared => ratio,
    })
}

fn squared_relative(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!(
            "prediction has {} values, truth has {}",
            pred.len(),
            truth.len()
        )));
    }
    let norm: f64 = truth.iter().map(|v| v * v).sum();
    if norm == 0.0 {
        return Err(Error::Domain("relative error undefined for a zero-norm truth".into()));
    }
    let diff: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(diff / norm)
}

fn autoencode(encoder: &dyn ObservableEncoder, x: &[f64]) -> Result<Vec<f64>> {
    encoder.decode(&encoder.encode(x)?)
}

/// Encodes `x0`, evolves the observable by `t` in one shot and decodes.
pub fn predict_state(encoder: &dyn ObservableEncoder, model: &KoopmanModel, x0: &[f64], t: f64) -> Result<Vec<f64>> {
    encoder.decode(&model.evolve(&encoder.encode(x0)?, t)?)
}

/// Mean of per-trajectory values, summed in trajectory order.
fn ordered_mean(values: Vec<f64>) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn nonempty(trajectories: &[TrajectoryDataset]) -> Result<()> {
    if trajectories.is_empty() {
        return Err(Error::Shape("no trajectories given".into()));
    }
    Ok(())
}

/// Mean over `k = 0..=T` of the squared relative autoencoding error,
/// averaged over trajectories.
pub fn reconstruction_loss(encoder: &dyn ObservableEncoder, trajectories: &[TrajectoryDataset]) -> Result<f64> {
    nonempty(trajectories)?;
    let per = trajectories
        .par_iter()
        .map(|tr| {
            let terms = tr
                .snapshots()
                .map(|x| squared_relative(&autoencode(encoder, x)?, x))
                .collect::<Result<Vec<_>>>()?;
            Ok(ordered_mean(terms))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ordered_mean(per))
}

/// Mean over `k = 1..=T` of the squared relative error of the one-shot
/// rollout from `x_0`, averaged over trajectories.
pub fn prediction_loss(
    encoder: &dyn ObservableEncoder,
    model: &KoopmanModel,
    trajectories: &[TrajectoryDataset],
) -> Result<f64> {
    nonempty(trajectories)?;
    let per = trajectories
        .par_iter()
        .map(|tr| {
            if tr.steps() == 0 {
                return Err(Error::Shape("prediction loss needs T >= 1".into()));
            }
            let x0 = tr.snapshot(0);
            let terms = (1..=tr.steps())
                .map(|k| squared_relative(&predict_state(encoder, model, x0, k as f64 * tr.dt())?, tr.snapshot(k)))
                .collect::<Result<Vec<_>>>()?;
            Ok(ordered_mean(terms))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ordered_mean(per))
}

/// Pair loss over the index set of zero-step transitions `(l, 0)` and
/// initial rollouts `(0, l)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairLoss {
    pub loss: f64,
    pub zero_step_pairs: usize,
    pub rollout_pairs: usize,
}

/// Mean over all pairs `(k, dk)` of the squared relative error of
/// predicting `x_{k+dk}` from `x_k`.
pub fn pair_loss(
    encoder: &dyn ObservableEncoder,
    model: &KoopmanModel,
    trajectories: &[TrajectoryDataset],
) -> Result<PairLoss> {
    nonempty(trajectories)?;
    let per = trajectories
        .par_iter()
        .map(|tr| {
            let t = tr.steps();
            let pairs = (0..=t).map(|l| (l, 0)).chain((1..=t).map(|l| (0, l)));
            pairs
                .map(|(k, dk)| {
                    let pred = predict_state(encoder, model, tr.snapshot(k), dk as f64 * tr.dt())?;
                    squared_relative(&pred, tr.snapshot(k + dk))
                })
                .collect::<Result<Vec<_>>>()
                .map(|v| (v, t))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sum = 0.0;
    let mut zero = 0;
    let mut roll = 0;
    for (terms, t) in &per {
        sum += terms.iter().sum::<f64>();
        zero += t + 1;
        roll += t;
    }
    Ok(PairLoss {
        loss: sum / (zero + roll) as f64,
        zero_step_pairs: zero,
        rollout_pairs: roll,
    })
}

/// All three losses on the same data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub reconstruction: f64,
    /// `None` when every trajectory has `T = 0`.
    pub prediction: Option<f64>,
    pub pair: PairLoss,
}

impl LossReport {
    pub fn compute(
        encoder: &dyn ObservableEncoder,
        model: &KoopmanModel,
        trajectories: &[TrajectoryDataset],
    ) -> Result<Self> {
        let reconstruction = reconstruction_loss(encoder, trajectories)?;
        let prediction = if trajectories.iter().all(|t| t.steps() > 0) {
            Some(prediction_loss(encoder, model, trajectories)?)
        } else {
            None
        };
        Ok(Self {
            reconstruction,
            prediction,
            pair: pair_loss(encoder, model, trajectories)?,
        })
    }

    pub fn to_summary(&self) -> String {
        format!(
            "reconstruction_loss {:.16e}\nprediction_loss {}\npair_loss {:.16e}\nzero_step_pairs {}\nrollout_pairs {}\n",
            self.reconstruction,
            self.prediction.map_or("none".into(), |p| format!("{p:.16e}")),
            self.pair.loss,
            self.pair.zero_step_pairs,
            self.pair.rollout_pairs
        )
    }
}

/// Shell-averaged energy spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    /// Integer shell centres `0, 1, 2, ...`.
    pub kappa: Vec<f64>,
    /// Mean modal energy `|X/N|^2 / 2` over the modes of each shell.
    pub energy: Vec<f64>,
    pub occupancy: Vec<usize>,
    /// Grid-space energy `mean(u^2) / 2`.
    pub total_energy: f64,
}

impl SpectrumReport {
    /// Shell sums `E * occupancy`.
    pub fn shell_sums(&self) -> Vec<f64> {
        self.energy
            .iter()
            .zip(&self.occupancy)
            .map(|(e, &n)| e * n as f64)
            .collect()
    }
}

/// Energy spectrum of a row-major `ny x nx` periodic field on a `2*pi` box.
/// Shells are unit-width annuli in `round(|kappa|)`.
pub fn energy_spectrum(field: &[f64], nx: usize, ny: usize) -> Result<SpectrumReport> {
    if nx == 0 || ny == 0 || field.len() != nx * ny {
        return Err(Error::Shape(format!(
            "field of {} values is not a {ny}x{nx} grid",
            field.len()
        )));
    }
    let cells = (nx * ny) as f64;
    let spectrum = fft2(field, nx, ny);
    let max_k = ((nx / 2).pow(2) as f64 + (ny / 2).pow(2) as f64).sqrt().round() as usize;
    let mut sums = vec![0.0; max_k + 1];
    let mut occupancy = vec![0usize; max_k + 1];
    for ky in 0..ny {
        for kx in 0..nx {
            let (a, b) = (wavenumber(kx, nx) as f64, wavenumber(ky, ny) as f64);
            let shell = (a * a + b * b).sqrt().round() as usize;
            sums[shell] += 0.5 * (spectrum[ky * nx + kx] / cells).norm_sqr();
            occupancy[shell] += 1;
        }
    }
    let energy = sums
        .iter()
        .zip(&occupancy)
        .map(|(s, &n)| if n == 0 { 0.0 } else { s / n as f64 })
        .collect();
    Ok(SpectrumReport {
        kappa: (0..=max_k).map(|k| k as f64).collect(),
        energy,
        occupancy,
        total_energy: 0.5 * field.iter().map(|v| v * v).sum::<f64>() / cells,
    })
}

/// Density-normalized histogram with an optional Gaussian KDE.
#[derive(Debug, Clone, PartialEq)]
pub struct PdfReport {
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
    pub mean: f64,
    pub std_dev: f64,
    pub kde: Option<KdeCurve>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdeCurve {
    pub bandwidth: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

impl PdfReport {
    pub fn bin_centres(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// `sum(density * width)`.
    pub fn integral(&self) -> f64 {
        self.density
            .iter()
            .zip(self.edges.windows(2))
            .map(|(d, w)| d * (w[1] - w[0]))
            .sum()
    }
}

/// Histogram over `[min, max]` with `bins` equal bins; the KDE uses
/// Silverman's bandwidth `1.06 * sigma * n^(-1/5)` and is sampled at `bins`
/// points spanning `[min - 3h, max + 3h]`.
pub fn pdf_estimate(samples: &[f64], bins: usize, kde: bool) -> Result<PdfReport> {
    if samples.is_empty() || bins == 0 {
        return Err(Error::Shape("need at least one sample and one bin".into()));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("samples must be finite".into()));
    }
    let n = samples.len() as f64;
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0usize; bins];
    for &v in samples {
        let i = (((v - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    let density = counts.iter().map(|&c| c as f64 / (n * width)).collect();
    let mean = samples.iter().sum::<f64>() / n;
    let var = if samples.len() > 1 {
        samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let std_dev = var.sqrt();

    let kde = if kde {
        if samples.len() < 2 {
            return Err(Error::Degenerate("KDE needs at least two samples".into()));
        }
        if std_dev == 0.0 {
            return Err(Error::Degenerate("KDE of zero-variance samples".into()));
        }
        let h = 1.06 * std_dev * n.powf(-0.2);
        let (a, b) = (lo.min(hi) - 3.0 * h, hi.max(lo) + 3.0 * h);
        let points = bins.max(2);
        let grid: Vec<f64> = (0..points)
            .map(|i| a + (b - a) * i as f64 / (points - 1) as f64)
            .collect();
        let norm = 1.0 / (n * h * (2.0 * PI).sqrt());
        let density = grid
            .par_iter()
            .map(|&x| norm * samples.iter().map(|&s| (-0.5 * ((x - s) / h).powi(2)).exp()).sum::<f64>())
            .collect();
        Some(KdeCurve {
            bandwidth: h,
            grid,
            density,
        })
    } else {
        None
    };
    Ok(PdfReport {
        edges,
        density,
        mean,
        std_dev,
        kde,
    })
}

/// How increments that leave the grid are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    /// Indices wrap around.
    #[default]
    Periodic,
    /// Only pairs with both points inside the grid are used.
    Interior,
}

/// `S_p(r)` for every order and separation.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureFunctions {
    pub orders: Vec<f64>,
    pub separations: Vec<usize>,
    /// `values[i][s]` is `S_{orders[i]}(separations[s])`.
    pub values: Vec<Vec<f64>>,
}

impl StructureFunctions {
    /// Least-squares slope of `log S_p` against `log r` over separations in
    /// `[r_min, r_max]`, one per order.
    pub fn scaling_exponents(&self, r_min: usize, r_max: usize) -> Result<Vec<f64>> {
        let used: Vec<usize> = (0..self.separations.len())
            .filter(|&s| (r_min..=r_max).contains(&self.separations[s]))
            .collect();
        if used.len() < 2 {
            return Err(Error::Fit(format!(
                "fitting range [{r_min}, {r_max}] holds fewer than two separations"
            )));
        }
        self.values
            .iter()
            .zip(&self.orders)
            .map(|(row, p)| {
                let pts: Vec<(f64, f64)> = used
                    .iter()
                    .map(|&s| {
                        let v = row[s];
                        if v > 0.0 {
                            Ok(((self.separations[s] as f64).ln(), v.ln()))
                        } else {
                            Err(Error::Fit(format!(
                                "S_{p} vanishes at r = {}; exponent undefined",
                                self.separations[s]
                            )))
                        }
                    })
                    .collect::<Result<_>>()?;
                Ok(ls_slope(&pts))
            })
            .collect()
    }
}

fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// `S_p(r) = mean |u(x + r e) - u(x)|^p` over positions and both grid axes.
/// Axes of length 1 contribute nothing.
pub fn structure_functions(
    field: &[f64],
    nx: usize,
    ny: usize,
    orders: &[f64],
    separations: &[usize],
    boundary: Boundary,
) -> Result<StructureFunctions> {
    if nx == 0 || ny == 0 || field.len() != nx * ny {
        return Err(Error::Shape(format!(
            "field of {} values is not a {ny}x{nx} grid",
            field.len()
        )));
    }
    if separations.contains(&0) {
        return Err(Error::Domain("separations must be positive".into()));
    }
    let values = orders
        .par_iter()
        .map(|&p| {
            separations
                .iter()
                .map(|&r| {
                    let mut sum = 0.0;
                    let mut count = 0usize;
                    let mut axis = |len: usize, other: usize, at: &dyn Fn(usize, usize) -> usize| {
                        if len < 2 {
                            return;
                        }
                        for o in 0..other {
                            for i in 0..len {
                                let j = match boundary {
                                    Boundary::Periodic => (i + r) % len,
                                    Boundary::Interior if i + r < len => i + r,
                                    Boundary::Interior => continue,
                                };
                                sum += (field[at(j, o)] - field[at(i, o)]).abs().powf(p);
                                count += 1;
                            }
                        }
                    };
                    axis(nx, ny, &|x, y| y * nx + x);
                    axis(ny, nx, &|y, x| y * nx + x);
                    if count == 0 {
                        f64::NAN
                    } else {
                        sum / count as f64
                    }
                })
                .collect()
        })
        .collect();
    Ok(StructureFunctions {
        orders: orders.to_vec(),
        separations: separations.to_vec(),
        values,
    })
}

/// Linear-interpolated percentile (`q` in `[0, 100]`).
pub fn percentile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = (q / 100.0).clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    Some(if i + 1 < v.len() {
        v[i] + frac * (v[i + 1] - v[i])
    } else {
        v[i]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::PayloadKind;
    use crate::encoders::FourierEncoder;
    use crate::layout::SubsystemLayout;
    use crate::unitary::DiagonalHamiltonian;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn relative_l2_trivial_cases() {
        let truth = [1.0, -2.0, 3.0];
        for mode in [ErrorMode::Rooted, ErrorMode::Squared] {
            assert_eq!(relative_l2(&truth, &truth, mode).unwrap(), 0.0);
            assert_eq!(relative_l2(&[0.0; 3], &truth, mode).unwrap(), 1.0);
            assert_eq!(relative_l2(&[2.0, -4.0, 6.0], &truth, mode).unwrap(), 1.0);
        }
        assert!(matches!(relative_l2(&[1.0], &[0.0], ErrorMode::Rooted), Err(Error::Domain(_))));
        assert!(matches!(relative_l2(&[1.0], &[1.0, 2.0], ErrorMode::Rooted), Err(Error::Shape(_))));
    }

    /// Keeps only the lower half of the spectrum (bins below d/4 and their mirrors).
    struct LowPass(FourierEncoder);

    impl ObservableEncoder for LowPass {
        fn layout(&self) -> &SubsystemLayout {
            self.0.layout()
        }
        fn encode(&self, x: &[f64]) -> Result<crate::layout::ObservableState> {
            let obs = self.0.encode(x)?;
            let d = x.len();
            let r = obs
                .modulus()
                .iter()
                .enumerate()
                .map(|(l, &r)| if l < d / 4 || l > d - d / 4 { r } else { 0.0 })
                .collect();
            crate::layout::ObservableState::new(obs.layout().clone(), r, obs.phase().to_vec())
        }
        fn decode(&self, obs: &crate::layout::ObservableState) -> Result<Vec<f64>> {
            self.0.decode(obs)
        }
    }

    #[test]
    fn reconstruction_of_truncated_spectrum_is_lost_energy_fraction() {
        let d = 32;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ds = TrajectoryDataset::new(PayloadKind::State, vec![d], 1.0, vec![x.clone()]).unwrap();
        let enc = LowPass(FourierEncoder::new(d).unwrap());
        let full = FourierEncoder::new(d).unwrap().encode(&x).unwrap();
        let total: f64 = full.modulus().iter().map(|r| r * r).sum();
        let lost: f64 = full
            .modulus()
            .iter()
            .enumerate()
            .filter(|(l, _)| !(*l < d / 4 || *l > d - d / 4))
            .map(|(_, r)| r * r)
            .sum();
        let loss = reconstruction_loss(&enc, &[ds]).unwrap();
        assert!((loss - lost / total).abs() < 1e-12);
    }

    #[test]
    fn frozen_model_prediction_loss() {
        let d = 16;
        let field = |t: f64| -> Vec<f64> {
            (0..d)
                .map(|m| 1.0 + (2.0 * PI * m as f64 / d as f64 - t).cos())
                .collect()
        };
        let snaps: Vec<Vec<f64>> = (0..4).map(|k| field(0.2 * k as f64)).collect();
        let ds = TrajectoryDataset::new(PayloadKind::State, vec![d], 0.2, snaps.clone()).unwrap();
        let enc = FourierEncoder::new(d).unwrap();
        let model = KoopmanModel::new(DiagonalHamiltonian::zeros(SubsystemLayout::single(d).unwrap()), None).unwrap();
        let got = prediction_loss(&enc, &model, &[ds.clone()]).unwrap();
        let expected: f64 = (1..4)
            .map(|k| squared_relative(&snaps[0], &snaps[k]).unwrap())
            .sum::<f64>()
            / 3.0;
        assert!((got - expected).abs() < 1e-14);

        let one = TrajectoryDataset::new(PayloadKind::State, vec![d], 0.2, snaps[..2].to_vec()).unwrap();
        let single = prediction_loss(&enc, &model, &[one]).unwrap();
        assert!((single - squared_relative(&snaps[0], &snaps[1]).unwrap()).abs() < 1e-14);

        let zero_steps = TrajectoryDataset::new(PayloadKind::State, vec![d], 0.2, snaps[..1].to_vec()).unwrap();
        let pair = pair_loss(&enc, &model, &[zero_steps.clone()]).unwrap();
        assert_eq!((pair.zero_step_pairs, pair.rollout_pairs), (1, 0));
        assert!((pair.loss - reconstruction_loss(&enc, &[zero_steps]).unwrap()).abs() < 1e-20);
    }

    #[test]
    fn spectrum_single_mode_and_constant() {
        let (nx, ny) = (32, 16);
        let field: Vec<f64> = (0..nx * ny)
            .map(|i| (3.0 * 2.0 * PI * (i % nx) as f64 / nx as f64).cos())
            .collect();
        let s = energy_spectrum(&field, nx, ny).unwrap();
        let sums = s.shell_sums();
        for (k, e) in sums.iter().enumerate() {
            if k == 3 {
                assert!((e - 0.25).abs() < 1e-12);
            } else {
                assert!(e.abs() < 1e-20, "shell {k}: {e}");
            }
        }
        let c = energy_spectrum(&vec![2.0; nx * ny], nx, ny).unwrap();
        assert!((c.shell_sums()[0] - 2.0).abs() < 1e-12);
        assert!(c.shell_sums()[1..].iter().all(|e| e.abs() < 1e-24));
    }

    #[test]
    fn spectrum_parseval() {
        let (nx, ny) = (64, 32);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let field: Vec<f64> = (0..nx * ny).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = energy_spectrum(&field, nx, ny).unwrap();
        let total: f64 = s.shell_sums().iter().sum();
        assert!((total - s.total_energy).abs() <= 1e-9 * s.total_energy);
        assert_eq!(s.occupancy.iter().sum::<usize>(), nx * ny);
    }

    #[test]
    fn histogram_is_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let samples: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>()).collect();
        let pdf = pdf_estimate(&samples, 20, false).unwrap();
        assert!((pdf.integral() - 1.0).abs() < 1e-12);
        for d in &pdf.density {
            assert!((d - 1.0).abs() < 0.05, "{d}");
        }
    }

    #[test]
    fn kde_two_points_symmetric() {
        let pdf = pdf_estimate(&[0.0, 1.0], 41, true).unwrap();
        let kde = pdf.kde.unwrap();
        let n = kde.grid.len();
        for i in 0..n {
            assert!((kde.grid[i] - 0.5 + (kde.grid[n - 1 - i] - 0.5)).abs() < 1e-12);
            assert!((kde.density[i] - kde.density[n - 1 - i]).abs() < 1e-12);
        }
        assert!(matches!(pdf_estimate(&[1.0, 1.0, 1.0], 5, true), Err(Error::Degenerate(_))));
        assert!(matches!(pdf_estimate(&[1.0], 5, true), Err(Error::Degenerate(_))));
    }

    #[test]
    fn structure_function_linear_and_constant() {
        let (nx, ny) = (64, 1);
        let a = 0.3;
        let field: Vec<f64> = (0..nx).map(|x| a * x as f64).collect();
        let orders = [1.0, 2.0, 3.0];
        let seps = [1, 2, 4, 8, 16];
        let sf = structure_functions(&field, nx, ny, &orders, &seps, Boundary::Interior).unwrap();
        for (i, p) in orders.iter().enumerate() {
            for (s, r) in seps.iter().enumerate() {
                let expected = (a * *r as f64).powf(*p);
                assert!((sf.values[i][s] - expected).abs() < 1e-12 * expected.max(1.0));
            }
        }
        let xi = sf.scaling_exponents(1, 16).unwrap();
        for (x, p) in xi.iter().zip(&orders) {
            assert!((x - p).abs() < 1e-10);
        }
        let flat = structure_functions(&vec![1.5; 64], 8, 8, &orders, &seps[..3], Boundary::Periodic).unwrap();
        assert!(flat.values.iter().flatten().all(|&v| v == 0.0));
        assert!(matches!(sf.scaling_exponents(100, 200), Err(Error::Fit(_))));
    }

    #[test]
    fn structure_function_single_mode() {
        let (nx, ny) = (64, 64);
        let kappa = 3.0;
        let amp = 0.7;
        let field: Vec<f64> = (0..nx * ny)
            .map(|i| {
                let (x, y) = ((i % nx) as f64, (i / nx) as f64);
                amp * (kappa * 2.0 * PI * x / nx as f64).sin() + amp * (kappa * 2.0 * PI * y / ny as f64).sin()
            })
            .collect();
        let seps: Vec<usize> = (1..10).collect();
        let sf = structure_functions(&field, nx, ny, &[2.0], &seps, Boundary::Periodic).unwrap();
        let variance = amp * amp / 2.0;
        for (s, &r) in seps.iter().enumerate() {
            let expected = 2.0 * variance * (1.0 - (kappa * 2.0 * PI * r as f64 / nx as f64).cos());
            assert!((sf.values[0][s] - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn percentile_interpolates() {
        let v = [4.0, 1.0, 3.0, 2.0, 5.0];
        assert_eq!(percentile(&v, 50.0), Some(3.0));
        assert_eq!(percentile(&v, 0.0), Some(1.0));
        assert_eq!(percentile(&v, 100.0), Some(5.0));
        assert!((percentile(&v, 10.0).unwrap() - 1.4).abs() < 1e-12);
        assert_eq!(percentile(&[], 50.0), None);
    }
}
