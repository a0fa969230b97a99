//! Analytic observable maps `x -> (r, phi)` and their inverses, plus the
//! loader for externally produced latent trajectories.

use num_complex::Complex64;

use crate::dataset::{PayloadKind, TrajectoryDataset};
use crate::error::{Error, Result};
use crate::fit::{fit_ensemble, modulus_mask, PhaseTrajectory, SystemFit};
use crate::layout::{ObservableState, SubsystemLayout};
use crate::spectral::Dft;
use crate::unitary::wrap_phase;

/// A state-to-observable map with an inverse.
pub trait ObservableEncoder: Send + Sync {
    fn layout(&self) -> &SubsystemLayout;
    fn encode(&self, state: &[f64]) -> Result<ObservableState>;
    fn decode(&self, observable: &ObservableState) -> Result<Vec<f64>>;
}

fn single_block(layout: SubsystemLayout) -> Result<SubsystemLayout> {
    if layout.subsystem_count() != 1 || layout.channels() != 1 {
        return Err(Error::Layout(format!(
            "encoder needs h = 1 and c = 1, got c = {} and h = {}",
            layout.channels(),
            layout.subsystem_count()
        )));
    }
    Ok(layout)
}

fn check_layout(expected: &SubsystemLayout, obs: &ObservableState) -> Result<()> {
    if obs.layout() != expected {
        return Err(Error::Layout("observable layout does not match the encoder".into()));
    }
    Ok(())
}

/// Torus angles used directly as phases with unit modulus.
#[derive(Debug, Clone)]
pub struct IdentityPhaseEncoder {
    layout: SubsystemLayout,
}

impl IdentityPhaseEncoder {
    pub fn new(d: usize) -> Result<Self> {
        Self::with_layout(SubsystemLayout::single(d)?)
    }

    pub fn with_layout(layout: SubsystemLayout) -> Result<Self> {
        Ok(Self {
            layout: single_block(layout)?,
        })
    }
}

impl ObservableEncoder for IdentityPhaseEncoder {
    fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    fn encode(&self, angles: &[f64]) -> Result<ObservableState> {
        if angles.len() != self.layout.total() {
            return Err(Error::Layout(format!(
                "encoder expects {} angles, got {}",
                self.layout.total(),
                angles.len()
            )));
        }
        ObservableState::new(self.layout.clone(), vec![1.0; angles.len()], angles.to_vec())
    }

    /// Angles wrapped to `(-pi, pi]`.
    fn decode(&self, obs: &ObservableState) -> Result<Vec<f64>> {
        check_layout(&self.layout, obs)?;
        Ok(obs.phase().iter().map(|&p| wrap_phase(p)).collect())
    }
}

/// DFT bins as observables: `r_l = |X_l|`, `phi_l = arg X_l`, natural
/// frequency order, unnormalized forward transform and `1/d` inverse.
///
/// Bins with exactly zero modulus get phase 0.
#[derive(Debug, Clone)]
pub struct FourierEncoder {
    layout: SubsystemLayout,
    dft: Dft,
    symmetry_tolerance: Option<f64>,
}

impl FourierEncoder {
    pub const DEFAULT_SYMMETRY_TOLERANCE: f64 = 1e-9;

    /// Strict encoder: decoding fails when the imaginary residue exceeds
    /// `1e-9 * max(1, max |x|)`.
    pub fn new(d: usize) -> Result<Self> {
        let layout = single_block(SubsystemLayout::single(d)?)?;
        Ok(Self {
            dft: Dft::new(d),
            layout,
            symmetry_tolerance: Some(Self::DEFAULT_SYMMETRY_TOLERANCE),
        })
    }

    /// Encoder whose decode always keeps the real part, for observables
    /// evolved by models that do not preserve conjugate symmetry.
    pub fn lenient(d: usize) -> Result<Self> {
        Ok(Self {
            symmetry_tolerance: None,
            ..Self::new(d)?
        })
    }

    pub fn symmetry_tolerance(&self) -> Option<f64> {
        self.symmetry_tolerance
    }

    /// Inverse transform returning the real field and the largest
    /// imaginary residue, without enforcing the tolerance.
    pub fn decode_with_residue(&self, obs: &ObservableState) -> Result<(Vec<f64>, f64)> {
        check_layout(&self.layout, obs)?;
        let mut buf = obs.assemble();
        self.dft.inverse(&mut buf);
        let scale = 1.0 / buf.len() as f64;
        let residue = buf.iter().map(|z| (z.im * scale).abs()).fold(0.0, f64::max);
        Ok((buf.iter().map(|z| z.re * scale).collect(), residue))
    }
}

impl ObservableEncoder for FourierEncoder {
    fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    fn encode(&self, field: &[f64]) -> Result<ObservableState> {
        let d = self.layout.total();
        if field.len() != d {
            return Err(Error::Shape(format!("field has {} samples, expected {d}", field.len())));
        }
        let mut buf: Vec<Complex64> = field.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.dft.forward(&mut buf);
        let modulus = buf.iter().map(|z| z.norm()).collect();
        let phase = buf
            .iter()
            .map(|z| if z.norm() == 0.0 { 0.0 } else { z.arg() })
            .collect();
        ObservableState::new(self.layout.clone(), modulus, phase)
    }

    fn decode(&self, obs: &ObservableState) -> Result<Vec<f64>> {
        let (field, residue) = self.decode_with_residue(obs)?;
        if let Some(tol) = self.symmetry_tolerance {
            let scale = field.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            if residue > tol * scale {
                return Err(Error::Symmetry {
                    residue,
                    tolerance: tol * scale,
                });
            }
        }
        Ok(field)
    }
}

/// Metadata key holding `"<d> <c> <h>"` for latent containers.
pub const LATENT_LAYOUT_KEY: &str = "layout";

/// Per-step modulus and phase planes produced by an external encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTrajectory {
    layout: SubsystemLayout,
    dt: f64,
    modulus: Vec<Vec<f64>>,
    phase: Vec<Vec<f64>>,
    drift: f64,
}

impl LatentTrajectory {
    pub fn new(layout: SubsystemLayout, dt: f64, modulus: Vec<Vec<f64>>, phase: Vec<Vec<f64>>) -> Result<Self> {
        if modulus.is_empty() || modulus.len() != phase.len() {
            return Err(Error::Shape(format!(
                "{} modulus and {} phase rows",
                modulus.len(),
                phase.len()
            )));
        }
        for (k, (r, p)) in modulus.iter().zip(&phase).enumerate() {
            // validates lengths and sign
            ObservableState::new(layout.clone(), r.clone(), p.clone())
                .map_err(|e| Error::Shape(format!("step {k}: {e}")))?;
        }
        let drift = modulus
            .iter()
            .flat_map(|r| r.iter().zip(&modulus[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        Ok(Self {
            layout,
            dt,
            modulus,
            phase,
            drift,
        })
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.modulus.len() - 1
    }

    /// `max_{k,l} |r_l(k) - r_l(0)|`.
    pub fn modulus_drift(&self) -> f64 {
        self.drift
    }

    pub fn observable(&self, k: usize) -> Result<ObservableState> {
        let r = self
            .modulus
            .get(k)
            .ok_or_else(|| Error::Index(format!("step {k} out of range")))?;
        ObservableState::new(self.layout.clone(), r.clone(), self.phase[k].clone())
    }

    pub fn modulus_rows(&self) -> &[Vec<f64>] {
        &self.modulus
    }

    /// One phase trajectory per subsystem.
    pub fn phase_trajectories(&self) -> Result<Vec<PhaseTrajectory>> {
        (0..self.layout.subsystem_count())
            .map(|j| {
                let range = self.layout.range(j)?;
                let flat = self.phase.iter().flat_map(|p| p[range.clone()].iter().copied()).collect();
                PhaseTrajectory::from_flat(self.dt, range.len(), flat)
            })
            .collect()
    }

    pub fn to_dataset(&self) -> Result<TrajectoryDataset> {
        let n = self.layout.total();
        let snapshots = self
            .modulus
            .iter()
            .zip(&self.phase)
            .map(|(r, p)| [r.as_slice(), p.as_slice()].concat())
            .collect();
        Ok(
            TrajectoryDataset::new(PayloadKind::Latent, vec![2, n], self.dt, snapshots)?.with_metadata(
                LATENT_LAYOUT_KEY,
                format!(
                    "{} {} {}",
                    self.layout.state_dim(),
                    self.layout.channels(),
                    self.layout.subsystem_count()
                ),
            ),
        )
    }
}

/// Validates a latent container (payload kind 1, shape `[2, N]`, layout in
/// metadata) and converts it.
pub fn load_latent_trajectory(ds: &TrajectoryDataset) -> Result<LatentTrajectory> {
    let fail = |m: String| Error::format(0, m);
    if ds.kind() != PayloadKind::Latent {
        return Err(fail("container does not hold a latent payload".into()));
    }
    let entry = ds
        .meta(LATENT_LAYOUT_KEY)
        .ok_or_else(|| fail(format!("latent container lacks `{LATENT_LAYOUT_KEY}` metadata")))?;
    let parts: Vec<usize> = entry
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| fail(format!("bad layout entry {s:?}"))))
        .collect::<Result<_>>()?;
    let [d, c, h] = parts[..] else {
        return Err(fail(format!("layout must be `<d> <c> <h>`, got {entry:?}")));
    };
    let layout = SubsystemLayout::new(d, c, h).map_err(|e| fail(e.to_string()))?;
    let n = layout.total();
    if ds.shape() != [2, n] {
        return Err(fail(format!(
            "latent planes have shape {:?}, layout needs [2, {n}]",
            ds.shape()
        )));
    }
    let (modulus, phase) = ds
        .snapshots()
        .map(|s| (s[..n].to_vec(), s[n..].to_vec()))
        .unzip();
    LatentTrajectory::new(layout, ds.dt(), modulus, phase).map_err(|e| fail(e.to_string()))
}

/// Encodes every snapshot of a state trajectory.
pub fn encode_trajectory(encoder: &dyn ObservableEncoder, ds: &TrajectoryDataset) -> Result<LatentTrajectory> {
    let (modulus, phase) = ds
        .snapshots()
        .map(|x| encoder.encode(x).map(|o| {
            let (_, r, p) = o.into_parts();
            (r, p)
        }))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    LatentTrajectory::new(encoder.layout().clone(), ds.dt(), modulus, phase)
}

/// Fits one model to latent trajectories sharing a layout and time step.
/// With `mask_threshold`, an index is excluded when its modulus falls to or
/// below that fraction of the block peak in any trajectory.
pub fn fit_latent(
    latents: &[LatentTrajectory],
    include_global_phase: bool,
    mask_threshold: Option<f64>,
) -> Result<SystemFit> {
    let first = latents
        .first()
        .ok_or_else(|| Error::Shape("no latent trajectories to fit".into()))?;
    let layout = first.layout();
    if let Some(other) = latents.iter().find(|l| l.layout() != layout) {
        return Err(Error::Layout(format!(
            "latent layouts differ: {} vs {} observables",
            layout.total(),
            other.layout().total()
        )));
    }
    let ensemble = latents
        .iter()
        .map(|l| l.phase_trajectories())
        .collect::<Result<Vec<_>>>()?;
    let masks = mask_threshold.map(|thr| {
        (0..layout.subsystem_count())
            .map(|j| {
                let range = layout.range(j).expect("subsystem index in range");
                let mut keep = vec![true; range.len()];
                for latent in latents {
                    let rows: Vec<&[f64]> = latent.modulus_rows().iter().map(|r| &r[range.clone()]).collect();
                    for (k, m) in keep.iter_mut().zip(modulus_mask(&rows, thr)) {
                        *k &= m;
                    }
                }
                keep
            })
            .collect::<Vec<_>>()
    });
    fit_ensemble(&ensemble, layout, first.dt(), include_global_phase, masks.as_deref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// O(d^2) DFT used as an independent check of the FFT path.
    fn naive_dft(x: &[f64]) -> Vec<Complex64> {
        let d = x.len();
        (0..d)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(m, &v)| v * Complex64::cis(-2.0 * PI * (k * m) as f64 / d as f64))
                    .sum()
            })
            .collect()
    }

    #[test]
    fn identity_encoder() {
        let enc = IdentityPhaseEncoder::new(2).unwrap();
        let obs = enc.encode(&[PI / 3.0, -PI / 4.0]).unwrap();
        assert_eq!(obs.modulus(), &[1.0, 1.0]);
        assert_eq!(obs.phase(), &[PI / 3.0, -PI / 4.0]);
        let zeros = enc.encode(&[0.0, 0.0]).unwrap();
        assert_eq!(zeros.phase(), &[0.0, 0.0]);
        let back = enc.decode(&enc.encode(&[7.0, -4.0]).unwrap()).unwrap();
        assert!((back[0] - wrap_phase(7.0)).abs() < 1e-15);
        assert!((back[1] - wrap_phase(-4.0)).abs() < 1e-15);
        assert!(matches!(enc.encode(&[0.0; 3]), Err(Error::Layout(_))));
        assert!(matches!(
            IdentityPhaseEncoder::with_layout(SubsystemLayout::new(4, 2, 1).unwrap()),
            Err(Error::Layout(_))
        ));
    }

    #[test]
    fn fourier_constant_field() {
        let enc = FourierEncoder::new(4).unwrap();
        let obs = enc.encode(&[1.5; 4]).unwrap();
        assert!((obs.modulus()[0] - 6.0).abs() < 1e-15);
        assert!(obs.modulus()[1..].iter().all(|&r| r < 1e-15));
        assert_eq!(obs.phase()[0], 0.0);
    }

    #[test]
    fn fourier_negative_dc_is_pi() {
        let enc = FourierEncoder::new(4).unwrap();
        let obs = enc.encode(&[-1.0; 4]).unwrap();
        assert!((obs.modulus()[0] - 4.0).abs() < 1e-15);
        assert!((obs.phase()[0].abs() - PI).abs() < 1e-15);
    }

    #[test]
    fn fourier_cosine() {
        let d = 16;
        let enc = FourierEncoder::new(d).unwrap();
        let field: Vec<f64> = (0..d).map(|m| (2.0 * PI * m as f64 / d as f64).cos()).collect();
        let obs = enc.encode(&field).unwrap();
        for (l, r) in obs.modulus().iter().enumerate() {
            let expected = if l == 1 || l == d - 1 { d as f64 / 2.0 } else { 0.0 };
            assert!((r - expected).abs() < 1e-12, "bin {l}: {r}");
        }
    }

    #[test]
    fn fourier_matches_naive_dft_and_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = 32;
        let enc = FourierEncoder::new(d).unwrap();
        for _ in 0..10 {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let obs = enc.encode(&x).unwrap();
            for (z, w) in obs.assemble().iter().zip(naive_dft(&x)) {
                assert!((z - w).norm() < 1e-12);
            }
            let back = enc.decode(&obs).unwrap();
            for (a, b) in back.iter().zip(&x) {
                assert!((a - b).abs() < 1e-12);
            }
            let energy: f64 = x.iter().map(|v| v * v).sum();
            let spectral: f64 = obs.modulus().iter().map(|r| r * r).sum();
            assert!((spectral - d as f64 * energy).abs() < 1e-9 * spectral);
        }
        assert!(matches!(enc.encode(&[0.0; 8]), Err(Error::Shape(_))));
    }

    #[test]
    fn fourier_single_mode_decode() {
        let d = 8;
        let enc = FourierEncoder::new(d).unwrap();
        let mut r = vec![0.0; d];
        let mut p = vec![0.0; d];
        r[2] = 4.0;
        r[d - 2] = 4.0;
        p[2] = 0.3;
        p[d - 2] = -0.3;
        let field = enc
            .decode(&ObservableState::new(enc.layout().clone(), r, p).unwrap())
            .unwrap();
        for (m, v) in field.iter().enumerate() {
            let expected = (2.0 * PI * 2.0 * m as f64 / d as f64 + 0.3).cos();
            assert!((v - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn asymmetric_spectrum_is_rejected() {
        let d = 8;
        let enc = FourierEncoder::new(d).unwrap();
        let mut r = vec![0.0; d];
        r[1] = 8e-3;
        let obs = ObservableState::new(enc.layout().clone(), r, vec![0.0; d]).unwrap();
        let (_, residue) = enc.decode_with_residue(&obs).unwrap();
        assert!(residue > 5e-4);
        assert!(matches!(enc.decode(&obs), Err(Error::Symmetry { .. })));
        assert!(FourierEncoder::lenient(d).unwrap().decode(&obs).is_ok());
    }

    fn latent(drift: f64) -> LatentTrajectory {
        let layout = SubsystemLayout::new(2, 2, 2).unwrap();
        let modulus: Vec<Vec<f64>> = (0..4).map(|k| vec![1.0 + drift * k as f64 / 3.0; 6]).collect();
        let phase: Vec<Vec<f64>> = (0..4).map(|k| vec![0.1 * k as f64; 6]).collect();
        LatentTrajectory::new(layout, 0.5, modulus, phase).unwrap()
    }

    #[test]
    fn latent_round_trip_and_drift() {
        let still = latent(0.0);
        let ds = still.to_dataset().unwrap();
        let back = load_latent_trajectory(&TrajectoryDataset::from_bytes(&ds.to_bytes()).unwrap()).unwrap();
        assert_eq!(back, still);
        assert_eq!(back.modulus_drift(), 0.0);
        let moving = latent(0.05);
        assert!((moving.modulus_drift() - 0.05).abs() < 1e-15);
        let tr = moving.phase_trajectories().unwrap();
        assert_eq!(tr.len(), 2);
        assert_eq!(tr[1].width(), 2);
        assert_eq!(tr[0].steps(), 3);
    }

    #[test]
    fn latent_format_errors() {
        let ds = latent(0.0).to_dataset().unwrap();
        let bytes = ds.to_bytes();
        assert!(matches!(
            TrajectoryDataset::from_bytes(&bytes[..bytes.len() - 3]),
            Err(Error::Format { .. })
        ));
        let raw = TrajectoryDataset::new(PayloadKind::State, vec![2, 6], 0.5, vec![vec![0.0; 12]]).unwrap();
        assert!(matches!(load_latent_trajectory(&raw), Err(Error::Format { .. })));
        let wrong = TrajectoryDataset::new(PayloadKind::Latent, vec![2, 5], 0.5, vec![vec![1.0; 10]])
            .unwrap()
            .with_metadata(LATENT_LAYOUT_KEY, "2 2 2");
        assert!(matches!(load_latent_trajectory(&wrong), Err(Error::Format { .. })));
    }
}
