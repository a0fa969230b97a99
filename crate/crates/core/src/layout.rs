//! Subsystem hierarchy and the modulus-phase observable representation.
//!
//! A layout splits an observable space of total dimension
//! `N = (2 - 2^(1-h)) * c * d` into `h` blocks whose sizes halve from
//! `N_1 = c * d` down to `N_h = 2^(1-h) * c * d`. Every block size is a
//! power of two so that block `j` can be held by `n_j = log2(N_j)` qubits.

use std::ops::Range;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// The `(d, c, h)` hierarchy with per-subsystem dimensions.
///
/// Subsystems are indexed from zero.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubsystemLayout {
    state_dim: usize,
    channels: usize,
    dims: Vec<usize>,
    qubits: Vec<u32>,
    offsets: Vec<usize>,
}

impl SubsystemLayout {
    /// Builds the layout for state dimension `d`, channel count `c` and
    /// `h` subsystems.
    pub fn new(state_dim: usize, channels: usize, subsystems: usize) -> Result<Self> {
        if state_dim == 0 || channels == 0 || subsystems == 0 {
            return Err(Error::Layout(format!(
                "d, c and h must be positive (got d={state_dim}, c={channels}, h={subsystems})"
            )));
        }
        let first = state_dim
            .checked_mul(channels)
            .ok_or_else(|| Error::Layout("c*d overflows".into()))?;
        if !first.is_power_of_two() {
            return Err(Error::Layout(format!(
                "c*d = {first} is not a power of two"
            )));
        }
        let n1 = first.trailing_zeros();
        // smallest block needs at least one qubit
        if subsystems as u64 > n1 as u64 {
            return Err(Error::Layout(format!(
                "h = {subsystems} too large for c*d = {first}: the smallest subsystem would have fewer than 2 states"
            )));
        }
        let dims: Vec<usize> = (0..subsystems).map(|j| first >> j).collect();
        let qubits = (0..subsystems as u32).map(|j| n1 - j).collect();
        let mut offsets = Vec::with_capacity(subsystems + 1);
        offsets.push(0);
        for &n in &dims {
            offsets.push(offsets.last().unwrap() + n);
        }
        Ok(Self {
            state_dim,
            channels,
            dims,
            qubits,
            offsets,
        })
    }

    /// Single-block layout of dimension `n` (`d = n`, `c = 1`, `h = 1`).
    pub fn single(n: usize) -> Result<Self> {
        Self::new(n, 1, 1)
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn subsystem_count(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn qubits(&self) -> &[u32] {
        &self.qubits
    }

    /// Total observable dimension `N`.
    pub fn total(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn dim(&self, j: usize) -> Result<usize> {
        self.check(j).map(|_| self.dims[j])
    }

    pub fn qubit_count(&self, j: usize) -> Result<u32> {
        self.check(j).map(|_| self.qubits[j])
    }

    /// Index range of subsystem `j` within the concatenated observable.
    pub fn range(&self, j: usize) -> Result<Range<usize>> {
        self.check(j)?;
        Ok(self.offsets[j]..self.offsets[j + 1])
    }

    fn check(&self, j: usize) -> Result<()> {
        if j < self.dims.len() {
            Ok(())
        } else {
            Err(Error::Index(format!(
                "subsystem {j} out of range for h = {}",
                self.dims.len()
            )))
        }
    }
}

/// Element-wise `r_l * exp(i phi_l)`.
pub fn assemble_observable(modulus: &[f64], phase: &[f64]) -> Result<Vec<Complex64>> {
    if modulus.len() != phase.len() {
        return Err(Error::Shape(format!(
            "modulus has {} entries, phase has {}",
            modulus.len(),
            phase.len()
        )));
    }
    check_modulus(modulus)?;
    Ok(modulus
        .iter()
        .zip(phase)
        .map(|(&r, &p)| Complex64::from_polar(r, p))
        .collect())
}

fn check_modulus(modulus: &[f64]) -> Result<()> {
    match modulus.iter().position(|&r| !(r >= 0.0) || !r.is_finite()) {
        Some(l) => Err(Error::Domain(format!(
            "modulus entry {l} is {} (must be finite and nonnegative)",
            modulus[l]
        ))),
        None => Ok(()),
    }
}

/// Concatenated modulus and (unwrapped) phase over all subsystems.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableState {
    layout: SubsystemLayout,
    modulus: Vec<f64>,
    phase: Vec<f64>,
}

impl ObservableState {
    pub fn new(layout: SubsystemLayout, modulus: Vec<f64>, phase: Vec<f64>) -> Result<Self> {
        let n = layout.total();
        if modulus.len() != n || phase.len() != n {
            return Err(Error::Shape(format!(
                "layout total is {n}, got modulus {} and phase {}",
                modulus.len(),
                phase.len()
            )));
        }
        check_modulus(&modulus)?;
        if let Some(l) = phase.iter().position(|p| !p.is_finite()) {
            return Err(Error::Domain(format!("phase entry {l} is not finite")));
        }
        Ok(Self {
            layout,
            modulus,
            phase,
        })
    }

    /// Builds a state from per-subsystem `(r_j, phi_j)` blocks in order.
    pub fn from_blocks(layout: SubsystemLayout, blocks: &[(Vec<f64>, Vec<f64>)]) -> Result<Self> {
        if blocks.len() != layout.subsystem_count() {
            return Err(Error::Layout(format!(
                "expected {} blocks, got {}",
                layout.subsystem_count(),
                blocks.len()
            )));
        }
        let mut modulus = Vec::with_capacity(layout.total());
        let mut phase = Vec::with_capacity(layout.total());
        for (j, (r, p)) in blocks.iter().enumerate() {
            let n = layout.dims()[j];
            if r.len() != n || p.len() != n {
                return Err(Error::Shape(format!(
                    "block {j} must have length {n}, got ({}, {})",
                    r.len(),
                    p.len()
                )));
            }
            modulus.extend_from_slice(r);
            phase.extend_from_slice(p);
        }
        Self::new(layout, modulus, phase)
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn modulus(&self) -> &[f64] {
        &self.modulus
    }

    pub fn phase(&self) -> &[f64] {
        &self.phase
    }

    /// Views `(r_j, phi_j)` of subsystem `j`.
    pub fn split(&self, j: usize) -> Result<(&[f64], &[f64])> {
        let range = self.layout.range(j)?;
        Ok((&self.modulus[range.clone()], &self.phase[range]))
    }

    /// The complex observable `r ⊙ exp(i phi)`.
    pub fn assemble(&self) -> Vec<Complex64> {
        self.modulus
            .iter()
            .zip(&self.phase)
            .map(|(&r, &p)| Complex64::from_polar(r, p))
            .collect()
    }

    /// Replaces the phase vector, keeping modulus and layout.
    pub fn with_phase(&self, phase: Vec<f64>) -> Result<Self> {
        Self::new(self.layout.clone(), self.modulus.clone(), phase)
    }

    pub fn into_parts(self) -> (SubsystemLayout, Vec<f64>, Vec<f64>) {
        (self.layout, self.modulus, self.phase)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn four_subsystems_sixteen_channels() {
        let layout = SubsystemLayout::new(16384, 16, 4).unwrap();
        assert_eq!(layout.dims(), &[262144, 131072, 65536, 32768]);
        assert_eq!(layout.qubits(), &[18, 17, 16, 15]);
        assert_eq!(layout.total(), 491520);
    }

    #[test]
    fn single_subsystem_is_c_times_d() {
        let layout = SubsystemLayout::new(8, 2, 1).unwrap();
        assert_eq!(layout.dims(), &[16]);
        assert_eq!(layout.total(), 16);
    }

    #[test]
    fn three_subsystems() {
        let layout = SubsystemLayout::new(4, 2, 3).unwrap();
        assert_eq!(layout.dims(), &[8, 4, 2]);
        assert_eq!(layout.qubits(), &[3, 2, 1]);
        assert_eq!(layout.total(), 14);
        assert_eq!(layout.range(1).unwrap(), 8..12);
    }

    #[test]
    fn rejects_bad_layouts() {
        assert!(matches!(SubsystemLayout::new(6, 1, 1), Err(Error::Layout(_))));
        assert!(matches!(SubsystemLayout::new(3, 2, 1), Err(Error::Layout(_))));
        // c*d = 4 supports h <= 2
        assert!(SubsystemLayout::new(2, 2, 2).is_ok());
        assert!(matches!(SubsystemLayout::new(2, 2, 3), Err(Error::Layout(_))));
        assert!(matches!(SubsystemLayout::new(0, 2, 1), Err(Error::Layout(_))));
    }

    #[test]
    fn closure_over_small_grid() {
        for d_exp in 0..7u32 {
            for c_exp in 0..4u32 {
                let (d, c) = (1usize << d_exp, 1usize << c_exp);
                for h in 1..=(d_exp + c_exp) as usize {
                    let layout = SubsystemLayout::new(d, c, h).unwrap();
                    let expected = (2.0 - 2f64.powi(1 - h as i32)) * (c * d) as f64;
                    assert_eq!(layout.total() as f64, expected);
                    assert_eq!(layout.dims().iter().sum::<usize>(), layout.total());
                    let mut covered = vec![false; layout.total()];
                    for j in 0..h {
                        for i in layout.range(j).unwrap() {
                            assert!(!covered[i]);
                            covered[i] = true;
                        }
                        assert_eq!(1usize << layout.qubits()[j], layout.dims()[j]);
                    }
                    assert!(covered.into_iter().all(|c| c));
                }
            }
        }
    }

    #[test]
    fn assemble_examples() {
        let z = assemble_observable(&[1.0], &[0.0]).unwrap();
        assert_eq!(z[0], Complex64::new(1.0, 0.0));
        let z = assemble_observable(&[2.0], &[PI / 2.0]).unwrap();
        assert!((z[0] - Complex64::new(0.0, 2.0)).norm() < 1e-15);
        let z = assemble_observable(&[0.0], &[1.234]).unwrap();
        assert_eq!(z[0].norm(), 0.0);
    }

    #[test]
    fn assemble_errors() {
        assert!(matches!(
            assemble_observable(&[1.0, 2.0], &[0.0]),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            assemble_observable(&[-1.0], &[0.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn split_round_trip() {
        let layout = SubsystemLayout::new(4, 2, 3).unwrap();
        let r: Vec<f64> = (0..14).map(|i| i as f64).collect();
        let p: Vec<f64> = (0..14).map(|i| -(i as f64)).collect();
        let state = ObservableState::new(layout.clone(), r.clone(), p.clone()).unwrap();
        let (r1, p1) = state.split(1).unwrap();
        assert_eq!(r1, &[8.0, 9.0, 10.0, 11.0]);
        assert_eq!(p1, &[-8.0, -9.0, -10.0, -11.0]);
        let blocks: Vec<_> = (0..3)
            .map(|j| {
                let (a, b) = state.split(j).unwrap();
                (a.to_vec(), b.to_vec())
            })
            .collect();
        let rebuilt = ObservableState::from_blocks(layout, &blocks).unwrap();
        assert_eq!(rebuilt, state);
        assert!(matches!(state.split(3), Err(Error::Index(_))));
    }

    #[test]
    fn single_block_split_is_whole_state() {
        let layout = SubsystemLayout::single(4).unwrap();
        let state = ObservableState::new(layout, vec![1.0; 4], vec![0.5; 4]).unwrap();
        let (r, p) = state.split(0).unwrap();
        assert_eq!(r, state.modulus());
        assert_eq!(p, state.phase());
    }

    proptest::proptest! {
        #[test]
        fn assembled_modulus_matches(r in proptest::collection::vec(0.0f64..1e3, 1..32), seed in 0.0f64..100.0) {
            let phase: Vec<f64> = (0..r.len()).map(|i| seed * (i as f64 + 1.0)).collect();
            let z = assemble_observable(&r, &phase).unwrap();
            for (zl, rl) in z.iter().zip(&r) {
                proptest::prop_assert!((zl.norm() - rl).abs() <= 4.0 * f64::EPSILON * rl.max(1.0));
            }
        }
    }
}
