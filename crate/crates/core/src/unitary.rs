//! Diagonal Hamiltonians and the unitary Koopman operators they generate.
//!
//! The generator of subsystem `j` is `H_j = -1/2 * sum_k alpha_jk * Z_k`,
//! where `Z_k` acts on qubit `k`. Its exponential `exp(i H_j t)` factorizes
//! into one `R_z(alpha_jk * t)` per qubit, so it is diagonal in the
//! computational basis with entries `exp(i lambda_l t)`.
//!
//! Qubit convention: qubit `k` (zero-based, `0 <= k < n`) is the bit of
//! weight `2^(n-1-k)` in the basis index, i.e. qubit 0 is the most
//! significant bit.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::layout::{ObservableState, SubsystemLayout};

/// Largest qubit count accepted by [`dense_operator`].
pub const DENSE_ORACLE_MAX_QUBITS: u32 = 12;

/// Wraps an angle to the principal interval `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y <= -PI {
        y + 2.0 * PI
    } else {
        y
    }
}

/// Eigenvalue of `Z` on qubit `k` for basis state `l`: `+1` if the bit is 0,
/// `-1` if it is 1.
pub fn basis_parity(l: usize, k: u32, n: u32) -> Result<i8> {
    if n == 0 || n >= usize::BITS || k >= n {
        return Err(Error::Index(format!("qubit {k} out of range for n = {n}")));
    }
    if l >> n != 0 {
        return Err(Error::Index(format!("basis index {l} out of range for n = {n}")));
    }
    Ok(parity(l, k, n))
}

#[inline]
fn parity(l: usize, k: u32, n: u32) -> i8 {
    if (l >> (n - 1 - k)) & 1 == 0 {
        1
    } else {
        -1
    }
}

/// Per-subsystem real coefficients `alpha_jk` in radians per unit time.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalHamiltonian {
    layout: SubsystemLayout,
    alphas: Vec<Vec<f64>>,
}

impl DiagonalHamiltonian {
    pub fn new(layout: SubsystemLayout, alphas: Vec<Vec<f64>>) -> Result<Self> {
        if alphas.len() != layout.subsystem_count() {
            return Err(Error::Layout(format!(
                "{} coefficient blocks for {} subsystems",
                alphas.len(),
                layout.subsystem_count()
            )));
        }
        for (j, block) in alphas.iter().enumerate() {
            let n = layout.qubits()[j] as usize;
            if block.len() != n {
                return Err(Error::Shape(format!(
                    "subsystem {j} has {n} qubits but {} coefficients",
                    block.len()
                )));
            }
            if block.iter().any(|a| !a.is_finite()) {
                return Err(Error::Domain(format!(
                    "subsystem {j} has a non-finite coefficient"
                )));
            }
        }
        Ok(Self { layout, alphas })
    }

    /// All-zero Hamiltonian (identity evolution).
    pub fn zeros(layout: SubsystemLayout) -> Self {
        let alphas = layout.qubits().iter().map(|&n| vec![0.0; n as usize]).collect();
        Self { layout, alphas }
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn alphas(&self) -> &[Vec<f64>] {
        &self.alphas
    }

    pub fn block(&self, j: usize) -> Result<&[f64]> {
        self.alphas
            .get(j)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Index(format!("subsystem {j} out of range")))
    }

    /// `lambda_l = -1/2 * sum_k alpha_jk * z_k(l)`, in O(n_j).
    pub fn eigenvalue(&self, j: usize, l: usize) -> Result<f64> {
        let alphas = self.block(j)?;
        let n = alphas.len() as u32;
        if l >> n != 0 {
            return Err(Error::Index(format!(
                "basis index {l} out of range for subsystem {j} ({n} qubits)"
            )));
        }
        Ok(eigenvalue_of(alphas, l))
    }

    /// All `N_j` eigenvalues of subsystem `j`, built in O(N_j).
    pub fn eigenvalues(&self, j: usize) -> Result<Vec<f64>> {
        Ok(eigenvalues_of(self.block(j)?))
    }
}

fn eigenvalue_of(alphas: &[f64], l: usize) -> f64 {
    let n = alphas.len() as u32;
    -0.5 * alphas
        .iter()
        .enumerate()
        .map(|(k, a)| a * f64::from(parity(l, k as u32, n)))
        .sum::<f64>()
}

fn eigenvalues_of(alphas: &[f64]) -> Vec<f64> {
    // Each qubit doubles the table; the new qubit is the next less
    // significant bit, so entry i splits into 2i (bit 0) and 2i+1 (bit 1).
    let mut table = Vec::with_capacity(1 << alphas.len());
    table.push(0.0);
    for &a in alphas {
        let half = 0.5 * a;
        table = table.iter().flat_map(|&v| [v - half, v + half]).collect();
    }
    table
}

/// Advances the phases of subsystem `j` by `lambda_l * t`.
pub fn evolve_phase(phase: &[f64], h: &DiagonalHamiltonian, j: usize, t: f64) -> Result<Vec<f64>> {
    let n = h.layout.dim(j)?;
    if phase.len() != n {
        return Err(Error::Shape(format!(
            "subsystem {j} has dimension {n}, got {} phases",
            phase.len()
        )));
    }
    let lambdas = h.eigenvalues(j)?;
    Ok(phase.iter().zip(&lambdas).map(|(p, l)| p + l * t).collect())
}

/// Evolves every subsystem's phase independently; the modulus is copied.
pub fn block_evolve(state: &ObservableState, h: &DiagonalHamiltonian, t: f64) -> Result<ObservableState> {
    if state.layout() != h.layout() {
        return Err(Error::Layout(
            "observable layout does not match the Hamiltonian layout".into(),
        ));
    }
    let mut phase = Vec::with_capacity(state.phase().len());
    for j in 0..h.layout.subsystem_count() {
        let (_, pj) = state.split(j)?;
        phase.extend(evolve_phase(pj, h, j, t)?);
    }
    state.with_phase(phase)
}

/// One `R_z(angle)` gate on a single qubit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RzGate {
    pub qubit: u32,
    pub angle: f64,
}

/// A layer of parallel single-qubit `R_z` gates, one per qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitDescription {
    qubits: u32,
    gates: Vec<RzGate>,
}

impl CircuitDescription {
    pub fn new(qubits: u32, gates: Vec<RzGate>) -> Result<Self> {
        if gates.len() != qubits as usize {
            return Err(Error::Shape(format!(
                "{} gates for {qubits} qubits",
                gates.len()
            )));
        }
        let mut seen = vec![false; qubits as usize];
        for g in &gates {
            let slot = seen
                .get_mut(g.qubit as usize)
                .ok_or_else(|| Error::Index(format!("gate on qubit {} of {qubits}", g.qubit)))?;
            if std::mem::replace(slot, true) {
                return Err(Error::Shape(format!("two gates on qubit {}", g.qubit)));
            }
        }
        Ok(Self { qubits, gates })
    }

    pub fn qubits(&self) -> u32 {
        self.qubits
    }

    pub fn gates(&self) -> &[RzGate] {
        &self.gates
    }

    pub fn gate_count(&self) -> usize {
        self.gates.len()
    }

    /// `qubits <n>` followed by one `rz <qubit> <angle>` line per gate.
    pub fn to_text(&self) -> String {
        let mut out = format!("qubits {}\n", self.qubits);
        for g in &self.gates {
            writeln!(out, "rz {} {:.16e}", g.qubit, g.angle).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty circuit description".into()))?;
        let qubits = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["qubits", n] => n
                .parse::<u32>()
                .map_err(|e| Error::Parse(format!("bad qubit count {n:?}: {e}")))?,
            _ => return Err(Error::Parse(format!("expected `qubits <n>`, got {header:?}"))),
        };
        let mut gates = Vec::new();
        for line in lines {
            match line.split_whitespace().collect::<Vec<_>>().as_slice() {
                ["rz", q, a] => gates.push(RzGate {
                    qubit: q
                        .parse()
                        .map_err(|e| Error::Parse(format!("bad qubit {q:?}: {e}")))?,
                    angle: a
                        .parse()
                        .map_err(|e| Error::Parse(format!("bad angle {a:?}: {e}")))?,
                }),
                _ => return Err(Error::Parse(format!("expected `rz <qubit> <angle>`, got {line:?}"))),
            }
        }
        Self::new(qubits, gates)
    }
}

/// The `k`-step operator `(U^dt)^k` of subsystem `j` as a single layer of
/// gates with angles `alpha_jm * k * dt`. The gate count is `n_j` for every `k`.
pub fn multi_step_operator(h: &DiagonalHamiltonian, j: usize, dt: f64, k: u64) -> Result<CircuitDescription> {
    let alphas = h.block(j)?;
    let elapsed = k as f64 * dt;
    let gates = alphas
        .iter()
        .enumerate()
        .map(|(m, a)| RzGate {
            qubit: m as u32,
            angle: a * elapsed,
        })
        .collect();
    CircuitDescription::new(alphas.len() as u32, gates)
}

/// Applies each `R_z(theta) = diag(exp(-i theta/2), exp(i theta/2))` gate
/// to a statevector of length `2^n`.
pub fn apply_circuit(amplitudes: &mut [Complex64], circuit: &CircuitDescription) -> Result<()> {
    let n = circuit.qubits;
    if amplitudes.len() != 1usize << n {
        return Err(Error::Shape(format!(
            "statevector of length {} for a {n}-qubit circuit",
            amplitudes.len()
        )));
    }
    for g in &circuit.gates {
        let plus = Complex64::cis(-0.5 * g.angle);
        let minus = Complex64::cis(0.5 * g.angle);
        let shift = n - 1 - g.qubit;
        for (l, a) in amplitudes.iter_mut().enumerate() {
            *a *= if (l >> shift) & 1 == 0 { plus } else { minus };
        }
    }
    Ok(())
}

fn kron_diag(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| x * y)).collect()
}

fn kron_diag_complex(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| x * y)).collect()
}

/// Brute-force `exp(i H_j t)`: assembles `H_j` term by term from Kronecker
/// products of Pauli-Z and identity factors, then exponentiates its
/// diagonal. Returns the diagonal of the (diagonal) result.
pub fn dense_operator(h: &DiagonalHamiltonian, j: usize, t: f64) -> Result<Vec<Complex64>> {
    let alphas = h.block(j)?;
    let n = alphas.len() as u32;
    if n > DENSE_ORACLE_MAX_QUBITS {
        return Err(Error::OracleSize {
            qubits: n,
            cap: DENSE_ORACLE_MAX_QUBITS,
        });
    }
    const Z: [f64; 2] = [1.0, -1.0];
    const I: [f64; 2] = [1.0, 1.0];
    let mut hamiltonian = vec![0.0; 1 << n];
    for (k, &a) in alphas.iter().enumerate() {
        let mut term = vec![1.0];
        for m in 0..n as usize {
            term = kron_diag(&term, if m == k { &Z } else { &I });
        }
        for (hl, tl) in hamiltonian.iter_mut().zip(&term) {
            *hl += -0.5 * a * tl;
        }
    }
    Ok(hamiltonian.into_iter().map(|e| Complex64::cis(e * t)).collect())
}

/// `⊗_k R_z(alpha_jk * t)` as an explicit diagonal.
pub fn factorized_operator(h: &DiagonalHamiltonian, j: usize, t: f64) -> Result<Vec<Complex64>> {
    let alphas = h.block(j)?;
    let mut out = vec![Complex64::new(1.0, 0.0)];
    for &a in alphas {
        let theta = a * t;
        out = kron_diag_complex(&out, &[Complex64::cis(-0.5 * theta), Complex64::cis(0.5 * theta)]);
    }
    Ok(out)
}

/// A uniform-modulus `n`-qubit state `(1/sqrt N) sum_l exp(i phi_l) |l>`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseEncodedState {
    qubits: u32,
    phases: Vec<f64>,
}

impl PhaseEncodedState {
    pub fn encode(phases: &[f64]) -> Result<Self> {
        let len = phases.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::Shape(format!(
                "phase vector length {len} is not a power of two >= 2"
            )));
        }
        Ok(Self {
            qubits: len.trailing_zeros(),
            phases: phases.to_vec(),
        })
    }

    pub fn qubits(&self) -> u32 {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        self.phases.len()
    }

    /// Phases as stored (not wrapped).
    pub fn raw_phases(&self) -> &[f64] {
        &self.phases
    }

    /// Principal-value phases in `(-pi, pi]`.
    pub fn decode(&self) -> Vec<f64> {
        self.phases.iter().map(|&p| wrap_phase(p)).collect()
    }

    pub fn amplitudes(&self) -> Vec<Complex64> {
        let scale = (self.phases.len() as f64).sqrt().recip();
        self.phases.iter().map(|&p| Complex64::from_polar(scale, p)).collect()
    }

    /// Reads phases back from a statevector with uniform modulus.
    pub fn from_amplitudes(amplitudes: &[Complex64]) -> Result<Self> {
        Self::encode(&amplitudes.iter().map(|a| a.arg()).collect::<Vec<_>>())
    }

    /// Evolves under subsystem `j` of `h` for time `t`.
    pub fn evolve(&self, h: &DiagonalHamiltonian, j: usize, t: f64) -> Result<Self> {
        Ok(Self {
            qubits: self.qubits,
            phases: evolve_phase(&self.phases, h, j, t)?,
        })
    }

    /// Amplitude `l` after evolving for `t`, computed in O(n) without
    /// touching any other amplitude.
    pub fn evolved_amplitude(&self, h: &DiagonalHamiltonian, j: usize, l: usize, t: f64) -> Result<Complex64> {
        let alphas = h.block(j)?;
        if alphas.len() as u32 != self.qubits {
            return Err(Error::Shape(format!(
                "{}-qubit state, {}-qubit subsystem",
                self.qubits,
                alphas.len()
            )));
        }
        let phase = self
            .phases
            .get(l)
            .ok_or_else(|| Error::Index(format!("basis index {l} out of range")))?;
        let scale = (self.phases.len() as f64).sqrt().recip();
        Ok(Complex64::from_polar(scale, phase + eigenvalue_of(alphas, l) * t))
    }
}
