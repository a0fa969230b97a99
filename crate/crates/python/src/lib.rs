//! Python module `qkm`. Arrays cross the boundary as lists of floats;
//! observables are `(modulus, phase)` tuples.

use std::collections::BTreeMap;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use qkm_core::encoders::load_latent_trajectory;
use qkm_core::metrics::{self, Boundary};
use qkm_core::systems;
use qkm_core::unitary;
use qkm_core::{ObservableEncoder, ObservableState};

create_exception!(qkm, QkmError, PyException);

fn err(e: qkm_core::Error) -> PyErr {
    QkmError::new_err(e.to_string())
}

type Obs = (Vec<f64>, Vec<f64>);

#[pyclass(name = "SubsystemLayout", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PyLayout(qkm_core::SubsystemLayout);

#[pymethods]
impl PyLayout {
    #[new]
    fn new(d: usize, c: usize, h: usize) -> PyResult<Self> {
        qkm_core::SubsystemLayout::new(d, c, h).map(Self).map_err(err)
    }

    #[getter]
    fn total(&self) -> usize {
        self.0.total()
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.0.dims().to_vec()
    }

    #[getter]
    fn qubits(&self) -> Vec<u32> {
        self.0.qubits().to_vec()
    }

    #[getter]
    fn subsystem_count(&self) -> usize {
        self.0.subsystem_count()
    }

    fn range(&self, j: usize) -> PyResult<(usize, usize)> {
        self.0.range(j).map(|r| (r.start, r.end)).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "SubsystemLayout(d={}, c={}, h={})",
            self.0.state_dim(),
            self.0.channels(),
            self.0.subsystem_count()
        )
    }
}

#[pyclass(name = "DiagonalHamiltonian", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyHamiltonian(unitary::DiagonalHamiltonian);

#[pymethods]
impl PyHamiltonian {
    #[new]
    fn new(layout: &PyLayout, alphas: Vec<Vec<f64>>) -> PyResult<Self> {
        unitary::DiagonalHamiltonian::new(layout.0.clone(), alphas).map(Self).map_err(err)
    }

    #[getter]
    fn alphas(&self) -> Vec<Vec<f64>> {
        self.0.alphas().to_vec()
    }

    #[getter]
    fn layout(&self) -> PyLayout {
        PyLayout(self.0.layout().clone())
    }

    fn eigenvalue(&self, j: usize, l: usize) -> PyResult<f64> {
        self.0.eigenvalue(j, l).map_err(err)
    }

    fn eigenvalues(&self, j: usize) -> PyResult<Vec<f64>> {
        self.0.eigenvalues(j).map_err(err)
    }

    /// Diagonal of `exp(iHt)` for subsystem `j` as `(re, im)` pairs.
    fn operator(&self, j: usize, t: f64) -> PyResult<Vec<(f64, f64)>> {
        unitary::factorized_operator(&self.0, j, t)
            .map(|v| v.iter().map(|z| (z.re, z.im)).collect())
            .map_err(err)
    }

    /// One-shot `k`-step circuit as `(qubit, angle)` gates.
    fn circuit(&self, j: usize, dt: f64, k: u64) -> PyResult<Vec<(u32, f64)>> {
        unitary::multi_step_operator(&self.0, j, dt, k)
            .map(|c| c.gates().iter().map(|g| (g.qubit, g.angle)).collect())
            .map_err(err)
    }

    fn circuit_text(&self, j: usize, dt: f64, k: u64) -> PyResult<String> {
        unitary::multi_step_operator(&self.0, j, dt, k)
            .map(|c| c.to_text())
            .map_err(err)
    }
}

#[pyclass(name = "KoopmanModel", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyModel(qkm_core::KoopmanModel);

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (hamiltonian, global_phase=None))]
    fn new(hamiltonian: &PyHamiltonian, global_phase: Option<Vec<f64>>) -> PyResult<Self> {
        qkm_core::KoopmanModel::new(hamiltonian.0.clone(), global_phase)
            .map(Self)
            .map_err(err)
    }

    #[staticmethod]
    fn from_qkham(text: &str) -> PyResult<Self> {
        qkm_core::KoopmanModel::from_qkham(text).map(Self).map_err(err)
    }

    fn to_qkham(&self) -> String {
        self.0.to_qkham()
    }

    #[getter]
    fn hamiltonian(&self) -> PyHamiltonian {
        PyHamiltonian(self.0.hamiltonian().clone())
    }

    #[getter]
    fn global_phase(&self) -> Option<Vec<f64>> {
        self.0.global_phase().map(<[f64]>::to_vec)
    }

    /// Evolves a full observable `(modulus, phase)` by time `t`.
    fn evolve(&self, modulus: Vec<f64>, phase: Vec<f64>, t: f64) -> PyResult<Obs> {
        let obs = ObservableState::new(self.0.layout().clone(), modulus, phase).map_err(err)?;
        let (_, r, p) = self.0.evolve(&obs, t).map_err(err)?.into_parts();
        Ok((r, p))
    }
}

#[derive(Clone)]
enum EncoderImpl {
    Identity(qkm_core::IdentityPhaseEncoder),
    Fourier(qkm_core::FourierEncoder),
}

impl EncoderImpl {
    fn get(&self) -> &dyn ObservableEncoder {
        match self {
            EncoderImpl::Identity(e) => e,
            EncoderImpl::Fourier(e) => e,
        }
    }
}

#[pyclass(name = "Encoder", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyEncoder(EncoderImpl);

#[pymethods]
impl PyEncoder {
    #[staticmethod]
    fn identity(d: usize) -> PyResult<Self> {
        qkm_core::IdentityPhaseEncoder::new(d)
            .map(|e| Self(EncoderImpl::Identity(e)))
            .map_err(err)
    }

    /// Fourier encoder; `strict` rejects decodes that break conjugate symmetry.
    #[staticmethod]
    #[pyo3(signature = (d, strict=true))]
    fn fourier(d: usize, strict: bool) -> PyResult<Self> {
        let enc = if strict {
            qkm_core::FourierEncoder::new(d)
        } else {
            qkm_core::FourierEncoder::lenient(d)
        };
        enc.map(|e| Self(EncoderImpl::Fourier(e))).map_err(err)
    }

    #[getter]
    fn layout(&self) -> PyLayout {
        PyLayout(self.0.get().layout().clone())
    }

    fn encode(&self, state: Vec<f64>) -> PyResult<Obs> {
        let (_, r, p) = self.0.get().encode(&state).map_err(err)?.into_parts();
        Ok((r, p))
    }

    fn decode(&self, modulus: Vec<f64>, phase: Vec<f64>) -> PyResult<Vec<f64>> {
        let obs = ObservableState::new(self.0.get().layout().clone(), modulus, phase).map_err(err)?;
        self.0.get().decode(&obs).map_err(err)
    }

    /// Encode, evolve by `t` in one shot, decode.
    fn predict(&self, model: &PyModel, x0: Vec<f64>, t: f64) -> PyResult<Vec<f64>> {
        qkm_core::predict_state(self.0.get(), &model.0, &x0, t).map_err(err)
    }

    fn encode_trajectory(&self, trajectory: &PyTrajectory) -> PyResult<PyLatent> {
        qkm_core::encode_trajectory(self.0.get(), &trajectory.0)
            .map(PyLatent)
            .map_err(err)
    }

    /// `(reconstruction, prediction, pair, zero_step_pairs, rollout_pairs)`.
    fn losses(&self, model: &PyModel, trajectories: Vec<PyTrajectory>) -> PyResult<(f64, Option<f64>, f64, usize, usize)> {
        let data: Vec<_> = trajectories.into_iter().map(|t| t.0).collect();
        let r = metrics::LossReport::compute(self.0.get(), &model.0, &data).map_err(err)?;
        Ok((r.reconstruction, r.prediction, r.pair.loss, r.pair.zero_step_pairs, r.pair.rollout_pairs))
    }
}

#[pyclass(name = "Trajectory", frozen, from_py_object)]
#[derive(Clone)]
struct PyTrajectory(qkm_core::TrajectoryDataset);

#[pymethods]
impl PyTrajectory {
    #[new]
    fn new(shape: Vec<usize>, dt: f64, snapshots: Vec<Vec<f64>>) -> PyResult<Self> {
        qkm_core::TrajectoryDataset::new(qkm_core::PayloadKind::State, shape, dt, snapshots)
            .map(Self)
            .map_err(err)
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        qkm_core::read_trajectory(path).map(Self).map_err(err)
    }

    fn write(&self, path: &str) -> PyResult<()> {
        qkm_core::write_trajectory(path, &self.0).map_err(err)
    }

    #[getter]
    fn shape(&self) -> Vec<usize> {
        self.0.shape().to_vec()
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.0.dt()
    }

    #[getter]
    fn steps(&self) -> usize {
        self.0.steps()
    }

    #[getter]
    fn is_latent(&self) -> bool {
        self.0.kind() == qkm_core::PayloadKind::Latent
    }

    #[getter]
    fn metadata(&self) -> BTreeMap<String, String> {
        self.0.metadata().clone()
    }

    fn snapshot(&self, k: usize) -> PyResult<Vec<f64>> {
        if k > self.0.steps() {
            return Err(QkmError::new_err(format!("step {k} out of range 0..={}", self.0.steps())));
        }
        Ok(self.0.snapshot(k).to_vec())
    }

    fn __len__(&self) -> usize {
        self.0.steps() + 1
    }
}

#[pyclass(name = "LatentTrajectory", frozen, from_py_object)]
#[derive(Clone)]
struct PyLatent(qkm_core::LatentTrajectory);

#[pymethods]
impl PyLatent {
    #[new]
    fn new(layout: &PyLayout, dt: f64, modulus: Vec<Vec<f64>>, phase: Vec<Vec<f64>>) -> PyResult<Self> {
        qkm_core::LatentTrajectory::new(layout.0.clone(), dt, modulus, phase)
            .map(Self)
            .map_err(err)
    }

    #[staticmethod]
    fn from_trajectory(trajectory: &PyTrajectory) -> PyResult<Self> {
        load_latent_trajectory(&trajectory.0).map(Self).map_err(err)
    }

    fn to_trajectory(&self) -> PyResult<PyTrajectory> {
        self.0.to_dataset().map(PyTrajectory).map_err(err)
    }

    #[getter]
    fn steps(&self) -> usize {
        self.0.steps()
    }

    #[getter]
    fn modulus_drift(&self) -> f64 {
        self.0.modulus_drift()
    }

    fn observable(&self, k: usize) -> PyResult<Obs> {
        let (_, r, p) = self.0.observable(k).map_err(err)?.into_parts();
        Ok((r, p))
    }
}

/// Result of a fit: the model plus per-subsystem diagnostics.
#[pyclass(name = "FitResult", frozen)]
struct PyFit {
    #[pyo3(get)]
    model: PyModel,
    #[pyo3(get)]
    alphas: Vec<Vec<f64>>,
    #[pyo3(get)]
    global_phase_rates: Vec<Option<f64>>,
    #[pyo3(get)]
    residual_rms: Vec<f64>,
    #[pyo3(get)]
    report: String,
}

#[pyfunction]
#[pyo3(signature = (latents, global_phase=false, mask_threshold=None))]
fn fit(latents: Vec<PyLatent>, global_phase: bool, mask_threshold: Option<f64>) -> PyResult<PyFit> {
    let data: Vec<_> = latents.into_iter().map(|l| l.0).collect();
    let f = qkm_core::fit_latent(&data, global_phase, mask_threshold).map_err(err)?;
    Ok(PyFit {
        alphas: f.blocks.iter().map(|b| b.alphas.clone()).collect(),
        global_phase_rates: f.blocks.iter().map(|b| b.global_phase_rate).collect(),
        residual_rms: f.blocks.iter().map(|b| b.residual_rms).collect(),
        report: f.to_report(),
        model: PyModel(f.model),
    })
}

/// Fits one block of per-index phase rates (radians per step).
#[pyfunction]
#[pyo3(signature = (rates, dt, global_phase=false, mask=None))]
fn fit_rates(rates: Vec<f64>, dt: f64, global_phase: bool, mask: Option<Vec<bool>>) -> PyResult<(Vec<f64>, Option<f64>, f64)> {
    let r = qkm_core::fit::fit_rates(&rates, dt, global_phase, mask.as_deref()).map_err(err)?;
    Ok((r.alphas, r.global_phase_rate, r.residual_rms))
}

#[pyfunction]
fn evolve_phase(phase: Vec<f64>, hamiltonian: &PyHamiltonian, j: usize, t: f64) -> PyResult<Vec<f64>> {
    unitary::evolve_phase(&phase, &hamiltonian.0, j, t).map_err(err)
}

#[pyfunction]
fn wrap_phase(x: f64) -> f64 {
    unitary::wrap_phase(x)
}

#[pyfunction]
fn basis_parity(l: usize, k: u32, n: u32) -> PyResult<i8> {
    unitary::basis_parity(l, k, n).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (pred, truth, squared=false))]
fn relative_l2(pred: Vec<f64>, truth: Vec<f64>, squared: bool) -> PyResult<f64> {
    let mode = if squared {
        qkm_core::ErrorMode::Squared
    } else {
        qkm_core::ErrorMode::Rooted
    };
    qkm_core::relative_l2(&pred, &truth, mode).map_err(err)
}

/// `(kappa, energy, occupancy, total_energy)`.
#[pyfunction]
fn energy_spectrum(field: Vec<f64>, nx: usize, ny: usize) -> PyResult<(Vec<f64>, Vec<f64>, Vec<usize>, f64)> {
    let s = metrics::energy_spectrum(&field, nx, ny).map_err(err)?;
    Ok((s.kappa, s.energy, s.occupancy, s.total_energy))
}

/// `S_p(r)` rows (one per order) and, when `fit_range` is given, the exponents.
#[pyfunction]
#[pyo3(signature = (field, nx, ny, orders, separations, periodic=true, fit_range=None))]
fn structure_functions(
    field: Vec<f64>,
    nx: usize,
    ny: usize,
    orders: Vec<f64>,
    separations: Vec<usize>,
    periodic: bool,
    fit_range: Option<(usize, usize)>,
) -> PyResult<(Vec<Vec<f64>>, Option<Vec<f64>>)> {
    let boundary = if periodic { Boundary::Periodic } else { Boundary::Interior };
    let sf = metrics::structure_functions(&field, nx, ny, &orders, &separations, boundary).map_err(err)?;
    let xi = fit_range
        .map(|(lo, hi)| sf.scaling_exponents(lo, hi))
        .transpose()
        .map_err(err)?;
    Ok((sf.values, xi))
}

/// `(edges, density, mean, std_dev)`.
#[pyfunction]
fn pdf_estimate(samples: Vec<f64>, bins: usize) -> PyResult<(Vec<f64>, Vec<f64>, f64, f64)> {
    let p = metrics::pdf_estimate(&samples, bins, false).map_err(err)?;
    Ok((p.edges, p.density, p.mean, p.std_dev))
}

#[pyfunction]
fn torus_rotation_trajectory(omega: Vec<f64>, phi0: Vec<f64>, dt: f64, steps: usize) -> PyResult<PyTrajectory> {
    systems::torus_rotation_trajectory(&omega, &phi0, dt, steps)
        .map(PyTrajectory)
        .map_err(err)
}

#[pyfunction]
fn advection_trajectory(speed: f64, u0: Vec<f64>, dt: f64, steps: usize) -> PyResult<PyTrajectory> {
    systems::advection_trajectory(speed, &u0, dt, steps)
        .map(PyTrajectory)
        .map_err(err)
}

#[pyfunction]
fn random_periodic_field(d: usize, seed: u64) -> Vec<f64> {
    systems::random_periodic_field(d, seed)
}

#[pyfunction]
#[pyo3(signature = (feed, kill, grid, dt, steps, seed=0, dt_int=None))]
fn gray_scott_trajectory(
    feed: f64,
    kill: f64,
    grid: usize,
    dt: f64,
    steps: usize,
    seed: u64,
    dt_int: Option<f64>,
) -> PyResult<PyTrajectory> {
    let mut params = systems::GrayScottParams::new(feed, kill, grid, grid);
    if let Some(h) = dt_int {
        params.dt_int = h;
    }
    let (a, b) = systems::gray_scott_initial(&params, seed);
    systems::gray_scott_trajectory(&params, &a, &b, dt, steps)
        .map(PyTrajectory)
        .map_err(err)
}

#[pymodule]
fn qkm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("QkmError", m.py().get_type::<QkmError>())?;
    m.add_class::<PyLayout>()?;
    m.add_class::<PyHamiltonian>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyEncoder>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PyLatent>()?;
    m.add_class::<PyFit>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(fit_rates, m)?)?;
    m.add_function(wrap_pyfunction!(evolve_phase, m)?)?;
    m.add_function(wrap_pyfunction!(wrap_phase, m)?)?;
    m.add_function(wrap_pyfunction!(basis_parity, m)?)?;
    m.add_function(wrap_pyfunction!(relative_l2, m)?)?;
    m.add_function(wrap_pyfunction!(energy_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(structure_functions, m)?)?;
    m.add_function(wrap_pyfunction!(pdf_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(torus_rotation_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(advection_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(random_periodic_field, m)?)?;
    m.add_function(wrap_pyfunction!(gray_scott_trajectory, m)?)?;
    Ok(())
}
