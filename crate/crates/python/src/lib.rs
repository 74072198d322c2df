//! Python bindings: bath models, the u/v propagator, bound states and the
//! two-point-measurement heat statistics.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use qheat::heat::{self, HeatSetup};
use qheat::oracle::{single_particle_u_v, SingleParticleModel};
use qheat::propagator::{self, TimeGrid};
use qheat::{spectrum, Error, Mode, SpectralDensity};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Domain(_) | Error::Config(_) | Error::Undefined(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Bath spectral density J(ω).
#[pyclass(frozen, name = "SpectralDensity", module = "pyqheat")]
struct PySpectralDensity {
    inner: SpectralDensity,
}

#[pymethods]
impl PySpectralDensity {
    /// η ω^s ω_c^{1−s} e^{−ω/ω_c}.
    #[staticmethod]
    #[pyo3(signature = (eta, omega_c, s = 1.0))]
    fn ohmic(eta: f64, omega_c: f64, s: f64) -> PyResult<Self> {
        let inner = SpectralDensity::ohmic(eta, s, omega_c).map_err(py_err)?;
        Ok(PySpectralDensity { inner })
    }

    /// Semicircle band of half-width 2ζ centred on `center`.
    #[staticmethod]
    #[pyo3(signature = (g, zeta, center = 1.0))]
    fn semicircle(g: f64, zeta: f64, center: f64) -> PyResult<Self> {
        let inner = SpectralDensity::semicircle(g, zeta, center).map_err(py_err)?;
        Ok(PySpectralDensity { inner })
    }

    /// Explicit modes as (frequency, coupling) pairs.
    #[staticmethod]
    fn discrete(modes: Vec<(f64, f64)>) -> PyResult<Self> {
        let modes = modes.into_iter().map(|(omega, g)| Mode { omega, g }).collect();
        let inner = SpectralDensity::discrete(modes).map_err(py_err)?;
        Ok(PySpectralDensity { inner })
    }

    fn density(&self, omega: f64) -> PyResult<f64> {
        self.inner.density(omega).map_err(py_err)
    }

    fn memory_kernel(&self, t: f64) -> PyResult<Complex64> {
        self.inner.memory_kernel(t).map_err(py_err)
    }

    fn noise_kernel(&self, beta_b: f64, t: f64) -> PyResult<Complex64> {
        self.inner.noise_kernel(beta_b, t).map_err(py_err)
    }

    fn lamb_shift(&self, omega: f64) -> PyResult<f64> {
        self.inner.lamb_shift(omega).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

/// Solves for u(t) and v(t); returns (times, u, v).
#[pyfunction]
#[pyo3(signature = (sd, omega0, beta_b, t_end, n_steps, richardson = 0))]
fn propagate(
    py: Python<'_>,
    sd: PyRef<'_, PySpectralDensity>,
    omega0: f64,
    beta_b: f64,
    t_end: f64,
    n_steps: usize,
    richardson: u32,
) -> PyResult<(Vec<f64>, Vec<Complex64>, Vec<f64>)> {
    let density = sd.inner.clone();
    let traj = py
        .detach(move || {
            let grid = TimeGrid::new(t_end, n_steps)?;
            if richardson > 0 {
                propagator::solve_extrapolated(&density, omega0, beta_b, grid, richardson)
            } else {
                propagator::solve(&density, omega0, beta_b, grid)
            }
        })
        .map_err(py_err)?;
    Ok((traj.times(), traj.u, traj.v))
}

/// Exact u(t) and v(t) for a finite set of modes; returns (times, u, v).
#[pyfunction]
fn oracle_propagate(
    omega0: f64,
    modes: Vec<(f64, f64)>,
    beta_b: f64,
    t_end: f64,
    n_steps: usize,
) -> PyResult<(Vec<f64>, Vec<Complex64>, Vec<f64>)> {
    let modes = modes.into_iter().map(|(omega, g)| Mode { omega, g }).collect();
    let grid = TimeGrid::new(t_end, n_steps).map_err(py_err)?;
    let traj = single_particle_u_v(&SingleParticleModel::new(omega0, modes), beta_b, grid).map_err(py_err)?;
    Ok((traj.times(), traj.u, traj.v))
}

/// Isolated eigenvalues as (energy, residue weight) pairs.
#[pyfunction]
fn bound_states(sd: PyRef<'_, PySpectralDensity>, omega0: f64) -> PyResult<Vec<(f64, f64)>> {
    let set = spectrum::find_bound_states(&sd.inner, omega0).map_err(py_err)?;
    Ok(set.states.iter().map(|b| (b.energy, b.weight)).collect())
}

fn setup(beta_s: f64, beta_b: f64, omega0: f64, u: Complex64, v: f64, l_max: Option<usize>) -> PyResult<HeatSetup> {
    match l_max {
        Some(l) => HeatSetup::new(beta_s, beta_b, omega0, l),
        None => HeatSetup::for_state(beta_s, beta_b, omega0, u, v),
    }
    .map_err(py_err)
}

/// ⟨e^{ξQ}⟩ at the state (u, v).
#[pyfunction]
fn characteristic_function(xi: f64, beta_s: f64, beta_b: f64, omega0: f64, u: Complex64, v: f64) -> PyResult<f64> {
    let s = setup(beta_s, beta_b, omega0, u, v, None)?;
    heat::characteristic_function(xi, &s, u, v).map_err(py_err)
}

#[pyfunction]
fn mean_heat(beta_s: f64, beta_b: f64, omega0: f64, u: Complex64, v: f64) -> PyResult<f64> {
    let s = setup(beta_s, beta_b, omega0, u, v, None)?;
    Ok(heat::mean_heat(&s, u, v))
}

#[pyfunction]
fn effective_beta(omega0: f64, u: Complex64, v: f64) -> PyResult<f64> {
    heat::effective_beta(omega0, u, v).map_err(py_err)
}

/// Probability of reading `l_prime` after `l`.
#[pyfunction]
fn transition_probability(u: Complex64, v: f64, l: usize, l_prime: usize) -> PyResult<f64> {
    heat::transition_probability(u, v, l, l_prime).map_err(py_err)
}

/// Heat values and their probabilities.
#[pyfunction]
#[pyo3(signature = (beta_s, beta_b, omega0, u, v, l_max = None))]
fn heat_distribution(
    beta_s: f64,
    beta_b: f64,
    omega0: f64,
    u: Complex64,
    v: f64,
    l_max: Option<usize>,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let s = setup(beta_s, beta_b, omega0, u, v, l_max)?;
    let dist = heat::heat_distribution(&s, u, v).map_err(py_err)?;
    let q = (0..dist.probs.len()).map(|k| dist.heat(k)).collect();
    Ok((q, dist.probs))
}

#[pymodule]
fn pyqheat(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpectralDensity>()?;
    m.add_function(wrap_pyfunction!(propagate, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_propagate, m)?)?;
    m.add_function(wrap_pyfunction!(bound_states, m)?)?;
    m.add_function(wrap_pyfunction!(characteristic_function, m)?)?;
    m.add_function(wrap_pyfunction!(mean_heat, m)?)?;
    m.add_function(wrap_pyfunction!(effective_beta, m)?)?;
    m.add_function(wrap_pyfunction!(transition_probability, m)?)?;
    m.add_function(wrap_pyfunction!(heat_distribution, m)?)?;
    Ok(())
}
