//! Brute-force reference models on a finite bath.
//!
//! The total Hamiltonian conserves the number of excitations, so the
//! one-excitation matrix h already fixes u and v exactly, and the full Fock
//! dynamics splits into blocks of fixed excitation number.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::heat::HeatDistribution;
use crate::propagator::{TimeGrid, Trajectory};
use crate::spectral::{bose, Mode, SpectralDensity};

/// Largest Fock space the brute-force model accepts.
pub const FOCK_DIM_CAP: usize = 65536;

/// Largest thermal weight a bath mode may leave above the Fock cutoff.
pub const FOCK_TAIL_TOL: f64 = 1e-8;

/// Oscillator ω₀ coupled to discrete modes, in the one-excitation sector.
#[derive(Debug, Clone)]
pub struct SingleParticleModel {
    pub omega0: f64,
    pub modes: Vec<Mode>,
}

impl SingleParticleModel {
    pub fn new(omega0: f64, modes: Vec<Mode>) -> Self {
        SingleParticleModel { omega0, modes }
    }

    /// Uses the modes of a discrete density; continuous densities must be
    /// discretized first.
    pub fn from_density(omega0: f64, sd: &SpectralDensity) -> Result<Self> {
        match sd {
            SpectralDensity::Discrete { modes } => Ok(Self::new(omega0, modes.clone())),
            _ => Err(Error::domain("the oracle needs a discrete bath; discretize it first")),
        }
    }

    pub fn dimension(&self) -> usize {
        self.modes.len() + 1
    }

    /// h₀₀ = ω₀, h_kk = ω_k, h₀k = h_k0 = g_k.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.dimension();
        let mut h = DMatrix::zeros(n, n);
        h[(0, 0)] = self.omega0;
        for (k, m) in self.modes.iter().enumerate() {
            h[(k + 1, k + 1)] = m.omega;
            h[(0, k + 1)] = m.g;
            h[(k + 1, 0)] = m.g;
        }
        h
    }
}

/// u(t) = [e^{−iht}]₀₀ and v(t) = Σ_k n̄(β_b, ω_k) |[e^{−iht}]₀k|², from one
/// eigendecomposition of h.
pub fn single_particle_u_v(
    model: &SingleParticleModel,
    beta_b: f64,
    grid: TimeGrid,
) -> Result<Trajectory> {
    if !(beta_b.is_finite() && beta_b > 0.0) {
        return Err(Error::domain(format!("beta_b must be positive, got {beta_b}")));
    }
    let eig = SymmetricEigen::try_new(model.matrix(), f64::EPSILON, 0)
        .ok_or_else(|| Error::numerical("eigendecomposition of h did not converge", f64::NAN))?;
    let vecs = &eig.eigenvectors;
    let n = model.dimension();
    let first: Vec<f64> = (0..n).map(|j| vecs[(0, j)]).collect();
    let occupation: Vec<f64> = model.modes.iter().map(|m| bose(beta_b, m.omega)).collect();
    let mut u = Vec::with_capacity(grid.len());
    let mut v = Vec::with_capacity(grid.len());
    for t in grid.times() {
        let (re, im): (Vec<f64>, Vec<f64>) = (0..n)
            .map(|j| {
                let p = Complex64::from_polar(first[j], -eig.eigenvalues[j] * t);
                (p.re, p.im)
            })
            .unzip();
        let a_re = vecs * DVector::from_vec(re);
        let a_im = vecs * DVector::from_vec(im);
        u.push(Complex64::new(a_re[0], a_im[0]));
        v.push(
            occupation
                .iter()
                .enumerate()
                .map(|(k, nb)| nb * (a_re[k + 1].powi(2) + a_im[k + 1].powi(2)))
                .sum(),
        );
    }
    u[0] = Complex64::new(1.0, 0.0);
    v[0] = 0.0;
    Ok(Trajectory { grid, u, v, beta_b })
}

/// The oscillator plus at most three bath modes in a truncated Fock space.
#[derive(Debug, Clone)]
pub struct FockModel {
    pub omega0: f64,
    pub modes: Vec<Mode>,
    /// Per-mode cutoff; every mode, the oscillator included, keeps 0..=n_max.
    pub n_max: usize,
    pub beta_s: f64,
    pub beta_b: f64,
}

impl FockModel {
    pub fn new(
        omega0: f64,
        modes: Vec<Mode>,
        n_max: usize,
        beta_s: f64,
        beta_b: f64,
    ) -> Result<Self> {
        if modes.len() > 3 {
            return Err(Error::Config(format!(
                "the Fock oracle takes at most 3 bath modes, got {}",
                modes.len()
            )));
        }
        if n_max == 0 {
            return Err(Error::Config("n_max must be at least 1".into()));
        }
        (n_max + 1)
            .checked_pow(modes.len() as u32 + 1)
            .filter(|&d| d <= FOCK_DIM_CAP)
            .ok_or_else(|| {
                Error::Config(format!("Fock dimension exceeds the cap of {FOCK_DIM_CAP}"))
            })?;
        for m in &modes {
            let tail = (-beta_b * m.omega * (n_max + 1) as f64).exp();
            if tail >= FOCK_TAIL_TOL {
                return Err(Error::Config(format!(
                    "bath mode ω = {} leaves thermal weight {tail:.3e} above n_max = {n_max}",
                    m.omega
                )));
            }
        }
        Ok(FockModel {
            omega0,
            modes,
            n_max,
            beta_s,
            beta_b,
        })
    }

    pub fn dimension(&self) -> usize {
        (self.n_max + 1).pow(self.modes.len() as u32 + 1)
    }

    fn occupations(&self, index: usize) -> Vec<usize> {
        let base = self.n_max + 1;
        let mut rest = index;
        (0..=self.modes.len())
            .map(|_| {
                let d = rest % base;
                rest /= base;
                d
            })
            .collect()
    }

    /// Truncated Gibbs weight of a bath configuration, renormalized per mode.
    fn bath_weight(&self, occ: &[usize]) -> f64 {
        self.modes
            .iter()
            .zip(occ)
            .map(|(m, &n)| {
                let x = self.beta_b * m.omega;
                let norm: f64 = (0..=self.n_max).map(|k| (-x * k as f64).exp()).sum();
                (-x * n as f64).exp() / norm
            })
            .product()
    }
}

/// Transition matrix and heat distribution of the brute-force model.
#[derive(Debug, Clone)]
pub struct FockMeasurement {
    /// `p[l_prime][l]`, the probability of reading l′ at τ after l at 0.
    pub p: Vec<Vec<f64>>,
    pub dist: HeatDistribution,
}

/// Two-point measurement on the truncated model: P_{l′l} = ⟨l′|Tr_b[U(|l⟩⟨l| ⊗ ρ_b)U†]|l′⟩.
///
/// The heat distribution weighs column l by the Gibbs probability
/// e^{−β_sω₀l}/Z(β_s) for l ≤ n_max, so its mass falls short of 1 by the
/// Gibbs tail above the cutoff.
pub fn fock_two_point_measurement(model: &FockModel, tau: f64) -> Result<FockMeasurement> {
    let dim = model.dimension();
    let occ: Vec<Vec<usize>> = (0..dim).map(|i| model.occupations(i)).collect();
    let max_total = model.n_max * (model.modes.len() + 1);
    let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); max_total + 1];
    for (i, o) in occ.iter().enumerate() {
        blocks[o.iter().sum::<usize>()].push(i);
    }
    let levels = model.n_max + 1;
    let mut p = vec![vec![0.0; levels]; levels];
    let base = model.n_max + 1;
    for block in blocks.iter().filter(|b| !b.is_empty()) {
        let n = block.len();
        let mut h = DMatrix::<f64>::zeros(n, n);
        let position = |idx: usize| block.binary_search(&idx).ok();
        for (a, &i) in block.iter().enumerate() {
            let o = &occ[i];
            h[(a, a)] = model.omega0 * o[0] as f64
                + model
                    .modes
                    .iter()
                    .zip(&o[1..])
                    .map(|(m, &k)| m.omega * k as f64)
                    .sum::<f64>();
            // g_k a† b_k: moves one quantum from mode k into the oscillator.
            for (k, m) in model.modes.iter().enumerate() {
                let nk = o[k + 1];
                if nk == 0 || o[0] == model.n_max {
                    continue;
                }
                let target = i + 1 - base.pow(k as u32 + 1);
                if let Some(b) = position(target) {
                    let amp = m.g * ((o[0] + 1) as f64 * nk as f64).sqrt();
                    h[(b, a)] += amp;
                    h[(a, b)] += amp;
                }
            }
        }
        let eig = SymmetricEigen::try_new(h, f64::EPSILON, 0).ok_or_else(|| {
            Error::numerical("eigendecomposition of a Fock block did not converge", f64::NAN)
        })?;
        let phases: Vec<Complex64> = eig
            .eigenvalues
            .iter()
            .map(|&e| Complex64::from_polar(1.0, -e * tau))
            .collect();
        let vecs = &eig.eigenvectors;
        for (a, &i) in block.iter().enumerate() {
            let weight = model.bath_weight(&occ[i][1..]);
            if weight == 0.0 {
                continue;
            }
            let l = occ[i][0];
            for (b, &j) in block.iter().enumerate() {
                let amp: Complex64 = (0..n).map(|q| phases[q] * (vecs[(b, q)] * vecs[(a, q)])).sum();
                p[occ[j][0]][l] += weight * amp.norm_sqr();
            }
        }
    }
    let x = model.beta_s * model.omega0;
    let z_inv = -(-x).exp_m1();
    let n_max = model.n_max as i64;
    let mut probs = vec![0.0; 2 * model.n_max + 1];
    for l in 0..levels {
        let p0 = z_inv * (-x * l as f64).exp();
        for (lp, row) in p.iter().enumerate() {
            probs[(lp as i64 - l as i64 + n_max) as usize] += p0 * row[l];
        }
    }
    Ok(FockMeasurement {
        p,
        dist: HeatDistribution {
            omega0: model.omega0,
            q_offsets: (-n_max..=n_max).collect(),
            probs,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heat::transition_probability;

    #[test]
    fn free_oscillator() {
        let model = SingleParticleModel::new(1.3, Vec::new());
        let grid = TimeGrid::new(10.0, 50).unwrap();
        let traj = single_particle_u_v(&model, 1.0, grid).unwrap();
        for (k, u) in traj.u.iter().enumerate() {
            let exact = Complex64::from_polar(1.0, -1.3 * grid.time(k));
            assert!((u - exact).norm() < 1e-12);
            assert_eq!(traj.v[k], 0.0);
        }
    }

    #[test]
    fn resonant_pair_closed_form() {
        let g = 0.2;
        let model = SingleParticleModel::new(1.0, vec![Mode { omega: 1.0, g }]);
        let grid = TimeGrid::new(20.0, 100).unwrap();
        let traj = single_particle_u_v(&model, 0.7, grid).unwrap();
        let nb = bose(0.7, 1.0);
        for k in 0..grid.len() {
            let t = grid.time(k);
            let exact = Complex64::from_polar((g * t).cos(), -t);
            assert!((traj.u[k] - exact).norm() < 1e-12);
            assert!((traj.v[k] - nb * (g * t).sin().powi(2)).abs() < 1e-12);
        }
        traj.check_invariants().unwrap();
    }

    #[test]
    fn uncoupled_fock_model_is_the_identity() {
        let modes = vec![Mode { omega: 0.9, g: 0.0 }, Mode { omega: 1.1, g: 0.0 }];
        let model = FockModel::new(1.0, modes, 6, 0.5, 5.0).unwrap();
        let m = fock_two_point_measurement(&model, 3.0).unwrap();
        for lp in 0..=6 {
            for l in 0..=6 {
                let expected = if l == lp { 1.0 } else { 0.0 };
                assert!((m.p[lp][l] - expected).abs() < 1e-12);
            }
        }
        assert!((m.dist.prob_at(0) - m.dist.total()).abs() < 1e-15);
    }

    #[test]
    fn fock_columns_match_gaussian_channel() {
        let modes = vec![Mode { omega: 0.9, g: 0.15 }, Mode { omega: 1.2, g: 0.1 }];
        let model = FockModel::new(1.0, modes.clone(), 6, 0.5, 5.0).unwrap();
        let tau = 4.0;
        let m = fock_two_point_measurement(&model, tau).unwrap();
        let sp = SingleParticleModel::new(1.0, modes);
        let traj = single_particle_u_v(&sp, 5.0, TimeGrid::new(tau, 1).unwrap()).unwrap();
        let (u, v) = (traj.u[1], traj.v[1]);
        for l in 0..=3 {
            let col: f64 = (0..=6).map(|lp| m.p[lp][l]).sum();
            assert!((col - 1.0).abs() < 1e-10, "column {l}: {col}");
            for lp in 0..=6 {
                let exact = transition_probability(u, v, l, lp).unwrap();
                assert!((m.p[lp][l] - exact).abs() < 1e-3, "P[{lp}][{l}]");
            }
        }
    }

    #[test]
    fn raising_the_cutoff_leaves_lower_columns_unchanged() {
        let modes = vec![Mode { omega: 0.98, g: 0.07 }, Mode { omega: 1.12, g: 0.05 }];
        let small = FockModel::new(1.05, modes.clone(), 6, 0.5, 5.0).unwrap();
        let large = FockModel::new(1.05, modes, 8, 0.5, 5.0).unwrap();
        let a = fock_two_point_measurement(&small, 6.0).unwrap();
        let b = fock_two_point_measurement(&large, 6.0).unwrap();
        for l in 0..6 {
            for lp in 0..=6 {
                assert!((a.p[lp][l] - b.p[lp][l]).abs() < 1e-4, "P[{lp}][{l}]");
            }
        }
    }

    #[test]
    fn oversized_models_are_rejected() {
        let modes = vec![Mode { omega: 1.0, g: 0.1 }; 3];
        assert!(matches!(
            FockModel::new(1.0, modes.clone(), 20, 1.0, 5.0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            FockModel::new(1.0, vec![Mode { omega: 1.0, g: 0.1 }; 4], 2, 1.0, 50.0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            FockModel::new(1.0, modes, 6, 1.0, 0.1),
            Err(Error::Config(_))
        ));
    }
}
