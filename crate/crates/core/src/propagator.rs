//! Time evolution of the dissipation function u(t) and noise function v(t).
//!
//! u solves u̇ + iω₀u + ∫₀ᵗ μ(t − t₁) u(t₁) dt₁ = 0 with u(0) = 1, and
//! v(t) = ∫₀ᵗ∫₀ᵗ u*(t₁) ν(t₁ − t₂) u(t₂) dt₁ dt₂. Both are discretised with
//! the trapezoidal rule on a uniform grid, so the global error has an
//! expansion in even powers of dt and Richardson extrapolation applies.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{bose, SpectralDensity};

/// Uniform grid tᵢ = i·dt, i = 0..=n_steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_end: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, n_steps: usize) -> Result<Self> {
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(Error::domain(format!("t_end must be positive, got {t_end}")));
        }
        if n_steps == 0 {
            return Err(Error::domain("n_steps must be at least 1"));
        }
        Ok(TimeGrid { t_end, n_steps })
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.n_steps as f64
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, i: usize) -> f64 {
        if i == self.n_steps {
            self.t_end
        } else {
            i as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|i| self.time(i)).collect()
    }

    /// The same interval with `factor` times as many steps.
    pub fn refined(&self, factor: usize) -> TimeGrid {
        TimeGrid {
            t_end: self.t_end,
            n_steps: self.n_steps * factor,
        }
    }

    /// dt times the fastest frequency the solver has to follow. Values above
    /// about 0.05 leave fewer than twenty points per period.
    pub fn resolution(&self, sd: &SpectralDensity, omega0: f64) -> f64 {
        self.dt() * sd.fastest_frequency().max(omega0.abs())
    }
}

/// Samples of u and v on a grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub u: Vec<Complex64>,
    pub v: Vec<f64>,
    pub beta_b: f64,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.grid.times()
    }

    /// Checks |u| ≤ 1 + 1e−9 and v ≥ −1e−9 at every sample.
    pub fn check_invariants(&self) -> Result<()> {
        for (i, (u, &v)) in self.u.iter().zip(&self.v).enumerate() {
            if u.norm() > 1.0 + 1e-9 {
                return Err(Error::numerical(
                    format!("|u| exceeds 1 at step {i}"),
                    u.norm() - 1.0,
                ));
            }
            if v < -1e-9 {
                return Err(Error::numerical(format!("v is negative at step {i}"), -v));
            }
        }
        Ok(())
    }
}

/// Coefficients of the exact master equation recovered from a trajectory.
#[derive(Debug, Clone)]
pub struct MasterCoefficients {
    pub times: Vec<f64>,
    /// Renormalised frequency −Im(u̇/u).
    pub omega: Vec<f64>,
    /// Dissipation rate −Re(u̇/u).
    pub gamma: Vec<f64>,
    /// Noise rate v̇ + 2vγ.
    pub gamma_beta: Vec<f64>,
}

/// Solves for u on `grid`, tabulating μ once.
pub fn solve_u(sd: &SpectralDensity, omega0: f64, grid: TimeGrid) -> Result<Vec<Complex64>> {
    let mu = tabulate_mu(sd, &grid.times())?;
    solve_u_with_kernel(&mu, omega0, grid.dt())
}

/// Implicit trapezoidal scheme for u given μ(i·dt). The scheme is linear in
/// the unknown, so each step is solved exactly.
pub fn solve_u_with_kernel(mu: &[Complex64], omega0: f64, dt: f64) -> Result<Vec<Complex64>> {
    let n = mu.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let i = Complex64::i();
    let half = 0.5 * dt;
    let mut u = Vec::with_capacity(n);
    u.push(Complex64::new(1.0, 0.0));
    // F_0 = u̇(0) = −iω₀ since the memory integral is empty.
    let mut f_prev = -i * omega0;
    let denom = Complex64::new(1.0, 0.0) + half * (i * omega0 + half * mu[0]);
    for step in 1..n {
        // S = ½μ_step u_0 + Σ_{j=1}^{step−1} μ_{step−j} u_j
        let mut s = 0.5 * mu[step] * u[0];
        for j in 1..step {
            s += mu[step - j] * u[j];
        }
        let next = (u[step - 1] + half * f_prev - half * dt * s) / denom;
        if next.norm().is_nan() || next.norm() > 1.0 + 1e-6 {
            return Err(Error::Solver(format!(
                "|u| = {:.6} at t = {:.6} exceeds 1; reduce the time step",
                next.norm(),
                step as f64 * dt
            )));
        }
        f_prev = -i * omega0 * next - dt * (s + 0.5 * mu[0] * next);
        u.push(next);
    }
    Ok(u)
}

/// Solves for v on `grid` given u on the same grid, tabulating ν once.
pub fn solve_v(
    sd: &SpectralDensity,
    beta_b: f64,
    u: &[Complex64],
    grid: TimeGrid,
) -> Result<Vec<f64>> {
    if u.len() != grid.len() {
        return Err(Error::domain(format!(
            "u has {} samples but the grid has {}",
            u.len(),
            grid.len()
        )));
    }
    let ks = sd.tabulate_kernels(beta_b, &grid.times())?;
    solve_v_with_kernel(&ks.nu, u, grid.dt())
}

/// Product-trapezoid double integral for v given ν(i·dt) and u.
///
/// The integrand is Hermitian in (t₁, t₂), so only the lower triangle is
/// summed. The inner sums ĉ_a = Σ_{b<a} ŵ_b ν_{a−b} u_b use the weights of an
/// open right end, which makes every partial sum reusable at later times.
pub fn solve_v_with_kernel(nu: &[Complex64], u: &[Complex64], dt: f64) -> Result<Vec<f64>> {
    let n = u.len();
    if nu.len() < n {
        return Err(Error::domain("noise kernel shorter than u"));
    }
    let mut v = Vec::with_capacity(n);
    if n == 0 {
        return Ok(v);
    }
    v.push(0.0);
    let w_hat = |b: usize| if b == 0 { 0.5 * dt } else { dt };
    let nu0 = nu[0];
    let mut off_diag = Complex64::new(0.0, 0.0);
    let mut diag = w_hat(0) * w_hat(0) * u[0].norm_sqr();
    let mut residue = 0.0_f64;
    for a in 1..n {
        let mut inner = Complex64::new(0.0, 0.0);
        for b in 0..a {
            inner += w_hat(b) * nu[a - b] * u[b];
        }
        let cross = u[a].conj() * inner;
        let end_w = 0.5 * dt;
        let total_off = off_diag + end_w * cross;
        let total_diag = diag + end_w * end_w * u[a].norm_sqr();
        let value = 2.0 * total_off.re + nu0.re * total_diag;
        residue = residue.max((nu0.im * total_diag).abs());
        v.push(value);
        off_diag += w_hat(a) * cross;
        diag += w_hat(a) * w_hat(a) * u[a].norm_sqr();
    }
    if residue > 1e-6 {
        return Err(Error::numerical(
            "imaginary residue of v exceeds 1e-6; ν(0) is not real",
            residue,
        ));
    }
    Ok(v)
}

/// u and v on `grid` from one kernel tabulation.
pub fn solve(
    sd: &SpectralDensity,
    omega0: f64,
    beta_b: f64,
    grid: TimeGrid,
) -> Result<Trajectory> {
    let ks = sd.tabulate_kernels(beta_b, &grid.times())?;
    let u = solve_u_with_kernel(&ks.mu, omega0, grid.dt())?;
    let v = solve_v_with_kernel(&ks.nu, &u, grid.dt())?;
    Ok(Trajectory { grid, u, v, beta_b })
}

/// Richardson-extrapolated trajectory on `grid`.
///
/// Solves on grids with n_steps·2^k steps for k = 0..=levels and eliminates
/// the dt², dt⁴, … error terms at the points of the coarsest grid.
pub fn solve_extrapolated(
    sd: &SpectralDensity,
    omega0: f64,
    beta_b: f64,
    grid: TimeGrid,
    levels: u32,
) -> Result<Trajectory> {
    let finest = grid.refined(1 << levels);
    let ks = sd.tabulate_kernels(beta_b, &finest.times())?;
    let mut u_table: Vec<Vec<Complex64>> = Vec::new();
    let mut v_table: Vec<Vec<f64>> = Vec::new();
    for k in 0..=levels {
        let stride = 1usize << (levels - k);
        let mu: Vec<Complex64> = ks.mu.iter().step_by(stride).copied().collect();
        let nu: Vec<Complex64> = ks.nu.iter().step_by(stride).copied().collect();
        let g = grid.refined(1 << k);
        let u = solve_u_with_kernel(&mu, omega0, g.dt())?;
        let v = solve_v_with_kernel(&nu, &u, g.dt())?;
        let coarse = 1usize << k;
        u_table.push(u.iter().step_by(coarse).copied().collect());
        v_table.push(v.iter().step_by(coarse).copied().collect());
    }
    let u = romberg(u_table);
    let v = romberg(v_table);
    Ok(Trajectory { grid, u, v, beta_b })
}

/// Eliminates even powers of the step from estimates on successively halved
/// steps. Row k must have step size h/2^k.
fn romberg<T>(mut rows: Vec<Vec<T>>) -> Vec<T>
where
    T: Copy + std::ops::Sub<Output = T> + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let levels = rows.len();
    for j in 1..levels {
        let factor = 4f64.powi(j as i32) - 1.0;
        for k in (j..levels).rev() {
            let (lo, hi) = rows.split_at_mut(k);
            let coarse = &lo[k - 1];
            for (fine, &c) in hi[0].iter_mut().zip(coarse) {
                *fine = *fine + (*fine - c) * (1.0 / factor);
            }
        }
    }
    rows.pop().unwrap_or_default()
}

fn tabulate_mu(sd: &SpectralDensity, times: &[f64]) -> Result<Vec<Complex64>> {
    match sd {
        SpectralDensity::OhmicFamily {
            band_edge: Some(_), ..
        } => Ok(sd.tabulate_kernels(1.0, times)?.mu),
        _ => times.iter().map(|&t| sd.memory_kernel(t)).collect(),
    }
}

/// Born–Markov decay rate κ = πJ(ω₀).
pub fn markov_rate(sd: &SpectralDensity, omega0: f64) -> Result<f64> {
    Ok(std::f64::consts::PI * sd.density(omega0)?)
}

/// Born–Markov trajectory u = e^{−κt − i(ω₀+Δ(ω₀))t}, v = n̄(β_b, ω₀)(1 − e^{−2κt}).
pub fn markovian_trajectory(
    sd: &SpectralDensity,
    omega0: f64,
    beta_b: f64,
    grid: TimeGrid,
) -> Result<Trajectory> {
    if !(beta_b.is_finite() && beta_b > 0.0) {
        return Err(Error::domain(format!("beta_b must be positive, got {beta_b}")));
    }
    let kappa = markov_rate(sd, omega0)?;
    let shifted = omega0 + sd.lamb_shift(omega0)?;
    let occupation = bose(beta_b, omega0);
    let times = grid.times();
    let u = times
        .iter()
        .map(|&t| Complex64::from_polar((-kappa * t).exp(), -shifted * t))
        .collect();
    let v = times
        .iter()
        .map(|&t| -occupation * (-2.0 * kappa * t).exp_m1())
        .collect();
    Ok(Trajectory { grid, u, v, beta_b })
}

/// Master-equation coefficients by finite differences: central in the
/// interior, second-order one-sided at the ends.
pub fn master_coefficients(traj: &Trajectory) -> Result<MasterCoefficients> {
    let n = traj.u.len();
    if n < 3 {
        return Err(Error::domain("master coefficients need at least three samples"));
    }
    let dt = traj.grid.dt();
    let u_dot = differentiate(&traj.u, dt);
    let v_dot = differentiate(&traj.v, dt);
    let mut omega = Vec::with_capacity(n);
    let mut gamma = Vec::with_capacity(n);
    let mut gamma_beta = Vec::with_capacity(n);
    for i in 0..n {
        let abs_u = traj.u[i].norm();
        if abs_u < 1e-10 {
            return Err(Error::SingularCoefficient { index: i, abs_u });
        }
        let ratio = u_dot[i] / traj.u[i];
        omega.push(-ratio.im);
        gamma.push(-ratio.re);
        gamma_beta.push(v_dot[i] + 2.0 * traj.v[i] * (-ratio.re));
    }
    Ok(MasterCoefficients {
        times: traj.times(),
        omega,
        gamma,
        gamma_beta,
    })
}

fn differentiate<T>(y: &[T], dt: f64) -> Vec<T>
where
    T: Copy + std::ops::Sub<Output = T> + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let n = y.len();
    let inv = 1.0 / dt;
    (0..n)
        .map(|i| {
            if i == 0 {
                (y[1] * 4.0 - y[0] * 3.0 - y[2]) * (0.5 * inv)
            } else if i == n - 1 {
                (y[n - 1] * 3.0 - y[n - 2] * 4.0 + y[n - 3]) * (0.5 * inv)
            } else {
                (y[i + 1] - y[i - 1]) * (0.5 * inv)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Mode;

    #[test]
    fn free_evolution_is_a_pure_phase() {
        let grid = TimeGrid::new(20.0, 2000).unwrap();
        let traj = solve(&SpectralDensity::empty(), 1.3, 1.0, grid).unwrap();
        for (k, u) in traj.u.iter().enumerate() {
            assert!((u.norm() - 1.0).abs() < 1e-12);
            let exact = Complex64::from_polar(1.0, -1.3 * grid.time(k));
            assert!((u - exact).norm() < 1e-3);
        }
        assert!(traj.v.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn resonant_mode_gives_rabi_oscillation() {
        let g = 0.2;
        let sd = SpectralDensity::discrete(vec![Mode { omega: 1.0, g }]).unwrap();
        let t_end = std::f64::consts::FRAC_PI_2 / g;
        let grid = TimeGrid::new(t_end, 400).unwrap();
        let traj = solve_extrapolated(&sd, 1.0, 1.0, grid, 3).unwrap();
        let nb = bose(1.0, 1.0);
        for (k, (u, v)) in traj.u.iter().zip(&traj.v).enumerate() {
            let t = grid.time(k);
            let exact = Complex64::from_polar((g * t).cos(), -t);
            assert!((u - exact).norm() < 1e-9, "t={t}");
            assert!((v - nb * (g * t).sin().powi(2)).abs() < 1e-9, "t={t}");
        }
        assert!(traj.u.last().unwrap().norm() < 1e-8);
    }

    #[test]
    fn trapezoid_is_second_order() {
        let sd = SpectralDensity::ohmic(0.1, 1.0, 5.0).unwrap();
        let err = |n: usize| {
            let grid = TimeGrid::new(4.0, n).unwrap();
            let coarse = solve(&sd, 1.0, 0.5, grid).unwrap();
            let fine = solve(&sd, 1.0, 0.5, grid.refined(2)).unwrap();
            let du = coarse
                .u
                .iter()
                .zip(fine.u.iter().step_by(2))
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            let dv = coarse
                .v
                .iter()
                .zip(fine.v.iter().step_by(2))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            (du, dv)
        };
        let (u1, v1) = err(100);
        let (u2, v2) = err(200);
        assert!((u1 / u2).log2() > 1.8, "u order {}", (u1 / u2).log2());
        assert!((v1 / v2).log2() > 1.8, "v order {}", (v1 / v2).log2());
    }

    #[test]
    fn cold_bath_leaves_v_negligible() {
        let sd = SpectralDensity::discrete(vec![
            Mode { omega: 1.0, g: 0.1 },
            Mode { omega: 1.5, g: 0.2 },
        ])
        .unwrap();
        let traj = solve(&sd, 1.2, 200.0, TimeGrid::new(30.0, 600).unwrap()).unwrap();
        assert!(traj.v.iter().all(|&v| v.abs() <= 1e-10));
        traj.check_invariants().unwrap();
    }

    #[test]
    fn markovian_trajectory_limits() {
        let sd = SpectralDensity::ohmic(0.01, 1.0, 10.0).unwrap();
        let kappa = markov_rate(&sd, 1.0).unwrap();
        let grid = TimeGrid::new(50.0 / kappa, 10).unwrap();
        let traj = markovian_trajectory(&sd, 1.0, 0.2, grid).unwrap();
        assert_eq!(traj.u[0], Complex64::new(1.0, 0.0));
        assert_eq!(traj.v[0], 0.0);
        assert!(traj.u.last().unwrap().norm() <= 1e-12);
        assert!((traj.v.last().unwrap() - bose(0.2, 1.0)).abs() <= 1e-12);
    }

    #[test]
    fn master_coefficients_of_markovian_input() {
        let sd = SpectralDensity::ohmic(0.05, 1.0, 10.0).unwrap();
        let grid = TimeGrid::new(5.0, 5000).unwrap();
        let traj = markovian_trajectory(&sd, 1.0, 0.2, grid).unwrap();
        let mc = master_coefficients(&traj).unwrap();
        let kappa = markov_rate(&sd, 1.0).unwrap();
        let shifted = 1.0 + sd.lamb_shift(1.0).unwrap();
        for i in 0..mc.times.len() {
            assert!((mc.gamma[i] - kappa).abs() < 1e-5);
            assert!((mc.omega[i] - shifted).abs() < 1e-5);
        }
    }

    #[test]
    fn master_coefficients_of_free_evolution() {
        let grid = TimeGrid::new(5.0, 1000).unwrap();
        let traj = solve(&SpectralDensity::empty(), 1.0, 1.0, grid).unwrap();
        let mc = master_coefficients(&traj).unwrap();
        for i in 0..mc.times.len() {
            assert!((mc.omega[i] - 1.0).abs() < 1e-4);
            assert!(mc.gamma[i].abs() < 1e-5);
            assert!(mc.gamma_beta[i].abs() < 1e-10);
        }
    }

    #[test]
    fn zero_of_u_is_reported() {
        let traj = Trajectory {
            grid: TimeGrid::new(1.0, 2).unwrap(),
            u: vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.5, 0.0)],
            v: vec![0.0; 3],
            beta_b: 1.0,
        };
        assert!(matches!(
            master_coefficients(&traj),
            Err(Error::SingularCoefficient { index: 1, .. })
        ));
    }

    #[test]
    fn romberg_removes_quadratic_error() {
        let rows = vec![vec![1.0 + 0.5], vec![1.0 + 0.125]];
        assert!((romberg(rows)[0] - 1.0).abs() < 1e-15);
    }
}
