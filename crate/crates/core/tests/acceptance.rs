//! Release gate. Runs every acceptance check concurrently and prints one
//! line per check, in order. Exits nonzero if any check fails.

use std::f64::consts::PI;
use std::process::Command;
use std::time::Instant;

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rustfft::FftPlanner;

use qheat::heat::{
    characteristic_function, effective_beta, heat_distribution, integral_ft_value,
    ln_transition_probability, markovian_heat_stats, mean_heat, steady_state_extrema,
    symmetric_xi_grid, transition_probability, HeatSetup,
};
use qheat::oracle::{
    fock_two_point_measurement, single_particle_u_v, FockModel, SingleParticleModel,
};
use qheat::propagator::{
    markov_rate, markovian_trajectory, solve, solve_extrapolated, TimeGrid,
};
use qheat::spectral::bose;
use qheat::spectrum::{asymptotic_state, find_bound_states, sum_rule};
use qheat::{Mode, SpectralDensity};

type Check = fn() -> Result<String, String>;

struct Outcome {
    id: usize,
    name: &'static str,
    passed: bool,
    detail: String,
    seconds: f64,
}

fn fig2(eta: f64) -> SpectralDensity {
    SpectralDensity::ohmic(eta, 1.0, 10.0).unwrap()
}

const FIG2_BETA_S: f64 = 1.2;
const FIG2_BETA_B: f64 = 0.2;

fn require(ok: bool, detail: String) -> Result<String, String> {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn max_abs<T, F: Fn(&T, &T) -> f64>(a: &[T], b: &[T], d: F) -> f64 {
    a.iter().zip(b).map(|(x, y)| d(x, y)).fold(0.0, f64::max)
}

/// Richardson-extrapolated Volterra on the 3000-step grid against the exact
/// eigen-solution of the same band-limited bath in 400 modes below ω = 20.
fn continuum_oracle() -> Result<String, String> {
    let omega_max = 20.0;
    let sd = fig2(0.05);
    let grid = TimeGrid::new(30.0, 3000).unwrap();
    let band = sd.clone().band_limited(omega_max).unwrap();
    let traj = solve_extrapolated(&band, 1.0, FIG2_BETA_B, grid, 2).map_err(|e| e.to_string())?;
    let bath = sd.discretize(400, omega_max).unwrap();
    let model = SingleParticleModel::from_density(1.0, &bath).unwrap();
    let exact = single_particle_u_v(&model, FIG2_BETA_B, grid).map_err(|e| e.to_string())?;
    let du = max_abs(&traj.u, &exact.u, |a, b| (a - b).norm());
    let dv = max_abs(&traj.v, &exact.v, |a, b| (a - b).abs());
    require(
        du <= 1e-3 && dv <= 2e-3,
        format!("max|Δu| = {du:.2e} (≤ 1e-3), max|Δv| = {dv:.2e} (≤ 2e-3)"),
    )
}

/// Volterra against the eigen-solution for a ten-mode bath.
fn discrete_oracle() -> Result<String, String> {
    let modes: Vec<Mode> = (0..10)
        .map(|k| Mode {
            omega: 0.6 + 0.09 * k as f64,
            g: 0.04 + 0.008 * k as f64,
        })
        .collect();
    let sd = SpectralDensity::discrete(modes.clone()).unwrap();
    let grid = TimeGrid::new(20.0, 1000).unwrap();
    let traj = solve_extrapolated(&sd, 1.0, 0.5, grid, 4).map_err(|e| e.to_string())?;
    let exact = single_particle_u_v(&SingleParticleModel::new(1.0, modes), 0.5, grid)
        .map_err(|e| e.to_string())?;
    let du = max_abs(&traj.u, &exact.u, |a, b| (a - b).norm());
    let dv = max_abs(&traj.v, &exact.v, |a, b| (a - b).abs());
    require(
        du <= 1e-8 && dv <= 1e-8,
        format!("max|Δu| = {du:.2e}, max|Δv| = {dv:.2e} (≤ 1e-8)"),
    )
}

fn fig2_states() -> Result<Vec<(f64, f64, Complex64, f64)>, String> {
    let grid = TimeGrid::new(20.0, 4000).unwrap();
    let mut out = Vec::new();
    for eta in [0.02, 0.1, 0.15] {
        let traj = solve(&fig2(eta), 1.0, FIG2_BETA_B, grid).map_err(|e| e.to_string())?;
        for tau in [1.0, 5.0, 20.0] {
            let k = (tau / grid.dt()).round() as usize;
            out.push((eta, tau, traj.u[k], traj.v[k]));
        }
    }
    Ok(out)
}

/// ⟨e^{(β_eff−β_s)Q}⟩ = 1 on the fig2 set, and the Jarzynski–Wójcik form fails
/// at strong coupling.
fn generalized_ft() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    let mut jw_dev = f64::NAN;
    for (eta, tau, u, v) in fig2_states()? {
        let setup = HeatSetup::for_state(FIG2_BETA_S, FIG2_BETA_B, 1.0, u, v)
            .map_err(|e| e.to_string())?;
        let dist = heat_distribution(&setup, u, v).map_err(|e| e.to_string())?;
        let b_eff = effective_beta(1.0, u, v).map_err(|e| e.to_string())?;
        worst = worst.max((integral_ft_value(&dist, b_eff - FIG2_BETA_S) - 1.0).abs());
        if eta == 0.15 && tau == 5.0 {
            jw_dev = (integral_ft_value(&dist, FIG2_BETA_B - FIG2_BETA_S) - 1.0).abs();
        }
    }
    require(
        worst <= 1e-6 && jw_dev >= 1e-2,
        format!("max|GJW − 1| = {worst:.2e} (≤ 1e-6); |JW − 1| at η=0.15, τ=5 = {jw_dev:.3} (≥ 1e-2)"),
    )
}

/// χ(ξ) = χ(β_eff − β_s − ξ) on the 41-point symmetric grid.
fn permutation_symmetry() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for (_, _, u, v) in fig2_states()? {
        let setup = HeatSetup::for_state(FIG2_BETA_S, FIG2_BETA_B, 1.0, u, v)
            .map_err(|e| e.to_string())?;
        let b_eff = effective_beta(1.0, u, v).map_err(|e| e.to_string())?;
        for xi in symmetric_xi_grid(&setup, u, v, 41).map_err(|e| e.to_string())? {
            let a = characteristic_function(xi, &setup, u, v).map_err(|e| e.to_string())?;
            let b = characteristic_function(b_eff - FIG2_BETA_S - xi, &setup, u, v)
                .map_err(|e| e.to_string())?;
            worst = worst.max((a - b).abs() / a);
        }
    }
    require(worst <= 1e-8, format!("max relative asymmetry = {worst:.2e} (≤ 1e-8)"))
}

/// P_{l′l}/P_{ll′} = e^{−β_eff ω₀ (l′−l)} for random admissible (u, v).
fn detailed_balance() -> Result<String, String> {
    let mut rng = StdRng::seed_from_u64(20240611);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let r = rng.random::<f64>().sqrt();
        let u = Complex64::from_polar(r, rng.random_range(0.0..2.0 * PI));
        let v = 10.0 * (1.0 - rng.random::<f64>());
        let l = rng.random_range(0..=40usize);
        let lp = rng.random_range(0..=40usize);
        let ratio = (ln_transition_probability(u, v, l, lp).map_err(|e| e.to_string())?
            - ln_transition_probability(u, v, lp, l).map_err(|e| e.to_string())?)
        .exp();
        let b_eff = effective_beta(1.0, u, v).map_err(|e| e.to_string())?;
        let expected = (-b_eff * (lp as f64 - l as f64)).exp();
        worst = worst.max((ratio - expected).abs() / expected);
    }
    require(worst <= 1e-10, format!("max relative error = {worst:.2e} (≤ 1e-10)"))
}

/// Born–Markov limits and weak-coupling agreement with the exact solution.
fn markov_limits() -> Result<String, String> {
    let sd = fig2(0.01);
    let kappa = markov_rate(&sd, 1.0).map_err(|e| e.to_string())?;
    let grid = TimeGrid::new(100.0, 20).unwrap();
    let ma = markovian_trajectory(&sd, 1.0, FIG2_BETA_B, grid).map_err(|e| e.to_string())?;
    let mut beta_err: f64 = 0.0;
    for k in 1..grid.len() {
        let b = effective_beta(1.0, ma.u[k], ma.v[k]).map_err(|e| e.to_string())?;
        beta_err = beta_err.max((b - FIG2_BETA_B).abs());
    }
    let setup = HeatSetup::new(FIG2_BETA_S, FIG2_BETA_B, 1.0, 60).unwrap();
    let late = markovian_heat_stats(&setup, &sd, 50.0 / kappa, &[]).map_err(|e| e.to_string())?;
    let q_err = (late.mean_heat - (bose(FIG2_BETA_B, 1.0) - bose(FIG2_BETA_S, 1.0))).abs();
    let span = TimeGrid::new(3.0 / kappa, 6000).unwrap();
    let exact = solve(&sd, 1.0, FIG2_BETA_B, span).map_err(|e| e.to_string())?;
    let approx = markovian_trajectory(&sd, 1.0, FIG2_BETA_B, span).map_err(|e| e.to_string())?;
    let du = max_abs(&exact.u, &approx.u, |a, b| (a.norm() - b.norm()).abs());
    require(
        beta_err <= 1e-12 && q_err <= 1e-12 && du <= 0.05,
        format!(
            "|β_eff − β_b| = {beta_err:.1e}, |⟨Q(∞)⟩ error| = {q_err:.1e} (≤ 1e-12); max||u|−|u_MA|| = {du:.4} (≤ 0.05)"
        ),
    )
}

/// Bound-state threshold, residue plateau and spectral sum rule for fig2.
fn bound_state_physics() -> Result<String, String> {
    let etas: Vec<f64> = (0..=36).map(|k| 0.02 + 0.005 * k as f64).collect();
    let mut counts = Vec::new();
    for &eta in &etas {
        counts.push(find_bound_states(&fig2(eta), 1.0).map_err(|e| e.to_string())?.count());
    }
    let first = etas
        .iter()
        .zip(&counts)
        .find(|(_, &c)| c > 0)
        .map(|(&e, _)| e)
        .unwrap_or(f64::NAN);
    let step = 0.005;
    let monotone = counts.windows(2).all(|w| w[0] <= w[1]);
    let threshold_ok = monotone && first > 0.1 && first <= 0.1 + step + 1e-12;

    let sd = fig2(0.15);
    let bound = find_bound_states(&sd, 1.0).map_err(|e| e.to_string())?;
    let z = bound.total_weight();
    let grid = TimeGrid::new(60.0, 12000).unwrap();
    let traj = solve(&sd, 1.0, FIG2_BETA_B, grid).map_err(|e| e.to_string())?;
    let plateau = traj.u.last().unwrap().norm();
    let plateau_err = (plateau - z).abs() / z;
    let total = sum_rule(&sd, 1.0, &bound).map_err(|e| e.to_string())?;
    require(
        threshold_ok && plateau_err <= 0.02 && (total - 1.0).abs() <= 1e-4,
        format!(
            "first bound state at η = {first:.3} (threshold 0.1, step {step}); |u(60)| = {plateau:.5} vs Z = {z:.5} ({:.2}%); ΣZ + ∫Θ = {total:.7}",
            100.0 * plateau_err
        ),
    )
}

/// Frequency of the dominant oscillation in `series` sampled every `dt`.
fn dominant_frequency(series: &[f64], dt: f64) -> f64 {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let padded = (n * 64).next_power_of_two();
    let mut buf: Vec<rustfft::num_complex::Complex<f64>> = (0..padded)
        .map(|k| {
            let x = if k < n {
                let w = 0.5 - 0.5 * (2.0 * PI * k as f64 / (n - 1) as f64).cos();
                (series[k] - mean) * w
            } else {
                0.0
            };
            rustfft::num_complex::Complex::new(x, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(padded).process(&mut buf);
    let power: Vec<f64> = buf[..padded / 2].iter().map(|c| c.norm_sqr()).collect();
    let (k, _) = power
        .iter()
        .enumerate()
        .skip(1)
        .fold((1, 0.0), |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc });
    let (a, b, c) = (power[k - 1].ln(), power[k].ln(), power[k + 1].ln());
    let offset = 0.5 * (a - c) / (a - 2.0 * b + c);
    2.0 * PI * (k as f64 + offset) / (padded as f64 * dt)
}

/// Lossless beat of ⟨Q(t)⟩ and β_eff(t) with two bound states (fig3, g = 0.12).
/// The window starts at t = 1200 so the band-edge transient is below the beat
/// amplitude of β_eff.
fn two_bound_states() -> Result<String, String> {
    let (beta_s, beta_b, omega0) = (1.0, 5.0, 1.05);
    let sd = SpectralDensity::semicircle(0.12, 0.03, 1.0).unwrap();
    let bound = find_bound_states(&sd, omega0).map_err(|e| e.to_string())?;
    if bound.count() != 2 {
        return Err(format!("expected two bound states, found {}", bound.count()));
    }
    let beat = bound.beat_frequency();
    let grid = TimeGrid::new(2400.0, 48000).unwrap();
    let traj = solve(&sd, omega0, beta_b, grid).map_err(|e| e.to_string())?;
    let setup = HeatSetup::new(beta_s, beta_b, omega0, 60).unwrap();
    let start = grid.len() / 2;
    let mut heat = Vec::new();
    let mut beta = Vec::new();
    for k in start..grid.len() {
        heat.push(mean_heat(&setup, traj.u[k], traj.v[k]));
        beta.push(effective_beta(omega0, traj.u[k], traj.v[k]).map_err(|e| e.to_string())?);
    }
    let f_heat = dominant_frequency(&heat, grid.dt());
    let f_beta = dominant_frequency(&beta, grid.dt());
    let asym = asymptotic_state(&sd, omega0, beta_b, &bound).map_err(|e| e.to_string())?;
    let ext = steady_state_extrema(&setup, &asym).map_err(|e| e.to_string())?;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    let lo = |xs: &[f64]| xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = |xs: &[f64]| xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let freq_err = rel(f_heat, beat).max(rel(f_beta, beat));
    let ext_err = rel(lo(&heat), ext.mean_heat.0)
        .max(rel(hi(&heat), ext.mean_heat.1))
        .max(rel(lo(&beta), ext.beta_eff.0))
        .max(rel(hi(&beta), ext.beta_eff.1));
    require(
        freq_err <= 0.01 && ext_err <= 0.02,
        format!(
            "|E₊−E₋| = {beat:.5}; FFT peaks ⟨Q⟩ {f_heat:.5}, β_eff {f_beta:.5} ({:.2}% ≤ 1%); extrema error {:.2}% (≤ 2%)",
            100.0 * freq_err,
            100.0 * ext_err
        ),
    )
}

/// Brute-force Fock evolution against the Gaussian-channel formula.
fn fock_oracle() -> Result<String, String> {
    let (beta_s, beta_b, omega0, n_max, tau) = (0.5, 5.0, 1.05, 6, 6.0);
    let modes = vec![Mode { omega: 0.98, g: 0.07 }, Mode { omega: 1.12, g: 0.05 }];
    let model = FockModel::new(omega0, modes.clone(), n_max, beta_s, beta_b)
        .map_err(|e| e.to_string())?;
    let fock = fock_two_point_measurement(&model, tau).map_err(|e| e.to_string())?;
    let sp = SingleParticleModel::new(omega0, modes);
    let traj = single_particle_u_v(&sp, beta_b, TimeGrid::new(tau, 1).unwrap())
        .map_err(|e| e.to_string())?;
    let (u, v) = (traj.u[1], traj.v[1]);
    // The top column has no level above it in the truncated space, so its upward
    // transitions are folded back; every other column is compared.
    let mut worst: f64 = 0.0;
    let mut worst_all: f64 = 0.0;
    for l in 0..=n_max {
        for lp in 0..=n_max {
            let d = (fock.p[lp][l] - transition_probability(u, v, l, lp).map_err(|e| e.to_string())?).abs();
            worst_all = worst_all.max(d);
            if l < n_max {
                worst = worst.max(d);
            }
        }
    }
    // Both sides start from the Gibbs weights of the levels the model can hold.
    let x = beta_s * omega0;
    let restricted: f64 = (0..=n_max)
        .map(|l| {
            let p0 = -(-x).exp_m1() * (-x * l as f64).exp();
            p0 * ((u.norm_sqr() - 1.0) * l as f64 + v) * omega0
        })
        .sum();
    let fock_mean = fock.dist.moment(1);
    let mean_err = (fock_mean - restricted).abs();
    let setup = HeatSetup::for_state(beta_s, beta_b, omega0, u, v).map_err(|e| e.to_string())?;
    let untruncated = mean_heat(&setup, u, v);
    require(
        worst <= 1e-3 && mean_err <= 1e-3,
        format!(
            "max|ΔP| = {worst:.2e} on l < {n_max} ({worst_all:.2e} with the top column); ⟨Q⟩ Fock {fock_mean:.6} vs closed form {restricted:.6} on the same levels (untruncated {untruncated:.6})"
        ),
    )
}

fn run_cli(args: &[&str], out: &std::path::Path) -> Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_qheat"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("QHEAT_THREADS", "4")
        .output()
        .map_err(|e| e.to_string())?;
    if !(status.status.code() == Some(0) || status.status.code() == Some(1)) {
        return Err(format!(
            "{args:?} exited with {:?}: {}",
            status.status.code(),
            String::from_utf8_lossy(&status.stderr)
        ));
    }
    std::fs::read(out).map_err(|e| e.to_string())
}

/// Repeated `verify` and `sweep` runs produce identical bytes.
fn determinism() -> Result<String, String> {
    let dir = std::env::temp_dir().join(format!("qheat-accept-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let runs: [&[&str]; 2] = [
        &["verify", "--preset", "fig2", "--set", "eta=0.15"],
        &[
            "sweep", "--preset", "fig3", "--range", "g=0.005:0.2:40", "--set", "t_end=100", "--set",
            "n_steps=2500",
        ],
    ];
    let mut sizes = Vec::new();
    for (i, args) in runs.iter().enumerate() {
        let a = run_cli(args, &dir.join(format!("{i}a.csv")))?;
        let b = run_cli(args, &dir.join(format!("{i}b.csv")))?;
        if a != b {
            return Err(format!("{} output differs between runs", args[0]));
        }
        sizes.push(a.len());
    }
    let _ = std::fs::remove_dir_all(&dir);
    Ok(format!("verify ({} B) and sweep ({} B) byte-identical across runs", sizes[0], sizes[1]))
}

fn main() {
    let checks: [(&'static str, Check); 10] = [
        ("oracle equivalence, continuum", continuum_oracle),
        ("oracle equivalence, discrete", discrete_oracle),
        ("generalized fluctuation theorem", generalized_ft),
        ("permutation symmetry", permutation_symmetry),
        ("detailed balance", detailed_balance),
        ("Markov limits", markov_limits),
        ("bound-state physics", bound_state_physics),
        ("two-bound-state oscillation", two_bound_states),
        ("Fock oracle", fock_oracle),
        ("determinism", determinism),
    ];
    let outcomes: Vec<Outcome> = std::thread::scope(|scope| {
        let handles: Vec<_> = checks
            .iter()
            .enumerate()
            .map(|(i, &(name, check))| {
                scope.spawn(move || {
                    let start = Instant::now();
                    let result = std::panic::catch_unwind(check)
                        .unwrap_or_else(|_| Err("panicked".to_string()));
                    let (passed, detail) = match result {
                        Ok(d) => (true, d),
                        Err(d) => (false, d),
                    };
                    Outcome {
                        id: i + 1,
                        name,
                        passed,
                        detail,
                        seconds: start.elapsed().as_secs_f64(),
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut failed = 0;
    for o in &outcomes {
        println!(
            "AC{:<2} {:<32} {}  [{:.1} s] {}",
            o.id,
            o.name,
            if o.passed { "PASS" } else { "FAIL" },
            o.seconds,
            o.detail
        );
        if !o.passed {
            failed += 1;
        }
    }
    println!("{} of {} acceptance checks passed", outcomes.len() - failed, outcomes.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
