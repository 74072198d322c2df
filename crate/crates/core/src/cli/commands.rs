//! Subcommand bodies. Each returns a finished table.

use num_complex::Complex64;
use rayon::prelude::*;

use super::config::{ModelConfig, RawConfig, RunConfig};
use super::table::{Cell, Table};
use crate::error::{Error, Result};
use crate::heat::{
    characteristic_function, effective_beta, heat_distribution, integral_ft_value,
    ln_transition_probability, mean_heat, steady_state_extrema, symmetric_xi_grid, HeatSetup,
};
use crate::oracle::{single_particle_u_v, SingleParticleModel};
use crate::propagator::{markovian_trajectory, solve, solve_extrapolated, TimeGrid, Trajectory};
use crate::spectral::bose;
use crate::spectrum::{asymptotic_state, find_bound_states, sum_rule};
use crate::SpectralDensity;

/// Largest number of samples on which the eigen-solution is evaluated.
const ORACLE_SAMPLES: usize = 1000;
/// Number of evenly spaced states probed by `verify`.
const VERIFY_STATES: usize = 10;
/// Highest level used in the detailed-balance check.
const BALANCE_LEVELS: usize = 20;

pub type Header = Vec<(String, String)>;

fn grid(cfg: &RunConfig) -> Result<TimeGrid> {
    TimeGrid::new(cfg.t_end, cfg.n_steps)
}

fn trajectory_for(cfg: &RunConfig, sd: &SpectralDensity) -> Result<Trajectory> {
    let grid = grid(cfg)?;
    let resolution = grid.resolution(sd, cfg.omega0);
    if resolution > 0.05 {
        log::warn!("dt·ω_max = {resolution:.3} exceeds 0.05; consider more steps");
    }
    let traj = if cfg.richardson > 0 {
        solve_extrapolated(sd, cfg.omega0, cfg.beta_b, grid, cfg.richardson)?
    } else {
        solve(sd, cfg.omega0, cfg.beta_b, grid)?
    };
    traj.check_invariants()?;
    Ok(traj)
}

fn setup_for(cfg: &RunConfig, u: Complex64, v: f64) -> Result<HeatSetup> {
    match cfg.l_max {
        Some(l) => HeatSetup::new(cfg.beta_s, cfg.beta_b, cfg.omega0, l),
        None => HeatSetup::for_state(cfg.beta_s, cfg.beta_b, cfg.omega0, u, v),
    }
}

/// β_eff, or `None` while v is below the floor.
fn maybe_beta(omega0: f64, u: Complex64, v: f64) -> Result<Option<f64>> {
    match effective_beta(omega0, u, v) {
        Ok(b) => Ok(Some(b)),
        Err(Error::Undefined(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn continuous(cfg: &RunConfig, what: &str) -> Result<()> {
    if matches!(cfg.model, ModelConfig::Discrete { .. }) {
        return Err(Error::Config(format!("{what} needs an ohmic or semicircle model")));
    }
    Ok(())
}

pub fn kernels(cfg: &RunConfig, header: Header) -> Result<Table> {
    let sd = cfg.density()?;
    let times = grid(cfg)?.times();
    let ks = sd.tabulate_kernels(cfg.beta_b, &times)?;
    let mut table = Table::new(header, &["t", "re_mu", "im_mu", "re_nu", "im_nu"]);
    for (i, &t) in times.iter().enumerate() {
        table.push(vec![
            t.into(),
            ks.mu[i].re.into(),
            ks.mu[i].im.into(),
            ks.nu[i].re.into(),
            ks.nu[i].im.into(),
        ]);
    }
    Ok(table)
}

pub fn propagate(cfg: &RunConfig, header: Header) -> Result<Table> {
    let traj = trajectory_for(cfg, &cfg.density()?)?;
    let mut table = Table::new(header, &["t", "re_u", "im_u", "abs_u", "v"]);
    for (i, t) in traj.times().into_iter().enumerate() {
        let u = traj.u[i];
        table.push(vec![t.into(), u.re.into(), u.im.into(), u.norm().into(), traj.v[i].into()]);
    }
    Ok(table)
}

pub fn spectrum(points: &[RunConfig], header: Header) -> Result<Table> {
    let rows = points
        .par_iter()
        .map(|cfg| {
            continuous(cfg, "spectrum")?;
            let sd = cfg.density()?;
            let bound = find_bound_states(&sd, cfg.omega0)?;
            let asym = asymptotic_state(&sd, cfg.omega0, cfg.beta_b, &bound)?;
            let mut row = vec![Cell::Num(cfg.coupling().expect("continuous model")), Cell::Int(bound.count() as i64)];
            for k in 0..2 {
                match bound.states.get(k) {
                    Some(b) => row.extend([Cell::Num(b.energy), Cell::Num(b.weight)]),
                    None => row.extend([Cell::Empty, Cell::Empty]),
                }
            }
            row.extend([Cell::Num(asym.v_constant), Cell::Num(asym.beat_frequency)]);
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(
        header,
        &["g_or_eta", "count", "E_b_1", "Z_1", "E_b_2", "Z_2", "v_inf_const", "beat_freq"],
    );
    for row in rows {
        table.push(row);
    }
    Ok(table)
}

/// β_eff, ⟨Q⟩ and both fluctuation-theorem averages at one state.
struct HeatRow {
    beta_eff: Option<f64>,
    mean_heat: f64,
    ft_gjw: Option<f64>,
    ft_jw: f64,
}

fn heat_row(cfg: &RunConfig, u: Complex64, v: f64) -> Result<HeatRow> {
    let setup = setup_for(cfg, u, v)?;
    let dist = heat_distribution(&setup, u, v)?;
    let beta_eff = maybe_beta(cfg.omega0, u, v)?;
    Ok(HeatRow {
        beta_eff,
        mean_heat: mean_heat(&setup, u, v),
        ft_gjw: beta_eff.map(|b| integral_ft_value(&dist, b - cfg.beta_s)),
        ft_jw: integral_ft_value(&dist, cfg.beta_b - cfg.beta_s),
    })
}

pub fn heat(cfg: &RunConfig, header: Header) -> Result<Table> {
    let traj = trajectory_for(cfg, &cfg.density()?)?;
    let rows = (0..traj.u.len())
        .into_par_iter()
        .map(|i| heat_row(cfg, traj.u[i], traj.v[i]))
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(header, &["t", "beta_eff", "mean_heat", "ft_gjw", "ft_jw"]);
    for (t, r) in traj.times().into_iter().zip(rows) {
        table.push(vec![t.into(), r.beta_eff.into(), r.mean_heat.into(), r.ft_gjw.into(), r.ft_jw.into()]);
    }
    Ok(table)
}

/// Volterra and eigen-solution samples on a common subgrid.
struct OracleComparison {
    times: Vec<f64>,
    volterra: Vec<(Complex64, f64)>,
    oracle: Vec<(Complex64, f64)>,
}

fn discrete_solution(cfg: &RunConfig, sd: &SpectralDensity, modes: usize, grid: TimeGrid) -> Result<Trajectory> {
    let bath = match cfg.model {
        ModelConfig::Ohmic { .. } => sd.discretize(modes, cfg.oracle_omega_max)?,
        _ => sd.discretize(modes, 0.0)?,
    };
    let model = SingleParticleModel::from_density(cfg.omega0, &bath)?;
    single_particle_u_v(&model, cfg.beta_b, grid)
}

/// With `extrapolate`, the midpoint-discretization error, which is even in the
/// mode spacing, is cancelled between `oracle_modes` and twice as many modes.
fn oracle_comparison(cfg: &RunConfig, extrapolate: bool) -> Result<OracleComparison> {
    let sd = cfg.density()?;
    let volterra_sd = match cfg.model {
        ModelConfig::Ohmic { .. } => sd.clone().band_limited(cfg.oracle_omega_max)?,
        _ => sd.clone(),
    };
    let traj = trajectory_for(cfg, &volterra_sd)?;
    let stride = (1..=cfg.n_steps)
        .find(|d| cfg.n_steps.is_multiple_of(*d) && cfg.n_steps / d <= ORACLE_SAMPLES)
        .expect("n_steps divides itself");
    let coarse = TimeGrid::new(cfg.t_end, cfg.n_steps / stride)?;
    let exact = discrete_solution(cfg, &sd, cfg.oracle_modes, coarse)?;
    let mut oracle: Vec<(Complex64, f64)> = exact.u.into_iter().zip(exact.v).collect();
    if extrapolate && !matches!(cfg.model, ModelConfig::Discrete { .. }) {
        let fine = discrete_solution(cfg, &sd, 2 * cfg.oracle_modes, coarse)?;
        for (k, o) in oracle.iter_mut().enumerate() {
            o.0 = (4.0 * fine.u[k] - o.0) / 3.0;
            o.1 = (4.0 * fine.v[k] - o.1) / 3.0;
        }
    }
    Ok(OracleComparison {
        times: coarse.times(),
        volterra: (0..coarse.len()).map(|k| (traj.u[k * stride], traj.v[k * stride])).collect(),
        oracle,
    })
}

pub fn oracle(cfg: &RunConfig, header: Header) -> Result<Table> {
    let cmp = oracle_comparison(cfg, false)?;
    let mut table = Table::new(
        header,
        &["t", "abs_u_volterra", "abs_u_oracle", "v_volterra", "v_oracle", "err_u", "err_v"],
    );
    for (k, &t) in cmp.times.iter().enumerate() {
        let (uv, vv) = cmp.volterra[k];
        let (uo, vo) = cmp.oracle[k];
        table.push(vec![
            t.into(),
            uv.norm().into(),
            uo.norm().into(),
            vv.into(),
            vo.into(),
            (uv - uo).norm().into(),
            (vv - vo).abs().into(),
        ]);
    }
    Ok(table)
}

struct Check {
    name: &'static str,
    residual: f64,
    tolerance: f64,
    /// Informational checks report FAIL-expected instead of failing the run.
    informational: bool,
}

impl Check {
    fn status(&self) -> &'static str {
        let ok = self.residual <= self.tolerance;
        match (self.informational, ok) {
            (false, true) => "PASS",
            (false, false) => "FAIL",
            (true, true) => "PASS-info",
            (true, false) => "FAIL-expected",
        }
    }
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Runs the invariant suite. The flag is true when a non-informational check failed.
pub fn verify(cfg: &RunConfig, header: Header) -> Result<(Table, bool)> {
    let sd = cfg.density()?;
    let traj = trajectory_for(cfg, &sd)?;
    let n = cfg.n_steps;
    let samples: Vec<usize> = (1..=VERIFY_STATES)
        .map(|j| (j * n).div_ceil(VERIFY_STATES))
        .filter(|&k| k > 0)
        .collect();

    let mut chi0: f64 = 0.0;
    let mut perm: f64 = 0.0;
    let mut jw: f64 = 0.0;
    let mut gjw: f64 = 0.0;
    let mut ft_jw: f64 = 0.0;
    let mut balance: f64 = 0.0;
    let mut stochastic: f64 = 0.0;
    let mut moment: f64 = 0.0;
    for &k in &samples {
        let (u, v) = (traj.u[k], traj.v[k]);
        let setup = setup_for(cfg, u, v)?;
        let b_eff = effective_beta(cfg.omega0, u, v)?;
        chi0 = chi0.max((characteristic_function(0.0, &setup, u, v)? - 1.0).abs());
        for xi in symmetric_xi_grid(&setup, u, v, cfg.xi_points)? {
            let chi = characteristic_function(xi, &setup, u, v)?;
            perm = perm.max(relative(chi, characteristic_function(b_eff - cfg.beta_s - xi, &setup, u, v)?));
            // The JW partner may leave the admissible strip; those points are skipped.
            if let Ok(partner) = characteristic_function(cfg.beta_b - cfg.beta_s - xi, &setup, u, v) {
                jw = jw.max(relative(chi, partner));
            }
        }
        let dist = heat_distribution(&setup, u, v)?;
        gjw = gjw.max((integral_ft_value(&dist, b_eff - cfg.beta_s) - 1.0).abs());
        ft_jw = ft_jw.max((integral_ft_value(&dist, cfg.beta_b - cfg.beta_s) - 1.0).abs());
        moment = moment.max((dist.moment(1) - mean_heat(&setup, u, v)).abs());
        for l in 0..=BALANCE_LEVELS {
            for lp in 0..=BALANCE_LEVELS {
                let ratio = (ln_transition_probability(u, v, l, lp)? - ln_transition_probability(u, v, lp, l)?).exp();
                let expected = (-b_eff * cfg.omega0 * (lp as f64 - l as f64)).exp();
                balance = balance.max(relative(ratio, expected));
            }
        }
        let reach = 4 * setup.l_max + 100;
        for l in 0..=setup.l_max / 2 {
            let column: f64 = (0..=reach)
                .map(|lp| ln_transition_probability(u, v, l, lp).map(f64::exp))
                .sum::<Result<f64>>()?;
            stochastic = stochastic.max((column - 1.0).abs());
        }
    }

    let markov = markovian_trajectory(&sd, cfg.omega0, cfg.beta_b, grid(cfg)?)?;
    let mut markov_beta: f64 = 0.0;
    for &k in &samples {
        markov_beta = markov_beta.max((effective_beta(cfg.omega0, markov.u[k], markov.v[k])? - cfg.beta_b).abs());
    }

    let check = |name, residual, tolerance| Check {
        name,
        residual,
        tolerance,
        informational: false,
    };
    let mut checks = vec![
        check("chi_at_zero", chi0, 1e-12),
        check("permutation_symmetry", perm, 1e-8),
        Check {
            name: "jw_symmetry",
            residual: jw,
            tolerance: 1e-3,
            informational: true,
        },
        check("integral_ft_gjw", gjw, 1e-6),
        Check {
            name: "integral_ft_jw",
            residual: ft_jw,
            tolerance: 1e-2,
            informational: true,
        },
        check("detailed_balance", balance, 1e-10),
        check("column_stochasticity", stochastic, 1e-9),
        check("mean_heat_moment", moment, 1e-8),
        check("markov_beta_eff", markov_beta, 1e-12),
    ];
    if !matches!(cfg.model, ModelConfig::Discrete { .. }) {
        let bound = find_bound_states(&sd, cfg.omega0)?;
        checks.push(check("sum_rule", (sum_rule(&sd, cfg.omega0, &bound)? - 1.0).abs(), 1e-4));
    }
    let cmp = oracle_comparison(cfg, true)?;
    let mut du: f64 = 0.0;
    let mut dv: f64 = 0.0;
    for ((uv, vv), (uo, vo)) in cmp.volterra.iter().zip(&cmp.oracle) {
        du = du.max((uv - uo).norm());
        dv = dv.max((vv - vo).abs());
    }
    checks.push(check("oracle_u", du, 1e-3));
    checks.push(check("oracle_v", dv, 2e-3));

    let mut table = Table::new(header, &["check", "residual", "tolerance", "status"]);
    let mut failed = false;
    for c in &checks {
        failed |= c.status() == "FAIL";
        table.push(vec![
            Cell::Text(c.name.into()),
            Cell::Num(c.residual),
            Cell::Num(c.tolerance),
            Cell::Text(c.status().into()),
        ]);
    }
    Ok((table, failed))
}

pub fn sweep(raw: &RawConfig, key: &str, values: &[f64], header: Header) -> Result<Table> {
    let points = values
        .iter()
        .map(|&x| {
            let mut r = raw.clone();
            r.set(key, &x.to_string());
            Ok((x, r.resolve()?))
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some((_, cfg)) = points.first() {
        continuous(cfg, "sweep")?;
    }
    let mut rows = points
        .par_iter()
        .map(|(x, cfg)| sweep_row(cfg).map(|row| (*x, row)))
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut table = Table::new(
        header,
        &[
            key,
            "count",
            "E_b_1",
            "Z_1",
            "E_b_2",
            "Z_2",
            "beta_eff_inf_min",
            "beta_eff_inf_max",
            "mean_heat_inf_min",
            "mean_heat_inf_max",
            "mean_heat_markov_inf",
            "beta_eff_t_end",
            "mean_heat_t_end",
            "ft_gjw_t_end",
            "ft_jw_t_end",
        ],
    );
    for (x, mut row) in rows {
        row.insert(0, Cell::Num(x));
        table.push(row);
    }
    Ok(table)
}

fn sweep_row(cfg: &RunConfig) -> Result<Vec<Cell>> {
    let sd = cfg.density()?;
    let bound = find_bound_states(&sd, cfg.omega0)?;
    let asym = asymptotic_state(&sd, cfg.omega0, cfg.beta_b, &bound)?;
    let setup = setup_for(cfg, asym.u(0.0), asym.v(0.0))?;
    let ext = steady_state_extrema(&setup, &asym)?;
    let traj = trajectory_for(cfg, &sd)?;
    let last = traj.u.len() - 1;
    let end = heat_row(cfg, traj.u[last], traj.v[last])?;
    let w = cfg.omega0;
    let mut row = vec![Cell::Int(bound.count() as i64)];
    for k in 0..2 {
        match bound.states.get(k) {
            Some(b) => row.extend([Cell::Num(b.energy), Cell::Num(b.weight)]),
            None => row.extend([Cell::Empty, Cell::Empty]),
        }
    }
    row.extend([
        Cell::Num(ext.beta_eff.0),
        Cell::Num(ext.beta_eff.1),
        Cell::Num(ext.mean_heat.0),
        Cell::Num(ext.mean_heat.1),
        Cell::Num(w * (bose(cfg.beta_b, w) - bose(cfg.beta_s, w))),
        end.beta_eff.into(),
        Cell::Num(end.mean_heat),
        end.ft_gjw.into(),
        Cell::Num(end.ft_jw),
    ]);
    Ok(row)
}
