//! Two-point-measurement heat statistics of the oscillator.
//!
//! Everything here is a function of the pair (u, v) at one time. The heat
//! Q = (l′ − l)ω₀ is the energy change between projective measurements of
//! the oscillator number at 0 and τ, starting from a Gibbs state at β_s.

// Negated comparisons also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use num_complex::Complex64;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::propagator::{markovian_trajectory, TimeGrid};
use crate::spectral::{bose, SpectralDensity};
use crate::spectrum::AsymptoticState;

/// Below this v the effective temperature is reported as undefined.
pub const V_FLOOR: f64 = 1e-12;

/// Probability mass allowed outside the Fock truncation when choosing l_max.
pub const TAIL_TOL: f64 = 1e-10;

/// Largest truncation level chosen automatically.
pub const L_MAX_CAP: usize = 512;

/// Mass missing from a heat distribution beyond which it is rejected.
pub const DEFICIT_TOL: f64 = 1e-6;

/// Temperatures, frequency and Fock truncation of a two-point measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatSetup {
    pub beta_s: f64,
    pub beta_b: f64,
    pub omega0: f64,
    pub l_max: usize,
}

impl HeatSetup {
    /// Rejects an `l_max` whose Gibbs tail exceeds [`TAIL_TOL`].
    pub fn new(beta_s: f64, beta_b: f64, omega0: f64, l_max: usize) -> Result<Self> {
        positive("beta_s", beta_s)?;
        positive("beta_b", beta_b)?;
        positive("omega0", omega0)?;
        if l_max < 1 {
            return Err(Error::domain("l_max must be at least 1"));
        }
        let setup = HeatSetup {
            beta_s,
            beta_b,
            omega0,
            l_max,
        };
        let tail = setup.gibbs_tail();
        if tail >= TAIL_TOL {
            return Err(Error::Truncation(format!(
                "l_max = {l_max} leaves Gibbs tail {tail:.3e}; increase l_max"
            )));
        }
        Ok(setup)
    }

    /// Chooses the smallest l_max for which both the initial Gibbs tail and
    /// the evolved thermal-like tail at (u, v) are below [`TAIL_TOL`].
    pub fn for_state(beta_s: f64, beta_b: f64, omega0: f64, u: Complex64, v: f64) -> Result<Self> {
        positive("beta_s", beta_s)?;
        positive("omega0", omega0)?;
        let occupation = u.norm_sqr() * bose(beta_s, omega0) + v.max(0.0);
        let ratio = occupation / (1.0 + occupation);
        let x = beta_s * omega0;
        for l in 1..=L_MAX_CAP {
            let gibbs = (-x * (l + 1) as f64).exp() / -(-x).exp_m1();
            let evolved = ratio.powi(l as i32 + 1);
            if gibbs < TAIL_TOL && evolved < TAIL_TOL {
                return HeatSetup::new(beta_s, beta_b, omega0, l);
            }
        }
        Err(Error::Truncation(format!(
            "no l_max ≤ {L_MAX_CAP} bounds the tail for mean occupation {occupation:.3e}"
        )))
    }

    /// e^{−β_sω₀(l_max+1)}/(1 − e^{−β_sω₀}).
    pub fn gibbs_tail(&self) -> f64 {
        let x = self.beta_s * self.omega0;
        (-x * (self.l_max + 1) as f64).exp() / -(-x).exp_m1()
    }
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive, got {x}")))
    }
}

/// Probability mass on heat values Q = q·ω₀.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatDistribution {
    pub omega0: f64,
    /// q = l′ − l in increasing order.
    pub q_offsets: Vec<i64>,
    pub probs: Vec<f64>,
}

impl HeatDistribution {
    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn heat(&self, k: usize) -> f64 {
        self.q_offsets[k] as f64 * self.omega0
    }

    /// Σ Q^k 𝒫(Q).
    pub fn moment(&self, k: i32) -> f64 {
        (0..self.probs.len())
            .map(|i| self.probs[i] * self.heat(i).powi(k))
            .sum()
    }

    pub fn prob_at(&self, q: i64) -> f64 {
        match self.q_offsets.binary_search(&q) {
            Ok(i) => self.probs[i],
            Err(_) => 0.0,
        }
    }
}

/// Z(β) = 1/(1 − e^{−βω₀}).
pub fn partition_function(beta: f64, omega0: f64) -> Result<f64> {
    if !(beta * omega0 > 0.0) {
        return Err(Error::domain(format!(
            "partition function diverges for βω₀ = {}",
            beta * omega0
        )));
    }
    Ok(-1.0 / (-beta * omega0).exp_m1())
}

/// n̄(β, τ) = |u|²/(e^{βω₀} − 1) + v.
pub fn nbar(beta: f64, omega0: f64, u: Complex64, v: f64) -> Result<f64> {
    if !(beta * omega0 > 0.0) {
        return Err(Error::domain(format!("βω₀ must be positive, got {}", beta * omega0)));
    }
    Ok(u.norm_sqr() * bose(beta, omega0) + v)
}

/// χ(ξ) = ⟨e^{ξQ}⟩ = [Z(β_s+ξ)/Z(β_s)] / [1 + (1 − e^{ξω₀}) n̄(β_s+ξ)].
pub fn characteristic_function(xi: f64, setup: &HeatSetup, u: Complex64, v: f64) -> Result<f64> {
    let w = setup.omega0;
    let shifted = setup.beta_s + xi;
    if !(shifted > 0.0) {
        return Err(Error::domain(format!(
            "partition pole: β_s + ξ = {shifted} must be positive"
        )));
    }
    let ratio = (-setup.beta_s * w).exp_m1() / (-shifted * w).exp_m1();
    let denom = 1.0 - (xi * w).exp_m1() * nbar(shifted, w, u, v)?;
    if !(denom > 0.0) {
        return Err(Error::domain(format!(
            "ξ = {xi} is outside the MGF strip: denominator {denom:.3e}"
        )));
    }
    Ok(ratio / denom)
}

/// The strip (−β_s, ξ₂) on which χ is finite, ξ₂ being the zero of the
/// denominator (infinite when v = 0).
pub fn admissible_strip(setup: &HeatSetup, u: Complex64, v: f64) -> Result<(f64, f64)> {
    let w = setup.omega0;
    let denom = |xi: f64| -> Result<f64> {
        Ok(1.0 - (xi * w).exp_m1() * nbar(setup.beta_s + xi, w, u, v)?)
    };
    let mut hi = 1.0 / w;
    let mut tries = 0;
    while denom(hi)? > 0.0 {
        hi *= 2.0;
        tries += 1;
        if tries > 60 {
            return Ok((-setup.beta_s, f64::INFINITY));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if denom(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((-setup.beta_s, lo))
}

/// `n` interior points of (−β_s, β_eff), the largest interval inside the
/// admissible strip that is mapped onto itself by ξ ↦ β_eff − β_s − ξ. The
/// grid is invariant under that map.
pub fn symmetric_xi_grid(setup: &HeatSetup, u: Complex64, v: f64, n: usize) -> Result<Vec<f64>> {
    let b_eff = effective_beta(setup.omega0, u, v)?;
    let (lo, hi) = admissible_strip(setup, u, v)?;
    if b_eff >= hi {
        return Err(Error::numerical(
            "the symmetric interval exceeds the admissible strip",
            b_eff - hi,
        ));
    }
    let h = (b_eff - lo) / (n + 1) as f64;
    Ok((1..=n).map(|i| lo + i as f64 * h).collect())
}

/// ⟨Q⟩ = ω₀[v + (1 − |u|²)/(1 − e^{β_sω₀})].
pub fn mean_heat(setup: &HeatSetup, u: Complex64, v: f64) -> f64 {
    let w = setup.omega0;
    w * (v - (1.0 - u.norm_sqr()) / (setup.beta_s * w).exp_m1())
}

/// β_eff = ω₀⁻¹ ln[1 + (1 − |u|²)/v].
pub fn effective_beta(omega0: f64, u: Complex64, v: f64) -> Result<f64> {
    if !(v > V_FLOOR) {
        return Err(Error::Undefined(v));
    }
    Ok(((1.0 - u.norm_sqr()).max(0.0) / v).ln_1p() / omega0)
}

/// Gibbs weight P_l(0) = e^{−β_sω₀l}/Z(β_s).
pub fn initial_level_prob(setup: &HeatSetup, l: usize) -> Result<f64> {
    if l > setup.l_max {
        return Err(Error::domain(format!("level {l} exceeds l_max = {}", setup.l_max)));
    }
    let x = setup.beta_s * setup.omega0;
    Ok(-(-x).exp_m1() * (-x * l as f64).exp())
}

fn ln_factorial(n: usize) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(2049);
        t.push(0.0);
        for k in 1..=2048 {
            t.push(t[k - 1] + (k as f64).ln());
        }
        t
    });
    table
        .get(n)
        .copied()
        .unwrap_or_else(|| libm::lgamma(n as f64 + 1.0))
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// n·ln x with 0·ln 0 = 0.
fn xlnx(n: usize, x: f64) -> f64 {
    if n == 0 {
        0.0
    } else {
        n as f64 * x.ln()
    }
}

fn check_uv(u: Complex64, v: f64) -> Result<(f64, f64)> {
    let u2 = u.norm_sqr();
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::domain(format!("v must be non-negative, got {v}")));
    }
    if !(u2 <= 1.0 + 1e-12) {
        return Err(Error::domain(format!("|u|² = {u2} exceeds 1")));
    }
    Ok((u2, (1.0 + v - u2).max(0.0)))
}

/// ln P_{l′l}, the log-probability of finding l′ at τ after measuring l at 0.
///
/// P_{l′l} = (1+v)^{−1−l−l′} Σ_m C(l,m) C(l′,m) v^{l′−m} (1+v−|u|²)^{l−m} |u|^{2m}.
pub fn ln_transition_probability(u: Complex64, v: f64, l: usize, l_prime: usize) -> Result<f64> {
    let (u2, rest) = check_uv(u, v)?;
    let prefactor = -((1 + l + l_prime) as f64) * v.ln_1p();
    let mut terms = Vec::with_capacity(l.min(l_prime) + 1);
    for m in 0..=l.min(l_prime) {
        let t = ln_binomial(l, m)
            + ln_binomial(l_prime, m)
            + xlnx(l_prime - m, v)
            + xlnx(l - m, rest)
            + xlnx(m, u2);
        if t > f64::NEG_INFINITY {
            terms.push(t);
        }
    }
    Ok(prefactor + log_sum_exp(&terms))
}

/// P_{l′l}; see [`ln_transition_probability`].
pub fn transition_probability(u: Complex64, v: f64, l: usize, l_prime: usize) -> Result<f64> {
    Ok(ln_transition_probability(u, v, l, l_prime)?.exp())
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// 𝒫(Q) = Σ_{l′−l=q} P_l(0) P_{l′l} over the truncated level set.
pub fn heat_distribution(setup: &HeatSetup, u: Complex64, v: f64) -> Result<HeatDistribution> {
    let l_max = setup.l_max;
    let mut ln_mass: Vec<Vec<f64>> = vec![Vec::new(); 2 * l_max + 1];
    let x = setup.beta_s * setup.omega0;
    let ln_z = (-(-x).exp_m1()).ln();
    for l in 0..=l_max {
        let ln_p0 = ln_z - x * l as f64;
        for lp in 0..=l_max {
            let t = ln_p0 + ln_transition_probability(u, v, l, lp)?;
            if t > f64::NEG_INFINITY {
                ln_mass[lp + l_max - l].push(t);
            }
        }
    }
    let probs: Vec<f64> = ln_mass.iter().map(|ts| log_sum_exp(ts).exp()).collect();
    let q_offsets = (0..=2 * l_max).map(|k| k as i64 - l_max as i64).collect();
    let dist = HeatDistribution {
        omega0: setup.omega0,
        q_offsets,
        probs,
    };
    let deficit = 1.0 - dist.total();
    if deficit > DEFICIT_TOL {
        return Err(Error::Truncation(format!(
            "l_max = {l_max} loses {deficit:.3e} of the probability; increase l_max"
        )));
    }
    Ok(dist)
}

/// ⟨e^{wQ}⟩ = Σ 𝒫(Q) e^{wQ}, accumulated in log space.
pub fn integral_ft_value(dist: &HeatDistribution, beta_weight: f64) -> f64 {
    if beta_weight == 0.0 {
        return dist.total();
    }
    let terms: Vec<f64> = (0..dist.probs.len())
        .filter(|&i| dist.probs[i] > 0.0)
        .map(|i| dist.probs[i].ln() + beta_weight * dist.heat(i))
        .collect();
    log_sum_exp(&terms).exp()
}

/// Born–Markov χ curve and mean heat at τ.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovHeatStats {
    pub u: Complex64,
    pub v: f64,
    pub chi: Vec<f64>,
    pub mean_heat: f64,
}

/// Born–Markov heat statistics from their closed forms,
/// χ = e^{ξω₀}(e^{β_sω₀} − 1)/(e^{(β_s+ξ)ω₀} − 1 + V(e^{ξω₀} − 1)) with
/// V = v(1 − e^{(β_s+ξ)ω₀}) − |u|².
pub fn markovian_heat_stats(
    setup: &HeatSetup,
    sd: &SpectralDensity,
    tau: f64,
    xi_grid: &[f64],
) -> Result<MarkovHeatStats> {
    let w = setup.omega0;
    let (u, v) = if tau == 0.0 {
        (Complex64::new(1.0, 0.0), 0.0)
    } else {
        let grid = TimeGrid::new(tau, 1)?;
        let traj = markovian_trajectory(sd, w, setup.beta_b, grid)?;
        (traj.u[1], traj.v[1])
    };
    let u2 = u.norm_sqr();
    let chi = xi_grid
        .iter()
        .map(|&xi| {
            if !(setup.beta_s + xi > 0.0) {
                return Err(Error::domain(format!("partition pole at ξ = {xi}")));
            }
            let big_v = -v * ((setup.beta_s + xi) * w).exp_m1() - u2;
            let denom = ((setup.beta_s + xi) * w).exp_m1() + big_v * (xi * w).exp_m1();
            let value = (xi * w).exp() * (setup.beta_s * w).exp_m1() / denom;
            if !(denom > 0.0) {
                return Err(Error::domain(format!("ξ = {xi} is outside the MGF strip")));
            }
            Ok(value)
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = w * (v + (1.0 - u2) / -(setup.beta_s * w).exp_m1());
    Ok(MarkovHeatStats {
        u,
        v,
        chi,
        mean_heat: mean,
    })
}

/// Steady-state statistics at one phase of the bound-state beat.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateStats {
    pub beta_eff: f64,
    pub chi: Vec<f64>,
    pub mean_heat: f64,
}

/// β_eff, χ and ⟨Q⟩ evaluated on u = Σ Z_n e^{−iE_n t} and v = v(∞)(t).
pub fn steady_state_stats(
    setup: &HeatSetup,
    asym: &AsymptoticState,
    t: f64,
    xi_grid: &[f64],
) -> Result<SteadyStateStats> {
    let u = asym.u(t);
    let v = asym.v(t);
    let chi = xi_grid
        .iter()
        .map(|&xi| characteristic_function(xi, setup, u, v))
        .collect::<Result<Vec<_>>>()?;
    Ok(SteadyStateStats {
        beta_eff: effective_beta(setup.omega0, u, v)?,
        chi,
        mean_heat: mean_heat(setup, u, v),
    })
}

/// Extremes over the beat of the steady-state mean heat and β_eff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyExtrema {
    pub mean_heat: (f64, f64),
    pub beta_eff: (f64, f64),
}

/// Both |u|² and v are affine in cos(|E₊ − E₋|t), so ⟨Q⟩ is affine and β_eff
/// monotone in it; the extremes sit at cos = ±1.
pub fn steady_state_extrema(setup: &HeatSetup, asym: &AsymptoticState) -> Result<SteadyExtrema> {
    let at = |c: f64| -> Result<(f64, f64)> {
        let z2: f64 = asym.bound.states.iter().map(|b| b.weight * b.weight).sum();
        let cross = match asym.bound.states.as_slice() {
            [a, b] => 2.0 * a.weight * b.weight,
            _ => 0.0,
        };
        let u = Complex64::new((z2 + cross * c).max(0.0).sqrt(), 0.0);
        let v = asym.v_constant + asym.v_cross_amplitude * c;
        Ok((mean_heat(setup, u, v), effective_beta(setup.omega0, u, v)?))
    };
    let (q1, b1) = at(1.0)?;
    let (q2, b2) = at(-1.0)?;
    Ok(SteadyExtrema {
        mean_heat: (q1.min(q2), q1.max(q2)),
        beta_eff: (b1.min(b2), b1.max(b2)),
    })
}
