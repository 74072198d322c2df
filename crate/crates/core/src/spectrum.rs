//! Bound states of the oscillator-bath Hamiltonian and the long-time limits
//! they control.
//!
//! A bound state is a real root E of y(E) = E outside the continuum, where
//! y(E) = ω₀ − ∫ J(ω)/(ω − E) dω. Its residue weight is
//! Z = 1/(1 + ∫ J(ω)/(ω − E)² dω). The rest of the spectral weight sits in the
//! branch-cut density Θ(ω) = J/([ω − ω₀ − Δ(ω)]² + [πJ]²).

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::{self, Layout, Tolerance};
use crate::spectral::{bose, semicircle_hilbert_slope, SpectralDensity};

/// Roots closer than this to a band edge are not resolved.
pub const EDGE_GUARD: f64 = 1e-9;

/// Residual accepted for a refined root of y(E) − E.
pub const ROOT_TOL: f64 = 1e-12;

/// An isolated eigenvalue with its residue weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundState {
    pub energy: f64,
    pub weight: f64,
}

/// Zero, one or two bound states sorted by energy.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundStateSet {
    pub states: Vec<BoundState>,
}

impl BoundStateSet {
    pub fn count(&self) -> usize {
        self.states.len()
    }

    pub fn total_weight(&self) -> f64 {
        self.states.iter().map(|b| b.weight).sum()
    }

    /// |E₊ − E₋| for two states, 0 otherwise.
    pub fn beat_frequency(&self) -> f64 {
        match self.states.as_slice() {
            [a, b] => (b.energy - a.energy).abs(),
            _ => 0.0,
        }
    }
}

/// Long-time limits of u and v.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticState {
    pub bound: BoundStateSet,
    /// Time-independent part of v(∞).
    pub v_constant: f64,
    /// Amplitude of the cos(|E₊ − E₋|t) term of v(∞).
    pub v_cross_amplitude: f64,
    pub beat_frequency: f64,
}

impl AsymptoticState {
    pub fn u(&self, t: f64) -> Complex64 {
        asymptotic_u(&self.bound, t)
    }

    pub fn v(&self, t: f64) -> f64 {
        self.v_constant + self.v_cross_amplitude * (self.beat_frequency * t).cos()
    }
}

fn inside_support(sd: &SpectralDensity, e: f64) -> bool {
    sd.support().is_some_and(|s| e > s.lo && e < s.hi)
        || matches!(
            sd,
            SpectralDensity::OhmicFamily {
                band_edge: None,
                ..
            }
        ) && e > 0.0
}

/// y(E) − E with y(E) = ω₀ − ∫ J(ω)/(ω − E) dω, defined off the continuum.
pub fn pole_function(sd: &SpectralDensity, omega0: f64, e: f64) -> Result<f64> {
    if !e.is_finite() {
        return Err(Error::domain(format!("energy must be finite, got {e}")));
    }
    if inside_support(sd, e) {
        return Err(Error::domain(format!(
            "E = {e} lies inside the continuum, where the pole equation has a band of roots"
        )));
    }
    Ok(omega0 + sd.lamb_shift(e)? - e)
}

/// ∫ J(ω)/(ω − E)² dω for E off the continuum.
pub fn pole_slope(sd: &SpectralDensity, e: f64) -> Result<f64> {
    if inside_support(sd, e) {
        return Err(Error::domain(format!("E = {e} lies inside the continuum")));
    }
    match *sd {
        SpectralDensity::Semicircle { g, zeta, big_omega } => {
            Ok(semicircle_hilbert_slope(g, zeta, big_omega, e))
        }
        _ => sd
            .integrate(
                |w: f64| {
                    let d = w - e;
                    1.0 / (d * d)
                },
                Tolerance::rel(1e-12),
            )
            .map(|est| est.value),
    }
}

/// Z = 1/(1 + ∫ J/(ω − E)²).
pub fn residue_weight(sd: &SpectralDensity, e: f64) -> Result<f64> {
    Ok(1.0 / (1.0 + pole_slope(sd, e)?))
}

/// Z = 1/(1 − y′(E)) with y′ from a Richardson-corrected central difference
/// of the pole function. Independent of [`residue_weight`].
pub fn residue_weight_numeric(sd: &SpectralDensity, omega0: f64, e: f64) -> Result<f64> {
    let gap = sd
        .support()
        .map_or(1.0, |s| if e <= s.lo { s.lo - e } else { e - s.hi });
    let h = 1e-2 * gap.clamp(1e-12, 1.0);
    let diff = |h: f64| -> Result<f64> {
        Ok((pole_function(sd, omega0, e + h)? - pole_function(sd, omega0, e - h)?) / (2.0 * h))
    };
    let d1 = diff(h)?;
    let d2 = diff(0.5 * h)?;
    // f = y − E, so y′ = f′ + 1 and Z = −1/f′.
    let f_prime = d2 + (d2 - d1) / 3.0;
    Ok(-1.0 / f_prime)
}

/// Isolated roots of y(E) = E, at most one on each side of the continuum.
pub fn find_bound_states(sd: &SpectralDensity, omega0: f64) -> Result<BoundStateSet> {
    let support = match sd.support() {
        None => {
            return Ok(BoundStateSet {
                states: vec![BoundState {
                    energy: omega0,
                    weight: 1.0,
                }],
            })
        }
        Some(s) => s,
    };
    let f = |e: f64| pole_function(sd, omega0, e);
    let margin = 10.0 * sd.total_weight().sqrt().max(1e-3 * omega0.abs()).max(1e-6);
    let mut states = Vec::new();

    // f is strictly decreasing off the continuum: f′ = −1 − ∫J/(ω−E)².
    let lo = support.lo;
    if f(lo)? < 0.0 {
        let mut far = lo - margin;
        let mut tries = 0;
        while f(far)? <= 0.0 {
            far = lo - 2.0 * (lo - far);
            tries += 1;
            if tries > 200 {
                return Err(Error::numerical("could not bracket the lower bound state", 0.0));
            }
        }
        push_root(sd, &mut states, solve_decreasing(&f, far, lo)?, lo)?;
    }
    let has_upper_edge = !matches!(
        sd,
        SpectralDensity::OhmicFamily {
            band_edge: None,
            ..
        }
    );
    if has_upper_edge {
        let hi = support.hi;
        if f(hi)? > 0.0 {
            let mut far = hi + margin;
            let mut tries = 0;
            while f(far)? >= 0.0 {
                far = hi + 2.0 * (far - hi);
                tries += 1;
                if tries > 200 {
                    return Err(Error::numerical("could not bracket the upper bound state", 0.0));
                }
            }
            push_root(sd, &mut states, solve_decreasing(&f, hi, far)?, hi)?;
        }
    }
    states.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    Ok(BoundStateSet { states })
}

fn push_root(
    sd: &SpectralDensity,
    states: &mut Vec<BoundState>,
    energy: f64,
    edge: f64,
) -> Result<()> {
    if (energy - edge).abs() <= EDGE_GUARD * edge.abs().max(1.0) {
        log::warn!("discarding a bound state at E = {energy}, unresolvably close to the band edge {edge}");
        return Ok(());
    }
    states.push(BoundState {
        energy,
        weight: residue_weight(sd, energy)?,
    });
    Ok(())
}

/// Root of a decreasing function on [a, b] with f(a) > 0 ≥ f(b), by the
/// Illinois variant of regula falsi.
fn solve_decreasing<F: Fn(f64) -> Result<f64>>(f: &F, a: f64, b: f64) -> Result<f64> {
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    let mut side = 0i8;
    for _ in 0..400 {
        let c = if fa.is_finite() && fb.is_finite() && fa != fb {
            let c = (a * fb - b * fa) / (fb - fa);
            if c > a && c < b {
                c
            } else {
                0.5 * (a + b)
            }
        } else {
            0.5 * (a + b)
        };
        let fc = f(c)?;
        if fc.abs() <= ROOT_TOL || (b - a) <= 4.0 * f64::EPSILON * c.abs().max(1e-300) {
            return Ok(c);
        }
        if fc > 0.0 {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        } else {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        }
    }
    Err(Error::numerical("bound-state root search did not converge", b - a))
}

/// Θ(ω) = J/([ω − ω₀ − Δ(ω)]² + [πJ]²) inside the continuum, 0 elsewhere.
pub fn background_theta(sd: &SpectralDensity, omega0: f64, omega: f64) -> Result<f64> {
    if !omega.is_finite() {
        return Err(Error::domain(format!("frequency must be finite, got {omega}")));
    }
    if matches!(sd, SpectralDensity::Discrete { .. }) || !inside_support(sd, omega) {
        return Ok(0.0);
    }
    let j = sd.density(omega)?;
    if j == 0.0 {
        return Ok(0.0);
    }
    let detuning = omega - omega0 - sd.lamb_shift(omega)?;
    Ok(j / (detuning * detuning + (PI * j) * (PI * j)))
}

/// ∫ Θ(ω) f(ω) dω over the continuum. The layout is graded at the band
/// edges and at the bare resonance, where Θ may be a narrow Lorentzian.
pub fn background_integral<F: Fn(f64) -> f64>(
    sd: &SpectralDensity,
    omega0: f64,
    f: F,
) -> Result<f64> {
    let tol = Tolerance::rel(1e-10).with_abs(1e-14);
    match *sd {
        SpectralDensity::Discrete { .. } => Err(Error::domain(
            "a discrete bath has no continuum background",
        )),
        SpectralDensity::Semicircle { zeta, big_omega, .. } => {
            let theta_of = |th: f64| big_omega + 2.0 * zeta * th.cos();
            let mut layout = Layout::new(0.0, PI).with_base_panels(16);
            let c = (omega0 - big_omega) / (2.0 * zeta);
            if c.abs() < 1.0 {
                let at = c.acos();
                layout = layout.with_break(at).graded_at(at, 12);
            }
            quadrature::integrate(
                |th: f64| {
                    let w = theta_of(th);
                    background_theta(sd, omega0, w).unwrap_or(0.0) * f(w) * 2.0 * zeta * th.sin()
                },
                &layout,
                tol,
            )
            .map(|e| e.value)
        }
        SpectralDensity::OhmicFamily { s, .. } => {
            let w_max = sd.effective_cutoff();
            let depth = (50.0 / s.min(1.0)).ceil() as u32;
            let mut layout = Layout::new(0.0, w_max)
                .with_base_panels(32)
                .graded_at(0.0, depth);
            let res = omega0 + sd.lamb_shift(omega0)?;
            for at in [omega0, res] {
                if at > 0.0 && at < w_max {
                    let width = (PI * sd.density(at)?).max(1e-12);
                    let d = ((w_max / 32.0) / width).log2().ceil().clamp(4.0, 60.0) as u32 + 4;
                    layout = layout.with_break(at).graded_at(at, d);
                }
            }
            quadrature::integrate(
                |w: f64| background_theta(sd, omega0, w).unwrap_or(0.0) * f(w),
                &layout,
                tol,
            )
            .map(|e| e.value)
        }
    }
}

/// Σ Z_n + ∫ Θ dω, which equals 1 for a complete spectral decomposition.
pub fn sum_rule(sd: &SpectralDensity, omega0: f64, bound: &BoundStateSet) -> Result<f64> {
    Ok(bound.total_weight() + background_integral(sd, omega0, |_| 1.0)?)
}

/// Σ_n Z_n e^{−iE_n t}.
pub fn asymptotic_u(bound: &BoundStateSet, t: f64) -> Complex64 {
    bound
        .states
        .iter()
        .map(|b| Complex64::from_polar(b.weight, -b.energy * t))
        .sum()
}

/// Long-time noise function,
/// v(∞) = ∫ n̄ Θ dω + Σ_{m,n} Z_m Z_n cos[(E_m − E_n)t] ∫ J n̄ /((ω − E_m)(ω − E_n)) dω.
pub fn asymptotic_state(
    sd: &SpectralDensity,
    omega0: f64,
    beta_b: f64,
    bound: &BoundStateSet,
) -> Result<AsymptoticState> {
    if !(beta_b.is_finite() && beta_b > 0.0) {
        return Err(Error::domain(format!("beta_b must be positive, got {beta_b}")));
    }
    let background = background_integral(sd, omega0, |w| bose(beta_b, w))?;
    let overlap = |em: f64, en: f64| -> Result<f64> {
        sd.integrate(
            |w: f64| bose(beta_b, w) / ((w - em) * (w - en)),
            Tolerance::rel(1e-11).with_abs(1e-15),
        )
        .map(|e| e.value)
    };
    let mut v_constant = background;
    for b in &bound.states {
        v_constant += b.weight * b.weight * overlap(b.energy, b.energy)?;
    }
    let v_cross_amplitude = match bound.states.as_slice() {
        [a, b] => 2.0 * a.weight * b.weight * overlap(a.energy, b.energy)?,
        _ => 0.0,
    };
    Ok(AsymptoticState {
        bound: bound.clone(),
        v_constant,
        v_cross_amplitude,
        beat_frequency: bound.beat_frequency(),
    })
}

/// v(∞) at time `t`; independent of t unless there are two bound states.
pub fn asymptotic_v(
    sd: &SpectralDensity,
    omega0: f64,
    beta_b: f64,
    bound: &BoundStateSet,
    t: f64,
) -> Result<f64> {
    Ok(asymptotic_state(sd, omega0, beta_b, bound)?.v(t))
}
