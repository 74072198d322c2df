//! Bath spectral densities and the kernels derived from them.
//!
//! A density J(ω) fixes the memory kernel μ(t) = ∫ J(ω) e^{-iωt} dω, the
//! thermal noise kernel ν(t) = ∫ J(ω) n̄(ω) e^{-iωt} dω and the Lamb shift
//! Δ(ω) = P∫ J(ω')/(ω − ω') dω'. Units are ħ = 1 with every frequency given
//! in a reference unit chosen by the caller.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::{self, Estimate, Layout, NodeSet, QuadValue, Tolerance};

/// Geometric grading depth toward ω = 0 for Ohmic integrals. The innermost
/// panel carries an error of order h_min^s for integrands ∝ ω^{s−1}.
fn ohmic_grade_depth(s: f64) -> u32 {
    (50.0 / s.min(1.0)).ceil().min(1000.0) as u32 + 10
}

/// Bose occupation 1/(e^{βω} − 1).
pub fn bose(beta: f64, omega: f64) -> f64 {
    1.0 / (beta * omega).exp_m1()
}

/// One bath oscillator with frequency `omega` and real coupling `g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub omega: f64,
    pub g: f64,
}

/// Spectral density of the bath.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectralDensity {
    /// J(ω) = η ω^s ω_c^{1−s} e^{−ω/ω_c}, optionally cut sharply at `band_edge`.
    OhmicFamily {
        eta: f64,
        s: f64,
        omega_c: f64,
        band_edge: Option<f64>,
    },
    /// J(ω) = g²√(4ζ² − (ω − Ω)²)/(2πζ²) on [Ω − 2ζ, Ω + 2ζ].
    Semicircle { g: f64, zeta: f64, big_omega: f64 },
    /// J(ω) = Σ_k g_k² δ(ω − ω_k).
    Discrete { modes: Vec<Mode> },
}

/// Closed hull of the frequencies where J is nonzero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Support {
    pub lo: f64,
    pub hi: f64,
}

/// Kernels tabulated on a time grid.
#[derive(Debug, Clone)]
pub struct KernelSamples {
    pub times: Vec<f64>,
    pub mu: Vec<Complex64>,
    pub nu: Vec<Complex64>,
    pub beta_b: f64,
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive and finite, got {x}")))
    }
}

impl SpectralDensity {
    pub fn ohmic(eta: f64, s: f64, omega_c: f64) -> Result<Self> {
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::domain(format!("eta must be non-negative, got {eta}")));
        }
        positive("s", s)?;
        positive("omega_c", omega_c)?;
        Ok(SpectralDensity::OhmicFamily {
            eta,
            s,
            omega_c,
            band_edge: None,
        })
    }

    pub fn semicircle(g: f64, zeta: f64, big_omega: f64) -> Result<Self> {
        positive("g", g)?;
        positive("zeta", zeta)?;
        positive("Omega", big_omega)?;
        if big_omega <= 2.0 * zeta {
            return Err(Error::domain(format!(
                "band [Ω−2ζ, Ω+2ζ] must lie at positive frequency (Ω = {big_omega}, ζ = {zeta})"
            )));
        }
        Ok(SpectralDensity::Semicircle { g, zeta, big_omega })
    }

    pub fn discrete(modes: Vec<Mode>) -> Result<Self> {
        for m in &modes {
            positive("mode frequency", m.omega)?;
            if !m.g.is_finite() {
                return Err(Error::domain("mode coupling must be finite"));
            }
        }
        Ok(SpectralDensity::Discrete { modes })
    }

    /// The empty bath, J ≡ 0.
    pub fn empty() -> Self {
        SpectralDensity::Discrete { modes: Vec::new() }
    }

    /// Cuts an Ohmic density sharply at `edge`. Other variants are returned unchanged.
    pub fn band_limited(self, edge: f64) -> Result<Self> {
        positive("band edge", edge)?;
        Ok(match self {
            SpectralDensity::OhmicFamily {
                eta, s, omega_c, ..
            } => SpectralDensity::OhmicFamily {
                eta,
                s,
                omega_c,
                band_edge: Some(edge),
            },
            other => other,
        })
    }

    pub fn is_zero(&self) -> bool {
        match self {
            SpectralDensity::OhmicFamily { eta, .. } => *eta == 0.0,
            SpectralDensity::Semicircle { .. } => false,
            SpectralDensity::Discrete { modes } => modes.iter().all(|m| m.g == 0.0),
        }
    }

    /// Upper integration limit for Ohmic integrals: ω_c·max(40, 10/s), or the
    /// hard band edge when one is set.
    pub fn effective_cutoff(&self) -> f64 {
        match self {
            SpectralDensity::OhmicFamily {
                s,
                omega_c,
                band_edge,
                ..
            } => {
                let soft = omega_c * f64::max(40.0, 10.0 / s);
                band_edge.map_or(soft, |e| e.min(soft))
            }
            _ => self.support().map_or(0.0, |s| s.hi),
        }
    }

    pub fn support(&self) -> Option<Support> {
        match self {
            SpectralDensity::OhmicFamily { .. } => Some(Support {
                lo: 0.0,
                hi: self.effective_cutoff(),
            }),
            SpectralDensity::Semicircle {
                zeta, big_omega, ..
            } => Some(Support {
                lo: big_omega - 2.0 * zeta,
                hi: big_omega + 2.0 * zeta,
            }),
            SpectralDensity::Discrete { modes } => {
                let active = modes.iter().filter(|m| m.g != 0.0);
                let lo = active.clone().map(|m| m.omega).fold(f64::INFINITY, f64::min);
                let hi = active.map(|m| m.omega).fold(f64::NEG_INFINITY, f64::max);
                (lo <= hi).then_some(Support { lo, hi })
            }
        }
    }

    /// Largest frequency the bath couples to, used for time-step guidance.
    pub fn fastest_frequency(&self) -> f64 {
        match self {
            SpectralDensity::OhmicFamily { omega_c, .. } => *omega_c,
            _ => self.support().map_or(0.0, |s| s.hi),
        }
    }

    /// J(ω). Discrete densities have no pointwise value and return 0.
    pub fn density(&self, omega: f64) -> Result<f64> {
        if !omega.is_finite() {
            return Err(Error::domain(format!("frequency must be finite, got {omega}")));
        }
        Ok(self.density_unchecked(omega))
    }

    pub(crate) fn density_unchecked(&self, omega: f64) -> f64 {
        match *self {
            SpectralDensity::OhmicFamily {
                eta,
                s,
                omega_c,
                band_edge,
            } => {
                if omega <= 0.0 || band_edge.is_some_and(|e| omega > e) {
                    0.0
                } else {
                    eta * omega.powf(s) * omega_c.powf(1.0 - s) * (-omega / omega_c).exp()
                }
            }
            SpectralDensity::Semicircle { g, zeta, big_omega } => {
                let x = omega - big_omega;
                let r2 = 4.0 * zeta * zeta - x * x;
                if r2 <= 0.0 {
                    0.0
                } else {
                    g * g * r2.sqrt() / (2.0 * PI * zeta * zeta)
                }
            }
            SpectralDensity::Discrete { .. } => 0.0,
        }
    }

    /// ∫ J(ω) dω = μ(0).
    pub fn total_weight(&self) -> f64 {
        match *self {
            SpectralDensity::OhmicFamily {
                eta,
                s,
                omega_c,
                band_edge: None,
            } => eta * omega_c * omega_c * libm::tgamma(s + 1.0),
            SpectralDensity::OhmicFamily { .. } => self
                .integrate(|_| 1.0, Tolerance::rel(1e-13))
                .map(|e| e.value)
                .unwrap_or(f64::NAN),
            SpectralDensity::Semicircle { g, .. } => g * g,
            SpectralDensity::Discrete { ref modes } => modes.iter().map(|m| m.g * m.g).sum(),
        }
    }

    /// Quadrature layout for ∫ J(ω) f(ω) dω. For the semicircle the variable
    /// is θ with ω = Ω + 2ζ cos θ. `phase_rate` is the largest |t| the
    /// integrand oscillates with, used to size the initial panels.
    fn layout(&self, phase_rate: f64) -> Option<Layout> {
        match self {
            SpectralDensity::OhmicFamily { s, .. } => {
                let w = self.effective_cutoff();
                let base = ((w * phase_rate / PI).ceil() as usize).clamp(4, 1 << 20);
                Some(
                    Layout::new(0.0, w)
                        .with_base_panels(base)
                        .graded_at(0.0, ohmic_grade_depth(*s)),
                )
            }
            SpectralDensity::Semicircle { zeta, .. } => {
                let base = ((4.0 * zeta * phase_rate / PI).ceil() as usize).clamp(2, 1 << 20);
                Some(Layout::new(0.0, PI).with_base_panels(base))
            }
            SpectralDensity::Discrete { .. } => None,
        }
    }

    /// Nodes ω_i and masses m_i with Σ m_i f(ω_i) ≈ ∫ J(ω) f(ω) dω.
    fn measure_from(&self, nodes: &NodeSet) -> (Vec<f64>, Vec<f64>) {
        match *self {
            SpectralDensity::Semicircle { g, zeta, big_omega } => nodes
                .x
                .iter()
                .zip(&nodes.w)
                .map(|(&th, &w)| {
                    let st = th.sin();
                    (big_omega + 2.0 * zeta * th.cos(), 2.0 * g * g / PI * st * st * w)
                })
                .unzip(),
            SpectralDensity::OhmicFamily { .. } => nodes
                .x
                .iter()
                .zip(&nodes.w)
                .map(|(&x, &w)| (x, self.density_unchecked(x) * w))
                .unzip(),
            SpectralDensity::Discrete { ref modes } => {
                modes.iter().map(|m| (m.omega, m.g * m.g)).unzip()
            }
        }
    }

    /// Adaptive ∫ J(ω) f(ω) dω over the support. Exact for discrete baths.
    pub fn integrate<T, F>(&self, f: F, tol: Tolerance) -> Result<Estimate<T>>
    where
        T: QuadValue,
        F: Fn(f64) -> T,
    {
        self.integrate_oscillatory(f, tol, 0.0)
    }

    pub(crate) fn integrate_oscillatory<T, F>(
        &self,
        f: F,
        tol: Tolerance,
        phase_rate: f64,
    ) -> Result<Estimate<T>>
    where
        T: QuadValue,
        F: Fn(f64) -> T,
    {
        match *self {
            SpectralDensity::Discrete { ref modes } => {
                let value = modes
                    .iter()
                    .fold(T::zero(), |acc, m| acc + f(m.omega) * (m.g * m.g));
                Ok(Estimate {
                    value,
                    error: 0.0,
                    level: 0,
                })
            }
            SpectralDensity::Semicircle { g, zeta, big_omega } => {
                let layout = self.layout(phase_rate).expect("continuous density");
                quadrature::integrate(
                    |th: f64| {
                        let st = th.sin();
                        f(big_omega + 2.0 * zeta * th.cos()) * (2.0 * g * g / PI * st * st)
                    },
                    &layout,
                    tol,
                )
            }
            SpectralDensity::OhmicFamily { .. } => {
                let layout = self.layout(phase_rate).expect("continuous density");
                quadrature::integrate(|x: f64| f(x) * self.density_unchecked(x), &layout, tol)
            }
        }
    }

    /// μ(t) = ∫ J(ω) e^{−iωt} dω.
    pub fn memory_kernel(&self, t: f64) -> Result<Complex64> {
        check_time(t)?;
        match *self {
            SpectralDensity::OhmicFamily {
                eta,
                s,
                omega_c,
                band_edge: None,
            } => Ok(ohmic_mu_closed(eta, s, omega_c, t)),
            SpectralDensity::Semicircle { g, zeta, big_omega } => {
                Ok(semicircle_mu_closed(g, zeta, big_omega, t))
            }
            _ => self.memory_kernel_quadrature(t),
        }
    }

    /// μ(t) by direct quadrature, bypassing any closed form.
    pub fn memory_kernel_quadrature(&self, t: f64) -> Result<Complex64> {
        check_time(t)?;
        let scale = self.total_weight();
        self.integrate_oscillatory(
            |w| Complex64::from_polar(1.0, -w * t),
            Tolerance::default().with_abs(1e-13 * scale),
            t,
        )
        .map(|e| e.value)
    }

    /// ν(t) = ∫ J(ω) n̄(β_b, ω) e^{−iωt} dω.
    pub fn noise_kernel(&self, beta_b: f64, t: f64) -> Result<Complex64> {
        check_time(t)?;
        check_beta(beta_b)?;
        match *self {
            SpectralDensity::OhmicFamily {
                eta,
                s,
                omega_c,
                band_edge: None,
            } => Ok(ohmic_nu_series(eta, s, omega_c, beta_b, t)),
            _ => self.noise_kernel_quadrature(beta_b, t),
        }
    }

    /// ν(t) by direct quadrature, bypassing any closed form.
    pub fn noise_kernel_quadrature(&self, beta_b: f64, t: f64) -> Result<Complex64> {
        check_time(t)?;
        check_beta(beta_b)?;
        let nu0 = self.integrate(|w| thermal_weight(beta_b, w), Tolerance::rel(1e-13))?;
        if t == 0.0 {
            return Ok(Complex64::new(nu0.value, 0.0));
        }
        self.integrate_oscillatory(
            |w| Complex64::from_polar(thermal_weight(beta_b, w), -w * t),
            Tolerance::default().with_abs(1e-13 * nu0.value),
            t,
        )
        .map(|e| e.value)
    }

    /// μ and ν on `times`. Closed forms are used where they exist; otherwise
    /// one node set, converged at the largest time, serves every sample.
    pub fn tabulate_kernels(&self, beta_b: f64, times: &[f64]) -> Result<KernelSamples> {
        check_beta(beta_b)?;
        for &t in times {
            check_time(t)?;
        }
        let t_max = times.iter().cloned().fold(0.0, f64::max);
        let mu = match *self {
            SpectralDensity::OhmicFamily {
                band_edge: Some(_), ..
            } => self.tabulate_by_nodes(times, t_max, |_| 1.0)?,
            _ => times
                .iter()
                .map(|&t| self.memory_kernel(t))
                .collect::<Result<Vec<_>>>()?,
        };
        let nu = match *self {
            SpectralDensity::OhmicFamily {
                eta,
                s,
                omega_c,
                band_edge: None,
            } => times
                .iter()
                .map(|&t| ohmic_nu_series(eta, s, omega_c, beta_b, t))
                .collect(),
            _ => self.tabulate_by_nodes(times, t_max, |w| thermal_weight(beta_b, w))?,
        };
        Ok(KernelSamples {
            times: times.to_vec(),
            mu,
            nu,
            beta_b,
        })
    }

    fn tabulate_by_nodes<W: Fn(f64) -> f64>(
        &self,
        times: &[f64],
        t_max: f64,
        weight: W,
    ) -> Result<Vec<Complex64>> {
        let (omegas, masses) = match self.layout(t_max) {
            None => self.measure_from(&NodeSet::default()),
            Some(layout) => {
                let scale = self.integrate(&weight, Tolerance::rel(1e-13))?.value;
                let probe = self.integrate_oscillatory(
                    |w| Complex64::from_polar(weight(w), -w * t_max),
                    Tolerance::default().with_abs(1e-13 * scale),
                    t_max,
                )?;
                self.measure_from(&layout.nodes(probe.level))
            }
        };
        let weighted: Vec<f64> = omegas
            .iter()
            .zip(&masses)
            .map(|(&w, &m)| m * weight(w))
            .collect();
        Ok(times
            .iter()
            .map(|&t| {
                omegas
                    .iter()
                    .zip(&weighted)
                    .fold(Complex64::new(0.0, 0.0), |acc, (&w, &m)| {
                        acc + Complex64::from_polar(m, -w * t)
                    })
            })
            .collect())
    }

    /// Δ(ω) = P∫ J(ω')/(ω − ω') dω'.
    pub fn lamb_shift(&self, omega: f64) -> Result<f64> {
        if !omega.is_finite() {
            return Err(Error::domain(format!("frequency must be finite, got {omega}")));
        }
        match *self {
            SpectralDensity::Semicircle { g, zeta, big_omega } => {
                Ok(semicircle_hilbert(g, zeta, big_omega, omega))
            }
            SpectralDensity::Discrete { ref modes } => {
                let mut acc = 0.0;
                for m in modes.iter().filter(|m| m.g != 0.0) {
                    if m.omega == omega {
                        return Err(Error::domain(format!(
                            "Lamb shift of a discrete bath is singular at its mode ω = {omega}"
                        )));
                    }
                    acc += m.g * m.g / (omega - m.omega);
                }
                Ok(acc)
            }
            SpectralDensity::OhmicFamily { .. } => self.lamb_shift_quadrature(omega),
        }
    }

    /// Principal value by singularity subtraction, for any continuous density.
    ///
    /// Inside the support the integrand [J(ω') − J(ω)]/(ω − ω') is regular and
    /// the subtracted piece J(ω)·P∫dω'/(ω − ω') is known in closed form. For
    /// the semicircle the subtraction is done in θ, where P∫₀^π dθ/(a − b cos θ)
    /// vanishes for |a| < b.
    pub fn lamb_shift_quadrature(&self, omega: f64) -> Result<f64> {
        let tol = Tolerance::rel(1e-12).with_abs(1e-15 * self.total_weight().abs());
        match *self {
            SpectralDensity::Discrete { .. } => self.lamb_shift(omega),
            SpectralDensity::Semicircle { g, zeta, big_omega } => {
                let amp = 2.0 * g * g / PI;
                let denom = |th: f64| omega - big_omega - 2.0 * zeta * th.cos();
                let c = (omega - big_omega) / (2.0 * zeta);
                if c.abs() >= 1.0 {
                    let layout = Layout::new(0.0, PI).with_base_panels(8);
                    return quadrature::integrate(
                        |th: f64| amp * th.sin().powi(2) / denom(th),
                        &layout,
                        tol,
                    )
                    .map(|e| e.value);
                }
                let th_star = c.acos();
                let f_star = amp * th_star.sin().powi(2);
                let layout = Layout::new(0.0, PI)
                    .with_base_panels(8)
                    .with_break(th_star)
                    .graded_at(th_star, 6);
                quadrature::integrate(
                    |th: f64| {
                        let d = denom(th);
                        if d == 0.0 {
                            0.0
                        } else {
                            (amp * th.sin().powi(2) - f_star) / d
                        }
                    },
                    &layout,
                    tol,
                )
                .map(|e| e.value)
            }
            SpectralDensity::OhmicFamily { s, .. } => {
                let w = self.effective_cutoff();
                let base = Layout::new(0.0, w)
                    .with_base_panels(16)
                    .graded_at(0.0, ohmic_grade_depth(s));
                if omega <= 0.0 || omega >= w {
                    return quadrature::integrate(
                        |x: f64| self.density_unchecked(x) / (omega - x),
                        &base,
                        tol,
                    )
                    .map(|e| e.value);
                }
                let j0 = self.density_unchecked(omega);
                let layout = base.with_break(omega).graded_at(omega, 8);
                let regular = quadrature::integrate(
                    |x: f64| {
                        let d = omega - x;
                        if d == 0.0 {
                            0.0
                        } else {
                            (self.density_unchecked(x) - j0) / d
                        }
                    },
                    &layout,
                    tol,
                )?;
                Ok(regular.value + j0 * (omega / (w - omega)).ln())
            }
        }
    }

    /// Replaces the density with `n_modes` oscillators at panel midpoints,
    /// g_k = √(J(ω_k) Δω). Ohmic panels tile (0, ω_max]; the semicircle uses
    /// its own band.
    pub fn discretize(&self, n_modes: usize, omega_max: f64) -> Result<SpectralDensity> {
        if n_modes == 0 {
            return Err(Error::domain("discretization needs at least one mode"));
        }
        let (lo, hi) = match self {
            SpectralDensity::OhmicFamily { .. } => {
                positive("omega_max", omega_max)?;
                (0.0, omega_max)
            }
            SpectralDensity::Semicircle { .. } => {
                let s = self.support().expect("semicircle has a band");
                (s.lo, s.hi)
            }
            SpectralDensity::Discrete { .. } => return Ok(self.clone()),
        };
        let dw = (hi - lo) / n_modes as f64;
        let modes = (0..n_modes)
            .map(|k| {
                let omega = lo + (k as f64 + 0.5) * dw;
                Mode {
                    omega,
                    g: (self.density_unchecked(omega) * dw).sqrt(),
                }
            })
            .collect();
        Ok(SpectralDensity::Discrete { modes })
    }
}

/// J-weight of the thermal integrand, n̄(β, ω), finite at ω → 0 when
/// multiplied by J ∝ ω^s with s ≥ 1.
fn thermal_weight(beta: f64, omega: f64) -> f64 {
    if omega <= 0.0 {
        return 0.0;
    }
    bose(beta, omega)
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("time must be finite and non-negative, got {t}")))
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("inverse temperature must be positive, got {beta}")))
    }
}

/// μ(t) = η ω_c^{1−s} Γ(s+1) (1/ω_c + it)^{−(s+1)}.
fn ohmic_mu_closed(eta: f64, s: f64, omega_c: f64, t: f64) -> Complex64 {
    let a = Complex64::new(1.0 / omega_c, t);
    eta * omega_c.powf(1.0 - s) * libm::tgamma(s + 1.0) * a.powf(-(s + 1.0))
}

/// μ(t) = g² e^{−iΩt} · 2J₁(2ζt)/(2ζt).
fn semicircle_mu_closed(g: f64, zeta: f64, big_omega: f64, t: f64) -> Complex64 {
    let x = 2.0 * zeta * t;
    let envelope = if x.abs() < 1e-8 {
        1.0 - x * x / 8.0
    } else {
        2.0 * libm::j1(x) / x
    };
    Complex64::from_polar(g * g * envelope, -big_omega * t)
}

/// Real Hilbert transform of the semicircle, ∫ J(ω')/(ω − ω') dω' (principal
/// value inside the band).
pub(crate) fn semicircle_hilbert(g: f64, zeta: f64, big_omega: f64, omega: f64) -> f64 {
    let x = omega - big_omega;
    let r = 2.0 * zeta;
    let pre = g * g / (2.0 * zeta * zeta);
    if x.abs() <= r {
        pre * x
    } else {
        pre * (x - x.signum() * ((x - r) * (x + r)).sqrt())
    }
}

/// ∫ J(ω')/(ω − ω')² dω' outside the band, i.e. −dΔ/dω.
pub(crate) fn semicircle_hilbert_slope(g: f64, zeta: f64, big_omega: f64, omega: f64) -> f64 {
    let x = omega - big_omega;
    let r = 2.0 * zeta;
    let pre = g * g / (2.0 * zeta * zeta);
    pre * (x.abs() / ((x - r) * (x + r)).sqrt() - 1.0)
}

/// Bernoulli numbers B_2 .. B_10 for the Euler–Maclaurin tail.
const BERNOULLI: [f64; 5] = [1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0];

/// ν(t) for the Ohmic family from the Bose expansion
/// ν(t) = η ω_c^{1−s} Γ(s+1) Σ_{n≥1} (1/ω_c + nβ + it)^{−(s+1)},
/// summed directly up to N and closed with an Euler–Maclaurin tail.
fn ohmic_nu_series(eta: f64, s: f64, omega_c: f64, beta: f64, t: f64) -> Complex64 {
    let p = s + 1.0;
    let a = Complex64::new(1.0 / omega_c, t);
    let n_direct = ((30.0 / beta).ceil() as usize).clamp(10, 200_000);
    let mut sum = Complex64::new(0.0, 0.0);
    for n in 1..n_direct {
        sum += (a + beta * n as f64).powf(-p);
    }
    let z = a + beta * n_direct as f64;
    let mut tail = z.powf(-s) / (s * beta) + 0.5 * z.powf(-p);
    // −B_{2k}/(2k)! f^{(2k−1)}(N), f^{(m)} = (−1)^m (p)_m β^m z^{−p−m}
    let mut poch = p; // (p)_{2k-1}
    let mut fact = 2.0; // (2k)!
    let mut beta_pow = beta;
    for (k, b) in BERNOULLI.iter().enumerate() {
        let m = 2 * k + 1;
        tail += b / fact * poch * beta_pow * z.powf(-p - m as f64);
        poch *= (p + m as f64) * (p + m as f64 + 1.0);
        fact *= (2 * k + 3) as f64 * (2 * k + 4) as f64;
        beta_pow *= beta * beta;
    }
    sum += tail;
    eta * omega_c.powf(1.0 - s) * libm::tgamma(s + 1.0) * sum
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig2(eta: f64) -> SpectralDensity {
        SpectralDensity::ohmic(eta, 1.0, 10.0).unwrap()
    }

    #[test]
    fn ohmic_density_at_cutoff() {
        let j = fig2(0.1).density(10.0).unwrap();
        assert!((j - 0.1 * 10.0 * (-1.0f64).exp()).abs() < 1e-15);
        assert!((j - 0.36788).abs() < 1e-5);
    }

    #[test]
    fn semicircle_density_center_and_edge() {
        let (g, zeta, om) = (0.12, 0.03, 1.0);
        let sd = SpectralDensity::semicircle(g, zeta, om).unwrap();
        let center = sd.density(om).unwrap();
        assert!((center - g * g / (PI * zeta)).abs() < 1e-14);
        assert_eq!(sd.density(om + 2.0 * zeta).unwrap(), 0.0);
        assert_eq!(sd.density(om + 3.0 * zeta).unwrap(), 0.0);
    }

    #[test]
    fn non_finite_frequency_is_rejected() {
        assert!(matches!(fig2(0.1).density(f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn ohmic_mu_closed_forms() {
        let sd = fig2(0.1);
        let mu0 = sd.memory_kernel(0.0).unwrap();
        assert!((mu0 - Complex64::new(10.0, 0.0)).norm() < 1e-12);
        let mu = sd.memory_kernel(0.1).unwrap();
        assert!((mu - Complex64::new(0.0, -5.0)).norm() < 1e-12, "{mu}");
    }

    #[test]
    fn ohmic_mu_quadrature_matches_closed_form() {
        for s in [0.5, 1.0, 2.0] {
            let sd = SpectralDensity::ohmic(0.1, s, 10.0).unwrap();
            for t in [0.0, 0.05, 0.7, 3.0] {
                let closed = sd.memory_kernel(t).unwrap();
                let quad = sd.memory_kernel_quadrature(t).unwrap();
                let scale = sd.total_weight();
                assert!(
                    (closed - quad).norm() <= 1e-10 * scale,
                    "s={s} t={t}: {closed} vs {quad}"
                );
            }
        }
    }

    #[test]
    fn semicircle_mu_matches_quadrature_and_area() {
        let sd = SpectralDensity::semicircle(0.1, 0.08, 1.0).unwrap();
        let area = sd.integrate(|_| 1.0, Tolerance::rel(1e-13)).unwrap().value;
        assert!((area - 0.01).abs() < 1e-14);
        for t in [0.0, 1.0, 17.0, 250.0] {
            let closed = sd.memory_kernel(t).unwrap();
            let quad = sd.memory_kernel_quadrature(t).unwrap();
            assert!((closed - quad).norm() < 1e-12, "t={t}: {closed} vs {quad}");
        }
    }

    #[test]
    fn single_mode_kernels() {
        let sd = SpectralDensity::discrete(vec![Mode { omega: 1.0, g: 0.2 }]).unwrap();
        let t = 2.7;
        let mu = sd.memory_kernel(t).unwrap();
        assert!((mu - Complex64::from_polar(0.04, -t)).norm() < 1e-15);
        let nu0 = sd.noise_kernel(1.0, 0.0).unwrap();
        assert!((nu0.re - 0.04 / (1.0f64.exp() - 1.0)).abs() < 1e-15);
        assert!((nu0.re - 0.023280).abs() < 1e-6);
    }

    #[test]
    fn ohmic_nu_series_matches_quadrature() {
        for (s, beta) in [(1.0, 0.2), (1.0, 1.2), (0.5, 0.2), (2.0, 5.0), (3.0, 0.05)] {
            let sd = SpectralDensity::ohmic(0.1, s, 10.0).unwrap();
            let nu0 = sd.noise_kernel(beta, 0.0).unwrap().re;
            for t in [0.0, 0.3, 2.0, 25.0] {
                let series = sd.noise_kernel(beta, t).unwrap();
                let quad = sd.noise_kernel_quadrature(beta, t).unwrap();
                assert!(
                    (series - quad).norm() <= 1e-10 * nu0,
                    "s={s} β={beta} t={t}: {series} vs {quad}"
                );
            }
        }
    }

    #[test]
    fn cold_bath_noise_vanishes() {
        let sd = SpectralDensity::semicircle(0.1, 0.03, 1.0).unwrap();
        let nu = sd.noise_kernel(200.0, 0.0).unwrap();
        assert!(nu.norm() < 1e-10 * sd.memory_kernel(0.0).unwrap().re);
        let modes = SpectralDensity::discrete(vec![Mode { omega: 1.0, g: 0.3 }]).unwrap();
        assert!(modes.noise_kernel(200.0, 0.0).unwrap().norm() < 1e-10 * 0.09);
    }

    #[test]
    fn noise_kernel_rejects_bad_temperature() {
        assert!(fig2(0.1).noise_kernel(0.0, 1.0).is_err());
        assert!(fig2(0.1).noise_kernel(-1.0, 1.0).is_err());
    }

    #[test]
    fn tabulated_kernels_match_pointwise() {
        let sd = SpectralDensity::semicircle(0.12, 0.03, 1.0).unwrap();
        let times: Vec<f64> = (0..=50).map(|i| i as f64 * 4.0).collect();
        let tab = sd.tabulate_kernels(5.0, &times).unwrap();
        for (i, &t) in times.iter().enumerate() {
            let nu = sd.noise_kernel(5.0, t).unwrap();
            assert!((tab.nu[i] - nu).norm() < 1e-13, "t={t}");
            assert!((tab.mu[i] - sd.memory_kernel(t).unwrap()).norm() < 1e-13);
        }
        let limited = fig2(0.05).band_limited(20.0).unwrap();
        let times: Vec<f64> = (0..=30).map(|i| i as f64).collect();
        let tab = limited.tabulate_kernels(0.2, &times).unwrap();
        for (i, &t) in times.iter().enumerate() {
            let mu = limited.memory_kernel(t).unwrap();
            assert!((tab.mu[i] - mu).norm() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn empty_bath_lamb_shift_is_zero() {
        assert_eq!(SpectralDensity::empty().lamb_shift(1.0).unwrap(), 0.0);
    }

    #[test]
    fn semicircle_lamb_shift_closed_form_and_quadrature() {
        let sd = SpectralDensity::semicircle(0.12, 0.03, 1.0).unwrap();
        assert!(sd.lamb_shift(1.0).unwrap().abs() < 1e-15);
        assert!(sd.lamb_shift_quadrature(1.0).unwrap().abs() < 1e-10);
        for w in [0.5, 0.95, 0.98, 1.01, 1.05, 1.3] {
            let closed = sd.lamb_shift(w).unwrap();
            let quad = sd.lamb_shift_quadrature(w).unwrap();
            assert!((closed - quad).abs() < 1e-10, "ω={w}: {closed} vs {quad}");
        }
    }

    #[test]
    fn discretized_semicircle_keeps_area() {
        let sd = SpectralDensity::semicircle(0.1, 0.03, 1.0).unwrap();
        let d = sd.discretize(500, 0.0).unwrap();
        let SpectralDensity::Discrete { modes } = &d else {
            panic!("expected modes")
        };
        assert!(modes.iter().all(|m| m.omega > 0.94 && m.omega < 1.06));
        let area: f64 = modes.iter().map(|m| m.g * m.g).sum();
        assert!((area / 0.01 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn single_panel_discretization() {
        let sd = fig2(0.1);
        let d = sd.discretize(1, 2.0).unwrap();
        let SpectralDensity::Discrete { modes } = d else {
            panic!("expected modes")
        };
        assert_eq!(modes.len(), 1);
        assert_eq!(modes[0].omega, 1.0);
        let j1 = sd.density(1.0).unwrap();
        assert!((modes[0].g.powi(2) - 2.0 * j1).abs() < 1e-15);
    }
}
