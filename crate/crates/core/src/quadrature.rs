//! Composite Gauss–Legendre quadrature with panel doubling.
//!
//! Every integral in the crate goes through a [`Layout`]: a finite interval
//! split into a uniform set of panels (doubled at each refinement level) plus
//! a fixed set of geometrically graded breakpoints clustered around points
//! where the integrand is singular or sharply varying. Each panel carries a
//! 16-point Gauss–Legendre rule.

use std::ops::{Add, Mul};
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Points per panel.
pub const GL_ORDER: usize = 16;

/// Relative change between successive refinement levels accepted as converged.
pub const DEFAULT_REL_TOL: f64 = 1e-11;

const MAX_LEVEL: u32 = 16;

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Computes an `n`-point Gauss–Legendre rule by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n >= 1, "a quadrature rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    Rule { nodes, weights }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

pub(crate) fn gl16() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(GL_ORDER))
}

/// Quadrature abscissae with their weights.
#[derive(Debug, Clone, Default)]
pub struct NodeSet {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
}

impl NodeSet {
    /// Places a Gauss–Legendre rule on every panel between consecutive breaks.
    pub fn from_breaks(breaks: &[f64]) -> Self {
        let rule = gl16();
        let panels = breaks.len().saturating_sub(1);
        let mut x = Vec::with_capacity(panels * GL_ORDER);
        let mut w = Vec::with_capacity(panels * GL_ORDER);
        for pair in breaks.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (xi, wi) in rule.nodes.iter().zip(&rule.weights) {
                x.push(mid + half * xi);
                w.push(half * wi);
            }
        }
        NodeSet { x, w }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn sum<T: QuadValue, F: FnMut(f64) -> T>(&self, mut f: F) -> T {
        let mut acc = T::zero();
        for (&x, &w) in self.x.iter().zip(&self.w) {
            acc = acc + f(x) * w;
        }
        acc
    }
}

/// Values that can be accumulated by a quadrature rule.
pub trait QuadValue: Copy + Add<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// A point around which panels are graded geometrically.
#[derive(Debug, Clone, Copy)]
pub struct Grade {
    pub at: f64,
    /// Number of halvings of the innermost panel.
    pub depth: u32,
}

/// Panel layout on `[lo, hi]`.
#[derive(Debug, Clone)]
pub struct Layout {
    pub lo: f64,
    pub hi: f64,
    /// Uniform panels at level 0.
    pub base_panels: usize,
    pub grades: Vec<Grade>,
    /// Extra breakpoints kept at every level.
    pub fixed: Vec<f64>,
}

impl Layout {
    pub fn new(lo: f64, hi: f64) -> Self {
        Layout {
            lo,
            hi,
            base_panels: 4,
            grades: Vec::new(),
            fixed: Vec::new(),
        }
    }

    pub fn with_base_panels(mut self, n: usize) -> Self {
        self.base_panels = n.max(1);
        self
    }

    pub fn graded_at(mut self, at: f64, depth: u32) -> Self {
        self.grades.push(Grade { at, depth });
        self
    }

    pub fn with_break(mut self, at: f64) -> Self {
        self.fixed.push(at);
        self
    }

    /// Sorted, de-duplicated panel breakpoints at refinement `level`.
    pub fn breaks(&self, level: u32) -> Vec<f64> {
        let (lo, hi) = (self.lo, self.hi);
        let n = self.base_panels << level;
        let width = hi - lo;
        let mut b: Vec<f64> = (0..=n).map(|i| lo + width * i as f64 / n as f64).collect();
        b[n] = hi;
        let h0 = width / self.base_panels as f64;
        for g in &self.grades {
            let mut h = h0;
            for _ in 0..=g.depth {
                for p in [g.at - h, g.at + h] {
                    if p > lo && p < hi {
                        b.push(p);
                    }
                }
                h *= 0.5;
            }
            if g.at > lo && g.at < hi {
                b.push(g.at);
            }
        }
        for &p in &self.fixed {
            if p > lo && p < hi {
                b.push(p);
            }
        }
        b.sort_by(|x, y| x.partial_cmp(y).expect("finite breakpoints"));
        b.dedup_by(|x, y| (*x - *y).abs() <= 4.0 * f64::EPSILON * x.abs().max(y.abs()));
        b
    }

    pub fn nodes(&self, level: u32) -> NodeSet {
        NodeSet::from_breaks(&self.breaks(level))
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Estimate<T> {
    pub value: T,
    pub error: f64,
    pub level: u32,
}

/// Convergence criteria for panel doubling.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rel: f64,
    /// Absolute floor, useful when the integral itself is tiny.
    pub abs: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rel: DEFAULT_REL_TOL,
            abs: 0.0,
        }
    }
}

impl Tolerance {
    pub fn rel(rel: f64) -> Self {
        Tolerance { rel, abs: 0.0 }
    }

    pub fn with_abs(mut self, abs: f64) -> Self {
        self.abs = abs;
        self
    }
}

/// Integrates `f` over `layout`, doubling the uniform panels until two
/// successive levels agree within `tol`.
pub fn integrate<T, F>(f: F, layout: &Layout, tol: Tolerance) -> Result<Estimate<T>>
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    if layout.hi <= layout.lo {
        return Ok(Estimate {
            value: T::zero(),
            error: 0.0,
            level: 0,
        });
    }
    let mut prev = layout.nodes(0).sum(&f);
    let mut err = f64::INFINITY;
    for level in 1..=MAX_LEVEL {
        let cur = layout.nodes(level).sum(&f);
        err = (cur + prev * -1.0).magnitude();
        if err <= tol.abs.max(tol.rel * cur.magnitude()) {
            return Ok(Estimate {
                value: cur,
                error: err,
                level,
            });
        }
        prev = cur;
    }
    Err(Error::numerical(
        format!(
            "quadrature on [{:.6e}, {:.6e}] did not converge after {} levels",
            layout.lo, layout.hi, MAX_LEVEL
        ),
        err,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let rule = gauss_legendre(GL_ORDER);
        let total: f64 = rule.weights.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        // degree 2n-1 = 31 is exact
        let int30: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(x, w)| w * x.powi(30))
            .sum();
        assert!((int30 - 2.0 / 31.0).abs() < 1e-14);
    }

    #[test]
    fn doubling_converges_on_smooth_integrand() {
        let layout = Layout::new(0.0, std::f64::consts::PI);
        let est = integrate(|x: f64| x.sin(), &layout, Tolerance::default()).unwrap();
        assert!((est.value - 2.0).abs() < 1e-13);
    }

    #[test]
    fn grading_handles_endpoint_singularity() {
        // ∫_0^1 x^{-1/2} dx = 2
        let layout = Layout::new(0.0, 1.0).graded_at(0.0, 110);
        let est = integrate(|x: f64| x.powf(-0.5), &layout, Tolerance::rel(1e-12)).unwrap();
        assert!((est.value - 2.0).abs() < 1e-9, "{}", est.value);
    }

    #[test]
    fn complex_oscillatory_integral() {
        // ∫_0^10 e^{-i 5 x} dx = (1 - e^{-50 i}) / (5 i)
        let layout = Layout::new(0.0, 10.0);
        let est = integrate(
            |x: f64| Complex64::from_polar(1.0, -5.0 * x),
            &layout,
            Tolerance::default(),
        )
        .unwrap();
        let exact = (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -50.0))
            / Complex64::new(0.0, 5.0);
        assert!((est.value - exact).norm() < 1e-12);
    }

    #[test]
    fn breaks_are_sorted_and_unique() {
        let b = Layout::new(0.0, 1.0)
            .graded_at(0.0, 5)
            .graded_at(0.5, 3)
            .with_break(0.5)
            .breaks(2);
        assert!(b.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(b[0], 0.0);
        assert_eq!(*b.last().unwrap(), 1.0);
    }
}
