//! One-dimensional oscillator eigenfunction basis.
//!
//! The basis functions `e_n` are the orthonormal eigenfunctions of a harmonic
//! oscillator with mass `m` and angular frequency `w` (hbar = 1):
//!
//! ```text
//! e_n(x) = (m w / pi)^{1/4} (2^n n!)^{-1/2} H_n(sqrt(m w) x) exp(-m w x^2 / 2)
//! ```
//!
//! Everything here reduces to the unit-parameter Hermite functions
//! `h_n(u) = pi^{-1/4} (2^n n!)^{-1/2} H_n(u) e^{-u^2/2}` through the scaling
//! `e_n(x) = lambda^{1/4} h_n(sqrt(lambda) x)` with `lambda = m w`. Values are
//! produced by the normalized three-term recurrence, which is stable upward.
//!
//! The module also provides the Gauss–Hermite rule used as the independent
//! quadrature oracle for coefficient grids.

use crate::dd::DdAcc;
use crate::error::{PbError, Result};

/// Mass and angular frequency of the reference oscillator (hbar = 1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OscillatorParams {
    mass: f64,
    frequency: f64,
}

impl OscillatorParams {
    /// Both parameters must be finite and strictly positive.
    pub fn new(mass: f64, frequency: f64) -> Result<Self> {
        if !mass.is_finite() || !frequency.is_finite() {
            return Err(PbError::NonFinite("oscillator mass/frequency".into()));
        }
        if mass <= 0.0 || frequency <= 0.0 {
            return Err(PbError::Constraint(format!(
                "oscillator parameters must be positive: mass = {mass}, frequency = {frequency}"
            )));
        }
        Ok(Self { mass, frequency })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    /// The length-scale combination `m * w` that enters every formula.
    pub fn scale(&self) -> f64 {
        self.mass * self.frequency
    }
}

/// Accumulation mode for quadrature sums.
///
/// `Extended` runs the same rule with a compensated accumulator; it exists so
/// oracle comparisons can rule out plain-summation roundoff as a suspect.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Precision {
    #[default]
    Double,
    Extended,
}

/// Evaluate the unit-parameter orthonormal Hermite functions `h_0..=h_n` at `u`.
///
/// Returns the full ladder because callers almost always need every order.
fn hermite_functions_upto(n: usize, u: f64) -> Vec<f64> {
    let mut vals = Vec::with_capacity(n + 1);
    let h0 = std::f64::consts::PI.powf(-0.25) * (-0.5 * u * u).exp();
    vals.push(h0);
    if n == 0 {
        return vals;
    }
    vals.push(std::f64::consts::SQRT_2 * u * h0);
    for k in 1..n {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * u * vals[k] - (kf / (kf + 1.0)).sqrt() * vals[k - 1];
        vals.push(next);
    }
    vals
}

/// Value of the basis function `e_n(x)` for the given oscillator parameters.
pub fn hermite_eval(n: usize, x: f64, params: &OscillatorParams) -> Result<f64> {
    if !x.is_finite() {
        return Err(PbError::NonFinite(format!("hermite_eval x = {x}")));
    }
    let lambda = params.scale();
    let u = lambda.sqrt() * x;
    let vals = hermite_functions_upto(n, u);
    Ok(lambda.powf(0.25) * vals[n])
}

/// Which ladder map acts on a basis index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LadderKind {
    /// Annihilation-type map: `e_n -> sqrt(n) e_{n-1}`, absent at n = 0.
    Lower,
    /// Creation-type map: `e_n -> sqrt(n+1) e_{n+1}`.
    Raise,
}

/// Single-mode ladder action on a basis index.
///
/// Returns `None` when the index is annihilated (lowering the vacuum).
pub fn ladder_on_basis(kind: LadderKind, n: usize) -> Option<(f64, usize)> {
    match kind {
        LadderKind::Lower => {
            if n == 0 {
                None
            } else {
                Some(((n as f64).sqrt(), n - 1))
            }
        }
        LadderKind::Raise => Some((((n + 1) as f64).sqrt(), n + 1)),
    }
}

/// Gauss–Hermite rule for the weight `exp(-t^2)` on the real line.
///
/// `scaled_weights[i] = weights[i] * exp(t_i^2)` is stored separately so that
/// integrands carrying their own Gaussian factor (Hermite functions do) can be
/// summed without forming huge exponentials.
#[derive(Clone, Debug)]
pub struct GaussHermiteRule {
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    scaled_weights: Vec<f64>,
}

impl GaussHermiteRule {
    /// Build the rule of the given order (number of nodes), `1..=512`.
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 || order > 512 {
            return Err(PbError::InvalidArgument(format!(
                "Gauss-Hermite order must be in 1..=512, got {order}"
            )));
        }
        let roots = positive_hermite_roots(order);
        let mut nodes = Vec::with_capacity(order);
        for r in roots.iter().rev() {
            nodes.push(-r);
        }
        if order % 2 == 1 {
            nodes.push(0.0);
        }
        nodes.extend(roots.iter().copied());
        debug_assert_eq!(nodes.len(), order);

        let mut weights = Vec::with_capacity(order);
        let mut scaled_weights = Vec::with_capacity(order);
        for &t in &nodes {
            let vals = hermite_functions_upto(order - 1, t);
            let h_prev = vals[order - 1];
            // w_i = e^{-t^2} / (order * h_{order-1}(t)^2), with the Gaussian
            // already folded into the Hermite-function normalization.
            let scaled = 1.0 / (order as f64 * h_prev * h_prev);
            scaled_weights.push(scaled);
            weights.push(scaled * (-t * t).exp());
        }
        Ok(Self {
            order,
            nodes,
            weights,
            scaled_weights,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Nodes in ascending order.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Weights for integrands measured against `exp(-t^2) dt`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weights with the Gaussian divided out: `integral g(t) dt ~ sum v_i g(t_i)`
    /// for integrands `g` that already decay like a Gaussian.
    pub fn scaled_weights(&self) -> &[f64] {
        &self.scaled_weights
    }
}

/// Positive roots of the order-`n` Hermite function, ascending.
///
/// The roots of `h_n` all lie in `(-R, R)` with `R = sqrt(2n + 1)`, and their
/// spacing never falls below roughly `pi / (2 sqrt(2n+1))`, so a scan with a
/// step well under that bound brackets every root; bisection then Newton
/// polishing (using `h_n'(t) = -t h_n(t) + sqrt(2n) h_{n-1}(t)`) finishes.
fn positive_hermite_roots(n: usize) -> Vec<f64> {
    let eval = |t: f64| -> f64 { hermite_functions_upto(n, t)[n] };
    let r_max = ((2 * n + 1) as f64).sqrt() + 0.5;
    let step = 0.25 * std::f64::consts::PI / ((2 * n + 1) as f64).sqrt();
    // For odd n, t = 0 is a root; start the scan just above it.
    let start = if n % 2 == 1 { step * 0.5 } else { 0.0 };
    let mut roots = Vec::with_capacity(n / 2);
    let mut t_prev = start;
    let mut f_prev = eval(t_prev);
    let mut t = start + step;
    while t_prev < r_max {
        let f = eval(t);
        if f_prev == 0.0 {
            roots.push(t_prev);
        } else if f_prev.signum() != f.signum() && f != 0.0 {
            roots.push(refine_root(n, t_prev, t, f_prev, f));
        }
        t_prev = t;
        f_prev = f;
        t += step;
    }
    debug_assert_eq!(roots.len(), n / 2, "hermite root scan missed a bracket");
    roots
}

fn refine_root(n: usize, mut lo: f64, mut hi: f64, mut f_lo: f64, _f_hi: f64) -> f64 {
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let f_mid = hermite_functions_upto(n, mid)[n];
        if f_mid == 0.0 {
            return mid;
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    // Newton polish: quadratic convergence from the bisection estimate.
    let mut t = 0.5 * (lo + hi);
    for _ in 0..3 {
        let vals = hermite_functions_upto(n, t);
        let f = vals[n];
        let df = -t * vals[n] + (2.0 * n as f64).sqrt() * vals[n - 1];
        if df == 0.0 {
            break;
        }
        t -= f / df;
    }
    t
}

/// Default quadrature order for overlaps against `e_n`: exact for the
/// polynomial content plus a margin for generic smooth integrands.
pub fn default_order(n: usize) -> usize {
    2 * n + 16
}

/// Overlap `integral e_n(x) f(x) dx` by Gauss–Hermite quadrature.
///
/// Refuses orders below `n + 8`: the rule of order `q` integrates polynomial
/// content of degree `2q - 1`, and anything lower than this bound cannot
/// resolve the oscillation of `e_n`.
pub fn overlap_quadrature<F>(f: F, n: usize, params: &OscillatorParams, order: usize) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    overlap_quadrature_with(f, n, params, order, Precision::Double)
}

/// [`overlap_quadrature`] with an explicit accumulation mode.
pub fn overlap_quadrature_with<F>(
    f: F,
    n: usize,
    params: &OscillatorParams,
    order: usize,
    precision: Precision,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let needed = n + 8;
    if order < needed {
        return Err(PbError::QuadratureOrder { order, n, needed });
    }
    let rule = GaussHermiteRule::new(order)?;
    let lambda = params.scale();
    let inv_sqrt_lambda = lambda.sqrt().recip();
    let prefactor = lambda.powf(-0.25);

    match precision {
        Precision::Double => {
            let mut sum = 0.0;
            for (i, &t) in rule.nodes().iter().enumerate() {
                let h = hermite_functions_upto(n, t)[n];
                sum += rule.scaled_weights()[i] * h * f(t * inv_sqrt_lambda);
            }
            Ok(prefactor * sum)
        }
        Precision::Extended => {
            let mut acc = DdAcc::new();
            for (i, &t) in rule.nodes().iter().enumerate() {
                let h = hermite_functions_upto(n, t)[n];
                acc.add(rule.scaled_weights()[i] * h * f(t * inv_sqrt_lambda));
            }
            Ok(prefactor * acc.value())
        }
    }
}
