//! Regularized summation for the series produced by distribution pairings.
//!
//! Three summation notions are implemented, and a result always records
//! which one produced it:
//!
//! * ordinary summation, accepted only when the partial sums pass a
//!   Cauchy-tail test;
//! * numerical Abel summation: damp the series by `eta^k`, sum for a
//!   schedule of `eta` values below 1, and extrapolate polynomially in
//!   `x = 1 - eta` to `x = 0`;
//! * exact Abel values for alternating series with polynomial weight,
//!   `sum_k (-1)^k p(k)`, via Dirichlet eta values at non-positive
//!   integers (Bernoulli numbers), extended by linearity.
//!
//! The damped sums are evaluated in double-double arithmetic ([`Dd`]):
//! individual damped terms can exceed the final answer by many orders of
//! magnitude, and a rounding error committed on one such product survives
//! the alternating cancellation. The extrapolation then amplifies whatever
//! noise the nodes carry; the reported `noise_bound` propagates per-node
//! uncertainty through the exact extrapolation weights, and
//! `extrapolation_residual` compares the full extrapolant against one with
//! the most aggressive node dropped.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, ToPrimitive, Zero};

use crate::dd::{Dd, DdAccC};
use crate::error::{PbError, Result};
use crate::C64;

/// Number of eta nodes in every extrapolation schedule.
pub const SCHEDULE_POINTS: usize = 12;
/// Largest polynomial degree the exact alternating route accepts.
pub const MAX_EXACT_DEGREE: usize = 12;

const X_HI: f64 = 0.3;
const X_LO_FLOOR: f64 = 0.02;
const X_LO_CEIL: f64 = 0.2;
const DEFAULT_MAX_TERMS: usize = 200_000;
const ORDINARY_SCAN_HORIZON: usize = 65_536;

/// Damped terms must fall below `DECAY_THRESHOLD * max(1, |partial sum|)`
/// for `DECAY_RUN` consecutive terms before a node sum is trusted.
const DECAY_THRESHOLD: f64 = 1e-18;
const DECAY_RUN: usize = 8;
const MIN_ENGINE_TERMS: usize = 64;

/// Fewest damping nodes the extrapolation to eta = 1 is allowed to use.
const MIN_SCHEDULE_NODES: usize = 4;

/// Double-double arithmetic noise per unit of accumulated damped magnitude.
const ARITH_NOISE_EPS: f64 = 2.5e-32;
/// Uncertainty carried by an f64-valued input term, relative to its size.
const DATA_NOISE_EPS: f64 = 1.1e-16;

/// Which summation notion produced a value. Never silently coerced.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SumMethod {
    /// Partial sums converge; the value is the ordinary limit.
    Ordinary,
    /// Damped-and-extrapolated numerical Abel value.
    AbelNumeric,
    /// Closed-form Abel value of an alternating polynomial series.
    AbelExact { degree: usize },
}

impl SumMethod {
    /// Stable lower-case tag for reports.
    pub fn label(&self) -> &'static str {
        match self {
            SumMethod::Ordinary => "ordinary",
            SumMethod::AbelNumeric => "abel_numeric",
            SumMethod::AbelExact { .. } => "abel_exact",
        }
    }
}

/// How a regularized value was obtained and how far it can be trusted.
#[derive(Clone, Debug)]
pub struct SumDiagnostics {
    /// Largest number of terms consumed at any node (or in the ordinary sum).
    pub terms_used: usize,
    /// Damping schedule; empty when no damping was needed.
    pub eta_schedule: Vec<f64>,
    /// Difference between the full extrapolant and one recomputed without
    /// the node closest to eta = 1 (spread of partial sums for ordinary
    /// results). An overestimate of the truncation error in practice.
    pub extrapolation_residual: f64,
    /// Rounding-noise estimate propagated through the extrapolation weights.
    pub noise_bound: f64,
}

/// A summed series value together with its method tag and diagnostics.
#[derive(Clone, Debug)]
pub struct RegularizedSum {
    pub value: C64,
    pub method: SumMethod,
    pub diagnostics: SumDiagnostics,
}

/// Caller-supplied structural knowledge about a series.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeriesHint {
    /// The series is expected to be `(-1)^k p(k)` with `deg p <= max_degree`.
    AlternatingPoly { max_degree: usize },
}

/// Knobs for the numerical Abel route.
#[derive(Clone, Debug)]
pub struct AbelOptions {
    /// Strictly increasing eta values in (0, 1); at least four.
    pub eta_schedule: Vec<f64>,
    /// Hard cap on terms consumed per node.
    pub max_terms: usize,
}

impl Default for AbelOptions {
    fn default() -> Self {
        AbelOptions {
            eta_schedule: default_eta_schedule(),
            max_terms: DEFAULT_MAX_TERMS,
        }
    }
}

fn x_floor_for_degree(degree: usize) -> f64 {
    (X_LO_FLOOR * 2f64.powf((degree as f64 - 8.0) / 2.0)).clamp(X_LO_FLOOR, X_LO_CEIL)
}

/// Damping schedule tuned for an alternating series of polynomial degree
/// `degree`: twelve nodes geometric in `x = 1 - eta` from 0.3 down to a
/// degree-dependent floor. Higher degrees stop farther from eta = 1, where
/// the series needs fewer terms and the damped sums carry less noise.
pub fn eta_schedule_for_degree(degree: usize) -> Vec<f64> {
    let x_lo = x_floor_for_degree(degree);
    let ratio = (x_lo / X_HI).powf(1.0 / (SCHEDULE_POINTS - 1) as f64);
    (0..SCHEDULE_POINTS)
        .map(|i| 1.0 - X_HI * ratio.powi(i as i32))
        .collect()
}

/// Schedule used when nothing is known about the series (degree <= 8 tuning).
pub fn default_eta_schedule() -> Vec<f64> {
    eta_schedule_for_degree(0)
}

/// Bernoulli numbers `B_0 .. B_{count-1}` with the `B_1 = -1/2` convention.
pub fn bernoulli_numbers(count: usize) -> Vec<BigRational> {
    let mut out: Vec<BigRational> = Vec::with_capacity(count);
    for m in 0..count {
        if m == 0 {
            out.push(BigRational::one());
            continue;
        }
        // B_m = -1/(m+1) * sum_{j<m} C(m+1, j) B_j
        let mut sum = BigRational::zero();
        let mut binom = BigInt::one();
        for (j, b) in out.iter().enumerate() {
            sum += BigRational::from_integer(binom.clone()) * b;
            binom = binom * BigInt::from(m + 1 - j) / BigInt::from(j + 1);
        }
        out.push(-sum / BigRational::from_integer(BigInt::from(m + 1)));
    }
    out
}

/// Exact Abel value of `sum_{k>=0} (-1)^k k^m` (with `0^0 = 1`).
///
/// For `m = 0` the damped sum is `1/(1+eta)`, hence `1/2`. For `m >= 1` the
/// value is `-eta_D(-m) = (2^{m+1} - 1) * zeta(-m)` with
/// `zeta(-m) = -B_{m+1}/(m+1)`, where `eta_D` is the Dirichlet eta function.
pub fn abel_exact_alternating(mono_degree: usize) -> BigRational {
    if mono_degree == 0 {
        return BigRational::new(BigInt::one(), BigInt::from(2));
    }
    let bern = bernoulli_numbers(mono_degree + 2);
    let zeta = -bern[mono_degree + 1].clone()
        / BigRational::from_integer(BigInt::from(mono_degree + 1));
    let two_pow = BigRational::from_integer(num::pow(BigInt::from(2), mono_degree + 1));
    (two_pow - BigRational::one()) * zeta
}

/// Exact Abel value of `sum (-1)^k p(k)` for `p` given by monomial
/// coefficients (`monomial[m]` multiplies `k^m`), by linearity.
pub fn abel_exact_poly(monomial: &[BigRational]) -> BigRational {
    monomial
        .iter()
        .enumerate()
        .map(|(m, c)| c * abel_exact_alternating(m))
        .sum()
}

/// Signed Stirling numbers of the first kind, `s[j][i]` for `j <= max_order`:
/// the falling factorial expands as `k(k-1)...(k-j+1) = sum_i s[j][i] k^i`.
fn stirling_first_signed(max_order: usize) -> Vec<Vec<BigInt>> {
    let mut s: Vec<Vec<BigInt>> = vec![vec![BigInt::one()]];
    for j in 0..max_order {
        let prev = &s[j];
        let mut row = vec![BigInt::zero(); j + 2];
        for (i, entry) in row.iter_mut().enumerate() {
            let lower = if i >= 1 { prev[i - 1].clone() } else { BigInt::zero() };
            let scaled = if i <= j { &prev[i] * BigInt::from(j) } else { BigInt::zero() };
            *entry = lower - scaled;
        }
        s.push(row);
    }
    s
}

/// Exact Abel values of the binomial basis: entry `j` is the Abel sum of
/// `sum_k (-1)^k C(k, j)`, obtained by expanding `C(k, j)` into monomials
/// with Stirling numbers of the first kind.
fn newton_basis_abel_values(max_degree: usize) -> Vec<BigRational> {
    let stirling = stirling_first_signed(max_degree);
    let mono: Vec<BigRational> = (0..=max_degree).map(abel_exact_alternating).collect();
    let mut factorial = BigRational::one();
    (0..=max_degree)
        .map(|j| {
            if j > 0 {
                factorial *= BigRational::from_integer(BigInt::from(j));
            }
            let numer: BigRational = stirling[j]
                .iter()
                .zip(&mono)
                .map(|(s, a)| BigRational::from_integer(s.clone()) * a)
                .sum();
            numer / factorial.clone()
        })
        .collect()
}

/// Exact Abel value of `sum (-1)^k p(k)` for `p` in Newton form:
/// `p(k) = sum_j newton[j] * C(k, j)`.
pub fn abel_exact_newton(newton: &[BigRational]) -> BigRational {
    if newton.is_empty() {
        return BigRational::zero();
    }
    let basis = newton_basis_abel_values(newton.len() - 1);
    newton.iter().zip(&basis).map(|(a, b)| a * b).sum()
}

/// Polynomial extrapolation of `(xs, ys)` to `x = 0` (Neville's scheme).
/// `xs` must be pairwise distinct.
fn neville_at_zero(xs: &[f64], ys: &[C64]) -> C64 {
    let n = xs.len();
    let mut p: Vec<C64> = ys.to_vec();
    for level in 1..n {
        for i in 0..(n - level) {
            p[i] = (p[i] * (0.0 - xs[i + level]) + p[i + 1] * (xs[i] - 0.0))
                / (xs[i] - xs[i + level]);
        }
    }
    p[0]
}

/// Absolute Lagrange weights of the nodes `xs` evaluated at `x = 0`; per-node
/// noise multiplied by these and summed bounds the extrapolated noise.
fn extrapolation_weights(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .enumerate()
        .map(|(i, &xi)| {
            let mut w = 1.0_f64;
            for (j, &xj) in xs.iter().enumerate() {
                if j != i {
                    w *= (0.0 - xj) / (xi - xj);
                }
            }
            w.abs()
        })
        .collect()
}

/// One term of a damped series: real and imaginary parts in double-double,
/// plus the absolute uncertainty the term's representation carries.
type TermValue = (Dd, Dd, f64);

/// Restartable term stream; the engine walks it once per eta node.
trait TermSource {
    fn restart(&mut self);
    fn next_term(&mut self) -> TermValue;
}

/// Finite slice of f64 terms, zero beyond the end.
struct SliceSource<'a> {
    terms: &'a [C64],
    at: usize,
}

impl<'a> SliceSource<'a> {
    fn new(terms: &'a [C64]) -> Self {
        SliceSource { terms, at: 0 }
    }
}

impl TermSource for SliceSource<'_> {
    fn restart(&mut self) {
        self.at = 0;
    }

    fn next_term(&mut self) -> TermValue {
        let value = self.terms.get(self.at).copied().unwrap_or(C64::new(0.0, 0.0));
        self.at += 1;
        (
            Dd::from_f64(value.re),
            Dd::from_f64(value.im),
            DATA_NOISE_EPS * value.norm(),
        )
    }
}

/// Terms produced by a caller closure.
struct FnSource<F: Fn(usize) -> C64> {
    term: F,
    at: usize,
}

impl<F: Fn(usize) -> C64> TermSource for FnSource<F> {
    fn restart(&mut self) {
        self.at = 0;
    }

    fn next_term(&mut self) -> TermValue {
        let value = (self.term)(self.at);
        self.at += 1;
        (
            Dd::from_f64(value.re),
            Dd::from_f64(value.im),
            DATA_NOISE_EPS * value.norm(),
        )
    }
}

/// Terms `(-1)^k p(k)` generated in double-double from Newton coefficients,
/// with the binomials maintained by a Pascal recurrence (additions only).
/// The coefficients are f64 data; their rounding shifts every term
/// coherently like a polynomial and stays bounded under alternation, so it
/// is not amplified the way independent per-term rounding would be.
struct PolySource<'a> {
    newton: &'a [C64],
    binomials: Vec<Dd>,
    at: usize,
}

impl<'a> PolySource<'a> {
    fn new(newton: &'a [C64]) -> Self {
        let mut source = PolySource {
            newton,
            binomials: vec![Dd::ZERO; newton.len()],
            at: 0,
        };
        source.restart();
        source
    }
}

impl TermSource for PolySource<'_> {
    fn restart(&mut self) {
        self.binomials.fill(Dd::ZERO);
        self.binomials[0] = Dd::ONE;
        self.at = 0;
    }

    fn next_term(&mut self) -> TermValue {
        let mut re = Dd::ZERO;
        let mut im = Dd::ZERO;
        for (coeff, binom) in self.newton.iter().zip(&self.binomials) {
            re = re + binom.mul_f64(coeff.re);
            im = im + binom.mul_f64(coeff.im);
        }
        if self.at % 2 == 1 {
            re = -re;
            im = -im;
        }
        // Advance C(k, j) -> C(k+1, j) in place.
        for j in (1..self.binomials.len()).rev() {
            self.binomials[j] = self.binomials[j] + self.binomials[j - 1];
        }
        self.at += 1;
        (re, im, 0.0)
    }
}

fn validate_schedule(schedule: &[f64]) -> Result<()> {
    if schedule.len() < MIN_SCHEDULE_NODES {
        return Err(PbError::InvalidArgument(format!(
            "eta schedule needs at least {MIN_SCHEDULE_NODES} nodes, got {}",
            schedule.len()
        )));
    }
    for pair in schedule.windows(2) {
        // partial_cmp is None for NaN, which must be rejected too.
        let ascending = pair[0].partial_cmp(&pair[1]) == Some(std::cmp::Ordering::Less);
        if !ascending {
            return Err(PbError::InvalidArgument(
                "eta schedule must be strictly increasing".into(),
            ));
        }
    }
    let first = schedule[0];
    let last = schedule[schedule.len() - 1];
    if !(first > 0.0 && last < 1.0 && first.is_finite() && last.is_finite()) {
        return Err(PbError::InvalidArgument(
            "eta schedule values must lie strictly inside (0, 1)".into(),
        ));
    }
    Ok(())
}

/// Damp, sum per node, extrapolate to eta = 1.
fn abel_engine(
    source: &mut dyn TermSource,
    schedule: &[f64],
    max_terms: usize,
) -> Result<(C64, SumDiagnostics)> {
    validate_schedule(schedule)?;
    let count = schedule.len();
    let mut xs = Vec::with_capacity(count);
    let mut ys = Vec::with_capacity(count);
    let mut node_noise = Vec::with_capacity(count);
    let mut terms_used = 0usize;

    for &eta in schedule {
        let eta_dd = Dd::from_f64(eta);
        source.restart();
        let mut acc_re = Dd::ZERO;
        let mut acc_im = Dd::ZERO;
        let mut power = Dd::ONE;
        let mut abs_sum = 0.0_f64;
        let mut data_noise = 0.0_f64;
        let mut decayed = 0usize;
        let mut k = 0usize;
        let mut converged = false;
        while k < max_terms {
            let (t_re, t_im, noise) = source.next_term();
            if !(t_re.hi().is_finite() && t_im.hi().is_finite()) {
                return Err(PbError::NonFinite(format!("series term {k}")));
            }
            let d_re = t_re * power;
            let d_im = t_im * power;
            acc_re = acc_re + d_re;
            acc_im = acc_im + d_im;
            let damped_mag = d_re.hi().hypot(d_im.hi());
            abs_sum += damped_mag;
            data_noise += noise * power.hi();
            let scale = acc_re.hi().hypot(acc_im.hi()).max(1.0);
            if damped_mag <= DECAY_THRESHOLD * scale {
                decayed += 1;
            } else {
                decayed = 0;
            }
            k += 1;
            if decayed >= DECAY_RUN && k >= MIN_ENGINE_TERMS {
                converged = true;
                break;
            }
            power = power * eta_dd;
        }
        if !converged {
            return Err(PbError::NotSummable(format!(
                "damped terms at eta = {eta} still above the decay threshold after {max_terms} terms"
            )));
        }
        terms_used = terms_used.max(k);
        xs.push(1.0 - eta);
        ys.push(C64::new(acc_re.to_f64(), acc_im.to_f64()));
        node_noise.push(ARITH_NOISE_EPS * abs_sum + data_noise);
    }

    let value = neville_at_zero(&xs, &ys);
    let reduced = neville_at_zero(&xs[..count - 1], &ys[..count - 1]);
    let residual = (value - reduced).norm();
    let noise_bound: f64 = extrapolation_weights(&xs)
        .iter()
        .zip(&node_noise)
        .map(|(w, s)| w * s)
        .sum();
    Ok((
        value,
        SumDiagnostics {
            terms_used,
            eta_schedule: schedule.to_vec(),
            extrapolation_residual: residual,
            noise_bound,
        },
    ))
}

/// Ordinary pre-test for generator series: scan until the terms are
/// negligible and the partial sums have settled, or give up at the horizon.
fn ordinary_scan<F: Fn(usize) -> C64>(term: &F, horizon: usize) -> Option<RegularizedSum> {
    const WINDOW: usize = 16;
    let mut acc = DdAccC::new();
    let mut partials = [C64::new(0.0, 0.0); WINDOW];
    let mut term_mags = [0.0_f64; WINDOW];
    let mut abs_sum = 0.0_f64;
    let mut max_partial = 1.0_f64;
    for k in 0..horizon {
        let t = term(k);
        if !(t.re.is_finite() && t.im.is_finite()) {
            return None; // let the damped engine surface the error
        }
        acc.add(t);
        abs_sum += t.norm();
        let partial = acc.value();
        max_partial = max_partial.max(partial.norm());
        partials[k % WINDOW] = partial;
        term_mags[k % WINDOW] = t.norm();
        if k + 1 >= WINDOW.max(32) {
            let spread = partials
                .iter()
                .map(|p| (p - partial).norm())
                .fold(0.0, f64::max);
            let tail = term_mags.iter().fold(0.0_f64, |a, &b| a.max(b));
            if tail <= 1e-13 * max_partial && spread <= 1e-11 * max_partial {
                return Some(RegularizedSum {
                    value: partial,
                    method: SumMethod::Ordinary,
                    diagnostics: SumDiagnostics {
                        terms_used: k + 1,
                        eta_schedule: Vec::new(),
                        extrapolation_residual: spread,
                        noise_bound: DATA_NOISE_EPS * abs_sum,
                    },
                });
            }
        }
    }
    None
}

/// Numerical Abel summation of a term generator.
///
/// Ordinarily convergent series are recognized first and returned with
/// `method = Ordinary` (Abel summation is regular, so this is the same
/// value with a cheaper, sharper method). Everything else is damped and
/// extrapolated. Series whose damped tails fail to decay within
/// `options.max_terms` are rejected as not summable.
pub fn abel_numeric<F: Fn(usize) -> C64>(term: F, options: &AbelOptions) -> Result<RegularizedSum> {
    validate_schedule(&options.eta_schedule)?;
    if let Some(found) = ordinary_scan(&term, options.max_terms.min(ORDINARY_SCAN_HORIZON)) {
        return Ok(found);
    }
    let mut source = FnSource { term, at: 0 };
    let (value, diagnostics) = abel_engine(&mut source, &options.eta_schedule, options.max_terms)?;
    Ok(RegularizedSum {
        value,
        method: SumMethod::AbelNumeric,
        diagnostics,
    })
}

/// Numerical Abel summation of a finite slice, zero-extended past the end.
///
/// Each damping node is certified against the truncation before use: an
/// unseen tail of the trailing-window magnitude must not be able to move
/// the damped sum at that node. Nodes the truncation cannot support are
/// dropped from the top of the schedule; when fewer than
/// [`MIN_SCHEDULE_NODES`](self) survive, the slice is refused and the
/// caller is expected to supply a longer truncation instead.
pub fn abel_numeric_slice(terms: &[C64], options: &AbelOptions) -> Result<RegularizedSum> {
    if terms.is_empty() {
        return Err(PbError::InvalidArgument(
            "abel_numeric_slice: empty series".into(),
        ));
    }
    validate_schedule(&options.eta_schedule)?;
    if let Some(bad) = terms.iter().position(|t| !t.re.is_finite() || !t.im.is_finite()) {
        return Err(PbError::NonFinite(format!("series term {bad}")));
    }
    let len = terms.len();
    if len < 2 {
        return Err(PbError::NotSummable(
            "series truncated at 1 term: nothing visible to bound the unseen tail".into(),
        ));
    }
    // The trailing window models the unseen tail; it must never reach back
    // to the head of the series, or a short slice reads its own leading
    // terms as a non-decaying tail.
    let window = (len / 4).max(4).min(len - 1);
    let trailing_mag = terms[len - window..]
        .iter()
        .map(|t| t.norm())
        .fold(0.0, f64::max);
    let node_budget = |eta: f64| -> (f64, f64) {
        let tail_bound = trailing_mag * eta.powi(len as i32) / (1.0 - eta);
        let damped_scale = terms
            .iter()
            .enumerate()
            .map(|(k, t)| t.norm() * eta.powi(k as i32))
            .fold(1.0_f64, f64::max);
        (tail_bound, 1e-10 * damped_scale)
    };
    // A series with live structure at its end fails certification at every
    // node, because the bound scales with its own trailing terms. A series
    // that has fallen to a noise floor merely loses the top of the
    // schedule, where the damping is too weak to suppress even a
    // noise-sized unseen tail, and is summed on the certified prefix.
    let certified = options
        .eta_schedule
        .iter()
        .take_while(|&&eta| {
            let (tail_bound, budget) = node_budget(eta);
            tail_bound <= budget
        })
        .count();
    if certified < MIN_SCHEDULE_NODES {
        let eta = options.eta_schedule[certified];
        let (tail_bound, budget) = node_budget(eta);
        return Err(PbError::NotSummable(format!(
            "series truncated at {len} terms: the unseen damped tail could contribute up to \
             {tail_bound:.3e} at eta = {eta}, above the {budget:.3e} budget"
        )));
    }
    let mut source = SliceSource::new(terms);
    let (value, diagnostics) =
        abel_engine(&mut source, &options.eta_schedule[..certified], options.max_terms)?;
    Ok(RegularizedSum {
        value,
        method: SumMethod::AbelNumeric,
        diagnostics,
    })
}

/// Ordinary test for a finite slice: the trailing-window terms must be
/// negligible and the trailing partial sums settled.
fn slice_ordinary(terms: &[C64]) -> Option<RegularizedSum> {
    let len = terms.len();
    if len < 2 {
        return None;
    }
    let mut acc = DdAccC::new();
    let mut partials = Vec::with_capacity(len);
    let mut abs_sum = 0.0_f64;
    let mut max_partial = 1.0_f64;
    for t in terms {
        acc.add(*t);
        abs_sum += t.norm();
        let partial = acc.value();
        max_partial = max_partial.max(partial.norm());
        partials.push(partial);
    }
    let window = (len / 4).max(4).min(len - 1);
    let last = partials[len - 1];
    let spread = partials[len - window..]
        .iter()
        .map(|p| (p - last).norm())
        .fold(0.0, f64::max);
    let trailing_mag = terms[len - window..]
        .iter()
        .map(|t| t.norm())
        .fold(0.0, f64::max);
    let tol = 1e-12 * max_partial;
    if spread <= tol && trailing_mag <= tol {
        Some(RegularizedSum {
            value: last,
            method: SumMethod::Ordinary,
            diagnostics: SumDiagnostics {
                terms_used: len,
                eta_schedule: Vec::new(),
                extrapolation_residual: spread,
                noise_bound: DATA_NOISE_EPS * abs_sum,
            },
        })
    } else {
        None
    }
}

/// Smallest degree `d` such that the order-`d+1` forward differences of
/// `u_k = (-1)^k t_k` vanish at every offset. "Vanish" is judged per
/// offset against the locally attainable rounding noise: an order-`r`
/// difference mixes `r + 1` consecutive values with binomial weights
/// summing to `2^r`, so data carrying relative noise `delta` can produce
/// differences up to `2^r * delta * max_local |u|` with nothing behind
/// them. A global tolerance would let the huge late terms of a
/// high-degree weight mask genuine low-order structure in the early ones.
/// Requires at least `2d + 4` terms so the vanishing is confirmed on a
/// window, not just fitted.
fn detect_alternating_poly(terms: &[C64], max_degree: usize) -> Option<usize> {
    const DETECT_REL_NOISE: f64 = 1e-12;
    let len = terms.len();
    if len < 4 {
        return None;
    }
    let unalternated: Vec<C64> = terms
        .iter()
        .enumerate()
        .map(|(k, t)| if k % 2 == 0 { *t } else { -*t })
        .collect();
    if unalternated.iter().all(|t| t.norm() == 0.0) {
        return None;
    }
    let magnitudes: Vec<f64> = unalternated.iter().map(|t| t.norm()).collect();
    let cap = max_degree.min(MAX_EXACT_DEGREE).min((len - 4) / 2);
    let mut row = unalternated;
    for degree in 0..=cap {
        let order = degree + 1;
        let next: Vec<C64> = row.windows(2).map(|w| w[1] - w[0]).collect();
        let amplification = 2f64.powi(order as i32) * DETECT_REL_NOISE;
        let vanishes = next.iter().enumerate().all(|(offset, value)| {
            let local_max = magnitudes[offset..=offset + order]
                .iter()
                .fold(0.0_f64, |a, &b| a.max(b));
            value.norm() <= amplification * local_max
        });
        if vanishes {
            return Some(degree);
        }
        row = next;
    }
    None
}

fn rational_to_finite_f64(q: &BigRational, context: &str) -> Result<f64> {
    match q.to_f64() {
        Some(v) if v.is_finite() => Ok(v),
        _ => Err(PbError::NonFinite(format!(
            "{context}: exact value does not fit in f64"
        ))),
    }
}

fn rational_from_f64(v: f64, context: &str) -> Result<BigRational> {
    BigRational::from_float(v)
        .ok_or_else(|| PbError::NonFinite(format!("{context}: non-finite input")))
}

/// Closed-form route for a detected alternating polynomial: fit exact Newton
/// coefficients from the leading terms, evaluate the exact Abel value, and
/// cross-check against a damped evaluation of the fitted polynomial series
/// (generated in double-double). Disagreement beyond the propagated noise
/// and residual budget is reported as an inconsistency, never coerced.
fn abel_exact_route(terms: &[C64], degree: usize) -> Result<RegularizedSum> {
    let mut newton_re = Vec::with_capacity(degree + 1);
    let mut newton_im = Vec::with_capacity(degree + 1);
    for j in 0..=degree {
        let mut a_re = BigRational::zero();
        let mut a_im = BigRational::zero();
        let mut binom = BigInt::one();
        for (i, &term) in terms.iter().enumerate().take(j + 1) {
            // a_j = sum_i (-1)^{j-i} C(j, i) u_i with u_i = (-1)^i t_i
            let u = if i.is_multiple_of(2) { term } else { -term };
            let signed = if (j - i).is_multiple_of(2) {
                BigRational::from_integer(binom.clone())
            } else {
                -BigRational::from_integer(binom.clone())
            };
            a_re += &signed * rational_from_f64(u.re, "newton coefficient")?;
            a_im += signed * rational_from_f64(u.im, "newton coefficient")?;
            if i < j {
                binom = binom * BigInt::from(j - i) / BigInt::from(i + 1);
            }
        }
        newton_re.push(a_re);
        newton_im.push(a_im);
    }

    let basis = newton_basis_abel_values(degree);
    let exact_re: BigRational = newton_re.iter().zip(&basis).map(|(a, b)| a * b).sum();
    let exact_im: BigRational = newton_im.iter().zip(&basis).map(|(a, b)| a * b).sum();
    let value = C64::new(
        rational_to_finite_f64(&exact_re, "abel_exact")?,
        rational_to_finite_f64(&exact_im, "abel_exact")?,
    );

    let coeffs: Vec<C64> = newton_re
        .iter()
        .zip(&newton_im)
        .map(|(re, im)| {
            Ok(C64::new(
                rational_to_finite_f64(re, "newton coefficient")?,
                rational_to_finite_f64(im, "newton coefficient")?,
            ))
        })
        .collect::<Result<_>>()?;
    let schedule = eta_schedule_for_degree(degree);
    let mut source = PolySource::new(&coeffs);
    let (numeric, diagnostics) = abel_engine(&mut source, &schedule, DEFAULT_MAX_TERMS)?;

    let tolerance = 1e-8_f64
        .max(1e-6 * value.norm())
        .max(30.0 * diagnostics.noise_bound)
        .max(10.0 * diagnostics.extrapolation_residual);
    let disagreement = (value - numeric).norm();
    if disagreement > tolerance {
        return Err(PbError::SummationInconsistent(format!(
            "alternating-polynomial closed form {value} disagrees with its damped evaluation \
             {numeric} by {disagreement:.3e} (budget {tolerance:.3e})"
        )));
    }
    Ok(RegularizedSum {
        value,
        method: SumMethod::AbelExact { degree },
        diagnostics,
    })
}

/// Classify a truncated series and sum it with the sharpest applicable
/// method: ordinary when the tail has converged, the exact alternating
/// closed form when the hint applies and the data confirms it, and damped
/// numerical Abel summation otherwise. Series none of the methods can
/// certify are rejected as not summable rather than silently zeroed.
pub fn classify_and_sum(terms: &[C64], hint: Option<&SeriesHint>) -> Result<RegularizedSum> {
    if terms.is_empty() {
        return Err(PbError::InvalidArgument(
            "classify_and_sum: empty series".into(),
        ));
    }
    if let Some(bad) = terms.iter().position(|t| !t.re.is_finite() || !t.im.is_finite()) {
        return Err(PbError::NonFinite(format!("series term {bad}")));
    }
    if terms.iter().all(|t| t.re == 0.0 && t.im == 0.0) {
        return Ok(RegularizedSum {
            value: C64::new(0.0, 0.0),
            method: SumMethod::Ordinary,
            diagnostics: SumDiagnostics {
                terms_used: terms.len(),
                eta_schedule: Vec::new(),
                extrapolation_residual: 0.0,
                noise_bound: 0.0,
            },
        });
    }
    if let Some(found) = slice_ordinary(terms) {
        return Ok(found);
    }
    if let Some(SeriesHint::AlternatingPoly { max_degree }) = hint {
        if let Some(degree) = detect_alternating_poly(terms, *max_degree) {
            return abel_exact_route(terms, degree);
        }
    }
    abel_numeric_slice(terms, &AbelOptions::default())
}
