//! Operator words on the two-mode ladder algebra and their weak action.
//!
//! An [`OperatorWord`] is a finite sum of scaled products of the four
//! elementary ladder generators (`a1`, `a1d`, `a2`, `a2d`). Words act on
//! coefficient grids weakly by moving over to the test-function slot, where
//! the transpose word expands a basis vector into finitely many neighbors;
//! applying a word of length `L` therefore needs the source grid to carry
//! `L` rows of guard and consumes exactly that much.
//!
//! The module also provides the mixed pseudo-bosonic pair built from the two
//! modes ([`annihilator`], [`creator`]), the associated number words, the
//! non-self-adjoint gain-loss Hamiltonian word, and the family constructors
//! [`build_phi`] / [`build_psi`] that raise the two delta-line vacua.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use crate::coeffs::{delta_diff_coeffs, delta_sum_coeffs, CoeffGrid2D};
use crate::error::{PbError, Result};
use crate::C64;

/// One elementary ladder generator acting on a single mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Generator {
    Lower1,
    Raise1,
    Lower2,
    Raise2,
}

impl Generator {
    /// Formal adjoint of the generator.
    pub fn adjoint(self) -> Self {
        match self {
            Generator::Lower1 => Generator::Raise1,
            Generator::Raise1 => Generator::Lower1,
            Generator::Lower2 => Generator::Raise2,
            Generator::Raise2 => Generator::Lower2,
        }
    }

    /// Action on the product basis vector `e_{n1} ⊗ e_{n2}`.
    ///
    /// Returns the scale factor and the shifted index pair, or `None` when
    /// lowering annihilates the vector.
    pub fn action(self, n1: usize, n2: usize) -> Option<(f64, usize, usize)> {
        match self {
            Generator::Lower1 => (n1 > 0).then(|| ((n1 as f64).sqrt(), n1 - 1, n2)),
            Generator::Raise1 => Some((((n1 + 1) as f64).sqrt(), n1 + 1, n2)),
            Generator::Lower2 => (n2 > 0).then(|| ((n2 as f64).sqrt(), n1, n2 - 1)),
            Generator::Raise2 => Some((((n2 + 1) as f64).sqrt(), n1, n2 + 1)),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Generator::Lower1 => "a1",
            Generator::Raise1 => "a1d",
            Generator::Lower2 => "a2",
            Generator::Raise2 => "a2d",
        }
    }
}

/// One of the two modes of the pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    One,
    Two,
}

impl Mode {
    pub fn index(self) -> usize {
        match self {
            Mode::One => 1,
            Mode::Two => 2,
        }
    }
}

/// Finite linear combination of generator products.
///
/// The empty product is the identity; the empty sum is the zero operator.
/// Products are written left to right in operator order, so the rightmost
/// generator acts first on a vector.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorWord {
    terms: Vec<(C64, Vec<Generator>)>,
}

impl OperatorWord {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn identity() -> Self {
        Self {
            terms: vec![(C64::new(1.0, 0.0), Vec::new())],
        }
    }

    pub fn generator(g: Generator) -> Self {
        Self {
            terms: vec![(C64::new(1.0, 0.0), vec![g])],
        }
    }

    pub fn from_terms(terms: Vec<(C64, Vec<Generator>)>) -> Self {
        Self { terms }
    }

    pub fn terms(&self) -> &[(C64, Vec<Generator>)] {
        &self.terms
    }

    /// Longest product length over all terms. Zero for the zero word and the
    /// identity. This is the number of guard rows weak application consumes.
    pub fn word_length(&self) -> usize {
        self.terms.iter().map(|(_, seq)| seq.len()).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self { terms }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scaled(C64::new(-1.0, 0.0)))
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|(k, seq)| (c * k, seq.clone()))
                .collect(),
        }
    }

    /// Operator product `self * other` (self acts last).
    pub fn mul(&self, other: &Self) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (c, seq) in &self.terms {
            for (d, tail) in &other.terms {
                let mut prod = seq.clone();
                prod.extend(tail.iter().copied());
                terms.push((c * d, prod));
            }
        }
        Self { terms }
    }

    /// Formal adjoint: coefficients conjugate, products reverse, generators flip.
    pub fn adjoint(&self) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|(c, seq)| {
                    let rev: Vec<Generator> =
                        seq.iter().rev().map(|g| g.adjoint()).collect();
                    (c.conj(), rev)
                })
                .collect(),
        }
    }

    /// Transpose with respect to the bilinear basis pairing: products reverse
    /// and generators flip exactly as in [`Self::adjoint`], but coefficients
    /// stay unconjugated. This is the word that drives weak application.
    pub fn transpose(&self) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|(c, seq)| {
                    let rev: Vec<Generator> =
                        seq.iter().rev().map(|g| g.adjoint()).collect();
                    (*c, rev)
                })
                .collect(),
        }
    }

    /// Merge duplicate monomials and drop exact-zero coefficients, returning
    /// terms in a canonical order.
    pub fn normalized(&self) -> Self {
        let mut map: BTreeMap<Vec<Generator>, C64> = BTreeMap::new();
        for (c, seq) in &self.terms {
            *map.entry(seq.clone()).or_insert_with(|| C64::new(0.0, 0.0)) += c;
        }
        let mut terms: Vec<(C64, Vec<Generator>)> = map
            .into_iter()
            .filter(|(_, c)| c.norm() != 0.0)
            .map(|(seq, c)| (c, seq))
            .collect();
        terms.sort_by(|a, b| (a.1.len(), &a.1).cmp(&(b.1.len(), &b.1)));
        Self { terms }
    }

    /// Expand the action on one basis vector into basis components.
    pub fn apply_to_basis(&self, n1: usize, n2: usize) -> BTreeMap<(usize, usize), C64> {
        let mut out: BTreeMap<(usize, usize), C64> = BTreeMap::new();
        for (c, seq) in &self.terms {
            let mut coeff = *c;
            let (mut m1, mut m2) = (n1, n2);
            let mut alive = true;
            for g in seq.iter().rev() {
                match g.action(m1, m2) {
                    Some((f, k1, k2)) => {
                        coeff *= f;
                        m1 = k1;
                        m2 = k2;
                    }
                    None => {
                        alive = false;
                        break;
                    }
                }
            }
            if alive {
                *out.entry((m1, m2)).or_insert_with(|| C64::new(0.0, 0.0)) += coeff;
            }
        }
        out
    }
}

impl fmt::Display for OperatorWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (c, seq)) in self.terms.iter().enumerate() {
            let (sign_str, shown) = if c.im == 0.0 && c.re < 0.0 {
                (if i == 0 { "-" } else { " - " }, C64::new(-c.re, 0.0))
            } else {
                (if i == 0 { "" } else { " + " }, *c)
            };
            let coeff_str = if shown.im == 0.0 {
                format!("{:.4}", shown.re)
            } else if shown.re == 0.0 {
                format!("{:.4}i", shown.im)
            } else {
                format!("({:.4}{:+.4}i)", shown.re, shown.im)
            };
            write!(f, "{sign_str}{coeff_str}")?;
            for g in seq {
                write!(f, "*{}", g.name())?;
            }
        }
        Ok(())
    }
}

/// Annihilator of the pseudo-bosonic pair for the given mode.
///
/// Both kill the difference-line vacuum; their adjoints raise the sum-line one.
pub fn annihilator(mode: Mode) -> OperatorWord {
    let r = C64::new(FRAC_1_SQRT_2, 0.0);
    match mode {
        Mode::One => OperatorWord::from_terms(vec![
            (r, vec![Generator::Lower1]),
            (-r, vec![Generator::Raise2]),
        ]),
        Mode::Two => OperatorWord::from_terms(vec![
            (-r, vec![Generator::Raise1]),
            (r, vec![Generator::Lower2]),
        ]),
    }
}

/// Creator of the pseudo-bosonic pair for the given mode.
///
/// Both raise the difference-line vacuum; their adjoints kill the sum-line one.
pub fn creator(mode: Mode) -> OperatorWord {
    let r = C64::new(FRAC_1_SQRT_2, 0.0);
    match mode {
        Mode::One => OperatorWord::from_terms(vec![
            (r, vec![Generator::Raise1]),
            (r, vec![Generator::Lower2]),
        ]),
        Mode::Two => OperatorWord::from_terms(vec![
            (r, vec![Generator::Lower1]),
            (r, vec![Generator::Raise2]),
        ]),
    }
}

/// Non-self-adjoint number word `creator(mode) * annihilator(mode)`.
pub fn number_word(mode: Mode) -> OperatorWord {
    creator(mode).mul(&annihilator(mode)).normalized()
}

/// Coefficients of the number words on one basis vector.
///
/// `number_word(mode)` (or its adjoint for `dagger = true`) maps
/// `e_{n1} ⊗ e_{n2}` to `diag * e_{n1,n2} + plus * e_{n1+1,n2+1} + minus *
/// e_{n1-1,n2-1}`; the `minus` component is absent when either index is zero
/// but the returned coefficient is the one that would multiply it.
pub fn number_action_coeffs(
    mode: Mode,
    dagger: bool,
    n1: usize,
    n2: usize,
) -> (f64, f64, f64) {
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let diag = match mode {
        Mode::One => 0.5 * (n1f - n2f - 1.0),
        Mode::Two => 0.5 * (n2f - n1f - 1.0),
    };
    let up = 0.5 * ((n1f + 1.0) * (n2f + 1.0)).sqrt();
    let down = 0.5 * (n1f * n2f).sqrt();
    if dagger {
        (diag, up, -down)
    } else {
        (diag, -up, down)
    }
}

/// Parameters of the oscillator-pair Hamiltonian word.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HamiltonianParams {
    /// Real oscillation frequency of the decoupled pair.
    pub frequency: f64,
    /// Magnitude of the gain/loss rate; enters through the imaginary part.
    pub gain_rate: f64,
    /// Effective mass of the decoupled pair.
    pub mass: f64,
}

impl HamiltonianParams {
    pub fn new(frequency: f64, gain_rate: f64, mass: f64) -> Result<Self> {
        if !frequency.is_finite() || !gain_rate.is_finite() || !mass.is_finite() {
            return Err(PbError::NonFinite("Hamiltonian parameters".into()));
        }
        if mass <= 0.0 {
            return Err(PbError::InvalidArgument(format!(
                "mass must be positive, got {mass}"
            )));
        }
        if gain_rate < 0.0 {
            return Err(PbError::InvalidArgument(format!(
                "gain rate magnitude must be nonnegative, got {gain_rate}"
            )));
        }
        Ok(Self {
            frequency,
            gain_rate,
            mass,
        })
    }

    /// Imaginary-part scale `gain_rate / (2 mass)`.
    pub fn damping_scale(&self) -> f64 {
        self.gain_rate / (2.0 * self.mass)
    }

    /// Complex eigenvalue attached to the family labels `(l1, l2)`.
    pub fn eigenvalue(&self, l1: usize, l2: usize) -> C64 {
        let (l1f, l2f) = (l1 as f64, l2 as f64);
        C64::new(
            self.frequency * (l1f - l2f),
            self.damping_scale() * (l1f + l2f + 1.0),
        )
    }
}

/// The gain-loss Hamiltonian word
/// `frequency * (N1 - N2) + i * damping_scale * (N1 + N2 + 1)`.
pub fn hamiltonian_word(params: &HamiltonianParams) -> OperatorWord {
    let n1 = number_word(Mode::One);
    let n2 = number_word(Mode::Two);
    let real_part = n1.sub(&n2).scaled(C64::new(params.frequency, 0.0));
    let imag_part = n1
        .add(&n2)
        .add(&OperatorWord::identity())
        .scaled(C64::new(0.0, params.damping_scale()));
    real_part.add(&imag_part).normalized()
}

/// Weak action of a word on a coefficient grid.
///
/// The grid stores pairings that are conjugate-linear in the basis slot, so
/// expanding the adjoint word on a basis vector and conjugating its
/// coefficients gives the new entries; that conjugated expansion is exactly
/// the [`OperatorWord::transpose`] word:
/// `(X F)[e_m] = F[transpose(X) e_m]` read entrywise off the stored square.
///
/// Consumes `word_length` rows of guard; the trusted region is unchanged.
pub fn weak_apply(word: &OperatorWord, grid: &CoeffGrid2D) -> Result<CoeffGrid2D> {
    let len = word.word_length();
    let guard = grid.guard();
    if len > guard {
        return Err(PbError::GuardExhausted {
            needed: len,
            available: guard,
            trusted: grid.trusted(),
            side: grid.side(),
        });
    }
    let new_side = grid.side() - len;
    let carrier = word.transpose();
    let mut data = vec![C64::new(0.0, 0.0); new_side * new_side];
    for m1 in 0..new_side {
        for m2 in 0..new_side {
            let mut acc = C64::new(0.0, 0.0);
            for (c, seq) in carrier.terms() {
                let mut coeff = *c;
                let (mut k1, mut k2) = (m1, m2);
                let mut alive = true;
                for g in seq.iter().rev() {
                    match g.action(k1, k2) {
                        Some((f, j1, j2)) => {
                            coeff *= f;
                            k1 = j1;
                            k2 = j2;
                        }
                        None => {
                            alive = false;
                            break;
                        }
                    }
                }
                if alive {
                    acc += coeff
                        * grid
                            .get(k1, k2)
                            .expect("shifted index stays inside the stored square");
                }
            }
            data[m1 * new_side + m2] = acc;
        }
    }
    Ok(CoeffGrid2D::with_layout(new_side, grid.trusted(), data))
}

fn inv_sqrt_factorials(k1: usize, k2: usize) -> Result<f64> {
    if k1 > 80 || k2 > 80 {
        return Err(PbError::InvalidArgument(format!(
            "family order ({k1}, {k2}) too large"
        )));
    }
    let mut product = 1.0f64;
    for i in 1..=k1 {
        product *= i as f64;
    }
    for i in 1..=k2 {
        product *= i as f64;
    }
    Ok(product.sqrt().recip())
}

/// Member `(k1, k2)` of the primal family: creators raise the
/// difference-line vacuum, then the square-root factorial normalization is
/// applied. The result keeps `n` trusted rows and `guard` rows of guard.
pub fn build_phi(
    k1: usize,
    k2: usize,
    alpha: C64,
    n: usize,
    guard: usize,
) -> Result<CoeffGrid2D> {
    let mut grid = delta_diff_coeffs(alpha, n, guard + k1 + k2)?;
    let b2 = creator(Mode::Two);
    for _ in 0..k2 {
        grid = weak_apply(&b2, &grid)?;
    }
    let b1 = creator(Mode::One);
    for _ in 0..k1 {
        grid = weak_apply(&b1, &grid)?;
    }
    Ok(grid.scaled(C64::new(inv_sqrt_factorials(k1, k2)?, 0.0)))
}

/// Member `(k1, k2)` of the dual family: adjoint annihilators raise the
/// sum-line vacuum, with the same normalization and guard layout as
/// [`build_phi`].
pub fn build_psi(
    k1: usize,
    k2: usize,
    beta: C64,
    n: usize,
    guard: usize,
) -> Result<CoeffGrid2D> {
    let mut grid = delta_sum_coeffs(beta, n, guard + k1 + k2)?;
    let a2d = annihilator(Mode::Two).adjoint();
    for _ in 0..k2 {
        grid = weak_apply(&a2d, &grid)?;
    }
    let a1d = annihilator(Mode::One).adjoint();
    for _ in 0..k1 {
        grid = weak_apply(&a1d, &grid)?;
    }
    Ok(grid.scaled(C64::new(inv_sqrt_factorials(k1, k2)?, 0.0)))
}

/// Largest trusted-region entry of `(x y - y x - expected) F`.
pub fn commutator_defect(
    x: &OperatorWord,
    y: &OperatorWord,
    expected: C64,
    grid: &CoeffGrid2D,
) -> Result<f64> {
    let comm = x
        .mul(y)
        .sub(&y.mul(x))
        .sub(&OperatorWord::identity().scaled(expected));
    Ok(weak_apply(&comm, grid)?.max_abs_trusted())
}
