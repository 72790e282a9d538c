//! Exact arithmetic over sums of rational multiples of square roots.
//!
//! Every coefficient produced by the ladder words on a basis vector lies in
//! the ring generated by rationals and square roots of integers, so operator
//! identities like the pair commutation relations can be checked with no
//! floating point at all. [`SurdSum`] is that ring; [`ExactWord`] mirrors
//! [`crate::operators::OperatorWord`] with exact coefficients and serves as
//! an independent oracle for the floating-point implementation.

use std::collections::BTreeMap;
use std::fmt;

use num::integer::gcd;
use num::rational::Ratio;
use num::Zero;

use crate::operators::Generator;

type Q = Ratio<i128>;

/// Split `n` as `s^2 * r` with `r` square-free; returns `(s, r)`.
fn square_free_split(n: u64) -> (u64, u64) {
    let mut s = 1u64;
    let mut r = 1u64;
    let mut m = n;
    let mut p = 2u64;
    while p * p <= m {
        if m % p == 0 {
            let mut count = 0u32;
            while m % p == 0 {
                m /= p;
                count += 1;
            }
            s *= p.pow(count / 2);
            if count % 2 == 1 {
                r *= p;
            }
        }
        p += 1;
    }
    (s, r * m)
}

/// Finite sum `Σ q_r √r` with square-free radicands `r` and rational `q_r`.
///
/// The radicands are linearly independent over the rationals, so two sums are
/// equal exactly when their maps coincide; the representation keeps no zero
/// coefficients, making `==` a complete equality test.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SurdSum {
    parts: BTreeMap<u64, Q>,
}

impl SurdSum {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_ratio(q: Q) -> Self {
        let mut parts = BTreeMap::new();
        if !q.is_zero() {
            parts.insert(1, q);
        }
        Self { parts }
    }

    pub fn from_integer(n: i128) -> Self {
        Self::from_ratio(Q::from_integer(n))
    }

    /// The exact value `√n`.
    pub fn sqrt_of(n: u64) -> Self {
        if n == 0 {
            return Self::zero();
        }
        let (s, r) = square_free_split(n);
        let mut parts = BTreeMap::new();
        parts.insert(r, Q::from_integer(s as i128));
        Self { parts }
    }

    /// The exact value `1/√n` (`n > 0`), i.e. `√n / n`.
    pub fn inv_sqrt_of(n: u64) -> Self {
        assert!(n > 0, "inverse square root of zero");
        let (s, r) = square_free_split(n);
        // √n = s√r, so 1/√n = √r / (s r).
        let mut parts = BTreeMap::new();
        parts.insert(r, Q::new(1, (s as i128) * (r as i128)));
        Self { parts }
    }

    pub fn is_zero(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut parts = self.parts.clone();
        for (r, q) in &other.parts {
            let entry = parts.entry(*r).or_insert_with(Q::zero);
            *entry += q;
            if entry.is_zero() {
                parts.remove(r);
            }
        }
        Self { parts }
    }

    pub fn neg(&self) -> Self {
        Self {
            parts: self.parts.iter().map(|(r, q)| (*r, -q)).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut parts: BTreeMap<u64, Q> = BTreeMap::new();
        for (r1, q1) in &self.parts {
            for (r2, q2) in &other.parts {
                // √r1 √r2 = g √((r1/g)(r2/g)) with g = gcd: both factors stay
                // square-free and coprime, so the product radicand is square-free.
                let g = gcd(*r1, *r2);
                let rad = (r1 / g) * (r2 / g);
                let coeff = q1 * q2 * Q::from_integer(g as i128);
                let entry = parts.entry(rad).or_insert_with(Q::zero);
                *entry += coeff;
                if entry.is_zero() {
                    parts.remove(&rad);
                }
            }
        }
        Self { parts }
    }

    pub fn scale(&self, q: Q) -> Self {
        if q.is_zero() {
            return Self::zero();
        }
        Self {
            parts: self.parts.iter().map(|(r, c)| (*r, c * q)).collect(),
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.parts
            .iter()
            .map(|(r, q)| {
                let num = *q.numer() as f64;
                let den = *q.denom() as f64;
                num / den * (*r as f64).sqrt()
            })
            .sum()
    }
}

impl fmt::Display for SurdSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.parts.is_empty() {
            return write!(f, "0");
        }
        for (i, (r, q)) in self.parts.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            if *r == 1 {
                write!(f, "{q}")?;
            } else {
                write!(f, "{q}*sqrt({r})")?;
            }
        }
        Ok(())
    }
}

/// Operator word with exact [`SurdSum`] coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactWord {
    terms: Vec<(SurdSum, Vec<Generator>)>,
}

impl ExactWord {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn identity() -> Self {
        Self {
            terms: vec![(SurdSum::from_integer(1), Vec::new())],
        }
    }

    pub fn from_terms(terms: Vec<(SurdSum, Vec<Generator>)>) -> Self {
        Self { terms }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self { terms }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let minus_one = SurdSum::from_integer(-1);
        let mut terms = self.terms.clone();
        terms.extend(
            other
                .terms
                .iter()
                .map(|(c, seq)| (c.mul(&minus_one), seq.clone())),
        );
        Self { terms }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (c, seq) in &self.terms {
            for (d, tail) in &other.terms {
                let mut prod = seq.clone();
                prod.extend(tail.iter().copied());
                terms.push((c.mul(d), prod));
            }
        }
        Self { terms }
    }

    /// Exact expansion of the action on one basis vector.
    pub fn apply_to_basis(&self, n1: usize, n2: usize) -> BTreeMap<(usize, usize), SurdSum> {
        let mut out: BTreeMap<(usize, usize), SurdSum> = BTreeMap::new();
        for (c, seq) in &self.terms {
            let mut coeff = c.clone();
            let (mut m1, mut m2) = (n1, n2);
            let mut alive = true;
            for g in seq.iter().rev() {
                let (factor_sq, k1, k2) = match g {
                    Generator::Lower1 if m1 == 0 => {
                        alive = false;
                        break;
                    }
                    Generator::Lower2 if m2 == 0 => {
                        alive = false;
                        break;
                    }
                    Generator::Lower1 => (m1 as u64, m1 - 1, m2),
                    Generator::Raise1 => ((m1 + 1) as u64, m1 + 1, m2),
                    Generator::Lower2 => (m2 as u64, m1, m2 - 1),
                    Generator::Raise2 => ((m2 + 1) as u64, m1, m2 + 1),
                };
                coeff = coeff.mul(&SurdSum::sqrt_of(factor_sq));
                m1 = k1;
                m2 = k2;
            }
            if alive && !coeff.is_zero() {
                let entry = out.entry((m1, m2)).or_insert_with(SurdSum::zero);
                *entry = entry.add(&coeff);
            }
        }
        out.retain(|_, v| !v.is_zero());
        out
    }
}

/// Exact counterpart of [`crate::operators::annihilator`].
pub fn exact_annihilator(mode: crate::operators::Mode) -> ExactWord {
    let half_rt2 = SurdSum::inv_sqrt_of(2);
    match mode {
        crate::operators::Mode::One => ExactWord::from_terms(vec![
            (half_rt2.clone(), vec![Generator::Lower1]),
            (half_rt2.neg(), vec![Generator::Raise2]),
        ]),
        crate::operators::Mode::Two => ExactWord::from_terms(vec![
            (half_rt2.neg(), vec![Generator::Raise1]),
            (half_rt2, vec![Generator::Lower2]),
        ]),
    }
}

/// Exact counterpart of [`crate::operators::creator`].
pub fn exact_creator(mode: crate::operators::Mode) -> ExactWord {
    let half_rt2 = SurdSum::inv_sqrt_of(2);
    match mode {
        crate::operators::Mode::One => ExactWord::from_terms(vec![
            (half_rt2.clone(), vec![Generator::Raise1]),
            (half_rt2, vec![Generator::Lower2]),
        ]),
        crate::operators::Mode::Two => ExactWord::from_terms(vec![
            (half_rt2.clone(), vec![Generator::Lower1]),
            (half_rt2, vec![Generator::Raise2]),
        ]),
    }
}
