//! Compensated accumulation and double-double arithmetic.
//!
//! Alternating series damped by powers of `eta` close to 1 are summed with
//! heavy cancellation; a plain `f64` accumulator loses the answer to roundoff
//! long before the analytic truncation error matters. `DdAcc` keeps the
//! running sum as an unevaluated `hi + lo` pair (Neumaier style), which keeps
//! the accumulation error at the `eps^2 * sum(|x|)` level.
//!
//! `Dd` is a full double-double value (~31 significant decimal digits, add
//! and multiply). It exists because compensating the *accumulator* is not
//! enough for the damped sums: each product `t_k * eta^k` committed in plain
//! `f64` carries a rounding error proportional to its own magnitude, and for
//! series whose terms grow polynomially those magnitudes dwarf the final
//! answer. The power ladder and the per-term products therefore run in `Dd`.

use crate::C64;

/// Error-free transformation: `a + b = s + e` exactly, with `s = fl(a + b)`.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// `two_sum` specialisation valid when `|a| >= |b|` (or either is zero).
#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let e = b - (s - a);
    (s, e)
}

/// Error-free transformation: `a * b = p + e` exactly, with `p = fl(a * b)`.
///
/// `f64::mul_add` rounds the fused product once, so the remainder it returns
/// is the exact rounding error of `p`.
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let e = a.mul_add(b, -p);
    (p, e)
}

/// Compensated scalar accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct DdAcc {
    hi: f64,
    lo: f64,
}

impl DdAcc {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let (s, e) = two_sum(self.hi, x);
        self.hi = s;
        self.lo += e;
    }

    /// Collapse to a single double.
    #[inline]
    pub fn value(&self) -> f64 {
        self.hi + self.lo
    }
}

/// Compensated complex accumulator (independent real/imaginary parts).
#[derive(Clone, Copy, Debug, Default)]
pub struct DdAccC {
    re: DdAcc,
    im: DdAcc,
}

impl DdAccC {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: C64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    #[inline]
    pub fn value(&self) -> C64 {
        C64::new(self.re.value(), self.im.value())
    }
}

/// Double-double value: the unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    /// Exact embedding of a double.
    #[inline]
    pub fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn hi(self) -> f64 {
        self.hi
    }

    #[inline]
    pub fn add_f64(self, x: f64) -> Self {
        self + Dd::from_f64(x)
    }

    #[inline]
    pub fn mul_f64(self, x: f64) -> Self {
        self * Dd::from_f64(x)
    }
}

impl std::ops::Neg for Dd {
    type Output = Dd;

    #[inline]
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

/// Full double-double addition (Dekker/Linnainmaa style renormalisation).
impl std::ops::Add for Dd {
    type Output = Dd;

    #[inline]
    fn add(self, other: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, other.hi);
        let (t1, t2) = two_sum(self.lo, other.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2 + t2);
        Dd { hi, lo }
    }
}

impl std::ops::Sub for Dd {
    type Output = Dd;

    #[inline]
    fn sub(self, other: Dd) -> Dd {
        self + (-other)
    }
}

/// Full double-double multiplication.
impl std::ops::Mul for Dd {
    type Output = Dd;

    #[inline]
    fn mul(self, other: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, other.hi);
        let e = e + (self.hi * other.lo + self.lo * other.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}
