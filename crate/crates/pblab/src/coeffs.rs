//! Coefficient grids over the two-mode Hermite basis.
//!
//! A [`CoeffGrid2D`] stores the pairings `F[e_{n1} ⊗ e_{n2}]` of a
//! distribution-like object `F` against the product basis, for all indices
//! `n1, n2 < trusted + guard`. Every stored entry is an exact pairing value;
//! the split into a trusted region and a guard band is bookkeeping for weak
//! operator application, which can only reconstruct entries whose shifted
//! sources were stored. Applying a word of length `L` consumes `L` rows of
//! guard and leaves the trusted region intact.
//!
//! Two closed-form constructors build the delta-line vacua of the gain–loss
//! pair, and [`project_function`] builds grids for honest functions by 2-D
//! Gauss–Hermite quadrature.

use crate::dd::DdAcc;
use crate::error::{PbError, Result};
use crate::hermite::{self, GaussHermiteRule, OscillatorParams, Precision};
use crate::C64;
use serde::{Deserialize, Serialize};

/// Dense complex grid of basis pairings with trusted/guard bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffGrid2D {
    side: usize,
    trusted: usize,
    data: Vec<C64>,
}

impl CoeffGrid2D {
    /// All-zero grid with the given trusted size and guard band.
    pub fn zeros(trusted: usize, guard: usize) -> Result<Self> {
        if trusted == 0 {
            return Err(PbError::InvalidArgument(
                "trusted size must be at least 1".into(),
            ));
        }
        let side = trusted + guard;
        if side > 4096 {
            return Err(PbError::InvalidArgument(format!(
                "grid side {side} too large (limit 4096)"
            )));
        }
        Ok(Self {
            side,
            trusted,
            data: vec![C64::new(0.0, 0.0); side * side],
        })
    }

    /// Total stored side length (`trusted + guard`).
    pub fn side(&self) -> usize {
        self.side
    }

    /// Side length of the region whose entries survive further operator words.
    pub fn trusted(&self) -> usize {
        self.trusted
    }

    /// Remaining guard band.
    pub fn guard(&self) -> usize {
        self.side - self.trusted
    }

    /// Stored pairing at `(n1, n2)`; `None` outside the stored square.
    pub fn get(&self, n1: usize, n2: usize) -> Option<C64> {
        if n1 < self.side && n2 < self.side {
            Some(self.data[n1 * self.side + n2])
        } else {
            None
        }
    }

    /// Stored pairing, reading indices outside the square as zero.
    ///
    /// Only meaningful for grids of compactly supported objects; weak
    /// application never uses this.
    pub fn get_or_zero(&self, n1: usize, n2: usize) -> C64 {
        self.get(n1, n2).unwrap_or_else(|| C64::new(0.0, 0.0))
    }

    pub fn set(&mut self, n1: usize, n2: usize, value: C64) {
        assert!(n1 < self.side && n2 < self.side, "index outside stored grid");
        self.data[n1 * self.side + n2] = value;
    }

    /// Rebrand the split between trusted region and guard. Internal to weak
    /// application and family construction.
    pub(crate) fn with_layout(side: usize, trusted: usize, data: Vec<C64>) -> Self {
        debug_assert_eq!(data.len(), side * side);
        debug_assert!(trusted <= side);
        Self {
            side,
            trusted,
            data,
        }
    }

    /// `a * self + b * other`, restricted to the common stored square.
    pub fn linear_comb(&self, a: C64, other: &Self, b: C64) -> Result<Self> {
        let side = self.side.min(other.side);
        let trusted = self.trusted.min(other.trusted).min(side);
        if trusted == 0 {
            return Err(PbError::InvalidArgument(
                "linear combination has empty trusted region".into(),
            ));
        }
        let mut out = Self::with_layout(side, trusted, vec![C64::new(0.0, 0.0); side * side]);
        for n1 in 0..side {
            for n2 in 0..side {
                let v = a * self.data[n1 * self.side + n2] + b * other.data[n1 * other.side + n2];
                out.data[n1 * side + n2] = v;
            }
        }
        Ok(out)
    }

    /// Scalar multiple of the grid.
    pub fn scaled(&self, c: C64) -> Self {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= c;
        }
        out
    }

    /// Largest entry magnitude over the trusted region.
    pub fn max_abs_trusted(&self) -> f64 {
        let mut best = 0.0f64;
        for n1 in 0..self.trusted {
            for n2 in 0..self.trusted {
                best = best.max(self.data[n1 * self.side + n2].norm());
            }
        }
        best
    }

    /// Per-shell maximum entry magnitude over the trusted region
    /// (shell `s` collects indices with `n1 + n2 = s`). Growth diagnostic.
    pub fn shell_max_abs(&self) -> Vec<f64> {
        let t = self.trusted;
        let mut out = vec![0.0f64; 2 * t.saturating_sub(1) + 1];
        for n1 in 0..t {
            for n2 in 0..t {
                let s = n1 + n2;
                out[s] = out[s].max(self.data[n1 * self.side + n2].norm());
            }
        }
        out
    }

    /// Serialize the full stored square to the interchange JSON document.
    pub fn to_json_string(&self) -> Result<String> {
        let doc = GridDoc {
            n: self.trusted,
            g: self.guard(),
            re: self.data.iter().map(|z| z.re).collect(),
            im: self.data.iter().map(|z| z.im).collect(),
        };
        serde_json::to_string(&doc).map_err(|e| PbError::Serialization(e.to_string()))
    }

    /// Parse the interchange JSON document.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: GridDoc =
            serde_json::from_str(text).map_err(|e| PbError::Serialization(e.to_string()))?;
        let side = doc.n + doc.g;
        if doc.n == 0 {
            return Err(PbError::Serialization("trusted size n must be >= 1".into()));
        }
        if doc.re.len() != side * side || doc.im.len() != side * side {
            return Err(PbError::Serialization(format!(
                "re/im arrays must have length (n+g)^2 = {}, got {} and {}",
                side * side,
                doc.re.len(),
                doc.im.len()
            )));
        }
        let mut data = Vec::with_capacity(side * side);
        for (re, im) in doc.re.iter().zip(&doc.im) {
            if !re.is_finite() || !im.is_finite() {
                return Err(PbError::Serialization("non-finite grid entry".into()));
            }
            data.push(C64::new(*re, *im));
        }
        Ok(Self::with_layout(side, doc.n, data))
    }

    /// Write the trusted region as CSV rows `n1,n2,re,im`.
    pub fn write_csv_trusted<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "n1,n2,re,im")?;
        for n1 in 0..self.trusted {
            for n2 in 0..self.trusted {
                let z = self.data[n1 * self.side + n2];
                writeln!(out, "{},{},{:e},{:e}", n1, n2, z.re, z.im)?;
            }
        }
        Ok(())
    }
}

/// On-disk JSON shape: `{n, g, re, im}` with row-major `(n+g)^2` arrays.
#[derive(Serialize, Deserialize)]
struct GridDoc {
    n: usize,
    g: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

/// Normalization constants of the dual vacuum pair.
///
/// Biorthonormality of the two ladder families requires `alpha * conj(beta) = 2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalizationPair {
    pub alpha: C64,
    pub beta: C64,
}

impl NormalizationPair {
    /// Symmetric real choice `alpha = beta = sqrt(2)`, giving `alpha*conj(beta) = 2`.
    pub fn biorthonormal() -> Self {
        let r = std::f64::consts::SQRT_2;
        Self {
            alpha: C64::new(r, 0.0),
            beta: C64::new(r, 0.0),
        }
    }

    /// Symmetric split of an arbitrary positive pairing product `alpha*conj(beta) = ab`.
    pub fn with_product(ab: f64) -> Result<Self> {
        if !ab.is_finite() || ab <= 0.0 {
            return Err(PbError::InvalidArgument(format!(
                "pairing product must be positive and finite, got {ab}"
            )));
        }
        let r = ab.sqrt();
        Ok(Self {
            alpha: C64::new(r, 0.0),
            beta: C64::new(r, 0.0),
        })
    }

    pub fn new(alpha: C64, beta: C64) -> Result<Self> {
        if !alpha.is_finite() || !beta.is_finite() {
            return Err(PbError::NonFinite("normalization constants".into()));
        }
        if alpha.norm() == 0.0 || beta.norm() == 0.0 {
            return Err(PbError::InvalidArgument(
                "normalization constants must be nonzero".into(),
            ));
        }
        Ok(Self { alpha, beta })
    }

    /// The pairing product `alpha * conj(beta)`.
    pub fn pair_product(&self) -> C64 {
        self.alpha * self.beta.conj()
    }
}

/// Vacuum supported on the difference line: pairings `alpha * delta_{n1,n2}`.
pub fn delta_diff_coeffs(alpha: C64, n: usize, guard: usize) -> Result<CoeffGrid2D> {
    if !alpha.is_finite() {
        return Err(PbError::NonFinite("delta_diff alpha".into()));
    }
    let mut grid = CoeffGrid2D::zeros(n, guard)?;
    for k in 0..grid.side() {
        grid.set(k, k, alpha);
    }
    Ok(grid)
}

/// Vacuum supported on the sum line: pairings `beta * (-1)^{n2} * delta_{n1,n2}`.
pub fn delta_sum_coeffs(beta: C64, n: usize, guard: usize) -> Result<CoeffGrid2D> {
    if !beta.is_finite() {
        return Err(PbError::NonFinite("delta_sum beta".into()));
    }
    let mut grid = CoeffGrid2D::zeros(n, guard)?;
    for k in 0..grid.side() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        grid.set(k, k, beta * sign);
    }
    Ok(grid)
}

/// Project a real two-variable function onto the basis by tensor quadrature.
///
/// All entries with `n1, n2 < n + guard` are filled, so the result supports
/// operator words up to length `guard` exactly like the vacuum constructors.
pub fn project_function<F>(
    f: F,
    n: usize,
    guard: usize,
    params: &OscillatorParams,
) -> Result<CoeffGrid2D>
where
    F: Fn(f64, f64) -> f64,
{
    let side = n + guard;
    project_function_with(f, n, guard, params, 2 * side + 16, Precision::Double)
}

/// [`project_function`] with explicit quadrature order and accumulation mode.
pub fn project_function_with<F>(
    f: F,
    n: usize,
    guard: usize,
    params: &OscillatorParams,
    order: usize,
    precision: Precision,
) -> Result<CoeffGrid2D>
where
    F: Fn(f64, f64) -> f64,
{
    let mut grid = CoeffGrid2D::zeros(n, guard)?;
    let side = grid.side();
    let max_index = side - 1;
    let needed = max_index + 8;
    if order < needed {
        return Err(PbError::QuadratureOrder {
            order,
            n: max_index,
            needed,
        });
    }
    let rule = GaussHermiteRule::new(order)?;
    let lambda = params.scale();
    let inv_sqrt_lambda = lambda.sqrt().recip();

    // Table of basis values at scaled nodes: basis_vals[i][m] = e_m(t_i / sqrt(lambda)).
    let mut basis_vals = Vec::with_capacity(order);
    for &t in rule.nodes() {
        let x = t * inv_sqrt_lambda;
        let col: Vec<f64> = (0..side)
            .map(|m| hermite::hermite_eval(m, x, params))
            .collect::<Result<_>>()?;
        basis_vals.push(col);
    }
    let mut f_vals = vec![vec![0.0f64; order]; order];
    for (row, &ti) in f_vals.iter_mut().zip(rule.nodes()) {
        for (slot, &tj) in row.iter_mut().zip(rule.nodes()) {
            let v = f(ti * inv_sqrt_lambda, tj * inv_sqrt_lambda);
            if !v.is_finite() {
                return Err(PbError::NonFinite(
                    "projected function value at quadrature node".into(),
                ));
            }
            *slot = v;
        }
    }

    // The Gaussian of the weight is absorbed by the basis values themselves:
    // integral = sum_ij v_i v_j e_{n1}(x_i) e_{n2}(x_j) f(x_i, x_j) / lambda.
    let v = rule.scaled_weights();
    let inv_lambda = lambda.recip();
    for n1 in 0..side {
        for n2 in 0..side {
            let val = match precision {
                Precision::Double => {
                    let mut sum = 0.0;
                    for i in 0..order {
                        let row = v[i] * basis_vals[i][n1];
                        for j in 0..order {
                            sum += row * v[j] * basis_vals[j][n2] * f_vals[i][j];
                        }
                    }
                    sum
                }
                Precision::Extended => {
                    let mut acc = DdAcc::new();
                    for i in 0..order {
                        let row = v[i] * basis_vals[i][n1];
                        for j in 0..order {
                            acc.add(row * v[j] * basis_vals[j][n2] * f_vals[i][j]);
                        }
                    }
                    acc.value()
                }
            };
            grid.set(n1, n2, C64::new(val * inv_lambda, 0.0));
        }
    }
    Ok(grid)
}
