//! Regularized sesquilinear pairing of coefficient grids.
//!
//! The pairing of two grids is the series `sum_n conj(F[e_n]) * G[e_n]` over
//! the common trusted square, grouped along anti-diagonal shells
//! `s = n1 + n2` and handed to the summation engine: genuinely finite series
//! sum ordinarily, the ladder-family products produce alternating
//! polynomial-weight series with exact Abel values, and anything the engine
//! cannot certify is refused rather than approximated.
//!
//! On top of the product sit the identity checks: biorthonormality of the
//! primal and dual families, antilinearity in the first slot and linearity
//! in the second, positivity of self-products, eigenvalue transfer through
//! the pairing, and the adjoint-pairing identity evaluated over independent
//! routes (operator words vs direct index shifts).
//!
//! Shell grouping is the one summation order used everywhere; for the
//! diagonally supported families every shell holds a single entry, so the
//! shell series literally is the 1-D family series and the grouping cannot
//! reorder anything. Families supported on one index line populate only one
//! shell parity; the interleaved zero shells are removed before
//! classification (a zero-dilution the damped summation is invariant
//! under), restoring the 1-D index the alternating closed forms need.

use crate::coeffs::{CoeffGrid2D, NormalizationPair};
use crate::error::{PbError, Result};
use crate::operators::{
    build_phi, build_psi, number_action_coeffs, number_word, weak_apply, Mode,
};
use crate::summation::{
    classify_and_sum, RegularizedSum, SeriesHint, SumMethod, MAX_EXACT_DEGREE,
};
use crate::C64;

/// Trusted size used for matrix entries built internally by
/// [`biorthonormality_matrix`]; large enough to confirm polynomial weights
/// up to the exact-degree cap on a full window.
const MATRIX_TRUSTED: usize = 32;

/// Below this many classified shell terms a failed classification is
/// reported as insufficient truncation rather than non-summability: the
/// window is too short to confirm any polynomial weight of family order.
const MIN_SHELLS_FOR_CLASSIFICATION: usize = 16;

/// Relative threshold under which a shell is treated as empty when deciding
/// whether the sequence lives on a single parity.
const COMPACTION_REL_TOL: f64 = 1e-14;

/// Which shell parity survived compaction before classification.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShellCompaction {
    /// Both parities carry mass; the sequence was classified as-is.
    None,
    /// Only even shells carry mass; odd shells were dropped.
    EvenShells,
    /// Only odd shells carry mass; even shells were dropped.
    OddShells,
}

impl ShellCompaction {
    /// Stable lower-case tag for reports.
    pub fn label(&self) -> &'static str {
        match self {
            ShellCompaction::None => "none",
            ShellCompaction::EvenShells => "even",
            ShellCompaction::OddShells => "odd",
        }
    }
}

/// Value and provenance of one grid pairing.
#[derive(Clone, Debug)]
pub struct PairingResult {
    /// The regularized value; always equal to `sum.value`.
    pub value: C64,
    /// Full summation outcome (method tag and diagnostics).
    pub sum: RegularizedSum,
    /// Every shell with a nonzero contribution inside the trusted square,
    /// as `(shell index, contribution)`.
    pub shell_profile: Vec<(usize, C64)>,
    /// Parity compaction applied before classification.
    pub compaction: ShellCompaction,
}

/// Anti-diagonal shell sums `t_s = sum_{n1+n2=s} conj(F[n1,n2]) G[n1,n2]`
/// over the complete shells of the common stored square.
///
/// Every stored entry is an exact pairing value (the guard band is operator
/// headroom, not lower-quality data), so a shell is usable exactly when all
/// of its lattice points are stored in both grids: `s <= min(side) - 1`.
/// Larger shells would mix stored entries with unknown ones and are never
/// formed; cutting earlier (say at the trusted square) would instead leave
/// the last shells of off-diagonally supported pairs incomplete, planting
/// spurious zeros at the end of an otherwise clean polynomial-weight
/// series.
///
/// Both grids are read through the same global basis convention; the caller
/// is responsible for not mixing grids built for different oscillator
/// parameters.
pub fn shell_terms(f: &CoeffGrid2D, g: &CoeffGrid2D) -> Vec<C64> {
    let side = f.side().min(g.side());
    let mut shells = vec![C64::new(0.0, 0.0); side];
    for (s, shell) in shells.iter_mut().enumerate() {
        let mut acc = C64::new(0.0, 0.0);
        for n1 in 0..=s {
            let n2 = s - n1;
            let f_entry = f.get(n1, n2).expect("complete shell is stored");
            let g_entry = g.get(n1, n2).expect("complete shell is stored");
            acc += f_entry.conj() * g_entry;
        }
        *shell = acc;
    }
    shells
}

/// Drop the empty parity of a shell sequence, if one parity is empty.
///
/// Entries with magnitude at most `1e-14 * max |t_s|` count as empty. The
/// value of the damped sum is unchanged by removing interleaved zeros (the
/// damping variable is squared), while classification regains the plain
/// 1-D index the closed forms are written in.
pub fn compact_shells(shells: &[C64]) -> (Vec<C64>, ShellCompaction) {
    let max_abs = shells.iter().map(|t| t.norm()).fold(0.0_f64, f64::max);
    if max_abs == 0.0 {
        return (shells.to_vec(), ShellCompaction::None);
    }
    let tol = COMPACTION_REL_TOL * max_abs;
    let even_live = shells.iter().step_by(2).any(|t| t.norm() > tol);
    let odd_live = shells.iter().skip(1).step_by(2).any(|t| t.norm() > tol);
    match (even_live, odd_live) {
        (true, false) => (
            shells.iter().step_by(2).copied().collect(),
            ShellCompaction::EvenShells,
        ),
        (false, true) => (
            shells.iter().skip(1).step_by(2).copied().collect(),
            ShellCompaction::OddShells,
        ),
        _ => (shells.to_vec(), ShellCompaction::None),
    }
}

/// Regularized pairing of two grids.
///
/// Shell terms over the common stored square are compacted and classified;
/// the alternating-polynomial hint is always passed, so family products
/// take the exact closed-form route. A classification failure on a window
/// too short to confirm any family-order weight is reported as insufficient
/// truncation carrying the largest shell that was available.
pub fn pair_grids(f: &CoeffGrid2D, g: &CoeffGrid2D) -> Result<PairingResult> {
    let shells = shell_terms(f, g);
    let largest_shell = shells.len() - 1;
    let (compacted, compaction) = compact_shells(&shells);
    let hint = SeriesHint::AlternatingPoly {
        max_degree: MAX_EXACT_DEGREE,
    };
    let sum = classify_and_sum(&compacted, Some(&hint)).map_err(|e| match e {
        PbError::NotSummable(detail) if compacted.len() < MIN_SHELLS_FOR_CLASSIFICATION => {
            PbError::InsufficientTruncation {
                largest_shell,
                detail,
            }
        }
        other => other,
    })?;
    let shell_profile = shells
        .iter()
        .enumerate()
        .filter(|(_, t)| t.norm() > 0.0)
        .map(|(s, t)| (s, *t))
        .collect();
    Ok(PairingResult {
        value: sum.value,
        sum,
        shell_profile,
        compaction,
    })
}

/// Normalization and grid sizing shared by the family-level checks.
#[derive(Clone, Copy, Debug)]
pub struct FamilySetup {
    /// Vacuum normalization constants of the two families.
    pub norm: NormalizationPair,
    /// Trusted size of the built grids (shell window length).
    pub trusted: usize,
    /// Guard band kept beyond family construction, consumed by the
    /// occupation words the checks apply.
    pub guard: usize,
}

impl Default for FamilySetup {
    fn default() -> Self {
        Self {
            norm: NormalizationPair::biorthonormal(),
            trusted: 32,
            guard: 4,
        }
    }
}

impl FamilySetup {
    /// Dual family member (the conjugate-side grid of the pairing).
    pub fn dual_member(&self, label: (usize, usize)) -> Result<CoeffGrid2D> {
        build_psi(label.0, label.1, self.norm.beta, self.trusted, self.guard)
    }

    /// Primal family member (the linear-side grid of the pairing).
    pub fn primal_member(&self, label: (usize, usize)) -> Result<CoeffGrid2D> {
        build_phi(label.0, label.1, self.norm.alpha, self.trusted, self.guard)
    }
}

/// One entry of the biorthonormality matrix, with its per-entry outcome.
#[derive(Debug)]
pub struct PairingOutcome {
    /// Label of the dual-family member in the conjugate slot.
    pub bra: (usize, usize),
    /// Label of the primal-family member in the linear slot.
    pub ket: (usize, usize),
    /// The pairing, or the error that entry produced.
    pub result: Result<PairingResult>,
}

/// Pairings of every dual member against every primal member with
/// component labels up to `kmax`.
#[derive(Debug)]
pub struct BiorthonormalityMatrix {
    kmax: usize,
    labels: Vec<(usize, usize)>,
    outcomes: Vec<PairingOutcome>,
}

impl BiorthonormalityMatrix {
    /// Largest label component.
    pub fn kmax(&self) -> usize {
        self.kmax
    }

    /// Number of rows (= columns) of the matrix.
    pub fn dimension(&self) -> usize {
        self.labels.len()
    }

    /// Row/column labels in matrix order (lexicographic in `(k1, k2)`).
    pub fn labels(&self) -> &[(usize, usize)] {
        &self.labels
    }

    /// All entries in row-major order.
    pub fn outcomes(&self) -> &[PairingOutcome] {
        &self.outcomes
    }

    /// Entry for a specific label pair, if the labels are in range.
    pub fn entry(&self, bra: (usize, usize), ket: (usize, usize)) -> Option<&PairingOutcome> {
        let row = self.labels.iter().position(|&l| l == bra)?;
        let col = self.labels.iter().position(|&l| l == ket)?;
        self.outcomes.get(row * self.labels.len() + col)
    }
}

/// Matrix of all family pairings with labels up to `kmax` per component.
///
/// With `alpha * conj(beta) = 2` the exact matrix is the identity; each
/// entry carries its own outcome so a failed classification in one entry
/// does not discard the rest.
pub fn biorthonormality_matrix(
    kmax: usize,
    alpha: C64,
    beta: C64,
) -> Result<BiorthonormalityMatrix> {
    if kmax > 6 {
        return Err(PbError::InvalidArgument(format!(
            "kmax {kmax} too large: weight degrees beyond the exact cap {MAX_EXACT_DEGREE}"
        )));
    }
    let norm = NormalizationPair::new(alpha, beta)?;
    let setup = FamilySetup {
        norm,
        trusted: MATRIX_TRUSTED,
        guard: 2 * kmax,
    };
    let labels: Vec<(usize, usize)> = (0..=kmax)
        .flat_map(|k1| (0..=kmax).map(move |k2| (k1, k2)))
        .collect();
    let duals: Vec<CoeffGrid2D> = labels
        .iter()
        .map(|&l| setup.dual_member(l))
        .collect::<Result<_>>()?;
    let primals: Vec<CoeffGrid2D> = labels
        .iter()
        .map(|&l| setup.primal_member(l))
        .collect::<Result<_>>()?;
    let mut outcomes = Vec::with_capacity(labels.len() * labels.len());
    for (i, &bra) in labels.iter().enumerate() {
        for (j, &ket) in labels.iter().enumerate() {
            outcomes.push(PairingOutcome {
                bra,
                ket,
                result: pair_grids(&duals[i], &primals[j]),
            });
        }
    }
    Ok(BiorthonormalityMatrix {
        kmax,
        labels,
        outcomes,
    })
}

/// `|<F,G> - conj(<G,F>)|`, both sides summed with the same shell order.
pub fn check_conjugate_symmetry(f: &CoeffGrid2D, g: &CoeffGrid2D) -> Result<f64> {
    let fg = pair_grids(f, g)?;
    let gf = pair_grids(g, f)?;
    Ok((fg.value - gf.value.conj()).norm())
}

/// `|<F, aG + bL> - a<F,G> - b<F,L>|`.
///
/// All three products must certify under the same summation method; mixing
/// regimes would compare values whose regularizations are not known to be
/// compatible.
pub fn check_linearity(
    f: &CoeffGrid2D,
    g: &CoeffGrid2D,
    l: &CoeffGrid2D,
    a: C64,
    b: C64,
) -> Result<f64> {
    let combo = g.linear_comb(a, l, b)?;
    let whole = pair_grids(f, &combo)?;
    let part_g = pair_grids(f, g)?;
    let part_l = pair_grids(f, l)?;
    let labels = [
        whole.sum.method.label(),
        part_g.sum.method.label(),
        part_l.sum.method.label(),
    ];
    if labels[1] != labels[0] || labels[2] != labels[0] {
        return Err(PbError::InvalidArgument(format!(
            "linearity check needs one summation method across the three products, got \
             {} / {} / {}",
            labels[0], labels[1], labels[2]
        )));
    }
    Ok((whole.value - a * part_g.value - b * part_l.value).norm())
}

/// Outcome of a self-pairing positivity check.
#[derive(Clone, Debug)]
pub enum SelfPairing {
    /// The self-product summed ordinarily; `value` is its (real) sum.
    Summable {
        /// The ordinary sum of `|F[e_n]|^2`.
        value: f64,
        /// Whether the sum is nonnegative (always expected).
        nonneg: bool,
    },
    /// Ordinary summation could not certify the series within the trusted
    /// region; self-products are never Abel-forced.
    NotCertified {
        /// Human-readable reason.
        detail: String,
    },
}

/// Self-pairing `<F,F>` with ordinary summation only.
///
/// The terms `|F[e_n]|^2` are nonnegative, so a damped regularization can
/// only hide divergence; anything short of ordinary convergence inside the
/// trusted window is reported as not certified. A zero value with nonzero
/// trusted coefficients is inconsistent and rejected.
pub fn check_positivity(f: &CoeffGrid2D) -> Result<SelfPairing> {
    let shells = shell_terms(f, f);
    let (compacted, _) = compact_shells(&shells);
    match classify_and_sum(&compacted, None) {
        Ok(sum) if matches!(sum.method, SumMethod::Ordinary) => {
            let value = sum.value.re;
            if value == 0.0 && f.max_abs_trusted() > 0.0 {
                return Err(PbError::Constraint(
                    "zero self-pairing with nonzero trusted coefficients".into(),
                ));
            }
            Ok(SelfPairing::Summable {
                value,
                nonneg: value >= 0.0,
            })
        }
        Ok(sum) => Ok(SelfPairing::NotCertified {
            detail: format!(
                "self-pairing not certified by ordinary summation within the trusted \
                 region (classification suggests {})",
                sum.method.label()
            ),
        }),
        Err(PbError::NotSummable(detail))
        | Err(PbError::InsufficientTruncation { detail, .. }) => {
            Ok(SelfPairing::NotCertified {
                detail: format!(
                    "grid is not pairable with itself by implemented methods: {detail}"
                ),
            })
        }
        Err(other) => Err(other),
    }
}

/// Two sides of an identity and their gap.
#[derive(Clone, Copy, Debug)]
pub struct TransferCheck {
    /// Pairing with the occupation word applied.
    pub lhs: C64,
    /// Label component times the bare pairing.
    pub rhs: C64,
    /// `|lhs - rhs|`.
    pub residual: f64,
}

fn label_component(label: (usize, usize), mode: Mode) -> f64 {
    match mode {
        Mode::One => label.0 as f64,
        Mode::Two => label.1 as f64,
    }
}

/// Eigenvalue transfer through the pairing.
///
/// With `dual = false`: `<psi_bra, N_mode phi_ket> = ket_mode <psi_bra,
/// phi_ket>`. With `dual = true`: `<N_mode' psi_bra, phi_ket> = bra_mode
/// <psi_bra, phi_ket>` (the adjoint word acts on the dual member). Both
/// sides are evaluated independently: weak application then pairing on the
/// left, scalar multiple of the bare pairing on the right.
pub fn check_eigen_transfer(
    bra: (usize, usize),
    ket: (usize, usize),
    mode: Mode,
    dual: bool,
    setup: &FamilySetup,
) -> Result<TransferCheck> {
    let psi = setup.dual_member(bra)?;
    let phi = setup.primal_member(ket)?;
    let word = number_word(mode);
    let (lhs, factor) = if dual {
        let moved = weak_apply(&word.adjoint(), &psi)?;
        (pair_grids(&moved, &phi)?.value, label_component(bra, mode))
    } else {
        let moved = weak_apply(&word, &phi)?;
        (pair_grids(&psi, &moved)?.value, label_component(ket, mode))
    };
    let base = pair_grids(&psi, &phi)?.value;
    let rhs = factor * base;
    Ok(TransferCheck {
        lhs,
        rhs,
        residual: (lhs - rhs).norm(),
    })
}

/// Occupation word applied through its closed-form index shifts, reading
/// the stored square directly instead of expanding operator words.
///
/// The weak action of the occupation word on a grid mixes each entry with
/// its diagonal neighbors: the basis expansion of the transposed word has a
/// diagonal coefficient plus one raising and one lowering shift, so
/// `(N F)[m1, m2]` reads `F` at `(m1, m2)`, `(m1+1, m2+1)` and
/// `(m1-1, m2-1)`. One stored row is consumed.
fn number_apply_direct(mode: Mode, dagger: bool, grid: &CoeffGrid2D) -> Result<CoeffGrid2D> {
    if grid.guard() == 0 {
        return Err(PbError::GuardExhausted {
            needed: 1,
            available: 0,
            trusted: grid.trusted(),
            side: grid.side(),
        });
    }
    let new_side = grid.side() - 1;
    let mut data = vec![C64::new(0.0, 0.0); new_side * new_side];
    for m1 in 0..new_side {
        for m2 in 0..new_side {
            // The weak action of the word uses the basis expansion of its
            // transpose, which is the opposite dagger flavor.
            let (diag, plus, minus) = number_action_coeffs(mode, !dagger, m1, m2);
            let mut acc = diag * grid.get(m1, m2).expect("inside stored square")
                + plus * grid.get(m1 + 1, m2 + 1).expect("inside stored square");
            if m1 > 0 && m2 > 0 {
                acc += minus * grid.get(m1 - 1, m2 - 1).expect("inside stored square");
            }
            data[m1 * new_side + m2] = acc;
        }
    }
    Ok(CoeffGrid2D::with_layout(new_side, grid.trusted(), data))
}

/// Route values and spread for the adjoint-pairing identity.
#[derive(Clone, Copy, Debug)]
pub struct AdjointCheck {
    /// `<N' psi, phi>` with the adjoint word applied via operator words.
    pub dual_word_route: C64,
    /// `<psi, N phi>` with the word applied via operator words.
    pub primal_word_route: C64,
    /// `<N' psi, phi>` with the adjoint applied via direct index shifts.
    pub dual_direct_route: C64,
    /// `<psi, N phi>` with the word applied via direct index shifts.
    pub primal_direct_route: C64,
    /// Largest pairwise gap among the four route values.
    pub residual: f64,
}

impl AdjointCheck {
    /// The four route values in declaration order.
    pub fn routes(&self) -> [C64; 4] {
        [
            self.dual_word_route,
            self.primal_word_route,
            self.dual_direct_route,
            self.primal_direct_route,
        ]
    }
}

fn max_pairwise_gap(values: &[C64]) -> f64 {
    let mut best = 0.0_f64;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            best = best.max((values[i] - values[j]).norm());
        }
    }
    best
}

/// Adjoint-pairing identity `<N' psi, phi> = <psi, N phi>` for the
/// occupation word of `mode`, evaluated along four independent routes: each
/// side once through operator-word application and once through the direct
/// index-shift expansion. Returns all route values and their largest
/// pairwise gap.
pub fn check_adjoint_identity(
    bra: (usize, usize),
    ket: (usize, usize),
    mode: Mode,
    setup: &FamilySetup,
) -> Result<AdjointCheck> {
    let psi = setup.dual_member(bra)?;
    let phi = setup.primal_member(ket)?;
    let word = number_word(mode);

    let psi_moved = weak_apply(&word.adjoint(), &psi)?;
    let phi_moved = weak_apply(&word, &phi)?;
    let dual_word_route = pair_grids(&psi_moved, &phi)?.value;
    let primal_word_route = pair_grids(&psi, &phi_moved)?.value;

    let psi_direct = number_apply_direct(mode, true, &psi)?;
    let phi_direct = number_apply_direct(mode, false, &phi)?;
    let dual_direct_route = pair_grids(&psi_direct, &phi)?.value;
    let primal_direct_route = pair_grids(&psi, &phi_direct)?.value;

    let check = AdjointCheck {
        dual_word_route,
        primal_word_route,
        dual_direct_route,
        primal_direct_route,
        residual: 0.0,
    };
    Ok(AdjointCheck {
        residual: max_pairwise_gap(&check.routes()),
        ..check
    })
}
