//! Acceptance suite: one test per top-level claim the library makes, each
//! printing a single machine-greppable pass/fail line (visible with
//! `cargo test --test acceptance -- --nocapture`).
//!
//! Every check here goes through the public API only and compares against
//! sources that do not share code with the implementation under test:
//! hand-tabulated closed forms, Gauss-Hermite quadrature, rational
//! arithmetic, and closed-form oscillator solutions.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use num::{BigInt, BigRational};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pblab::coeffs::{delta_diff_coeffs, delta_sum_coeffs, CoeffGrid2D};
use pblab::gainloss::{
    change_of_variables, derive_params, hamiltonian_value, integrate, lagrangian_value,
    mode_lagrangian_value, SystemParams, TrajectoryState,
};
use pblab::hermite::{hermite_eval, overlap_quadrature, OscillatorParams};
use pblab::operators::{
    annihilator, build_phi, build_psi, commutator_defect, creator, weak_apply, Mode,
};
use pblab::pairing::{biorthonormality_matrix, check_adjoint_identity, check_eigen_transfer, FamilySetup};
use pblab::summation::{abel_exact_alternating, abel_numeric, eta_schedule_for_degree, AbelOptions};
use pblab::C64;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Print exactly one line for the criterion, then panic if it failed so the
/// harness counts it.
fn report(number: usize, name: &str, outcome: Result<String, String>) {
    match outcome {
        Ok(note) if note.is_empty() => println!("criterion {number} ({name}): pass"),
        Ok(note) => println!("criterion {number} ({name}): pass [{note}]"),
        Err(detail) => {
            println!("criterion {number} ({name}): fail: {detail}");
            panic!("acceptance criterion {number} ({name}) failed: {detail}");
        }
    }
}

/// Hand-tabulated closed form for family members with labels in {0, 1}^2.
///
/// Each member lives on a single diagonal line of the index plane: the
/// label difference `k1 - k2` fixes the line `n1 - n2`, the entry carries a
/// square-root or affine weight in `n2`, and the dual family alternates in
/// sign along its line. Derived by applying the raising words to the
/// vacuum lines by hand; shares no code with `build_phi`/`build_psi`.
fn family_entry(dual: bool, label: (usize, usize), scale: C64, n1: usize, n2: usize) -> C64 {
    let (shift, weight) = match label {
        (0, 0) => (0i64, 1.0),
        (0, 1) => (-1, (2.0 * n2 as f64).sqrt()),
        (1, 0) => (1, (2.0 * (n2 + 1) as f64).sqrt()),
        (1, 1) => (0, 1.0 + 2.0 * n2 as f64),
        _ => panic!("no tabulated closed form for label {label:?}"),
    };
    if n1 as i64 - n2 as i64 != shift {
        return c(0.0, 0.0);
    }
    let sign = if dual && (n2 + label.1) % 2 == 1 {
        -1.0
    } else {
        1.0
    };
    scale * c(sign * weight, 0.0)
}

fn run_family_closed_forms() -> Result<String, String> {
    let start = Instant::now();
    let alpha = c(0.8, -0.3);
    let beta = c(1.1, 0.7);
    let n = 41;
    let mut worst = 0.0f64;
    for k1 in 0..=1usize {
        for k2 in 0..=1usize {
            let phi = build_phi(k1, k2, alpha, n, 0).map_err(|e| e.to_string())?;
            let psi = build_psi(k1, k2, beta, n, 0).map_err(|e| e.to_string())?;
            for n1 in 0..n {
                for n2 in 0..n {
                    let phi_gap = (phi.get_or_zero(n1, n2)
                        - family_entry(false, (k1, k2), alpha, n1, n2))
                    .norm();
                    let psi_gap = (psi.get_or_zero(n1, n2)
                        - family_entry(true, (k1, k2), beta, n1, n2))
                    .norm();
                    worst = worst.max(phi_gap).max(psi_gap);
                }
            }
        }
    }
    let elapsed = start.elapsed();
    if worst > 1e-10 {
        return Err(format!(
            "max closed-form deviation {worst:.3e} exceeds 1e-10"
        ));
    }
    if elapsed >= Duration::from_secs(1) {
        return Err(format!(
            "construction and check took {elapsed:?}, budget is 1 s"
        ));
    }
    Ok(format!(
        "8 members, n1,n2 <= 40, max deviation {:.2e}, {} ms",
        worst,
        elapsed.as_millis()
    ))
}

#[test]
fn criterion_1_family_grids_match_their_closed_forms() {
    report(1, "family-closed-forms", run_family_closed_forms());
}

fn run_quadrature_oracle() -> Result<String, String> {
    let params = OscillatorParams::new(1.0, 1.0).map_err(|e| e.to_string())?;
    let side = 31;
    let alpha = c(0.6, 0.8);
    let beta = c(-0.4, 1.1);
    let diff = delta_diff_coeffs(alpha, side, 0).map_err(|e| e.to_string())?;
    let sum = delta_sum_coeffs(beta, side, 0).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for n1 in 0..side {
        for n2 in 0..side {
            // The product of two basis functions has polynomial content of
            // degree n1 + n2 under the shared Gaussian; this order keeps
            // the rule exact for it with margin.
            let order = n1.max(n2) + 12;
            let same = overlap_quadrature(
                |x| hermite_eval(n2, x, &params).expect("basis evaluation in range"),
                n1,
                &params,
                order,
            )
            .map_err(|e| e.to_string())?;
            let mirrored = overlap_quadrature(
                |x| hermite_eval(n2, -x, &params).expect("basis evaluation in range"),
                n1,
                &params,
                order,
            )
            .map_err(|e| e.to_string())?;
            let diff_gap = (diff.get_or_zero(n1, n2) - alpha * same).norm();
            let sum_gap = (sum.get_or_zero(n1, n2) - beta * mirrored).norm();
            worst = worst.max(diff_gap).max(sum_gap);
        }
    }
    if worst > 1e-8 {
        return Err(format!(
            "max gap between grid entries and quadrature {worst:.3e} exceeds 1e-8"
        ));
    }
    Ok(format!(
        "2 x {} integrals, max deviation {:.2e}",
        side * side,
        worst
    ))
}

#[test]
fn criterion_2_vacuum_grids_match_gauss_hermite_quadrature() {
    report(2, "quadrature-oracle", run_quadrature_oracle());
}

fn run_abel_values() -> Result<String, String> {
    let exact_want = [ratio(1, 2), ratio(-1, 4), ratio(0, 1)];
    let numeric_want = [0.5, -0.25, 0.0];
    let mut worst_numeric = 0.0f64;
    for (degree, want) in exact_want.iter().enumerate() {
        let got = abel_exact_alternating(degree);
        if got != *want {
            return Err(format!(
                "exact value for weight degree {degree}: got {got}, want {want}"
            ));
        }
        let options = AbelOptions {
            eta_schedule: eta_schedule_for_degree(degree),
            ..AbelOptions::default()
        };
        let numeric = abel_numeric(
            |k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                c(sign * (k as f64).powi(degree as i32), 0.0)
            },
            &options,
        )
        .map_err(|e| e.to_string())?;
        let gap = (numeric.value - c(numeric_want[degree], 0.0)).norm();
        if gap > 1e-6 {
            return Err(format!(
                "numeric value for weight degree {degree} off by {gap:.3e}, budget 1e-6"
            ));
        }
        worst_numeric = worst_numeric.max(gap);
    }
    Ok(format!(
        "exact values 1/2, -1/4, 0; numeric route off by at most {worst_numeric:.2e}"
    ))
}

#[test]
fn criterion_3_alternating_series_values_are_exact_and_numerically_reachable() {
    report(3, "abel-values", run_abel_values());
}

fn run_biorthonormality() -> Result<String, String> {
    // alpha * conj(beta) = (1 + i)(1 - i) = 2, the normalization that makes
    // the pairing matrix the identity.
    let alpha = c(1.0, 1.0);
    let beta = c(1.0, 1.0);

    let small = biorthonormality_matrix(1, alpha, beta).map_err(|e| e.to_string())?;
    if small.dimension() != 4 {
        return Err(format!("expected a 4x4 matrix, got {}", small.dimension()));
    }
    let mut worst_diag = 0.0f64;
    let mut worst_off = 0.0f64;
    for outcome in small.outcomes() {
        let value = outcome
            .result
            .as_ref()
            .map_err(|e| format!("pairing {:?} x {:?} failed: {e}", outcome.bra, outcome.ket))?
            .value;
        if outcome.bra == outcome.ket {
            worst_diag = worst_diag.max((value - c(1.0, 0.0)).norm());
        } else {
            worst_off = worst_off.max(value.norm());
        }
    }
    if worst_off > 1e-8 {
        return Err(format!(
            "4x4 off-diagonal magnitude {worst_off:.3e} exceeds 1e-8"
        ));
    }
    if worst_diag > 1e-6 {
        return Err(format!(
            "4x4 diagonal deviation from 1 is {worst_diag:.3e}, budget 1e-6"
        ));
    }

    let big = biorthonormality_matrix(3, alpha, beta).map_err(|e| e.to_string())?;
    if big.outcomes().len() != 256 {
        return Err(format!(
            "expected 256 extended entries, got {}",
            big.outcomes().len()
        ));
    }
    let mut worst_big = 0.0f64;
    let mut tally: BTreeMap<&'static str, usize> = BTreeMap::new();
    for outcome in big.outcomes() {
        let result = outcome
            .result
            .as_ref()
            .map_err(|e| format!("pairing {:?} x {:?} failed: {e}", outcome.bra, outcome.ket))?;
        let target = if outcome.bra == outcome.ket {
            c(1.0, 0.0)
        } else {
            c(0.0, 0.0)
        };
        worst_big = worst_big.max((result.value - target).norm());
        *tally.entry(result.sum.method.label()).or_insert(0) += 1;
    }
    if worst_big > 1e-5 {
        return Err(format!(
            "16x16 deviation from identity {worst_big:.3e} exceeds 1e-5"
        ));
    }
    let tally_text = tally
        .iter()
        .map(|(label, count)| format!("{label}: {count}"))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(format!(
        "4x4 diag off {:.1e}, off-diag {:.1e}; 16x16 off {:.1e}; summability {{{tally_text}}}",
        worst_diag, worst_off, worst_big
    ))
}

#[test]
fn criterion_4_family_pairings_form_the_identity_matrix() {
    report(4, "biorthonormality", run_biorthonormality());
}

fn run_commutators() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_ca11);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let mut grid = CoeffGrid2D::zeros(12, 2).map_err(|e| e.to_string())?;
        for n1 in 0..grid.side() {
            for n2 in 0..grid.side() {
                grid.set(n1, n2, c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            }
        }
        for lower in [Mode::One, Mode::Two] {
            for raise in [Mode::One, Mode::Two] {
                let expected = if lower == raise { c(1.0, 0.0) } else { c(0.0, 0.0) };
                let defect = commutator_defect(&annihilator(lower), &creator(raise), expected, &grid)
                    .map_err(|e| e.to_string())?;
                worst = worst.max(defect);
            }
        }
    }
    if worst > 1e-12 {
        return Err(format!(
            "max commutator defect {worst:.3e} exceeds 1e-12"
        ));
    }
    Ok(format!(
        "100 grids x 4 operator pairs, max defect {worst:.2e}"
    ))
}

#[test]
fn criterion_5_pair_commutators_are_kronecker_deltas_on_random_grids() {
    report(5, "commutators", run_commutators());
}

fn run_vacuum_annihilation() -> Result<String, String> {
    let alpha = c(std::f64::consts::SQRT_2, 0.0);
    let beta = c(std::f64::consts::SQRT_2, 0.0);
    let phi = build_phi(0, 0, alpha, 24, 2).map_err(|e| e.to_string())?;
    let psi = build_psi(0, 0, beta, 24, 2).map_err(|e| e.to_string())?;
    if phi.max_abs_trusted() == 0.0 || psi.max_abs_trusted() == 0.0 {
        return Err("a vacuum grid is identically zero".to_string());
    }
    let mut worst = 0.0f64;
    for mode in [Mode::One, Mode::Two] {
        let lowered = weak_apply(&annihilator(mode), &phi).map_err(|e| e.to_string())?;
        let raised_adjoint =
            weak_apply(&creator(mode).adjoint(), &psi).map_err(|e| e.to_string())?;
        worst = worst
            .max(lowered.max_abs_trusted())
            .max(raised_adjoint.max_abs_trusted());
    }
    if worst > 1e-12 {
        return Err(format!(
            "max residual entry {worst:.3e} exceeds 1e-12"
        ));
    }
    Ok(format!("both modes, max residual entry {worst:.2e}"))
}

#[test]
fn criterion_6_vacua_are_annihilated_by_both_lowering_words() {
    report(6, "vacuum-annihilation", run_vacuum_annihilation());
}

fn run_eigen_transfer_and_adjoint() -> Result<String, String> {
    let setup = FamilySetup::default();
    let mut worst_transfer = 0.0f64;
    let mut worst_adjoint = 0.0f64;
    for b1 in 0..=2usize {
        for b2 in 0..=2usize {
            for k1 in 0..=2usize {
                for k2 in 0..=2usize {
                    let bra = (b1, b2);
                    let ket = (k1, k2);
                    for mode in [Mode::One, Mode::Two] {
                        for dual in [false, true] {
                            let transfer = check_eigen_transfer(bra, ket, mode, dual, &setup)
                                .map_err(|e| {
                                    format!("transfer {bra:?} x {ket:?} ({mode:?}, dual {dual}): {e}")
                                })?;
                            worst_transfer = worst_transfer.max(transfer.residual);
                        }
                        let adjoint =
                            check_adjoint_identity(bra, ket, mode, &setup).map_err(|e| {
                                format!("adjoint {bra:?} x {ket:?} ({mode:?}): {e}")
                            })?;
                        worst_adjoint = worst_adjoint.max(adjoint.residual);
                    }
                }
            }
        }
    }
    if worst_transfer > 1e-6 {
        return Err(format!(
            "max eigenvalue-transfer residual {worst_transfer:.3e} exceeds 1e-6"
        ));
    }
    if worst_adjoint > 1e-6 {
        return Err(format!(
            "max spread across the four adjoint-identity routes {worst_adjoint:.3e} exceeds 1e-6"
        ));
    }
    Ok(format!(
        "81 label pairs x 2 modes: transfer residual {:.2e}, route spread {:.2e}",
        worst_transfer, worst_adjoint
    ))
}

#[test]
fn criterion_7_occupation_words_transfer_labels_and_respect_adjoints() {
    report(7, "eigen-transfer-and-adjoint", run_eigen_transfer_and_adjoint());
}

/// Underdamped single-oscillator solution with q(0) = q0, q'(0) = v0.
fn damped_closed_form(mass: f64, damping: f64, stiffness: f64, q0: f64, v0: f64, t: f64) -> f64 {
    let decay = damping / (2.0 * mass);
    let omega = (stiffness / mass - decay * decay).sqrt();
    let c2 = (v0 + decay * q0) / omega;
    (-decay * t).exp() * (q0 * (omega * t).cos() + c2 * (omega * t).sin())
}

fn random_valid_params(rng: &mut ChaCha8Rng) -> Result<SystemParams, String> {
    // The box is chosen so every draw is valid: the coupling product stays
    // below 1/4, the weight ratio is negative, and the mode frequency
    // square stays positive.
    SystemParams::new(
        rng.gen_range(0.8..1.25),
        rng.gen_range(0.0..0.2),
        rng.gen_range(0.8..1.25),
        rng.gen_range(0.05..0.45),
        rng.gen_range(-0.45..0.45),
        rng.gen_range(0.1..2.0),
        rng.gen_range(-2.0..-0.1),
    )
    .map_err(|e| e.to_string())
}

fn run_energy_conservation() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xac5e_0008);
    let params = random_valid_params(&mut rng)?;
    let start = TrajectoryState::new(0.0, 1.0, 0.0, 0.0, 0.0);
    let states = integrate(&params, &start, 1e-4, 5.0).map_err(|e| e.to_string())?;
    let h0 = hamiltonian_value(&params, &states[0]);
    if h0 == 0.0 {
        return Err("conserved value vanished at the start state".to_string());
    }
    let drift = states
        .iter()
        .map(|s| (hamiltonian_value(&params, s) - h0).abs())
        .fold(0.0, f64::max)
        / h0.abs();
    if drift > 1e-8 {
        return Err(format!(
            "relative drift of the conserved value {drift:.3e} exceeds 1e-8"
        ));
    }

    // With both cross couplings zero the first coordinate decouples into a
    // plain damped oscillator; compare against its closed form.
    let limit = SystemParams::new(1.0, 0.2, 1.0, 0.0, 0.0, 1.0, -1.0).map_err(|e| e.to_string())?;
    let decayed = integrate(&limit, &start, 1e-3, 10.0).map_err(|e| e.to_string())?;
    let mut worst_x = 0.0f64;
    for s in &decayed {
        worst_x = worst_x.max((s.x - damped_closed_form(1.0, 0.2, 1.0, 1.0, 0.0, s.t)).abs());
    }
    if worst_x > 1e-6 {
        return Err(format!(
            "decoupled-limit trajectory off the closed form by {worst_x:.3e}, budget 1e-6"
        ));
    }
    Ok(format!(
        "relative drift {drift:.2e} over T=5 at dt=1e-4; closed-form gap {worst_x:.2e}"
    ))
}

#[test]
fn criterion_8_coupled_trajectories_conserve_energy_and_match_the_decoupled_limit() {
    report(8, "energy-conservation", run_energy_conservation());
}

fn run_lagrangian_equivalence() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a64_a46e);
    let coupled = SystemParams::new(1.0, 0.2, 1.0, 0.1, 0.1, 1.0, -1.0).map_err(|e| e.to_string())?;
    let random = random_valid_params(&mut rng)?;
    let mut worst = 0.0f64;
    for params in [coupled, random] {
        let derived = derive_params(&params).map_err(|e| e.to_string())?;
        for _ in 0..1000 {
            let state = TrajectoryState::new(
                0.0,
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            );
            let direct = lagrangian_value(&params, &state);
            let modes = change_of_variables(&derived, &state).map_err(|e| e.to_string())?;
            let via_modes = mode_lagrangian_value(&derived, &modes);
            let gap = (direct - via_modes).abs() / direct.abs().max(1.0);
            worst = worst.max(gap);
        }
    }
    if worst > 1e-9 {
        return Err(format!(
            "max gap between coordinate and mode values {worst:.3e} exceeds 1e-9"
        ));
    }
    Ok(format!(
        "2 parameter sets x 1000 states, max gap {worst:.2e}"
    ))
}

#[test]
fn criterion_9_the_action_is_invariant_under_the_mode_map() {
    report(9, "lagrangian-equivalence", run_lagrangian_equivalence());
}
