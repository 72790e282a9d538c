//! Subcommands that verify the algebraic side: biorthonormality, family
//! coefficient structure, regularized series values, and the transfer and
//! adjoint identities.

use num::{BigInt, BigRational, ToPrimitive};
use pblab::coeffs::CoeffGrid2D;
use pblab::hermite::{hermite_eval, overlap_quadrature_with, OscillatorParams};
use pblab::operators::{build_phi, build_psi, Mode};
use pblab::pairing::{
    biorthonormality_matrix, check_adjoint_identity, check_eigen_transfer, FamilySetup,
};
use pblab::summation::{abel_exact_poly, abel_numeric, eta_schedule_for_degree, AbelOptions};
use pblab::C64;
use serde_json::{json, Value};

use crate::report::{cnum, envelope, label, num, CheckBuilder};
use crate::{CliError, Family, Format, Preset, RunContext, RunOutput};

/// Largest label component any matrix-style sweep accepts: the pairing
/// weights then stay within the exactly classified polynomial degrees.
const LABEL_CAP: usize = 6;

/// Residual bound for occupation-word identities.
const TRANSFER_TOL: f64 = 1e-6;

fn label_name(pair: (usize, usize)) -> String {
    format!("({},{})", pair.0, pair.1)
}

fn mode_number(mode: Mode) -> u64 {
    match mode {
        Mode::One => 1,
        Mode::Two => 2,
    }
}

fn labels_up_to(kmax: usize) -> Vec<(usize, usize)> {
    (0..=kmax)
        .flat_map(|k1| (0..=kmax).map(move |k2| (k1, k2)))
        .collect()
}

pub fn check_label_cap(kmax: usize) -> Result<(), CliError> {
    if kmax > LABEL_CAP {
        return Err(CliError::Config(format!(
            "--kmax {kmax} is above the supported bound {LABEL_CAP}: larger labels \
             push the pairing weights past the exactly classified degree"
        )));
    }
    Ok(())
}

fn fmt_float(value: f64) -> String {
    format!("{value:.14e}")
}

/// Pair every dual member against every primal member and compare with the
/// identity matrix.
pub fn biorth(ctx: &RunContext, kmax: usize, format: Format) -> Result<RunOutput, CliError> {
    check_label_cap(kmax)?;
    let matrix = biorthonormality_matrix(kmax, ctx.norm.alpha, ctx.norm.beta)
        .map_err(|e| CliError::Config(e.to_string()))?;

    // Diagonal entries accumulate weight products across the whole truncation
    // while off-diagonal ones cancel shell by shell, so they earn separate
    // bounds; wider label ranges meet larger weights and get more slack.
    let (diag_tol, off_tol) = if kmax <= 1 {
        (1e-6, 1e-8)
    } else {
        (1e-5, 1e-5)
    };

    let mut checks = Vec::new();
    let mut csv = String::from("bra_k1,bra_k2,ket_l1,ket_l2,re,im,residual,method\n");
    for outcome in matrix.outcomes() {
        let diagonal = outcome.bra == outcome.ket;
        let target = if diagonal {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        };
        let tolerance = if diagonal { diag_tol } else { off_tol };
        let name = format!(
            "pairing {}|{}",
            label_name(outcome.bra),
            label_name(outcome.ket)
        );
        let builder = CheckBuilder::new(&name, "eq57")
            .field("bra", label(outcome.bra))
            .field("ket", label(outcome.ket));
        match &outcome.result {
            Ok(result) => {
                let residual = (result.value - target).norm();
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    outcome.bra.0,
                    outcome.bra.1,
                    outcome.ket.0,
                    outcome.ket.1,
                    fmt_float(result.value.re),
                    fmt_float(result.value.im),
                    fmt_float(residual),
                    result.sum.method.label()
                ));
                checks.push(
                    builder
                        .field("value", cnum(result.value))
                        .field("target", cnum(target))
                        .field("method", Value::String(result.sum.method.label().into()))
                        .finish(residual, tolerance),
                );
            }
            Err(err) => {
                csv.push_str(&format!(
                    "{},{},{},{},,,,error\n",
                    outcome.bra.0, outcome.bra.1, outcome.ket.0, outcome.ket.1
                ));
                checks.push(builder.finish_error(&err.to_string()));
            }
        }
    }

    let (value, _) = envelope(
        "biorth",
        ctx.precision_name(),
        ctx.norm.alpha,
        ctx.norm.beta,
        json!({ "kmax": kmax }),
        vec![("dimension", json!(matrix.dimension() as u64))],
        checks,
    );
    let output = RunOutput::from_envelope(value);
    Ok(match format {
        Format::Json => output,
        Format::Csv => RunOutput { text: csv, ..output },
    })
}

/// Tabulated closed form of one family entry for label components in
/// `{0, 1}`: the support line, the ladder weight along it, and the
/// alternating sign carried by dual members.
fn closed_form_entry(
    family: Family,
    member: (usize, usize),
    scale: C64,
    n1: usize,
    n2: usize,
) -> Option<C64> {
    let (shift, weight) = match member {
        (0, 0) => (0i64, 1.0),
        (0, 1) => (-1, (2.0 * n2 as f64).sqrt()),
        (1, 0) => (1, (2.0 * (n2 + 1) as f64).sqrt()),
        (1, 1) => (0, 1.0 + 2.0 * n2 as f64),
        _ => return None,
    };
    if n1 as i64 - n2 as i64 != shift {
        return Some(C64::new(0.0, 0.0));
    }
    let sign = match family {
        Family::Psi if (n2 + member.1) % 2 == 1 => -1.0,
        _ => 1.0,
    };
    Some(scale * C64::new(sign * weight, 0.0))
}

/// Build one member's grid and verify its structure.
pub fn coeffs(
    ctx: &RunContext,
    family: Family,
    member: (usize, usize),
    format: Format,
) -> Result<RunOutput, CliError> {
    let (family_name, equation, scale) = match family {
        Family::Phi => ("phi", "eq55", ctx.norm.alpha),
        Family::Psi => ("psi", "eq56", ctx.norm.beta),
    };
    let grid = match family {
        Family::Phi => build_phi(member.0, member.1, scale, ctx.n, ctx.guard),
        Family::Psi => build_psi(member.0, member.1, scale, ctx.n, ctx.guard),
    }
    .map_err(|e| CliError::Config(e.to_string()))?;

    let trusted = grid.trusted();
    let magnitude = grid.max_abs_trusted().max(1.0);
    let line_shift = member.0 as i64 - member.1 as i64;
    let mut checks = Vec::new();

    // Every member lives on one index line; mass anywhere else means the
    // ladder construction leaked.
    let mut off_line = 0.0_f64;
    for n1 in 0..trusted {
        for n2 in 0..trusted {
            if n1 as i64 - n2 as i64 != line_shift {
                off_line = off_line.max(grid.get_or_zero(n1, n2).norm());
            }
        }
    }
    checks.push(
        CheckBuilder::new("support-line", equation)
            .field("line_shift", json!(line_shift))
            .finish(off_line / magnitude, 1e-12),
    );

    if closed_form_entry(family, member, scale, 0, 0).is_some() {
        let mut deviation = 0.0_f64;
        for n1 in 0..trusted {
            for n2 in 0..trusted {
                let expected = closed_form_entry(family, member, scale, n1, n2)
                    .expect("the member was already matched against the table");
                deviation = deviation.max((grid.get_or_zero(n1, n2) - expected).norm());
            }
        }
        checks.push(CheckBuilder::new("closed-form", equation).finish(deviation, 1e-10));
    }

    if member == (0, 0) {
        checks.push(vacuum_quadrature_check(ctx, family, equation, scale, &grid));
    }

    let mut entries = Vec::new();
    for n1 in 0..trusted {
        for n2 in 0..trusted {
            let value = grid.get_or_zero(n1, n2);
            if value != C64::new(0.0, 0.0) {
                entries.push(json!([n1 as u64, n2 as u64, num(value.re), num(value.im)]));
            }
        }
    }

    let (value, _) = envelope(
        "coeffs",
        ctx.precision_name(),
        ctx.norm.alpha,
        ctx.norm.beta,
        json!({
            "family": family_name,
            "label": label(member),
            "n": ctx.n as u64,
            "guard": ctx.guard as u64,
        }),
        vec![
            ("scale", cnum(scale)),
            ("nonzero_entries", Value::Array(entries)),
        ],
        checks,
    );
    let output = RunOutput::from_envelope(value);
    Ok(match format {
        Format::Json => output,
        Format::Csv => {
            let mut buf = Vec::new();
            grid.write_csv_trusted(&mut buf)
                .expect("in-memory CSV writing cannot fail");
            RunOutput {
                text: String::from_utf8(buf).expect("grid CSV is UTF-8"),
                ..output
            }
        }
    })
}

/// Compare the vacuum grid against direct quadrature of the basis overlaps,
/// honoring the precision selected through the environment.
fn vacuum_quadrature_check(
    ctx: &RunContext,
    family: Family,
    equation: &str,
    scale: C64,
    grid: &CoeffGrid2D,
) -> Value {
    let params = match OscillatorParams::new(1.0, 1.0) {
        Ok(p) => p,
        Err(err) => {
            return CheckBuilder::new("quadrature-oracle", equation)
                .finish_error(&err.to_string())
        }
    };
    // A corner of the grid is enough for an oracle: the quadrature cost per
    // entry grows with the order while the construction rule does not change.
    let side = grid.trusted().min(24);
    let mut deviation = 0.0_f64;
    for n1 in 0..side {
        for n2 in 0..side {
            let order = n1.max(n2) + 12;
            let overlap = match family {
                Family::Phi => overlap_quadrature_with(
                    |x| hermite_eval(n2, x, &params).unwrap_or(f64::NAN),
                    n1,
                    &params,
                    order,
                    ctx.precision,
                ),
                Family::Psi => overlap_quadrature_with(
                    |x| hermite_eval(n2, -x, &params).unwrap_or(f64::NAN),
                    n1,
                    &params,
                    order,
                    ctx.precision,
                ),
            };
            match overlap {
                Ok(q) => {
                    let expected = scale * C64::new(q, 0.0);
                    deviation =
                        deviation.max((grid.get_or_zero(n1, n2) - expected).norm());
                }
                Err(err) => {
                    return CheckBuilder::new("quadrature-oracle", equation)
                        .finish_error(&err.to_string())
                }
            }
        }
    }
    CheckBuilder::new("quadrature-oracle", equation)
        .field("side", json!(side as u64))
        .finish(deviation, 1e-8)
}

fn preset_descriptor(preset: Preset) -> (&'static str, &'static str, usize, [i64; 3]) {
    // (flag name, display form, polynomial degree, coefficients of p(k)
    // with terms (-1)^k p(k)).
    match preset {
        Preset::Alt => ("alt", "sum_k (-1)^k", 0, [1, 0, 0]),
        Preset::AltK => ("alt-k", "sum_k (-1)^k k", 1, [0, 1, 0]),
        Preset::AltK2 => ("alt-k2", "sum_k (-1)^k k^2", 2, [0, 0, 1]),
        Preset::AltOddSquare => (
            "alt-odd-square",
            "sum_k (-1)^k (2k+1)^2",
            2,
            [1, 4, 4],
        ),
    }
}

/// Regularized value of a preset divergent series: exact route reported,
/// numeric route as the cross-check.
pub fn abel(ctx: &RunContext, preset: Preset) -> Result<RunOutput, CliError> {
    let (name, series, degree, poly) = preset_descriptor(preset);
    let monomials: Vec<BigRational> = poly
        .iter()
        .map(|&c| BigRational::from_integer(BigInt::from(c)))
        .collect();
    let exact = abel_exact_poly(&monomials);
    let exact_value = exact
        .to_f64()
        .expect("tabulated regularized values are small rationals");

    let term = move |k: usize| {
        let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
        let x = k as f64;
        C64::new(sign * (poly[0] as f64 + poly[1] as f64 * x + poly[2] as f64 * x * x), 0.0)
    };
    let options = AbelOptions {
        eta_schedule: eta_schedule_for_degree(degree),
        ..AbelOptions::default()
    };

    let mut payload = vec![
        ("preset", json!(name)),
        ("series", json!(series)),
        ("value", num(exact_value)),
        ("method", json!("abel_exact")),
        (
            "exact",
            json!({
                "numerator": exact.numer().to_string(),
                "denominator": exact.denom().to_string(),
            }),
        ),
    ];
    let check = match abel_numeric(term, &options) {
        Ok(numeric) => {
            payload.push((
                "numeric",
                json!({
                    "value": cnum(numeric.value),
                    "method": numeric.method.label(),
                }),
            ));
            CheckBuilder::new("exact-vs-numeric", "eq57")
                .finish((numeric.value - C64::new(exact_value, 0.0)).norm(), 1e-6)
        }
        Err(err) => CheckBuilder::new("exact-vs-numeric", "eq57").finish_error(&err.to_string()),
    };

    let (value, _) = envelope(
        "abel",
        ctx.precision_name(),
        ctx.norm.alpha,
        ctx.norm.beta,
        json!({ "preset": name }),
        payload,
        vec![check],
    );
    Ok(RunOutput::from_envelope(value))
}

/// Transfer residuals for every label pair, mode, and application route.
pub fn verify_eigen(ctx: &RunContext, kmax: usize) -> Result<RunOutput, CliError> {
    check_label_cap(kmax)?;
    let setup = FamilySetup {
        norm: ctx.norm,
        trusted: ctx.n,
        guard: ctx.guard,
    };
    let labels = labels_up_to(kmax);
    let mut checks = Vec::new();
    for &bra in &labels {
        for &ket in &labels {
            for mode in [Mode::One, Mode::Two] {
                for dual in [false, true] {
                    let route = if dual { "dual" } else { "primal" };
                    let name = format!(
                        "transfer {}|{} mode {} {}",
                        label_name(bra),
                        label_name(ket),
                        mode_number(mode),
                        route
                    );
                    let builder = CheckBuilder::new(&name, "eq510")
                        .field("bra", label(bra))
                        .field("ket", label(ket))
                        .field("mode", json!(mode_number(mode)))
                        .field("route", json!(route));
                    match check_eigen_transfer(bra, ket, mode, dual, &setup) {
                        Ok(transfer) => checks.push(
                            builder
                                .field("lhs", cnum(transfer.lhs))
                                .field("rhs", cnum(transfer.rhs))
                                .finish(transfer.residual, TRANSFER_TOL),
                        ),
                        Err(err) => checks.push(builder.finish_error(&err.to_string())),
                    }
                }
            }
        }
    }
    let (value, _) = envelope(
        "verify-eigen",
        ctx.precision_name(),
        ctx.norm.alpha,
        ctx.norm.beta,
        json!({ "kmax": kmax, "n": ctx.n as u64, "guard": ctx.guard as u64 }),
        vec![],
        checks,
    );
    Ok(RunOutput::from_envelope(value))
}

/// Agreement of the four adjoint evaluation routes for every label pair
/// and mode.
pub fn verify_adjoint(ctx: &RunContext, kmax: usize) -> Result<RunOutput, CliError> {
    check_label_cap(kmax)?;
    let setup = FamilySetup {
        norm: ctx.norm,
        trusted: ctx.n,
        guard: ctx.guard,
    };
    let labels = labels_up_to(kmax);
    let mut checks = Vec::new();
    for &bra in &labels {
        for &ket in &labels {
            for mode in [Mode::One, Mode::Two] {
                let name = format!(
                    "adjoint {}|{} mode {}",
                    label_name(bra),
                    label_name(ket),
                    mode_number(mode)
                );
                let builder = CheckBuilder::new(&name, "eq511")
                    .field("bra", label(bra))
                    .field("ket", label(ket))
                    .field("mode", json!(mode_number(mode)));
                match check_adjoint_identity(bra, ket, mode, &setup) {
                    Ok(adjoint) => checks.push(
                        builder
                            .field(
                                "routes",
                                json!({
                                    "dual_word": cnum(adjoint.dual_word_route),
                                    "primal_word": cnum(adjoint.primal_word_route),
                                    "dual_direct": cnum(adjoint.dual_direct_route),
                                    "primal_direct": cnum(adjoint.primal_direct_route),
                                }),
                            )
                            .finish(adjoint.residual, TRANSFER_TOL),
                    ),
                    Err(err) => checks.push(builder.finish_error(&err.to_string())),
                }
            }
        }
    }
    let (value, _) = envelope(
        "verify-adjoint",
        ctx.precision_name(),
        ctx.norm.alpha,
        ctx.norm.beta,
        json!({ "kmax": kmax, "n": ctx.n as u64, "guard": ctx.guard as u64 }),
        vec![],
        checks,
    );
    Ok(RunOutput::from_envelope(value))
}
