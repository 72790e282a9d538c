//! The classical-side subcommand: integrate the gain-loss pair, check the
//! conserved energy and the decoupled-mode closed forms, and emit either a
//! JSON report or the raw trajectory as CSV.

use pblab::gainloss::{
    change_of_variables, derive_params, hamiltonian_value, integrate, write_trajectory_csv,
    DerivedParams, SimConfig, TrajectoryState,
};
use serde_json::{json, Value};

use crate::report::{envelope, num, CheckBuilder};
use crate::{CliError, Format, RunContext, RunOutput, SimulateArgs};

/// Relative energy-drift budget for the fixed-step integrator at default
/// resolution.
const DRIFT_TOL: f64 = 1e-8;

/// Envelope-relative budget for the mode closed forms.
const MODE_TOL: f64 = 1e-6;

fn resolve_config(args: &SimulateArgs) -> Result<SimConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                action: "read",
                path: path.display().to_string(),
                source,
            })?;
            SimConfig::parse_key_values(&text).map_err(|e| CliError::Config(e.to_string()))?
        }
        None => SimConfig::default(),
    };
    if let Some(v) = args.m {
        cfg.params.mass = v;
    }
    if let Some(v) = args.gamma {
        cfg.params.damping = v;
    }
    if let Some(v) = args.k {
        cfg.params.stiffness = v;
    }
    if let Some(v) = args.coupling_a {
        cfg.params.coupling_a = v;
    }
    if let Some(v) = args.coupling_b {
        cfg.params.coupling_b = v;
    }
    if let Some(v) = args.alpha_y {
        cfg.params.alpha_y = v;
    }
    match args.beta_y {
        Some(v) => cfg.params.beta_y = v,
        // A config file has already settled its own weight; bare flags get
        // the sign that keeps the mode mass positive.
        None if args.config.is_none() => {
            cfg.params.beta_y = if cfg.params.coupling_a < 0.0 { 1.0 } else { -1.0 };
        }
        None => {}
    }
    if let Some(v) = args.dt {
        cfg.dt = v;
    }
    if let Some(v) = args.horizon {
        cfg.horizon = v;
    }
    cfg.params
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

fn state_json(s: &TrajectoryState) -> Value {
    json!({
        "t": num(s.t),
        "x": num(s.x),
        "y": num(s.y),
        "xdot": num(s.xdot),
        "ydot": num(s.ydot),
    })
}

fn derived_json(d: &DerivedParams) -> Value {
    json!({
        "effective_mass": num(d.effective_mass),
        "effective_stiffness": num(d.effective_stiffness),
        "alpha_x": num(d.alpha_x),
        "beta_x": num(d.beta_x),
        "alpha_y": num(d.alpha_y),
        "beta_y": num(d.beta_y),
        "mode_mass": num(d.mode_mass),
        "mode_stiffness": num(d.mode_stiffness),
        "mode_damping": num(d.mode_damping),
        "mode_freq_sq": num(d.mode_freq_sq),
        "jacobian": num(d.jacobian),
    })
}

/// Exponential-envelope closed form of one decoupled mode.
fn mode_closed_form(q0: f64, v0: f64, growth: f64, omega: f64, t: f64) -> f64 {
    let envelope = (growth * t).exp();
    envelope * (q0 * (omega * t).cos() + (v0 - growth * q0) / omega * (omega * t).sin())
}

/// Integrate, check energy conservation and the mode closed forms, report.
pub fn simulate(
    ctx: &RunContext,
    args: &SimulateArgs,
    format: Format,
) -> Result<RunOutput, CliError> {
    let cfg = resolve_config(args)?;
    let derived = derive_params(&cfg.params).map_err(|e| CliError::Config(e.to_string()))?;
    let states = integrate(&cfg.params, &cfg.initial, cfg.dt, cfg.horizon)
        .map_err(|e| CliError::Config(e.to_string()))?;

    let h0 = hamiltonian_value(&cfg.params, &states[0]);
    let mut drift = 0.0_f64;
    for s in &states {
        drift = drift.max((hamiltonian_value(&cfg.params, s) - h0).abs());
    }
    // Relative to the initial energy when it carries one, absolute when the
    // trajectory starts on the zero level set.
    let drift_residual = if h0.abs() >= 1e-9 { drift / h0.abs() } else { drift };
    let energy_check = CheckBuilder::new("energy-drift", "eq33")
        .field("h_initial", num(h0))
        .field("max_drift", num(drift))
        .finish(drift_residual, DRIFT_TOL);

    let mode_check = mode_form_check(&derived, &states);

    let h_final = hamiltonian_value(&cfg.params, states.last().expect("trajectory is nonempty"));
    let (value, _) = envelope(
        "simulate",
        ctx.precision_name(),
        ctx.norm.alpha,
        ctx.norm.beta,
        json!({
            "params": {
                "mass": num(cfg.params.mass),
                "damping": num(cfg.params.damping),
                "stiffness": num(cfg.params.stiffness),
                "coupling_a": num(cfg.params.coupling_a),
                "coupling_b": num(cfg.params.coupling_b),
                "alpha_y": num(cfg.params.alpha_y),
                "beta_y": num(cfg.params.beta_y),
            },
            "dt": num(cfg.dt),
            "horizon": num(cfg.horizon),
            "initial": state_json(&cfg.initial),
        }),
        vec![
            ("derived", derived_json(&derived)),
            (
                "trajectory",
                json!({
                    "steps": states.len() as u64,
                    "final": state_json(states.last().expect("trajectory is nonempty")),
                    "h_initial": num(h0),
                    "h_final": num(h_final),
                }),
            ),
        ],
        vec![energy_check, mode_check],
    );
    let output = RunOutput::from_envelope(value);
    Ok(match format {
        Format::Json => output,
        Format::Csv => {
            let mut buf = Vec::new();
            write_trajectory_csv(&cfg.params, &states, &mut buf)
                .expect("in-memory CSV writing cannot fail");
            RunOutput {
                text: String::from_utf8(buf).expect("trajectory CSV is UTF-8"),
                ..output
            }
        }
    })
}

/// Compare both decoupled modes of the integrated trajectory against their
/// exponential-times-oscillation closed forms, relative to the growing
/// envelope.
fn mode_form_check(derived: &DerivedParams, states: &[TrajectoryState]) -> Value {
    let start = match change_of_variables(derived, &states[0]) {
        Ok(m) => m,
        Err(err) => {
            return CheckBuilder::new("mode-closed-form", "eq38").finish_error(&err.to_string())
        }
    };
    let rate = derived.mode_damping.abs() / (2.0 * derived.mode_mass);
    let omega = derived.mode_freq_sq.sqrt();
    let gain_swing = start.gain.abs() + ((start.gain_vel - rate * start.gain) / omega).abs();
    let loss_swing = start.loss.abs() + ((start.loss_vel + rate * start.loss) / omega).abs();

    let mut residual = 0.0_f64;
    for s in states {
        let modes = match change_of_variables(derived, s) {
            Ok(m) => m,
            Err(err) => {
                return CheckBuilder::new("mode-closed-form", "eq38")
                    .finish_error(&err.to_string())
            }
        };
        let t = s.t - states[0].t;
        let gain_expected = mode_closed_form(start.gain, start.gain_vel, rate, omega, t);
        let loss_expected = mode_closed_form(start.loss, start.loss_vel, -rate, omega, t);
        let gain_env = (rate * t).exp() * gain_swing;
        let loss_env = (-rate * t).exp() * loss_swing;
        residual = residual.max((modes.gain - gain_expected).abs() / gain_env.max(1.0));
        residual = residual.max((modes.loss - loss_expected).abs() / loss_env.max(1.0));
    }
    CheckBuilder::new("mode-closed-form", "eq38")
        .field("growth_rate", num(rate))
        .field("frequency", num(omega))
        .finish(residual, MODE_TOL)
}
