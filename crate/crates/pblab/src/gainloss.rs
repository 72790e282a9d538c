//! Classical gain-loss oscillator pair: parameter maps, fixed-step
//! integration, the conserved energy-like invariant, and the mode
//! coordinates in which the pair decouples into one damped and one
//! anti-damped oscillator.
//!
//! The Lagrangian is the cross form `m*xdot*ydot - k*x*y`, the antisymmetric
//! damping exchange `(gamma/2)*(x*ydot - xdot*y)`, and two quadratic
//! self-terms `a*(m*xdot^2 - k*x^2)` and `b*(m*ydot^2 - k*y^2)` controlled
//! by the coupling weights `a` and `b`. The Euler-Lagrange equations couple
//! the accelerations; eliminating that coupling leaves a velocity-coupled
//! system with effective mass and stiffness scaled by `1 - 4ab`, which is
//! what the integrator advances. Both forms are implemented so they can be
//! cross-checked against each other.
//!
//! The Legendre transform of the Lagrangian evaluates, in velocity
//! variables, to `m*xdot*ydot + k*x*y + a*(m*xdot^2 + k*x^2) +
//! b*(m*ydot^2 + k*y^2)`, and its time derivative vanishes identically on
//! solutions, so it serves as the conserved quantity the integrator is
//! audited against.
//!
//! A linear change of coordinates with the x-row weights determined by the
//! y-row weights brings the Lagrangian to the same cross form with mode
//! mass, stiffness, and damping `(m1, k1, g1)`; the sign constraint on the
//! weights makes `m1, k1` positive and `g1` negative, so one mode gains
//! exactly what the other loses. The decoupled `a = b = 0` system is
//! handled by a dedicated branch because the general weight formulas divide
//! by `a`.

use crate::error::{PbError, Result};
use crate::operators::HamiltonianParams;

/// Hard cap on the number of integration steps a single call may take.
const MAX_STEPS: usize = 20_000_000;

/// Physical parameters of the coupled oscillator pair.
///
/// `mass` and `stiffness` are shared by both coordinates; `damping` damps
/// `x` and pumps `y` with the same rate. The coupling weights multiply the
/// quadratic self-terms of `x` (`coupling_a`) and `y` (`coupling_b`). The
/// mode weights `alpha_y`, `beta_y` fix the free row of the mode map; the
/// x-row is derived from them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemParams {
    /// Oscillator mass, shared by both coordinates.
    pub mass: f64,
    /// Friction rate: damps the `x` coordinate, pumps `y`.
    pub damping: f64,
    /// Spring constant, shared by both coordinates.
    pub stiffness: f64,
    /// Weight of the `x` self-term in the Lagrangian.
    pub coupling_a: f64,
    /// Weight of the `y` self-term in the Lagrangian.
    pub coupling_b: f64,
    /// Weight of the gain mode in the `y` coordinate.
    pub alpha_y: f64,
    /// Weight of the loss mode in the `y` coordinate.
    pub beta_y: f64,
}

/// Default loss-mode weight: the sign that satisfies the mode-mass
/// constraint with a unit gain-mode weight.
fn default_loss_weight(coupling_a: f64) -> f64 {
    if coupling_a < 0.0 {
        1.0
    } else {
        -1.0
    }
}

impl SystemParams {
    /// Validated constructor; field order matches the struct.
    pub fn new(
        mass: f64,
        damping: f64,
        stiffness: f64,
        coupling_a: f64,
        coupling_b: f64,
        alpha_y: f64,
        beta_y: f64,
    ) -> Result<Self> {
        let params = Self {
            mass,
            damping,
            stiffness,
            coupling_a,
            coupling_b,
            alpha_y,
            beta_y,
        };
        params.validate()?;
        Ok(params)
    }

    /// Constructor choosing the mode weights `(1, -sign(a))` automatically;
    /// this satisfies the sign constraint with minimal magnitude.
    pub fn with_default_weights(
        mass: f64,
        damping: f64,
        stiffness: f64,
        coupling_a: f64,
        coupling_b: f64,
    ) -> Result<Self> {
        Self::new(
            mass,
            damping,
            stiffness,
            coupling_a,
            coupling_b,
            1.0,
            default_loss_weight(coupling_a),
        )
    }

    /// Check every documented invariant of the parameter set.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.mass,
            self.damping,
            self.stiffness,
            self.coupling_a,
            self.coupling_b,
            self.alpha_y,
            self.beta_y,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(PbError::NonFinite("system parameters".into()));
        }
        if self.mass <= 0.0 {
            return Err(PbError::InvalidArgument(format!(
                "mass must be positive, got {}",
                self.mass
            )));
        }
        if self.stiffness <= 0.0 {
            return Err(PbError::InvalidArgument(format!(
                "stiffness must be positive, got {}",
                self.stiffness
            )));
        }
        if self.damping < 0.0 {
            return Err(PbError::InvalidArgument(format!(
                "damping must be nonnegative, got {}",
                self.damping
            )));
        }
        if self.alpha_y == 0.0 || self.beta_y == 0.0 {
            return Err(PbError::InvalidArgument(
                "mode weights alpha_y and beta_y must be nonzero".into(),
            ));
        }
        let product = self.coupling_a * self.coupling_b;
        if product >= 0.25 {
            return Err(PbError::Constraint(format!(
                "coupling product a*b must stay below 1/4 to keep the \
                 effective mass positive, got {product}"
            )));
        }
        if self.coupling_a != 0.0 {
            let ratio = self.alpha_y * self.beta_y / self.coupling_a;
            if ratio >= 0.0 {
                return Err(PbError::Constraint(format!(
                    "alpha_y*beta_y/a must be negative to make the mode mass \
                     positive, got {ratio}"
                )));
            }
        }
        Ok(())
    }

    /// The determinant factor `1 - 4ab` scaling the effective constants.
    pub fn coupling_det(&self) -> f64 {
        1.0 - 4.0 * self.coupling_a * self.coupling_b
    }
}

/// Parameters derived from a [`SystemParams`]: the effective constants of
/// the velocity-coupled form, the full mode map, and the mode-pair
/// constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivedParams {
    /// Effective mass `m * (1 - 4ab)` of the velocity-coupled form.
    pub effective_mass: f64,
    /// Effective stiffness `k * (1 - 4ab)` of the velocity-coupled form.
    pub effective_stiffness: f64,
    /// Weight of the gain mode in the `x` coordinate.
    pub alpha_x: f64,
    /// Weight of the loss mode in the `x` coordinate.
    pub beta_x: f64,
    /// Weight of the gain mode in the `y` coordinate.
    pub alpha_y: f64,
    /// Weight of the loss mode in the `y` coordinate.
    pub beta_y: f64,
    /// Mass of the decoupled mode pair; positive under the sign constraint.
    pub mode_mass: f64,
    /// Stiffness of the decoupled mode pair; positive likewise.
    pub mode_stiffness: f64,
    /// Signed damping of the mode pair; nonpositive under the sign
    /// constraint. Its magnitude damps the loss mode and pumps the gain
    /// mode.
    pub mode_damping: f64,
    /// Squared oscillation frequency of the mode pair; the implemented
    /// regime requires it positive.
    pub mode_freq_sq: f64,
    /// Determinant `alpha_x*beta_y - beta_x*alpha_y` of the mode map.
    pub jacobian: f64,
}

impl DerivedParams {
    /// Quantum-side parameters of the decoupled pair: oscillation
    /// frequency, gain-rate magnitude, and mode mass.
    pub fn mode_hamiltonian(&self) -> Result<HamiltonianParams> {
        HamiltonianParams::new(
            self.mode_freq_sq.sqrt(),
            self.mode_damping.abs(),
            self.mode_mass,
        )
    }
}

/// Squared mode frequency `k/m - gamma^2 / (4 m^2 (1 - 4ab))`.
fn mode_freq_sq(p: &SystemParams) -> f64 {
    p.stiffness / p.mass
        - p.damping * p.damping
            / (4.0 * p.mass * p.mass * (1.0 - 4.0 * p.coupling_a * p.coupling_b))
}

/// Derive the effective constants, mode map, and mode-pair parameters.
///
/// The decoupled system `a = b = 0` takes a dedicated branch: the damped
/// coordinate is already `x` and the anti-damped one `y`, so the mode map
/// is fixed to swap them and the mode constants are the physical ones with
/// the damping sign flipped to the mode convention. A zero `a` with a
/// nonzero `b` is outside the implemented regime because the general
/// weight formulas divide by `a` while the `b` coupling still acts.
pub fn derive_params(params: &SystemParams) -> Result<DerivedParams> {
    params.validate()?;
    if params.coupling_a == 0.0 && params.coupling_b != 0.0 {
        return Err(PbError::OutsideRegime(
            "the x-side coupling is zero while the y-side coupling is not; \
             the mode transformation divides by the x-side coupling"
                .into(),
        ));
    }
    let freq_sq = mode_freq_sq(params);
    if freq_sq <= 0.0 {
        return Err(PbError::OutsideRegime(format!(
            "squared mode frequency must be positive, got {freq_sq} \
             (overdamped pair)"
        )));
    }
    let det = params.coupling_det();
    let (ratio, root, alpha_x, beta_x, alpha_y, beta_y) = if params.coupling_a == 0.0 {
        (-1.0, 1.0, 0.0, 1.0, 1.0, 0.0)
    } else {
        let root = det.sqrt();
        let ratio = params.alpha_y * params.beta_y / params.coupling_a;
        (
            ratio,
            root,
            -(params.alpha_y / (2.0 * params.coupling_a)) * (1.0 - root),
            -(params.beta_y / (2.0 * params.coupling_a)) * (1.0 + root),
            params.alpha_y,
            params.beta_y,
        )
    };
    let jacobian = alpha_x * beta_y - beta_x * alpha_y;
    let closed_form = ratio * root;
    if !jacobian.is_finite()
        || jacobian == 0.0
        || (jacobian - closed_form).abs() > 1e-12 * closed_form.abs().max(1.0)
    {
        return Err(PbError::Constraint(format!(
            "mode map determinant {jacobian} does not match its closed form \
             {closed_form}"
        )));
    }
    Ok(DerivedParams {
        effective_mass: params.mass * det,
        effective_stiffness: params.stiffness * det,
        alpha_x,
        beta_x,
        alpha_y,
        beta_y,
        mode_mass: -params.mass * ratio * det,
        mode_stiffness: -params.stiffness * ratio * det,
        mode_damping: params.damping * ratio * root,
        mode_freq_sq: freq_sq,
        jacobian,
    })
}

/// One sample of a trajectory in the physical coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryState {
    /// Time stamp of the sample.
    pub t: f64,
    /// Damped coordinate.
    pub x: f64,
    /// Anti-damped coordinate.
    pub y: f64,
    /// Velocity of `x`.
    pub xdot: f64,
    /// Velocity of `y`.
    pub ydot: f64,
}

impl TrajectoryState {
    /// Plain constructor in field order.
    pub fn new(t: f64, x: f64, y: f64, xdot: f64, ydot: f64) -> Self {
        Self { t, x, y, xdot, ydot }
    }

    /// Whether every component is a finite float.
    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.x.is_finite()
            && self.y.is_finite()
            && self.xdot.is_finite()
            && self.ydot.is_finite()
    }
}

/// Accelerations of the velocity-coupled form: the acceleration coupling
/// eliminated, each second derivative explicit.
fn reduced_accelerations(p: &SystemParams, x: f64, y: f64, xdot: f64, ydot: f64) -> (f64, f64) {
    let det = p.coupling_det();
    let em = p.mass * det;
    let ek = p.stiffness * det;
    (
        (-p.damping * xdot - ek * x - 2.0 * p.coupling_b * p.damping * ydot) / em,
        (p.damping * ydot - ek * y + 2.0 * p.coupling_a * p.damping * xdot) / em,
    )
}

/// Accelerations of the acceleration-coupled form: the Euler-Lagrange
/// equations as they stand, solved as a 2-by-2 linear system at each
/// evaluation. Kept as an independent route for cross-checking
/// [`integrate`].
fn unreduced_accelerations(p: &SystemParams, x: f64, y: f64, xdot: f64, ydot: f64) -> (f64, f64) {
    let a = p.coupling_a;
    let b = p.coupling_b;
    let rhs_x = -p.damping * xdot - p.stiffness * (x + 2.0 * b * y);
    let rhs_y = p.damping * ydot - p.stiffness * (y + 2.0 * a * x);
    let det = p.mass * p.coupling_det();
    (
        (rhs_x - 2.0 * b * rhs_y) / det,
        (rhs_y - 2.0 * a * rhs_x) / det,
    )
}

/// Advance the first-order system with classic fixed-step fourth-order
/// Runge-Kutta; the returned trajectory includes the start state.
fn rk4_trajectory(
    accel: &dyn Fn(f64, f64, f64, f64) -> (f64, f64),
    start: &TrajectoryState,
    dt: f64,
    horizon: f64,
) -> Result<Vec<TrajectoryState>> {
    if !dt.is_finite() || !horizon.is_finite() {
        return Err(PbError::NonFinite("step size or horizon".into()));
    }
    if dt <= 0.0 {
        return Err(PbError::InvalidArgument(format!(
            "step size must be positive, got {dt}"
        )));
    }
    if horizon < dt {
        return Err(PbError::InvalidArgument(format!(
            "horizon {horizon} is shorter than one step {dt}"
        )));
    }
    if !start.is_finite() {
        return Err(PbError::NonFinite("initial state".into()));
    }
    let steps_f = (horizon / dt).round();
    if steps_f > MAX_STEPS as f64 {
        return Err(PbError::InvalidArgument(format!(
            "horizon / step = {steps_f} exceeds the {MAX_STEPS}-step cap"
        )));
    }
    let steps = steps_f as usize;
    let derivative = |u: [f64; 4]| -> [f64; 4] {
        let (xdd, ydd) = accel(u[0], u[1], u[2], u[3]);
        [u[2], u[3], xdd, ydd]
    };
    let shifted = |u: &[f64; 4], k: &[f64; 4], h: f64| -> [f64; 4] {
        [
            u[0] + h * k[0],
            u[1] + h * k[1],
            u[2] + h * k[2],
            u[3] + h * k[3],
        ]
    };
    let mut trajectory = Vec::with_capacity(steps + 1);
    trajectory.push(*start);
    let mut u = [start.x, start.y, start.xdot, start.ydot];
    for step in 1..=steps {
        let k1 = derivative(u);
        let k2 = derivative(shifted(&u, &k1, dt / 2.0));
        let k3 = derivative(shifted(&u, &k2, dt / 2.0));
        let k4 = derivative(shifted(&u, &k3, dt));
        for i in 0..4 {
            u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if !u.iter().all(|v| v.is_finite()) {
            return Err(PbError::NonFiniteState { step });
        }
        trajectory.push(TrajectoryState {
            t: start.t + step as f64 * dt,
            x: u[0],
            y: u[1],
            xdot: u[2],
            ydot: u[3],
        });
    }
    Ok(trajectory)
}

/// Integrate the velocity-coupled equations of motion from `start` over
/// `horizon` with fixed step `dt` (the horizon is rounded to a whole number
/// of steps). The parameter set must be inside the implemented regime:
/// [`derive_params`] is consulted first and its errors propagate.
pub fn integrate(
    params: &SystemParams,
    start: &TrajectoryState,
    dt: f64,
    horizon: f64,
) -> Result<Vec<TrajectoryState>> {
    derive_params(params)?;
    rk4_trajectory(
        &|x, y, xdot, ydot| reduced_accelerations(params, x, y, xdot, ydot),
        start,
        dt,
        horizon,
    )
}

/// Integrate the acceleration-coupled form of the equations of motion.
///
/// Algebraically equivalent to [`integrate`]; the two routes share no
/// acceleration code, so their agreement cross-checks the elimination step.
pub fn integrate_unreduced(
    params: &SystemParams,
    start: &TrajectoryState,
    dt: f64,
    horizon: f64,
) -> Result<Vec<TrajectoryState>> {
    derive_params(params)?;
    rk4_trajectory(
        &|x, y, xdot, ydot| unreduced_accelerations(params, x, y, xdot, ydot),
        start,
        dt,
        horizon,
    )
}

/// The conserved energy-like invariant: the Legendre transform
/// `px*xdot + py*ydot - L` expressed in velocity variables. Its time
/// derivative vanishes identically on solutions of the equations of
/// motion, for every parameter set.
pub fn hamiltonian_value(p: &SystemParams, s: &TrajectoryState) -> f64 {
    p.mass * s.xdot * s.ydot
        + p.stiffness * s.x * s.y
        + p.coupling_a * (p.mass * s.xdot * s.xdot + p.stiffness * s.x * s.x)
        + p.coupling_b * (p.mass * s.ydot * s.ydot + p.stiffness * s.y * s.y)
}

/// The Lagrangian of the pair evaluated at a state.
pub fn lagrangian_value(p: &SystemParams, s: &TrajectoryState) -> f64 {
    p.mass * s.xdot * s.ydot + 0.5 * p.damping * (s.x * s.ydot - s.xdot * s.y)
        - p.stiffness * s.x * s.y
        + p.coupling_a * (p.mass * s.xdot * s.xdot - p.stiffness * s.x * s.x)
        + p.coupling_b * (p.mass * s.ydot * s.ydot - p.stiffness * s.y * s.y)
}

/// One sample of a trajectory in the gain/loss mode coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeState {
    /// Time stamp of the sample.
    pub t: f64,
    /// Anti-damped (pumped) mode coordinate.
    pub gain: f64,
    /// Damped (dissipating) mode coordinate.
    pub loss: f64,
    /// Velocity of the gain mode.
    pub gain_vel: f64,
    /// Velocity of the loss mode.
    pub loss_vel: f64,
}

/// Invert the mode map at one state: positions and velocities transform by
/// the same linear map, so both rows invert with the same determinant.
pub fn change_of_variables(d: &DerivedParams, s: &TrajectoryState) -> Result<ModeState> {
    let j = d.jacobian;
    if !j.is_finite() || j == 0.0 {
        return Err(PbError::Constraint(format!(
            "mode map determinant {j} is singular; the map does not invert"
        )));
    }
    Ok(ModeState {
        t: s.t,
        gain: (d.beta_y * s.x - d.beta_x * s.y) / j,
        loss: (-d.alpha_y * s.x + d.alpha_x * s.y) / j,
        gain_vel: (d.beta_y * s.xdot - d.beta_x * s.ydot) / j,
        loss_vel: (-d.alpha_y * s.xdot + d.alpha_x * s.ydot) / j,
    })
}

/// Apply the mode map forward: positions from mode coordinates.
pub fn modes_to_positions(d: &DerivedParams, m: &ModeState) -> TrajectoryState {
    TrajectoryState {
        t: m.t,
        x: d.alpha_x * m.gain + d.beta_x * m.loss,
        y: d.alpha_y * m.gain + d.beta_y * m.loss,
        xdot: d.alpha_x * m.gain_vel + d.beta_x * m.loss_vel,
        ydot: d.alpha_y * m.gain_vel + d.beta_y * m.loss_vel,
    }
}

/// The Lagrangian in mode coordinates. Equals [`lagrangian_value`] at the
/// mapped state: the mode constants were chosen exactly so the quadratic
/// self-terms cancel and only the cross form survives.
pub fn mode_lagrangian_value(d: &DerivedParams, m: &ModeState) -> f64 {
    d.mode_mass * m.gain_vel * m.loss_vel
        + 0.5 * d.mode_damping.abs() * (m.loss * m.gain_vel - m.loss_vel * m.gain)
        - d.mode_stiffness * m.gain * m.loss
}

/// A complete simulation request: parameters, step size, horizon, and the
/// initial state.
#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    /// Physical parameters of the pair.
    pub params: SystemParams,
    /// Fixed integration step.
    pub dt: f64,
    /// Total integration time.
    pub horizon: f64,
    /// State the trajectory starts from.
    pub initial: TrajectoryState,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            params: SystemParams {
                mass: 1.0,
                damping: 0.2,
                stiffness: 1.0,
                coupling_a: 0.0,
                coupling_b: 0.0,
                alpha_y: 1.0,
                beta_y: -1.0,
            },
            dt: 1e-3,
            horizon: 10.0,
            initial: TrajectoryState::new(0.0, 1.0, 0.0, 0.0, 0.0),
        }
    }
}

impl SimConfig {
    /// Parse a `key = value` configuration text.
    ///
    /// Blank lines and `#` comments are skipped. Keys (case-insensitive):
    /// `mass`/`m`, `damping`/`gamma`, `stiffness`/`k`, `coupling_a`/`a`,
    /// `coupling_b`/`b`, `alpha_y`, `beta_y`, `dt`, `horizon`/`t`, and the
    /// initial-state entries `x0`, `y0`, `xdot0`, `ydot0`. Unset keys keep
    /// the defaults; an unset `beta_y` follows the sign of the final
    /// `coupling_a` so the sign constraint holds automatically.
    pub fn parse_key_values(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut beta_set = false;
        for (index, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lineno = index + 1;
            let (key, value) = line.split_once('=').ok_or_else(|| {
                PbError::InvalidArgument(format!(
                    "config line {lineno}: expected `key = value`, got {line:?}"
                ))
            })?;
            let key = key.trim().to_ascii_lowercase();
            let value: f64 = value.trim().parse().map_err(|_| {
                PbError::InvalidArgument(format!(
                    "config line {lineno}: cannot parse {:?} as a number",
                    value.trim()
                ))
            })?;
            match key.as_str() {
                "mass" | "m" => cfg.params.mass = value,
                "damping" | "gamma" => cfg.params.damping = value,
                "stiffness" | "k" => cfg.params.stiffness = value,
                "coupling_a" | "a" => cfg.params.coupling_a = value,
                "coupling_b" | "b" => cfg.params.coupling_b = value,
                "alpha_y" => cfg.params.alpha_y = value,
                "beta_y" => {
                    cfg.params.beta_y = value;
                    beta_set = true;
                }
                "dt" => cfg.dt = value,
                "horizon" | "t" => cfg.horizon = value,
                "x0" => cfg.initial.x = value,
                "y0" => cfg.initial.y = value,
                "xdot0" => cfg.initial.xdot = value,
                "ydot0" => cfg.initial.ydot = value,
                other => {
                    return Err(PbError::InvalidArgument(format!(
                        "config line {lineno}: unknown key {other:?}"
                    )))
                }
            }
        }
        if !beta_set {
            cfg.params.beta_y = default_loss_weight(cfg.params.coupling_a);
        }
        cfg.params.validate()?;
        Ok(cfg)
    }
}

/// Write a trajectory as CSV rows `t,x,y,xdot,ydot,H`, with the invariant
/// recomputed per row so conservation is visible in the output.
pub fn write_trajectory_csv<W: std::io::Write>(
    params: &SystemParams,
    states: &[TrajectoryState],
    out: &mut W,
) -> std::io::Result<()> {
    writeln!(out, "t,x,y,xdot,ydot,H")?;
    for s in states {
        writeln!(
            out,
            "{:e},{:e},{:e},{:e},{:e},{:e}",
            s.t,
            s.x,
            s.y,
            s.xdot,
            s.ydot,
            hamiltonian_value(params, s)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn coupled_example() -> SystemParams {
        SystemParams::new(1.0, 0.2, 1.0, 0.1, 0.1, 1.0, -1.0).unwrap()
    }

    fn decoupled_example() -> SystemParams {
        SystemParams::new(1.0, 0.2, 1.0, 0.0, 0.0, 1.0, -1.0).unwrap()
    }

    fn rest_displacement() -> TrajectoryState {
        TrajectoryState::new(0.0, 1.0, 0.0, 0.0, 0.0)
    }

    /// Closed form of `m q'' + gamma q' + k q = 0` (sign < 0 flips the
    /// damping and grows the envelope instead).
    fn oscillator_closed_form(
        m: f64,
        gamma: f64,
        k: f64,
        q0: f64,
        v0: f64,
        sign: f64,
        t: f64,
    ) -> f64 {
        let decay = sign * gamma / (2.0 * m);
        let omega = (k / m - decay * decay).sqrt();
        let c2 = (v0 + decay * q0) / omega;
        (-decay * t).exp() * (q0 * (omega * t).cos() + c2 * (omega * t).sin())
    }

    #[test]
    fn parameter_validation_rejects_out_of_domain_values() {
        let ok = coupled_example();
        assert!(ok.validate().is_ok());
        let cases = [
            SystemParams { mass: 0.0, ..ok },
            SystemParams { mass: -1.0, ..ok },
            SystemParams { stiffness: 0.0, ..ok },
            SystemParams { damping: -0.1, ..ok },
            SystemParams { alpha_y: 0.0, ..ok },
            SystemParams { beta_y: 0.0, ..ok },
        ];
        for bad in cases {
            assert!(matches!(bad.validate(), Err(PbError::InvalidArgument(_))));
        }
        let nan = SystemParams {
            damping: f64::NAN,
            ..ok
        };
        assert!(matches!(nan.validate(), Err(PbError::NonFinite(_))));
    }

    #[test]
    fn coupling_constraints_are_rejected_with_the_right_errors() {
        let ok = coupled_example();
        let saturated = SystemParams {
            coupling_a: 0.5,
            coupling_b: 0.5,
            ..ok
        };
        assert!(matches!(saturated.validate(), Err(PbError::Constraint(_))));
        let wrong_sign = SystemParams { beta_y: 1.0, ..ok };
        assert!(matches!(wrong_sign.validate(), Err(PbError::Constraint(_))));
        let half_coupled = SystemParams {
            coupling_a: 0.0,
            ..ok
        };
        assert!(half_coupled.validate().is_ok());
        assert!(matches!(
            derive_params(&half_coupled),
            Err(PbError::OutsideRegime(_))
        ));
        let overdamped = SystemParams {
            damping: 3.0,
            coupling_a: 0.0,
            coupling_b: 0.0,
            ..ok
        };
        assert!(matches!(
            derive_params(&overdamped),
            Err(PbError::OutsideRegime(_))
        ));
        assert!(derive_params(&ok).is_ok());
    }

    #[test]
    fn derived_parameters_match_hand_computed_values() {
        // Frozen oracle: recomputed from the closed formulas with an
        // independent script before this module was written.
        let d = derive_params(&coupled_example()).unwrap();
        assert_relative_eq!(d.effective_mass, 0.96, max_relative = 1e-15);
        assert_relative_eq!(d.effective_stiffness, 0.96, max_relative = 1e-15);
        assert_relative_eq!(d.alpha_x, -1.010_205_144_336_440_2e-1, max_relative = 1e-14);
        assert_relative_eq!(d.beta_x, 9.898_979_485_566_355_8, max_relative = 1e-14);
        assert_relative_eq!(d.mode_mass, 9.6, max_relative = 1e-14);
        assert_relative_eq!(d.mode_stiffness, 9.6, max_relative = 1e-14);
        assert_relative_eq!(d.mode_damping, -1.959_591_794_226_542_4, max_relative = 1e-14);
        assert_relative_eq!(d.mode_freq_sq, 9.895_833_333_333_333_7e-1, max_relative = 1e-14);
        assert_relative_eq!(d.jacobian, -9.797_958_971_132_711_5, max_relative = 1e-14);
    }

    #[test]
    fn mode_parameters_are_internally_consistent() {
        let d = derive_params(&coupled_example()).unwrap();
        assert!(d.mode_mass > 0.0);
        assert!(d.mode_stiffness > 0.0);
        assert!(d.mode_damping < 0.0);
        let freq_from_modes = d.mode_stiffness / d.mode_mass
            - d.mode_damping * d.mode_damping / (4.0 * d.mode_mass * d.mode_mass);
        assert_relative_eq!(d.mode_freq_sq, freq_from_modes, max_relative = 1e-13);
        let h = d.mode_hamiltonian().unwrap();
        assert_relative_eq!(h.frequency * h.frequency, d.mode_freq_sq, max_relative = 1e-15);
        assert_eq!(h.gain_rate, d.mode_damping.abs());
        assert_eq!(h.mass, d.mode_mass);
    }

    #[test]
    fn decoupled_limit_fixes_the_mode_map() {
        let p = SystemParams::new(2.0, 0.3, 5.0, 0.0, 0.0, 1.0, -1.0).unwrap();
        let d = derive_params(&p).unwrap();
        assert_eq!(d.effective_mass, 2.0);
        assert_eq!(d.effective_stiffness, 5.0);
        assert_eq!(d.mode_mass, 2.0);
        assert_eq!(d.mode_stiffness, 5.0);
        assert_eq!(d.mode_damping, -0.3);
        assert_eq!(
            (d.alpha_x, d.beta_x, d.alpha_y, d.beta_y),
            (0.0, 1.0, 1.0, 0.0)
        );
        assert_eq!(d.jacobian, -1.0);
        assert_relative_eq!(
            d.mode_freq_sq,
            5.0 / 2.0 - 0.09 / 16.0,
            max_relative = 1e-15
        );
        let s = TrajectoryState::new(0.0, 0.7, -0.4, 0.2, 0.9);
        let m = change_of_variables(&d, &s).unwrap();
        assert_eq!((m.gain, m.loss), (s.y, s.x));
        assert_eq!((m.gain_vel, m.loss_vel), (s.ydot, s.xdot));
    }

    #[test]
    fn default_weights_satisfy_the_sign_constraint() {
        let plus = SystemParams::with_default_weights(1.0, 0.2, 1.0, 0.1, 0.1).unwrap();
        assert_eq!(plus.beta_y, -1.0);
        assert!(derive_params(&plus).is_ok());
        let minus = SystemParams::with_default_weights(1.0, 0.2, 1.0, -0.1, -0.1).unwrap();
        assert_eq!(minus.beta_y, 1.0);
        assert!(derive_params(&minus).is_ok());
        let zero = SystemParams::with_default_weights(1.0, 0.2, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(zero.beta_y, -1.0);
        assert!(derive_params(&zero).is_ok());
    }

    #[test]
    fn damped_coordinate_matches_the_closed_form() {
        let p = decoupled_example();
        let start = TrajectoryState::new(0.0, 1.0, 0.0, 0.3, 0.0);
        let traj = integrate(&p, &start, 1e-3, 10.0).unwrap();
        assert_eq!(traj.len(), 10_001);
        let mut worst = 0.0_f64;
        for s in &traj {
            let exact = oscillator_closed_form(1.0, 0.2, 1.0, 1.0, 0.3, 1.0, s.t);
            worst = worst.max((s.x - exact).abs());
            assert_eq!(s.y, 0.0);
            assert_eq!(s.ydot, 0.0);
        }
        assert!(worst <= 1e-6, "closed-form deviation {worst}");
    }

    #[test]
    fn antidamped_coordinate_grows_with_the_closed_form() {
        let p = decoupled_example();
        let start = TrajectoryState::new(0.0, 0.0, 0.5, 0.0, -0.2);
        let traj = integrate(&p, &start, 1e-3, 10.0).unwrap();
        let mut worst = 0.0_f64;
        let mut peak = 0.0_f64;
        for s in &traj {
            let exact = oscillator_closed_form(1.0, 0.2, 1.0, 0.5, -0.2, -1.0, s.t);
            worst = worst.max((s.y - exact).abs());
            peak = peak.max(s.y.abs());
            assert_eq!(s.x, 0.0);
            assert_eq!(s.xdot, 0.0);
        }
        assert!(worst <= 1e-6, "closed-form deviation {worst}");
        // The envelope must have pumped the amplitude visibly over e^1.
        assert!(peak > 1.2, "expected pumped amplitude, peak {peak}");
    }

    #[test]
    fn energy_is_conserved_along_coupled_trajectories() {
        let p = coupled_example();
        let start = rest_displacement();
        let traj = integrate(&p, &start, 1e-4, 5.0).unwrap();
        let reference = hamiltonian_value(&p, &start);
        assert_relative_eq!(reference, 0.1, max_relative = 1e-15);
        let scale = reference.abs().max(1.0);
        let mut worst = 0.0_f64;
        for s in &traj {
            worst = worst.max((hamiltonian_value(&p, s) - reference).abs() / scale);
        }
        assert!(worst <= 1e-8, "relative energy drift {worst}");
    }

    #[test]
    fn reduced_and_unreduced_forms_agree() {
        let p = coupled_example();
        let start = rest_displacement();
        let first = integrate(&p, &start, 1e-3, 5.0).unwrap();
        let second = integrate_unreduced(&p, &start, 1e-3, 5.0).unwrap();
        assert_eq!(first.len(), second.len());
        let mut worst = 0.0_f64;
        for (a, b) in first.iter().zip(&second) {
            worst = worst
                .max((a.x - b.x).abs())
                .max((a.y - b.y).abs())
                .max((a.xdot - b.xdot).abs())
                .max((a.ydot - b.ydot).abs());
        }
        assert!(worst <= 1e-8, "route disagreement {worst}");
    }

    #[test]
    fn integrator_matches_an_independent_reference() {
        // Reference state at t = 5 from SciPy's DOP853 at rtol 1e-13 /
        // atol 1e-14 on the same equations, frozen before this module was
        // written.
        let p = coupled_example();
        let traj = integrate(&p, &rest_displacement(), 1e-4, 5.0).unwrap();
        let last = traj.last().unwrap();
        assert_abs_diff_eq!(last.x, 9.054_621_419_662_817_2e-2, epsilon = 1e-9);
        assert_abs_diff_eq!(last.y, 5.103_705_247_418_455_9e-2, epsilon = 1e-9);
        assert_abs_diff_eq!(last.xdot, 5.722_767_127_669_690_1e-1, epsilon = 1e-9);
        assert_abs_diff_eq!(last.ydot, 1.056_013_951_639_893_2e-1, epsilon = 1e-9);
    }

    #[test]
    fn energy_drift_shrinks_at_fourth_order_or_better() {
        let p = coupled_example();
        let start = rest_displacement();
        let drift = |dt: f64| -> f64 {
            let traj = integrate(&p, &start, dt, 10.0).unwrap();
            let reference = hamiltonian_value(&p, &start);
            traj.iter()
                .map(|s| (hamiltonian_value(&p, s) - reference).abs())
                .fold(0.0, f64::max)
        };
        let coarse = drift(0.02);
        let fine = drift(0.01);
        // Keep the fine drift well above the roundoff floor so the ratio
        // measures truncation order, not noise.
        assert!(fine > 1e-14 && fine < 1e-10, "fine drift {fine}");
        let ratio = coarse / fine;
        // A fourth-order scheme must reach 16; this system actually shows
        // ~32 because the stability function's modulus deviates from the
        // exact exponential only at sixth order per step, making the
        // invariant drift fifth order. Assert the promised floor only.
        assert!(ratio > 12.0, "drift ratio {ratio} below fourth order");
    }

    #[test]
    fn lagrangian_agrees_across_coordinate_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x9e37_79b9);
        for params in [coupled_example(), decoupled_example()] {
            let d = derive_params(&params).unwrap();
            for _ in 0..100 {
                let s = TrajectoryState::new(
                    0.0,
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                );
                let direct = lagrangian_value(&params, &s);
                let modes = change_of_variables(&d, &s).unwrap();
                let through_modes = mode_lagrangian_value(&d, &modes);
                assert_abs_diff_eq!(direct, through_modes, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn mode_map_round_trips() {
        let d = derive_params(&coupled_example()).unwrap();
        let s = TrajectoryState::new(1.5, 0.3, -0.7, 0.11, 0.43);
        let m = change_of_variables(&d, &s).unwrap();
        let back = modes_to_positions(&d, &m);
        assert_abs_diff_eq!(back.x, s.x, epsilon = 1e-12);
        assert_abs_diff_eq!(back.y, s.y, epsilon = 1e-12);
        assert_abs_diff_eq!(back.xdot, s.xdot, epsilon = 1e-12);
        assert_abs_diff_eq!(back.ydot, s.ydot, epsilon = 1e-12);
        assert_eq!(back.t, s.t);
        let singular = DerivedParams { jacobian: 0.0, ..d };
        assert!(matches!(
            change_of_variables(&singular, &s),
            Err(PbError::Constraint(_))
        ));
    }

    #[test]
    fn mode_trajectories_satisfy_the_pair_equations() {
        let p = coupled_example();
        let d = derive_params(&p).unwrap();
        let dt = 5e-4;
        let traj = integrate(&p, &rest_displacement(), dt, 5.0).unwrap();
        let modes: Vec<ModeState> = traj
            .iter()
            .map(|s| change_of_variables(&d, s).unwrap())
            .collect();
        let damping_abs = d.mode_damping.abs();
        let mut worst = 0.0_f64;
        for w in modes.windows(3) {
            let gain_acc = (w[2].gain - 2.0 * w[1].gain + w[0].gain) / (dt * dt);
            let gain_vel = (w[2].gain - w[0].gain) / (2.0 * dt);
            let loss_acc = (w[2].loss - 2.0 * w[1].loss + w[0].loss) / (dt * dt);
            let loss_vel = (w[2].loss - w[0].loss) / (2.0 * dt);
            let gain_residual =
                d.mode_mass * gain_acc - damping_abs * gain_vel + d.mode_stiffness * w[1].gain;
            let loss_residual =
                d.mode_mass * loss_acc + damping_abs * loss_vel + d.mode_stiffness * w[1].loss;
            worst = worst.max(gain_residual.abs()).max(loss_residual.abs());
        }
        assert!(worst <= 1e-6, "mode equation residual {worst}");
    }

    #[test]
    fn hamiltonian_reduces_to_the_decoupled_form() {
        let p = decoupled_example();
        let zero = TrajectoryState::new(0.0, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(hamiltonian_value(&p, &zero), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let s = TrajectoryState::new(
                0.0,
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            );
            let expected = p.mass * s.xdot * s.ydot + p.stiffness * s.x * s.y;
            assert_eq!(hamiltonian_value(&p, &s), expected);
        }
    }

    #[test]
    fn step_validation_rejects_bad_arguments() {
        let p = coupled_example();
        let s = rest_displacement();
        assert!(matches!(
            integrate(&p, &s, 0.0, 1.0),
            Err(PbError::InvalidArgument(_))
        ));
        assert!(matches!(
            integrate(&p, &s, -0.1, 1.0),
            Err(PbError::InvalidArgument(_))
        ));
        assert!(matches!(
            integrate(&p, &s, 0.5, 0.25),
            Err(PbError::InvalidArgument(_))
        ));
        assert!(matches!(
            integrate(&p, &s, f64::NAN, 1.0),
            Err(PbError::NonFinite(_))
        ));
        assert!(matches!(
            integrate(&p, &s, 1e-9, 1e9),
            Err(PbError::InvalidArgument(_))
        ));
        let bad_state = TrajectoryState::new(0.0, f64::INFINITY, 0.0, 0.0, 0.0);
        assert!(matches!(
            integrate(&p, &bad_state, 0.1, 1.0),
            Err(PbError::NonFinite(_))
        ));
    }

    #[test]
    fn divergent_gain_trajectories_abort_with_the_step_index() {
        // Pure pumped branch with a unit rate: the envelope reaches the
        // float ceiling near e^745, i.e. around step 2980 at dt = 0.5.
        let p = SystemParams::new(1.0, 1.0, 1.0, 0.0, 0.0, 1.0, -1.0).unwrap();
        let start = TrajectoryState::new(0.0, 0.0, 1.0, 0.0, 0.0);
        match integrate(&p, &start, 0.5, 2000.0) {
            Err(PbError::NonFiniteState { step }) => {
                assert!(step > 1000 && step < 4001, "abort step {step}");
            }
            other => panic!("expected a non-finite abort, got {other:?}"),
        }
    }

    #[test]
    fn config_parses_aliases_comments_and_defaults() {
        let text = "\
            # coupled run\n\
            m = 2.0\n\
            gamma = 0.1\n\
            k = 3.0   # stiff spring\n\
            a = -0.2\n\
            b = 0.05\n\
            dt = 0.01\n\
            t = 2.5\n\
            x0 = 0.4\n\
            ydot0 = -1.5\n";
        let cfg = SimConfig::parse_key_values(text).unwrap();
        assert_eq!(cfg.params.mass, 2.0);
        assert_eq!(cfg.params.damping, 0.1);
        assert_eq!(cfg.params.stiffness, 3.0);
        assert_eq!(cfg.params.coupling_a, -0.2);
        assert_eq!(cfg.params.coupling_b, 0.05);
        assert_eq!(cfg.params.alpha_y, 1.0);
        // Unset beta_y follows the sign of the parsed coupling.
        assert_eq!(cfg.params.beta_y, 1.0);
        assert_eq!(cfg.dt, 0.01);
        assert_eq!(cfg.horizon, 2.5);
        assert_eq!(cfg.initial.x, 0.4);
        assert_eq!(cfg.initial.y, 0.0);
        assert_eq!(cfg.initial.ydot, -1.5);

        let explicit = SimConfig::parse_key_values("beta_y = -2.5\n").unwrap();
        assert_eq!(explicit.params.beta_y, -2.5);

        let unknown = SimConfig::parse_key_values("mass = 1\nwobble = 3\n");
        match unknown {
            Err(PbError::InvalidArgument(msg)) => {
                assert!(msg.contains("line 2"), "message {msg:?}");
                assert!(msg.contains("wobble"), "message {msg:?}");
            }
            other => panic!("expected an unknown-key error, got {other:?}"),
        }
        assert!(matches!(
            SimConfig::parse_key_values("mass = fast\n"),
            Err(PbError::InvalidArgument(_))
        ));
        assert!(matches!(
            SimConfig::parse_key_values("mass 1.0\n"),
            Err(PbError::InvalidArgument(_))
        ));
        // The assembled parameter set is validated before returning.
        assert!(matches!(
            SimConfig::parse_key_values("a = 0.6\nb = 0.6\n"),
            Err(PbError::Constraint(_))
        ));
    }

    #[test]
    fn trajectory_csv_lists_time_states_and_energy() {
        let p = coupled_example();
        let traj = integrate(&p, &rest_displacement(), 0.01, 0.1).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&p, &traj, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x,y,xdot,ydot,H");
        assert_eq!(lines.len(), 1 + 11);
        let mut energies = Vec::new();
        for row in &lines[1..] {
            let fields: Vec<f64> = row.split(',').map(|f| f.parse().unwrap()).collect();
            assert_eq!(fields.len(), 6);
            energies.push(fields[5]);
        }
        assert_relative_eq!(energies[0], 0.1, max_relative = 1e-12);
        for h in &energies {
            assert_relative_eq!(*h, energies[0], max_relative = 1e-9);
        }
    }

    /// Mirror of the documented acceptance region, written independently of
    /// the implementation's control flow.
    fn acceptance_predicate(p: &SystemParams) -> bool {
        let finite = [
            p.mass,
            p.damping,
            p.stiffness,
            p.coupling_a,
            p.coupling_b,
            p.alpha_y,
            p.beta_y,
        ]
        .iter()
        .all(|v| v.is_finite());
        finite
            && p.mass > 0.0
            && p.stiffness > 0.0
            && p.damping >= 0.0
            && p.alpha_y != 0.0
            && p.beta_y != 0.0
            && p.coupling_a * p.coupling_b < 0.25
            && (if p.coupling_a == 0.0 {
                p.coupling_b == 0.0
            } else {
                p.alpha_y * p.beta_y / p.coupling_a < 0.0
            })
            && p.stiffness / p.mass
                - p.damping * p.damping
                    / (4.0 * p.mass * p.mass * (1.0 - 4.0 * p.coupling_a * p.coupling_b))
                > 0.0
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn constraint_rejection_matches_an_independent_predicate(
            mass in 0.05f64..10.0,
            damping in 0.0f64..3.0,
            stiffness in 0.05f64..10.0,
            coupling_a in -1.0f64..1.0,
            coupling_b in -1.0f64..1.0,
            alpha_y in -2.0f64..2.0,
            beta_y in -2.0f64..2.0,
        ) {
            let p = SystemParams {
                mass,
                damping,
                stiffness,
                coupling_a,
                coupling_b,
                alpha_y,
                beta_y,
            };
            prop_assert_eq!(derive_params(&p).is_ok(), acceptance_predicate(&p));
        }

        #[test]
        fn mode_map_round_trips_on_random_valid_parameters(
            mass in 0.8f64..1.25,
            damping in 0.0f64..0.2,
            stiffness in 0.8f64..1.25,
            coupling_a in 0.05f64..0.45,
            coupling_b in -0.45f64..0.45,
            alpha_y in 0.1f64..2.0,
            beta_y in -2.0f64..-0.1,
            x in -3.0f64..3.0,
            y in -3.0f64..3.0,
            xdot in -3.0f64..3.0,
            ydot in -3.0f64..3.0,
        ) {
            let p = SystemParams::new(
                mass, damping, stiffness, coupling_a, coupling_b, alpha_y, beta_y,
            ).unwrap();
            let d = derive_params(&p).unwrap();
            let s = TrajectoryState::new(0.0, x, y, xdot, ydot);
            let m = change_of_variables(&d, &s).unwrap();
            let back = modes_to_positions(&d, &m);
            prop_assert!((back.x - s.x).abs() <= 1e-9 * s.x.abs().max(1.0));
            prop_assert!((back.y - s.y).abs() <= 1e-9 * s.y.abs().max(1.0));
            prop_assert!((back.xdot - s.xdot).abs() <= 1e-9 * s.xdot.abs().max(1.0));
            prop_assert!((back.ydot - s.ydot).abs() <= 1e-9 * s.ydot.abs().max(1.0));
            let direct = lagrangian_value(&p, &s);
            let through_modes = mode_lagrangian_value(&d, &m);
            prop_assert!((direct - through_modes).abs() <= 1e-9 * direct.abs().max(1.0));
        }
    }
}
