//! Sliding-mode formation controller with a variable performance corridor,
//! actuator saturation and the anti-windup auxiliary system, plus the maps
//! from per-axis acceleration commands to physical UAV/UGV inputs.
//!
//! The tracking error is normalized by a shrinking boundary and pushed through
//! an asymmetric barrier transform whose corridor half-widths breathe with the
//! auxiliary signal: saturation deficit widens the stressed side of the
//! corridor and the corridor reverts once the deficit clears.

use crate::dynamics::{rk4, UgvParams, UgvPlant};
use crate::ppc::{self, PerformanceProfile};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("corridor collapsed: half-widths (lower = {lower:.4}, upper = {upper:.4}) at t = {t}")]
    CorridorCollapse { lower: f64, upper: f64, t: f64 },
    #[error("thrust direction undefined: commanded vertical acceleration {0:.3} leaves no usable thrust")]
    ThrustDegenerate(f64),
    #[error("hand offset {0} makes the torque map singular")]
    SingularOffset(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Corridor half-widths are declared collapsed below this value.
pub const CORRIDOR_COLLAPSE_LIMIT: f64 = 0.01;

/// Formation offset of one agent on one axis at one instant, with its first
/// two time derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FormationOffset {
    pub h_p: f64,
    pub h_v: f64,
    pub h_acc: f64,
}

/// Per-axis actuator bounds on the commanded acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaturationLimits {
    pub lo: f64,
    pub hi: f64,
}

impl SaturationLimits {
    pub fn new(lo: f64, hi: f64) -> Result<Self, ControllerError> {
        if !(lo < hi) {
            return Err(ControllerError::InvalidParameter(format!(
                "saturation bounds must satisfy lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }
}

/// Saturated command and the deficit fed to the auxiliary system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Saturated {
    pub u: f64,
    /// `u - v`: zero inside the linear region, negative when clipped from above.
    pub du: f64,
}

pub fn saturate(v: f64, limits: &SaturationLimits) -> Saturated {
    let u = v.clamp(limits.lo, limits.hi);
    Saturated { u, du: u - v }
}

/// Design constants of the auxiliary (anti-windup) system and static corridor
/// half-widths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxParams {
    /// Double-pole location of the auxiliary filter, rad/s.
    pub omega_a: f64,
    /// Static lower corridor half-width.
    pub delta1: f64,
    /// Static upper corridor half-width.
    pub delta2: f64,
}

/// Auxiliary filter states. The normalized auxiliary signal is
/// `x_a = q1 / rho_eps(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AuxState {
    pub q1: f64,
    pub q2: f64,
}

impl AuxState {
    pub fn x_a(&self, rho_eps: f64) -> f64 {
        self.q1 / rho_eps
    }
}

/// One fixed step of the critically damped auxiliary system driven by the
/// saturation deficit: `q1' = q2`, `q2' = -w^2 q1 - 2 w q2 + du`.
pub fn aux_step(aux: &AuxState, params: &AuxParams, du: f64, dt: f64) -> AuxState {
    let w = params.omega_a;
    let y = rk4(
        |_t, y: &[f64; 2]| [y[1], -w * w * y[0] - 2.0 * w * y[1] + du],
        0.0,
        &[aux.q1, aux.q2],
        dt,
    );
    AuxState { q1: y[0], q2: y[1] }
}

/// Instantaneous corridor: half-widths and the absolute bounds on the raw
/// tracking error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corridor {
    /// Lower half-width `delta1 - x_a`.
    pub lower: f64,
    /// Upper half-width `delta2 + x_a`.
    pub upper: f64,
    /// Lower bound on the raw error, `-lower * rho_eps`.
    pub bound_lo: f64,
    /// Upper bound on the raw error, `upper * rho_eps`.
    pub bound_hi: f64,
}

/// Corridor at time `t`; fails once saturation history has eaten either side
/// down to [`CORRIDOR_COLLAPSE_LIMIT`].
pub fn boundaries(
    aux: &AuxState,
    params: &AuxParams,
    profile: &PerformanceProfile,
    t: f64,
) -> Result<Corridor, ControllerError> {
    let rho = profile.rho(t);
    let x_a = aux.x_a(rho);
    let lower = params.delta1 - x_a;
    let upper = params.delta2 + x_a;
    if lower <= CORRIDOR_COLLAPSE_LIMIT || upper <= CORRIDOR_COLLAPSE_LIMIT {
        return Err(ControllerError::CorridorCollapse { lower, upper, t });
    }
    Ok(Corridor {
        lower,
        upper,
        bound_lo: -lower * rho,
        bound_hi: upper * rho,
    })
}

/// Raw tracking error against the formation-shifted leader reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingError {
    pub e_p: f64,
    pub e_v: f64,
}

/// Transformed tracking error with its analytic rate and curvature remainder.
#[derive(Debug, Clone, Copy)]
pub struct TransformedError {
    /// Normalized error `e_p / rho_eps` after domain clamping.
    pub x: f64,
    pub eps: f64,
    pub eps_dot: f64,
    /// Curvature remainder of the transformed error dynamics.
    pub delta_term: f64,
    /// Positive slope factor multiplying the commanded acceleration in the
    /// sliding-value rate.
    pub r_s: f64,
    pub corridor: Corridor,
    /// True when the normalized error had to be clamped off a corridor wall.
    pub clamped: bool,
}

/// Barrier transform of the tracking error together with every analytic
/// derivative quantity the control law needs.
pub fn transformed_error_dynamics(
    e: &TrackingError,
    aux: &AuxState,
    params: &AuxParams,
    profile: &PerformanceProfile,
    t: f64,
) -> Result<TransformedError, ControllerError> {
    let corridor = boundaries(aux, params, profile, t)?;
    let rho = profile.rho(t);
    let (rho_dot, rho_ddot) = profile.rho_derivatives(t);
    let transformed =
        ppc::transform_asym(e.e_p / rho, corridor.lower, corridor.upper).map_err(|_| {
            ControllerError::CorridorCollapse {
                lower: corridor.lower,
                upper: corridor.upper,
                t,
            }
        })?;
    let x = transformed.input;
    let slope = ppc::asym_slope(x, corridor.lower, corridor.upper);
    // normalized error rate including the corridor breathing:
    // w = (e_v - q2)/rho - (e_p - q1) rho_dot / rho^2
    let x_a_dot = aux.q2 / rho - aux.q1 * rho_dot / (rho * rho);
    let w = e.e_v / rho - e.e_p * rho_dot / (rho * rho) - x_a_dot;
    let eps_dot = slope * w;
    let inv_up = 1.0 / (x - corridor.upper);
    let inv_lo = 1.0 / (x + corridor.lower);
    let delta_term = 0.5 * (inv_up * inv_up - inv_lo * inv_lo) * w * w
        + slope
            * (2.0 * (e.e_p - aux.q1) * rho_dot * rho_dot / (rho * rho * rho)
                - 2.0 * (e.e_v - aux.q2) * rho_dot / (rho * rho)
                - (e.e_p - aux.q1) * rho_ddot / (rho * rho));
    Ok(TransformedError {
        x,
        eps: transformed.value,
        eps_dot,
        delta_term,
        r_s: slope / rho,
        corridor,
        clamped: transformed.clamped,
    })
}

/// Sliding-surface gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlidingGains {
    pub lambda_s: f64,
    pub k_s: f64,
}

/// Sliding value `s = lambda_s * eps + eps_dot`.
pub fn sliding_value(ted: &TransformedError, lambda_s: f64) -> f64 {
    lambda_s * ted.eps + ted.eps_dot
}

/// Feedforward terms of the control law: the formation-plan acceleration and
/// the agent's own observer velocity-law filter output (which is exactly the
/// observer's velocity-estimate derivative).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feedforward {
    pub plan_accel: f64,
    pub observer_accel: f64,
}

/// Commanded (pre-saturation) acceleration.
///
/// The compensation coefficient is the exact reciprocal of the positive slope
/// factor `r_s`, with the sign resolved so that substituting the command into
/// the sliding-value rate leaves `s' = r_s (-k_s s + estimation-error rate)`
/// identically.
pub fn control_law(
    ted: &TransformedError,
    aux: &AuxState,
    params: &AuxParams,
    gains: &SlidingGains,
    ff: &Feedforward,
) -> f64 {
    let s = sliding_value(ted, gains.lambda_s);
    let w = params.omega_a;
    -gains.k_s * s + ff.plan_accel + ff.observer_accel
        - w * w * aux.q1
        - 2.0 * w * aux.q2
        - (ted.delta_term + gains.lambda_s * ted.eps_dot) / ted.r_s
}

/// Desired thrust magnitude and roll/pitch references realizing a commanded
/// translational acceleration at a given yaw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavAttitudeCmd {
    pub thrust: f64,
    pub roll: f64,
    pub pitch: f64,
}

/// Inverts the quadrotor translational model: given per-axis acceleration
/// commands and the desired yaw, returns the thrust and the roll/pitch
/// references (clipped to `max_tilt`).
pub fn uav_input_map(
    u_cmd: [f64; 3],
    yaw_d: f64,
    mass: f64,
    gravity: f64,
    max_tilt: f64,
) -> Result<UavAttitudeCmd, ControllerError> {
    let up = u_cmd[2] + gravity;
    if up <= 0.1 {
        return Err(ControllerError::ThrustDegenerate(u_cmd[2]));
    }
    let thrust = mass * (u_cmd[0] * u_cmd[0] + u_cmd[1] * u_cmd[1] + up * up).sqrt();
    let (sy, cy) = yaw_d.sin_cos();
    let pitch = (u_cmd[0] * cy + u_cmd[1] * sy).atan2(up);
    let roll = (pitch.cos() * (u_cmd[0] * sy - u_cmd[1] * cy)).atan2(up);
    Ok(UavAttitudeCmd {
        thrust,
        roll: roll.clamp(-max_tilt, max_tilt),
        pitch: pitch.clamp(-max_tilt, max_tilt),
    })
}

/// Inverts the ground-vehicle hand-point acceleration model: solves for the
/// wheel accelerations that realize a planar acceleration command at the
/// current state, then maps them to motor torques.
pub fn ugv_input_map(
    u_cmd: [f64; 2],
    plant: &UgvPlant,
    params: &UgvParams,
) -> Result<(f64, f64), ControllerError> {
    let lr = params.hand_offset;
    if lr <= 1e-6 {
        return Err(ControllerError::SingularOffset(lr));
    }
    let (s, c) = plant.theta.sin_cos();
    // u = (v_dot - lr w^2) e_r + (lr w_dot + v w) e_t with e_r = (c, s),
    // e_t = (-s, c); project the command back onto those axes.
    let radial = u_cmd[0] * c + u_cmd[1] * s;
    let tangential = -u_cmd[0] * s + u_cmd[1] * c;
    let v_dot = radial + lr * plant.omega * plant.omega;
    let omega_dot = (tangential - plant.v * plant.omega) / lr;
    let sum = params.mass * params.wheel_radius * v_dot;
    let diff = params.inertia * params.wheel_radius * omega_dot / params.half_track;
    Ok(((sum + diff) / 2.0, (sum - diff) / 2.0))
}
