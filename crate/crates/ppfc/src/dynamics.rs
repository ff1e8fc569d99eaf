//! Physical plants and the shared fixed-step integrator.
//!
//! All continuous dynamics in the simulator (observer filters, auxiliary
//! systems, plants) advance with the same classical 4-stage Runge-Kutta step;
//! inputs are held constant across a step.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("state became non-finite at t = {t}: {what}")]
    NonFiniteState { t: f64, what: String },
    #[error(
        "thrust direction undefined: commanded vertical acceleration {0} is too close to free fall"
    )]
    ThrustDegenerate(f64),
}

/// Classical fixed-step 4-stage Runge-Kutta update.
pub fn rk4<const N: usize>(
    f: impl Fn(f64, &[f64; N]) -> [f64; N],
    t: f64,
    y: &[f64; N],
    dt: f64,
) -> [f64; N] {
    let k1 = f(t, y);
    let mut ym = *y;
    for i in 0..N {
        ym[i] = y[i] + 0.5 * dt * k1[i];
    }
    let k2 = f(t + 0.5 * dt, &ym);
    for i in 0..N {
        ym[i] = y[i] + 0.5 * dt * k2[i];
    }
    let k3 = f(t + 0.5 * dt, &ym);
    for i in 0..N {
        ym[i] = y[i] + dt * k3[i];
    }
    let k4 = f(t + dt, &ym);
    let mut out = *y;
    for i in 0..N {
        out[i] = y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// [`rk4`] with a finiteness check on the result.
pub fn integrate<const N: usize>(
    f: impl Fn(f64, &[f64; N]) -> [f64; N],
    t: f64,
    y: &[f64; N],
    dt: f64,
) -> Result<[f64; N], DynamicsError> {
    let out = rk4(f, t, y, dt);
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(DynamicsError::NonFiniteState {
            t,
            what: format!("{out:?}"),
        })
    }
}

/// Virtual leader state at one instant, with its closed-form input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeaderState {
    pub pos: [f64; 3],
    pub vel: [f64; 3],
    /// Acceleration of the closed-form trajectory.
    pub accel: [f64; 3],
}

/// Closed-form leader trajectory: a smooth quintic climb to the cruise
/// altitude during `[0, t0]`, then a straight line in x with a sinusoid in y
/// at constant altitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeaderTrajectory {
    pub t0: f64,
    pub altitude: f64,
}

impl LeaderTrajectory {
    pub fn state(&self, t: f64) -> LeaderState {
        if t <= self.t0 && self.t0 > 0.0 {
            // quintic with zero velocity and acceleration at both ends
            let tau = (t / self.t0).clamp(0.0, 1.0);
            let s = tau * tau * tau * (10.0 + tau * (-15.0 + 6.0 * tau));
            let ds = tau * tau * (30.0 + tau * (-60.0 + 30.0 * tau)) / self.t0;
            let dds = tau * (60.0 + tau * (-180.0 + 120.0 * tau)) / (self.t0 * self.t0);
            LeaderState {
                pos: [0.0, 0.0, self.altitude * s],
                vel: [0.0, 0.0, self.altitude * ds],
                accel: [0.0, 0.0, self.altitude * dds],
            }
        } else {
            let tau = t - self.t0;
            LeaderState {
                pos: [tau, 2.0 * (0.5 * tau).sin(), self.altitude],
                vel: [1.0, (0.5 * tau).cos(), 0.0],
                accel: [0.0, -0.5 * (0.5 * tau).sin(), 0.0],
            }
        }
    }
}

/// Leader state one step ahead; the trajectory is closed form, so this is an
/// exact evaluation rather than a numerical step.
pub fn leader_step(trajectory: &LeaderTrajectory, t: f64, dt: f64) -> LeaderState {
    trajectory.state(t + dt)
}

/// Quadrotor physical parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadParams {
    pub mass: f64,
    pub gravity: f64,
    /// Body inertias about roll, pitch, yaw.
    pub inertia: [f64; 3],
    pub rotor_inertia: f64,
    /// Residual overall rotor speed entering the gyroscopic terms.
    pub rotor_residual: f64,
}

/// Full quadrotor state: position, velocity, attitude (roll, pitch, yaw) and
/// body rates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QuadrotorPlant {
    pub pos: [f64; 3],
    pub vel: [f64; 3],
    pub att: [f64; 3],
    pub rate: [f64; 3],
}

impl QuadrotorPlant {
    fn to_array(self) -> [f64; 12] {
        let mut y = [0.0; 12];
        y[0..3].copy_from_slice(&self.pos);
        y[3..6].copy_from_slice(&self.vel);
        y[6..9].copy_from_slice(&self.att);
        y[9..12].copy_from_slice(&self.rate);
        y
    }

    fn from_array(y: &[f64; 12]) -> Self {
        Self {
            pos: [y[0], y[1], y[2]],
            vel: [y[3], y[4], y[5]],
            att: [y[6], y[7], y[8]],
            rate: [y[9], y[10], y[11]],
        }
    }
}

/// Translational acceleration produced by thrust `u1` at the given attitude.
pub fn quad_translational_accel(att: &[f64; 3], u1: f64, params: &QuadParams) -> [f64; 3] {
    let (phi, theta, psi) = (att[0], att[1], att[2]);
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    let (sy, cy) = psi.sin_cos();
    [
        (cp * st * cy + sp * sy) * u1 / params.mass,
        (cp * st * sy - sp * cy) * u1 / params.mass,
        (cp * ct) * u1 / params.mass - params.gravity,
    ]
}

/// One fixed step of the full six-degree-of-freedom quadrotor dynamics with
/// inputs `[u1, u2, u3, u4]` (thrust and three body torques) held constant.
pub fn quad_full_step(
    plant: &QuadrotorPlant,
    params: &QuadParams,
    inputs: [f64; 4],
    t: f64,
    dt: f64,
) -> Result<QuadrotorPlant, DynamicsError> {
    let [ix, iy, iz] = params.inertia;
    let ir = params.rotor_inertia;
    let wr = params.rotor_residual;
    let f = |_t: f64, y: &[f64; 12]| {
        let att = [y[6], y[7], y[8]];
        let acc = quad_translational_accel(&att, inputs[0], params);
        let (dphi, dtheta, dpsi) = (y[9], y[10], y[11]);
        [
            y[3],
            y[4],
            y[5],
            acc[0],
            acc[1],
            acc[2],
            dphi,
            dtheta,
            dpsi,
            dtheta * dpsi * (iy - iz) / ix - ir / ix * dtheta * wr + inputs[1] / ix,
            dphi * dpsi * (iz - ix) / iy - ir / iy * dphi * wr + inputs[2] / iy,
            dphi * dtheta * (ix - iy) / iz + inputs[3] / iz,
        ]
    };
    let y = integrate(f, t, &plant.to_array(), dt)?;
    Ok(QuadrotorPlant::from_array(&y))
}

/// One fixed step of a per-axis double integrator driven by a held
/// acceleration command (the simplified control-design plant).
pub fn double_integrator_step(pos: f64, vel: f64, accel: f64, dt: f64) -> (f64, f64) {
    let y = rk4(|_t, y: &[f64; 2]| [y[1], accel], 0.0, &[pos, vel], dt);
    (y[0], y[1])
}

/// Attitude feedback gains for the inner loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttitudeGains {
    pub kp: f64,
    pub kd: f64,
}

/// Feedback-linearizing attitude inner loop: cancels the gyroscopic and
/// inertia-coupling terms and imposes critically-dampable second-order error
/// dynamics on each axis. Returns the three body torques.
pub fn inner_loop_attitude(
    plant: &QuadrotorPlant,
    params: &QuadParams,
    gains: &AttitudeGains,
    desired: [f64; 3],
) -> [f64; 3] {
    let [ix, iy, iz] = params.inertia;
    let ir = params.rotor_inertia;
    let wr = params.rotor_residual;
    let (dphi, dtheta, dpsi) = (plant.rate[0], plant.rate[1], plant.rate[2]);
    let fb = |err: f64, rate: f64| -gains.kp * err - gains.kd * rate;
    [
        ix * fb(plant.att[0] - desired[0], dphi) - dtheta * dpsi * (iy - iz) + ir * dtheta * wr,
        iy * fb(plant.att[1] - desired[1], dtheta) - dphi * dpsi * (iz - ix) + ir * dphi * wr,
        iz * fb(plant.att[2] - desired[2], dpsi) - dphi * dtheta * (ix - iy),
    ]
}

/// Differential-drive ground vehicle parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UgvParams {
    pub mass: f64,
    pub inertia: f64,
    pub wheel_radius: f64,
    /// Half the distance between the two wheels.
    pub half_track: f64,
    /// Offset of the controlled hand point ahead of the axle.
    pub hand_offset: f64,
}

/// Ground vehicle state. `(x, y)` is the hand point whose planar dynamics the
/// controller shapes; `theta` the heading, `v` and `omega` the linear and
/// angular speeds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UgvPlant {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub omega: f64,
}

impl UgvPlant {
    /// Planar velocity of the hand point.
    pub fn hand_velocity(&self, params: &UgvParams) -> [f64; 2] {
        let (s, c) = self.theta.sin_cos();
        [
            self.v * c - params.hand_offset * self.omega * s,
            self.v * s + params.hand_offset * self.omega * c,
        ]
    }
}

/// Wheel accelerations produced by the motor torques.
pub fn ugv_wheel_accel(params: &UgvParams, t1: f64, t2: f64) -> (f64, f64) {
    (
        (t1 + t2) / (params.mass * params.wheel_radius),
        (t1 - t2) * params.half_track / (params.inertia * params.wheel_radius),
    )
}

/// Planar acceleration of the hand point under the given torques.
pub fn ugv_hand_accel(plant: &UgvPlant, params: &UgvParams, t1: f64, t2: f64) -> [f64; 2] {
    let (v_dot, omega_dot) = ugv_wheel_accel(params, t1, t2);
    let (s, c) = plant.theta.sin_cos();
    let lr = params.hand_offset;
    let radial = v_dot - lr * plant.omega * plant.omega;
    let tangential = lr * omega_dot + plant.v * plant.omega;
    [radial * c - tangential * s, radial * s + tangential * c]
}

/// One fixed step of the ground vehicle dynamics with torques held constant.
pub fn ugv_step(
    plant: &UgvPlant,
    params: &UgvParams,
    t1: f64,
    t2: f64,
    t: f64,
    dt: f64,
) -> Result<UgvPlant, DynamicsError> {
    let (v_dot, omega_dot) = ugv_wheel_accel(params, t1, t2);
    let lr = params.hand_offset;
    let f = |_t: f64, y: &[f64; 5]| {
        let (s, c) = y[2].sin_cos();
        [
            y[3] * c - lr * y[4] * s,
            y[3] * s + lr * y[4] * c,
            y[4],
            v_dot,
            omega_dot,
        ]
    };
    let y = integrate(
        f,
        t,
        &[plant.x, plant.y, plant.theta, plant.v, plant.omega],
        dt,
    )?;
    Ok(UgvPlant {
        x: y[0],
        y: y[1],
        theta: y[2],
        v: y[3],
        omega: y[4],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn quad_params() -> QuadParams {
        QuadParams {
            mass: 1.5,
            gravity: 9.81,
            inertia: [0.02, 0.02, 0.04],
            rotor_inertia: 0.0,
            rotor_residual: 0.0,
        }
    }

    fn ugv_params() -> UgvParams {
        UgvParams {
            mass: 1.0,
            inertia: 0.02,
            wheel_radius: 0.02,
            half_track: 0.1,
            hand_offset: 0.2,
        }
    }

    #[test]
    fn rk4_leaves_constant_field_unchanged() {
        let y = rk4(|_, _| [0.0], 0.0, &[1.25], 0.1);
        assert_eq!(y, [1.25]);
    }

    #[test]
    fn rk4_matches_exponential_decay() {
        let mut y = [1.0];
        let dt = 1e-3;
        for k in 0..1000 {
            y = rk4(|_, y| [-y[0]], k as f64 * dt, &y, dt);
        }
        assert_abs_diff_eq!(y[0], (-1f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn rk4_convergence_order_is_four() {
        // error vs closed form for x' = cos t halves by about 2^4 per dt halving
        let run = |dt: f64| {
            let steps = (2.0 / dt).round() as usize;
            let mut y = [0.0];
            for k in 0..steps {
                y = rk4(|t, _| [t.cos()], k as f64 * dt, &y, dt);
            }
            (y[0] - 2f64.sin()).abs()
        };
        let (e1, e2) = (run(0.02), run(0.01));
        let order = (e1 / e2).log2();
        assert!(
            (3.8..=4.2).contains(&order),
            "measured order {order} from errors {e1:.3e}, {e2:.3e}"
        );
    }

    #[test]
    fn integrate_flags_non_finite_states() {
        let out = integrate(|_, y: &[f64; 1]| [y[0] * y[0]], 0.0, &[1e308], 1.0);
        assert!(matches!(out, Err(DynamicsError::NonFiniteState { .. })));
    }

    #[test]
    fn leader_cruise_starts_with_unit_planar_velocity() {
        let traj = LeaderTrajectory {
            t0: 5.0,
            altitude: 4.0,
        };
        let s = traj.state(5.0 + 1e-12);
        assert_abs_diff_eq!(s.pos[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.pos[1], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.pos[2], 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.vel[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.vel[1], 1.0, epsilon = 1e-9);
        assert_eq!(s.vel[2], 0.0);
    }

    #[test]
    fn leader_sinusoid_peak() {
        let traj = LeaderTrajectory {
            t0: 5.0,
            altitude: 4.0,
        };
        let s = traj.state(5.0 + std::f64::consts::PI);
        assert_relative_eq!(s.pos[1], 2.0, max_relative = 1e-12);
        assert_eq!(s.accel[2], 0.0);
    }

    #[test]
    fn leader_step_is_exact_closed_form_evaluation() {
        let traj = LeaderTrajectory {
            t0: 5.0,
            altitude: 4.0,
        };
        assert_eq!(leader_step(&traj, 7.0, 0.5), traj.state(7.5));
    }

    #[test]
    fn leader_climb_is_smooth_to_altitude() {
        let traj = LeaderTrajectory {
            t0: 5.0,
            altitude: 4.0,
        };
        let start = traj.state(0.0);
        assert_eq!(start.pos, [0.0, 0.0, 0.0]);
        assert_eq!(start.vel, [0.0, 0.0, 0.0]);
        let end = traj.state(5.0);
        assert_abs_diff_eq!(end.pos[2], 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(end.vel[2], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(end.accel[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn quad_hovers_under_weight_thrust() {
        let p = quad_params();
        let plant = QuadrotorPlant::default();
        let next =
            quad_full_step(&plant, &p, [p.mass * p.gravity, 0.0, 0.0, 0.0], 0.0, 0.01).unwrap();
        assert_abs_diff_eq!(next.vel[2], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(next.pos[2], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn quad_free_fall() {
        let p = quad_params();
        let next = quad_full_step(&QuadrotorPlant::default(), &p, [0.0; 4], 0.0, 0.01).unwrap();
        assert_relative_eq!(next.vel[2], -p.gravity * 0.01, max_relative = 1e-12);
    }

    #[test]
    fn quad_yaw_torque_gives_yaw_acceleration() {
        let p = quad_params();
        let c = 3.0;
        let next = quad_full_step(
            &QuadrotorPlant::default(),
            &p,
            [0.0, 0.0, 0.0, p.inertia[2] * c],
            0.0,
            0.01,
        )
        .unwrap();
        assert_relative_eq!(next.rate[2], c * 0.01, max_relative = 1e-12);
    }

    #[test]
    fn double_integrator_exact_for_polynomials() {
        let (x, v) = double_integrator_step(2.0, 1.0, 0.0, 0.5);
        assert_eq!((x, v), (2.5, 1.0));
        let (x, v) = double_integrator_step(0.0, 1.0, 2.0, 0.5);
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x, 1.0 * 0.5 + 0.5 * 2.0 * 0.25, epsilon = 1e-15);
    }

    #[test]
    fn attitude_loop_at_setpoint_outputs_zero() {
        let p = quad_params();
        let gains = AttitudeGains {
            kp: 100.0,
            kd: 20.0,
        };
        let torques = inner_loop_attitude(&QuadrotorPlant::default(), &p, &gains, [0.0; 3]);
        assert_eq!(torques, [0.0; 3]);
    }

    #[test]
    fn attitude_step_settles_critically_damped() {
        // kp = 100, kd = 20 puts a double pole at -10 rad/s; the analytic 2%
        // settling time of (1 + w t) e^{-w t} is about 0.58 s.
        let p = quad_params();
        let gains = AttitudeGains {
            kp: 100.0,
            kd: 20.0,
        };
        let target = 0.3;
        let mut plant = QuadrotorPlant::default();
        let dt = 1e-3;
        let mut settled_at = None;
        for k in 0..1500 {
            let t = k as f64 * dt;
            let torques = inner_loop_attitude(&plant, &p, &gains, [target, 0.0, 0.0]);
            plant = quad_full_step(&plant, &p, [0.0, torques[0], torques[1], torques[2]], t, dt)
                .unwrap();
            let err = (plant.att[0] - target).abs() / target;
            if err <= 0.02 && settled_at.is_none() {
                settled_at = Some(t + dt);
            } else if err > 0.02 {
                settled_at = None;
            }
        }
        let settled = settled_at.expect("attitude step never settled");
        assert!(
            (0.5..0.6).contains(&settled),
            "2% settling at {settled} s, expected about 0.58 s"
        );
        // no overshoot for the critically damped pair
        assert!(plant.att[0] <= target + 1e-9);
    }

    #[test]
    fn attitude_holds_against_gyroscopic_coupling() {
        let mut p = quad_params();
        p.rotor_inertia = 1e-4;
        p.rotor_residual = 50.0;
        let gains = AttitudeGains {
            kp: 100.0,
            kd: 20.0,
        };
        let mut plant = QuadrotorPlant {
            rate: [0.0, 0.4, 0.4],
            ..Default::default()
        };
        let dt = 1e-3;
        for k in 0..3000 {
            let torques = inner_loop_attitude(&plant, &p, &gains, [0.0; 3]);
            plant = quad_full_step(
                &plant,
                &p,
                [p.mass * p.gravity, torques[0], torques[1], torques[2]],
                k as f64 * dt,
                dt,
            )
            .unwrap();
        }
        // steady attitude error under active coupling stays below 0.1 degrees
        for a in plant.att {
            assert!(a.abs() < 0.1f64.to_radians(), "residual attitude {a}");
        }
    }

    #[test]
    fn ugv_equal_torques_drive_straight() {
        let p = ugv_params();
        let c = 0.05;
        let (v_dot, omega_dot) = ugv_wheel_accel(&p, c, c);
        assert_relative_eq!(
            v_dot,
            2.0 * c / (p.mass * p.wheel_radius),
            max_relative = 1e-15
        );
        assert_eq!(omega_dot, 0.0);
        let next = ugv_step(&UgvPlant::default(), &p, c, c, 0.0, 0.01).unwrap();
        assert_eq!(next.omega, 0.0);
        assert_eq!(next.y, 0.0);
        assert!(next.v > 0.0 && next.x > 0.0);
    }

    #[test]
    fn ugv_straight_line_kinematics() {
        let p = ugv_params();
        let plant = UgvPlant {
            v: 1.0,
            ..Default::default()
        };
        let vel = plant.hand_velocity(&p);
        assert_eq!(vel, [1.0, 0.0]);
        let next = ugv_step(&plant, &p, 0.0, 0.0, 0.0, 0.1).unwrap();
        assert_abs_diff_eq!(next.x, 0.1, epsilon = 1e-14);
        assert_eq!(next.y, 0.0);
    }

    #[test]
    fn hand_accel_matches_velocity_finite_differences() {
        let p = ugv_params();
        let mut plant = UgvPlant {
            x: 0.3,
            y: -0.2,
            theta: 0.4,
            v: 0.6,
            omega: 0.8,
        };
        let dt = 1e-4;
        let (t1, t2) = (0.03, 0.01);
        // walk the trajectory, then compare analytic accelerations against
        // central differences of the hand-point velocity
        let mut states = vec![plant];
        for k in 0..400 {
            plant = ugv_step(&plant, &p, t1, t2, k as f64 * dt, dt).unwrap();
            states.push(plant);
        }
        for k in 1..states.len() - 1 {
            let analytic = ugv_hand_accel(&states[k], &p, t1, t2);
            let before = states[k - 1].hand_velocity(&p);
            let after = states[k + 1].hand_velocity(&p);
            for axis in 0..2 {
                let fd = (after[axis] - before[axis]) / (2.0 * dt);
                assert_relative_eq!(analytic[axis], fd, max_relative = 1e-4);
            }
        }
    }
}
