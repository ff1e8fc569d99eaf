//! Simulation orchestration: the per-step closed loop over fault injection,
//! observers, controllers, saturation, input maps and plants.

use super::config::{Fidelity, LapMode, ScenarioConfig};
use super::metrics::{MetricsAccumulator, RunMetrics};
use super::trace::{Trace, TraceMeta, TraceRecord};
use super::{Axis, ScenarioError};
use crate::controller::{
    aux_step, control_law, saturate, sliding_value, transformed_error_dynamics, AuxParams,
    AuxState, ControllerError, Feedforward, SaturationLimits, SlidingGains, TrackingError,
};
use crate::dynamics::{
    double_integrator_step, inner_loop_attitude, quad_full_step, ugv_step, AttitudeGains,
    LeaderTrajectory, QuadParams, QuadrotorPlant, UgvParams, UgvPlant,
};
use crate::graph::{
    build_faulted_laplacian, FaultInjector, GraphError, LaplacianOps, TopologySpec,
};
use crate::observer::{
    neighborhood_error, observer_step, virtual_laws, ObserverGains, ObserverState,
};
use crate::ppc::{transform_point, PerformanceProfile, TransformPoint};
use nalgebra::DVector;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("corridor collapsed for agent {agent} axis {axis} at t = {t:.3}: {source}")]
    CorridorCollapse {
        agent: usize,
        axis: Axis,
        t: f64,
        source: ControllerError,
    },
    #[error("non-finite state for agent {agent} at t = {t:.3}")]
    NonFinite { agent: usize, t: f64 },
    #[error("degenerate topology at t = {t:.3}: {source}")]
    Degenerate { t: f64, source: GraphError },
    #[error("input map failed for agent {agent} at t = {t:.3}: {source}")]
    InputMap {
        agent: usize,
        t: f64,
        source: ControllerError,
    },
}

/// Plant state of one agent at the configured fidelity.
#[derive(Debug, Clone, Copy)]
enum Plant {
    UavSimple { pos: [f64; 3], vel: [f64; 3] },
    UavFull(QuadrotorPlant),
    UgvSimple { pos: [f64; 2], vel: [f64; 2] },
    UgvFull(UgvPlant),
}

impl Plant {
    fn position(&self, axis: Axis) -> f64 {
        match self {
            Plant::UavSimple { pos, .. } => pos[axis.index()],
            Plant::UavFull(p) => p.pos[axis.index()],
            Plant::UgvSimple { pos, .. } => pos[axis.index()],
            Plant::UgvFull(p) => [p.x, p.y][axis.index()],
        }
    }

    fn velocity(&self, axis: Axis, ugv_params: &UgvParams) -> f64 {
        match self {
            Plant::UavSimple { vel, .. } => vel[axis.index()],
            Plant::UavFull(p) => p.vel[axis.index()],
            Plant::UgvSimple { vel, .. } => vel[axis.index()],
            Plant::UgvFull(p) => p.hand_velocity(ugv_params)[axis.index()],
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            Plant::UavSimple { pos, vel } => pos.iter().chain(vel.iter()).all(|v| v.is_finite()),
            Plant::UavFull(p) => p
                .pos
                .iter()
                .chain(p.vel.iter())
                .chain(p.att.iter())
                .chain(p.rate.iter())
                .all(|v| v.is_finite()),
            Plant::UgvSimple { pos, vel } => pos.iter().chain(vel.iter()).all(|v| v.is_finite()),
            Plant::UgvFull(p) => [p.x, p.y, p.theta, p.v, p.omega]
                .iter()
                .all(|v| v.is_finite()),
        }
    }
}

/// Observer block of one axis: the participating agents (global 0-based ids)
/// and their stacked states.
struct AxisBlock {
    axis: Axis,
    agents: Vec<usize>,
    states: Vec<ObserverState>,
    nominal_laws: LaplacianOps,
}

/// Records produced by one step plus the observer Lyapunov surrogate, a
/// diagnostic for the exponential-envelope property.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub records: Vec<TraceRecord>,
    pub observer_v1: f64,
}

/// One closed-loop simulation, advanced step by step.
pub struct Simulation {
    cfg: ScenarioConfig,
    spec: TopologySpec,
    blocks: Vec<AxisBlock>,
    injector: FaultInjector,
    leader: LeaderTrajectory,
    obs_profile: PerformanceProfile,
    trk_profile: PerformanceProfile,
    obs_gains: Vec<ObserverGains>,
    aux_params: AuxParams,
    aux: Vec<[AuxState; 3]>,
    plants: Vec<Plant>,
    plan: super::RingFormation,
    quad_params: QuadParams,
    att_gains: AttitudeGains,
    max_tilt: f64,
    ugv_params: UgvParams,
    eval_order: Vec<usize>,
    step: u64,
    n_steps: u64,
    transform_clamps: u64,
}

impl Simulation {
    /// Builds a simulation from a configuration, validating it first.
    pub fn new(cfg: &ScenarioConfig) -> Result<Self, ScenarioError> {
        let cfg = cfg.clone().validated()?;
        let spec = cfg.topology_spec().map_err(|e| {
            ScenarioError::Validation(vec![super::ValidationIssue {
                field: "topology".into(),
                message: e,
            }])
        })?;
        let schedule = cfg.fault_schedule().map_err(|e| {
            ScenarioError::Validation(vec![super::ValidationIssue {
                field: "faults".into(),
                message: e,
            }])
        })?;
        let injector = FaultInjector::new(&spec, schedule, cfg.sim.seed).map_err(|e| {
            ScenarioError::Validation(vec![super::ValidationIssue {
                field: "faults".into(),
                message: e.to_string(),
            }])
        })?;
        let n = cfg.n_agents();
        let obs_profile = cfg.observer_profile().expect("validated profile");
        let trk_profile = cfg.tracking_profile().expect("validated profile");
        let gains = cfg.observer_gains();
        let obs_gains = vec![gains; n];
        let leader = cfg.leader_trajectory();

        let pos0 = |i0: usize, axis: Axis| -> f64 {
            if i0 < cfg.topology.n_uav {
                cfg.initial.uav_positions[i0][axis.index()]
            } else {
                cfg.initial.ugv_positions[i0 - cfg.topology.n_uav][axis.index()]
            }
        };

        // observers start at each agent's own position with zero velocity
        let mut blocks = Vec::new();
        for axis in Axis::ALL {
            let agents: Vec<usize> = (0..n)
                .filter(|&i0| cfg.axes_of(i0).contains(&axis))
                .collect();
            if agents.is_empty() {
                continue;
            }
            let sub = if agents.len() == n {
                spec.clone()
            } else {
                spec.restrict(&agents)
            };
            let nominal_laws = LaplacianOps::new(sub.laplacian()).map_err(|e| {
                ScenarioError::Validation(vec![super::ValidationIssue {
                    field: "topology".into(),
                    message: format!("axis {axis}: {e}"),
                }])
            })?;
            let states = agents
                .iter()
                .map(|&i0| ObserverState {
                    zeta_p: pos0(i0, axis),
                    zeta_v: 0.0,
                    abar1: 0.0,
                    abar2: 0.0,
                })
                .collect();
            blocks.push(AxisBlock {
                axis,
                agents,
                states,
                nominal_laws,
            });
        }

        let plants: Vec<Plant> = (0..n)
            .map(|i0| {
                if i0 < cfg.topology.n_uav {
                    let pos = cfg.initial.uav_positions[i0];
                    match cfg.sim.fidelity {
                        Fidelity::Simplified => Plant::UavSimple { pos, vel: [0.0; 3] },
                        Fidelity::Full => Plant::UavFull(QuadrotorPlant {
                            pos,
                            ..Default::default()
                        }),
                    }
                } else {
                    let k = i0 - cfg.topology.n_uav;
                    let pos = cfg.initial.ugv_positions[k];
                    let theta = cfg.initial.ugv_headings.as_ref().map_or(0.0, |h| h[k]);
                    match cfg.sim.fidelity {
                        Fidelity::Simplified => Plant::UgvSimple { pos, vel: [0.0; 2] },
                        Fidelity::Full => Plant::UgvFull(UgvPlant {
                            x: pos[0],
                            y: pos[1],
                            theta,
                            v: 0.0,
                            omega: 0.0,
                        }),
                    }
                }
            })
            .collect();

        let n_steps = (cfg.sim.duration / cfg.sim.dt).round() as u64;
        Ok(Self {
            aux_params: AuxParams {
                omega_a: cfg.controller.omega_a,
                delta1: cfg.controller.delta1,
                delta2: cfg.controller.delta2,
            },
            aux: vec![[AuxState::default(); 3]; n],
            plan: super::RingFormation::from_config(&cfg),
            quad_params: cfg.quad_params(),
            att_gains: cfg.attitude_gains(),
            max_tilt: cfg.uav.max_tilt_deg.to_radians(),
            ugv_params: cfg.ugv_params(),
            eval_order: (0..n).collect(),
            step: 0,
            n_steps,
            transform_clamps: 0,
            spec,
            blocks,
            injector,
            leader,
            obs_profile,
            trk_profile,
            obs_gains,
            plants,
            cfg,
        })
    }

    pub fn finished(&self) -> bool {
        self.step >= self.n_steps
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.cfg.sim.dt
    }

    pub fn n_steps(&self) -> u64 {
        self.n_steps
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    /// Overrides the order in which agents are evaluated inside a step.
    /// Results must not depend on it; exposed so tests can verify that.
    pub fn set_eval_order(&mut self, order: Vec<usize>) {
        let mut sorted = order.clone();
        sorted.sort_unstable();
        assert_eq!(
            sorted,
            (0..self.cfg.n_agents()).collect::<Vec<_>>(),
            "eval order must be a permutation of the agents"
        );
        self.eval_order = order;
    }

    /// Observer state of an agent (0-based) on an axis, when it participates.
    pub fn observer_state(&self, i0: usize, axis: Axis) -> Option<ObserverState> {
        let block = self.blocks.iter().find(|b| b.axis == axis)?;
        let row = block.agents.iter().position(|&a| a == i0)?;
        Some(block.states[row])
    }

    /// Run constants for trace assembly.
    pub fn trace_meta(&self) -> TraceMeta {
        TraceMeta {
            dt: self.cfg.sim.dt,
            duration: self.cfg.sim.duration,
            seed: self.cfg.sim.seed,
            horizon: self.obs_profile.horizon(),
            rho_inf: self.obs_profile.rho_inf(),
            n_uav: self.cfg.topology.n_uav,
            n_ugv: self.cfg.topology.n_ugv,
            downsample: self.cfg.output.downsample,
            leader_t0: self.cfg.leader.t0,
            leader_altitude: self.cfg.leader.altitude,
            transform_clamps: self.transform_clamps,
            weight_clamps: self.injector.clamp_count(),
        }
    }

    /// Advances the loop by one step and returns the records observed at the
    /// step's start time.
    ///
    /// Order inside a step: faulted weights, neighborhood errors, observer
    /// virtual laws, tracking errors against the formation plan, corridor
    /// update, control law, saturation, input maps, plant and filter steps.
    /// Observers and controllers read only the snapshot taken at the step's
    /// start, so agent evaluation order cannot leak state within a step.
    pub fn step(&mut self) -> Result<StepOutput, RunError> {
        let dt = self.cfg.sim.dt;
        let t = self.time();
        let weights = self.injector.step_weights(&self.spec, self.step, t, dt);
        let leader = self.leader.state(t);
        let n = self.cfg.n_agents();

        // --- observer phase (stacked per axis) ---
        struct AxisScratch {
            xi_p: DVector<f64>,
            xi_v: DVector<f64>,
            alpha1: DVector<f64>,
            alpha2: DVector<f64>,
        }
        let rho_obs = self.obs_profile.rho(t);
        let (rho_obs_dot, _) = self.obs_profile.rho_derivatives(t);
        let gamma = rho_obs_dot / rho_obs;
        let mut scratch: Vec<AxisScratch> = Vec::with_capacity(self.blocks.len());
        let mut observer_v1 = 0.0;
        for block in &self.blocks {
            let m = block.agents.len();
            let w = if m == n {
                weights.clone()
            } else {
                weights.restrict(&block.agents)
            };
            let li = block.axis.index();
            let mut xi_p = DVector::zeros(m);
            let mut xi_v = DVector::zeros(m);
            for row in 0..m {
                let xi = neighborhood_error(row, &block.states, leader.pos[li], leader.vel[li], &w);
                xi_p[row] = xi.xi_p;
                xi_v[row] = xi.xi_v;
            }
            let points: Vec<TransformPoint> = (0..m)
                .map(|row| transform_point(xi_p[row], &self.obs_profile, t))
                .collect();
            self.transform_clamps += points.iter().filter(|p| p.clamped).count() as u64;
            let gains: Vec<ObserverGains> =
                block.agents.iter().map(|&i0| self.obs_gains[i0]).collect();
            let laws = match self.cfg.observer.laplacian_in_laws {
                LapMode::Nominal => {
                    virtual_laws(&xi_p, &xi_v, &points, gamma, &gains, &block.nominal_laws)
                }
                LapMode::Faulted => {
                    let lap = build_faulted_laplacian(&w);
                    let ops = LaplacianOps::new(lap.matrix)
                        .map_err(|source| RunError::Degenerate { t, source })?;
                    virtual_laws(&xi_p, &xi_v, &points, gamma, &gains, &ops)
                }
            };
            for row in 0..m {
                let g = &gains[row];
                let err_v = block.states[row].zeta_v - leader.vel[li];
                let a1t = block.states[row].abar1 - laws.alpha1[row];
                let a2t = block.states[row].abar2 - laws.alpha2[row];
                observer_v1 += 0.5 * g.p * points[row].eps * points[row].eps
                    + 0.5 * err_v * err_v / g.eta
                    + 0.5 * a1t * a1t
                    + 0.5 * a2t * a2t;
            }
            scratch.push(AxisScratch {
                xi_p,
                xi_v,
                alpha1: laws.alpha1,
                alpha2: laws.alpha2,
            });
        }

        // --- controller phase (per agent-axis, reading the step-start snapshot) ---
        #[derive(Clone, Copy, Default)]
        struct CtrlRow {
            e_p: f64,
            e_v: f64,
            bound_lo: f64,
            bound_hi: f64,
            eps: f64,
            s: f64,
            v: f64,
            u: f64,
            du: f64,
            xa: f64,
        }
        let rho_trk = self.trk_profile.rho(t);
        let mut ctrl: Vec<[CtrlRow; 3]> = vec![[CtrlRow::default(); 3]; n];
        let order = self.eval_order.clone();
        for &i0 in &order {
            let agent = i0 + 1;
            let kind_uav = i0 < self.cfg.topology.n_uav;
            for &axis in self.cfg.axes_of(i0) {
                let li = axis.index();
                let h = self.plan.eval(agent, axis, t);
                let e = TrackingError {
                    e_p: self.plants[i0].position(axis) - h.h_p - leader.pos[li],
                    e_v: self.plants[i0].velocity(axis, &self.ugv_params) - h.h_v - leader.vel[li],
                };
                let aux = &self.aux[i0][li];
                let ted =
                    transformed_error_dynamics(&e, aux, &self.aux_params, &self.trk_profile, t)
                        .map_err(|source| RunError::CorridorCollapse {
                            agent,
                            axis,
                            t,
                            source,
                        })?;
                if ted.clamped {
                    self.transform_clamps += 1;
                }
                let gains = SlidingGains {
                    lambda_s: self.cfg.controller.lambda_s,
                    k_s: if axis == Axis::Z {
                        self.cfg.controller.k_s_z
                    } else {
                        self.cfg.controller.k_s_xy
                    },
                };
                let abar2 = self
                    .observer_state(i0, axis)
                    .expect("agent participates in axis")
                    .abar2;
                let ff = Feedforward {
                    plan_accel: h.h_acc,
                    observer_accel: abar2,
                };
                let v = control_law(&ted, aux, &self.aux_params, &gains, &ff);
                let lim = if kind_uav {
                    if axis == Axis::Z {
                        SaturationLimits {
                            lo: self.cfg.saturation.uav_z[0],
                            hi: self.cfg.saturation.uav_z[1],
                        }
                    } else {
                        SaturationLimits {
                            lo: self.cfg.saturation.uav_xy[0],
                            hi: self.cfg.saturation.uav_xy[1],
                        }
                    }
                } else {
                    SaturationLimits {
                        lo: self.cfg.saturation.ugv[0],
                        hi: self.cfg.saturation.ugv[1],
                    }
                };
                let sat = saturate(v, &lim);
                ctrl[i0][li] = CtrlRow {
                    e_p: e.e_p,
                    e_v: e.e_v,
                    bound_lo: ted.corridor.bound_lo,
                    bound_hi: ted.corridor.bound_hi,
                    eps: ted.eps,
                    s: sliding_value(&ted, gains.lambda_s),
                    v,
                    u: sat.u,
                    du: sat.du,
                    xa: aux.x_a(rho_trk),
                };
            }
        }

        // --- records at the step's start ---
        let mut records =
            Vec::with_capacity(self.cfg.topology.n_uav * 3 + self.cfg.topology.n_ugv * 2);
        for i0 in 0..n {
            for &axis in self.cfg.axes_of(i0) {
                let li = axis.index();
                let block_idx = self.blocks.iter().position(|b| b.axis == axis).unwrap();
                let block = &self.blocks[block_idx];
                let row = block.agents.iter().position(|&a| a == i0).unwrap();
                let sc = &scratch[block_idx];
                let c = &ctrl[i0][li];
                records.push(TraceRecord {
                    t,
                    agent: (i0 + 1) as u16,
                    axis,
                    xp: self.plants[i0].position(axis),
                    xv: self.plants[i0].velocity(axis, &self.ugv_params),
                    zeta_p: block.states[row].zeta_p,
                    zeta_v: block.states[row].zeta_v,
                    xi_p: sc.xi_p[row],
                    xi_v: sc.xi_v[row],
                    rho: rho_obs,
                    e_p: c.e_p,
                    e_v: c.e_v,
                    bound_lo: c.bound_lo,
                    bound_hi: c.bound_hi,
                    eps: c.eps,
                    s: c.s,
                    v: c.v,
                    u: c.u,
                    du: c.du,
                    xa: c.xa,
                    fault_active: weights.any_active,
                });
            }
        }

        // --- commit: observers, auxiliary filters, plants ---
        for (block_idx, block) in self.blocks.iter_mut().enumerate() {
            let sc = &scratch[block_idx];
            for row in 0..block.agents.len() {
                let g = &self.obs_gains[block.agents[row]];
                block.states[row] =
                    observer_step(&block.states[row], sc.alpha1[row], sc.alpha2[row], g, dt);
            }
        }
        for i0 in 0..n {
            for &axis in self.cfg.axes_of(i0) {
                let li = axis.index();
                self.aux[i0][li] =
                    aux_step(&self.aux[i0][li], &self.aux_params, ctrl[i0][li].du, dt);
            }
            let agent = i0 + 1;
            self.plants[i0] = match self.plants[i0] {
                Plant::UavSimple { pos, vel } => {
                    let mut npos = pos;
                    let mut nvel = vel;
                    for axis in Axis::ALL {
                        let li = axis.index();
                        let (p, v) = double_integrator_step(pos[li], vel[li], ctrl[i0][li].u, dt);
                        npos[li] = p;
                        nvel[li] = v;
                    }
                    Plant::UavSimple {
                        pos: npos,
                        vel: nvel,
                    }
                }
                Plant::UavFull(p) => {
                    let u_cmd = [ctrl[i0][0].u, ctrl[i0][1].u, ctrl[i0][2].u];
                    let cmd = crate::controller::uav_input_map(
                        u_cmd,
                        0.0,
                        self.quad_params.mass,
                        self.quad_params.gravity,
                        self.max_tilt,
                    )
                    .map_err(|source| RunError::InputMap {
                        agent,
                        t,
                        source,
                    })?;
                    let torques = inner_loop_attitude(
                        &p,
                        &self.quad_params,
                        &self.att_gains,
                        [cmd.roll, cmd.pitch, 0.0],
                    );
                    let next = quad_full_step(
                        &p,
                        &self.quad_params,
                        [cmd.thrust, torques[0], torques[1], torques[2]],
                        t,
                        dt,
                    )
                    .map_err(|_| RunError::NonFinite { agent, t })?;
                    Plant::UavFull(next)
                }
                Plant::UgvSimple { pos, vel } => {
                    let mut npos = pos;
                    let mut nvel = vel;
                    for li in 0..2 {
                        let (p, v) = double_integrator_step(pos[li], vel[li], ctrl[i0][li].u, dt);
                        npos[li] = p;
                        nvel[li] = v;
                    }
                    Plant::UgvSimple {
                        pos: npos,
                        vel: nvel,
                    }
                }
                Plant::UgvFull(p) => {
                    let u_cmd = [ctrl[i0][0].u, ctrl[i0][1].u];
                    let (t1, t2) = crate::controller::ugv_input_map(u_cmd, &p, &self.ugv_params)
                        .map_err(|source| RunError::InputMap { agent, t, source })?;
                    let next = ugv_step(&p, &self.ugv_params, t1, t2, t, dt)
                        .map_err(|_| RunError::NonFinite { agent, t })?;
                    Plant::UgvFull(next)
                }
            };
            if !self.plants[i0].is_finite() {
                return Err(RunError::NonFinite { agent, t });
            }
        }
        for block in &self.blocks {
            for s in &block.states {
                if ![s.zeta_p, s.zeta_v, s.abar1, s.abar2]
                    .iter()
                    .all(|v| v.is_finite())
                {
                    return Err(RunError::NonFinite { agent: 0, t });
                }
            }
        }
        self.step += 1;
        Ok(StepOutput {
            records,
            observer_v1,
        })
    }
}

/// Full in-memory run: the complete trace plus its metrics.
pub struct RunOutput {
    pub trace: Trace,
    pub metrics: RunMetrics,
}

pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput, ScenarioError> {
    let mut sim = Simulation::new(cfg)?;
    let mut records =
        Vec::with_capacity((sim.n_steps() as usize) * sim.trace_meta().rows_per_step());
    let mut acc = MetricsAccumulator::new(sim.trace_meta());
    while !sim.finished() {
        let out = sim.step()?;
        acc.push_step(&out.records);
        records.extend(out.records);
    }
    let meta = sim.trace_meta(); // picks up the final clamp counters
    acc.set_meta_counters(meta.transform_clamps, meta.weight_clamps);
    Ok(RunOutput {
        metrics: acc.finish(),
        trace: Trace { meta, records },
    })
}

/// Metrics-only run; keeps memory flat for sweeps.
pub fn run_metrics_only(cfg: &ScenarioConfig) -> Result<RunMetrics, ScenarioError> {
    let mut sim = Simulation::new(cfg)?;
    let mut acc = MetricsAccumulator::new(sim.trace_meta());
    while !sim.finished() {
        let out = sim.step()?;
        acc.push_step(&out.records);
    }
    let meta = sim.trace_meta();
    acc.set_meta_counters(meta.transform_clamps, meta.weight_clamps);
    Ok(acc.finish())
}
