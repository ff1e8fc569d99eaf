//! Scenario file schema, parsing and validation.
//!
//! Scenarios are TOML files; the bundled reference scenario (emitted by the
//! `paper-scenario` subcommand) is the canonical example of the grammar.
//! Validation collects every failure, not just the first.

use super::{Axis, RingFormation, ScenarioError, ValidationIssue};
use crate::controller::AuxState;
use crate::dynamics::{AttitudeGains, LeaderTrajectory, QuadParams, UgvParams};
use crate::graph::{
    FaultEntry, FaultSchedule, FaultTarget, NoiseMode, PerturbationSpec, TopologySpec,
};
use crate::observer::ObserverGains;
use crate::ppc::PerformanceProfile;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Whether plants run as the control-design double integrators or as the full
/// nonlinear models behind the input maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fidelity {
    Simplified,
    Full,
}

/// Which Laplacian enters the observer virtual laws (the disagreement itself
/// always uses the faulted weights).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LapMode {
    Nominal,
    Faulted,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    pub duration: f64,
    pub seed: u64,
    #[serde(default = "default_fidelity")]
    pub fidelity: Fidelity,
}

fn default_fidelity() -> Fidelity {
    Fidelity::Simplified
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeaderSection {
    /// Length of the vertical climb phase, seconds.
    pub t0: f64,
    /// Cruise altitude reached at the end of the climb.
    pub altitude: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    /// Sender (1-based agent id).
    pub from: usize,
    /// Receiver (1-based agent id).
    pub to: usize,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinSpec {
    /// Agent (1-based) that senses the leader directly.
    pub agent: usize,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

fn default_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    pub n_uav: usize,
    pub n_ugv: usize,
    pub edges: Vec<EdgeSpec>,
    pub pins: Vec<PinSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSection {
    /// Sender of the perturbed link; 0 means the leader (a pinning fault).
    pub from: usize,
    /// Receiver (1-based agent id).
    pub to: usize,
    /// Active window `[t_on, t_off]`, seconds.
    pub window: [f64; 2],
    pub amplitude: f64,
    /// Sinusoid carrier frequency, rad/s.
    pub carrier: f64,
    #[serde(default = "default_noise")]
    pub noise: NoiseMode,
    #[serde(default = "default_smoothing_tau")]
    pub smoothing_tau: f64,
}

fn default_noise() -> NoiseMode {
    NoiseMode::Held
}

fn default_smoothing_tau() -> f64 {
    0.05
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverSection {
    pub k1: f64,
    pub k2: f64,
    pub eta: f64,
    pub p: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    #[serde(default = "default_lap_mode")]
    pub laplacian_in_laws: LapMode,
}

fn default_lap_mode() -> LapMode {
    LapMode::Nominal
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    pub rho_inf: f64,
    pub horizon: f64,
    #[serde(default = "default_cap_factor")]
    pub cap_factor: f64,
}

fn default_cap_factor() -> f64 {
    1e3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfilesSection {
    pub observer: ProfileSection,
    pub tracking: ProfileSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub lambda_s: f64,
    pub k_s_xy: f64,
    pub k_s_z: f64,
    pub omega_a: f64,
    #[serde(default = "default_weight")]
    pub delta1: f64,
    #[serde(default = "default_weight")]
    pub delta2: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaturationSection {
    pub uav_xy: [f64; 2],
    pub uav_z: [f64; 2],
    pub ugv: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UavSection {
    pub mass: f64,
    pub ix: f64,
    pub iy: f64,
    pub iz: f64,
    #[serde(default)]
    pub rotor_inertia: f64,
    #[serde(default)]
    pub rotor_residual: f64,
    #[serde(default = "default_gravity")]
    pub gravity: f64,
    #[serde(default = "default_attitude_kp")]
    pub attitude_kp: f64,
    #[serde(default = "default_attitude_kd")]
    pub attitude_kd: f64,
    #[serde(default = "default_max_tilt")]
    pub max_tilt_deg: f64,
}

fn default_gravity() -> f64 {
    9.81
}

fn default_attitude_kp() -> f64 {
    10000.0
}

fn default_attitude_kd() -> f64 {
    200.0
}

fn default_max_tilt() -> f64 {
    30.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UgvSection {
    pub mass: f64,
    pub inertia: f64,
    pub wheel_radius: f64,
    pub half_track: f64,
    pub hand_offset: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormationSection {
    pub uav_radius: f64,
    pub uav_rate: f64,
    pub ugv_radius: f64,
    pub ugv_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub uav_positions: Vec<[f64; 3]>,
    pub ugv_positions: Vec<[f64; 2]>,
    #[serde(default)]
    pub ugv_headings: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Default output directory for the CLI (flag and env override it).
    #[serde(default)]
    pub dir: Option<String>,
    /// Plot-data stride in steps.
    #[serde(default = "default_downsample")]
    pub downsample: usize,
}

fn default_downsample() -> usize {
    10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub sim: SimSection,
    pub leader: LeaderSection,
    pub topology: TopologySection,
    #[serde(default)]
    pub faults: Vec<FaultSection>,
    pub observer: ObserverSection,
    pub profiles: ProfilesSection,
    pub controller: ControllerSection,
    pub saturation: SaturationSection,
    pub uav: UavSection,
    pub ugv: UgvSection,
    pub formation: FormationSection,
    pub initial: InitialSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl ScenarioConfig {
    pub fn n_agents(&self) -> usize {
        self.topology.n_uav + self.topology.n_ugv
    }

    /// Axes agent `i0` (0-based) participates in.
    pub fn axes_of(&self, i0: usize) -> &'static [Axis] {
        if i0 < self.topology.n_uav {
            &Axis::ALL
        } else {
            &[Axis::X, Axis::Y]
        }
    }

    /// Full follower-to-follower topology with pinning gains.
    pub fn topology_spec(&self) -> Result<TopologySpec, String> {
        let n = self.n_agents();
        let mut adjacency = DMatrix::zeros(n, n);
        for e in &self.topology.edges {
            if e.from == 0 || e.from > n || e.to == 0 || e.to > n || e.from == e.to {
                return Err(format!("edge {} -> {} out of range", e.from, e.to));
            }
            adjacency[(e.to - 1, e.from - 1)] = e.weight;
        }
        let mut pinning = DVector::zeros(n);
        for p in &self.topology.pins {
            if p.agent == 0 || p.agent > n {
                return Err(format!("pin on agent {} out of range", p.agent));
            }
            pinning[p.agent - 1] = p.weight;
        }
        TopologySpec::new(adjacency, pinning).map_err(|e| e.to_string())
    }

    pub fn fault_schedule(&self) -> Result<FaultSchedule, String> {
        let n = self.n_agents();
        let mut entries = Vec::with_capacity(self.faults.len());
        for (k, f) in self.faults.iter().enumerate() {
            if f.to == 0 || f.to > n || f.from > n {
                return Err(format!(
                    "fault {k} targets {} -> {} out of range",
                    f.from, f.to
                ));
            }
            let target = if f.from == 0 {
                FaultTarget::Pin { agent: f.to - 1 }
            } else {
                FaultTarget::Link {
                    from: f.from - 1,
                    to: f.to - 1,
                }
            };
            let perturbation =
                PerturbationSpec::new(f.amplitude, f.carrier, f.noise, f.smoothing_tau)
                    .map_err(|e| format!("fault {k}: {e}"))?;
            entries.push(
                FaultEntry::new(target, (f.window[0], f.window[1]), perturbation)
                    .map_err(|e| format!("fault {k}: {e}"))?,
            );
        }
        Ok(FaultSchedule { entries })
    }

    pub fn observer_profile(&self) -> Result<PerformanceProfile, String> {
        let p = &self.profiles.observer;
        PerformanceProfile::new(p.rho_inf, p.horizon, p.cap_factor * p.rho_inf)
            .map_err(|e| e.to_string())
    }

    pub fn tracking_profile(&self) -> Result<PerformanceProfile, String> {
        let p = &self.profiles.tracking;
        PerformanceProfile::new(p.rho_inf, p.horizon, p.cap_factor * p.rho_inf)
            .map_err(|e| e.to_string())
    }

    pub fn observer_gains(&self) -> ObserverGains {
        ObserverGains {
            k1: self.observer.k1,
            k2: self.observer.k2,
            eta: self.observer.eta,
            p: self.observer.p,
            sigma1: self.observer.sigma1,
            sigma2: self.observer.sigma2,
        }
    }

    pub fn quad_params(&self) -> QuadParams {
        QuadParams {
            mass: self.uav.mass,
            gravity: self.uav.gravity,
            inertia: [self.uav.ix, self.uav.iy, self.uav.iz],
            rotor_inertia: self.uav.rotor_inertia,
            rotor_residual: self.uav.rotor_residual,
        }
    }

    pub fn attitude_gains(&self) -> AttitudeGains {
        AttitudeGains {
            kp: self.uav.attitude_kp,
            kd: self.uav.attitude_kd,
        }
    }

    pub fn ugv_params(&self) -> UgvParams {
        UgvParams {
            mass: self.ugv.mass,
            inertia: self.ugv.inertia,
            wheel_radius: self.ugv.wheel_radius,
            half_track: self.ugv.half_track,
            hand_offset: self.ugv.hand_offset,
        }
    }

    pub fn leader_trajectory(&self) -> LeaderTrajectory {
        LeaderTrajectory {
            t0: self.leader.t0,
            altitude: self.leader.altitude,
        }
    }

    /// Every validation failure in the configuration; empty means valid.
    pub fn validate(&self) -> Vec<ValidationIssue> {
        let mut issues = Vec::new();
        let mut bad = |field: &str, message: String| {
            issues.push(ValidationIssue {
                field: field.to_string(),
                message,
            });
        };

        let positive = |v: f64| v.is_finite() && v > 0.0;

        // sim
        if !positive(self.sim.dt) {
            bad("sim.dt", format!("must be positive, got {}", self.sim.dt));
        }
        if !positive(self.sim.duration) || self.sim.duration < self.sim.dt {
            bad(
                "sim.duration",
                format!("must be at least one step, got {}", self.sim.duration),
            );
        }
        let sigma_min = self.observer.sigma1.min(self.observer.sigma2);
        if positive(self.sim.dt) && positive(sigma_min) && self.sim.dt > sigma_min / 5.0 {
            bad(
                "sim.dt",
                format!(
                    "step {} too large for observer filters: need dt <= min(sigma)/5 = {}",
                    self.sim.dt,
                    sigma_min / 5.0
                ),
            );
        }

        // leader
        if !(self.leader.t0 >= 0.0) || !self.leader.t0.is_finite() {
            bad(
                "leader.t0",
                format!("must be non-negative, got {}", self.leader.t0),
            );
        }
        if !self.leader.altitude.is_finite() {
            bad("leader.altitude", "must be finite".into());
        }

        // observer gains
        for (name, v) in [
            ("observer.k1", self.observer.k1),
            ("observer.k2", self.observer.k2),
            ("observer.eta", self.observer.eta),
            ("observer.p", self.observer.p),
            ("observer.sigma1", self.observer.sigma1),
            ("observer.sigma2", self.observer.sigma2),
        ] {
            if !positive(v) {
                bad(name, format!("must be strictly positive, got {v}"));
            }
        }

        // profiles
        for (prefix, p) in [
            ("profiles.observer", &self.profiles.observer),
            ("profiles.tracking", &self.profiles.tracking),
        ] {
            if !positive(p.rho_inf) {
                bad(
                    &format!("{prefix}.rho_inf"),
                    format!("must be positive, got {}", p.rho_inf),
                );
            }
            if !positive(p.horizon) {
                bad(
                    &format!("{prefix}.horizon"),
                    format!("must be positive, got {}", p.horizon),
                );
            }
            if !(p.cap_factor > 1.0) || !p.cap_factor.is_finite() {
                bad(
                    &format!("{prefix}.cap_factor"),
                    format!("must exceed 1, got {}", p.cap_factor),
                );
            }
        }

        // controller
        for (name, v) in [
            ("controller.lambda_s", self.controller.lambda_s),
            ("controller.k_s_xy", self.controller.k_s_xy),
            ("controller.k_s_z", self.controller.k_s_z),
            ("controller.omega_a", self.controller.omega_a),
            ("controller.delta1", self.controller.delta1),
            ("controller.delta2", self.controller.delta2),
        ] {
            if !positive(v) {
                bad(name, format!("must be strictly positive, got {v}"));
            }
        }

        // saturation
        for (name, pair) in [
            ("saturation.uav_xy", self.saturation.uav_xy),
            ("saturation.uav_z", self.saturation.uav_z),
            ("saturation.ugv", self.saturation.ugv),
        ] {
            if !(pair[0] < pair[1]) || !pair[0].is_finite() || !pair[1].is_finite() {
                bad(
                    name,
                    format!("must satisfy lo < hi, got [{}, {}]", pair[0], pair[1]),
                );
            }
        }
        if self.saturation.uav_z[0] + self.uav.gravity < 0.1 {
            bad(
                "saturation.uav_z",
                format!(
                    "lower bound {} leaves no usable thrust margin above free fall",
                    self.saturation.uav_z[0]
                ),
            );
        }

        // plant parameters
        for (name, v) in [
            ("uav.mass", self.uav.mass),
            ("uav.ix", self.uav.ix),
            ("uav.iy", self.uav.iy),
            ("uav.iz", self.uav.iz),
            ("uav.gravity", self.uav.gravity),
            ("uav.attitude_kp", self.uav.attitude_kp),
            ("uav.attitude_kd", self.uav.attitude_kd),
            ("ugv.mass", self.ugv.mass),
            ("ugv.inertia", self.ugv.inertia),
            ("ugv.wheel_radius", self.ugv.wheel_radius),
            ("ugv.half_track", self.ugv.half_track),
        ] {
            if !positive(v) {
                bad(name, format!("must be strictly positive, got {v}"));
            }
        }
        if !(self.uav.rotor_inertia >= 0.0) {
            bad("uav.rotor_inertia", "must be non-negative".into());
        }
        if !(self.uav.max_tilt_deg > 0.0 && self.uav.max_tilt_deg < 90.0) {
            bad(
                "uav.max_tilt_deg",
                format!("must lie in (0, 90), got {}", self.uav.max_tilt_deg),
            );
        }
        if !(self.ugv.hand_offset > 1e-6) {
            bad(
                "ugv.hand_offset",
                format!(
                    "offset {} makes the torque map singular",
                    self.ugv.hand_offset
                ),
            );
        }

        // formation
        for (name, v) in [
            ("formation.uav_radius", self.formation.uav_radius),
            ("formation.ugv_radius", self.formation.ugv_radius),
        ] {
            if !positive(v) {
                bad(name, format!("must be strictly positive, got {v}"));
            }
        }
        for (name, v) in [
            ("formation.uav_rate", self.formation.uav_rate),
            ("formation.ugv_rate", self.formation.ugv_rate),
        ] {
            if !v.is_finite() {
                bad(name, "must be finite".into());
            }
        }

        // topology structure
        let n = self.n_agents();
        if self.topology.n_uav == 0 {
            bad(
                "topology.n_uav",
                "at least one aerial agent is required".into(),
            );
        }
        let mut seen_edges = std::collections::HashSet::new();
        for (k, e) in self.topology.edges.iter().enumerate() {
            if e.from == 0 || e.from > n || e.to == 0 || e.to > n {
                bad(
                    &format!("topology.edges[{k}]"),
                    format!("endpoints must be in 1..={n}, got {} -> {}", e.from, e.to),
                );
            } else if e.from == e.to {
                bad(
                    &format!("topology.edges[{k}]"),
                    "self-loops are not allowed".into(),
                );
            } else if !seen_edges.insert((e.from, e.to)) {
                bad(
                    &format!("topology.edges[{k}]"),
                    format!("duplicate edge {} -> {}", e.from, e.to),
                );
            }
            if !positive(e.weight) {
                bad(
                    &format!("topology.edges[{k}].weight"),
                    format!("must be strictly positive, got {}", e.weight),
                );
            }
        }
        let mut seen_pins = std::collections::HashSet::new();
        for (k, p) in self.topology.pins.iter().enumerate() {
            if p.agent == 0 || p.agent > n {
                bad(
                    &format!("topology.pins[{k}]"),
                    format!("agent must be in 1..={n}, got {}", p.agent),
                );
            } else if !seen_pins.insert(p.agent) {
                bad(
                    &format!("topology.pins[{k}]"),
                    format!("duplicate pin on agent {}", p.agent),
                );
            }
            if !positive(p.weight) {
                bad(
                    &format!("topology.pins[{k}].weight"),
                    format!("must be strictly positive, got {}", p.weight),
                );
            }
        }

        let spec = match self.topology_spec() {
            Ok(spec) => {
                if !spec.has_leader_spanning_tree() {
                    bad(
                        "topology",
                        "graph must contain a leader-rooted spanning tree: every agent must be \
                         reachable from the leader over directed edges"
                            .into(),
                    );
                }
                if self.topology.n_uav > 0 {
                    let z_agents: Vec<usize> = (0..self.topology.n_uav).collect();
                    if !spec.restrict(&z_agents).has_leader_spanning_tree() {
                        bad(
                            "topology",
                            "vertical-axis subgraph (aerial agents only) must also contain a \
                             leader-rooted spanning tree"
                                .into(),
                        );
                    }
                }
                Some(spec)
            }
            Err(e) => {
                bad("topology", e);
                None
            }
        };

        // faults reference existing links
        match self.fault_schedule() {
            Ok(schedule) => {
                if let Some(spec) = &spec {
                    if let Err(e) = schedule.validate_against(spec) {
                        bad("faults", e.to_string());
                    }
                }
            }
            Err(e) => bad("faults", e),
        }

        // initial conditions
        if self.initial.uav_positions.len() != self.topology.n_uav {
            bad(
                "initial.uav_positions",
                format!(
                    "expected {} entries, got {}",
                    self.topology.n_uav,
                    self.initial.uav_positions.len()
                ),
            );
        }
        if self.initial.ugv_positions.len() != self.topology.n_ugv {
            bad(
                "initial.ugv_positions",
                format!(
                    "expected {} entries, got {}",
                    self.topology.n_ugv,
                    self.initial.ugv_positions.len()
                ),
            );
        }
        if let Some(h) = &self.initial.ugv_headings {
            if h.len() != self.topology.n_ugv {
                bad(
                    "initial.ugv_headings",
                    format!("expected {} entries, got {}", self.topology.n_ugv, h.len()),
                );
            }
        }
        let finite_positions = self
            .initial
            .uav_positions
            .iter()
            .flatten()
            .chain(self.initial.ugv_positions.iter().flatten())
            .all(|v| v.is_finite());
        if !finite_positions {
            bad("initial", "positions must be finite".into());
        }

        if self.output.downsample == 0 {
            bad("output.downsample", "must be at least 1".into());
        }

        // initial feasibility: both corridors must hold strictly at t = 0
        if issues.is_empty() {
            self.check_initial_feasibility(&mut issues);
        }
        issues
    }

    /// Initial positions must start strictly inside both performance
    /// corridors; the barrier transforms are undefined outside.
    fn check_initial_feasibility(&self, issues: &mut Vec<ValidationIssue>) {
        let spec = match self.topology_spec() {
            Ok(s) => s,
            Err(_) => return,
        };
        let obs_profile = match self.observer_profile() {
            Ok(p) => p,
            Err(e) => {
                issues.push(ValidationIssue {
                    field: "profiles.observer".into(),
                    message: e,
                });
                return;
            }
        };
        let trk_profile = match self.tracking_profile() {
            Ok(p) => p,
            Err(e) => {
                issues.push(ValidationIssue {
                    field: "profiles.tracking".into(),
                    message: e,
                });
                return;
            }
        };
        let leader = self.leader_trajectory().state(0.0);
        let plan = RingFormation::from_config(self);
        let rho0 = obs_profile.rho(0.0);
        let n = self.n_agents();
        let pos = |i0: usize, axis: Axis| -> f64 {
            if i0 < self.topology.n_uav {
                self.initial.uav_positions[i0][axis.index()]
            } else {
                self.initial.ugv_positions[i0 - self.topology.n_uav][axis.index()]
            }
        };
        for axis in Axis::ALL {
            let agents: Vec<usize> = (0..n)
                .filter(|&i0| self.axes_of(i0).contains(&axis))
                .collect();
            let sub = if axis == Axis::Z {
                spec.restrict(&agents)
            } else {
                spec.clone()
            };
            for (row, &i0) in agents.iter().enumerate() {
                // observers start at the agent's own position
                let mut xi = sub.pinning()[row] * (pos(i0, axis) - leader.pos[axis.index()]);
                for (col, &j0) in agents.iter().enumerate() {
                    xi += sub.adjacency()[(row, col)] * (pos(i0, axis) - pos(j0, axis));
                }
                if xi.abs() >= rho0 {
                    issues.push(ValidationIssue {
                        field: "initial".into(),
                        message: format!(
                            "agent {} axis {axis}: initial observer disagreement {xi:.3} is not \
                             strictly inside the start-up boundary {rho0:.3}",
                            i0 + 1
                        ),
                    });
                }
            }
        }
        let rho_eps0 = trk_profile.rho(0.0);
        let aux0 = AuxState::default();
        let x_a = aux0.x_a(rho_eps0);
        let lower = (self.controller.delta1 - x_a) * rho_eps0;
        let upper = (self.controller.delta2 + x_a) * rho_eps0;
        for i0 in 0..n {
            for &axis in self.axes_of(i0) {
                let h = plan.eval(i0 + 1, axis, 0.0);
                let e_p = pos(i0, axis) - h.h_p - leader.pos[axis.index()];
                if !(-lower < e_p && e_p < upper) {
                    issues.push(ValidationIssue {
                        field: "initial".into(),
                        message: format!(
                            "agent {} axis {axis}: initial tracking error {e_p:.3} is not strictly \
                             inside the start-up corridor ({:.3}, {:.3})",
                            i0 + 1,
                            -lower,
                            upper
                        ),
                    });
                }
            }
        }
    }

    /// Validates and returns the configuration, or every failure at once.
    pub fn validated(self) -> Result<Self, ScenarioError> {
        let issues = self.validate();
        if issues.is_empty() {
            Ok(self)
        } else {
            Err(ScenarioError::Validation(issues))
        }
    }
}

/// Loads and fully validates a scenario file, reporting parse errors with
/// location information and every validation failure at once.
pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let cfg: ScenarioConfig = toml::from_str(&text).map_err(|e| ScenarioError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    cfg.validated()
}

/// The bundled reference scenario as TOML text.
pub fn paper_scenario_toml() -> &'static str {
    include_str!("../../assets/paper_scenario.toml")
}

/// The bundled reference scenario, parsed and validated.
pub fn paper_scenario() -> ScenarioConfig {
    let cfg: ScenarioConfig =
        toml::from_str(paper_scenario_toml()).expect("bundled scenario must parse");
    cfg.validated().expect("bundled scenario must validate")
}
