//! Closed-form time-varying formation offsets: two concentric rotating rings,
//! one for the aerial agents and one for the ground agents.

use super::{Axis, ScenarioConfig};
use crate::controller::FormationOffset;
use std::f64::consts::TAU;

/// Ring formation evaluator. Agent `i` (1-based, global numbering) sits at
/// phase `TAU * i / ring_size` on its ring, which rotates at a constant rate.
/// Aerial agents carry a zero vertical offset relative to the leader altitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingFormation {
    pub n_uav: usize,
    pub n_ugv: usize,
    pub uav_radius: f64,
    pub uav_rate: f64,
    pub ugv_radius: f64,
    pub ugv_rate: f64,
}

impl RingFormation {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self {
            n_uav: cfg.topology.n_uav,
            n_ugv: cfg.topology.n_ugv,
            uav_radius: cfg.formation.uav_radius,
            uav_rate: cfg.formation.uav_rate,
            ugv_radius: cfg.formation.ugv_radius,
            ugv_rate: cfg.formation.ugv_rate,
        }
    }

    /// Offset and its first two derivatives for agent `agent` (1-based) on
    /// `axis` at time `t`.
    pub fn eval(&self, agent: usize, axis: Axis, t: f64) -> FormationOffset {
        debug_assert!((1..=self.n_uav + self.n_ugv).contains(&agent));
        let (radius, rate, ring) = if agent <= self.n_uav {
            (self.uav_radius, self.uav_rate, self.n_uav)
        } else {
            (self.ugv_radius, self.ugv_rate, self.n_ugv)
        };
        let angle = rate * t + TAU * agent as f64 / ring as f64;
        let (sin, cos) = angle.sin_cos();
        match axis {
            Axis::X => FormationOffset {
                h_p: radius * cos,
                h_v: -radius * rate * sin,
                h_acc: -radius * rate * rate * cos,
            },
            Axis::Y => FormationOffset {
                h_p: radius * sin,
                h_v: radius * rate * cos,
                h_acc: -radius * rate * rate * sin,
            },
            Axis::Z => FormationOffset {
                h_p: 0.0,
                h_v: 0.0,
                h_acc: 0.0,
            },
        }
    }
}
