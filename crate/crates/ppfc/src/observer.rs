//! Distributed leader-state observer.
//!
//! Each agent estimates the virtual leader's position and velocity per axis.
//! The weighted disagreement with neighbors (plus the pinned leader term) is
//! confined to a prescribed performance corridor through the symmetric barrier
//! transform; two first-order filters realize the virtual laws.
//!
//! The virtual laws contain an inverse and a transpose of the whole-network
//! Laplacian, so they are evaluated centrally in stacked form once per step;
//! the per-agent message-passing view survives in [`neighborhood_error`].

use crate::dynamics::rk4;
use crate::graph::{LaplacianOps, WeightSnapshot};
use crate::ppc::TransformPoint;
use nalgebra::DVector;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ObserverError {
    #[error("invalid observer gains: {0}")]
    InvalidGains(String),
}

/// Per-agent observer gains; the filter time constants are per agent as well.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverGains {
    pub k1: f64,
    pub k2: f64,
    pub eta: f64,
    pub p: f64,
    pub sigma1: f64,
    pub sigma2: f64,
}

impl ObserverGains {
    pub fn validated(self) -> Result<Self, ObserverError> {
        for (name, v) in [
            ("k1", self.k1),
            ("k2", self.k2),
            ("eta", self.eta),
            ("p", self.p),
            ("sigma1", self.sigma1),
            ("sigma2", self.sigma2),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ObserverError::InvalidGains(format!(
                    "{name} must be strictly positive, got {v}"
                )));
            }
        }
        Ok(self)
    }
}

/// Observer state of one agent on one axis: leader position/velocity estimate
/// and the two virtual-law filter states.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ObserverState {
    pub zeta_p: f64,
    pub zeta_v: f64,
    pub abar1: f64,
    pub abar2: f64,
}

/// Weighted disagreement of one agent's estimate with its neighbors and the
/// pinned leader, componentwise for position and velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborhoodError {
    pub xi_p: f64,
    pub xi_v: f64,
}

/// Message-passing form of the disagreement: only neighbor estimates and (for
/// pinned agents) the leader state enter.
pub fn neighborhood_error(
    i: usize,
    states: &[ObserverState],
    leader_p: f64,
    leader_v: f64,
    weights: &WeightSnapshot,
) -> NeighborhoodError {
    let mut xi_p = 0.0;
    let mut xi_v = 0.0;
    for (j, other) in states.iter().enumerate() {
        let a = weights.adjacency[(i, j)];
        if a != 0.0 {
            xi_p += a * (states[i].zeta_p - other.zeta_p);
            xi_v += a * (states[i].zeta_v - other.zeta_v);
        }
    }
    let b = weights.pinning[i];
    if b != 0.0 {
        xi_p += b * (states[i].zeta_p - leader_p);
        xi_v += b * (states[i].zeta_v - leader_v);
    }
    NeighborhoodError { xi_p, xi_v }
}

/// Stacked virtual laws for one axis.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualLaws {
    pub alpha1: DVector<f64>,
    pub alpha2: DVector<f64>,
}

/// Evaluates both virtual laws in stacked form:
/// `alpha1 = -K1 R eps + gamma L^{-1} xi_p` and
/// `alpha2 = -H K2 xi_v - H L^T (R P eps)`.
///
/// `laws_lap` is the Laplacian used inside the laws (nominal by default, the
/// per-step faulted one behind a config switch).
pub fn virtual_laws(
    xi_p: &DVector<f64>,
    xi_v: &DVector<f64>,
    points: &[TransformPoint],
    gamma: f64,
    gains: &[ObserverGains],
    laws_lap: &LaplacianOps,
) -> VirtualLaws {
    let n = points.len();
    debug_assert_eq!(xi_p.len(), n);
    debug_assert_eq!(gains.len(), n);
    let linv_xi = &laws_lap.inverse * xi_p;
    let rpe = DVector::from_fn(n, |i, _| points[i].r * gains[i].p * points[i].eps);
    let lt_rpe = laws_lap.matrix.transpose() * rpe;
    let alpha1 = DVector::from_fn(n, |i, _| {
        -gains[i].k1 * points[i].r * points[i].eps + gamma * linv_xi[i]
    });
    let alpha2 = DVector::from_fn(n, |i, _| {
        -gains[i].eta * gains[i].k2 * xi_v[i] - gains[i].eta * lt_rpe[i]
    });
    VirtualLaws { alpha1, alpha2 }
}

/// One fixed step of the four coupled observer equations with the virtual-law
/// targets held constant:
/// `zeta_p' = zeta_v + abar1`, `abar1' = (alpha1 - abar1)/sigma1`,
/// `zeta_v' = abar2`, `abar2' = (alpha2 - abar2)/sigma2`.
///
/// The step must resolve the filter stiffness: `dt <= sigma/5`.
pub fn observer_step(
    state: &ObserverState,
    alpha1: f64,
    alpha2: f64,
    gains: &ObserverGains,
    dt: f64,
) -> ObserverState {
    debug_assert!(
        dt <= gains.sigma1 / 2.0 && dt <= gains.sigma2 / 2.0,
        "step {dt} too large for filter time constants {} / {}",
        gains.sigma1,
        gains.sigma2
    );
    let s1 = gains.sigma1;
    let s2 = gains.sigma2;
    let y = rk4(
        |_t, y: &[f64; 4]| {
            [
                y[1] + y[2],
                y[3],
                (alpha1 - y[2]) / s1,
                (alpha2 - y[3]) / s2,
            ]
        },
        0.0,
        &[state.zeta_p, state.zeta_v, state.abar1, state.abar2],
        dt,
    );
    ObserverState {
        zeta_p: y[0],
        zeta_v: y[1],
        abar1: y[2],
        abar2: y[3],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_faulted_laplacian, smallest_singular_value};
    use crate::ppc::{transform_point, PerformanceProfile};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use nalgebra::{DMatrix, DVector};

    fn snapshot(adjacency: DMatrix<f64>, pinning: DVector<f64>) -> WeightSnapshot {
        WeightSnapshot {
            t: 0.0,
            adjacency,
            pinning,
            clamp_events: 0,
            any_active: false,
        }
    }

    fn gains() -> ObserverGains {
        ObserverGains {
            k1: 2.0,
            k2: 50.0,
            eta: 1.0,
            p: 1.0,
            sigma1: 0.01,
            sigma2: 0.01,
        }
    }

    #[test]
    fn consensus_gives_zero_disagreement() {
        let w = snapshot(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
            DVector::from_row_slice(&[1.0, 0.0]),
        );
        let states = vec![
            ObserverState {
                zeta_p: 2.0,
                zeta_v: -1.0,
                ..Default::default()
            };
            2
        ];
        for i in 0..2 {
            let xi = neighborhood_error(i, &states, 2.0, -1.0, &w);
            assert_eq!((xi.xi_p, xi.xi_v), (0.0, 0.0));
        }
    }

    #[test]
    fn single_pinned_follower_measures_its_own_offset() {
        let w = snapshot(DMatrix::zeros(1, 1), DVector::from_row_slice(&[1.0]));
        let states = vec![ObserverState {
            zeta_p: 0.2,
            zeta_v: 0.0,
            ..Default::default()
        }];
        let xi = neighborhood_error(0, &states, 0.0, 0.0, &w);
        assert_eq!((xi.xi_p, xi.xi_v), (0.2, 0.0));
    }

    #[test]
    fn stacked_form_matches_message_passing() {
        // four agents with random-ish weights and estimates
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 0.7, 0.0, 0.2, //
                1.1, 0.0, 0.0, 0.0, //
                0.0, 0.5, 0.0, 0.9, //
                0.3, 0.0, 0.4, 0.0,
            ],
        );
        let b = DVector::from_row_slice(&[1.0, 0.0, 0.6, 0.0]);
        let w = snapshot(a, b);
        let (leader_p, leader_v) = (0.4, -0.3);
        let states: Vec<ObserverState> = (0..4)
            .map(|i| ObserverState {
                zeta_p: (i as f64 * 1.3).sin(),
                zeta_v: (i as f64 * 0.7).cos(),
                ..Default::default()
            })
            .collect();
        let lap = build_faulted_laplacian(&w);
        let zt_p = DVector::from_fn(4, |i, _| states[i].zeta_p - leader_p);
        let zt_v = DVector::from_fn(4, |i, _| states[i].zeta_v - leader_v);
        let stacked_p = &lap.matrix * zt_p;
        let stacked_v = &lap.matrix * zt_v;
        for i in 0..4 {
            let xi = neighborhood_error(i, &states, leader_p, leader_v, &w);
            assert_abs_diff_eq!(xi.xi_p, stacked_p[i], epsilon = 1e-12);
            assert_abs_diff_eq!(xi.xi_v, stacked_v[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn virtual_laws_vanish_at_consensus() {
        let lap = LaplacianOps::new(DMatrix::identity(3, 3)).unwrap();
        let profile = PerformanceProfile::with_default_cap(0.1, 5.0).unwrap();
        let points: Vec<_> = (0..3)
            .map(|_| transform_point(0.0, &profile, 10.0))
            .collect();
        let laws = virtual_laws(
            &DVector::zeros(3),
            &DVector::zeros(3),
            &points,
            0.0,
            &[gains(); 3],
            &lap,
        );
        assert_eq!(laws.alpha1, DVector::zeros(3));
        assert_eq!(laws.alpha2, DVector::zeros(3));
    }

    #[test]
    fn virtual_laws_worked_single_agent() {
        // single agent, pinned with unit weight, after the horizon
        let lap = LaplacianOps::new(DMatrix::from_element(1, 1, 1.0)).unwrap();
        let profile = PerformanceProfile::with_default_cap(0.1, 5.0).unwrap();
        let point = transform_point(0.05, &profile, 10.0);
        assert_relative_eq!(point.x, 0.5, max_relative = 1e-12);
        assert_relative_eq!(point.r, 1.0 / (0.1 * 1.5 * 0.5), max_relative = 1e-12);
        let laws = virtual_laws(
            &DVector::from_element(1, 0.05),
            &DVector::from_element(1, 0.1),
            &[point],
            point.gamma,
            &[gains()],
            &lap,
        );
        assert_relative_eq!(laws.alpha1[0], -14.648, max_relative = 1e-3);
        assert_relative_eq!(laws.alpha2[0], -12.324, max_relative = 1e-3);
        // closed forms
        assert_relative_eq!(
            laws.alpha1[0],
            -2.0 * point.r * point.eps,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            laws.alpha2[0],
            -50.0 * 0.1 - point.r * point.eps,
            max_relative = 1e-14
        );
    }

    #[test]
    fn filter_tracks_frozen_target() {
        let g = gains();
        let target = 3.0;
        let mut state = ObserverState::default();
        let dt = 1e-3;
        let steps = (5.0 * g.sigma1 / dt).round() as usize;
        for _ in 0..steps {
            state = observer_step(&state, target, 0.0, &g, dt);
        }
        // five time constants: within 0.7% of the target
        assert!((state.abar1 - target).abs() / target < 0.007);
        // zeta_v untouched by a zero alpha2 target
        assert_eq!(state.zeta_v, 0.0);
    }

    #[test]
    fn filter_time_constant_within_five_percent() {
        let g = gains();
        let mut state = ObserverState {
            abar1: 1.0,
            ..Default::default()
        };
        let dt = 1e-3;
        let steps = 10;
        for _ in 0..steps {
            state = observer_step(&state, 0.0, 0.0, &g, dt);
        }
        let t = steps as f64 * dt;
        let measured_tau = -t / state.abar1.ln();
        assert_relative_eq!(measured_tau, g.sigma1, max_relative = 0.05);
    }

    #[test]
    fn zero_dynamics_fixed_point() {
        let g = gains();
        let state = ObserverState {
            zeta_p: 1.5,
            ..Default::default()
        };
        let next = observer_step(&state, 0.0, 0.0, &g, 1e-3);
        assert_eq!(next, state);
    }

    #[test]
    fn estimate_error_bounded_by_disagreement_over_smallest_singular_value() {
        // ||zeta_err_p|| <= ||xi_p|| / smin(L), by construction of xi = L zeta_err
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.3, 0.0]);
        let b = DVector::from_row_slice(&[1.0, 0.0, 0.2]);
        let w = snapshot(a, b);
        let lap = build_faulted_laplacian(&w);
        let smin = smallest_singular_value(&lap.matrix);
        for k in 0..50 {
            let zt = DVector::from_fn(3, |i, _| ((i + 1) as f64 * (k as f64 + 0.3)).sin());
            let xi = &lap.matrix * &zt;
            assert!(zt.norm() <= xi.norm() / smin + 1e-9);
        }
    }
}
