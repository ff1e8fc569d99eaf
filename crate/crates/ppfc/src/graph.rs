//! Directed communication topology with leader pinning, time-windowed link
//! fault injection, and faulted-Laplacian algebra.
//!
//! Followers are indexed `0..n`; the virtual leader is a separate root node.
//! `adjacency[(i, j)] > 0` means information flows from follower `j` to
//! follower `i`; `pinning[i] > 0` means follower `i` senses the leader
//! directly. Faults perturb individual weights inside time windows while the
//! sign of every weight is preserved by clamping at a small positive floor.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Faulted weights are clamped at this fraction of the nominal weight so that
/// a perturbation can never flip or zero an existing link.
pub const SIGN_FLOOR_FRACTION: f64 = 0.05;

/// Smallest singular value below which a faulted Laplacian is treated as
/// singular.
pub const DEGENERACY_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("invalid fault schedule: {0}")]
    InvalidSchedule(String),
    #[error("degenerate topology: {0}")]
    DegenerateTopology(String),
}

/// Nominal directed topology: follower-to-follower weights plus leader pinning.
#[derive(Debug, Clone, PartialEq)]
pub struct TopologySpec {
    adjacency: DMatrix<f64>,
    pinning: DVector<f64>,
}

impl TopologySpec {
    pub fn new(adjacency: DMatrix<f64>, pinning: DVector<f64>) -> Result<Self, GraphError> {
        let n = pinning.len();
        if adjacency.nrows() != n || adjacency.ncols() != n {
            return Err(GraphError::InvalidTopology(format!(
                "adjacency is {}x{} but there are {} followers",
                adjacency.nrows(),
                adjacency.ncols(),
                n
            )));
        }
        for i in 0..n {
            if adjacency[(i, i)] != 0.0 {
                return Err(GraphError::InvalidTopology(format!(
                    "self-loop on follower {i}"
                )));
            }
            for j in 0..n {
                let w = adjacency[(i, j)];
                if !w.is_finite() || w < 0.0 {
                    return Err(GraphError::InvalidTopology(format!(
                        "weight ({i}, {j}) = {w} must be finite and non-negative"
                    )));
                }
            }
            let b = pinning[i];
            if !b.is_finite() || b < 0.0 {
                return Err(GraphError::InvalidTopology(format!(
                    "pinning gain {i} = {b} must be finite and non-negative"
                )));
            }
        }
        Ok(Self { adjacency, pinning })
    }

    pub fn n_followers(&self) -> usize {
        self.pinning.len()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn pinning(&self) -> &DVector<f64> {
        &self.pinning
    }

    /// Induced sub-topology on the given followers (used for axes in which
    /// only a subset of agents participates).
    pub fn restrict(&self, keep: &[usize]) -> TopologySpec {
        let m = keep.len();
        let adjacency = DMatrix::from_fn(m, m, |i, j| self.adjacency[(keep[i], keep[j])]);
        let pinning = DVector::from_fn(m, |i, _| self.pinning[keep[i]]);
        TopologySpec { adjacency, pinning }
    }

    /// Nominal Laplacian with pinning gains folded into the diagonal.
    pub fn laplacian(&self) -> DMatrix<f64> {
        laplacian_from_weights(&self.adjacency, &self.pinning)
    }

    /// True iff every follower is reachable from the leader along directed
    /// edges (leader -> i when `pinning[i] > 0`, j -> i when
    /// `adjacency[(i, j)] > 0`).
    pub fn has_leader_spanning_tree(&self) -> bool {
        let n = self.n_followers();
        let mut reached = vec![false; n];
        let mut queue: Vec<usize> = (0..n).filter(|&i| self.pinning[i] > 0.0).collect();
        for &i in &queue {
            reached[i] = true;
        }
        while let Some(j) = queue.pop() {
            for i in 0..n {
                if !reached[i] && self.adjacency[(i, j)] > 0.0 {
                    reached[i] = true;
                    queue.push(i);
                }
            }
        }
        reached.iter().all(|&r| r)
    }
}

fn laplacian_from_weights(adjacency: &DMatrix<f64>, pinning: &DVector<f64>) -> DMatrix<f64> {
    let n = pinning.len();
    let mut lap = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut degree = 0.0;
        for j in 0..n {
            if i != j {
                degree += adjacency[(i, j)];
                lap[(i, j)] = -adjacency[(i, j)];
            }
        }
        lap[(i, i)] = degree + pinning[i];
    }
    lap
}

/// How the random factor of a fault perturbation evolves over time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// One uniform sample per control step, held for the whole step.
    Held,
    /// Held samples passed through a first-order low-pass filter, which keeps
    /// the perturbation rate bounded.
    Smoothed,
    /// No random factor; the perturbation is the bare sinusoid.
    None,
}

/// Shape of one perturbation: `amplitude * sin(carrier * t) * noise(t)` with
/// `noise(t)` in `[0, 1]`, so its magnitude never exceeds `amplitude`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationSpec {
    pub amplitude: f64,
    /// Sinusoid carrier frequency in rad/s.
    pub carrier: f64,
    pub noise: NoiseMode,
    /// Low-pass time constant for [`NoiseMode::Smoothed`], seconds.
    pub smoothing_tau: f64,
}

impl PerturbationSpec {
    pub fn new(
        amplitude: f64,
        carrier: f64,
        noise: NoiseMode,
        smoothing_tau: f64,
    ) -> Result<Self, GraphError> {
        if !(amplitude >= 0.0) || !amplitude.is_finite() {
            return Err(GraphError::InvalidSchedule(format!(
                "amplitude must be finite and non-negative, got {amplitude}"
            )));
        }
        if !carrier.is_finite() {
            return Err(GraphError::InvalidSchedule("carrier must be finite".into()));
        }
        if matches!(noise, NoiseMode::Smoothed) && !(smoothing_tau > 0.0) {
            return Err(GraphError::InvalidSchedule(format!(
                "smoothing time constant must be positive, got {smoothing_tau}"
            )));
        }
        Ok(Self {
            amplitude,
            carrier,
            noise,
            smoothing_tau,
        })
    }
}

/// Which weight a fault entry perturbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultTarget {
    /// Follower-to-follower link `from -> to`, i.e. `adjacency[(to, from)]`.
    Link { from: usize, to: usize },
    /// Leader-to-follower pinning gain of `agent`.
    Pin { agent: usize },
}

/// One time-windowed weight perturbation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultEntry {
    pub target: FaultTarget,
    /// Active window `[t_on, t_off]`, seconds.
    pub window: (f64, f64),
    pub perturbation: PerturbationSpec,
}

impl FaultEntry {
    pub fn new(
        target: FaultTarget,
        window: (f64, f64),
        perturbation: PerturbationSpec,
    ) -> Result<Self, GraphError> {
        if !(window.0 < window.1) {
            return Err(GraphError::InvalidSchedule(format!(
                "fault window must satisfy t_on < t_off, got [{}, {}]",
                window.0, window.1
            )));
        }
        Ok(Self {
            target,
            window,
            perturbation,
        })
    }

    fn active(&self, t: f64) -> bool {
        t >= self.window.0 && t <= self.window.1
    }
}

/// A list of fault entries applied on top of a nominal topology.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FaultSchedule {
    pub entries: Vec<FaultEntry>,
}

impl FaultSchedule {
    /// Checks every entry targets an existing (strictly positive) weight; a
    /// perturbation on a zero weight cannot preserve its sign.
    pub fn validate_against(&self, spec: &TopologySpec) -> Result<(), GraphError> {
        let n = spec.n_followers();
        for (k, entry) in self.entries.iter().enumerate() {
            match entry.target {
                FaultTarget::Link { from, to } => {
                    if from >= n || to >= n {
                        return Err(GraphError::InvalidSchedule(format!(
                            "fault {k} targets link {from} -> {to} outside 0..{n}"
                        )));
                    }
                    if spec.adjacency()[(to, from)] <= 0.0 {
                        return Err(GraphError::InvalidSchedule(format!(
                            "fault {k} targets absent link {from} -> {to}"
                        )));
                    }
                }
                FaultTarget::Pin { agent } => {
                    if agent >= n {
                        return Err(GraphError::InvalidSchedule(format!(
                            "fault {k} targets pin of agent {agent} outside 0..{n}"
                        )));
                    }
                    if spec.pinning()[agent] <= 0.0 {
                        return Err(GraphError::InvalidSchedule(format!(
                            "fault {k} targets absent pin of agent {agent}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Uniform sample in `[0, 1)` as a pure function of (seed, entry, step).
///
/// Each fault entry owns a ChaCha stream; the step index selects the word
/// position inside it, so the sequence is bit-identical for a given seed and
/// randomly addressable.
pub fn noise_sample(seed: u64, entry: u64, step: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(entry);
    rng.set_word_pos(step as u128 * 2);
    rng.gen::<f64>()
}

/// Snapshot of the faulted weights at one control step.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSnapshot {
    pub t: f64,
    pub adjacency: DMatrix<f64>,
    pub pinning: DVector<f64>,
    /// Number of weights clamped at the sign-preservation floor this step.
    pub clamp_events: u32,
    /// True when at least one fault window is active.
    pub any_active: bool,
}

impl WeightSnapshot {
    /// Induced sub-snapshot on the given followers.
    pub fn restrict(&self, keep: &[usize]) -> WeightSnapshot {
        let m = keep.len();
        WeightSnapshot {
            t: self.t,
            adjacency: DMatrix::from_fn(m, m, |i, j| self.adjacency[(keep[i], keep[j])]),
            pinning: DVector::from_fn(m, |i, _| self.pinning[keep[i]]),
            clamp_events: self.clamp_events,
            any_active: self.any_active,
        }
    }
}

/// Applies a fault schedule to a nominal topology, one snapshot per control
/// step. Holds the low-pass state of smoothed entries, so call
/// [`FaultInjector::step_weights`] exactly once per step, in step order.
#[derive(Debug, Clone)]
pub struct FaultInjector {
    schedule: FaultSchedule,
    seed: u64,
    smooth_state: Vec<f64>,
    clamp_count: u64,
}

impl FaultInjector {
    pub fn new(
        spec: &TopologySpec,
        schedule: FaultSchedule,
        seed: u64,
    ) -> Result<Self, GraphError> {
        schedule.validate_against(spec)?;
        let smooth_state = vec![0.0; schedule.entries.len()];
        Ok(Self {
            schedule,
            seed,
            smooth_state,
            clamp_count: 0,
        })
    }

    /// Total sign-preservation clamp events so far.
    pub fn clamp_count(&self) -> u64 {
        self.clamp_count
    }

    /// Faulted weights at step `step` (time `t`), advancing smoothing filters
    /// by `dt`.
    pub fn step_weights(
        &mut self,
        spec: &TopologySpec,
        step: u64,
        t: f64,
        dt: f64,
    ) -> WeightSnapshot {
        let mut adjacency = spec.adjacency().clone();
        let mut pinning = spec.pinning().clone();
        let mut clamp_events = 0u32;
        let mut any_active = false;
        for (k, entry) in self.schedule.entries.iter().enumerate() {
            if !entry.active(t) {
                self.smooth_state[k] = 0.0;
                continue;
            }
            any_active = true;
            let p = &entry.perturbation;
            let noise = match p.noise {
                NoiseMode::None => 1.0,
                NoiseMode::Held => noise_sample(self.seed, k as u64, step),
                NoiseMode::Smoothed => {
                    let u = noise_sample(self.seed, k as u64, step);
                    let alpha = (dt / p.smoothing_tau).min(1.0);
                    self.smooth_state[k] += alpha * (u - self.smooth_state[k]);
                    self.smooth_state[k]
                }
            };
            let delta = p.amplitude * (p.carrier * t).sin() * noise;
            let slot = match entry.target {
                FaultTarget::Link { from, to } => &mut adjacency[(to, from)],
                FaultTarget::Pin { agent } => &mut pinning[agent],
            };
            let nominal = *slot;
            let mut faulted = nominal + delta;
            let floor = SIGN_FLOOR_FRACTION * nominal;
            if nominal > 0.0 && faulted < floor {
                faulted = floor;
                clamp_events += 1;
            }
            *slot = faulted;
        }
        self.clamp_count += u64::from(clamp_events);
        WeightSnapshot {
            t,
            adjacency,
            pinning,
            clamp_events,
            any_active,
        }
    }
}

/// Laplacian built from a faulted weight snapshot: diagonal in-degrees
/// (including pinning) minus off-diagonal weights.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultedLaplacian {
    pub t: f64,
    pub matrix: DMatrix<f64>,
    pub degrees: DVector<f64>,
}

pub fn build_faulted_laplacian(weights: &WeightSnapshot) -> FaultedLaplacian {
    let matrix = laplacian_from_weights(&weights.adjacency, &weights.pinning);
    let degrees = matrix.diagonal();
    FaultedLaplacian {
        t: weights.t,
        matrix,
        degrees,
    }
}

/// Smallest singular value of the faulted Laplacian.
///
/// Eigenvalues of a directed Laplacian can be complex; the smallest singular
/// value is a sound divisor for the estimate-error bound on any matrix.
pub fn min_eigen_lower_bound(lap: &FaultedLaplacian) -> Result<f64, GraphError> {
    let s = smallest_singular_value(&lap.matrix);
    if s < DEGENERACY_THRESHOLD {
        return Err(GraphError::DegenerateTopology(format!(
            "smallest singular value {s:.3e} at t = {}",
            lap.t
        )));
    }
    Ok(s)
}

pub fn smallest_singular_value(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// A Laplacian together with its inverse, as used inside the observer laws.
#[derive(Debug, Clone)]
pub struct LaplacianOps {
    pub matrix: DMatrix<f64>,
    pub inverse: DMatrix<f64>,
}

impl LaplacianOps {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self, GraphError> {
        if smallest_singular_value(&matrix) < DEGENERACY_THRESHOLD {
            return Err(GraphError::DegenerateTopology(
                "Laplacian used in the observer laws is singular".into(),
            ));
        }
        let inverse = matrix.clone().try_inverse().ok_or_else(|| {
            GraphError::DegenerateTopology("Laplacian used in the observer laws is singular".into())
        })?;
        Ok(Self { matrix, inverse })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn chain_two() -> TopologySpec {
        // leader -> 0 -> 1, all weights 1
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        let b = DVector::from_row_slice(&[1.0, 0.0]);
        TopologySpec::new(a, b).unwrap()
    }

    #[test]
    fn rejects_self_loops_and_negative_weights() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(TopologySpec::new(a, DVector::zeros(2)).is_err());
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 0.0, 0.0]);
        assert!(TopologySpec::new(a, DVector::zeros(2)).is_err());
    }

    #[test]
    fn nominal_weights_outside_fault_window() {
        let spec = chain_two();
        let entry = FaultEntry::new(
            FaultTarget::Link { from: 0, to: 1 },
            (10.0, 15.0),
            PerturbationSpec::new(0.5, 1.0, NoiseMode::None, 0.0).unwrap(),
        )
        .unwrap();
        let mut inj = FaultInjector::new(
            &spec,
            FaultSchedule {
                entries: vec![entry],
            },
            0,
        )
        .unwrap();
        let w = inj.step_weights(&spec, 5000, 5.0, 1e-3);
        assert_eq!(w.adjacency[(1, 0)], 1.0);
        assert!(!w.any_active);
    }

    #[test]
    fn sinusoid_perturbation_inside_window() {
        let spec = chain_two();
        let entry = FaultEntry::new(
            FaultTarget::Link { from: 0, to: 1 },
            (10.0, 15.0),
            PerturbationSpec::new(0.5, 1.0, NoiseMode::None, 0.0).unwrap(),
        )
        .unwrap();
        let mut inj = FaultInjector::new(
            &spec,
            FaultSchedule {
                entries: vec![entry],
            },
            0,
        )
        .unwrap();
        let w = inj.step_weights(&spec, 12000, 12.0, 1e-3);
        // carrier sin(12) with unit noise factor, about 0.7317
        assert_relative_eq!(
            w.adjacency[(1, 0)],
            1.0 + 0.5 * 12f64.sin(),
            max_relative = 1e-15
        );
        assert_relative_eq!(w.adjacency[(1, 0)], 0.7317, max_relative = 1e-3);
        assert!(w.any_active);
    }

    #[test]
    fn zero_noise_sample_leaves_weight_nominal() {
        let spec = chain_two();
        let entry = FaultEntry::new(
            FaultTarget::Pin { agent: 0 },
            (20.0, 25.0),
            PerturbationSpec::new(0.5, 1.0, NoiseMode::Held, 0.0).unwrap(),
        )
        .unwrap();
        let mut inj = FaultInjector::new(
            &spec,
            FaultSchedule {
                entries: vec![entry],
            },
            7,
        )
        .unwrap();
        let w = inj.step_weights(&spec, 22000, 22.0, 1e-3);
        let r = noise_sample(7, 0, 22000);
        assert_relative_eq!(
            w.pinning[0],
            1.0 + 0.5 * 22f64.sin() * r,
            max_relative = 1e-15
        );
    }

    #[test]
    fn clamp_preserves_sign_and_counts() {
        let spec = chain_two();
        let entry = FaultEntry::new(
            FaultTarget::Link { from: 0, to: 1 },
            (0.0, 100.0),
            PerturbationSpec::new(5.0, 1.0, NoiseMode::None, 0.0).unwrap(),
        )
        .unwrap();
        let mut inj = FaultInjector::new(
            &spec,
            FaultSchedule {
                entries: vec![entry],
            },
            0,
        )
        .unwrap();
        // sin(4.8) is about -0.996: perturbation -4.98 would flip the weight
        let w = inj.step_weights(&spec, 4800, 4.8, 1e-3);
        assert_eq!(w.adjacency[(1, 0)], SIGN_FLOOR_FRACTION);
        assert_eq!(w.clamp_events, 1);
        assert_eq!(inj.clamp_count(), 1);
    }

    #[test]
    fn faults_on_absent_links_are_rejected() {
        let spec = chain_two();
        let entry = FaultEntry::new(
            FaultTarget::Link { from: 1, to: 0 }, // no such link
            (0.0, 1.0),
            PerturbationSpec::new(0.5, 1.0, NoiseMode::None, 0.0).unwrap(),
        )
        .unwrap();
        assert!(FaultInjector::new(
            &spec,
            FaultSchedule {
                entries: vec![entry]
            },
            0
        )
        .is_err());
    }

    #[test]
    fn laplacian_of_leader_chain() {
        let lap = chain_two().laplacian();
        assert_eq!(lap, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 1.0]));
    }

    #[test]
    fn laplacian_with_faulted_weights() {
        let w = WeightSnapshot {
            t: 0.0,
            adjacency: DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.5, 0.0]),
            pinning: DVector::from_row_slice(&[1.0, 0.0]),
            clamp_events: 0,
            any_active: true,
        };
        let lap = build_faulted_laplacian(&w);
        assert_eq!(
            lap.matrix,
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.5, 1.5])
        );
        assert_eq!(lap.degrees, DVector::from_row_slice(&[1.0, 1.5]));
    }

    #[test]
    fn all_zero_weights_give_zero_singular_laplacian() {
        let w = WeightSnapshot {
            t: 0.0,
            adjacency: DMatrix::zeros(2, 2),
            pinning: DVector::zeros(2),
            clamp_events: 0,
            any_active: false,
        };
        let lap = build_faulted_laplacian(&w);
        assert_eq!(lap.matrix, DMatrix::zeros(2, 2));
        assert!(matches!(
            min_eigen_lower_bound(&lap),
            Err(GraphError::DegenerateTopology(_))
        ));
    }

    #[test]
    fn smallest_singular_value_examples() {
        let id = FaultedLaplacian {
            t: 0.0,
            matrix: DMatrix::identity(2, 2),
            degrees: DVector::from_element(2, 1.0),
        };
        assert_relative_eq!(
            min_eigen_lower_bound(&id).unwrap(),
            1.0,
            max_relative = 1e-12
        );
        let chain = FaultedLaplacian {
            t: 0.0,
            matrix: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 1.0]),
            degrees: DVector::from_element(2, 1.0),
        };
        // closed form: sqrt((3 - sqrt(5)) / 2)
        let expected = ((3.0 - 5f64.sqrt()) / 2.0).sqrt();
        assert_relative_eq!(
            min_eigen_lower_bound(&chain).unwrap(),
            expected,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            min_eigen_lower_bound(&chain).unwrap(),
            0.618_034,
            max_relative = 1e-6
        );
    }

    #[test]
    fn spanning_tree_chain_and_unpinned() {
        // leader pins agent 0 only; 0 -> 1 -> 2
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let spec = TopologySpec::new(a.clone(), DVector::from_row_slice(&[1.0, 0.0, 0.0])).unwrap();
        assert!(spec.has_leader_spanning_tree());
        let unpinned = TopologySpec::new(a, DVector::zeros(3)).unwrap();
        assert!(!unpinned.has_leader_spanning_tree());
    }

    #[test]
    fn noise_samples_are_deterministic_and_in_unit_interval() {
        for step in 0..1000u64 {
            let u = noise_sample(42, 1, step);
            assert_eq!(u, noise_sample(42, 1, step));
            assert!((0.0..1.0).contains(&u));
        }
        assert_ne!(noise_sample(42, 1, 3), noise_sample(43, 1, 3));
        assert_ne!(noise_sample(42, 1, 3), noise_sample(42, 2, 3));
    }

    #[test]
    fn injector_sequences_are_bit_identical_for_same_seed() {
        let spec = chain_two();
        let entry = FaultEntry::new(
            FaultTarget::Link { from: 0, to: 1 },
            (0.0, 100.0),
            PerturbationSpec::new(0.5, 1.0, NoiseMode::Smoothed, 0.05).unwrap(),
        )
        .unwrap();
        let schedule = FaultSchedule {
            entries: vec![entry],
        };
        let mut a = FaultInjector::new(&spec, schedule.clone(), 9).unwrap();
        let mut b = FaultInjector::new(&spec, schedule, 9).unwrap();
        for step in 0..500u64 {
            let t = step as f64 * 1e-3;
            let wa = a.step_weights(&spec, step, t, 1e-3);
            let wb = b.step_weights(&spec, step, t, 1e-3);
            assert_eq!(wa.adjacency, wb.adjacency);
            assert_eq!(wa.pinning, wb.pinning);
        }
    }

    #[test]
    fn smoothed_noise_rate_is_bounded_by_filter() {
        let spec = chain_two();
        let tau = 0.05;
        let entry = FaultEntry::new(
            FaultTarget::Link { from: 0, to: 1 },
            (0.0, 100.0),
            PerturbationSpec::new(0.5, 1.0, NoiseMode::Smoothed, tau).unwrap(),
        )
        .unwrap();
        let mut inj = FaultInjector::new(
            &spec,
            FaultSchedule {
                entries: vec![entry],
            },
            3,
        )
        .unwrap();
        let dt = 1e-3;
        let mut prev = None;
        for step in 1500..1700u64 {
            // t around pi/2 where sin(t) is about 1
            let t = step as f64 * dt;
            let w = inj.step_weights(&spec, step, t, dt);
            let val = w.adjacency[(1, 0)];
            if let Some(p) = prev {
                let rate = ((val - p) as f64 / dt).abs();
                // filter limits the noise slope to about amplitude/tau plus the
                // carrier slope (about amplitude here)
                assert!(rate <= 0.5 / tau + 1.0, "rate {rate} too steep");
            }
            prev = Some(val);
        }
    }

    /// Independent reachability oracle: Warshall transitive closure over the
    /// leader-augmented graph.
    fn spanning_tree_oracle(spec: &TopologySpec) -> bool {
        let n = spec.n_followers();
        let m = n + 1; // node n is the leader
        let mut reach = vec![vec![false; m]; m];
        for i in 0..m {
            reach[i][i] = true;
        }
        for i in 0..n {
            for j in 0..n {
                if spec.adjacency()[(i, j)] > 0.0 {
                    reach[j][i] = true; // info flows j -> i
                }
            }
            if spec.pinning()[i] > 0.0 {
                reach[n][i] = true;
            }
        }
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    reach[i][j] = reach[i][j] || (reach[i][k] && reach[k][j]);
                }
            }
        }
        (0..n).all(|i| reach[n][i])
    }

    proptest! {
        #[test]
        fn spanning_tree_detection_matches_oracle(
            n in 1usize..=6,
            bits in proptest::collection::vec(any::<bool>(), 42),
        ) {
            let mut it = bits.into_iter();
            let mut a = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    if i != j && it.next().unwrap_or(false) {
                        a[(i, j)] = 1.0;
                    }
                }
            }
            let b = DVector::from_fn(n, |_, _| if it.next().unwrap_or(false) { 1.0 } else { 0.0 });
            let spec = TopologySpec::new(a, b).unwrap();
            prop_assert_eq!(spec.has_leader_spanning_tree(), spanning_tree_oracle(&spec));
        }

        #[test]
        fn laplacian_is_linear_in_weights(
            n in 2usize..=5,
            weights in proptest::collection::vec(0.0f64..4.0, 30),
        ) {
            let mut it = weights.into_iter();
            let a = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { it.next().unwrap_or(0.0) });
            let b = DVector::from_fn(n, |_, _| it.next().unwrap_or(0.0));
            let single = TopologySpec::new(a.clone(), b.clone()).unwrap().laplacian();
            let double = TopologySpec::new(a * 2.0, b * 2.0).unwrap().laplacian();
            prop_assert_eq!(double, single * 2.0);
        }

        #[test]
        fn sign_preserved_for_any_schedule(
            amplitude in 0.0f64..6.0,
            seed in any::<u64>(),
            step in 0u64..5000,
        ) {
            let spec = chain_two();
            let entry = FaultEntry::new(
                FaultTarget::Link { from: 0, to: 1 },
                (0.0, 10.0),
                PerturbationSpec::new(amplitude, 1.0, NoiseMode::Held, 0.0).unwrap(),
            ).unwrap();
            let mut inj = FaultInjector::new(&spec, FaultSchedule { entries: vec![entry] }, seed).unwrap();
            let t = step as f64 * 1e-3;
            let w = inj.step_weights(&spec, step, t, 1e-3);
            prop_assert!(w.adjacency[(1, 0)] > 0.0);
            // untouched weights keep their exact value (zero stays zero)
            prop_assert_eq!(w.adjacency[(0, 1)], 0.0);
            prop_assert_eq!(w.pinning[1], 0.0);
        }
    }
}
