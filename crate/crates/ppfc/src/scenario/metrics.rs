//! Run metrics: corridor violation counts, steady-state error levels,
//! convergence time, convex-hull containment of the ground vehicles, and
//! saturation statistics.

use super::trace::{Trace, TraceMeta, TraceRecord};
use super::Axis;

/// Length of the window at the end of a run over which steady-state maxima
/// are taken, seconds.
pub const STEADY_WINDOW: f64 = 5.0;

/// Aggregated outcome of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    /// Steps on which an observer disagreement reached its boundary.
    pub observer_violations: u64,
    /// Steps on which a tracking error reached its corridor.
    pub tracking_violations: u64,
    /// Largest observer disagreement over the final window.
    pub steady_max_xi_p: f64,
    /// Largest tracking error over the final window.
    pub steady_max_e_p: f64,
    /// First time after which every observer disagreement stays below the
    /// terminal boundary width; `None` when never reached or not held.
    pub convergence_time: Option<f64>,
    /// Fraction of (step, ground vehicle) pairs inside the aerial convex hull
    /// after the settling horizon.
    pub containment_ratio: f64,
    /// Same, restricted to `t > 2 * horizon`.
    pub containment_ratio_late: f64,
    /// Fraction of controller evaluations with a nonzero saturation deficit.
    pub saturation_duty: f64,
    /// Largest magnitude of the normalized auxiliary signal.
    pub max_abs_x_a: f64,
    /// Transform-domain clamp events (should be zero in a healthy run).
    pub transform_clamps: u64,
    /// Sign-preservation weight clamps (zero for the bundled fault shapes).
    pub weight_clamps: u64,
    pub steps: u64,
}

impl RunMetrics {
    /// A run is accepted when neither corridor was ever violated and the
    /// transforms never needed a domain clamp.
    pub fn accepted(&self) -> bool {
        self.observer_violations == 0 && self.tracking_violations == 0
    }
}

/// Streaming metrics over per-step record slices; one instance per run.
#[derive(Debug, Clone)]
pub struct MetricsAccumulator {
    meta: TraceMeta,
    observer_violations: u64,
    tracking_violations: u64,
    steady_max_xi_p: f64,
    steady_max_e_p: f64,
    last_bad_xi_t: Option<f64>,
    containment_total: u64,
    containment_inside: u64,
    late_total: u64,
    late_inside: u64,
    saturated_rows: u64,
    total_rows: u64,
    max_abs_x_a: f64,
    steps: u64,
    uav_xy: Vec<[f64; 2]>,
    ugv_xy: Vec<[f64; 2]>,
}

impl MetricsAccumulator {
    pub fn new(meta: TraceMeta) -> Self {
        Self {
            meta,
            observer_violations: 0,
            tracking_violations: 0,
            steady_max_xi_p: 0.0,
            steady_max_e_p: 0.0,
            last_bad_xi_t: None,
            containment_total: 0,
            containment_inside: 0,
            late_total: 0,
            late_inside: 0,
            saturated_rows: 0,
            total_rows: 0,
            max_abs_x_a: 0.0,
            steps: 0,
            uav_xy: vec![[0.0; 2]; meta.n_uav],
            ugv_xy: vec![[0.0; 2]; meta.n_ugv],
        }
    }

    /// Updates the clamp counters copied into the final metrics; they are
    /// only known at the end of a run.
    pub fn set_meta_counters(&mut self, transform_clamps: u64, weight_clamps: u64) {
        self.meta.transform_clamps = transform_clamps;
        self.meta.weight_clamps = weight_clamps;
    }

    pub fn push_step(&mut self, rows: &[TraceRecord]) {
        if rows.is_empty() {
            return;
        }
        let t = rows[0].t;
        let steady = t >= self.meta.duration - STEADY_WINDOW;
        for r in rows {
            if r.xi_p.abs() >= r.rho {
                self.observer_violations += 1;
            }
            if r.e_p <= r.bound_lo || r.e_p >= r.bound_hi {
                self.tracking_violations += 1;
            }
            if r.xi_p.abs() >= self.meta.rho_inf {
                self.last_bad_xi_t = Some(t);
            }
            if steady {
                self.steady_max_xi_p = self.steady_max_xi_p.max(r.xi_p.abs());
                self.steady_max_e_p = self.steady_max_e_p.max(r.e_p.abs());
            }
            if r.du != 0.0 {
                self.saturated_rows += 1;
            }
            self.max_abs_x_a = self.max_abs_x_a.max(r.xa.abs());
            self.total_rows += 1;
            let i = r.agent as usize;
            match r.axis {
                Axis::X => {
                    if i <= self.meta.n_uav {
                        self.uav_xy[i - 1][0] = r.xp;
                    } else {
                        self.ugv_xy[i - 1 - self.meta.n_uav][0] = r.xp;
                    }
                }
                Axis::Y => {
                    if i <= self.meta.n_uav {
                        self.uav_xy[i - 1][1] = r.xp;
                    } else {
                        self.ugv_xy[i - 1 - self.meta.n_uav][1] = r.xp;
                    }
                }
                Axis::Z => {}
            }
        }
        if t > self.meta.horizon && !self.ugv_xy.is_empty() {
            let hull = convex_hull(&self.uav_xy);
            let late = t > 2.0 * self.meta.horizon;
            for p in &self.ugv_xy {
                let inside = point_in_convex_polygon(&hull, *p);
                self.containment_total += 1;
                self.containment_inside += u64::from(inside);
                if late {
                    self.late_total += 1;
                    self.late_inside += u64::from(inside);
                }
            }
        }
        self.steps += 1;
    }

    pub fn finish(self) -> RunMetrics {
        let dt = self.meta.dt;
        let end = self.steps as f64 * dt;
        let convergence_time = match self.last_bad_xi_t {
            None => Some(0.0),
            Some(t_bad) if t_bad + dt < end - 1e-12 => Some(t_bad + dt),
            Some(_) => None,
        };
        let ratio = |inside: u64, total: u64| {
            if total == 0 {
                1.0
            } else {
                inside as f64 / total as f64
            }
        };
        RunMetrics {
            observer_violations: self.observer_violations,
            tracking_violations: self.tracking_violations,
            steady_max_xi_p: self.steady_max_xi_p,
            steady_max_e_p: self.steady_max_e_p,
            convergence_time,
            containment_ratio: ratio(self.containment_inside, self.containment_total),
            containment_ratio_late: ratio(self.late_inside, self.late_total),
            saturation_duty: if self.total_rows == 0 {
                0.0
            } else {
                self.saturated_rows as f64 / self.total_rows as f64
            },
            max_abs_x_a: self.max_abs_x_a,
            transform_clamps: self.meta.transform_clamps,
            weight_clamps: self.meta.weight_clamps,
            steps: self.steps,
        }
    }
}

/// Metrics of a completed trace.
pub fn metrics(trace: &Trace) -> RunMetrics {
    let mut acc = MetricsAccumulator::new(trace.meta);
    for step in trace.steps() {
        acc.push_step(step);
    }
    acc.finish()
}

/// Convex hull (counterclockwise, no duplicate endpoint) via the monotone
/// chain; degenerate inputs (fewer than 3 distinct points) return what they
/// can.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev() {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
        {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Point-in-convex-polygon test with the boundary counted as inside.
pub fn point_in_convex_polygon(hull: &[[f64; 2]], p: [f64; 2]) -> bool {
    if hull.len() < 3 {
        return false;
    }
    for i in 0..hull.len() {
        let a = hull[i];
        let b = hull[(i + 1) % hull.len()];
        let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        if cross < -1e-12 {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hull_of_square_contains_center_not_outside() {
        let square = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let hull = convex_hull(&square);
        assert_eq!(hull.len(), 4);
        assert!(point_in_convex_polygon(&hull, [0.5, 0.5]));
        assert!(point_in_convex_polygon(&hull, [0.0, 0.5])); // boundary inclusive
        assert!(!point_in_convex_polygon(&hull, [1.5, 0.5]));
    }

    #[test]
    fn hull_ignores_interior_points() {
        let pts = [[0.0, 0.0], [2.0, 0.0], [1.0, 2.0], [1.0, 0.5]];
        let hull = convex_hull(&pts);
        assert_eq!(hull.len(), 3);
    }

    #[test]
    fn pentagon_ring_contains_inner_ring() {
        // radius-3 pentagon vs radius-2 points: the inradius is 3 cos(36 deg),
        // about 2.43, so every radius-2 point is inside.
        let hull: Vec<[f64; 2]> = (0..5)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / 5.0;
                [3.0 * a.cos(), 3.0 * a.sin()]
            })
            .collect();
        let hull = convex_hull(&hull);
        for k in 0..100 {
            let a = std::f64::consts::TAU * k as f64 / 100.0;
            assert!(point_in_convex_polygon(
                &hull,
                [2.0 * a.cos(), 2.0 * a.sin()]
            ));
        }
        // edge midpoints sit at the inradius (about 2.43): radius-2.5 points
        // in those directions fall outside
        for k in 0..5 {
            let a = std::f64::consts::TAU * (k as f64 + 0.5) / 5.0;
            assert!(!point_in_convex_polygon(
                &hull,
                [2.5 * a.cos(), 2.5 * a.sin()]
            ));
        }
    }

    fn meta(n_uav: usize, n_ugv: usize) -> TraceMeta {
        TraceMeta {
            dt: 0.1,
            duration: 1.0,
            seed: 0,
            horizon: 0.2,
            rho_inf: 0.1,
            n_uav,
            n_ugv,
            downsample: 1,
            leader_t0: 0.0,
            leader_altitude: 0.0,
            transform_clamps: 0,
            weight_clamps: 0,
        }
    }

    fn record(t: f64, agent: u16, axis: Axis) -> TraceRecord {
        TraceRecord {
            t,
            agent,
            axis,
            xp: 0.0,
            xv: 0.0,
            zeta_p: 0.0,
            zeta_v: 0.0,
            xi_p: 0.0,
            xi_v: 0.0,
            rho: 0.1,
            e_p: 0.0,
            e_v: 0.0,
            bound_lo: -0.3,
            bound_hi: 0.3,
            eps: 0.0,
            s: 0.0,
            v: 0.0,
            u: 0.0,
            du: 0.0,
            xa: 0.0,
            fault_active: false,
        }
    }

    #[test]
    fn clean_trace_has_zero_violations() {
        let meta = meta(1, 0);
        let mut records = Vec::new();
        for k in 0..10 {
            for axis in Axis::ALL {
                let mut r = record(k as f64 * 0.1, 1, axis);
                r.xi_p = 0.01;
                records.push(r);
            }
        }
        let m = metrics(&Trace { meta, records });
        assert_eq!(m.observer_violations, 0);
        assert_eq!(m.tracking_violations, 0);
        assert_eq!(m.convergence_time, Some(0.0));
        assert_eq!(m.steps, 10);
    }

    #[test]
    fn planted_violation_is_counted_once() {
        let meta = meta(1, 0);
        let mut records = Vec::new();
        for k in 0..10 {
            for axis in Axis::ALL {
                let mut r = record(k as f64 * 0.1, 1, axis);
                if k == 4 && axis == Axis::Y {
                    r.xi_p = 0.2; // exceeds rho = 0.1
                    r.e_p = 0.31; // exceeds bound_hi = 0.3
                }
                records.push(r);
            }
        }
        let m = metrics(&Trace { meta, records });
        assert_eq!(m.observer_violations, 1);
        assert_eq!(m.tracking_violations, 1);
        // last disagreement above rho_inf at t = 0.4: converged from 0.5 on
        assert_relative_eq!(m.convergence_time.unwrap(), 0.5, max_relative = 1e-12);
    }

    #[test]
    fn convergence_not_held_when_bad_at_end() {
        let meta = meta(1, 0);
        let mut records = Vec::new();
        for k in 0..10 {
            for axis in Axis::ALL {
                let mut r = record(k as f64 * 0.1, 1, axis);
                if k == 9 {
                    r.xi_p = 0.5;
                }
                records.push(r);
            }
        }
        let m = metrics(&Trace { meta, records });
        assert_eq!(m.convergence_time, None);
    }

    #[test]
    fn saturation_duty_counts_rows() {
        let meta = meta(1, 0);
        let mut records = Vec::new();
        for k in 0..10 {
            for axis in Axis::ALL {
                let mut r = record(k as f64 * 0.1, 1, axis);
                if axis == Axis::X {
                    r.du = -0.5;
                }
                records.push(r);
            }
        }
        let m = metrics(&Trace { meta, records });
        assert_relative_eq!(m.saturation_duty, 1.0 / 3.0, max_relative = 1e-12);
    }
}
