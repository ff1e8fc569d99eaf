//! Simulation trace: one record per agent, axis and step, CSV export with
//! full round-trip precision, and per-figure plot-data extraction.

use super::{Axis, ScenarioError};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Fixed CSV schema; the exporter writes exactly this header.
pub const CSV_HEADER: &str =
    "t,agent,axis,xp,xv,zeta_p,zeta_v,xi_p,xi_v,rho,e_p,e_v,bound_lo,bound_hi,eps,s,v,u,du,xa,fault_active";

/// Run-level constants a trace carries alongside its records.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceMeta {
    pub dt: f64,
    pub duration: f64,
    pub seed: u64,
    /// Settling horizon of the performance boundaries.
    pub horizon: f64,
    /// Terminal observer boundary width.
    pub rho_inf: f64,
    pub n_uav: usize,
    pub n_ugv: usize,
    /// Plot-data stride in steps.
    pub downsample: usize,
    /// Leader climb-phase length and cruise altitude, for plot-data export.
    pub leader_t0: f64,
    pub leader_altitude: f64,
    /// Transform-domain clamp events over the whole run.
    pub transform_clamps: u64,
    /// Sign-preservation weight clamp events over the whole run.
    pub weight_clamps: u64,
}

impl TraceMeta {
    pub fn rows_per_step(&self) -> usize {
        self.n_uav * 3 + self.n_ugv * 2
    }
}

/// Full observable state of one agent on one axis at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    /// 1-based agent id.
    pub agent: u16,
    pub axis: Axis,
    /// Plant position and velocity.
    pub xp: f64,
    pub xv: f64,
    /// Leader estimate.
    pub zeta_p: f64,
    pub zeta_v: f64,
    /// Observer neighborhood disagreement.
    pub xi_p: f64,
    pub xi_v: f64,
    /// Observer boundary value at `t`.
    pub rho: f64,
    /// Tracking error against the formation-shifted leader.
    pub e_p: f64,
    pub e_v: f64,
    /// Tracking corridor bounds on `e_p`.
    pub bound_lo: f64,
    pub bound_hi: f64,
    /// Transformed tracking error.
    pub eps: f64,
    /// Sliding value.
    pub s: f64,
    /// Commanded and saturated accelerations, and the deficit.
    pub v: f64,
    pub u: f64,
    pub du: f64,
    /// Normalized auxiliary signal.
    pub xa: f64,
    /// True when any fault window is active this step.
    pub fault_active: bool,
}

/// A complete run: records in step order (agents ascending, axes x, y, z
/// within a step) plus the run constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub meta: TraceMeta,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    /// Iterates over per-step slices of records.
    pub fn steps(&self) -> impl Iterator<Item = &[TraceRecord]> {
        self.records.chunks(self.meta.rows_per_step())
    }
}

/// Writes the fixed-schema CSV. Floats are printed in shortest round-trip
/// form, so re-parsing reproduces them bit-exactly.
pub fn write_csv<W: Write>(trace: &Trace, mut w: W) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in &trace.records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.t,
            r.agent,
            r.axis,
            r.xp,
            r.xv,
            r.zeta_p,
            r.zeta_v,
            r.xi_p,
            r.xi_v,
            r.rho,
            r.e_p,
            r.e_v,
            r.bound_lo,
            r.bound_hi,
            r.eps,
            r.s,
            r.v,
            r.u,
            r.du,
            r.xa,
            u8::from(r.fault_active),
        )?;
    }
    Ok(())
}

pub fn export_csv(trace: &Trace, path: impl AsRef<Path>) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_csv(trace, &mut w)?;
    w.flush()
}

/// Parses a CSV written by [`export_csv`] back into a trace. The run-level
/// constants are not stored in the CSV and must be supplied.
pub fn read_csv(path: impl AsRef<Path>, meta: TraceMeta) -> Result<Trace, ScenarioError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|e| ScenarioError::Trace(e.to_string()))?
        .unwrap_or_default();
    if header != CSV_HEADER {
        return Err(ScenarioError::Trace(format!("unexpected header: {header}")));
    }
    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| ScenarioError::Trace(e.to_string()))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 21 {
            return Err(ScenarioError::Trace(format!(
                "line {}: expected 21 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let f = |i: usize| -> Result<f64, ScenarioError> {
            fields[i]
                .parse()
                .map_err(|e| ScenarioError::Trace(format!("line {}: {e}", lineno + 2)))
        };
        records.push(TraceRecord {
            t: f(0)?,
            agent: fields[1]
                .parse()
                .map_err(|e| ScenarioError::Trace(format!("line {}: {e}", lineno + 2)))?,
            axis: Axis::parse(fields[2])
                .ok_or_else(|| ScenarioError::Trace(format!("line {}: bad axis", lineno + 2)))?,
            xp: f(3)?,
            xv: f(4)?,
            zeta_p: f(5)?,
            zeta_v: f(6)?,
            xi_p: f(7)?,
            xi_v: f(8)?,
            rho: f(9)?,
            e_p: f(10)?,
            e_v: f(11)?,
            bound_lo: f(12)?,
            bound_hi: f(13)?,
            eps: f(14)?,
            s: f(15)?,
            v: f(16)?,
            u: f(17)?,
            du: f(18)?,
            xa: f(19)?,
            fault_active: fields[20] == "1",
        });
    }
    Ok(Trace { meta, records })
}

/// Writes per-figure series files under `dir`:
///
/// - `trajectories.csv`: downsampled `t,agent,kind,x,y,z` for every agent
///   (ground vehicles report `z = 0`).
/// - `snapshot_t<k>.csv`: agent positions at each whole multiple of 10 s
///   inside the run, plus the final logged step; taken at the nearest step.
/// - `observer_envelope.csv`: downsampled `t,agent,axis,xi_p,rho`.
/// - `tracking_envelope.csv`: downsampled `t,agent,axis,e_p,bound_lo,bound_hi`.
pub fn export_plotdata(trace: &Trace, dir: impl AsRef<Path>) -> io::Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let stride = trace.meta.downsample.max(1);
    let rows = trace.meta.rows_per_step();
    if rows == 0 || trace.records.is_empty() {
        return Ok(());
    }

    let mut traj = BufWriter::new(File::create(dir.join("trajectories.csv"))?);
    writeln!(traj, "t,agent,kind,x,y,z")?;
    let mut obs = BufWriter::new(File::create(dir.join("observer_envelope.csv"))?);
    writeln!(obs, "t,agent,axis,xi_p,rho")?;
    let mut trk = BufWriter::new(File::create(dir.join("tracking_envelope.csv"))?);
    writeln!(trk, "t,agent,axis,e_p,bound_lo,bound_hi")?;

    for (k, step) in trace.steps().enumerate() {
        if k % stride != 0 {
            continue;
        }
        write_positions_row(&mut traj, trace, step)?;
        for r in step {
            writeln!(obs, "{},{},{},{},{}", r.t, r.agent, r.axis, r.xi_p, r.rho)?;
            writeln!(
                trk,
                "{},{},{},{},{},{}",
                r.t, r.agent, r.axis, r.e_p, r.bound_lo, r.bound_hi
            )?;
        }
    }
    traj.flush()?;
    obs.flush()?;
    trk.flush()?;

    // snapshots at every whole multiple of 10 s, plus the final step
    let n_steps = trace.records.len() / rows;
    let mut snapshot_steps: Vec<(String, usize)> = Vec::new();
    let mut mark = 10.0;
    while mark <= trace.meta.duration + 1e-9 {
        let idx = ((mark / trace.meta.dt).round() as usize).min(n_steps - 1);
        snapshot_steps.push((format!("{}", mark.round() as i64), idx));
        mark += 10.0;
    }
    let last_label = format!("{}", trace.meta.duration.round() as i64);
    if !snapshot_steps.iter().any(|(l, _)| *l == last_label) {
        snapshot_steps.push((last_label, n_steps - 1));
    }
    for (label, idx) in snapshot_steps {
        let step = &trace.records[idx * rows..(idx + 1) * rows];
        let mut w = BufWriter::new(File::create(dir.join(format!("snapshot_t{label}.csv")))?);
        writeln!(w, "t,agent,kind,x,y,z")?;
        write_positions_row(&mut w, trace, step)?;
        w.flush()?;
    }
    Ok(())
}

fn write_positions_row<W: Write>(w: &mut W, trace: &Trace, step: &[TraceRecord]) -> io::Result<()> {
    let t = step[0].t;
    let leader = crate::dynamics::LeaderTrajectory {
        t0: trace.meta.leader_t0,
        altitude: trace.meta.leader_altitude,
    }
    .state(t);
    writeln!(
        w,
        "{t},0,leader,{},{},{}",
        leader.pos[0], leader.pos[1], leader.pos[2]
    )?;
    let n = trace.meta.n_uav + trace.meta.n_ugv;
    for agent in 1..=n as u16 {
        let x = step
            .iter()
            .find(|r| r.agent == agent && r.axis == Axis::X)
            .map_or(0.0, |r| r.xp);
        let y = step
            .iter()
            .find(|r| r.agent == agent && r.axis == Axis::Y)
            .map_or(0.0, |r| r.xp);
        let z = step
            .iter()
            .find(|r| r.agent == agent && r.axis == Axis::Z)
            .map_or(0.0, |r| r.xp);
        let kind = if (agent as usize) <= trace.meta.n_uav {
            "uav"
        } else {
            "ugv"
        };
        writeln!(w, "{t},{agent},{kind},{x},{y},{z}")?;
    }
    Ok(())
}
