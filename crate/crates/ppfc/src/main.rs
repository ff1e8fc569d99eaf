//! Command-line front end: run scenarios, validate configs, emit the bundled
//! reference scenario, and sweep fault seeds.

use clap::{Args, Parser, Subcommand, ValueEnum};
use ppfc::scenario::{
    self, export_csv, export_plotdata, load_config, paper_scenario_toml, run, run_metrics_only,
    Fidelity, RunMetrics, ScenarioConfig, ScenarioError,
};
use rayon::prelude::*;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "ppfc",
    version,
    about = "Fault-tolerant prescribed-performance formation control simulator"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and export the trace CSV and plot data.
    Run(RunArgs),
    /// Check a scenario file and report every validation issue.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Emit the bundled reference scenario (stdout or --out FILE).
    PaperScenario {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo sweep over fault seeds, parallel across seeds.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FidelityArg {
    Simplified,
    Full,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (defaults to the config's, then "out").
    #[arg(long, env = "PPFC_OUT_DIR")]
    out: Option<PathBuf>,
    #[arg(long, env = "PPFC_SEED")]
    seed: Option<u64>,
    /// Override the simulated duration, seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Override the integrator step, seconds.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, value_enum)]
    fidelity: Option<FidelityArg>,
    /// Suppress the metrics summary.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Seed range "A..B" (end exclusive), e.g. 0..50.
    #[arg(long)]
    seeds: String,
    #[arg(long)]
    quiet: bool,
}

fn apply_overrides(cfg: &mut ScenarioConfig, args: &RunArgs) {
    if let Some(seed) = args.seed {
        cfg.sim.seed = seed;
    }
    if let Some(duration) = args.duration {
        cfg.sim.duration = duration;
    }
    if let Some(dt) = args.dt {
        cfg.sim.dt = dt;
    }
    if let Some(f) = args.fidelity {
        cfg.sim.fidelity = match f {
            FidelityArg::Simplified => Fidelity::Simplified,
            FidelityArg::Full => Fidelity::Full,
        };
    }
}

fn print_metrics(m: &RunMetrics) {
    println!("steps                     {}", m.steps);
    println!("observer violations       {}", m.observer_violations);
    println!("tracking violations       {}", m.tracking_violations);
    println!("steady max |xi_p|         {:.6}", m.steady_max_xi_p);
    println!("steady max |e_p|          {:.6}", m.steady_max_e_p);
    match m.convergence_time {
        Some(t) => println!("convergence time          {t:.3} s"),
        None => println!("convergence time          not reached"),
    }
    println!("containment ratio (t>T)   {:.4}", m.containment_ratio);
    println!("containment ratio (t>2T)  {:.4}", m.containment_ratio_late);
    println!("saturation duty           {:.5}", m.saturation_duty);
    println!("max |x_a|                 {:.5}", m.max_abs_x_a);
    println!("transform clamps          {}", m.transform_clamps);
    println!("weight clamps             {}", m.weight_clamps);
}

fn cmd_run(args: RunArgs) -> Result<bool, ScenarioError> {
    let mut cfg = load_config(&args.config)?;
    apply_overrides(&mut cfg, &args);
    let cfg = cfg.validated()?;
    let out_dir = args
        .out
        .clone()
        .or_else(|| cfg.output.dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let started = std::time::Instant::now();
    let output = run(&cfg)?;
    let elapsed = started.elapsed();
    std::fs::create_dir_all(&out_dir).map_err(|source| ScenarioError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    let csv_path = out_dir.join("trace.csv");
    export_csv(&output.trace, &csv_path).map_err(|source| ScenarioError::Io {
        path: csv_path.display().to_string(),
        source,
    })?;
    let plot_dir = out_dir.join("plotdata");
    export_plotdata(&output.trace, &plot_dir).map_err(|source| ScenarioError::Io {
        path: plot_dir.display().to_string(),
        source,
    })?;
    if !args.quiet {
        println!(
            "simulated {:.1} s in {:.2} s wall time (seed {})",
            cfg.sim.duration,
            elapsed.as_secs_f64(),
            cfg.sim.seed
        );
        print_metrics(&output.metrics);
        println!("trace   -> {}", csv_path.display());
        println!("plots   -> {}", plot_dir.display());
    }
    let ok = output.metrics.accepted();
    if !ok {
        eprintln!(
            "FAIL: {} observer / {} tracking corridor violations",
            output.metrics.observer_violations, output.metrics.tracking_violations
        );
    }
    Ok(ok)
}

fn parse_seed_range(s: &str) -> Result<std::ops::Range<u64>, String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected A..B, got {s}"))?;
    let start: u64 = a.trim().parse().map_err(|e| format!("bad start: {e}"))?;
    let end: u64 = b.trim().parse().map_err(|e| format!("bad end: {e}"))?;
    if end <= start {
        return Err(format!("empty seed range {s}"));
    }
    Ok(start..end)
}

fn cmd_sweep(args: SweepArgs) -> Result<bool, ScenarioError> {
    let cfg = load_config(&args.config)?;
    let seeds = parse_seed_range(&args.seeds).map_err(|message| ScenarioError::Parse {
        path: "--seeds".into(),
        message,
    })?;
    let results: Vec<(u64, Result<RunMetrics, String>)> = seeds
        .clone()
        .collect::<Vec<u64>>()
        .par_iter()
        .map(|&seed| {
            let mut c = cfg.clone();
            c.sim.seed = seed;
            (seed, run_metrics_only(&c).map_err(|e| e.to_string()))
        })
        .collect();
    let mut all_ok = true;
    let mut worst_xi = 0.0f64;
    let mut worst_ep = 0.0f64;
    for (seed, res) in &results {
        match res {
            Ok(m) => {
                let ok = m.accepted() && m.transform_clamps == 0;
                all_ok &= ok;
                worst_xi = worst_xi.max(m.steady_max_xi_p);
                worst_ep = worst_ep.max(m.steady_max_e_p);
                if !args.quiet {
                    println!(
                        "seed {seed:>4}  obs_viol {:>3}  trk_viol {:>3}  steady xi {:.4}  steady e {:.4}  clamps {}  {}",
                        m.observer_violations,
                        m.tracking_violations,
                        m.steady_max_xi_p,
                        m.steady_max_e_p,
                        m.transform_clamps,
                        if ok { "ok" } else { "FAIL" }
                    );
                }
            }
            Err(e) => {
                all_ok = false;
                eprintln!("seed {seed}: error: {e}");
            }
        }
    }
    println!(
        "sweep over {} seeds: {}  (worst steady xi {:.4}, worst steady e {:.4})",
        results.len(),
        if all_ok { "all ok" } else { "FAILURES" },
        worst_xi,
        worst_ep
    );
    Ok(all_ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Validate { config } => match load_config(&config) {
            Ok(_) => {
                println!("{}: ok", config.display());
                Ok(true)
            }
            Err(e) => Err(e),
        },
        Cmd::PaperScenario { out } => match out {
            Some(path) => match std::fs::write(&path, paper_scenario_toml()) {
                Ok(()) => {
                    println!("wrote {}", path.display());
                    Ok(true)
                }
                Err(source) => Err(scenario::ScenarioError::Io {
                    path: path.display().to_string(),
                    source,
                }),
            },
            None => {
                print!("{}", paper_scenario_toml());
                Ok(true)
            }
        },
        Cmd::Sweep(args) => cmd_sweep(args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
