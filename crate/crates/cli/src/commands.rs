use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use bangbang::analysis::{overlap_grid, plan_sweep, run_sweep, CellStatus, SweepOptions};
use bangbang::io::{atomic_write, write_columns, write_matrix, PlotHeader, ProtocolRecord, RunConfig};
use bangbang::optimizer::{adiabatic_baseline, find_tau_critical, ControlProblem, McRng};
use bangbang::pontryagin::{switching_trace, DEFAULT_SAMPLES};
use bangbang::propagator::ControlEigens;
use bangbang::protocol::Control;
use bangbang::JumpProtocol;
use clap::Args;
use rand::SeedableRng;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::ConfigArgs;

/// Result of a command plus the directory an error document should go to.
pub type Outcome = (CliResult, Option<PathBuf>);

const REEVOLUTION_TOLERANCE: f64 = 1e-9;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::internal(format!("{}: {e}", path.display()))
}

fn create_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_toml<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let text = toml::to_string(value).map_err(|e| CliError::internal(format!("serialization failed: {e}")))?;
    Ok(atomic_write(path, text.as_bytes())?)
}

fn control_name(c: Control) -> &'static str {
    match c {
        Control::J => "J",
        Control::K => "K",
    }
}

fn bit(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Step-curve columns `t, J, K` of a protocol.
fn write_protocol(path: &Path, header: &PlotHeader, p: &JumpProtocol) -> CliResult {
    let (mut t, mut j, mut k) = (Vec::new(), Vec::new(), Vec::new());
    for s in p.segments() {
        for x in [s.start, s.end] {
            t.push(x);
            j.push(bit(s.j));
            k.push(bit(s.k));
        }
    }
    Ok(write_columns(path, header, &["t", "J", "K"], &[t, j, k])?)
}

#[derive(Args, Debug)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,

    /// ln r of the initial ground state.
    #[arg(long, allow_negative_numbers = true)]
    pub lnri: f64,

    /// ln r of the target ground state.
    #[arg(long, allow_negative_numbers = true)]
    pub lnrt: f64,

    /// Output directory (default: <output root>/optimize-<hash>-s<seed>-<lnri>_<lnrt>).
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Also write the Pontryagin switching trace of the result.
    #[arg(long)]
    pub verify: bool,

    /// Samples of the switching trace.
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
}

pub fn optimize(a: &OptimizeArgs) -> Outcome {
    let config = match a.cfg.resolve() {
        Ok(c) => c,
        Err(e) => return (Err(e), None),
    };
    let name = format!("optimize-{}-s{}-{}_{}", config.hash(), config.run.seed, a.lnri, a.lnrt);
    let dir = a.cfg.output_dir(&config, &a.out, name);
    let result = create_dir(&dir).and_then(|()| run_optimize(a, &config, &dir));
    (result, Some(dir))
}

fn run_optimize(a: &OptimizeArgs, config: &RunConfig, dir: &Path) -> CliResult {
    let system = config.system.build()?;
    let eigs = Arc::new(ControlEigens::new(&system)?);
    let problem = ControlProblem::on_system(&system, eigs, a.lnri, a.lnrt)?;
    let mut rng = McRng::seed_from_u64(config.run.seed);
    let found = find_tau_critical(&problem, &config.pipeline, &mut rng)?;
    let record = ProtocolRecord::from_search(config, a.lnri, a.lnrt, &found);
    let drift = record.reevolution_error(&problem)?;
    if drift > REEVOLUTION_TOLERANCE {
        return Err(CliError::internal(format!("stored protocol re-evolves to a D_S off by {drift:e}")));
    }
    record.save(&dir.join("record.toml"))?;
    atomic_write(&dir.join("config.toml"), config.to_toml()?.as_bytes())?;

    let header = |title: &str| PlotHeader::new(title, config.hash(), config.run.seed);
    let h = &found.history;
    write_columns(
        &dir.join("history.dat"),
        &header("D_S against total time over the critical-time search").note("tau in units of 1/J"),
        &["probe", "tau", "D_S"],
        &[(0..h.len()).map(|i| i as f64).collect(), h.iter().map(|p| p.tau).collect(), h.iter().map(|p| p.dist_state).collect()],
    )?;
    let protocol = &found.outcome.protocol;
    write_protocol(&dir.join("protocol.dat"), &header("optimal protocol").note("controls are 0 (off) or 1 (on)"), protocol)?;

    let mut log = String::new();
    let _ = writeln!(log, "system: {} (d = {})", config.system.label(), system.dim());
    let _ = writeln!(log, "transfer: ln r_i = {} -> ln r_t = {}, overlap {:.6}", a.lnri, a.lnrt, problem.transfer.overlap());
    for (i, p) in h.iter().enumerate() {
        let _ = writeln!(log, "probe {i:>2} {:<13} tau = {:.10} D_S = {:.10}", format!("{:?}", p.phase), p.tau, p.dist_state);
    }
    let o = &found.outcome;
    let _ = writeln!(log, "tau_critical = {:.10}", found.tau_critical);
    if let Some(t) = found.tau_extrapolated {
        let _ = writeln!(log, "tau_extrapolated = {t:.10}");
    }
    let _ = writeln!(log, "D_S = {:.10} D_E = {:.10} (dbmc {:.10}, cbmc {:.10})", o.dist_state, o.dist_energy, o.dbmc_cost, o.cbmc_cost);
    let pulses = protocol.canonicalize(config.grid.min_pulse_width).protocol.count_pulses();
    let _ = writeln!(log, "jumps = {}, pulses J = {}, K = {}", protocol.jump_count(), pulses.pulses_j, pulses.pulses_k);
    let _ = writeln!(log, "re-evolution error = {drift:e}");
    atomic_write(&dir.join("trace.log"), log.as_bytes())?;

    if a.verify {
        verify_into(dir, &record, &problem, a.samples)?;
    }
    println!("tau_critical = {}", found.tau_critical);
    println!("dist_state = {}", o.dist_state);
    println!("jumps = {}", protocol.jump_count());
    println!("pulses = [{}, {}]", pulses.pulses_j, pulses.pulses_k);
    println!("output = {:?}", dir.display().to_string());
    Ok(())
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,

    /// Grid points per axis.
    #[arg(long)]
    pub points: Option<usize>,

    #[arg(long, allow_negative_numbers = true)]
    pub ln_r_min: Option<f64>,

    #[arg(long, allow_negative_numbers = true)]
    pub ln_r_max: Option<f64>,

    /// Sweep directory (default: <output root>/sweep-<hash>-s<seed>).
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Continue an existing sweep directory.
    #[arg(long)]
    pub resume: bool,

    /// Print the cell count and predicted skips without optimizing.
    #[arg(long)]
    pub dry_run: bool,

    /// Stop after computing this many cells.
    #[arg(long)]
    pub max_cells: Option<usize>,
}

fn sweep_config(a: &SweepArgs) -> CliResult<RunConfig> {
    let mut config = a.cfg.resolve()?;
    if let Some(p) = a.points {
        config.grid.points = p;
        config.grid.axis = None;
    }
    if let Some(x) = a.ln_r_min {
        config.grid.ln_r_min = x;
    }
    if let Some(x) = a.ln_r_max {
        config.grid.ln_r_max = x;
    }
    config.validate()?;
    Ok(config)
}

pub fn sweep(a: &SweepArgs) -> Outcome {
    let config = match sweep_config(a) {
        Ok(c) => c,
        Err(e) => return (Err(e), None),
    };
    let dir = a.cfg.output_dir(&config, &a.out, format!("sweep-{}-s{}", config.hash(), config.run.seed));
    if a.dry_run {
        let result = plan_sweep(&config, Some(&dir)).map_err(CliError::from).map(|plan| {
            println!("cells = {}", plan.cells);
            println!("skipped_estimate = {}", plan.skipped);
            println!("degenerate = {}", plan.failing);
            println!("pending = {}", plan.pending);
            println!("dimension = {}", plan.dim);
        });
        return (result, None);
    }
    let options = SweepOptions { resume: a.resume, max_cells: a.max_cells, threads: config.run.threads };
    let result = run_sweep(&config, &dir, &options).map_err(CliError::from).map(|s| {
        println!("computed = {}", s.computed);
        println!("reused = {}", s.reused);
        println!("quarantined = {}", s.quarantined.len());
        println!("done = {}", s.grid.count(CellStatus::Done));
        println!("skipped = {}", s.grid.count(CellStatus::Skipped));
        println!("failed = {}", s.grid.count(CellStatus::Failed));
        println!("missing = {}", s.grid.missing());
        println!("output = {:?}", dir.display().to_string());
    });
    // The sweep directory belongs to the sweep; error documents go to stderr only.
    (result, None)
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Protocol record written by `optimize`.
    pub record: PathBuf,

    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,

    /// Output directory (default: <output root>/verify-<hash>-s<seed>).
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, env = "BANGBANG_OUTPUT_ROOT", default_value = "runs")]
    pub output_root: PathBuf,
}

#[derive(Serialize)]
struct VerifySummary {
    samples: usize,
    consistency_fraction: f64,
    flat_piece_spread: f64,
    invariant_drift: f64,
    reevolution_error: f64,
    jump_checks: usize,
    jump_checks_passed: usize,
    singular_arcs: Vec<[f64; 2]>,
    singular_controls: Vec<String>,
}

fn verify_into(dir: &Path, record: &ProtocolRecord, problem: &ControlProblem, samples: usize) -> CliResult {
    let protocol = record.jump_protocol()?;
    let t = &problem.transfer;
    let trace = switching_trace(&t.psi_init, &t.psi_target, &protocol, &problem.eigs, samples)?;
    let header = PlotHeader::new("switching functions Im<Pi|O|psi>", &record.meta.config_hash, record.meta.seed)
        .note("a control should be on where its switching value is negative");
    write_columns(
        &dir.join("switching.dat"),
        &header,
        &["t", "switch_J", "switch_K", "J", "K", "consistent"],
        &[
            trace.times.clone(),
            trace.switch_j.clone(),
            trace.switch_k.clone(),
            trace.g_j.iter().map(|&b| bit(b)).collect(),
            trace.g_k.iter().map(|&b| bit(b)).collect(),
            trace.consistent.iter().map(|&b| bit(b)).collect(),
        ],
    )?;
    let summary = VerifySummary {
        samples: trace.len(),
        consistency_fraction: trace.consistency_fraction(),
        flat_piece_spread: trace.flat_piece_spread(&protocol),
        invariant_drift: trace.invariant_drift,
        reevolution_error: record.reevolution_error(problem)?,
        jump_checks: trace.jump_checks.len(),
        jump_checks_passed: trace.jump_checks.iter().filter(|c| c.passed).count(),
        singular_arcs: trace.singular_arcs.iter().map(|s| [s.start, s.end]).collect(),
        singular_controls: trace.singular_arcs.iter().map(|s| control_name(s.control).to_string()).collect(),
    };
    write_toml(&dir.join("verify.toml"), &summary)?;
    println!("consistency_fraction = {}", summary.consistency_fraction);
    println!("flat_piece_spread = {:e}", summary.flat_piece_spread);
    Ok(())
}

fn record_problem(record: &ProtocolRecord) -> CliResult<ControlProblem> {
    let system = record.system.build()?;
    let eigs = Arc::new(ControlEigens::new(&system)?);
    Ok(ControlProblem::on_system(&system, eigs, record.transfer.ln_r_init, record.transfer.ln_r_target)?)
}

pub fn verify(a: &VerifyArgs) -> Outcome {
    let record = match ProtocolRecord::load(&a.record) {
        Ok(r) => r,
        Err(e) => return (Err(e.into()), None),
    };
    let dir = a.out.clone().unwrap_or_else(|| {
        a.output_root.join(format!("verify-{}-s{}", record.meta.config_hash, record.meta.seed))
    });
    let result = create_dir(&dir).and_then(|()| {
        let problem = record_problem(&record)?;
        verify_into(&dir, &record, &problem, a.samples)
    });
    (result, Some(dir))
}

#[derive(Args, Debug)]
pub struct OverlapArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,

    /// Grid points per axis.
    #[arg(long)]
    pub points: Option<usize>,

    /// Output directory (default: <output root>/overlap-<hash>).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn overlap(a: &OverlapArgs) -> Outcome {
    let mut config = match a.cfg.resolve() {
        Ok(c) => c,
        Err(e) => return (Err(e), None),
    };
    if let Some(p) = a.points {
        config.grid.points = p;
        config.grid.axis = None;
    }
    let dir = a.cfg.output_dir(&config, &a.out, format!("overlap-{}", config.hash()));
    let result = create_dir(&dir).and_then(|()| {
        let axis = config.grid.axis_values()?;
        let system = config.system.build()?;
        let grid = overlap_grid(&system, &axis)?;
        let header = PlotHeader::new("ground-state overlap |<psi_t|psi_i>|^2", config.hash(), config.run.seed)
            .note(format!("system: {}", config.system.label()));
        write_matrix(&dir.join("overlap.dat"), &header, ("ln_r_i", &axis), ("ln_r_t", &axis), &grid.values)?;
        for &i in &grid.degenerate {
            eprintln!("degenerate ground state at ln r = {}", axis[i]);
        }
        for &i in &grid.near_degenerate {
            eprintln!("nearly degenerate ground state at ln r = {}", axis[i]);
        }
        println!("points = {}", axis.len());
        println!("degenerate = {}", grid.degenerate.len());
        println!("output = {:?}", dir.display().to_string());
        Ok(())
    });
    (result, Some(dir))
}

#[derive(Args, Debug)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,

    #[arg(long, allow_negative_numbers = true)]
    pub lnri: Option<f64>,

    #[arg(long, allow_negative_numbers = true)]
    pub lnrt: Option<f64>,

    /// Total times, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub tau: Vec<f64>,

    /// Take the system, transfer and total time from a protocol record.
    #[arg(long, conflicts_with_all = ["lnri", "lnrt"])]
    pub record: Option<PathBuf>,

    /// Starting number of ramp steps; doubled until converged.
    #[arg(long, default_value_t = 64)]
    pub steps: usize,

    /// Output directory (default: <output root>/baseline-<hash>-<lnri>_<lnrt>).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn baseline(a: &BaselineArgs) -> Outcome {
    let setup = || -> CliResult<(ControlProblem, Vec<f64>, String, u64, Option<f64>, PathBuf)> {
        if let Some(path) = &a.record {
            let record = ProtocolRecord::load(path)?;
            let taus = if a.tau.is_empty() { vec![record.result.tau] } else { a.tau.clone() };
            let t = record.transfer;
            let dir = a.out.clone().unwrap_or_else(|| {
                a.cfg.output_root.join(format!("baseline-{}-{}_{}", record.meta.config_hash, t.ln_r_init, t.ln_r_target))
            });
            let problem = record_problem(&record)?;
            return Ok((problem, taus, record.meta.config_hash.clone(), record.meta.seed, Some(record.result.dist_state), dir));
        }
        let config = a.cfg.resolve()?;
        let (Some(lnri), Some(lnrt)) = (a.lnri, a.lnrt) else {
            return Err(CliError::usage("baseline needs --lnri and --lnrt, or --record"));
        };
        if a.tau.is_empty() {
            return Err(CliError::usage("baseline needs --tau, or --record"));
        }
        let dir = a.cfg.output_dir(&config, &a.out, format!("baseline-{}-{lnri}_{lnrt}", config.hash()));
        let system = config.system.build()?;
        let eigs = Arc::new(ControlEigens::new(&system)?);
        let problem = ControlProblem::on_system(&system, eigs, lnri, lnrt)?;
        Ok((problem, a.tau.clone(), config.hash(), config.run.seed, None, dir))
    };
    let (problem, taus, hash, seed, optimized, dir) = match setup() {
        Ok(s) => s,
        Err(e) => return (Err(e), None),
    };
    let result = create_dir(&dir).and_then(|()| {
        let (mut ds, mut steps) = (Vec::new(), Vec::new());
        for &tau in &taus {
            let b = adiabatic_baseline(&problem, tau, a.steps)?;
            if !b.converged {
                log::warn!("ramp at tau = {tau} not converged after {} steps", b.steps);
            }
            println!("tau = {tau} adiabatic_dist_state = {}", b.dist_state);
            ds.push(b.dist_state);
            steps.push(b.steps as f64);
        }
        if let Some(d) = optimized {
            println!("optimized_dist_state = {d}");
        }
        let header = PlotHeader::new("linear-ramp D_S against total time", hash, seed).note("tau in units of 1/J");
        write_columns(&dir.join("baseline.dat"), &header, &["tau", "D_S", "steps"], &[taus.clone(), ds, steps])?;
        Ok(())
    });
    (result, Some(dir))
}
