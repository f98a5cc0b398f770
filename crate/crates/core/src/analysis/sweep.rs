//! Resumable grid sweeps over `(ln r_i, ln r_t)`.
//!
//! A sweep directory holds `sweep.toml` (config hash, seed, axis and the fully
//! resolved config) and one `cells/cell_III_JJJ.toml` per finished cell. Cells
//! are computed in a worker pool and written by a single writer, each file
//! atomically, so an interrupted sweep loses at most the cells in flight.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{mpsc, Arc};

use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{CouplingRatio, GroundState, SectorOperator, Transfer, XxzSystem};
use crate::io::{atomic_write, from_table, parse_document, read_text, to_toml, RunConfig, StoredProtocol, FORMAT_VERSION};
use crate::linalg;
use crate::optimizer::{find_tau_critical, ControlProblem, McRng, Probe};
use crate::propagator::ControlEigens;
use crate::protocol::{Control, JumpProtocol};

const META_FILE: &str = "sweep.toml";
const CELL_DIR: &str = "cells";
const QUARANTINE_DIR: &str = "quarantine";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Done,
    /// Initial and target ground states nearly coincide.
    Skipped,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellInfo {
    pub i: usize,
    pub j: usize,
    pub ln_r_init: f64,
    pub ln_r_target: f64,
    pub overlap: Option<f64>,
    pub seed: u64,
    pub config_hash: String,
    pub status: CellStatus,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellResult {
    pub tau_critical: f64,
    pub tau_extrapolated: Option<f64>,
    pub dist_state: f64,
    pub dist_energy: f64,
    /// Pulse counts after removing pulses and gaps below the width floor.
    pub pulses_j: usize,
    pub pulses_k: usize,
    pub on_fraction_j: Option<f64>,
    pub on_fraction_k: Option<f64>,
    /// As optimized, before canonicalization.
    pub protocol: StoredProtocol,
    #[serde(default)]
    pub history: Vec<Probe>,
}

impl CellResult {
    pub fn pulses(&self) -> (usize, usize) {
        (self.pulses_j, self.pulses_k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellRecord {
    pub format_version: u32,
    pub cell: CellInfo,
    pub result: Option<CellResult>,
}

impl CellRecord {
    pub fn to_toml(&self) -> Result<String> {
        to_toml(self)
    }

    pub fn from_toml_str(text: &str, path: &str) -> Result<Self> {
        from_table(parse_document(text, path, &["cell"])?, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&read_text(path)?, &path.display().to_string())
    }

    pub fn is_done(&self) -> bool {
        self.cell.status == CellStatus::Done && self.result.is_some()
    }

    /// The optimized protocol, canonicalized with `min_width`.
    pub fn canonical_protocol(&self, min_width: f64) -> Option<JumpProtocol> {
        let r = self.result.as_ref()?;
        r.protocol.to_protocol().ok().map(|p| p.canonicalize(min_width).protocol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepInfo {
    pub config_hash: String,
    pub seed: u64,
    pub label: String,
    pub axis: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepMeta {
    format_version: u32,
    sweep: SweepInfo,
    config: RunConfig,
}

/// `cells[i][j]` is the transfer from `axis[i]` to `axis[j]`; `None` means not
/// yet computed.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub info: SweepInfo,
    pub config: RunConfig,
    pub cells: Vec<Vec<Option<CellRecord>>>,
    /// Cell files that could not be read or belong to another sweep.
    pub corrupt: Vec<PathBuf>,
}

impl SweepGrid {
    pub fn axis(&self) -> &[f64] {
        &self.info.axis
    }

    pub fn len(&self) -> usize {
        self.info.axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.info.axis.is_empty()
    }

    pub fn cell(&self, i: usize, j: usize) -> Option<&CellRecord> {
        self.cells.get(i)?.get(j)?.as_ref()
    }

    pub fn result(&self, i: usize, j: usize) -> Option<&CellResult> {
        self.cell(i, j).filter(|c| c.is_done())?.result.as_ref()
    }

    pub fn count(&self, status: CellStatus) -> usize {
        self.cells.iter().flatten().flatten().filter(|c| c.cell.status == status).count()
    }

    pub fn missing(&self) -> usize {
        self.cells.iter().flatten().filter(|c| c.is_none()).count()
    }

    fn map<T>(&self, f: impl Fn(&CellRecord) -> Option<T>) -> Vec<Vec<Option<T>>> {
        self.cells.iter().map(|row| row.iter().map(|c| c.as_ref().and_then(&f)).collect()).collect()
    }

    pub fn tau_matrix(&self) -> Vec<Vec<Option<f64>>> {
        self.map(|c| c.result.as_ref().filter(|_| c.is_done()).map(|r| r.tau_critical))
    }

    pub fn tau_extrapolated_matrix(&self) -> Vec<Vec<Option<f64>>> {
        self.map(|c| c.result.as_ref().and_then(|r| r.tau_extrapolated))
    }

    pub fn overlap_matrix(&self) -> Vec<Vec<Option<f64>>> {
        self.map(|c| c.cell.overlap)
    }

    pub fn pulse_labels(&self) -> Vec<Vec<Option<(usize, usize)>>> {
        self.map(|c| c.result.as_ref().filter(|_| c.is_done()).map(CellResult::pulses))
    }

    pub fn pulse_matrix(&self, control: Control) -> Vec<Vec<Option<f64>>> {
        self.map(|c| {
            c.result.as_ref().map(|r| match control {
                Control::J => r.pulses_j as f64,
                Control::K => r.pulses_k as f64,
            })
        })
    }

    pub fn on_fraction_matrix(&self, control: Control) -> Vec<Vec<Option<f64>>> {
        self.map(|c| {
            c.result.as_ref().and_then(|r| match control {
                Control::J => r.on_fraction_j,
                Control::K => r.on_fraction_k,
            })
        })
    }

    /// Canonicalized protocol of a finished cell.
    pub fn protocol(&self, i: usize, j: usize) -> Option<JumpProtocol> {
        self.cell(i, j).filter(|c| c.is_done())?.canonical_protocol(self.config.grid.min_pulse_width)
    }
}

/// 64-bit finalizer of SplitMix64.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent, reproducible seed for cell `(i, j)`. Kept below `2^63` so it
/// fits a TOML integer.
pub fn cell_seed(global: u64, i: usize, j: usize) -> u64 {
    mix(mix(mix(global) ^ i as u64) ^ (j as u64).rotate_left(32)) >> 1
}

pub fn cell_path(dir: &Path, i: usize, j: usize) -> PathBuf {
    dir.join(CELL_DIR).join(format!("cell_{i:03}_{j:03}.toml"))
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Continue an existing sweep directory instead of refusing to touch it.
    pub resume: bool,
    /// Stop after this many newly computed cells.
    pub max_cells: Option<usize>,
    /// Worker count; defaults to the config, then to the available cores.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub computed: usize,
    pub reused: usize,
    pub quarantined: Vec<PathBuf>,
    pub grid: SweepGrid,
}

/// Ground states at every axis value, computed once per sweep.
struct AxisStates {
    axis: Vec<f64>,
    states: Vec<std::result::Result<GroundState, String>>,
    hamiltonians: Vec<SectorOperator>,
}

impl AxisStates {
    fn new(system: &XxzSystem, axis: &[f64]) -> Result<Self> {
        let mut states = Vec::with_capacity(axis.len());
        let mut hamiltonians = Vec::with_capacity(axis.len());
        for &x in axis {
            let h = system.hamiltonian(CouplingRatio::from_ln(x)?);
            states.push(crate::hamiltonian::ground_state_of(&h).map_err(|e| e.to_string()));
            hamiltonians.push(h);
        }
        Ok(AxisStates { axis: axis.to_vec(), states, hamiltonians })
    }

    fn overlap(&self, i: usize, j: usize) -> std::result::Result<f64, String> {
        match (&self.states[i], &self.states[j]) {
            (Ok(a), Ok(b)) => Ok(linalg::overlap(&a.vector, &b.vector)),
            (Err(e), _) => Err(format!("ln r = {}: {e}", self.axis[i])),
            (_, Err(e)) => Err(format!("ln r = {}: {e}", self.axis[j])),
        }
    }

    fn transfer(&self, i: usize, j: usize) -> Result<Transfer> {
        let init = self.states[i].as_ref().map_err(|e| Error::Config(e.clone()))?;
        let target = self.states[j].as_ref().map_err(|e| Error::Config(e.clone()))?;
        let mut t = Transfer::from_states(
            init.vector.clone(),
            target.vector.clone(),
            self.hamiltonians[j].clone(),
            target.energy,
        )?;
        t.r_init = CouplingRatio::from_ln(self.axis[i])?;
        t.r_target = CouplingRatio::from_ln(self.axis[j])?;
        Ok(t)
    }
}

struct CellContext<'a> {
    config: &'a RunConfig,
    hash: String,
    states: AxisStates,
    eigs: Arc<ControlEigens>,
}

impl CellContext<'_> {
    fn info(&self, i: usize, j: usize) -> CellInfo {
        CellInfo {
            i,
            j,
            ln_r_init: self.states.axis[i],
            ln_r_target: self.states.axis[j],
            overlap: None,
            seed: cell_seed(self.config.run.seed, i, j),
            config_hash: self.hash.clone(),
            status: CellStatus::Failed,
            error: None,
        }
    }

    /// Status a cell would get without optimizing it, if that is already known.
    fn presettled(&self, i: usize, j: usize) -> Option<CellRecord> {
        let mut info = self.info(i, j);
        match self.states.overlap(i, j) {
            Err(e) => info.error = Some(e),
            Ok(o) if o > self.config.grid.skip_threshold => {
                info.overlap = Some(o);
                info.status = CellStatus::Skipped;
            }
            Ok(_) => return None,
        }
        Some(CellRecord { format_version: FORMAT_VERSION, cell: info, result: None })
    }

    fn compute(&self, i: usize, j: usize) -> CellRecord {
        if let Some(settled) = self.presettled(i, j) {
            return settled;
        }
        let mut info = self.info(i, j);
        info.overlap = self.states.overlap(i, j).ok();
        let outcome = self
            .states
            .transfer(i, j)
            .and_then(|t| ControlProblem::new(self.eigs.clone(), t))
            .and_then(|p| find_tau_critical(&p, &self.config.pipeline, &mut McRng::seed_from_u64(info.seed)));
        let result = match outcome {
            Ok(found) => {
                let p = &found.outcome.protocol;
                let stats = p.canonicalize(self.config.grid.min_pulse_width).protocol.count_pulses();
                info.status = CellStatus::Done;
                Some(CellResult {
                    tau_critical: found.tau_critical,
                    tau_extrapolated: found.tau_extrapolated,
                    dist_state: found.outcome.dist_state,
                    dist_energy: found.outcome.dist_energy,
                    pulses_j: stats.pulses_j,
                    pulses_k: stats.pulses_k,
                    on_fraction_j: stats.on_fraction_j,
                    on_fraction_k: stats.on_fraction_k,
                    protocol: p.into(),
                    history: found.history,
                })
            }
            Err(e) => {
                info.error = Some(e.to_string());
                None
            }
        };
        CellRecord { format_version: FORMAT_VERSION, cell: info, result }
    }
}

fn read_meta(dir: &Path) -> Result<SweepMeta> {
    let path = dir.join(META_FILE);
    let text = read_text(&path)?;
    let name = path.display().to_string();
    from_table(parse_document(&text, &name, &["sweep", "config"])?, &name)
}

/// Reads every cell file; unreadable or foreign ones are listed as corrupt.
fn read_cells(dir: &Path, info: &SweepInfo) -> (Vec<Vec<Option<CellRecord>>>, Vec<PathBuf>) {
    let n = info.axis.len();
    let mut cells = vec![vec![None; n]; n];
    let mut corrupt = Vec::new();
    let Ok(entries) = fs::read_dir(dir.join(CELL_DIR)) else {
        return (cells, corrupt);
    };
    let mut paths: Vec<PathBuf> = entries.flatten().map(|e| e.path()).collect();
    paths.sort();
    for path in paths {
        let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        if name.starts_with('.') || !name.ends_with(".toml") {
            continue;
        }
        match CellRecord::load(&path) {
            Ok(rec)
                if rec.cell.i < n
                    && rec.cell.j < n
                    && rec.cell.config_hash == info.config_hash
                    && cell_path(dir, rec.cell.i, rec.cell.j) == path
                    && (rec.cell.status != CellStatus::Done || rec.result.is_some()) =>
            {
                let (i, j) = (rec.cell.i, rec.cell.j);
                cells[i][j] = Some(rec);
            }
            Ok(_) => {
                log::warn!("cell {} belongs to another sweep", path.display());
                corrupt.push(path)
            }
            Err(e) => {
                log::warn!("unreadable cell {}: {e}", path.display());
                corrupt.push(path);
            }
        }
    }
    (cells, corrupt)
}

/// Loads a sweep directory without modifying it.
pub fn load_sweep(dir: &Path) -> Result<SweepGrid> {
    let meta = read_meta(dir)?;
    let (cells, corrupt) = read_cells(dir, &meta.sweep);
    Ok(SweepGrid { info: meta.sweep, config: meta.config, cells, corrupt })
}

fn sweep_info(config: &RunConfig) -> Result<SweepInfo> {
    Ok(SweepInfo {
        config_hash: config.hash(),
        seed: config.run.seed,
        label: config.system.label(),
        axis: config.grid.axis_values()?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub cells: usize,
    /// Cells above the skip threshold (including the diagonal).
    pub skipped: usize,
    /// Cells whose ground state is degenerate.
    pub failing: usize,
    /// Cells still to compute, given what already exists in the directory.
    pub pending: usize,
    pub dim: usize,
}

/// Counts cells and predicts skips from ground-state overlaps, without optimizing.
pub fn plan_sweep(config: &RunConfig, dir: Option<&Path>) -> Result<SweepPlan> {
    config.validate()?;
    let system = config.system.build()?;
    let info = sweep_info(config)?;
    let states = AxisStates::new(&system, &info.axis)?;
    let n = info.axis.len();
    let mut plan = SweepPlan { cells: n * n, skipped: 0, failing: 0, pending: n * n, dim: system.dim() };
    for i in 0..n {
        for j in 0..n {
            match states.overlap(i, j) {
                Err(_) => plan.failing += 1,
                Ok(o) if o > config.grid.skip_threshold => plan.skipped += 1,
                Ok(_) => {}
            }
        }
    }
    if let Some(dir) = dir.filter(|d| d.join(META_FILE).exists()) {
        let meta = read_meta(dir)?;
        if meta.sweep.config_hash == info.config_hash && meta.sweep.seed == info.seed {
            let (cells, _) = read_cells(dir, &meta.sweep);
            plan.pending = cells.iter().flatten().filter(|c| c.is_none()).count();
        }
    }
    Ok(plan)
}

fn worker_count(config: &RunConfig, options: &SweepOptions) -> usize {
    options
        .threads
        .or(config.run.threads)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
        .max(1)
}

/// Runs (or continues) a sweep into `dir`. Per-cell failures are recorded in
/// the cell and never abort the sweep.
pub fn run_sweep(config: &RunConfig, dir: &Path, options: &SweepOptions) -> Result<SweepSummary> {
    config.validate()?;
    let info = sweep_info(config)?;
    let meta_path = dir.join(META_FILE);
    let mut quarantined = Vec::new();
    let (mut cells, corrupt) = if meta_path.exists() {
        if !options.resume {
            return Err(Error::Incompatible(format!("{} already holds a sweep; pass resume to continue it", dir.display())));
        }
        let meta = read_meta(dir)?;
        if meta.sweep.config_hash != info.config_hash || meta.sweep.seed != info.seed {
            return Err(Error::Incompatible(format!(
                "sweep in {} has config hash {} and seed {}, not {} and {}",
                dir.display(),
                meta.sweep.config_hash,
                meta.sweep.seed,
                info.config_hash,
                info.seed
            )));
        }
        read_cells(dir, &meta.sweep)
    } else {
        if dir.exists() && fs::read_dir(dir).map_err(|e| Error::io(dir, e))?.next().is_some() {
            return Err(Error::Incompatible(format!("{} is not empty and holds no sweep", dir.display())));
        }
        let meta = SweepMeta { format_version: FORMAT_VERSION, sweep: info.clone(), config: config.clone() };
        atomic_write(&meta_path, to_toml(&meta)?.as_bytes())?;
        let n = info.axis.len();
        (vec![vec![None; n]; n], Vec::new())
    };
    for path in corrupt {
        let name = path.file_name().expect("cell file name");
        let dest = dir.join(QUARANTINE_DIR).join(name);
        fs::create_dir_all(dest.parent().expect("quarantine dir")).map_err(|e| Error::io(&dest, e))?;
        fs::rename(&path, &dest).map_err(|e| Error::io(&path, e))?;
        log::warn!("quarantined {} as {}", path.display(), dest.display());
        quarantined.push(dest);
    }

    let n = info.axis.len();
    let reused = cells.iter().flatten().filter(|c| c.is_some()).count();
    let mut pending: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|&(i, j)| cells[i][j].is_none()).collect();
    if let Some(max) = options.max_cells {
        pending.truncate(max);
    }

    let mut computed = 0;
    if !pending.is_empty() {
        let system = config.system.build()?;
        let ctx = CellContext {
            config,
            hash: info.config_hash.clone(),
            states: AxisStates::new(&system, &info.axis)?,
            eigs: Arc::new(ControlEigens::new(&system)?),
        };
        let threads = worker_count(config, options);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        log::info!("sweep {}: {} cells to compute on {threads} threads (d = {})", info.label, pending.len(), system.dim());
        let total = pending.len();
        let (tx, rx) = mpsc::channel::<CellRecord>();
        let mut write_error = None;
        std::thread::scope(|scope| {
            let ctx = &ctx;
            let pending = &pending;
            let pool = &pool;
            scope.spawn(move || {
                pool.install(|| {
                    pending.par_iter().for_each_with(tx, |tx, &(i, j)| {
                        let _ = tx.send(ctx.compute(i, j));
                    })
                })
            });
            for rec in rx {
                let (i, j) = (rec.cell.i, rec.cell.j);
                let written = rec.to_toml().and_then(|text| atomic_write(&cell_path(dir, i, j), text.as_bytes()));
                match written {
                    Ok(()) => {
                        computed += 1;
                        log::info!("cell ({i}, {j}) {:?} [{computed}/{total}]", rec.cell.status);
                        cells[i][j] = Some(rec);
                    }
                    Err(e) => {
                        log::error!("could not write cell ({i}, {j}): {e}");
                        write_error.get_or_insert(e);
                    }
                }
            }
        });
        if let Some(e) = write_error {
            return Err(e);
        }
    }
    let grid = SweepGrid { info, config: config.clone(), cells, corrupt: Vec::new() };
    Ok(SweepSummary { computed, reused, quarantined, grid })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(points: usize) -> RunConfig {
        let mut c = RunConfig::default();
        c.grid.points = points;
        c.grid.ln_r_min = -1.5;
        c.grid.ln_r_max = 1.5;
        c.pipeline.dbmc_sweeps = 4;
        c.pipeline.cbmc_sweeps = 4;
        c.pipeline.frozen_stages = 2;
        c.pipeline.calibration_samples = 20;
        c.pipeline.epsilon_tol = 0.01;
        c.run.seed = 11;
        c.run.threads = Some(1);
        c
    }

    fn contents(dir: &Path) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = fs::read_dir(dir.join(CELL_DIR))
            .unwrap()
            .flatten()
            .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read_to_string(e.path()).unwrap()))
            .collect();
        out.sort();
        out
    }

    #[test]
    fn seeds_differ_per_cell() {
        let mut seen = std::collections::HashSet::new();
        for i in 0..20 {
            for j in 0..20 {
                assert!(seen.insert(cell_seed(5, i, j)));
            }
        }
        assert_ne!(cell_seed(5, 0, 0), cell_seed(6, 0, 0));
    }

    #[test]
    fn diagonal_only_grid_is_all_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = tiny(1);
        c.grid.axis = Some(vec![0.3]);
        let s = run_sweep(&c, dir.path(), &SweepOptions::default()).unwrap();
        assert_eq!(s.grid.count(CellStatus::Skipped), 1);
        assert_eq!(s.grid.cell(0, 0).unwrap().cell.overlap.map(|o| (o - 1.0).abs() < 1e-12), Some(true));
        assert!(s.grid.tau_matrix()[0][0].is_none());
    }

    #[test]
    fn interrupted_sweep_resumes_to_the_same_grid() {
        let c = tiny(2);
        let full = tempfile::tempdir().unwrap();
        let whole = run_sweep(&c, full.path(), &SweepOptions::default()).unwrap();
        assert_eq!(whole.computed, 4);
        assert_eq!(whole.grid.count(CellStatus::Done), 2);
        assert_eq!(whole.grid.count(CellStatus::Skipped), 2);

        let part = tempfile::tempdir().unwrap();
        let first = run_sweep(&c, part.path(), &SweepOptions { max_cells: Some(2), ..Default::default() }).unwrap();
        assert_eq!(first.computed, 2);
        assert!(run_sweep(&c, part.path(), &SweepOptions::default()).is_err());
        let resumed = run_sweep(&c, part.path(), &SweepOptions { resume: true, ..Default::default() }).unwrap();
        assert_eq!((resumed.computed, resumed.reused), (2, 2));
        assert_eq!(contents(full.path()), contents(part.path()));
        assert_eq!(load_sweep(part.path()).unwrap().cells, whole.grid.cells);

        let again = run_sweep(&c, part.path(), &SweepOptions { resume: true, ..Default::default() }).unwrap();
        assert_eq!(again.computed, 0);
        assert_eq!(contents(full.path()), contents(part.path()));

        let mut other = c.clone();
        other.pipeline.epsilon = 0.03;
        let err = run_sweep(&other, part.path(), &SweepOptions { resume: true, ..Default::default() }).unwrap_err();
        assert!(matches!(err, Error::Incompatible(_)));
    }

    #[test]
    fn corrupt_cells_are_quarantined_and_recomputed() {
        let c = tiny(2);
        let dir = tempfile::tempdir().unwrap();
        run_sweep(&c, dir.path(), &SweepOptions::default()).unwrap();
        let before = contents(dir.path());
        let victim = cell_path(dir.path(), 0, 1);
        let text = fs::read_to_string(&victim).unwrap();
        fs::write(&victim, &text[..text.len() / 2]).unwrap();
        let loaded = load_sweep(dir.path()).unwrap();
        assert_eq!(loaded.corrupt, vec![victim.clone()]);
        assert!(loaded.cell(0, 1).is_none());
        let s = run_sweep(&c, dir.path(), &SweepOptions { resume: true, ..Default::default() }).unwrap();
        assert_eq!(s.computed, 1);
        assert_eq!(s.quarantined.len(), 1);
        assert!(s.quarantined[0].exists());
        assert_eq!(contents(dir.path()), before);
    }

    #[test]
    fn plan_predicts_skips() {
        let plan = plan_sweep(&tiny(3), None).unwrap();
        assert_eq!(plan.cells, 9);
        assert_eq!(plan.skipped, 3);
        assert_eq!(plan.pending, 9);
        assert_eq!(plan.dim, 6);
    }
}
