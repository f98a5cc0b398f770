use std::path::{Path, PathBuf};

use bangbang::analysis::{
    correlation_map, detect_phases, diagonal_symmetry, fit_bifurcation, load_sweep, pulse_width_cross_section,
    row_spearman, tau_ratio, Matrix, SweepGrid, MIN_FIT_POINTS,
};
use bangbang::io::{write_columns, write_matrix, PlotHeader};
use bangbang::protocol::Control;
use bangbang::Error;
use clap::Args;
use serde::Serialize;

use crate::commands::Outcome;
use crate::error::{CliError, CliResult};

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Sweep directory written by `sweep`. It is only read.
    pub sweep: PathBuf,

    /// Reference cell `i,j` of the correlation maps (default: first finished cell).
    #[arg(long, value_parser = parse_cell)]
    pub reference: Option<(usize, usize)>,

    /// Second sweep on the same axes for the critical-time ratio.
    #[arg(long)]
    pub compare: Option<PathBuf>,

    /// Relative tolerance of the diagonal-symmetry check.
    #[arg(long, default_value_t = 0.1)]
    pub symmetry_tolerance: f64,

    /// Output directory (default: <output root>/analysis-<hash>-s<seed>).
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, env = "BANGBANG_OUTPUT_ROOT", default_value = "runs")]
    pub output_root: PathBuf,
}

fn parse_cell(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected i,j, got {s}"))?;
    let p = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("{x}: {e}"));
    Ok((p(a)?, p(b)?))
}

#[derive(Serialize)]
struct RegionDoc {
    id: usize,
    pulses_j: usize,
    pulses_k: usize,
    cells: Vec<[usize; 2]>,
}

#[derive(Serialize)]
struct BoundaryDoc {
    a: [usize; 2],
    b: [usize; 2],
    layered: bool,
}

#[derive(Serialize)]
struct PhasesDoc {
    config_hash: String,
    seed: u64,
    layered: bool,
    region: Vec<RegionDoc>,
    boundary: Vec<BoundaryDoc>,
}

#[derive(Serialize)]
struct FitDoc {
    row: usize,
    ln_r_init: f64,
    control: &'static str,
    points: usize,
    data_range: f64,
    alpha: f64,
    r0: f64,
    c: f64,
    residual_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct FitsDoc {
    config_hash: String,
    seed: u64,
    model: &'static str,
    fit: Vec<FitDoc>,
}

#[derive(Serialize)]
struct SummaryDoc {
    config_hash: String,
    seed: u64,
    label: String,
    cells: usize,
    done: usize,
    skipped: usize,
    failed: usize,
    missing: usize,
    symmetry_pairs: usize,
    symmetry_within: usize,
    symmetry_fraction: f64,
    /// Per row; nan where undefined.
    row_spearman_tau_overlap: Vec<f64>,
    reference: [usize; 2],
}

#[derive(Serialize)]
struct RatioDoc {
    config_hash_a: String,
    config_hash_b: String,
    mean_a: f64,
    std_a: f64,
    mean_b: f64,
    std_b: f64,
    negative_quadrant_a_longer: f64,
}

fn write_toml<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let text = toml::to_string(value).map_err(|e| CliError::internal(format!("serialization failed: {e}")))?;
    Ok(bangbang::io::atomic_write(path, text.as_bytes())?)
}

fn name(c: Control) -> &'static str {
    match c {
        Control::J => "J",
        Control::K => "K",
    }
}

pub fn analyze(a: &AnalyzeArgs) -> Outcome {
    let grid = match load_sweep(&a.sweep) {
        Ok(g) => g,
        Err(e) => return (Err(e.into()), None),
    };
    if grid.count(bangbang::analysis::CellStatus::Done) == 0 {
        let msg = format!("sweep in {} has no finished cells to analyze", a.sweep.display());
        return (Err(CliError::incompatible(msg)), None);
    }
    let dir = a.out.clone().unwrap_or_else(|| {
        a.output_root.join(format!("analysis-{}-s{}", grid.info.config_hash, grid.info.seed))
    });
    if dir.canonicalize().ok().is_some_and(|d| a.sweep.canonicalize().is_ok_and(|s| d.starts_with(s))) {
        return (Err(CliError::usage("the analysis output may not lie inside the sweep directory")), None);
    }
    let result = std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::internal(format!("{}: {e}", dir.display())))
        .and_then(|()| run_analysis(a, &grid, &dir));
    (result, Some(dir))
}

fn run_analysis(a: &AnalyzeArgs, grid: &SweepGrid, dir: &Path) -> CliResult {
    let hash = grid.info.config_hash.clone();
    let seed = grid.info.seed;
    let axis = grid.axis().to_vec();
    let header = |title: &str| {
        PlotHeader::new(title, hash.clone(), seed)
            .note(format!("system: {}", grid.info.label))
            .note("rows: ln r_i (initial), columns: ln r_t (target)")
    };
    let matrix = |file: &str, title: &str, m: &Matrix| -> CliResult {
        Ok(write_matrix(&dir.join(file), &header(title), ("ln_r_i", &axis), ("ln_r_t", &axis), m)?)
    };

    let tau = grid.tau_matrix();
    let overlap = grid.overlap_matrix();
    matrix("tau_critical.dat", "critical time (units of 1/J)", &tau)?;
    matrix("tau_extrapolated.dat", "extrapolated time at D_S = 0 (units of 1/J)", &grid.tau_extrapolated_matrix())?;
    matrix("overlap.dat", "ground-state overlap |<psi_t|psi_i>|^2", &overlap)?;
    for c in Control::BOTH {
        matrix(&format!("pulses_{}.dat", name(c)), &format!("pulse count P_{}", name(c)), &grid.pulse_matrix(c))?;
        matrix(
            &format!("on_fraction_{}.dat", name(c)),
            &format!("characteristic on-time t_on/(P tau) of {}", name(c)),
            &grid.on_fraction_matrix(c),
        )?;
    }

    let labels = grid.pulse_labels();
    let phases = detect_phases(&labels);
    let region_matrix: Matrix =
        phases.region.iter().map(|row| row.iter().map(|r| r.map(|x| x as f64)).collect()).collect();
    matrix("phase_regions.dat", "phase region index (see phases.toml)", &region_matrix)?;
    write_toml(
        &dir.join("phases.toml"),
        &PhasesDoc {
            config_hash: hash.clone(),
            seed,
            layered: phases.is_layered(),
            region: phases
                .regions
                .iter()
                .enumerate()
                .map(|(id, r)| RegionDoc {
                    id,
                    pulses_j: r.label.0,
                    pulses_k: r.label.1,
                    cells: r.cells.iter().map(|&(i, j)| [i, j]).collect(),
                })
                .collect(),
            boundary: phases
                .boundaries
                .iter()
                .map(|b| BoundaryDoc { a: [b.a.0, b.a.1], b: [b.b.0, b.b.1], layered: b.is_layered() })
                .collect(),
        },
    )?;

    let reference = match a.reference {
        Some(r) => r,
        None => (0..grid.len())
            .flat_map(|i| (0..grid.len()).map(move |j| (i, j)))
            .find(|&(i, j)| grid.result(i, j).is_some())
            .expect("at least one finished cell"),
    };
    for c in Control::BOTH {
        let map = correlation_map(grid, reference, c)?;
        let cm: Matrix = map.iter().map(|row| row.iter().map(|r| r.map(|x| x.modified)).collect()).collect();
        let raw: Matrix = map.iter().map(|row| row.iter().map(|r| r.map(|x| x.c)).collect()).collect();
        let note = format!("reference cell ({}, {})", reference.0, reference.1);
        write_matrix(
            &dir.join(format!("correlation_{}.dat", name(c))),
            &header(&format!("modified correlation C_m of {}", name(c))).note(note.clone()),
            ("ln_r_i", &axis),
            ("ln_r_t", &axis),
            &cm,
        )?;
        write_matrix(
            &dir.join(format!("correlation_raw_{}.dat", name(c))),
            &header(&format!("raw correlation C of {}", name(c))).note(note),
            ("ln_r_i", &axis),
            ("ln_r_t", &axis),
            &raw,
        )?;
    }

    let mut fits = Vec::new();
    for c in Control::BOTH {
        let (mut row_col, mut r_col, mut w_col) = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..grid.len() {
            let section = pulse_width_cross_section(grid, i, c);
            for &(r, w) in &section {
                row_col.push(i as f64);
                r_col.push(r);
                w_col.push(w);
            }
            let positive: Vec<(f64, f64)> = section.into_iter().filter(|p| p.1 > 0.0).collect();
            if positive.len() < MIN_FIT_POINTS {
                continue;
            }
            let (lo, hi) = positive.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(p.1), h.max(p.1)));
            let window = (positive[0].0, positive[positive.len() - 1].0);
            let mut doc = FitDoc {
                row: i,
                ln_r_init: axis[i],
                control: name(c),
                points: positive.len(),
                data_range: hi - lo,
                alpha: f64::NAN,
                r0: f64::NAN,
                c: f64::NAN,
                residual_norm: f64::NAN,
                error: None,
            };
            let fit = match fit_bifurcation(&positive, window) {
                Ok(f) => Some(f),
                Err(Error::Fit { message, best }) => {
                    doc.error = Some(message);
                    best.map(|b| *b)
                }
                Err(e) => return Err(e.into()),
            };
            if let Some(f) = fit {
                (doc.alpha, doc.r0, doc.c, doc.residual_norm) = (f.alpha, f.r0, f.c, f.residual_norm);
            }
            fits.push(doc);
        }
        write_columns(
            &dir.join(format!("pulse_width_{}.dat", name(c))),
            &header(&format!("narrowest interior segment of {} (units of 1/J)", name(c))).note("r_t = exp(ln r_t)"),
            &["row", "r_t", "width"],
            &[row_col, r_col, w_col],
        )?;
    }
    write_toml(
        &dir.join("fits.toml"),
        &FitsDoc { config_hash: hash.clone(), seed, model: "width = (r_t - r0)^alpha + c", fit: fits },
    )?;

    let sym = diagonal_symmetry(&tau, a.symmetry_tolerance);
    let spearman = row_spearman(&tau, &overlap);
    let summary = SummaryDoc {
        config_hash: hash.clone(),
        seed,
        label: grid.info.label.clone(),
        cells: grid.len() * grid.len(),
        done: grid.count(bangbang::analysis::CellStatus::Done),
        skipped: grid.count(bangbang::analysis::CellStatus::Skipped),
        failed: grid.count(bangbang::analysis::CellStatus::Failed),
        missing: grid.missing(),
        symmetry_pairs: sym.pairs,
        symmetry_within: sym.within,
        symmetry_fraction: sym.fraction().unwrap_or(f64::NAN),
        row_spearman_tau_overlap: spearman.iter().map(|s| s.unwrap_or(f64::NAN)).collect(),
        reference: [reference.0, reference.1],
    };
    write_toml(&dir.join("summary.toml"), &summary)?;

    if let Some(other) = &a.compare {
        let b = load_sweep(other)?;
        let ratio = tau_ratio(grid, &b)?;
        write_matrix(
            &dir.join("tau_ratio.dat"),
            &header("ln(tau_a / tau_b)").note(format!("b: {} ({})", b.info.label, b.info.config_hash)),
            ("ln_r_i", &axis),
            ("ln_r_t", &axis),
            &ratio.log_ratio,
        )?;
        let nan = f64::NAN;
        write_toml(
            &dir.join("tau_ratio.toml"),
            &RatioDoc {
                config_hash_a: hash.clone(),
                config_hash_b: b.info.config_hash.clone(),
                mean_a: ratio.a.map_or(nan, |m| m.mean),
                std_a: ratio.a.map_or(nan, |m| m.std),
                mean_b: ratio.b.map_or(nan, |m| m.mean),
                std_b: ratio.b.map_or(nan, |m| m.std),
                negative_quadrant_a_longer: ratio.negative_quadrant_a_longer.unwrap_or(nan),
            },
        )?;
        println!("tau_a = {} +- {}", ratio.a.map_or(nan, |m| m.mean), ratio.a.map_or(nan, |m| m.std));
        println!("tau_b = {} +- {}", ratio.b.map_or(nan, |m| m.mean), ratio.b.map_or(nan, |m| m.std));
    }

    println!("regions = {}", phases.regions.len());
    println!("boundaries = {}", phases.boundaries.len());
    println!("symmetry_fraction = {}", summary.symmetry_fraction);
    println!("output = {:?}", dir.display().to_string());
    Ok(())
}
