//! Grid sweeps over `(ln r_i, ln r_t)` and the analyses built on them:
//! overlap and critical-time grids, pulse-count phases, protocol correlations
//! and power-law fits of bifurcating pulses.

mod correlation;
mod fit;
mod grid;
mod phases;
mod sweep;

pub use correlation::{agreement, background, correlation, monte_carlo_background, CorrelationReport};
pub use fit::{fit_bifurcation, PowerLawFit, MIN_FIT_POINTS};
pub use grid::{
    diagonal_symmetry, overlap_grid, row_spearman, spearman, tau_ratio, tau_ratio_matrices, Matrix, MeanStd,
    OverlapGrid, SymmetryReport, TauRatio,
};
pub use phases::{
    approach_widths, correlation_map, detect_phases, pulse_width_cross_section, shrinks_towards_boundary, Cell,
    Label, PhaseBoundary, PhaseMap, PhaseRegion,
};
pub use sweep::{
    cell_path, cell_seed, load_sweep, plan_sweep, run_sweep, CellInfo, CellRecord, CellResult, CellStatus,
    SweepGrid, SweepInfo, SweepOptions, SweepPlan, SweepSummary,
};
