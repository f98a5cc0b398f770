//! Grid-level statistics: ground-state overlaps, diagonal symmetry, rank
//! correlations and critical-time ratios between fillings.

use crate::error::{Error, Result};
use crate::hamiltonian::{ground_state_of, CouplingRatio, XxzSystem};
use crate::linalg;

use super::SweepGrid;

pub type Matrix = Vec<Vec<Option<f64>>>;

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapGrid {
    pub axis: Vec<f64>,
    /// `|<psi(axis[j]) | psi(axis[i])>|^2`; `None` where a ground state is degenerate.
    pub values: Matrix,
    /// Axis indices with a degenerate ground state.
    pub degenerate: Vec<usize>,
    /// Axis indices whose gap is small enough to warrant a warning.
    pub near_degenerate: Vec<usize>,
}

/// Ground-state overlaps over the full grid, no optimization involved.
pub fn overlap_grid(system: &XxzSystem, axis: &[f64]) -> Result<OverlapGrid> {
    let mut states = Vec::with_capacity(axis.len());
    let (mut degenerate, mut near_degenerate) = (Vec::new(), Vec::new());
    for (i, &x) in axis.iter().enumerate() {
        match ground_state_of(&system.hamiltonian(CouplingRatio::from_ln(x)?)) {
            Ok(g) => {
                if g.near_degenerate {
                    near_degenerate.push(i);
                }
                states.push(Some(g.vector));
            }
            Err(Error::DegenerateGroundState { .. }) => {
                degenerate.push(i);
                states.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    let n = axis.len();
    let mut values = vec![vec![None; n]; n];
    for i in 0..n {
        for j in i..n {
            if let (Some(a), Some(b)) = (&states[i], &states[j]) {
                let o = if i == j { 1.0 } else { linalg::overlap(a, b) };
                values[i][j] = Some(o);
                values[j][i] = Some(o);
            }
        }
    }
    Ok(OverlapGrid { axis: axis.to_vec(), values, degenerate, near_degenerate })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetryReport {
    /// Unordered off-diagonal pairs with both entries present.
    pub pairs: usize,
    /// Pairs whose relative difference is within the tolerance.
    pub within: usize,
    pub max_relative: f64,
}

impl SymmetryReport {
    pub fn fraction(&self) -> Option<f64> {
        (self.pairs > 0).then(|| self.within as f64 / self.pairs as f64)
    }
}

/// Compares `m[i][j]` with `m[j][i]`; the relative difference is taken with
/// respect to the larger of the two.
pub fn diagonal_symmetry(m: &Matrix, tolerance: f64) -> SymmetryReport {
    let mut r = SymmetryReport { pairs: 0, within: 0, max_relative: 0.0 };
    for i in 0..m.len() {
        for j in i + 1..m.len() {
            if let (Some(a), Some(b)) = (m[i][j], m[j][i]) {
                let rel = (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
                r.pairs += 1;
                r.max_relative = r.max_relative.max(rel);
                if rel <= tolerance {
                    r.within += 1;
                }
            }
        }
    }
    r
}

/// Ranks starting at 1, ties sharing their average rank.
fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0.0; x.len()];
    let mut s = 0;
    while s < idx.len() {
        let mut e = s;
        while e + 1 < idx.len() && x[idx[e + 1]] == x[idx[s]] {
            e += 1;
        }
        let avg = (s + e) as f64 / 2.0 + 1.0;
        for &k in &idx[s..=e] {
            out[k] = avg;
        }
        s = e + 1;
    }
    out
}

/// Spearman rank correlation; `None` with fewer than 3 points or a constant input.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 3 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let mean = (n as f64 + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for k in 0..n {
        let (a, b) = (rx[k] - mean, ry[k] - mean);
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Per row (fixed `r_i`): Spearman correlation between `tau` and `overlap`
/// over the cells where both are present.
pub fn row_spearman(tau: &Matrix, overlap: &Matrix) -> Vec<Option<f64>> {
    tau.iter()
        .zip(overlap)
        .map(|(t, o)| {
            let (x, y): (Vec<f64>, Vec<f64>) =
                t.iter().zip(o).filter_map(|(a, b)| Some(((*a)?, (*b)?))).unzip();
            spearman(&x, &y)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl MeanStd {
    /// Population statistics of the present entries.
    pub fn of(m: &Matrix) -> Option<MeanStd> {
        let v: Vec<f64> = m.iter().flatten().flatten().copied().collect();
        if v.is_empty() {
            return None;
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Some(MeanStd { mean, std: var.sqrt(), count: v.len() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TauRatio {
    pub axis: Vec<f64>,
    /// `ln(tau_a / tau_b)` where both cells are present.
    pub log_ratio: Matrix,
    pub a: Option<MeanStd>,
    pub b: Option<MeanStd>,
    /// Fraction of compared cells with `ln r_i < 0` and `ln r_t < 0` where `tau_a > tau_b`.
    pub negative_quadrant_a_longer: Option<f64>,
}

/// Critical-time comparison between two grids on identical axes.
pub fn tau_ratio_matrices(axis_a: &[f64], a: &Matrix, axis_b: &[f64], b: &Matrix) -> Result<TauRatio> {
    if axis_a.len() != axis_b.len() || axis_a.iter().zip(axis_b).any(|(x, y)| (x - y).abs() > 1e-12) {
        return Err(Error::Incompatible("grids are on different axes".into()));
    }
    let n = axis_a.len();
    if a.len() != n || b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: a.len().min(b.len()) });
    }
    let mut log_ratio = vec![vec![None; n]; n];
    let (mut quad, mut longer) = (0usize, 0usize);
    for i in 0..n {
        for j in 0..n {
            if let (Some(x), Some(y)) = (a[i][j], b[i][j]) {
                log_ratio[i][j] = Some((x / y).ln());
                if axis_a[i] < 0.0 && axis_a[j] < 0.0 {
                    quad += 1;
                    if x > y {
                        longer += 1;
                    }
                }
            }
        }
    }
    Ok(TauRatio {
        axis: axis_a.to_vec(),
        log_ratio,
        a: MeanStd::of(a),
        b: MeanStd::of(b),
        negative_quadrant_a_longer: (quad > 0).then(|| longer as f64 / quad as f64),
    })
}

pub fn tau_ratio(a: &SweepGrid, b: &SweepGrid) -> Result<TauRatio> {
    if a.config.system.sites() != b.config.system.sites() {
        return Err(Error::Incompatible("grids are for different lattices".into()));
    }
    tau_ratio_matrices(a.axis(), &a.tau_matrix(), b.axis(), &b.tau_matrix())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Boundary, LatticeSpec};

    #[test]
    fn overlap_grid_is_symmetric_with_unit_diagonal() {
        let lattice = LatticeSpec { side_length: 2, boundary: Boundary::Open, dedup_bonds: false };
        let sys = XxzSystem::new(lattice, 2).unwrap();
        let axis = [-2.0, -0.5, 0.5, 2.0];
        let g = overlap_grid(&sys, &axis).unwrap();
        for i in 0..4 {
            assert_eq!(g.values[i][i], Some(1.0));
            for j in 0..4 {
                assert_eq!(g.values[i][j], g.values[j][i]);
            }
        }
        // Overlap decays away from the diagonal.
        assert!(g.values[0][1].unwrap() > g.values[0][3].unwrap());
    }

    #[test]
    fn spearman_against_hand_values() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0, 4.0], &[10.0, 20.0, 30.0, 40.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
        // x = (1,2,3,4,5), y = (2,1,4,3,5): sum d^2 = 4, rho = 1 - 6*4/(5*24) = 0.8
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 4.0, 3.0, 5.0]).unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), None);
        assert_eq!(spearman(&[1.0, 2.0], &[1.0, 2.0]), None);
    }

    #[test]
    fn identical_grids_give_zero_log_ratio() {
        let axis = [-1.0, 1.0];
        let m = vec![vec![None, Some(2.0)], vec![Some(3.0), None]];
        let r = tau_ratio_matrices(&axis, &m, &axis, &m).unwrap();
        assert_eq!(r.log_ratio, vec![vec![None, Some(0.0)], vec![Some(0.0), None]]);
        assert_eq!(r.a, r.b);
        assert_eq!(r.a.unwrap().mean, 2.5);
        assert!(matches!(tau_ratio_matrices(&axis, &m, &[-1.0, 2.0], &m), Err(Error::Incompatible(_))));
    }

    #[test]
    fn quadrant_fraction_counts_negative_cells_only() {
        let axis = [-2.0, -1.0, 1.0];
        let a = vec![vec![None, Some(2.0), Some(1.0)], vec![Some(2.0), None, Some(1.0)], vec![Some(1.0); 3]];
        let b = vec![vec![None, Some(1.0), Some(5.0)], vec![Some(3.0), None, Some(5.0)], vec![Some(5.0); 3]];
        let r = tau_ratio_matrices(&axis, &a, &axis, &b).unwrap();
        assert_eq!(r.negative_quadrant_a_longer, Some(0.5));
    }

    #[test]
    fn symmetry_counts_pairs() {
        let m = vec![vec![None, Some(1.0), Some(1.0)], vec![Some(1.05), None, None], vec![Some(2.0), Some(1.0), None]];
        let r = diagonal_symmetry(&m, 0.1);
        assert_eq!((r.pairs, r.within), (2, 1));
        assert_eq!(r.fraction(), Some(0.5));
        assert_eq!(r.max_relative, 0.5);
    }
}
