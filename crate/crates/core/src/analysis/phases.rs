//! Pulse-count phase diagrams and the protocol maps derived from a sweep.

use crate::error::{Error, Result};
use crate::protocol::{Control, JumpProtocol};

use super::correlation::{correlation, CorrelationReport};
use super::SweepGrid;

pub type Label = (usize, usize);
pub type Cell = (usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRegion {
    pub label: Label,
    pub cells: Vec<Cell>,
}

/// Two 4-neighbor cells with different labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseBoundary {
    pub a: Cell,
    pub b: Cell,
    pub label_a: Label,
    pub label_b: Label,
}

impl PhaseBoundary {
    /// One extra pulse in one control, the other unchanged.
    pub fn is_layered(&self) -> bool {
        self.label_a.0.abs_diff(self.label_b.0) + self.label_a.1.abs_diff(self.label_b.1) == 1
    }

    /// The cell on the side with more pulses, and that side's control gaining one.
    pub fn higher(&self) -> Option<(Cell, Control)> {
        if !self.is_layered() {
            return None;
        }
        let (ta, tb) = (self.label_a.0 + self.label_a.1, self.label_b.0 + self.label_b.1);
        let control = if self.label_a.0 != self.label_b.0 { Control::J } else { Control::K };
        Some((if ta > tb { self.a } else { self.b }, control))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMap {
    /// Region index of every labeled cell.
    pub region: Vec<Vec<Option<usize>>>,
    pub regions: Vec<PhaseRegion>,
    pub boundaries: Vec<PhaseBoundary>,
}

impl PhaseMap {
    /// Boundaries where the pulse counts change by more than one pulse.
    pub fn layering_violations(&self) -> Vec<PhaseBoundary> {
        self.boundaries.iter().filter(|b| !b.is_layered()).copied().collect()
    }

    pub fn is_layered(&self) -> bool {
        self.boundaries.iter().all(PhaseBoundary::is_layered)
    }
}

/// Connected components (4-neighbor) of equal `(P_J, P_K)` labels; unlabeled
/// cells belong to no region and form no boundary.
pub fn detect_phases(labels: &[Vec<Option<Label>>]) -> PhaseMap {
    let rows = labels.len();
    let cols = labels.first().map_or(0, Vec::len);
    let mut region = vec![vec![None; cols]; rows];
    let mut regions = Vec::new();
    for i in 0..rows {
        for j in 0..cols {
            let Some(label) = labels[i][j] else { continue };
            if region[i][j].is_some() {
                continue;
            }
            let id = regions.len();
            let mut cells = Vec::new();
            let mut stack = vec![(i, j)];
            region[i][j] = Some(id);
            while let Some((a, b)) = stack.pop() {
                cells.push((a, b));
                for (x, y) in neighbors(a, b, rows, cols) {
                    if region[x][y].is_none() && labels[x][y] == Some(label) {
                        region[x][y] = Some(id);
                        stack.push((x, y));
                    }
                }
            }
            cells.sort();
            regions.push(PhaseRegion { label, cells });
        }
    }
    let mut boundaries = Vec::new();
    for i in 0..rows {
        for j in 0..cols {
            for (x, y) in [(i + 1, j), (i, j + 1)] {
                if x >= rows || y >= cols {
                    continue;
                }
                if let (Some(la), Some(lb)) = (labels[i][j], labels[x][y]) {
                    if la != lb {
                        boundaries.push(PhaseBoundary { a: (i, j), b: (x, y), label_a: la, label_b: lb });
                    }
                }
            }
        }
    }
    PhaseMap { region, regions, boundaries }
}

fn neighbors(i: usize, j: usize, rows: usize, cols: usize) -> impl Iterator<Item = Cell> {
    let up = i.checked_sub(1).map(|x| (x, j));
    let left = j.checked_sub(1).map(|y| (i, y));
    let down = (i + 1 < rows).then_some((i + 1, j));
    let right = (j + 1 < cols).then_some((i, j + 1));
    [up, left, down, right].into_iter().flatten()
}

/// `C_m` of every finished cell's `control` against the reference cell, on
/// canonicalized protocols normalized to unit time.
pub fn correlation_map(grid: &SweepGrid, reference: Cell, control: Control) -> Result<Vec<Vec<Option<CorrelationReport>>>> {
    let normalized = |i: usize, j: usize| -> Option<JumpProtocol> { grid.protocol(i, j)?.normalize().ok() };
    let Some(r) = normalized(reference.0, reference.1) else {
        return Err(Error::Incompatible(format!(
            "reference cell {reference:?} holds no optimized protocol (skipped, failed or missing)"
        )));
    };
    let n = grid.len();
    Ok((0..n)
        .map(|i| {
            (0..n).map(|j| normalized(i, j).map(|p| correlation(r.trace(control), p.trace(control)))).collect()
        })
        .collect())
}

/// Width of the narrowest interior segment of `control` (in units of time)
/// along row `i`, for the finished cells: `(r_t, width)`, with width 0 when the
/// control has no interior segment.
pub fn pulse_width_cross_section(grid: &SweepGrid, i: usize, control: Control) -> Vec<(f64, f64)> {
    (0..grid.len())
        .filter_map(|j| {
            let p = grid.protocol(i, j)?;
            Some((grid.axis()[j].exp(), p.narrowest_interior(control).unwrap_or(0.0)))
        })
        .collect()
}

/// Narrowest interior widths of the boundary's gaining control on up to
/// `depth` cells, starting at the higher-count cell and walking away from the
/// boundary while the label stays the same.
pub fn approach_widths(
    widths: &dyn Fn(Cell, Control) -> Option<f64>,
    labels: &[Vec<Option<Label>>],
    boundary: &PhaseBoundary,
    depth: usize,
) -> Option<Vec<f64>> {
    let (start, control) = boundary.higher()?;
    let other = if start == boundary.a { boundary.b } else { boundary.a };
    let (di, dj) = (start.0 as isize - other.0 as isize, start.1 as isize - other.1 as isize);
    let label = labels[start.0][start.1];
    let mut out = Vec::new();
    let mut cell = start;
    for _ in 0..depth {
        out.push(widths(cell, control)?);
        let (x, y) = (cell.0 as isize + di, cell.1 as isize + dj);
        if x < 0 || y < 0 || x as usize >= labels.len() || y as usize >= labels[0].len() {
            break;
        }
        cell = (x as usize, y as usize);
        if labels[cell.0][cell.1] != label {
            break;
        }
    }
    Some(out)
}

/// Whether the widths shrink towards the boundary (first entry is nearest).
pub fn shrinks_towards_boundary(widths: &[f64]) -> bool {
    widths.len() >= 2 && widths.windows(2).all(|w| w[0] <= w[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::ControlTrace;

    fn uniform(n: usize, l: Label) -> Vec<Vec<Option<Label>>> {
        vec![vec![Some(l); n]; n]
    }

    #[test]
    fn uniform_grid_is_one_region() {
        let m = detect_phases(&uniform(4, (1, 1)));
        assert_eq!(m.regions.len(), 1);
        assert_eq!(m.regions[0].cells.len(), 16);
        assert!(m.boundaries.is_empty());
        assert!(m.is_layered());
    }

    #[test]
    fn island_is_its_own_region() {
        let mut g = uniform(5, (1, 1));
        g[2][2] = Some((2, 1));
        g[0][0] = None;
        let m = detect_phases(&g);
        assert_eq!(m.regions.len(), 2);
        assert_eq!(m.boundaries.len(), 4);
        assert!(m.boundaries.iter().all(|b| b.a == (2, 2) || b.b == (2, 2)));
        assert!(m.is_layered());
        assert_eq!(m.regions[1].cells, vec![(2, 2)]);
        assert_eq!(m.region[0][0], None);
        assert_eq!(m.boundaries[0].higher(), Some(((2, 2), Control::J)));

        g[2][2] = Some((3, 1));
        assert_eq!(detect_phases(&g).layering_violations().len(), 4);
    }

    #[test]
    fn disconnected_equal_labels_are_separate_regions() {
        let g = vec![vec![Some((1, 1)), Some((2, 1)), Some((1, 1))]];
        let m = detect_phases(&g);
        assert_eq!(m.regions.len(), 3);
        assert_eq!(m.boundaries.len(), 2);
    }

    /// Pulse counts of a protocol and its time reverse agree, so the phase map of
    /// the transposed, time-reversed grid is the transposed phase map.
    #[test]
    fn invariant_under_transpose_with_time_reversal() {
        let n = 4;
        let proto = |i: usize, j: usize| {
            let jumps: Vec<f64> = (0..(i + 2 * j) % 4 + 1).map(|k| 0.1 + 0.15 * k as f64 + 0.01 * i as f64).collect();
            JumpProtocol::new(
                1.0,
                ControlTrace { initial: (i + j) % 2 == 0, jumps: jumps.clone() },
                ControlTrace { initial: true, jumps: jumps[..jumps.len() / 2].to_vec() },
            )
            .unwrap()
        };
        let label = |p: &JumpProtocol| {
            let s = p.count_pulses();
            Some((s.pulses_j, s.pulses_k))
        };
        let g: Vec<Vec<_>> = (0..n).map(|i| (0..n).map(|j| label(&proto(i, j))).collect()).collect();
        let t: Vec<Vec<_>> = (0..n).map(|i| (0..n).map(|j| label(&proto(j, i).time_reversed())).collect()).collect();
        let (a, b) = (detect_phases(&g), detect_phases(&t));
        assert_eq!(a.regions.len(), b.regions.len());
        for i in 0..n {
            for j in 0..n {
                assert_eq!(g[i][j], t[j][i]);
                let (ra, rb) = (a.region[i][j].unwrap(), b.region[j][i].unwrap());
                assert_eq!(a.regions[ra].cells.len(), b.regions[rb].cells.len());
            }
        }
        assert_eq!(a.boundaries.len(), b.boundaries.len());
    }

    #[test]
    fn approach_walks_away_from_the_boundary() {
        // Row 0: P=1 at j=0, P=2 for j >= 1, nascent width growing with j.
        let labels = vec![vec![Some((1, 1)), Some((2, 1)), Some((2, 1)), Some((2, 1)), Some((2, 1))]];
        let m = detect_phases(&labels);
        assert_eq!(m.boundaries.len(), 1);
        let widths = |c: Cell, ctl: Control| {
            assert_eq!(ctl, Control::J);
            Some(0.01 * c.1 as f64)
        };
        let w = approach_widths(&widths, &labels, &m.boundaries[0], 3).unwrap();
        assert_eq!(w, vec![0.01, 0.02, 0.03]);
        assert!(shrinks_towards_boundary(&w));
        assert!(!shrinks_towards_boundary(&[0.03, 0.02]));
    }
}
