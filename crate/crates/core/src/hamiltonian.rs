//! Sector-restricted XXZ Hamiltonians, their spectra, and distance measures.
//!
//! `H(J, K) = sum_<ij> [J (sx sx + sy sy) + K sz sz]` written with Pauli matrices.
//! In the sz basis the flip-flop term has amplitude `2J` between configurations
//! related by one hop, and each bond contributes `+K` (parallel) or `-K`
//! (antiparallel) to the diagonal. All matrices are real symmetric.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{self, hop, Bond, LatticeSpec, SectorBasis};
use crate::linalg::{self, State};

/// Relative gap below which a ground state is treated as degenerate.
pub const DEGENERACY_TOLERANCE: f64 = 1e-8;
/// Relative gap below which a ground state is reported as nearly degenerate.
pub const NEAR_DEGENERACY_WARNING: f64 = 1e-6;
/// `1 - |<init|target>|^2` below which the normalized distances are undefined.
pub const COINCIDENCE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatorLabel {
    /// `O_J = H(1, 0)`
    Hopping,
    /// `O_K = H(0, 1)`
    Ising,
    Full { j: f64, k: f64 },
}

impl std::fmt::Display for OperatorLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OperatorLabel::Hopping => write!(f, "O_J"),
            OperatorLabel::Ising => write!(f, "O_K"),
            OperatorLabel::Full { j, k } => write!(f, "H(J={j}, K={k})"),
        }
    }
}

/// Dense Hermitian (here real symmetric) operator on a sector.
#[derive(Debug, Clone)]
pub struct SectorOperator {
    pub matrix: DMatrix<f64>,
    pub label: OperatorLabel,
}

impl SectorOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `max |H_ab - conj(H_ba)|`
    pub fn hermiticity_defect(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).abs().max()
    }

    pub fn apply(&self, psi: &[Complex64], out: &mut [Complex64]) {
        let d = self.dim();
        // Symmetric, so the column-major storage doubles as row-major.
        linalg::real_matvec(self.matrix.as_slice(), d, psi, out);
    }

    pub fn expectation(&self, psi: &[Complex64]) -> f64 {
        let mut tmp = vec![Complex64::default(); self.dim()];
        self.apply(psi, &mut tmp);
        linalg::inner(psi, &tmp).re
    }

    /// `j * a + k * b` for two operators on the same sector.
    pub fn combine(a: &SectorOperator, j: f64, b: &SectorOperator, k: f64) -> SectorOperator {
        SectorOperator { matrix: &a.matrix * j + &b.matrix * k, label: OperatorLabel::Full { j, k } }
    }
}

pub fn build_operator(basis: &SectorBasis, bonds: &[Bond], j: f64, k: f64) -> Result<SectorOperator> {
    let m = basis.sites();
    if let Some(&(a, b)) = bonds.iter().find(|&&(a, b)| a >= m || b >= m) {
        return Err(Error::DimensionMismatch { expected: m, actual: a.max(b) + 1 });
    }
    let d = basis.dim();
    let mut matrix = DMatrix::<f64>::zeros(d, d);
    for (col, &config) in basis.states().iter().enumerate() {
        let mut diag = 0.0;
        for &(a, b) in bonds {
            match hop(config, a, b) {
                None => diag += k,
                Some(next) => {
                    diag -= k;
                    if j != 0.0 {
                        let row = basis.rank(next).expect("hop stays in sector");
                        matrix[(row, col)] += 2.0 * j;
                    }
                }
            }
        }
        matrix[(col, col)] += diag;
    }
    let label = match (j, k) {
        (j, k) if j == 1.0 && k == 0.0 => OperatorLabel::Hopping,
        (j, k) if j == 0.0 && k == 1.0 => OperatorLabel::Ising,
        (j, k) => OperatorLabel::Full { j, k },
    };
    Ok(SectorOperator { matrix, label })
}

/// Spectrum of a real symmetric operator with eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    /// Columns are eigenvectors.
    pub vectors: DMatrix<f64>,
    v_rows: Vec<f64>,
    vt_rows: Vec<f64>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    fn from_sorted(values: Vec<f64>, vectors: DMatrix<f64>) -> Self {
        // Column-major storage of V is V^T in row-major order.
        let vt_rows = vectors.as_slice().to_vec();
        let v_rows = vectors.transpose().as_slice().to_vec();
        EigenDecomposition { values, vectors, v_rows, vt_rows }
    }

    /// `psi <- V exp(-i dt D) V^T psi`; `scratch` must have the state's length.
    /// Two dense matrix-vector products and one diagonal scaling.
    #[inline]
    pub fn evolve(&self, psi: &mut [Complex64], dt: f64, scratch: &mut [Complex64]) {
        let d = self.dim();
        linalg::real_matvec(&self.vt_rows, d, psi, scratch);
        for (s, &lambda) in scratch.iter_mut().zip(&self.values) {
            let (sin, cos) = (-dt * lambda).sin_cos();
            *s *= Complex64::new(cos, sin);
        }
        linalg::real_matvec(&self.v_rows, d, scratch, psi);
    }

    /// `exp(-i dt H)` as a dense matrix.
    pub fn unitary(&self, dt: f64) -> linalg::ComplexMatrix {
        let phases: Vec<Complex64> =
            self.values.iter().map(|&l| Complex64::from_polar(1.0, -dt * l)).collect();
        linalg::ComplexMatrix::from_spectral(&self.vectors, &phases)
    }

    /// `max |V diag(D) V^T - H|`
    pub fn reconstruction_residual(&self, op: &SectorOperator) -> f64 {
        let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.values.clone()));
        (&self.vectors * diag * self.vectors.transpose() - &op.matrix).abs().max()
    }

    /// `max |V^T V - I|`
    pub fn orthogonality_defect(&self) -> f64 {
        let d = self.dim();
        (self.vectors.transpose() * &self.vectors - DMatrix::<f64>::identity(d, d)).abs().max()
    }

    pub fn eigenvector(&self, index: usize) -> State {
        self.vectors.column(index).iter().map(|&x| Complex64::new(x, 0.0)).collect()
    }
}

pub fn diagonalize(op: &SectorOperator) -> Result<EigenDecomposition> {
    let d = op.dim();
    let eig = op
        .matrix
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 0)
        .ok_or_else(|| Error::EigenConvergence { label: op.label.to_string() })?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::<f64>::zeros(d, d);
    for (col, &i) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        fix_sign(v.as_mut_slice());
        vectors.set_column(col, &v);
    }
    Ok(EigenDecomposition::from_sorted(values, vectors))
}

/// Eigendecomposition of a general complex Hermitian matrix, ascending.
pub fn diagonalize_hermitian(
    matrix: &DMatrix<Complex64>,
) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let d = matrix.nrows();
    let eig = matrix
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 0)
        .ok_or_else(|| Error::EigenConvergence { label: "hermitian matrix".into() })?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::<Complex64>::zeros(d, d);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    Ok((values, vectors))
}

// Largest-magnitude component made positive so eigenvectors are reproducible.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() + 1e-12 {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// `r = J / K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingRatio(f64);

impl CouplingRatio {
    pub fn new(r: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::Config(format!("coupling ratio must be positive and finite, got {r}")));
        }
        Ok(CouplingRatio(r))
    }

    pub fn from_ln(ln_r: f64) -> Result<Self> {
        Self::new(ln_r.exp())
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    /// The point on the boundary of `[0,1]^2` with `J/K = r` and `max(J, K) = 1`.
    pub fn couplings(&self) -> (f64, f64) {
        if self.0 <= 1.0 {
            (self.0, 1.0)
        } else {
            (1.0, 1.0 / self.0)
        }
    }
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub vector: State,
    pub energy: f64,
    pub gap: f64,
    pub spectral_width: f64,
    pub near_degenerate: bool,
}

/// Ground state of an operator within its sector.
pub fn ground_state_of(op: &SectorOperator) -> Result<GroundState> {
    let eig = diagonalize(op)?;
    let d = eig.dim();
    let energy = eig.values[0];
    let width = eig.values[d - 1] - eig.values[0];
    let gap = if d > 1 { eig.values[1] - eig.values[0] } else { f64::INFINITY };
    let scale = width.max(f64::MIN_POSITIVE);
    if d > 1 && gap < DEGENERACY_TOLERANCE * scale {
        return Err(Error::DegenerateGroundState {
            gap,
            tolerance: DEGENERACY_TOLERANCE * scale,
            candidates: Box::new([eig.eigenvector(0), eig.eigenvector(1)]),
        });
    }
    Ok(GroundState {
        vector: eig.eigenvector(0),
        energy,
        gap,
        spectral_width: width,
        near_degenerate: d > 1 && gap < NEAR_DEGENERACY_WARNING * scale,
    })
}

/// Lattice, sector and the two control operators `O_J`, `O_K`.
#[derive(Debug, Clone)]
pub struct XxzSystem {
    pub lattice: LatticeSpec,
    pub bonds: Vec<Bond>,
    pub basis: SectorBasis,
    pub op_j: SectorOperator,
    pub op_k: SectorOperator,
}

impl XxzSystem {
    pub fn new(lattice: LatticeSpec, occupants: usize) -> Result<Self> {
        Self::with_max_dimension(lattice, occupants, lattice::DEFAULT_MAX_DIMENSION)
    }

    pub fn with_max_dimension(lattice: LatticeSpec, occupants: usize, max_dim: usize) -> Result<Self> {
        let bonds = lattice::build_lattice(&lattice)?;
        let basis = lattice::enumerate_sector_capped(lattice.sites(), occupants, max_dim)?;
        let op_j = build_operator(&basis, &bonds, 1.0, 0.0)?;
        let op_k = build_operator(&basis, &bonds, 0.0, 1.0)?;
        Ok(XxzSystem { lattice, bonds, basis, op_j, op_k })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn sites(&self) -> usize {
        self.basis.sites()
    }

    pub fn occupants(&self) -> usize {
        self.basis.occupants()
    }

    pub fn operator(&self, j: f64, k: f64) -> SectorOperator {
        SectorOperator::combine(&self.op_j, j, &self.op_k, k)
    }

    pub fn hamiltonian(&self, r: CouplingRatio) -> SectorOperator {
        let (j, k) = r.couplings();
        self.operator(j, k)
    }

    pub fn ground_state(&self, r: CouplingRatio) -> Result<GroundState> {
        ground_state_of(&self.hamiltonian(r))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceReport {
    pub cost_energy: f64,
    pub cost_state: f64,
    pub dist_energy: f64,
    pub dist_state: f64,
}

/// Energy and fidelity costs of `psi` and their normalized distances.
pub fn distances(
    psi: &[Complex64],
    psi_init: &[Complex64],
    psi_target: &[Complex64],
    h_target: &SectorOperator,
    e0: f64,
) -> Result<DistanceReport> {
    let cost_state = (1.0 - linalg::overlap(psi, psi_target)).clamp(0.0, 1.0);
    let init_state = 1.0 - linalg::overlap(psi_init, psi_target);
    if init_state < COINCIDENCE_TOLERANCE {
        return Err(Error::StatesCoincide { infidelity: init_state });
    }
    let cost_energy = h_target.expectation(psi);
    let init_energy = h_target.expectation(psi_init) - e0;
    Ok(DistanceReport {
        cost_energy,
        cost_state,
        dist_energy: (cost_energy - e0) / init_energy,
        dist_state: cost_state / init_state,
    })
}

/// A ground-state transformation `psi(r_i) -> psi(r_t)` on one system.
#[derive(Debug, Clone)]
pub struct Transfer {
    pub r_init: CouplingRatio,
    pub r_target: CouplingRatio,
    pub psi_init: State,
    pub psi_target: State,
    pub h_target: SectorOperator,
    pub e0: f64,
    init_infidelity: f64,
    init_energy_excess: f64,
}

impl Transfer {
    pub fn new(system: &XxzSystem, r_init: CouplingRatio, r_target: CouplingRatio) -> Result<Self> {
        let init = system.ground_state(r_init)?;
        let target = system.ground_state(r_target)?;
        let h_target = system.hamiltonian(r_target);
        Self::from_states(init.vector, target.vector, h_target, target.energy)
            .map(|t| Transfer { r_init, r_target, ..t })
    }

    /// Transfer between arbitrary normalized states. `h_target` and `e0` are only
    /// used by the energy distance.
    pub fn from_states(
        psi_init: State,
        psi_target: State,
        h_target: SectorOperator,
        e0: f64,
    ) -> Result<Self> {
        let init_infidelity = 1.0 - linalg::overlap(&psi_init, &psi_target);
        if init_infidelity < COINCIDENCE_TOLERANCE {
            return Err(Error::StatesCoincide { infidelity: init_infidelity });
        }
        let init_energy_excess = h_target.expectation(&psi_init) - e0;
        let unit = CouplingRatio(1.0);
        Ok(Transfer {
            r_init: unit,
            r_target: unit,
            psi_init,
            psi_target,
            h_target,
            e0,
            init_infidelity,
            init_energy_excess,
        })
    }

    pub fn dim(&self) -> usize {
        self.psi_init.len()
    }

    pub fn overlap(&self) -> f64 {
        1.0 - self.init_infidelity
    }

    /// `D_S`
    pub fn dist_state(&self, psi: &[Complex64]) -> f64 {
        (1.0 - linalg::overlap(psi, &self.psi_target)).max(0.0) / self.init_infidelity
    }

    /// `D_E`
    pub fn dist_energy(&self, psi: &[Complex64]) -> f64 {
        (self.h_target.expectation(psi) - self.e0) / self.init_energy_excess
    }

    pub fn report(&self, psi: &[Complex64]) -> DistanceReport {
        distances(psi, &self.psi_init, &self.psi_target, &self.h_target, self.e0)
            .expect("coincidence checked at construction")
    }
}
