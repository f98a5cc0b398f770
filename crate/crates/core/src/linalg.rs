//! Small dense kernels used on the propagation hot path.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type State = Vec<Complex64>;

/// `<a|b>`
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// `|<a|b>|^2`
pub fn overlap(a: &[Complex64], b: &[Complex64]) -> f64 {
    inner(a, b).norm_sqr()
}

pub fn normalize(a: &mut [Complex64]) {
    let n = norm(a);
    if n > 0.0 {
        a.iter_mut().for_each(|x| *x /= n);
    }
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `out = A x` for a real matrix stored row-major.
#[inline]
pub fn real_matvec(rows: &[f64], dim: usize, x: &[Complex64], out: &mut [Complex64]) {
    debug_assert_eq!(rows.len(), dim * dim);
    for (row, o) in rows.chunks_exact(dim).zip(out.iter_mut()) {
        let mut re = 0.0;
        let mut im = 0.0;
        for (a, v) in row.iter().zip(x) {
            re += a * v.re;
            im += a * v.im;
        }
        *o = Complex64::new(re, im);
    }
}

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        ComplexMatrix { dim, data: vec![Complex64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.data[row * self.dim + col] = value;
    }

    /// `V diag(phases) V^T` for a real orthogonal `V` (columns are eigenvectors).
    pub fn from_spectral(vectors: &DMatrix<f64>, phases: &[Complex64]) -> Self {
        let dim = vectors.nrows();
        let mut m = Self::zeros(dim);
        for a in 0..dim {
            for b in 0..dim {
                let mut acc = Complex64::new(0.0, 0.0);
                for (k, p) in phases.iter().enumerate() {
                    acc += p * (vectors[(a, k)] * vectors[(b, k)]);
                }
                m.data[a * dim + b] = acc;
            }
        }
        m
    }

    #[inline]
    pub fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        let d = self.dim;
        for (row, o) in self.data.chunks_exact(d).zip(out.iter_mut()) {
            let mut re = 0.0;
            let mut im = 0.0;
            for (a, v) in row.iter().zip(x) {
                re += a.re * v.re - a.im * v.im;
                im += a.re * v.im + a.im * v.re;
            }
            *o = Complex64::new(re, im);
        }
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> ComplexMatrix {
        let d = self.dim;
        let mut out = Self::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self.data[i * d + k];
                for j in 0..d {
                    out.data[i * d + j] += a * other.data[k * d + j];
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> ComplexMatrix {
        let d = self.dim;
        let mut out = Self::zeros(d);
        for i in 0..d {
            for j in 0..d {
                out.data[j * d + i] = self.data[i * d + j].conj();
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        max_abs_diff(&self.data, &other.data)
    }

    /// `max |U^dagger U - I|`
    pub fn unitarity_defect(&self) -> f64 {
        self.adjoint().matmul(self).max_abs_diff(&Self::identity(self.dim))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inner_is_conjugate_linear_in_first_argument() {
        let a = vec![Complex64::new(0.0, 1.0)];
        let b = vec![Complex64::new(1.0, 0.0)];
        assert_eq!(inner(&a, &b), Complex64::new(0.0, -1.0));
        assert_eq!(overlap(&a, &b), 1.0);
    }

    #[test]
    fn real_matvec_matches_complex_apply() {
        let rows = vec![1.0, 2.0, -3.0, 0.5];
        let mut m = ComplexMatrix::zeros(2);
        for i in 0..2 {
            for j in 0..2 {
                m.set(i, j, Complex64::new(rows[i * 2 + j], 0.0));
            }
        }
        let x = vec![Complex64::new(1.0, -1.0), Complex64::new(0.25, 2.0)];
        let mut a = vec![Complex64::default(); 2];
        let mut b = vec![Complex64::default(); 2];
        real_matvec(&rows, 2, &x, &mut a);
        m.apply(&x, &mut b);
        assert!(max_abs_diff(&a, &b) < 1e-15);
    }
}
