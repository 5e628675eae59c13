//! Small dense matrices: the 4×4 complex operators used by the dynamics and
//! the handful of real-matrix routines the fitting code needs.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Sub};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Hilbert-space dimension of the simulated artificial atom.
pub const DIM: usize = 4;

/// Dense 4×4 complex matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct Mat4<T> {
    pub m: [[Complex<T>; DIM]; DIM],
}

impl<T: Real> Default for Mat4<T> {
    fn default() -> Self {
        Self::zeros()
    }
}

impl<T: Real> Mat4<T> {
    pub fn zeros() -> Self {
        Self {
            m: [[Complex::new(T::zero(), T::zero()); DIM]; DIM],
        }
    }

    pub fn identity() -> Self {
        let mut out = Self::zeros();
        for i in 0..DIM {
            out.m[i][i] = Complex::new(T::one(), T::zero());
        }
        out
    }

    pub fn from_real_diagonal(d: [T; DIM]) -> Self {
        let mut out = Self::zeros();
        for i in 0..DIM {
            out.m[i][i] = Complex::new(d[i], T::zero());
        }
        out
    }

    /// Projector |n⟩⟨n|.
    pub fn projector(n: usize) -> Self {
        let mut out = Self::zeros();
        out.m[n][n] = Complex::new(T::one(), T::zero());
        out
    }

    /// |ψ⟩⟨ψ| for a (not necessarily normalized) amplitude vector.
    pub fn outer(psi: &[Complex<T>; DIM]) -> Self {
        let mut out = Self::zeros();
        for i in 0..DIM {
            for j in 0..DIM {
                out.m[i][j] = psi[i] * psi[j].conj();
            }
        }
        out
    }

    pub fn dagger(&self) -> Self {
        let mut out = Self::zeros();
        for i in 0..DIM {
            for j in 0..DIM {
                out.m[i][j] = self.m[j][i].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> Complex<T> {
        (0..DIM).fold(Complex::new(T::zero(), T::zero()), |acc, i| {
            acc + self.m[i][i]
        })
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = *self;
        for row in out.m.iter_mut() {
            for z in row.iter_mut() {
                *z = *z * s;
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        let mut out = Self::zeros();
        for i in 0..DIM {
            for k in 0..DIM {
                let a = self.m[i][k];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                for j in 0..DIM {
                    out.m[i][j] = out.m[i][j] + a * rhs.m[k][j];
                }
            }
        }
        out
    }

    /// [A, B] = AB − BA.
    pub fn commutator(&self, rhs: &Self) -> Self {
        self.matmul(rhs) - rhs.matmul(self)
    }

    /// Largest elementwise modulus of A − A†.
    pub fn hermiticity_defect(&self) -> T {
        let mut worst = T::zero();
        for i in 0..DIM {
            for j in i..DIM {
                let d = (self.m[i][j] - self.m[j][i].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// (A + A†)/2.
    pub fn hermitian_part(&self) -> Self {
        let half = T::lit(0.5);
        let mut out = Self::zeros();
        for i in 0..DIM {
            for j in 0..DIM {
                out.m[i][j] = (self.m[i][j] + self.m[j][i].conj()) * half;
            }
        }
        out
    }

    pub fn max_abs_diff(&self, rhs: &Self) -> T {
        let mut worst = T::zero();
        for i in 0..DIM {
            for j in 0..DIM {
                worst = worst.max((self.m[i][j] - rhs.m[i][j]).norm());
            }
        }
        worst
    }

    pub fn diagonal_re(&self) -> [T; DIM] {
        [self.m[0][0].re, self.m[1][1].re, self.m[2][2].re, self.m[3][3].re]
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> [T; DIM] {
        hermitian_eigenvalues(self)
    }
}

impl<T> Index<(usize, usize)> for Mat4<T> {
    type Output = Complex<T>;
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.m[i][j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat4<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.m[i][j]
    }
}

impl<T: Real> Add for Mat4<T> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl<T: Real> AddAssign for Mat4<T> {
    fn add_assign(&mut self, rhs: Self) {
        for i in 0..DIM {
            for j in 0..DIM {
                self.m[i][j] = self.m[i][j] + rhs.m[i][j];
            }
        }
    }
}

impl<T: Real> Sub for Mat4<T> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for i in 0..DIM {
            for j in 0..DIM {
                self.m[i][j] = self.m[i][j] - rhs.m[i][j];
            }
        }
        self
    }
}

impl<T: Real> Mul<T> for Mat4<T> {
    type Output = Self;
    fn mul(self, rhs: T) -> Self {
        self.scale(rhs)
    }
}

/// Eigenvalues of a 4×4 Hermitian matrix.
///
/// The complex problem H = A + iB is embedded in the real symmetric
/// 8×8 matrix [[A, −B], [B, A]], whose spectrum is that of H with every
/// eigenvalue doubled; cyclic Jacobi rotations then diagonalize it.
pub fn hermitian_eigenvalues<T: Real>(h: &Mat4<T>) -> [T; DIM] {
    const N: usize = 2 * DIM;
    let h = h.hermitian_part();
    let mut a = [[T::zero(); N]; N];
    for i in 0..DIM {
        for j in 0..DIM {
            let z = h.m[i][j];
            a[i][j] = z.re;
            a[i + DIM][j + DIM] = z.re;
            a[i][j + DIM] = -z.im;
            a[i + DIM][j] = z.im;
        }
    }
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(T::zero(), |m, x| m.max(x.abs()));
    let tiny = T::epsilon() * T::epsilon() * scale.max(T::min_positive_value());
    for _sweep in 0..64 {
        let mut off = T::zero();
        for p in 0..N {
            for q in (p + 1)..N {
                off += a[p][q] * a[p][q];
            }
        }
        if off <= tiny * tiny {
            break;
        }
        for p in 0..N {
            for q in (p + 1)..N {
                if a[p][q].abs() <= tiny {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (T::lit(2.0) * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..N {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..N {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut diag: Vec<T> = (0..N).map(|i| a[i][i]).collect();
    diag.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    // Each eigenvalue appears twice; take the mean of every pair.
    let half = T::lit(0.5);
    [
        (diag[0] + diag[1]) * half,
        (diag[2] + diag[3]) * half,
        (diag[4] + diag[5]) * half,
        (diag[6] + diag[7]) * half,
    ]
}

/// Solves the dense real system `a · x = b` by Gauss-Jordan elimination with
/// partial pivoting. Returns `None` when the matrix is numerically singular.
pub fn solve_real<T: Real>(a: &[Vec<T>], b: &[T]) -> Option<Vec<T>> {
    let n = b.len();
    let mut aug: Vec<Vec<T>> = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| {
            let mut r = row.clone();
            r.push(bi);
            r
        })
        .collect();
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(T::zero(), |m, x| m.max(x.abs()));
    if scale == T::zero() {
        return None;
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            aug[i][col]
                .abs()
                .partial_cmp(&aug[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if aug[pivot][col].abs() <= scale * T::epsilon() * T::lit(16.0) {
            return None;
        }
        aug.swap(col, pivot);
        let p = aug[col][col];
        for v in aug[col].iter_mut() {
            *v /= p;
        }
        for row in 0..n {
            if row != col {
                let f = aug[row][col];
                if f != T::zero() {
                    for k in col..=n {
                        let delta = f * aug[col][k];
                        aug[row][k] -= delta;
                    }
                }
            }
        }
    }
    Some(aug.into_iter().map(|r| r[n]).collect())
}

/// Inverse of a dense real matrix, or `None` when singular.
pub fn invert_real<T: Real>(a: &[Vec<T>]) -> Option<Vec<Vec<T>>> {
    let n = a.len();
    let mut cols = Vec::with_capacity(n);
    for k in 0..n {
        let mut e = vec![T::zero(); n];
        e[k] = T::one();
        cols.push(solve_real(a, &e)?);
    }
    Some(
        (0..n)
            .map(|i| (0..n).map(|j| cols[j][i]).collect())
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn eigenvalues_of_diagonal_matrix() {
        let m = Mat4::<f64>::from_real_diagonal([0.3, -1.0, 2.0, 0.0]);
        let ev = m.hermitian_eigenvalues();
        let expect = [-1.0, 0.0, 0.3, 2.0];
        for (a, b) in ev.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn eigenvalues_of_pure_state_projector() {
        let s = 0.5_f64.sqrt();
        let psi = [c(s, 0.0), c(0.0, -s), c(0.0, 0.0), c(0.0, 0.0)];
        let ev = Mat4::outer(&psi).hermitian_eigenvalues();
        assert!((ev[3] - 1.0).abs() < 1e-12);
        for e in &ev[..3] {
            assert!(e.abs() < 1e-12);
        }
    }

    #[test]
    fn eigenvalues_of_complex_two_by_two_block() {
        // [[0, -i], [i, 0]] has eigenvalues ±1.
        let mut m = Mat4::<f64>::zeros();
        m[(1, 2)] = c(0.0, -1.0);
        m[(2, 1)] = c(0.0, 1.0);
        let ev = m.hermitian_eigenvalues();
        assert!((ev[0] + 1.0).abs() < 1e-12);
        assert!((ev[3] - 1.0).abs() < 1e-12);
        assert!(ev[1].abs() < 1e-12 && ev[2].abs() < 1e-12);
    }

    #[test]
    fn commutator_of_diagonal_matrices_vanishes() {
        let a = Mat4::from_real_diagonal([1.0, 2.0, 3.0, 4.0]);
        let b = Mat4::from_real_diagonal([-1.0, 0.5, 0.0, 9.0]);
        assert_eq!(a.commutator(&b).max_abs_diff(&Mat4::zeros()), 0.0);
    }

    #[test]
    fn solve_and_invert_small_system() {
        let a = vec![vec![4.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 2.0]];
        let x = solve_real(&a, &[1.0, 2.0, 3.0]).unwrap();
        for (i, row) in a.iter().enumerate() {
            let lhs: f64 = row.iter().zip(&x).map(|(p, q)| p * q).sum();
            assert!((lhs - [1.0, 2.0, 3.0][i]).abs() < 1e-12);
        }
        let inv = invert_real(&a).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| a[i][k] * inv[k][j]).sum();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        assert!(solve_real(&[vec![1.0, 2.0], vec![2.0, 4.0]], &[1.0, 1.0]).is_none());
    }
}
