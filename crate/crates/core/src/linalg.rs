//! Small dense-matrix kernels: row-major matrices, one-sided Jacobi SVD and
//! cyclic Jacobi eigendecomposition for symmetric matrices.
//!
//! Everything here works on problems of a few hundred rows/columns at most,
//! so the implementations favour accuracy and determinism over speed.

use std::ops::Index;

/// Convergence tolerance for both Jacobi iterations.
const JACOBI_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Build from row slices. Panics on ragged input; callers validate first.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            assert_eq!(r.len(), ncols, "ragged row in Matrix::from_rows");
            data.extend_from_slice(r);
        }
        Matrix {
            rows: nrows,
            cols: ncols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    /// Row vector times matrix: returns `x · self`.
    pub fn left_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows, "left_mul_vec dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(self.row(i)) {
                *o += xi * v;
            }
        }
        out
    }

    /// Largest absolute entry of `self - other`.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `‖selfᵀ·self − I‖_max`, the departure from column orthonormality.
    pub fn orthogonality_error(&self) -> f64 {
        let gram = self.transpose().matmul(self);
        gram.max_abs_diff(&Matrix::identity(self.cols))
    }

    pub fn determinant(&self) -> f64 {
        assert_eq!(self.rows, self.cols, "determinant of non-square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut det = 1.0;
        for col in 0..n {
            let mut pivot = col;
            for r in col + 1..n {
                if a.get(r, col).abs() > a.get(pivot, col).abs() {
                    pivot = r;
                }
            }
            let p = a.get(pivot, col);
            if p == 0.0 {
                return 0.0;
            }
            if pivot != col {
                for j in 0..n {
                    let tmp = a.get(col, j);
                    a.set(col, j, a.get(pivot, j));
                    a.set(pivot, j, tmp);
                }
                det = -det;
            }
            det *= a.get(col, col);
            for r in col + 1..n {
                let f = a.get(r, col) / a.get(col, col);
                if f == 0.0 {
                    continue;
                }
                for j in col..n {
                    let v = a.get(r, j) - f * a.get(col, j);
                    a.set(r, j, v);
                }
            }
        }
        det
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

/// Singular value decomposition `A = U · diag(sigma) · Vᵀ`.
pub struct Svd {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

/// One-sided Jacobi SVD for an m×n matrix with m ≥ n.
///
/// Columns of the working copy are rotated pairwise until mutually
/// orthogonal; their norms become the singular values and the accumulated
/// rotations form V. Rank-deficient inputs are handled by completing the
/// null columns of U to an orthonormal basis so that U is always fully
/// orthogonal.
pub fn jacobi_svd(a: &Matrix) -> Svd {
    assert!(
        a.rows >= a.cols,
        "jacobi_svd expects at least as many rows as columns"
    );
    let m = a.rows;
    let n = a.cols;
    let mut b = a.clone();
    let mut v = Matrix::identity(n);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for i in 0..m {
                    let bp = b.get(i, p);
                    let bq = b.get(i, q);
                    alpha += bp * bp;
                    beta += bq * bq;
                    gamma += bp * bq;
                }
                if gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                // Rutishauser rotation annihilating the (p,q) column product.
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let bp = b.get(i, p);
                    let bq = b.get(i, q);
                    b.set(i, p, c * bp - s * bq);
                    b.set(i, q, s * bp + c * bq);
                }
                for i in 0..n {
                    let vp = v.get(i, p);
                    let vq = v.get(i, q);
                    v.set(i, p, c * vp - s * vq);
                    v.set(i, q, s * vp + c * vq);
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma: Vec<f64> = (0..n)
        .map(|j| (0..m).map(|i| b.get(i, j).powi(2)).sum::<f64>().sqrt())
        .collect();
    let sigma_max = sigma.iter().cloned().fold(0.0, f64::max);
    let null_tol = if sigma_max > 0.0 {
        sigma_max * 1e-13
    } else {
        0.0
    };

    let mut u = Matrix::zeros(m, n);
    let mut null_cols = Vec::new();
    for (j, sig) in sigma.iter_mut().enumerate() {
        if *sig > null_tol && *sig > 0.0 {
            for i in 0..m {
                u.set(i, j, b.get(i, j) / *sig);
            }
        } else {
            *sig = 0.0;
            null_cols.push(j);
        }
    }
    if !null_cols.is_empty() {
        complete_orthonormal(&mut u, &null_cols);
    }

    // Order singular values descending, permuting U and V consistently.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).unwrap().then(i.cmp(&j)));
    let mut u_s = Matrix::zeros(m, n);
    let mut v_s = Matrix::zeros(n, n);
    let mut sig_s = vec![0.0; n];
    for (dst, &src) in order.iter().enumerate() {
        sig_s[dst] = sigma[src];
        for i in 0..m {
            u_s.set(i, dst, u.get(i, src));
        }
        for i in 0..n {
            v_s.set(i, dst, v.get(i, src));
        }
    }

    Svd {
        u: u_s,
        sigma: sig_s,
        v: v_s,
    }
}

/// Fill the listed columns of `u` with unit vectors orthogonal to all other
/// columns, drawn deterministically from the standard basis.
fn complete_orthonormal(u: &mut Matrix, null_cols: &[usize]) {
    let m = u.rows;
    let n = u.cols;
    let mut filled: Vec<usize> = (0..n).filter(|j| !null_cols.contains(j)).collect();
    let mut basis = 0;
    for &col in null_cols {
        loop {
            assert!(basis < m, "orthonormal completion exhausted basis vectors");
            let mut cand = vec![0.0; m];
            cand[basis] = 1.0;
            basis += 1;
            // Two Gram-Schmidt passes keep the result orthogonal to 1e-14.
            for _ in 0..2 {
                for &j in &filled {
                    let dot: f64 = (0..m).map(|i| cand[i] * u.get(i, j)).sum();
                    for (i, c) in cand.iter_mut().enumerate() {
                        *c -= dot * u.get(i, j);
                    }
                }
            }
            let norm = cand.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-6 {
                for (i, c) in cand.iter().enumerate() {
                    u.set(i, col, c / norm);
                }
                filled.push(col);
                break;
            }
        }
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// matrix columns.
pub fn jacobi_eigh(a: &Matrix) -> (Vec<f64>, Matrix) {
    assert_eq!(a.rows, a.cols, "jacobi_eigh expects a square matrix");
    let n = a.rows;
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let scale = (0..n)
        .map(|i| m.get(i, i).abs())
        .fold(0.0, f64::max)
        .max(m.frobenius_norm() / (n as f64).max(1.0))
        .max(f64::MIN_POSITIVE);

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                off = off.max(m.get(p, q).abs());
            }
        }
        if off <= JACOBI_TOL * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq.abs() <= JACOBI_TOL * scale {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;

                for i in 0..n {
                    let mip = m.get(i, p);
                    let miq = m.get(i, q);
                    m.set(i, p, c * mip - s * miq);
                    m.set(i, q, s * mip + c * miq);
                }
                for j in 0..n {
                    let mpj = m.get(p, j);
                    let mqj = m.get(q, j);
                    m.set(p, j, c * mpj - s * mqj);
                    m.set(q, j, s * mpj + c * mqj);
                }
                for i in 0..n {
                    let vip = v.get(i, p);
                    let viq = v.get(i, q);
                    v.set(i, p, c * vip - s * viq);
                    v.set(i, q, s * vip + c * viq);
                }
            }
        }
    }

    let eigvals: Vec<f64> = (0..n).map(|i| m.get(i, i)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eigvals[j].partial_cmp(&eigvals[i]).unwrap().then(i.cmp(&j)));
    let mut vals = vec![0.0; n];
    let mut vecs = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vals[dst] = eigvals[src];
        for i in 0..n {
            vecs.set(i, dst, v.get(i, src));
        }
    }
    (vals, vecs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let i = Matrix::identity(2);
        assert_eq!(a.matmul(&i), a);
        assert_eq!(i.matmul(&a), a);
    }

    #[test]
    fn transpose_roundtrip() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        assert_eq!(a.transpose().transpose(), a);
    }

    #[test]
    fn left_mul_vec_matches_matmul() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let x = vec![5.0, 7.0];
        assert_eq!(a.left_mul_vec(&x), vec![5.0 + 21.0, 10.0 + 28.0]);
    }

    #[test]
    fn determinant_of_rotation_is_one() {
        let th = 0.7f64;
        let r = Matrix::from_rows(&[vec![th.cos(), th.sin()], vec![-th.sin(), th.cos()]]);
        assert!((r.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn svd_reconstructs_input() {
        let a = Matrix::from_rows(&[
            vec![3.0, 1.0, 0.5],
            vec![-1.0, 2.0, 0.0],
            vec![0.25, -0.5, 1.5],
        ]);
        let svd = jacobi_svd(&a);
        let mut sig = Matrix::zeros(3, 3);
        for i in 0..3 {
            sig.set(i, i, svd.sigma[i]);
        }
        let back = svd.u.matmul(&sig).matmul(&svd.v.transpose());
        assert!(back.max_abs_diff(&a) < 1e-10);
        assert!(svd.u.orthogonality_error() < 1e-10);
        assert!(svd.v.orthogonality_error() < 1e-10);
        assert!(svd.sigma.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn svd_handles_rank_deficiency() {
        // Rank-1 matrix: second and third columns are multiples of the first.
        let a = Matrix::from_rows(&[
            vec![1.0, 2.0, 3.0],
            vec![2.0, 4.0, 6.0],
            vec![-1.0, -2.0, -3.0],
        ]);
        let svd = jacobi_svd(&a);
        assert!(svd.u.orthogonality_error() < 1e-10);
        assert!(svd.v.orthogonality_error() < 1e-10);
        assert_eq!(svd.sigma.iter().filter(|s| **s > 1e-10).count(), 1);
    }

    #[test]
    fn eigh_known_2x2() {
        // Eigenvalues of [[2,1],[1,2]] are 3 and 1.
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let (vals, vecs) = jacobi_eigh(&a);
        assert!((vals[0] - 3.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        assert!((vecs.get(0, 0).abs() - inv_sqrt2).abs() < 1e-12);
        assert!((vecs.get(1, 0).abs() - inv_sqrt2).abs() < 1e-12);
    }

    #[test]
    fn eigh_reconstructs_symmetric_input() {
        let a = Matrix::from_rows(&[
            vec![4.0, 1.0, -0.5],
            vec![1.0, 3.0, 0.25],
            vec![-0.5, 0.25, 2.0],
        ]);
        let (vals, vecs) = jacobi_eigh(&a);
        let mut lam = Matrix::zeros(3, 3);
        for (i, v) in vals.iter().enumerate() {
            lam.set(i, i, *v);
        }
        let back = vecs.matmul(&lam).matmul(&vecs.transpose());
        assert!(back.max_abs_diff(&a) < 1e-10);
        assert!(vecs.orthogonality_error() < 1e-10);
    }
}
