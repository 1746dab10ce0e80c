//! Small dense linear algebra. Problem sizes here are a handful of nodes, so
//! everything is plain row-major storage and textbook algorithms.

use alloc::vec;
use alloc::vec::Vec;

pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub(crate) fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub(crate) fn max_abs_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
}

/// Dense row-major matrix.
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

    /// Builds a matrix from rows. Returns `None` if the rows are ragged.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], cols: usize) -> Option<Self> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != cols {
                return None;
            }
            data.extend_from_slice(row);
        }
        Some(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        self.iter_rows().map(|row| dot(row, x)).collect()
    }

    /// Returns a copy with columns reordered so that column `j` of the result
    /// is column `perm[j]` of `self`.
    pub fn permute_columns(&self, perm: &[usize]) -> Self {
        let mut out = Matrix::zeros(self.rows, perm.len());
        for i in 0..self.rows {
            for (j, &src) in perm.iter().enumerate() {
                out.set(i, j, self.get(i, src));
            }
        }
        out
    }

    /// Numerical rank via Gaussian elimination with full pivoting.
    pub fn rank(&self, tol: f64) -> usize {
        let mut a = self.clone();
        let (m, n) = (a.rows, a.cols);
        let mut rank = 0;
        let mut used_cols = vec![false; n];
        while rank < m {
            let mut best = (0.0, 0, 0);
            for i in rank..m {
                for j in 0..n {
                    if !used_cols[j] && a.get(i, j).abs() > best.0 {
                        best = (a.get(i, j).abs(), i, j);
                    }
                }
            }
            if best.0 <= tol {
                break;
            }
            let (_, pi, pj) = best;
            a.swap_rows(rank, pi);
            used_cols[pj] = true;
            let pivot = a.get(rank, pj);
            for i in 0..m {
                if i != rank {
                    let factor = a.get(i, pj) / pivot;
                    if factor != 0.0 {
                        for j in 0..n {
                            let v = a.get(i, j) - factor * a.get(rank, j);
                            a.set(i, j, v);
                        }
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    fn swap_rows(&mut self, i: usize, k: usize) {
        if i != k {
            for j in 0..self.cols {
                self.data.swap(i * self.cols + j, k * self.cols + j);
            }
        }
    }
}

/// LU factorization with partial pivoting of a square matrix.
pub(crate) struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    /// Factorizes `a`; returns `None` when a pivot falls below
    /// `rel_tol * max|a_ij|`.
    pub(crate) fn new(a: &[f64], n: usize, rel_tol: f64) -> Option<Self> {
        debug_assert_eq!(a.len(), n * n);
        let scale = max_abs(a);
        if scale == 0.0 {
            return None;
        }
        let mut lu = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            for i in k + 1..n {
                if lu[i * n + k].abs() > lu[p * n + k].abs() {
                    p = i;
                }
            }
            if lu[p * n + k].abs() <= rel_tol * scale {
                return None;
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let factor = lu[i * n + k] / pivot;
                lu[i * n + k] = factor;
                for j in k + 1..n {
                    lu[i * n + j] -= factor * lu[k * n + j];
                }
            }
        }
        Some(Lu { n, lu, perm })
    }

    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.lu[i * n + j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[i * n + j] * x[j];
            }
            x[i] /= self.lu[i * n + i];
        }
        x
    }

    /// Inverse as row-major `n x n` storage.
    pub(crate) fn inverse(&self) -> Vec<f64> {
        let n = self.n;
        let mut inv = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[i * n + j] = col[i];
            }
        }
        inv
    }
}

/// Orthogonal decomposition of the span of a set of constraint normals in
/// `R^n`: QR factorization of the `n x k` matrix whose columns are the
/// normals. The trailing `n - k` columns of `Q` span the null space.
pub(crate) struct ConstraintBasis {
    n: usize,
    k: usize,
    /// Full `n x n` orthogonal factor, row-major.
    q: Vec<f64>,
    /// Upper-triangular `k x k` factor, row-major.
    r: Vec<f64>,
}

impl ConstraintBasis {
    /// Householder QR of the normals. Returns `None` if they are linearly
    /// dependent (a diagonal entry of `R` below `tol` relative to the
    /// normal's length).
    pub(crate) fn new(normals: &[&[f64]], n: usize, tol: f64) -> Option<Self> {
        let k = normals.len();
        if k > n {
            return None;
        }
        // a: n x k, column j = normals[j]
        let mut a = vec![0.0; n * k];
        for (j, v) in normals.iter().enumerate() {
            for i in 0..n {
                a[i * k + j] = v[i];
            }
        }
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            q[i * n + i] = 1.0;
        }
        for j in 0..k {
            let col_norm = sqrt((0..n).map(|i| normals[j][i] * normals[j][i]).sum());
            let norm = sqrt((j..n).map(|i| a[i * k + j] * a[i * k + j]).sum());
            if norm <= tol * col_norm.max(1.0) {
                return None;
            }
            let alpha = if a[j * k + j] > 0.0 { -norm } else { norm };
            let mut v = vec![0.0; n];
            for i in j..n {
                v[i] = a[i * k + j];
            }
            v[j] -= alpha;
            let vnorm2: f64 = v[j..].iter().map(|x| x * x).sum();
            if vnorm2 > 0.0 {
                // A <- (I - 2vv'/v'v) A
                for c in j..k {
                    let s: f64 = (j..n).map(|i| v[i] * a[i * k + c]).sum::<f64>() * 2.0 / vnorm2;
                    for i in j..n {
                        a[i * k + c] -= s * v[i];
                    }
                }
                // Q <- Q (I - 2vv'/v'v)
                for row in 0..n {
                    let s: f64 = (j..n).map(|i| q[row * n + i] * v[i]).sum::<f64>() * 2.0 / vnorm2;
                    for i in j..n {
                        q[row * n + i] -= s * v[i];
                    }
                }
            }
        }
        let mut r = vec![0.0; k * k];
        for i in 0..k {
            for j in i..k {
                r[i * k + j] = a[i * k + j];
            }
        }
        Some(ConstraintBasis { n, k, q, r })
    }

    /// Orthonormal basis of the null space of the normals, as vectors.
    pub(crate) fn null_space(&self) -> Vec<Vec<f64>> {
        (self.k..self.n)
            .map(|j| (0..self.n).map(|i| self.q[i * self.n + j]).collect())
            .collect()
    }

    /// Least-squares coefficients `y` minimizing `|sum_j y_j normal_j - g|`.
    pub(crate) fn least_squares(&self, g: &[f64]) -> Vec<f64> {
        let (n, k) = (self.n, self.k);
        let mut y: Vec<f64> = (0..k)
            .map(|j| (0..n).map(|i| self.q[i * n + j] * g[i]).sum())
            .collect();
        for i in (0..k).rev() {
            for j in i + 1..k {
                y[i] -= self.r[i * k + j] * y[j];
            }
            y[i] /= self.r[i * k + i];
        }
        y
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns `(eigenvalues, eigenvectors)` with eigenvector `i` stored as
/// `vectors[i]`.
pub(crate) fn symmetric_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut a = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let norm = sqrt(a.iter().map(|x| x * x).sum());
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        if sqrt(off) <= 1e-15 * norm.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let values = (0..n).map(|i| a[i * n + i]).collect();
    let vectors = (0..n).map(|j| (0..n).map(|i| v[i * n + j]).collect()).collect();
    (values, vectors)
}

/// Calls `visit` with every `k`-subset of `0..m` in lexicographic order.
/// Stops early if `visit` returns `false`.
pub(crate) fn for_each_combination(m: usize, k: usize, mut visit: impl FnMut(&[usize]) -> bool) {
    if k > m {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        if !visit(&idx) {
            return;
        }
        let mut i = k;
        while i > 0 && idx[i - 1] == i - 1 + m - k {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        i -= 1;
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

pub(crate) fn binomial(m: usize, k: usize) -> u128 {
    if k > m {
        return 0;
    }
    let k = k.min(m - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (m - i) as u128 / (i + 1) as u128;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_small_system() {
        let a = [2.0, 1.0, 1.0, 3.0];
        let lu = Lu::new(&a, 2, 1e-12).unwrap();
        let x = lu.solve(&[3.0, 5.0]);
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn lu_rejects_singular() {
        assert!(Lu::new(&[1.0, 2.0, 2.0, 4.0], 2, 1e-12).is_none());
    }

    #[test]
    fn qr_null_space_is_orthogonal_to_normals() {
        let ones = [1.0, 1.0, 1.0];
        let other = [1.0, -1.0, 0.5];
        let basis = ConstraintBasis::new(&[&ones, &other], 3, 1e-12).unwrap();
        let null = basis.null_space();
        assert_eq!(null.len(), 1);
        assert!(dot(&null[0], &ones).abs() < 1e-14);
        assert!(dot(&null[0], &other).abs() < 1e-14);
        assert!((dot(&null[0], &null[0]) - 1.0).abs() < 1e-14);
        let y = basis.least_squares(&[2.0, 0.0, 1.5]);
        assert!((y[0] - 1.0).abs() < 1e-12 && (y[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn qr_detects_dependent_normals() {
        assert!(ConstraintBasis::new(&[&[1.0, 1.0], &[2.0, 2.0]], 2, 1e-12).is_none());
    }

    #[test]
    fn jacobi_recovers_eigenpairs() {
        let a = [2.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 0.0];
        let (vals, vecs) = symmetric_eigen(&a, 3);
        for (val, vec) in vals.iter().zip(&vecs) {
            let av: Vec<f64> = (0..3).map(|i| dot(&a[i * 3..i * 3 + 3], vec)).collect();
            for i in 0..3 {
                assert!((av[i] - val * vec[i]).abs() < 1e-12);
            }
        }
        let mut sorted = vals.clone();
        sorted.sort_by(f64::total_cmp);
        assert!((sorted[0]).abs() < 1e-14 && (sorted[1] - 1.0).abs() < 1e-14 && (sorted[2] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn combinations_are_lexicographic_and_complete() {
        let mut seen = Vec::new();
        for_each_combination(4, 2, |c| {
            seen.push((c[0], c[1]));
            true
        });
        assert_eq!(seen, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        assert_eq!(binomial(4, 2), 6);
        let mut count = 0;
        for_each_combination(3, 0, |c| {
            assert!(c.is_empty());
            count += 1;
            true
        });
        assert_eq!(count, 1);
    }

    #[test]
    fn rank_of_ptdf_like_matrix() {
        let m = Matrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]], 3).unwrap();
        assert_eq!(m.rank(1e-12), 2);
    }
}
