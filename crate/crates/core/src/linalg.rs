//! Thin helpers over `faer` dense matrices.

use faer::Mat;

use crate::C64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub type CMat = Mat<C64>;

pub fn zeros(rows: usize, cols: usize) -> CMat {
    Mat::zeros(rows, cols)
}

pub fn identity(n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}

pub fn adjoint(m: &CMat) -> CMat {
    Mat::from_fn(m.ncols(), m.nrows(), |i, j| m[(j, i)].conj())
}

pub fn transpose(m: &CMat) -> CMat {
    Mat::from_fn(m.ncols(), m.nrows(), |i, j| m[(j, i)])
}

pub fn conj(m: &CMat) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].conj())
}

pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    a * b
}

pub fn scale(m: &CMat, s: C64) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s)
}

pub fn add(a: &CMat, b: &CMat) -> CMat {
    a + b
}

pub fn sub(a: &CMat, b: &CMat) -> CMat {
    a - b
}

pub fn trace(m: &CMat) -> C64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

pub fn max_abs(m: &CMat) -> f64 {
    let mut out = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out = out.max(m[(i, j)].norm());
        }
    }
    out
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut out = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            out = out.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    out
}

/// Kronecker product `a (x) b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Zeroes entries below `tol` in modulus and snaps tiny real/imag parts.
pub fn chop(m: &mut CMat, tol: f64) {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let mut z = m[(i, j)];
            if z.re.abs() < tol {
                z.re = 0.0;
            }
            if z.im.abs() < tol {
                z.im = 0.0;
            }
            m[(i, j)] = z;
        }
    }
}

pub fn hermitian_part(m: &CMat) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_hermitian_eigenvalue(m: &CMat) -> f64 {
    let h = hermitian_part(m);
    h.self_adjoint_eigenvalues(faer::Side::Lower)
        .map(|ev| ev.into_iter().fold(f64::INFINITY, f64::min))
        .unwrap_or(f64::NAN)
}

/// Column-stacked vectorisation: element (i, j) goes to `j * rows + i`.
pub fn vec_col(m: &CMat) -> Vec<C64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn unvec_col(v: &[C64], rows: usize) -> CMat {
    assert_eq!(v.len() % rows, 0);
    Mat::from_fn(rows, v.len() / rows, |i, j| v[j * rows + i])
}

/// Coordinate-list sparse matrix for cheap repeated products.
#[derive(Debug, Clone, Default)]
pub struct SparseMat {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, C64)>,
}

impl SparseMat {
    pub fn from_dense(m: &CMat) -> Self {
        let mut entries = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let z = m[(i, j)];
                if z != ZERO {
                    entries.push((i, j, z));
                }
            }
        }
        Self { rows: m.nrows(), cols: m.ncols(), entries }
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// `out += s * self * x`
    pub fn mul_vec_acc(&self, s: C64, x: &[C64], out: &mut [C64]) {
        for &(i, j, v) in &self.entries {
            out[i] += s * v * x[j];
        }
    }

    /// `out += s * self * x` for a dense matrix `x`.
    pub fn mul_left_acc(&self, s: C64, x: &CMat, out: &mut CMat) {
        for &(i, k, v) in &self.entries {
            let sv = s * v;
            for j in 0..x.ncols() {
                out[(i, j)] += sv * x[(k, j)];
            }
        }
    }

    /// `out += s * x * self` for a dense matrix `x`.
    pub fn mul_right_acc(&self, s: C64, x: &CMat, out: &mut CMat) {
        for &(k, j, v) in &self.entries {
            let sv = s * v;
            for i in 0..x.nrows() {
                out[(i, j)] += sv * x[(i, k)];
            }
        }
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = zeros(self.rows, self.cols);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_matches_definition() {
        let a = Mat::from_fn(2, 2, |i, j| C64::new((i * 2 + j) as f64, 0.0));
        let b = Mat::from_fn(2, 2, |i, j| C64::new(0.0, (i + 3 * j) as f64));
        let k = kron(&a, &b);
        assert_eq!(k[(3, 2)], a[(1, 1)] * b[(1, 0)]);
        assert_eq!(k[(1, 2)], a[(0, 1)] * b[(1, 0)]);
    }

    #[test]
    fn vec_roundtrip() {
        let a = Mat::from_fn(3, 3, |i, j| C64::new(i as f64, j as f64));
        let v = vec_col(&a);
        assert_eq!(v[1], a[(1, 0)]);
        assert_eq!(unvec_col(&v, 3), a);
    }

    #[test]
    fn sparse_products_match_dense() {
        let a = Mat::from_fn(3, 3, |i, j| if (i + j) % 2 == 0 { C64::new(1.0 + i as f64, j as f64) } else { ZERO });
        let x = Mat::from_fn(3, 3, |i, j| C64::new(0.5 * i as f64 - j as f64, 1.0));
        let sa = SparseMat::from_dense(&a);
        let mut left = zeros(3, 3);
        sa.mul_left_acc(ONE, &x, &mut left);
        let mut right = zeros(3, 3);
        sa.mul_right_acc(ONE, &x, &mut right);
        assert!(max_abs_diff(&left, &(&a * &x)) < 1e-14);
        assert!(max_abs_diff(&right, &(&x * &a)) < 1e-14);
    }
}
