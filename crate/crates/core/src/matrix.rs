//! Dense square matrices, symmetric eigendecomposition and spectrum-constrained
//! random SPD generation.
//!
//! Everything here is small and dense: dimensions stay well under a few hundred,
//! so plain row-major `Vec<f64>` storage and a cyclic Jacobi eigensolver are
//! enough.

use crate::error::{Error, Result};
use crate::rng;

const JACOBI_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 100;
const SPD_INVERSE_FLOOR: f64 = 1e-12;

/// Dense square matrix, row-major. Not necessarily symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn from_rows(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("matrix dimension must be at least 1".into()));
        }
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: data.len() });
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn transpose(&self) -> Self {
        let n = self.dim;
        let mut t = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                t.data[j * n + i] = self.data[i * n + j];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        check_dim(self.dim, other.dim)?;
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            let row = &self.data[i * n..(i + 1) * n];
            let dst = &mut out.data[i * n..(i + 1) * n];
            for (k, &a) in row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let src = &other.data[k * n..(k + 1) * n];
                for (d, &b) in dst.iter_mut().zip(src) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        check_dim(self.dim, other.dim)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self { dim: self.dim, data })
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        check_dim(self.dim, other.dim)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { dim: self.dim, data })
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Self { dim: self.dim, data: self.data.iter().map(|a| a * s).collect() }
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, v.len())?;
        let n = self.dim;
        Ok((0..n).map(|i| dot(&self.data[i * n..(i + 1) * n], v)).collect())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    /// Largest singular value, via the eigenvalues of `MᵀM`.
    pub fn spectral_norm(&self) -> Result<f64> {
        let gram = SymmetricMatrix::from_matrix(&self.transpose().matmul(self)?);
        let eig = gram.eigh()?;
        Ok(eig.max().max(0.0).sqrt())
    }

    /// Symmetric part `(M + Mᵀ)/2`.
    pub fn symmetrize(&self) -> SymmetricMatrix {
        SymmetricMatrix::from_matrix(self)
    }
}

/// Real symmetric matrix. Entries are symmetrized at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix(Matrix);

impl SymmetricMatrix {
    /// Builds from row-major entries, replacing the input with its symmetric part.
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        Ok(Self::from_matrix(&Matrix::from_rows(dim, entries)?))
    }

    pub fn from_matrix(m: &Matrix) -> Self {
        let n = m.dim;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            out.data[i * n + i] = m.data[i * n + i];
            for j in 0..i {
                let v = 0.5 * (m.data[i * n + j] + m.data[j * n + i]);
                out.data[i * n + j] = v;
                out.data[j * n + i] = v;
            }
        }
        Self(out)
    }

    /// Builds from the lower triangle, row by row: `a00, a10, a11, a20, ...`.
    pub fn from_lower_triangle(dim: usize, lower: &[f64]) -> Result<Self> {
        let expected = dim * (dim + 1) / 2;
        if dim == 0 {
            return Err(Error::InvalidInput("matrix dimension must be at least 1".into()));
        }
        if lower.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: lower.len() });
        }
        let mut m = Matrix::zeros(dim);
        let mut idx = 0;
        for i in 0..dim {
            for j in 0..=i {
                m.set(i, j, lower[idx]);
                m.set(j, i, lower[idx]);
                idx += 1;
            }
        }
        Ok(Self(m))
    }

    pub fn lower_triangle(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in 0..=i {
                out.push(self.get(i, j));
            }
        }
        out
    }

    pub fn identity(dim: usize) -> Self {
        Self(Matrix::identity(dim))
    }

    pub fn scaled_identity(dim: usize, s: f64) -> Self {
        Self(Matrix::identity(dim).scale(s))
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        Self(m)
    }

    /// `V diag(values) Vᵀ` for an orthonormal column set `V`.
    pub fn from_spectrum(vectors: &Matrix, values: &[f64]) -> Result<Self> {
        check_dim(vectors.dim(), values.len())?;
        let n = values.len();
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = 0.0;
                for (k, &lam) in values.iter().enumerate() {
                    s += vectors.get(i, k) * lam * vectors.get(j, k);
                }
                out.set(i, j, s);
                out.set(j, i, s);
            }
        }
        Ok(Self(out))
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn add(&self, other: &SymmetricMatrix) -> Result<SymmetricMatrix> {
        Ok(Self(self.0.add(&other.0)?))
    }

    pub fn sub(&self, other: &SymmetricMatrix) -> Result<SymmetricMatrix> {
        Ok(Self(self.0.sub(&other.0)?))
    }

    pub fn scale(&self, s: f64) -> SymmetricMatrix {
        Self(self.0.scale(s))
    }

    pub fn add_identity(&self, s: f64) -> SymmetricMatrix {
        let mut m = self.0.clone();
        for i in 0..m.dim {
            let v = m.get(i, i) + s;
            m.set(i, i, v);
        }
        Self(m)
    }

    /// General product; not symmetric unless the factors commute.
    pub fn matmul(&self, other: &SymmetricMatrix) -> Result<Matrix> {
        self.0.matmul(&other.0)
    }

    /// Product of two commuting symmetric matrices, re-symmetrized.
    pub fn mul_commuting(&self, other: &SymmetricMatrix) -> Result<SymmetricMatrix> {
        Ok(Self::from_matrix(&self.0.matmul(&other.0)?))
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.0.matvec(v)
    }

    pub fn quadratic_form(&self, v: &[f64]) -> Result<f64> {
        Ok(dot(v, &self.matvec(v)?))
    }

    pub fn is_finite(&self) -> bool {
        self.0.data.iter().all(|v| v.is_finite())
    }

    /// `‖AB − BA‖_F`.
    pub fn commutator_norm(&self, other: &SymmetricMatrix) -> Result<f64> {
        let ab = self.0.matmul(&other.0)?;
        let ba = other.0.matmul(&self.0)?;
        Ok(ab.sub(&ba)?.frobenius_norm())
    }

    /// Symmetric eigendecomposition by cyclic Jacobi rotations.
    pub fn eigh(&self) -> Result<EigenDecomposition> {
        if !self.is_finite() {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        let n = self.dim();
        let mut a = self.0.data.clone();
        let mut v = Matrix::identity(n).data;
        let threshold = JACOBI_TOL * self.0.frobenius_norm();

        for _ in 0..JACOBI_MAX_SWEEPS {
            let off = off_diagonal_norm(&a, n);
            if off <= threshold {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    if apq == 0.0 {
                        continue;
                    }
                    let app = a[p * n + p];
                    let aqq = a[q * n + q];
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
                    let c = 1.0 / t.hypot(1.0);
                    let s = t * c;
                    rotate(&mut a, &mut v, n, p, q, c, s);
                }
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
        let eigenvalues: Vec<f64> = order.iter().map(|&i| a[i * n + i]).collect();
        let mut vectors = Matrix::zeros(n);
        for (col, &src) in order.iter().enumerate() {
            for row in 0..n {
                vectors.set(row, col, v[row * n + src]);
            }
        }
        Ok(EigenDecomposition { eigenvalues, eigenvectors: vectors })
    }

    /// Inverse of a symmetric positive definite matrix, via its spectrum.
    pub fn inverse_spd(&self) -> Result<SymmetricMatrix> {
        let eig = self.eigh()?;
        let lambda_min = eig.min();
        if lambda_min <= SPD_INVERSE_FLOOR {
            return Err(Error::Singular { lambda_min });
        }
        let inv: Vec<f64> = eig.eigenvalues.iter().map(|l| 1.0 / l).collect();
        SymmetricMatrix::from_spectrum(&eig.eigenvectors, &inv)
    }

    /// Solves `A x = b` by Cholesky factorization. The positivity test is
    /// relative to the largest diagonal entry, so uniformly tiny but well
    /// conditioned systems still solve.
    pub fn solve_spd(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        check_dim(n, b.len())?;
        let scale = (0..n).map(|i| self.get(i, i).abs()).fold(0.0, f64::max);
        let singular = || {
            let lambda_min = self.eigh().map(|e| e.min()).unwrap_or(f64::NAN);
            Error::Singular { lambda_min }
        };
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(singular());
        }
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = self.get(j, j);
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if d <= 1e-15 * scale {
                return Err(singular());
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            for i in (j + 1)..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= l[i * n + k] * y[k];
            }
            y[i] = s / l[i * n + i];
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= l[k * n + i] * x[k];
            }
            x[i] = s / l[i * n + i];
        }
        Ok(x)
    }
}

fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i * n + j] * a[i * n + j];
            }
        }
    }
    s.sqrt()
}

/// Applies `A ← JᵀAJ` and `V ← VJ` for the Givens rotation in the (p, q) plane.
fn rotate(a: &mut [f64], v: &mut [f64], n: usize, p: usize, q: usize, c: f64, s: f64) {
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
    a[p * n + q] = 0.0;
    a[q * n + p] = 0.0;
    for k in 0..n {
        let vkp = v[k * n + p];
        let vkq = v[k * n + q];
        v[k * n + p] = c * vkp - s * vkq;
        v[k * n + q] = s * vkp + c * vkq;
    }
}

/// Eigenvalues in ascending order with matching orthonormal eigenvector columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

impl EigenDecomposition {
    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    /// `V Λ Vᵀ`.
    pub fn reconstruct(&self) -> SymmetricMatrix {
        SymmetricMatrix::from_spectrum(&self.eigenvectors, &self.eigenvalues)
            .expect("decomposition dimensions are consistent")
    }

    /// Same eigenvectors, eigenvalues mapped through `f`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> EigenDecomposition {
        EigenDecomposition {
            eigenvalues: self.eigenvalues.iter().map(|&l| f(l)).collect(),
            eigenvectors: self.eigenvectors.clone(),
        }
    }
}

/// Smoothness/strong-convexity bounds `mu ≤ λ(A_i) ≤ ell` and the center radius `‖c_i‖ ≤ c_radius`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SpectrumBounds {
    pub mu: f64,
    pub ell: f64,
    pub c_radius: f64,
}

impl SpectrumBounds {
    pub fn new(mu: f64, ell: f64, c_radius: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite() && ell.is_finite() && mu <= ell) {
            return Err(Error::InvalidInput(format!(
                "spectrum bounds need 0 < mu <= ell, got mu={mu}, ell={ell}"
            )));
        }
        if !(c_radius >= 0.0 && c_radius.is_finite()) {
            return Err(Error::InvalidInput(format!("center radius must be >= 0, got {c_radius}")));
        }
        Ok(Self { mu, ell, c_radius })
    }

    pub fn condition_number(&self) -> f64 {
        self.ell / self.mu
    }
}

/// Random SPD matrix `β₁BᵀB + β₂I` with Gaussian `B`, scaled so its extreme
/// eigenvalues are exactly `mu` and `ell`.
pub fn random_spd_with_spectrum(dim: usize, bounds: &SpectrumBounds, seed: u64) -> Result<SymmetricMatrix> {
    Ok(random_spd_decomposed(dim, bounds, &mut rng::seeded(seed))?.0)
}

/// As [`random_spd_with_spectrum`], drawing from a caller-owned stream and
/// also returning the eigendecomposition (shared with `BᵀB`).
pub fn random_spd_decomposed(
    dim: usize,
    bounds: &SpectrumBounds,
    stream: &mut rng::Stream,
) -> Result<(SymmetricMatrix, EigenDecomposition)> {
    if dim == 0 {
        return Err(Error::InvalidInput("dimension must be at least 1".into()));
    }
    let (mu, ell) = (bounds.mu, bounds.ell);
    if dim == 1 && mu != ell {
        return Err(Error::InfeasibleSpectrum(format!(
            "a 1x1 matrix has a single eigenvalue; mu={mu} and ell={ell} differ"
        )));
    }
    let b = Matrix::from_rows(dim, rng::standard_normal_vec(stream, dim * dim))?;
    let gram = SymmetricMatrix::from_matrix(&b.transpose().matmul(&b)?);
    let eig = gram.eigh()?;
    let spread = eig.max() - eig.min();
    if mu == ell || spread < 1e-12 {
        let eig = EigenDecomposition {
            eigenvalues: vec![mu; dim],
            eigenvectors: Matrix::identity(dim),
        };
        return Ok((SymmetricMatrix::scaled_identity(dim, mu), eig));
    }
    let beta1 = (ell - mu) / spread;
    let beta2 = mu - beta1 * eig.min();
    let a = gram.scale(beta1).add_identity(beta2);
    let mut mapped = eig.map_spectrum(|l| beta1 * l + beta2);
    // Pin the extremes; the affine map is exact up to rounding.
    mapped.eigenvalues[0] = mu;
    mapped.eigenvalues[dim - 1] = ell;
    Ok((a, mapped))
}

/// Random orthonormal basis (eigenvectors of a Gaussian symmetric matrix).
pub fn random_orthonormal(dim: usize, stream: &mut rng::Stream) -> Result<Matrix> {
    let g = Matrix::from_rows(dim, rng::standard_normal_vec(stream, dim * dim))?;
    Ok(g.symmetrize().eigh()?.eigenvectors)
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm, scaled so that neither tiny nor huge entries under- or
/// overflow when squared.
pub fn norm(a: &[f64]) -> f64 {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * a.iter().map(|v| (v / scale) * (v / scale)).sum::<f64>().sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    norm(&sub(a, b))
}

/// `y ← y + s·x`.
pub fn axpy(y: &mut [f64], s: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn random_symmetric(dim: usize, seed: u64) -> SymmetricMatrix {
        let g = rng::standard_normal_vec(&mut rng::seeded(seed), dim * dim);
        SymmetricMatrix::new(dim, g).unwrap()
    }

    fn random_spd(dim: usize, seed: u64) -> SymmetricMatrix {
        let b = Matrix::from_rows(dim, rng::standard_normal_vec(&mut rng::seeded(seed), dim * dim)).unwrap();
        SymmetricMatrix::from_matrix(&b.transpose().matmul(&b).unwrap()).add_identity(0.5)
    }

    #[test]
    fn eigh_identity() {
        let e = SymmetricMatrix::identity(3).eigh().unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn eigh_diagonal_sorted_with_basis_vectors() {
        let e = SymmetricMatrix::diagonal(&[4.0, 1.0]).eigh().unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 4.0]);
        assert_eq!(e.eigenvectors.get(1, 0).abs(), 1.0);
        assert_eq!(e.eigenvectors.get(0, 1).abs(), 1.0);
        assert_eq!(e.eigenvectors.get(0, 0), 0.0);
    }

    #[test]
    fn eigh_reconstructs_and_is_orthonormal() {
        for seed in 0..10 {
            let a = random_symmetric(5, seed);
            let e = a.eigh().unwrap();
            assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
            let err = e.reconstruct().sub(&a).unwrap().as_matrix().spectral_norm().unwrap();
            let scale = 1.0 + a.as_matrix().spectral_norm().unwrap();
            assert!(err <= 1e-10 * scale, "reconstruction error {err}");
            let v = &e.eigenvectors;
            let gram = v.transpose().matmul(v).unwrap();
            let dev = gram.sub(&Matrix::identity(5)).unwrap().spectral_norm().unwrap();
            assert!(dev <= 1e-10, "orthonormality {dev}");
        }
    }

    #[test]
    fn eigh_rejects_non_finite() {
        let a = SymmetricMatrix::diagonal(&[1.0, f64::NAN]);
        assert!(matches!(a.eigh(), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn eigh_rotation_invariant() {
        let a = random_symmetric(6, 3);
        let q = random_orthonormal(6, &mut rng::seeded(99)).unwrap();
        let rotated = q.transpose().matmul(a.as_matrix()).unwrap().matmul(&q).unwrap();
        let e1 = a.eigh().unwrap().eigenvalues;
        let e2 = rotated.symmetrize().eigh().unwrap().eigenvalues;
        for (x, y) in e1.iter().zip(&e2) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-9);
        }
    }

    #[test]
    fn inverse_spd_examples() {
        assert_eq!(SymmetricMatrix::identity(2).inverse_spd().unwrap(), SymmetricMatrix::identity(2));
        let inv = SymmetricMatrix::diagonal(&[4.0, 1.0]).inverse_spd().unwrap();
        assert_abs_diff_eq!(inv.get(0, 0), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(inv.get(1, 1), 1.0, epsilon = 1e-15);
        assert_eq!(inv.get(0, 1), 0.0);
    }

    #[test]
    fn inverse_spd_residual() {
        let a = random_spd(6, 5);
        let prod = a.matmul(&a.inverse_spd().unwrap()).unwrap();
        let err = prod.sub(&Matrix::identity(6)).unwrap().spectral_norm().unwrap();
        assert!(err < 1e-10, "residual {err}");
    }

    #[test]
    fn inverse_spd_reports_lambda_min() {
        let a = SymmetricMatrix::diagonal(&[1.0, 1e-14]);
        match a.inverse_spd() {
            Err(Error::Singular { lambda_min }) => assert_eq!(lambda_min, 1e-14),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn solve_spd_matches_inverse() {
        let a = random_spd(7, 8);
        let b: Vec<f64> = (0..7).map(|i| i as f64 - 3.0).collect();
        let x1 = a.solve_spd(&b).unwrap();
        let x2 = a.inverse_spd().unwrap().matvec(&b).unwrap();
        assert!(distance(&x1, &x2) < 1e-9);
        assert!(matches!(
            SymmetricMatrix::diagonal(&[1.0, -1.0]).solve_spd(&[1.0, 1.0]),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let a = SymmetricMatrix::identity(2);
        let b = SymmetricMatrix::identity(3);
        assert!(matches!(a.add(&b), Err(Error::DimensionMismatch { expected: 2, found: 3 })));
        assert!(a.matvec(&[1.0]).is_err());
    }

    #[test]
    fn commuting_product_is_symmetric() {
        let a = random_spd(4, 1);
        let e = a.eigh().unwrap();
        let b = SymmetricMatrix::from_spectrum(&e.eigenvectors, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let p = a.mul_commuting(&b).unwrap();
        let raw = a.matmul(&b).unwrap();
        assert!(raw.sub(p.as_matrix()).unwrap().frobenius_norm() < 1e-10);
    }

    #[test]
    fn lower_triangle_roundtrip() {
        let a = random_symmetric(4, 2);
        let back = SymmetricMatrix::from_lower_triangle(4, &a.lower_triangle()).unwrap();
        assert_eq!(a, back);
    }

    #[test]
    fn random_spd_collapsed_spectrum() {
        let b = SpectrumBounds::new(3.0, 3.0, 1.0).unwrap();
        assert_eq!(random_spd_with_spectrum(4, &b, 1).unwrap(), SymmetricMatrix::scaled_identity(4, 3.0));
    }

    #[test]
    fn random_spd_hits_extremes() {
        let b = SpectrumBounds::new(1.0, 10.0, 1.0).unwrap();
        let a = random_spd_with_spectrum(5, &b, 42).unwrap();
        let e = a.eigh().unwrap();
        assert!((e.min() - 1.0).abs() <= 1e-9, "{}", e.min());
        assert!((e.max() - 10.0).abs() <= 1e-9, "{}", e.max());
    }

    #[test]
    fn random_spd_deterministic() {
        let b = SpectrumBounds::new(0.5, 4.0, 1.0).unwrap();
        let a1 = random_spd_with_spectrum(6, &b, 17).unwrap();
        let a2 = random_spd_with_spectrum(6, &b, 17).unwrap();
        assert_eq!(a1.as_matrix().as_slice(), a2.as_matrix().as_slice());
        assert_ne!(a1, random_spd_with_spectrum(6, &b, 18).unwrap());
    }

    #[test]
    fn random_spd_one_dimensional_needs_equal_bounds() {
        let b = SpectrumBounds::new(1.0, 2.0, 1.0).unwrap();
        assert!(matches!(random_spd_with_spectrum(1, &b, 0), Err(Error::InfeasibleSpectrum(_))));
        let b = SpectrumBounds::new(2.0, 2.0, 1.0).unwrap();
        assert_eq!(random_spd_with_spectrum(1, &b, 0).unwrap().get(0, 0), 2.0);
    }

    #[test]
    fn spectrum_bounds_validation() {
        assert!(SpectrumBounds::new(0.0, 1.0, 1.0).is_err());
        assert!(SpectrumBounds::new(2.0, 1.0, 1.0).is_err());
        assert!(SpectrumBounds::new(1.0, 1.0, -1.0).is_err());
    }
}
