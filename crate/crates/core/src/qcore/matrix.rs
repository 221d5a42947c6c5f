//! Dense complex matrices and the JSON matrix literal.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense complex matrix. All operators in the toolkit are at most 16×16.
pub type CMat = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

pub fn zeros(r: usize, c: usize) -> CMat {
    CMat::zeros(r, c)
}

/// Build a matrix from row-major real entries.
pub fn from_real_rows(rows: &[&[f64]]) -> CMat {
    let r = rows.len();
    let cols = rows.first().map_or(0, |x| x.len());
    CMat::from_fn(r, cols, |i, j| c(rows[i][j], 0.0))
}

/// Build a matrix from row-major complex entries.
pub fn from_rows(rows: &[&[Complex64]]) -> CMat {
    let r = rows.len();
    let cols = rows.first().map_or(0, |x| x.len());
    CMat::from_fn(r, cols, |i, j| rows[i][j])
}

pub fn diag(values: &[f64]) -> CMat {
    let d = values.len();
    CMat::from_fn(d, d, |i, j| if i == j { c(values[i], 0.0) } else { ZERO })
}

/// |v⟩⟨v| for a (not necessarily normalised) vector.
pub fn outer(v: &[Complex64]) -> CMat {
    let d = v.len();
    CMat::from_fn(d, d, |i, j| v[i] * v[j].conj())
}

/// |a⟩⟨b|.
pub fn ketbra(a: &[Complex64], b: &[Complex64]) -> CMat {
    CMat::from_fn(a.len(), b.len(), |i, j| a[i] * b[j].conj())
}

pub fn basis_vector(d: usize, k: usize) -> Vec<Complex64> {
    let mut v = vec![ZERO; d];
    v[k] = ONE;
    v
}

pub fn column(m: &CMat, j: usize) -> Vec<Complex64> {
    m.column(j).iter().copied().collect()
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn kron_all(factors: &[CMat]) -> CMat {
    let mut out = CMat::identity(1, 1);
    for f in factors {
        out = out.kronecker(f);
    }
    out
}

pub fn trace(m: &CMat) -> Complex64 {
    m.diagonal().iter().sum()
}

/// Re Tr(A B) without forming the product.
pub fn trace_product_re(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}

/// Largest absolute entry.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn hermiticity_defect(m: &CMat) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// (M + M†)/2.
pub fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()) * c(0.5, 0.0)
}

pub fn scale(m: &CMat, s: f64) -> CMat {
    m * c(s, 0.0)
}

/// Largest absolute off-diagonal entry.
pub fn max_off_diagonal(m: &CMat) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j {
                worst = worst.max(m[(i, j)].norm());
            }
        }
    }
    worst
}

/// Largest absolute imaginary part.
pub fn max_imag(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.im.abs()))
}

/// Entrywise real part, as a complex matrix.
pub fn real_part(m: &CMat) -> CMat {
    m.map(|z| c(z.re, 0.0))
}

/// Keep only the diagonal.
pub fn diagonal_part(m: &CMat) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| if i == j { m[(i, j)] } else { ZERO })
}

/// Unitarity defect ‖U†U − I‖_max.
pub fn unitarity_defect(u: &CMat) -> f64 {
    let n = u.ncols();
    max_abs(&(u.adjoint() * u - identity(n)))
}

/// JSON matrix literal: `{dim, re, im}` with row-major entries.
///
/// `im` may be omitted for real matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixLiteral {
    pub dim: usize,
    pub re: Vec<f64>,
    #[serde(default)]
    pub im: Vec<f64>,
}

impl MatrixLiteral {
    pub fn from_matrix(m: &CMat) -> Self {
        let d = m.nrows();
        let mut re = Vec::with_capacity(d * d);
        let mut im = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..m.ncols() {
                re.push(m[(i, j)].re);
                im.push(m[(i, j)].im);
            }
        }
        MatrixLiteral { dim: d, re, im }
    }

    /// Square literal to matrix.
    pub fn to_matrix(&self) -> Result<CMat> {
        self.to_rect(self.dim, self.dim)
    }

    /// Rectangular interpretation (`re.len() == rows * cols`), used by Kraus lists.
    pub fn to_rect(&self, rows: usize, cols: usize) -> Result<CMat> {
        let n = rows * cols;
        if self.re.len() != n {
            return Err(Error::Parse(format!(
                "matrix literal expects {n} real entries, found {}",
                self.re.len()
            )));
        }
        if !self.im.is_empty() && self.im.len() != n {
            return Err(Error::Parse(format!(
                "matrix literal expects {n} imaginary entries, found {}",
                self.im.len()
            )));
        }
        Ok(CMat::from_fn(rows, cols, |i, j| {
            let k = i * cols + j;
            c(self.re[k], self.im.get(k).copied().unwrap_or(0.0))
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_round_trip_keeps_entries() {
        let m = from_rows(&[&[c(1.0, 0.0), c(0.0, -0.5)], &[c(0.0, 0.5), c(2.0, 0.0)]]);
        let lit = MatrixLiteral::from_matrix(&m);
        assert_eq!(lit.dim, 2);
        assert_eq!(lit.re, vec![1.0, 0.0, 0.0, 2.0]);
        assert_eq!(lit.to_matrix().unwrap(), m);
    }

    #[test]
    fn literal_without_imaginary_part_is_real() {
        let json = r#"{"dim": 2, "re": [0.5, 0.5, 0.5, 0.5]}"#;
        let lit: MatrixLiteral = serde_json::from_str(json).unwrap();
        let m = lit.to_matrix().unwrap();
        assert_eq!(max_imag(&m), 0.0);
        assert!((trace(&m).re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn literal_with_wrong_length_is_rejected() {
        let lit = MatrixLiteral { dim: 2, re: vec![1.0; 3], im: vec![] };
        assert!(lit.to_matrix().is_err());
    }

    #[test]
    fn trace_product_matches_dense_product() {
        let a = from_rows(&[&[c(1.0, 0.0), c(2.0, 1.0)], &[c(2.0, -1.0), c(-1.0, 0.0)]]);
        let b = from_rows(&[&[c(0.3, 0.0), c(0.1, -0.2)], &[c(0.1, 0.2), c(0.7, 0.0)]]);
        let dense = trace(&(&a * &b)).re;
        assert!((trace_product_re(&a, &b) - dense).abs() < 1e-14);
    }
}
