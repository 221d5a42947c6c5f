use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::eig::{eigh, trace_norm};
use super::matrix::{c, hermiticity_defect, hermitize, trace, CMat, MatrixLiteral, ZERO};
use super::structure::TensorStructure;
use super::tensor_ops::{partial_trace_raw, partial_transpose_raw, permute_raw};
use crate::error::{Error, Result};

/// Hermiticity tolerance on construction.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Positivity and trace tolerance for density operators.
pub const STATE_TOL: f64 = 1e-10;

/// A Hermitian matrix. Stored exactly Hermitian (the input is symmetrised
/// after the tolerance check).
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator(CMat);

impl HermitianOperator {
    pub fn new(m: CMat) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "operator is {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let defect = hermiticity_defect(&m);
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian(defect));
        }
        Ok(HermitianOperator(hermitize(&m)))
    }

    /// Symmetrise without checking.
    pub fn from_hermitized(m: &CMat) -> Self {
        HermitianOperator(hermitize(m))
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eigh(&self.0).values
    }

    pub fn min_eigenvalue(&self) -> f64 {
        eigh(&self.0).min()
    }

    /// Re Tr(self · m).
    pub fn expectation(&self, m: &CMat) -> f64 {
        super::matrix::trace_product_re(&self.0, m)
    }
}

impl Serialize for HermitianOperator {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixLiteral::from_matrix(&self.0).serialize(s)
    }
}

impl<'de> Deserialize<'de> for HermitianOperator {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let lit = MatrixLiteral::deserialize(d)?;
        let m = lit.to_matrix().map_err(serde::de::Error::custom)?;
        HermitianOperator::new(m).map_err(serde::de::Error::custom)
    }
}

/// A density operator carrying its tensor structure.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    mat: CMat,
    structure: TensorStructure,
}

impl DensityOperator {
    /// Validates Hermiticity, unit trace and positivity (all within 1e-10).
    pub fn new(m: CMat, structure: TensorStructure) -> Result<Self> {
        if m.nrows() != structure.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "matrix dimension {} does not match structure dimension {}",
                m.nrows(),
                structure.total_dim()
            )));
        }
        let h = HermitianOperator::new(m)?;
        let tr = trace(h.matrix()).re;
        if (tr - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace {tr}")));
        }
        let lmin = h.min_eigenvalue();
        if lmin < -STATE_TOL {
            return Err(Error::InvalidState(format!("minimum eigenvalue {lmin:.3e}")));
        }
        Ok(DensityOperator { mat: h.into_matrix(), structure })
    }

    /// Single-party state with default label `"0"`.
    pub fn single(m: CMat) -> Result<Self> {
        let d = m.nrows();
        Self::new(m, TensorStructure::single("0", d))
    }

    /// Trusted constructor for matrices produced by valid maps. Symmetrises
    /// and renormalises the trace, but skips the eigenvalue check.
    pub(crate) fn from_trusted(m: CMat, structure: TensorStructure) -> Self {
        let mut h = hermitize(&m);
        let tr = trace(&h).re;
        if tr > 0.0 && (tr - 1.0).abs() > 0.0 {
            h *= c(1.0 / tr, 0.0);
        }
        DensityOperator { mat: h, structure }
    }

    /// Pure state |v⟩⟨v| (normalised here).
    pub fn pure(v: &[num_complex::Complex64], structure: TensorStructure) -> Result<Self> {
        let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n == 0.0 {
            return Err(Error::InvalidState("zero vector".into()));
        }
        let u: Vec<_> = v.iter().map(|z| z / n).collect();
        Self::new(super::matrix::outer(&u), structure)
    }

    pub fn maximally_mixed(structure: TensorStructure) -> Self {
        let d = structure.total_dim();
        DensityOperator { mat: CMat::identity(d, d) * c(1.0 / d as f64, 0.0), structure }
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn structure(&self) -> &TensorStructure {
        &self.structure
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn hermitian(&self) -> HermitianOperator {
        HermitianOperator(self.mat.clone())
    }

    /// Same matrix under a different structure of equal total dimension.
    pub fn with_structure(&self, structure: TensorStructure) -> Result<Self> {
        if structure.total_dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "cannot view a {}-dimensional state with structure of dimension {}",
                self.dim(),
                structure.total_dim()
            )));
        }
        Ok(DensityOperator { mat: self.mat.clone(), structure })
    }

    pub fn relabel(&self, labels: &[&str]) -> Result<Self> {
        Ok(DensityOperator { mat: self.mat.clone(), structure: self.structure.relabel(labels)? })
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eigh(&self.mat).values
    }

    pub fn purity(&self) -> f64 {
        super::matrix::trace_product_re(&self.mat, &self.mat)
    }

    /// Kronecker product; the structure is concatenated.
    pub fn tensor(&self, other: &DensityOperator) -> DensityOperator {
        DensityOperator {
            mat: self.mat.kronecker(&other.mat),
            structure: self.structure.concat(&other.structure),
        }
    }

    pub fn tensor_all(states: &[DensityOperator]) -> Result<DensityOperator> {
        let (first, rest) = states
            .split_first()
            .ok_or_else(|| Error::InvalidStructure("empty tensor product".into()))?;
        Ok(rest.iter().fold(first.clone(), |acc, s| acc.tensor(s)))
    }

    /// Partial trace keeping the listed parties (kept in declaration order).
    pub fn partial_trace(&self, keep: &[&str]) -> Result<DensityOperator> {
        let pos = self.structure.positions(keep)?;
        if pos.is_empty() {
            return Err(Error::InvalidStructure("partial trace must keep a party".into()));
        }
        let m = partial_trace_raw(&self.mat, &self.structure.dims(), &pos);
        Ok(DensityOperator::from_trusted(m, self.structure.select(&pos)))
    }

    /// Reduced state on a single party.
    pub fn marginal(&self, label: &str) -> Result<DensityOperator> {
        self.partial_trace(&[label])
    }

    /// Reduced state at party position `k`.
    pub fn marginal_at(&self, k: usize) -> DensityOperator {
        let m = partial_trace_raw(&self.mat, &self.structure.dims(), &[k]);
        DensityOperator::from_trusted(m, self.structure.select(&[k]))
    }

    /// Explicit reordering: output party `s` is input party `order[s]`.
    pub fn permute(&self, order: &[usize]) -> Result<DensityOperator> {
        let n = self.structure.len();
        let mut seen = vec![false; n];
        if order.len() != n || order.iter().any(|&k| k >= n || std::mem::replace(&mut seen[k], true)) {
            return Err(Error::InvalidStructure(format!("{order:?} is not a permutation of {n} parties")));
        }
        Ok(DensityOperator {
            mat: permute_raw(&self.mat, &self.structure.dims(), order),
            structure: self.structure.select(order),
        })
    }

    pub fn partial_transpose(&self, party: &str) -> Result<HermitianOperator> {
        let k = self.structure.index_of(party)?;
        Ok(HermitianOperator(partial_transpose_raw(&self.mat, &self.structure.dims(), k)))
    }

    /// Dephase in the computational basis.
    pub fn dephase(&self) -> DensityOperator {
        DensityOperator { mat: super::matrix::diagonal_part(&self.mat), structure: self.structure.clone() }
    }

    /// Dephase in the orthonormal basis given by the columns of `basis`.
    pub fn dephase_in(&self, basis: &CMat) -> Result<DensityOperator> {
        if basis.nrows() != self.dim() || basis.ncols() != self.dim() {
            return Err(Error::DimensionMismatch("basis size".into()));
        }
        if super::matrix::unitarity_defect(basis) > 1e-10 {
            return Err(Error::Precondition("basis is not orthonormal".into()));
        }
        let rotated = basis.adjoint() * &self.mat * basis;
        let m = basis * super::matrix::diagonal_part(&rotated) * basis.adjoint();
        Ok(DensityOperator::from_trusted(m, self.structure.clone()))
    }

    /// Trace-norm distance ‖a − b‖₁ (in [0, 2]).
    pub fn trace_distance(&self, other: &DensityOperator) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(format!("{} vs {}", self.dim(), other.dim())));
        }
        Ok(trace_norm(&(&self.mat - &other.mat)))
    }

    /// Uhlmann fidelity `(Tr √(√a b √a))²`.
    pub fn fidelity(&self, other: &DensityOperator) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(format!("{} vs {}", self.dim(), other.dim())));
        }
        let r = super::eig::sqrt_psd(&self.mat);
        let inner = super::matrix::hermitize(&(&r * &other.mat * &r));
        Ok(trace(&super::eig::sqrt_psd(&inner)).re.powi(2))
    }

    /// Convex combination `Σ w_k ρ_k`, inheriting the first structure.
    pub fn mixture(weights: &[f64], states: &[DensityOperator]) -> Result<DensityOperator> {
        let first = states.first().ok_or_else(|| Error::InvalidState("empty mixture".into()))?;
        let mut m = CMat::zeros(first.dim(), first.dim());
        for (w, s) in weights.iter().zip(states) {
            if s.dim() != first.dim() {
                return Err(Error::DimensionMismatch("mixture components".into()));
            }
            m += &s.mat * c(*w, 0.0);
        }
        DensityOperator::new(m, first.structure.clone())
    }

    /// True when every entry is finite.
    pub fn is_finite(&self) -> bool {
        self.mat.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Partial trace on a validated state. Accepts the spec-style label set.
pub fn partial_trace(rho: &DensityOperator, keep: &[&str]) -> Result<DensityOperator> {
    rho.partial_trace(keep)
}

pub fn tensor(a: &DensityOperator, b: &DensityOperator) -> DensityOperator {
    a.tensor(b)
}

pub fn trace_norm_distance(a: &DensityOperator, b: &DensityOperator) -> Result<f64> {
    a.trace_distance(b)
}

pub fn dephase(rho: &DensityOperator, basis: Option<&CMat>) -> Result<DensityOperator> {
    match basis {
        None => Ok(rho.dephase()),
        Some(b) => rho.dephase_in(b),
    }
}

pub fn partial_transpose(rho: &DensityOperator, party: &str) -> Result<HermitianOperator> {
    rho.partial_transpose(party)
}

#[derive(Serialize, Deserialize)]
struct StateRepr {
    structure: TensorStructure,
    matrix: MatrixLiteral,
}

impl Serialize for DensityOperator {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        StateRepr { structure: self.structure.clone(), matrix: MatrixLiteral::from_matrix(&self.mat) }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityOperator {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = StateRepr::deserialize(d)?;
        let m = r.matrix.to_matrix().map_err(serde::de::Error::custom)?;
        DensityOperator::new(m, r.structure).map_err(serde::de::Error::custom)
    }
}

/// Zero out an operator entry-wise below `tol` (cosmetic, for reports).
pub fn chop(m: &CMat, tol: f64) -> CMat {
    m.map(|z| {
        let re = if z.re.abs() < tol { 0.0 } else { z.re };
        let im = if z.im.abs() < tol { 0.0 } else { z.im };
        if re == 0.0 && im == 0.0 {
            ZERO
        } else {
            c(re, im)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::matrix::{from_real_rows, max_abs};

    fn qubit(m: CMat, label: &str) -> DensityOperator {
        DensityOperator::new(m, TensorStructure::single(label, 2)).unwrap()
    }

    fn phi_plus() -> DensityOperator {
        let h = 0.5;
        let m = from_real_rows(&[
            &[h, 0.0, 0.0, h],
            &[0.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 0.0],
            &[h, 0.0, 0.0, h],
        ]);
        DensityOperator::new(m, TensorStructure::from_pairs(&[("A", 2), ("B", 2)]).unwrap()).unwrap()
    }

    #[test]
    fn rejects_non_states() {
        let s = TensorStructure::single("A", 2);
        assert!(DensityOperator::new(from_real_rows(&[&[1.0, 0.0], &[0.0, 1.0]]), s.clone()).is_err());
        assert!(DensityOperator::new(from_real_rows(&[&[1.5, 0.0], &[0.0, -0.5]]), s.clone()).is_err());
        assert!(DensityOperator::new(from_real_rows(&[&[0.5, 0.3], &[0.0, 0.5]]), s).is_err());
    }

    #[test]
    fn tensor_of_basis_states() {
        let zero = qubit(from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]]), "A");
        let zz = zero.tensor(&zero);
        assert_eq!(zz.structure().labels(), vec!["A", "A'"]);
        assert_eq!(zz.matrix()[(0, 0)], c(1.0, 0.0));
        assert!((crate::qcore::matrix::trace(zz.matrix()).re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bell_marginal_is_maximally_mixed() {
        let b = phi_plus().marginal("B").unwrap();
        assert!(max_abs(&(b.matrix() - CMat::identity(2, 2) * c(0.5, 0.0))) < 1e-15);
    }

    #[test]
    fn bell_partial_transpose_has_negative_half() {
        let pt = phi_plus().partial_transpose("B").unwrap();
        assert!((pt.min_eigenvalue() + 0.5).abs() < 1e-12);
    }

    #[test]
    fn fidelity_of_zero_and_plus_is_half() {
        let zero = qubit(from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]]), "A");
        let plus = qubit(from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]), "A");
        assert!((zero.fidelity(&plus).unwrap() - 0.5).abs() < 1e-12);
        assert!((plus.fidelity(&plus).unwrap() - 1.0).abs() < 1e-12);
        let mixed = DensityOperator::maximally_mixed(TensorStructure::single("A", 2));
        assert!((mixed.fidelity(&zero).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn trace_distance_examples() {
        let zero = qubit(from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]]), "A");
        let one = qubit(from_real_rows(&[&[0.0, 0.0], &[0.0, 1.0]]), "A");
        let mixed = DensityOperator::maximally_mixed(TensorStructure::single("A", 2));
        assert!((zero.trace_distance(&one).unwrap() - 2.0).abs() < 1e-14);
        assert!((zero.trace_distance(&mixed).unwrap() - 1.0).abs() < 1e-14);
        assert!(zero.trace_distance(&zero).unwrap().abs() < 1e-14);
    }

    #[test]
    fn dephasing_plus_gives_maximally_mixed() {
        let plus = qubit(from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]), "A");
        let d = plus.dephase();
        assert!(max_abs(&(d.matrix() - CMat::identity(2, 2) * c(0.5, 0.0))) < 1e-15);
        let hadamard = from_real_rows(&[&[1.0, 1.0], &[1.0, -1.0]]) * c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let same = plus.dephase_in(&hadamard).unwrap();
        assert!(max_abs(&(same.matrix() - plus.matrix())) < 1e-14);
    }

    #[test]
    fn json_round_trip() {
        let rho = phi_plus();
        let s = serde_json::to_string(&rho).unwrap();
        let back: DensityOperator = serde_json::from_str(&s).unwrap();
        assert_eq!(back, rho);
    }

    #[test]
    fn permute_reorders_parties() {
        let zero = qubit(from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]]), "A");
        let plus = qubit(from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]), "B");
        let ab = zero.tensor(&plus);
        let ba = ab.permute(&[1, 0]).unwrap();
        assert_eq!(ba.structure().labels(), vec!["B", "A"]);
        assert!(max_abs(&(ba.matrix() - plus.tensor(&zero).matrix())) < 1e-15);
        assert!(ab.permute(&[0, 0]).is_err());
    }
}
