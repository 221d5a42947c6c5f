use crate::error::{Error, Result};
use crate::qcore::matrix::{max_abs, CMat};
use crate::qcore::state::HermitianOperator;

#[derive(Clone, Debug)]
pub struct Povm {
    elements: Vec<HermitianOperator>,
}

impl Povm {
    pub fn new(elements: Vec<HermitianOperator>) -> Result<Self> {
        let first = elements.first().ok_or_else(|| Error::Precondition("empty POVM".into()))?;
        let d = first.dim();
        let mut sum = CMat::zeros(d, d);
        for (k, e) in elements.iter().enumerate() {
            if e.dim() != d {
                return Err(Error::DimensionMismatch("POVM elements differ in size".into()));
            }
            if e.min_eigenvalue() < -1e-10 {
                return Err(Error::Precondition(format!("POVM element {k} is not positive")));
            }
            sum += e.matrix();
        }
        if max_abs(&(sum - CMat::identity(d, d))) > 1e-9 {
            return Err(Error::Precondition("POVM elements do not sum to the identity".into()));
        }
        Ok(Povm { elements })
    }

    /// `{P, I − P}`.
    pub fn binary(p: HermitianOperator) -> Result<Self> {
        let d = p.dim();
        let q = HermitianOperator::from_hermitized(&(CMat::identity(d, d) - p.matrix()));
        Self::new(vec![p, q])
    }

    pub fn elements(&self) -> &[HermitianOperator] {
        &self.elements
    }

    pub fn probabilities(&self, rho: &CMat) -> Vec<f64> {
        self.elements.iter().map(|e| e.expectation(rho)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::matrix::from_real_rows;

    #[test]
    fn binary_povm_from_projector() {
        let p = HermitianOperator::new(from_real_rows(&[&[0.5, -0.5], &[-0.5, 0.5]])).unwrap();
        let povm = Povm::binary(p).unwrap();
        let probs = povm.probabilities(&from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]));
        assert!(probs[0].abs() < 1e-15 && (probs[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_positive_element() {
        let p = HermitianOperator::new(from_real_rows(&[&[1.5, 0.0], &[0.0, 0.5]])).unwrap();
        assert!(Povm::binary(p).is_err());
    }
}
