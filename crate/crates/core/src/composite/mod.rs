//! Minimal and maximal composite theories and the checks that decide whether
//! a candidate composite theory is consistent with its local theories.

pub mod axioms;
pub mod bp;

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::channels::KrausChannel;
use crate::error::{Error, Result};
use crate::qcore::matrix::{c, kron_all, CMat, MatrixLiteral};
use crate::qcore::state::DensityOperator;
use crate::qcore::tensor_ops::partial_trace_raw;
use crate::theories::{FreeStateSet, SetKind};

pub use axioms::{
    check_axioms, check_sandwich, AxiomOptions, AxiomReport, CandidateOps, ConditionReport, LocalTheory, SandwichReport, Verdict,
};
pub use bp::{check_bp_axioms, BpReport};

/// Convex hull of products of local free states. Products of singletons
/// collapse to the singleton of the product.
pub fn smin(locals: Vec<FreeStateSet>) -> Result<FreeStateSet> {
    if locals.len() >= 2 && locals.iter().all(|l| matches!(l.kind(), SetKind::Singleton { .. })) {
        let gammas: Vec<CMat> = locals
            .iter()
            .map(|l| match l.kind() {
                SetKind::Singleton { gamma } => gamma.clone(),
                _ => unreachable!(),
            })
            .collect();
        let st = locals[1..].iter().fold(locals[0].structure().clone(), |acc, l| acc.concat(l.structure()));
        return Ok(FreeStateSet::singleton(&DensityOperator::new(kron_all(&gammas), st)?));
    }
    FreeStateSet::min_composite(locals)
}

/// States whose local marginals are all free.
pub fn smax(locals: Vec<FreeStateSet>) -> Result<FreeStateSet> {
    FreeStateSet::max_composite(locals)
}

/// `Σ_k w_k ⊗_i Λ_k^(i)`, one Kraus family with √w scaling.
pub fn fmin_element(terms: &[Vec<KrausChannel>], weights: &[f64]) -> Result<KrausChannel> {
    if terms.is_empty() || terms.len() != weights.len() {
        return Err(Error::InvalidChannel("need one weight per product term".into()));
    }
    let products: Vec<KrausChannel> = terms
        .iter()
        .map(|locals| {
            let (first, rest) = locals.split_first().ok_or_else(|| Error::InvalidChannel("empty product".into()))?;
            Ok(rest.iter().fold(first.clone(), |acc, l| acc.tensor(l)))
        })
        .collect::<Result<_>>()?;
    let shape = products[0].in_structure().clone();
    for p in &products[1..] {
        if !p.in_structure().same_shape(&shape) {
            return Err(Error::DimensionMismatch("product terms act on different structures".into()));
        }
    }
    KrausChannel::mixture(weights, &products)
}

/// A single product channel.
pub fn fmin_product(locals: &[KrausChannel]) -> Result<KrausChannel> {
    fmin_element(&[locals.to_vec()], &[1.0])
}

/// Party positions of each local theory inside the concatenated structure.
pub fn block_ranges(locals: &[FreeStateSet]) -> Vec<Range<usize>> {
    let mut start = 0;
    locals
        .iter()
        .map(|l| {
            let r = start..start + l.structure().len();
            start = r.end;
            r
        })
        .collect()
}

/// Reduced state on one block.
pub fn block_marginal(m: &CMat, dims: &[usize], block: &Range<usize>) -> CMat {
    let keep: Vec<usize> = block.clone().collect();
    partial_trace_raw(m, dims, &keep)
}

/// `X ↦ Tr_{other blocks} Λ(… ⊗ X ⊗ …)` with fixed inputs on the other
/// blocks. Input and output must share the block layout.
pub fn block_marginal_channel(ch: &KrausChannel, block: &Range<usize>, frozen: &[Option<CMat>]) -> Result<KrausChannel> {
    let ins = ch.in_structure();
    let outs = ch.out_structure();
    if ins.len() != outs.len() {
        return Err(Error::DimensionMismatch("input and output party counts differ".into()));
    }
    let in_dims = ins.dims();
    let out_dims = outs.dims();
    let db: usize = in_dims[block.clone()].iter().product();
    let db_out: usize = out_dims[block.clone()].iter().product();
    let keep: Vec<usize> = block.clone().collect();
    let mut j = CMat::zeros(db * db_out, db * db_out);
    for a in 0..db {
        for b in 0..db {
            let mut x = CMat::identity(1, 1);
            for f in frozen {
                let m = match f {
                    Some(m) => m.clone(),
                    None => {
                        let mut e = CMat::zeros(db, db);
                        e[(a, b)] = c(1.0, 0.0);
                        e
                    }
                };
                x = x.kronecker(&m);
            }
            if x.nrows() != ch.in_dim() {
                return Err(Error::DimensionMismatch("frozen inputs do not fill the input space".into()));
            }
            let y = partial_trace_raw(&ch.apply_mat(&x), &out_dims, &keep);
            for o in 0..db_out {
                for p in 0..db_out {
                    j[(a * db_out + o, b * db_out + p)] = y[(o, p)];
                }
            }
        }
    }
    KrausChannel::from_choi(&j, ins.select(&keep), outs.select(&keep))
}

/// Failure witness carried by axiom reports.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Counterexample {
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub party: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<MatrixLiteral>,
    /// Kraus operators of the offending channel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<Vec<MatrixLiteral>>,
}

impl Counterexample {
    pub fn state(description: String, m: &CMat) -> Self {
        Counterexample { description, state: Some(MatrixLiteral::from_matrix(m)), ..Default::default() }
    }

    pub fn with_channel(mut self, ch: &KrausChannel) -> Self {
        self.channel = Some(ch.kraus().iter().map(MatrixLiteral::from_matrix).collect());
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::matrix::from_real_rows;
    use crate::qcore::structure::TensorStructure;

    #[test]
    fn product_of_singletons_collapses() {
        let a = DensityOperator::maximally_mixed(TensorStructure::single("A", 2));
        let b = DensityOperator::new(from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]]), TensorStructure::single("B", 2)).unwrap();
        let s = smin(vec![FreeStateSet::singleton(&a), FreeStateSet::singleton(&b)]).unwrap();
        assert!(matches!(s.kind(), SetKind::Singleton { .. }));
        assert_eq!(s.structure().labels(), vec!["A", "B"]);
    }

    #[test]
    fn product_of_identities_is_identity() {
        let a = KrausChannel::identity(TensorStructure::single("A", 2));
        let b = KrausChannel::identity(TensorStructure::single("B", 3));
        let p = fmin_product(&[a, b]).unwrap();
        let x = crate::qcore::random::random_density(6, &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(1));
        assert!(crate::qcore::matrix::max_abs(&(p.apply_mat(&x) - &x)) < 1e-12);
    }

    #[test]
    fn marginal_of_product_channel_is_the_factor() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
        let a = crate::theories::samplers::random_channel(TensorStructure::single("A", 2), 2, &mut rng).unwrap();
        let b = crate::theories::samplers::random_channel(TensorStructure::single("B", 2), 2, &mut rng).unwrap();
        let p = fmin_product(&[a.clone(), b]).unwrap();
        let tau = crate::qcore::random::random_density(2, &mut rng);
        let m = block_marginal_channel(&p, &(0..1), &[None, Some(tau)]).unwrap();
        assert!(crate::qcore::matrix::max_abs(&(m.choi() - a.choi())) < 1e-10);
    }
}
