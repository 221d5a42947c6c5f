//! Multi-copy axioms for a family `n ↦ S_n`: convexity, a full-rank member,
//! closure under discarding a copy, under tensor products and under copy
//! permutations.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::axioms::{ConditionReport, Verdict};
use super::Counterexample;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::qcore::eig::min_eigenvalue;
use crate::qcore::matrix::{c, hermitize, CMat};
use crate::qcore::tensor_ops::{partial_trace_raw, permute_raw};
use crate::theories::sets::{VerificationMode, MEMBERSHIP_TOL};
use crate::theories::FreeStateSet;

pub const MAX_COPIES: usize = 3;
const FULL_RANK_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BpReport {
    pub max_n: usize,
    pub seed: u64,
    /// Keys `convexity`, `full_rank`, `marginal_closure`, `tensor_closure`,
    /// `permutation_closure`.
    pub axioms: BTreeMap<String, ConditionReport>,
}

impl BpReport {
    pub fn all_pass(&self) -> bool {
        self.axioms.values().all(ConditionReport::passed)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.axioms.iter().filter(|(_, r)| r.verdict == Verdict::Fail).map(|(k, _)| k.as_str()).collect()
    }
}

fn fail_if(bad: bool, what: impl FnOnce() -> (String, CMat)) -> Option<Counterexample> {
    bad.then(|| {
        let (d, m) = what();
        Counterexample::state(d, &m)
    })
}

/// `family[n-1]` is `S_n`; `probes[n-1]` lists extra members of `S_n` that
/// are tried before random samples.
pub fn check_bp_axioms(family: &[FreeStateSet], probes: &[Vec<CMat>], samples: usize, seed: u64) -> Result<BpReport> {
    let max_n = family.len();
    if max_n == 0 || max_n > MAX_COPIES {
        return Err(Error::OutOfRange(format!("family length {max_n} outside 1..={MAX_COPIES}")));
    }
    let per_copy = family[0].structure().len();
    let copy_dims = family[0].structure().dims();
    for (i, s) in family.iter().enumerate() {
        let want: Vec<usize> = (0..=i).flat_map(|_| copy_dims.iter().copied()).collect();
        if s.structure().dims() != want {
            return Err(Error::DimensionMismatch(format!("S_{} is not on {} copies", i + 1, i + 1)));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exec = Execution::default();
    let mut pools: Vec<Vec<CMat>> = Vec::with_capacity(max_n);
    for (i, s) in family.iter().enumerate() {
        let mut pool: Vec<CMat> = probes.get(i).cloned().unwrap_or_default();
        for p in &pool {
            if !s.contains_mat(p, MEMBERSHIP_TOL) {
                return Err(Error::Precondition(format!("probe for S_{} is not a member", i + 1)));
            }
        }
        pool.extend(s.verification_states(samples, &mut rng).0.into_iter().map(|m| hermitize(&m)));
        pools.push(pool);
    }
    let mut axioms = BTreeMap::new();

    // Convexity.
    let jobs: Vec<usize> = (0..max_n).flat_map(|n| std::iter::repeat_n(n, samples)).collect();
    let results = exec.map_seeded(rng.random(), jobs.len(), |i, r| {
        let n = jobs[i];
        let p = &pools[n];
        let (x, y) = (&p[r.random_range(0..p.len())], &p[r.random_range(0..p.len())]);
        let t: f64 = r.random();
        let m = x * c(t, 0.0) + y * c(1.0 - t, 0.0);
        fail_if(!family[n].contains_mat(&m, MEMBERSHIP_TOL), || (format!("mixture of two members of S_{} is not in it", n + 1), m))
    });
    axioms.insert("convexity".into(), ConditionReport::from_results(VerificationMode::Sampled, results));

    // Full-rank member.
    let results = (0..max_n)
        .map(|n| {
            let cands: Vec<CMat> = std::iter::once(family[n].interior_point()).chain(pools[n].iter().cloned()).collect();
            let ok = cands.iter().any(|m| min_eigenvalue(m) > FULL_RANK_TOL && family[n].contains_mat(m, MEMBERSHIP_TOL));
            fail_if(!ok, || (format!("no full-rank member of S_{} found", n + 1), family[n].interior_point()))
        })
        .collect();
    axioms.insert("full_rank".into(), ConditionReport::from_results(VerificationMode::Sampled, results));

    // Discarding the first or the last copy.
    let jobs: Vec<(usize, usize, bool)> =
        (1..max_n).flat_map(|n| (0..pools[n].len()).flat_map(move |k| [(n, k, true), (n, k, false)])).collect();
    let results = exec.map(jobs.len(), |i| {
        let (n, k, last) = jobs[i];
        let dims = family[n].structure().dims();
        let keep: Vec<usize> =
            if last { (0..n * per_copy).collect() } else { (per_copy..(n + 1) * per_copy).collect() };
        let m = partial_trace_raw(&pools[n][k], &dims, &keep);
        fail_if(!family[n - 1].contains_mat(&m, MEMBERSHIP_TOL), || {
            (format!("discarding the {} copy of a member of S_{} leaves S_{}", if last { "last" } else { "first" }, n + 1, n), pools[n][k].clone())
        })
    });
    axioms.insert("marginal_closure".into(), ConditionReport::from_results(VerificationMode::Sampled, results));

    // Tensor closure S_m ⊗ S_n ⊆ S_{m+n}.
    let mut jobs: Vec<(usize, usize, usize, usize)> = Vec::new();
    for m in 1..max_n {
        for n in 1..=max_n - m {
            let pairs = pools[m - 1].len().min(samples.max(1));
            for k in 0..pairs {
                jobs.push((m, n, k, k % pools[n - 1].len()));
            }
        }
    }
    let results = exec.map(jobs.len(), |i| {
        let (m, n, a, b) = jobs[i];
        let x = pools[m - 1][a].kronecker(&pools[n - 1][b]);
        fail_if(!family[m + n - 1].contains_mat(&x, MEMBERSHIP_TOL), || {
            (format!("tensor product of members of S_{m} and S_{n} is not in S_{}", m + n), x)
        })
    });
    axioms.insert("tensor_closure".into(), ConditionReport::from_results(VerificationMode::Sampled, results));

    // Permutations of copies: every transposition.
    let mut jobs: Vec<(usize, usize, usize, usize)> = Vec::new();
    for n in 1..max_n {
        for a in 0..=n {
            for b in (a + 1)..=n {
                for k in 0..pools[n].len() {
                    jobs.push((n, a, b, k));
                }
            }
        }
    }
    let results = exec.map(jobs.len(), |i| {
        let (n, a, b, k) = jobs[i];
        let mut copies: Vec<usize> = (0..=n).collect();
        copies.swap(a, b);
        let order: Vec<usize> = copies.iter().flat_map(|&cp| (cp * per_copy)..((cp + 1) * per_copy)).collect();
        let dims = family[n].structure().dims();
        let x = permute_raw(&pools[n][k], &dims, &order);
        fail_if(!family[n].contains_mat(&x, MEMBERSHIP_TOL), || {
            (format!("swapping copies {a} and {b} leaves S_{}", n + 1), pools[n][k].clone())
        })
    });
    axioms.insert("permutation_closure".into(), ConditionReport::from_results(VerificationMode::Sampled, results));

    Ok(BpReport { max_n, seed, axioms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::structure::TensorStructure;

    #[test]
    fn incoherent_family_passes() {
        let fam: Vec<FreeStateSet> = (1..=2)
            .map(|n| {
                let pairs: Vec<(String, usize)> = (0..n).map(|k| (format!("q{k}"), 2)).collect();
                let refs: Vec<(&str, usize)> = pairs.iter().map(|(l, d)| (l.as_str(), *d)).collect();
                FreeStateSet::incoherent(TensorStructure::from_pairs(&refs).unwrap())
            })
            .collect();
        let r = check_bp_axioms(&fam, &[], 10, 4).unwrap();
        assert!(r.all_pass(), "{:?}", r.failed());
    }
}
