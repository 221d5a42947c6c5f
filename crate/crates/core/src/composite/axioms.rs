//! Consistency conditions between a candidate composite theory and its local
//! theories, plus the sandwich `S_min ⊆ S ⊆ S_max`.
//!
//! All four conditions quantify over infinite sets, so they are checked on
//! finite verification sets and any failure comes with a witness. Partial
//! trace is never assumed to be a free operation.

use std::collections::BTreeMap;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{block_marginal, block_marginal_channel, block_ranges, smax, smin, Counterexample};
use crate::channels::KrausChannel;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::qcore::matrix::{hermitize, kron_all, CMat};
use crate::theories::ops::rng_check;
use crate::theories::samplers::random_in_class;
use crate::theories::sets::{VerificationMode, MEMBERSHIP_TOL};
use crate::theories::{op_in_class, FreeOpClass, FreeStateSet, OpReport};

/// Cap on exhaustively enumerated product states.
pub const MAX_EXHAUSTIVE: usize = 4096;

/// One party of a composite: its free states and free operations.
#[derive(Clone, Debug)]
pub struct LocalTheory {
    pub states: FreeStateSet,
    pub ops: FreeOpClass,
}

impl LocalTheory {
    pub fn new(states: FreeStateSet, ops: FreeOpClass) -> Self {
        LocalTheory { states, ops }
    }
}

/// Candidate free operations: explicit channels and, optionally, the class
/// they are drawn from. Without a class, the RNG operations of the
/// candidate states are used.
#[derive(Clone, Debug, Default)]
pub struct CandidateOps {
    pub class: Option<FreeOpClass>,
    pub channels: Vec<KrausChannel>,
}

#[derive(Clone, Debug)]
pub struct AxiomOptions {
    pub state_samples: usize,
    pub channel_samples: usize,
    /// Frozen inputs tried per channel and party for condition (d).
    pub frozen_samples: usize,
    /// States per channel when checking an RNG class.
    pub rng_states: usize,
    pub seed: u64,
    pub op_tol: f64,
    pub execution: Execution,
}

impl Default for AxiomOptions {
    fn default() -> Self {
        AxiomOptions {
            state_samples: 200,
            channel_samples: 50,
            frozen_samples: 4,
            rng_states: 20,
            seed: 0,
            op_tol: 1e-8,
            execution: Execution::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionReport {
    pub verdict: Verdict,
    pub mode: VerificationMode,
    pub checked: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ConditionReport {
    pub(crate) fn from_results(mode: VerificationMode, results: Vec<Option<Counterexample>>) -> Self {
        let checked = results.len();
        let counterexample = results.into_iter().flatten().next();
        ConditionReport {
            verdict: if counterexample.is_some() { Verdict::Fail } else { Verdict::Pass },
            mode,
            checked,
            counterexample,
            note: None,
        }
    }

    fn not_applicable(note: &str) -> Self {
        ConditionReport {
            verdict: Verdict::NotApplicable,
            mode: VerificationMode::Sampled,
            checked: 0,
            counterexample: None,
            note: Some(note.to_string()),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict != Verdict::Fail
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AxiomReport {
    pub seed: u64,
    /// Keys `a_product_states`, `b_product_operations`, `c_marginal_states`,
    /// `d_marginal_operations`.
    pub conditions: BTreeMap<String, ConditionReport>,
    /// Membership of each explicit candidate channel in the candidate class.
    pub operations: Vec<OpReport>,
}

impl AxiomReport {
    pub fn all_pass(&self) -> bool {
        self.conditions.values().all(ConditionReport::passed) && self.operations.iter().all(|o| o.member)
    }

    pub fn condition(&self, key: &str) -> Option<&ConditionReport> {
        self.conditions.get(key)
    }
}

/// Verification states of each local set.
struct Pools {
    states: Vec<Vec<CMat>>,
    exhaustive: bool,
}

impl Pools {
    fn new(locals: &[LocalTheory], samples: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut exhaustive = true;
        let states = locals
            .iter()
            .map(|l| {
                let (v, mode) = l.states.verification_states(samples, rng);
                exhaustive &= mode == VerificationMode::Exhaustive;
                v
            })
            .collect();
        Pools { states, exhaustive }
    }

    fn combinations(&self) -> usize {
        self.states.iter().map(Vec::len).product()
    }

    /// The `i`-th element of the Cartesian product, skipping block `skip`.
    fn nth(&self, mut i: usize, skip: Option<usize>) -> Vec<Option<CMat>> {
        let mut out = vec![None; self.states.len()];
        for k in (0..self.states.len()).rev() {
            if Some(k) == skip {
                continue;
            }
            let n = self.states[k].len();
            out[k] = Some(self.states[k][i % n].clone());
            i /= n;
        }
        out
    }

    fn random(&self, rng: &mut ChaCha8Rng, skip: Option<usize>) -> Vec<Option<CMat>> {
        self.states
            .iter()
            .enumerate()
            .map(|(k, v)| if Some(k) == skip { None } else { Some(v[rng.random_range(0..v.len())].clone()) })
            .collect()
    }
}

fn check_layout(candidate: &FreeStateSet, locals: &[LocalTheory]) -> Result<Vec<Range<usize>>> {
    let sets: Vec<FreeStateSet> = locals.iter().map(|l| l.states.clone()).collect();
    let dims: Vec<usize> = sets.iter().flat_map(|s| s.structure().dims()).collect();
    if locals.len() < 2 || dims != candidate.structure().dims() {
        return Err(Error::DimensionMismatch("local theories do not tile the candidate structure".into()));
    }
    Ok(block_ranges(&sets))
}

fn class_check(ch: &KrausChannel, class: &FreeOpClass, opts: &AxiomOptions, seed: u64) -> Result<OpReport> {
    match class {
        FreeOpClass::Rng(set) => rng_check(ch, set, opts.op_tol, opts.rng_states, seed),
        _ => op_in_class(ch, class, opts.op_tol),
    }
}

/// Check the four composite conditions for a candidate theory.
pub fn check_axioms(
    candidate_states: &FreeStateSet,
    candidate_ops: &CandidateOps,
    locals: &[LocalTheory],
    opts: &AxiomOptions,
) -> Result<AxiomReport> {
    let blocks = check_layout(candidate_states, locals)?;
    let dims = candidate_states.structure().dims();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let pools = Pools::new(locals, opts.state_samples, &mut rng);
    let class = candidate_ops.class.clone().unwrap_or_else(|| FreeOpClass::Rng(Box::new(candidate_states.clone())));
    let mut conditions = BTreeMap::new();

    // (a) free product states.
    let (n, mode) = if pools.exhaustive && pools.combinations() <= MAX_EXHAUSTIVE {
        (pools.combinations(), VerificationMode::Exhaustive)
    } else {
        (opts.state_samples, VerificationMode::Sampled)
    };
    let seed_a: u64 = rng.random();
    let results = opts.execution.map_seeded(seed_a, n, |i, r| {
        let factors = if mode == VerificationMode::Exhaustive { pools.nth(i, None) } else { pools.random(r, None) };
        let prod = kron_all(&factors.into_iter().flatten().collect::<Vec<_>>());
        (!candidate_states.contains_mat(&prod, MEMBERSHIP_TOL))
            .then(|| Counterexample::state("product of locally free states is not a candidate free state".into(), &prod))
    });
    conditions.insert("a_product_states".into(), ConditionReport::from_results(mode, results));

    // (b) free product operations.
    let seed_b: u64 = rng.random();
    let results = opts.execution.map_seeded(seed_b, opts.channel_samples, |_, r| {
        let factors: Result<Vec<KrausChannel>> =
            locals.iter().map(|l| random_in_class(&l.ops, l.states.structure().clone(), r)).collect();
        let factors = match factors {
            Ok(f) => f,
            Err(e) => return Some(Counterexample { description: format!("could not sample local operations: {e}"), ..Default::default() }),
        };
        let prod = factors[1..].iter().fold(factors[0].clone(), |acc, f| acc.tensor(f));
        match class_check(&prod, &class, opts, r.random()) {
            Ok(rep) if rep.member => None,
            Ok(rep) => Some(
                Counterexample {
                    description: format!("product of local free operations is not in the {} class ({})", class.name(), rep.summary()),
                    ..Default::default()
                }
                .with_channel(&prod),
            ),
            Err(e) => Some(Counterexample { description: format!("class check failed: {e}"), ..Default::default() }.with_channel(&prod)),
        }
    });
    let sampled_ok = locals.iter().all(|l| !matches!(l.ops, FreeOpClass::Lfocc(_)));
    conditions.insert(
        "b_product_operations".into(),
        if sampled_ok {
            ConditionReport::from_results(VerificationMode::Sampled, results)
        } else {
            ConditionReport::not_applicable("local protocol classes cannot be sampled as bare channels")
        },
    );

    // (c) free marginal states.
    let mut crng = ChaCha8Rng::seed_from_u64(rng.random());
    let (states, cmode) = candidate_states.verification_states(opts.state_samples, &mut crng);
    let results = opts.execution.map(states.len(), |i| {
        for (k, b) in blocks.iter().enumerate() {
            let m = block_marginal(&states[i], &dims, b);
            if !locals[k].states.contains_mat(&m, MEMBERSHIP_TOL) {
                let mut cx = Counterexample::state(format!("marginal on block {k} is not locally free"), &states[i]);
                cx.party = Some(locals[k].states.structure().labels().join(","));
                return Some(cx);
            }
        }
        None
    });
    conditions.insert("c_marginal_states".into(), ConditionReport::from_results(cmode, results));

    // (d) free marginal operations.
    if candidate_ops.channels.is_empty() {
        conditions.insert("d_marginal_operations".into(), ConditionReport::not_applicable("no explicit candidate channels"));
    } else {
        let jobs: Vec<(usize, usize)> =
            (0..candidate_ops.channels.len()).flat_map(|c| (0..locals.len()).map(move |k| (c, k))).collect();
        let seed_d: u64 = rng.random();
        let mut all_exhaustive = pools.exhaustive;
        for k in 0..locals.len() {
            let others: usize = pools.states.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, v)| v.len()).product();
            all_exhaustive &= others <= opts.frozen_samples;
        }
        let results = opts.execution.map_seeded(seed_d, jobs.len(), |i, r| {
            let (ci, k) = jobs[i];
            let ch = &candidate_ops.channels[ci];
            let others: usize = pools.states.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, v)| v.len()).product();
            let exhaustive = pools.exhaustive && others <= opts.frozen_samples;
            let count = if exhaustive { others } else { opts.frozen_samples };
            for t in 0..count {
                let frozen = if exhaustive { pools.nth(t, Some(k)) } else { pools.random(r, Some(k)) };
                let marginal = match block_marginal_channel(ch, &blocks[k], &frozen) {
                    Ok(m) => m,
                    Err(e) => {
                        return Some(Counterexample { description: format!("channel {ci}: marginal not defined: {e}"), ..Default::default() })
                    }
                };
                let local_class = match &locals[k].ops {
                    FreeOpClass::Lfocc(_) => continue,
                    c => c,
                };
                let marginal = match marginal.with_structures(locals[k].states.structure().clone(), locals[k].states.structure().clone()) {
                    Ok(m) => m,
                    Err(e) => return Some(Counterexample { description: format!("channel {ci}: {e}"), ..Default::default() }),
                };
                let verdict = class_check(&marginal, local_class, opts, r.random());
                let fail = match verdict {
                    Ok(rep) if rep.member => None,
                    Ok(rep) => Some(format!("not in the local {} class ({})", local_class.name(), rep.summary())),
                    Err(e) => Some(e.to_string()),
                };
                if let Some(why) = fail {
                    let frozen_state = kron_all(&frozen.into_iter().flatten().collect::<Vec<_>>());
                    let mut cx = Counterexample::state(format!("channel {ci}: marginal on block {k} {why}"), &frozen_state)
                        .with_channel(&marginal);
                    cx.party = Some(locals[k].states.structure().labels().join(","));
                    return Some(cx);
                }
            }
            None
        });
        let mode = if all_exhaustive { VerificationMode::Exhaustive } else { VerificationMode::Sampled };
        conditions.insert("d_marginal_operations".into(), ConditionReport::from_results(mode, results));
    }

    let operations = candidate_ops
        .channels
        .iter()
        .enumerate()
        .map(|(i, ch)| class_check(ch, &class, opts, opts.seed ^ (i as u64 + 1)))
        .collect::<Result<Vec<_>>>()?;

    Ok(AxiomReport { seed: opts.seed, conditions, operations })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SandwichReport {
    pub holds: bool,
    /// `S_min ⊆ S`.
    pub lower: ConditionReport,
    /// `S ⊆ S_max`.
    pub upper: ConditionReport,
}

/// Sampled check of `S_min ⊆ S ⊆ S_max`.
pub fn check_sandwich(set: &FreeStateSet, locals: &[FreeStateSet], samples: usize, seed: u64) -> Result<SandwichReport> {
    let dims: Vec<usize> = locals.iter().flat_map(|s| s.structure().dims()).collect();
    if dims != set.structure().dims() {
        return Err(Error::DimensionMismatch("local theories do not tile the set".into()));
    }
    let lo = smin(locals.to_vec())?;
    let hi = smax(locals.to_vec())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exec = Execution::default();

    let (below, mode) = lo.verification_states(samples, &mut rng);
    let results = exec.map(below.len(), |i| {
        let m = hermitize(&below[i]);
        (!set.contains_mat(&m, MEMBERSHIP_TOL)).then(|| Counterexample::state("minimal composite state outside the set".into(), &m))
    });
    let lower = ConditionReport::from_results(mode, results);

    let (inside, mode) = set.verification_states(samples, &mut rng);
    let results = exec.map(inside.len(), |i| {
        let m = hermitize(&inside[i]);
        (!hi.contains_mat(&m, MEMBERSHIP_TOL)).then(|| Counterexample::state("free state outside the maximal composite".into(), &m))
    });
    let upper = ConditionReport::from_results(mode, results);
    Ok(SandwichReport { holds: lower.passed() && upper.passed(), lower, upper })
}
