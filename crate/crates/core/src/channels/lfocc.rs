//! Round-based protocols of local operations and classical communication.
//!
//! Each round names the acting party and maps every classical history (the
//! dot-separated outcome indices of earlier rounds, `""` before the first
//! round) to a local Kraus family. The key `"*"` is used for histories
//! without an explicit entry.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::kraus::KrausChannel;
use crate::error::{Error, Result};
use crate::qcore::matrix::{c, max_abs, CMat, MatrixLiteral};
use crate::qcore::state::DensityOperator;
use crate::qcore::structure::TensorStructure;
use crate::qcore::tensor_ops::{embed_raw, partial_trace_raw};

/// Upper bound on the number of leaf histories in a compiled protocol.
pub const MAX_BRANCHES: usize = 64;
const FAMILY_TP_TOL: f64 = 1e-9;
const COMPILE_TP_TOL: f64 = 1e-8;
const LOCALITY_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct Round {
    pub party: String,
    pub tree: BTreeMap<String, Vec<CMat>>,
}

impl Round {
    /// Same local family for every history.
    pub fn uniform(party: &str, family: Vec<CMat>) -> Self {
        Round { party: party.to_string(), tree: [("*".to_string(), family)].into() }
    }

    pub fn family(&self, history: &str) -> Option<&[CMat]> {
        self.tree.get(history).or_else(|| self.tree.get("*")).map(|v| v.as_slice())
    }

    /// Build a round from operators given on the full space, checking that
    /// they act as the identity outside `party`.
    pub fn from_global(
        structure: &TensorStructure,
        party: &str,
        tree: BTreeMap<String, Vec<CMat>>,
    ) -> Result<Self> {
        let k = structure.index_of(party)?;
        let dims = structure.dims();
        let rest: usize = structure.total_dim() / dims[k];
        let mut local_tree = BTreeMap::new();
        for (h, ops) in tree {
            let mut locals = Vec::with_capacity(ops.len());
            for op in ops {
                if op.nrows() != structure.total_dim() || op.ncols() != structure.total_dim() {
                    return Err(Error::DimensionMismatch(format!("round operator for history `{h}`")));
                }
                let local = partial_trace_raw(&op, &dims, &[k]) * c(1.0 / rest as f64, 0.0);
                let back = embed_raw(&local, &dims, &[k], &[dims[k]]);
                if max_abs(&(back - &op)) > LOCALITY_TOL {
                    return Err(Error::InvalidProtocol(format!(
                        "operator for history `{h}` acts outside party `{party}`"
                    )));
                }
                locals.push(local);
            }
            local_tree.insert(h, locals);
        }
        Ok(Round { party: party.to_string(), tree: local_tree })
    }
}

fn child(history: &str, outcome: usize) -> String {
    if history.is_empty() {
        outcome.to_string()
    } else {
        format!("{history}.{outcome}")
    }
}

/// One leaf of the protocol tree.
#[derive(Clone, Debug)]
pub struct Branch {
    pub history: String,
    /// Product of the embedded Kraus operators along the history.
    pub operator: CMat,
}

#[derive(Clone, Debug)]
pub struct LfoccProtocol {
    structure: TensorStructure,
    rounds: Vec<Round>,
}

impl LfoccProtocol {
    pub fn new(structure: TensorStructure, rounds: Vec<Round>) -> Result<Self> {
        let p = LfoccProtocol { structure, rounds };
        p.validate()?;
        Ok(p)
    }

    pub fn structure(&self) -> &TensorStructure {
        &self.structure
    }

    pub fn rounds(&self) -> &[Round] {
        &self.rounds
    }

    fn validate(&self) -> Result<()> {
        if self.rounds.is_empty() {
            return Err(Error::InvalidProtocol("no rounds".into()));
        }
        for (r, round) in self.rounds.iter().enumerate() {
            let k = self.structure.index_of(&round.party)?;
            let d = self.structure.parties()[k].dim;
            if round.tree.is_empty() {
                return Err(Error::InvalidProtocol(format!("round {r} has no Kraus families")));
            }
            for (h, fam) in &round.tree {
                if fam.is_empty() {
                    return Err(Error::InvalidProtocol(format!("round {r}, history `{h}`: empty family")));
                }
                let mut s = CMat::zeros(d, d);
                for op in fam {
                    if op.nrows() != d || op.ncols() != d {
                        return Err(Error::InvalidProtocol(format!(
                            "round {r}, history `{h}`: operator is {}x{}, party `{}` has dimension {d}",
                            op.nrows(),
                            op.ncols(),
                            round.party
                        )));
                    }
                    s += op.adjoint() * op;
                }
                let defect = max_abs(&(s - CMat::identity(d, d)));
                if defect > FAMILY_TP_TOL {
                    return Err(Error::InvalidProtocol(format!(
                        "round {r}, history `{h}`: family not trace preserving (defect {defect:.3e})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// All leaf histories with their Kraus products.
    pub fn branches(&self) -> Result<Vec<Branch>> {
        let dims = self.structure.dims();
        let n = self.structure.total_dim();
        let mut current = vec![Branch { history: String::new(), operator: CMat::identity(n, n) }];
        for (r, round) in self.rounds.iter().enumerate() {
            let k = self.structure.index_of(&round.party)?;
            let mut next = Vec::new();
            for b in &current {
                let fam = round.family(&b.history).ok_or_else(|| {
                    Error::InvalidProtocol(format!("round {r}: no Kraus family for history `{}`", b.history))
                })?;
                for (o, op) in fam.iter().enumerate() {
                    let e = embed_raw(op, &dims, &[k], &[dims[k]]);
                    next.push(Branch { history: child(&b.history, o), operator: e * &b.operator });
                }
                if next.len() > MAX_BRANCHES {
                    return Err(Error::InvalidProtocol(format!(
                        "protocol has more than {MAX_BRANCHES} branches"
                    )));
                }
            }
            current = next;
        }
        Ok(current)
    }

    /// Global Kraus family formed by all history products.
    pub fn compile(&self) -> Result<KrausChannel> {
        let kraus: Vec<CMat> = self.branches()?.into_iter().map(|b| b.operator).collect();
        let ch = KrausChannel::new_unchecked(kraus, self.structure.clone(), self.structure.clone())?;
        let defect = ch.tp_defect();
        if defect > COMPILE_TP_TOL {
            return Err(Error::InvalidProtocol(format!("compiled channel defect {defect:.3e}")));
        }
        Ok(ch)
    }

    /// Run the protocol round by round, branching on every outcome. The
    /// unnormalised branch states are summed at the end.
    pub fn apply_branching(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        if rho.dim() != self.structure.total_dim() {
            return Err(Error::DimensionMismatch("protocol input".into()));
        }
        let dims = self.structure.dims();
        let mut states = vec![(String::new(), rho.matrix().clone())];
        for round in &self.rounds {
            let k = self.structure.index_of(&round.party)?;
            let mut next = Vec::new();
            for (h, st) in &states {
                let fam = round
                    .family(h)
                    .ok_or_else(|| Error::InvalidProtocol(format!("no Kraus family for history `{h}`")))?;
                for (o, op) in fam.iter().enumerate() {
                    let e = embed_raw(op, &dims, &[k], &[dims[k]]);
                    next.push((child(h, o), &e * st * e.adjoint()));
                }
            }
            states = next;
        }
        let n = self.structure.total_dim();
        let total = states.into_iter().fold(CMat::zeros(n, n), |acc, (_, s)| acc + s);
        Ok(DensityOperator::from_trusted(total, self.structure.clone()))
    }

    /// One stochastic run: outcomes are drawn with their Born probabilities.
    /// Returns the final history and the normalised post-measurement state.
    pub fn sample_trajectory<R: Rng + ?Sized>(
        &self,
        rho: &DensityOperator,
        rng: &mut R,
    ) -> Result<(String, CMat)> {
        let dims = self.structure.dims();
        let mut st = rho.matrix().clone();
        let mut history = String::new();
        for round in &self.rounds {
            let k = self.structure.index_of(&round.party)?;
            let fam = round
                .family(&history)
                .ok_or_else(|| Error::InvalidProtocol(format!("no Kraus family for history `{history}`")))?;
            let posts: Vec<CMat> = fam
                .iter()
                .map(|op| {
                    let e = embed_raw(op, &dims, &[k], &[dims[k]]);
                    &e * &st * e.adjoint()
                })
                .collect();
            let probs: Vec<f64> = posts.iter().map(|m| crate::qcore::matrix::trace(m).re.max(0.0)).collect();
            let total: f64 = probs.iter().sum();
            let mut u = rng.random::<f64>() * total;
            let mut pick = probs.len() - 1;
            for (o, p) in probs.iter().enumerate() {
                if u < *p {
                    pick = o;
                    break;
                }
                u -= p;
            }
            st = &posts[pick] * c(1.0 / probs[pick], 0.0);
            history = child(&history, pick);
        }
        Ok((history, st))
    }

    /// Monte-Carlo estimate of the protocol output from `shots` trajectories.
    pub fn monte_carlo<R: Rng + ?Sized>(
        &self,
        rho: &DensityOperator,
        shots: usize,
        rng: &mut R,
    ) -> Result<CMat> {
        let n = self.structure.total_dim();
        let mut acc = CMat::zeros(n, n);
        for _ in 0..shots {
            acc += self.sample_trajectory(rho, rng)?.1;
        }
        Ok(acc * c(1.0 / shots as f64, 0.0))
    }
}

pub fn compile_lfocc(p: &LfoccProtocol) -> Result<KrausChannel> {
    p.compile()
}

#[derive(Serialize, Deserialize)]
struct RoundRepr {
    party: String,
    tree: BTreeMap<String, Vec<MatrixLiteral>>,
}

/// Protocol file format: `{structure, rounds: [{party, tree: {history: [matrix]}}]}`.
#[derive(Serialize, Deserialize)]
pub struct ProtocolFile {
    structure: TensorStructure,
    rounds: Vec<RoundRepr>,
}

impl TryFrom<ProtocolFile> for LfoccProtocol {
    type Error = Error;
    fn try_from(f: ProtocolFile) -> Result<Self> {
        let mut rounds = Vec::new();
        for r in f.rounds {
            let d = f.structure.parties()[f.structure.index_of(&r.party)?].dim;
            let mut tree = BTreeMap::new();
            for (h, ops) in r.tree {
                tree.insert(h, ops.iter().map(|l| l.to_rect(d, d)).collect::<Result<Vec<_>>>()?);
            }
            rounds.push(Round { party: r.party, tree });
        }
        LfoccProtocol::new(f.structure, rounds)
    }
}

impl From<&LfoccProtocol> for ProtocolFile {
    fn from(p: &LfoccProtocol) -> Self {
        ProtocolFile {
            structure: p.structure.clone(),
            rounds: p
                .rounds
                .iter()
                .map(|r| RoundRepr {
                    party: r.party.clone(),
                    tree: r
                        .tree
                        .iter()
                        .map(|(h, ops)| (h.clone(), ops.iter().map(MatrixLiteral::from_matrix).collect()))
                        .collect(),
                })
                .collect(),
        }
    }
}

impl Serialize for LfoccProtocol {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ProtocolFile::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for LfoccProtocol {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        LfoccProtocol::try_from(ProtocolFile::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::matrix::{diag, from_real_rows};
    use crate::qcore::random::random_density;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ab() -> TensorStructure {
        TensorStructure::from_pairs(&[("A", 2), ("B", 2)]).unwrap()
    }

    fn measure_then_flip() -> LfoccProtocol {
        let x = from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let id = CMat::identity(2, 2);
        let r0 = Round::uniform("A", vec![diag(&[1.0, 0.0]), diag(&[0.0, 1.0])]);
        let r1 = Round { party: "B".into(), tree: [("0".to_string(), vec![id]), ("1".to_string(), vec![x])].into() };
        LfoccProtocol::new(ab(), vec![r0, r1]).unwrap()
    }

    #[test]
    fn identity_protocol_compiles_to_identity() {
        let p = LfoccProtocol::new(ab(), vec![Round::uniform("A", vec![CMat::identity(2, 2)])]).unwrap();
        let ch = p.compile().unwrap();
        assert_eq!(ch.kraus().len(), 1);
        assert!(max_abs(&(&ch.kraus()[0] - CMat::identity(4, 4))) < 1e-15);
    }

    #[test]
    fn compiled_matches_branching_and_monte_carlo() {
        let p = measure_then_flip();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let rho = DensityOperator::new(random_density(4, &mut rng), ab()).unwrap();
        let exact = p.compile().unwrap().apply(&rho).unwrap();
        let branching = p.apply_branching(&rho).unwrap();
        assert!(max_abs(&(exact.matrix() - branching.matrix())) < 1e-12);
        let mc = p.monte_carlo(&rho, 20000, &mut rng).unwrap();
        assert!(max_abs(&(mc - exact.matrix())) < 0.03);
    }

    #[test]
    fn non_trace_preserving_family_is_rejected() {
        let r = Round::uniform("A", vec![diag(&[1.0, 0.0])]);
        assert!(LfoccProtocol::new(ab(), vec![r]).is_err());
    }

    #[test]
    fn missing_history_is_reported() {
        let r0 = Round::uniform("A", vec![diag(&[1.0, 0.0]), diag(&[0.0, 1.0])]);
        let r1 = Round { party: "B".into(), tree: [("0".to_string(), vec![CMat::identity(2, 2)])].into() };
        let p = LfoccProtocol::new(ab(), vec![r0, r1]).unwrap();
        assert!(p.compile().is_err());
    }

    #[test]
    fn branch_cap_is_enforced() {
        let fam: Vec<CMat> = (0..4).map(|_| CMat::identity(2, 2) * c(0.5, 0.0)).collect();
        let rounds = (0..4).map(|_| Round::uniform("A", fam.clone())).collect();
        let p = LfoccProtocol::new(ab(), rounds).unwrap();
        assert!(p.compile().is_err());
    }

    #[test]
    fn global_operators_must_be_local() {
        let s = ab();
        let local = from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let ok = crate::qcore::matrix::kron(&local, &CMat::identity(2, 2));
        assert!(Round::from_global(&s, "A", [("*".to_string(), vec![ok.clone()])].into()).is_ok());
        assert!(Round::from_global(&s, "B", [("*".to_string(), vec![ok])].into()).is_err());
    }

    #[test]
    fn protocol_json_round_trip() {
        let p = measure_then_flip();
        let json = serde_json::to_string(&p).unwrap();
        let back: LfoccProtocol = serde_json::from_str(&json).unwrap();
        assert_eq!(back.rounds().len(), 2);
        assert!(max_abs(&(back.compile().unwrap().choi() - p.compile().unwrap().choi())) < 1e-15);
    }
}
