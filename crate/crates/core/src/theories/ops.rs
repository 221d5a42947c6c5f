//! Free-operation classes and their membership predicates.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sets::{FreeStateSet, SetDescriptor, VerificationMode};
use crate::channels::{KrausChannel, LfoccProtocol};
use crate::error::{Error, Result};
use crate::qcore::matrix::{c, max_imag, CMat, MatrixLiteral};
use crate::qcore::structure::{digits, TensorStructure};

/// Samples used when a set has no finite extreme-point list.
pub const RNG_SAMPLES: usize = 200;
const RNG_SEED: u64 = 0x5eed;

#[derive(Clone, Debug)]
pub enum FreeOpClass {
    /// Strictly incoherent operations in the given basis.
    Sio { basis: Option<CMat> },
    /// Kraus operators with real entries in the given basis.
    RealOps { basis: Option<CMat> },
    Unital,
    AllOps,
    /// Resource non-generating operations for a set.
    Rng(Box<FreeStateSet>),
    /// Round-based local protocols; one class per party label.
    Lfocc(BTreeMap<String, FreeOpClass>),
}

/// How a class verdict was reached.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckMode {
    /// Decided exactly from the given Kraus family.
    KrausForm,
    /// Every extreme point of the set was checked.
    Exhaustive,
    /// Checked on sampled states only.
    Sampled,
    /// Kraus operators factor into local operators that pass the local predicates.
    ProductForm,
    /// Checked round by round on a protocol.
    Protocol,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OpReport {
    pub member: bool,
    pub mode: CheckMode,
    /// Number of states the verdict rests on (RNG checks).
    pub states_checked: usize,
    /// Largest violation seen.
    pub defect: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl OpReport {
    fn exact(member: bool, defect: f64, note: Option<&str>) -> Self {
        OpReport { member, mode: CheckMode::KrausForm, states_checked: 0, defect, note: note.map(str::to_string) }
    }

    /// Human-readable summary, e.g. "verified on 4 states (exhaustive)".
    pub fn summary(&self) -> String {
        match self.mode {
            CheckMode::Exhaustive | CheckMode::Sampled => format!(
                "{} on {} states ({})",
                if self.member { "verified" } else { "violated" },
                self.states_checked,
                if self.mode == CheckMode::Exhaustive { "exhaustive" } else { "sampled" }
            ),
            _ => format!("{} ({:?})", if self.member { "member" } else { "not a member" }, self.mode),
        }
    }
}

fn rotated(basis: &Option<CMat>, k: &CMat) -> Result<CMat> {
    match basis {
        None => Ok(k.clone()),
        Some(u) => {
            if k.nrows() != u.nrows() || k.ncols() != u.nrows() {
                return Err(Error::DimensionMismatch("basis vs Kraus operator".into()));
            }
            Ok(u.adjoint() * k * u)
        }
    }
}

/// Largest magnitude among the entries that break the normal form "at most
/// one nonzero entry per row and per column"; zero if the operator has it.
pub fn sio_defect(k: &CMat, tol: f64) -> f64 {
    let mut worst: f64 = 0.0;
    let line = |entries: Vec<f64>| -> f64 {
        let mut mags: Vec<f64> = entries.into_iter().filter(|&m| m > tol).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        mags.get(1).copied().unwrap_or(0.0)
    };
    for i in 0..k.nrows() {
        worst = worst.max(line((0..k.ncols()).map(|j| k[(i, j)].norm()).collect()));
    }
    for j in 0..k.ncols() {
        worst = worst.max(line((0..k.nrows()).map(|i| k[(i, j)].norm()).collect()));
    }
    worst
}

/// Whether a single operator has the strictly incoherent normal form.
pub fn is_sio_operator(k: &CMat, tol: f64) -> bool {
    sio_defect(k, tol) == 0.0
}

/// Imaginary-part size of an operator after removing a global phase.
fn real_defect_up_to_phase(k: &CMat) -> f64 {
    let big = k.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or(c(0.0, 0.0));
    if big.norm() == 0.0 {
        return 0.0;
    }
    let ph = big.conj() / big.norm();
    max_imag(&(k * ph))
}

/// Split an operator on the given structures into a tensor product of local
/// operators. Returns the factors and the relative size of the discarded
/// part (zero for an exact product).
pub fn factorize(op: &CMat, out_dims: &[usize], in_dims: &[usize]) -> (Vec<CMat>, f64) {
    if out_dims.len() <= 1 {
        return (vec![op.clone()], 0.0);
    }
    let (o1, i1) = (out_dims[0], in_dims[0]);
    let o2: usize = out_dims[1..].iter().product();
    let i2: usize = in_dims[1..].iter().product();
    // Realignment: R[(a,b),(c,d)] = K[(a,c),(b,d)] so that K = A ⊗ B ⇔ R = vec(A) vec(B)ᵀ.
    let mut r = DMatrix::<Complex64>::zeros(o1 * i1, o2 * i2);
    for a in 0..o1 {
        for b in 0..i1 {
            for cc in 0..o2 {
                for d in 0..i2 {
                    r[(a * i1 + b, cc * i2 + d)] = op[(a * o2 + cc, b * i2 + d)];
                }
            }
        }
    }
    let svd = r.svd(true, true);
    let s = &svd.singular_values;
    let (kmax, smax) = s.iter().enumerate().fold((0, 0.0), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc });
    if smax == 0.0 {
        let mut out = vec![CMat::zeros(o1, i1)];
        let (rest, _) = factorize(&CMat::zeros(o2, i2), &out_dims[1..], &in_dims[1..]);
        out.extend(rest);
        return (out, 0.0);
    }
    let tail: f64 = s.iter().enumerate().filter(|(k, _)| *k != kmax).map(|(_, v)| v * v).sum::<f64>().sqrt();
    let u = svd.u.as_ref().unwrap().column(kmax).into_owned();
    let vt = svd.v_t.as_ref().unwrap().row(kmax).into_owned();
    let sq = smax.sqrt();
    let a = CMat::from_fn(o1, i1, |x, y| u[x * i1 + y] * sq);
    let b = CMat::from_fn(o2, i2, |x, y| vt[x * i2 + y] * sq);
    let (mut rest, rdef) = factorize(&b, &out_dims[1..], &in_dims[1..]);
    let mut out = vec![a];
    out.append(&mut rest);
    (out, (tail / smax).max(rdef))
}

impl FreeOpClass {
    pub fn name(&self) -> &'static str {
        match self {
            FreeOpClass::Sio { .. } => "sio",
            FreeOpClass::RealOps { .. } => "real_ops",
            FreeOpClass::Unital => "unital",
            FreeOpClass::AllOps => "all_ops",
            FreeOpClass::Rng(_) => "rng",
            FreeOpClass::Lfocc(_) => "lfocc",
        }
    }

    /// Predicate for a single local operator, where one is defined.
    fn operator_defect(&self, k: &CMat, tol: f64) -> Result<Option<f64>> {
        match self {
            FreeOpClass::Sio { basis } => Ok(Some(sio_defect(&rotated(basis, k)?, tol))),
            FreeOpClass::RealOps { basis } => Ok(Some(real_defect_up_to_phase(&rotated(basis, k)?))),
            _ => Ok(None),
        }
    }
}

/// Decide whether a channel belongs to a class.
pub fn op_in_class(ch: &KrausChannel, class: &FreeOpClass, tol: f64) -> Result<OpReport> {
    match class {
        FreeOpClass::Sio { basis } => {
            let mut worst: f64 = 0.0;
            for k in ch.kraus() {
                worst = worst.max(sio_defect(&rotated(basis, k)?, tol));
            }
            Ok(OpReport::exact(worst == 0.0, worst, Some("tested on the given Kraus representation")))
        }
        FreeOpClass::RealOps { basis } => {
            let mut worst: f64 = 0.0;
            for k in ch.kraus() {
                worst = worst.max(max_imag(&rotated(basis, k)?));
            }
            Ok(OpReport::exact(worst <= tol, worst, Some("tested on the given Kraus representation")))
        }
        FreeOpClass::Unital => {
            if ch.in_dim() != ch.out_dim() {
                return Ok(OpReport::exact(false, f64::INFINITY, Some("not a square channel")));
            }
            let d = crate::channels::kraus::unitality_defect(ch);
            Ok(OpReport::exact(d <= tol, d, None))
        }
        FreeOpClass::AllOps => Ok(OpReport::exact(true, 0.0, None)),
        FreeOpClass::Rng(set) => rng_check(ch, set, tol, RNG_SAMPLES, RNG_SEED),
        FreeOpClass::Lfocc(classes) => lfocc_product_check(ch, classes, tol),
    }
}

/// `Λ(μ) ∈ S` on a verification set of `S`.
pub fn rng_check(ch: &KrausChannel, set: &FreeStateSet, tol: f64, samples: usize, seed: u64) -> Result<OpReport> {
    if ch.in_dim() != set.dim() || ch.out_dim() != set.dim() {
        return Err(Error::DimensionMismatch("channel vs free set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (states, mode) = set.verification_states(samples, &mut rng);
    let membership_tol = tol.max(super::sets::MEMBERSHIP_TOL);
    let mut member = true;
    let mut note = None;
    for (k, mu) in states.iter().enumerate() {
        let out = crate::qcore::matrix::hermitize(&ch.apply_mat(mu));
        if !set.contains_mat(&out, membership_tol) {
            member = false;
            note = Some(format!("image of verification state {k} is not free"));
            break;
        }
    }
    Ok(OpReport {
        member,
        mode: match mode {
            VerificationMode::Exhaustive => CheckMode::Exhaustive,
            VerificationMode::Sampled => CheckMode::Sampled,
        },
        states_checked: states.len(),
        defect: 0.0,
        note,
    })
}

/// A bare channel passes when every Kraus operator is a product of local
/// operators that each pass their party's predicate.
fn lfocc_product_check(ch: &KrausChannel, classes: &BTreeMap<String, FreeOpClass>, tol: f64) -> Result<OpReport> {
    let ins = ch.in_structure();
    let outs = ch.out_structure();
    if ins.len() != outs.len() {
        return Err(Error::DimensionMismatch("input and output party counts differ".into()));
    }
    let labels: Vec<&str> = ins.labels();
    for l in &labels {
        if !classes.contains_key(*l) {
            return Err(Error::UnknownParty(l.to_string()));
        }
    }
    let mut worst: f64 = 0.0;
    let mut member = true;
    for k in ch.kraus() {
        let (factors, res) = factorize(k, &outs.dims(), &ins.dims());
        worst = worst.max(res);
        if res > tol.max(1e-9) {
            member = false;
            continue;
        }
        for (f, l) in factors.iter().zip(&labels) {
            if let Some(d) = classes[*l].operator_defect(f, tol)? {
                worst = worst.max(d);
                if d > tol {
                    member = false;
                }
            }
        }
    }
    Ok(OpReport {
        member,
        mode: CheckMode::ProductForm,
        states_checked: 0,
        defect: worst,
        note: Some("necessary product-form test; protocol-level verification is authoritative".into()),
    })
}

/// Check every round family of a protocol against the acting party's class.
pub fn protocol_in_classes(p: &LfoccProtocol, classes: &BTreeMap<String, FreeOpClass>, tol: f64) -> Result<OpReport> {
    let s = p.structure();
    let mut worst: f64 = 0.0;
    let mut member = true;
    let mut note = None;
    for (r, round) in p.rounds().iter().enumerate() {
        let class = classes.get(&round.party).ok_or_else(|| Error::UnknownParty(round.party.clone()))?;
        let k = s.index_of(&round.party)?;
        let local = TensorStructure::single(&round.party, s.parties()[k].dim);
        for (h, fam) in &round.tree {
            let ok = match class.operator_defect(&fam[0], tol)? {
                Some(_) => {
                    let mut ok = true;
                    for op in fam {
                        let d = class.operator_defect(op, tol)?.unwrap_or(0.0);
                        worst = worst.max(d);
                        ok &= d <= tol;
                    }
                    ok
                }
                None => {
                    let ch = KrausChannel::on(fam.clone(), local.clone())?;
                    op_in_class(&ch, class, tol)?.member
                }
            };
            if !ok && member {
                member = false;
                note = Some(format!("round {r}, history `{h}` violates the {} class", class.name()));
            }
        }
    }
    Ok(OpReport { member, mode: CheckMode::Protocol, states_checked: 0, defect: worst, note })
}

/// Whether operator `k` on `dims` acts as identity outside the positions in `keep`.
pub fn acts_only_on(k: &CMat, dims: &[usize], keep: &[usize], tol: f64) -> bool {
    let n = k.nrows();
    let mut di = vec![0; dims.len()];
    let mut dj = vec![0; dims.len()];
    for i in 0..n {
        digits(i, dims, &mut di);
        for j in 0..n {
            digits(j, dims, &mut dj);
            let outside_differs = (0..dims.len()).any(|p| !keep.contains(&p) && di[p] != dj[p]);
            if outside_differs && k[(i, j)].norm() > tol {
                return false;
            }
        }
    }
    true
}

/// JSON form: `{kind, basis?, set?, parties?}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OpClassDescriptor {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<MatrixLiteral>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set: Option<SetDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parties: Option<BTreeMap<String, OpClassDescriptor>>,
}

impl TryFrom<&OpClassDescriptor> for FreeOpClass {
    type Error = Error;
    fn try_from(d: &OpClassDescriptor) -> Result<Self> {
        let basis = d.basis.as_ref().map(|b| b.to_matrix()).transpose()?;
        match d.kind.as_str() {
            "sio" => Ok(FreeOpClass::Sio { basis }),
            "real_ops" => Ok(FreeOpClass::RealOps { basis }),
            "unital" => Ok(FreeOpClass::Unital),
            "all_ops" => Ok(FreeOpClass::AllOps),
            "rng" => {
                let s = d.set.as_ref().ok_or_else(|| Error::Parse("rng class needs `set`".into()))?;
                Ok(FreeOpClass::Rng(Box::new(FreeStateSet::try_from(s)?)))
            }
            "lfocc" => {
                let ps = d.parties.as_ref().ok_or_else(|| Error::Parse("lfocc class needs `parties`".into()))?;
                let mut m = BTreeMap::new();
                for (k, v) in ps {
                    m.insert(k.clone(), FreeOpClass::try_from(v)?);
                }
                Ok(FreeOpClass::Lfocc(m))
            }
            other => Err(Error::Parse(format!("unknown operation class `{other}`"))),
        }
    }
}

impl From<&FreeOpClass> for OpClassDescriptor {
    fn from(c: &FreeOpClass) -> Self {
        let mut d = OpClassDescriptor { kind: c.name().to_string(), basis: None, set: None, parties: None };
        match c {
            FreeOpClass::Sio { basis } | FreeOpClass::RealOps { basis } => {
                d.basis = basis.as_ref().map(MatrixLiteral::from_matrix)
            }
            FreeOpClass::Rng(s) => d.set = Some(SetDescriptor::from(s.as_ref())),
            FreeOpClass::Lfocc(m) => {
                d.parties = Some(m.iter().map(|(k, v)| (k.clone(), OpClassDescriptor::from(v))).collect())
            }
            _ => {}
        }
        d
    }
}

impl Serialize for FreeOpClass {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        OpClassDescriptor::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for FreeOpClass {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let desc = OpClassDescriptor::deserialize(d)?;
        FreeOpClass::try_from(&desc).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::matrix::{from_real_rows, kron};
    use crate::qcore::random::ginibre;

    #[test]
    fn factorize_recovers_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = ginibre(2, 2, &mut rng);
        let b = ginibre(3, 3, &mut rng);
        let (f, res) = factorize(&kron(&a, &b), &[2, 3], &[2, 3]);
        assert!(res < 1e-12);
        assert!(crate::qcore::matrix::max_abs(&(kron(&f[0], &f[1]) - kron(&a, &b))) < 1e-12);
    }

    #[test]
    fn factorize_flags_entangling_operator() {
        let cnot = from_real_rows(&[
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
            &[0.0, 0.0, 1.0, 0.0],
        ]);
        let (_, res) = factorize(&cnot, &[2, 2], &[2, 2]);
        assert!(res > 0.5);
    }

    #[test]
    fn sio_normal_form() {
        let x = from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let h = from_real_rows(&[&[1.0, 1.0], &[1.0, -1.0]]);
        assert!(is_sio_operator(&x, 1e-12));
        assert!(!is_sio_operator(&h, 1e-12));
    }
}
