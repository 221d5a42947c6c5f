use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::qcore::eig::{eigh, trace_norm};
use crate::qcore::matrix::{c, hermitize, max_abs, CMat, MatrixLiteral, ZERO};
use crate::qcore::state::{DensityOperator, HermitianOperator};
use crate::qcore::structure::TensorStructure;
use crate::qcore::tensor_ops::{embed_raw, partial_trace_raw};

/// Trace-preservation tolerance.
pub const TP_TOL: f64 = 1e-9;

/// A quantum channel as a Kraus family `{K_k}` with `Σ K_k† K_k = I`.
#[derive(Clone, Debug)]
pub struct KrausChannel {
    kraus: Vec<CMat>,
    in_structure: TensorStructure,
    out_structure: TensorStructure,
}

impl KrausChannel {
    pub fn new(
        kraus: Vec<CMat>,
        in_structure: TensorStructure,
        out_structure: TensorStructure,
    ) -> Result<Self> {
        let ch = Self::new_unchecked(kraus, in_structure, out_structure)?;
        let defect = ch.tp_defect();
        if defect > TP_TOL {
            return Err(Error::InvalidChannel(format!("not trace preserving (defect {defect:.3e})")));
        }
        Ok(ch)
    }

    /// Shape checks only; used for sub-normalised branch families.
    pub(crate) fn new_unchecked(
        kraus: Vec<CMat>,
        in_structure: TensorStructure,
        out_structure: TensorStructure,
    ) -> Result<Self> {
        if kraus.is_empty() {
            return Err(Error::InvalidChannel("empty Kraus family".into()));
        }
        let din = in_structure.total_dim();
        let dout = out_structure.total_dim();
        for k in &kraus {
            if k.nrows() != dout || k.ncols() != din {
                return Err(Error::DimensionMismatch(format!(
                    "Kraus operator is {}x{}, channel is {}->{}",
                    k.nrows(),
                    k.ncols(),
                    din,
                    dout
                )));
            }
        }
        Ok(KrausChannel { kraus, in_structure, out_structure })
    }

    /// Square channel on one structure.
    pub fn on(kraus: Vec<CMat>, structure: TensorStructure) -> Result<Self> {
        Self::new(kraus, structure.clone(), structure)
    }

    pub fn identity(structure: TensorStructure) -> Self {
        let d = structure.total_dim();
        KrausChannel { kraus: vec![CMat::identity(d, d)], in_structure: structure.clone(), out_structure: structure }
    }

    pub fn unitary(u: CMat, structure: TensorStructure) -> Result<Self> {
        if crate::qcore::matrix::unitarity_defect(&u) > TP_TOL {
            return Err(Error::InvalidChannel("matrix is not unitary".into()));
        }
        Self::on(vec![u], structure)
    }

    /// Replacement channel `X ↦ Tr(X) γ`.
    pub fn replacer(in_structure: TensorStructure, gamma: &DensityOperator) -> Self {
        let din = in_structure.total_dim();
        let e = eigh(gamma.matrix());
        let mut kraus = Vec::new();
        for (k, &l) in e.values.iter().enumerate() {
            if l <= 1e-14 {
                continue;
            }
            let v = e.vector(k);
            for i in 0..din {
                kraus.push(CMat::from_fn(v.len(), din, |r, col| if col == i { v[r] * l.sqrt() } else { ZERO }));
            }
        }
        KrausChannel { kraus, in_structure, out_structure: gamma.structure().clone() }
    }

    /// Measure-and-prepare `X ↦ Σ_k Tr(M_k X) γ_k` for a POVM `{M_k}`.
    pub fn measure_prepare(
        povm: &[CMat],
        states: &[DensityOperator],
        in_structure: TensorStructure,
    ) -> Result<Self> {
        if povm.len() != states.len() || povm.is_empty() {
            return Err(Error::InvalidChannel("POVM and state lists differ in length".into()));
        }
        let out_structure = states[0].structure().clone();
        let mut kraus = Vec::new();
        for (m, g) in povm.iter().zip(states) {
            let sm = crate::qcore::eig::sqrt_psd(m);
            let e = eigh(g.matrix());
            for (k, &l) in e.values.iter().enumerate() {
                if l <= 1e-14 {
                    continue;
                }
                let v = e.vector(k);
                let ket = CMat::from_fn(v.len(), 1, |r, _| v[r] * l.sqrt());
                // |s_k⟩⟨a| √M for each row a of √M.
                for a in 0..sm.nrows() {
                    let bra = sm.row(a).into_owned();
                    kraus.push(&ket * bra);
                }
            }
        }
        Self::new(kraus, in_structure, out_structure)
    }

    pub fn kraus(&self) -> &[CMat] {
        &self.kraus
    }

    pub fn in_structure(&self) -> &TensorStructure {
        &self.in_structure
    }

    pub fn out_structure(&self) -> &TensorStructure {
        &self.out_structure
    }

    pub fn in_dim(&self) -> usize {
        self.in_structure.total_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.out_structure.total_dim()
    }

    /// ‖Σ K†K − I‖_max.
    pub fn tp_defect(&self) -> f64 {
        let d = self.in_dim();
        let mut s = CMat::zeros(d, d);
        for k in &self.kraus {
            s += k.adjoint() * k;
        }
        max_abs(&(s - CMat::identity(d, d)))
    }

    /// Linear action on an arbitrary operator.
    pub fn apply_mat(&self, x: &CMat) -> CMat {
        let mut out = CMat::zeros(self.out_dim(), self.out_dim());
        for k in &self.kraus {
            out += k * x * k.adjoint();
        }
        out
    }

    /// Heisenberg-picture action `Σ K† Y K`.
    pub fn adjoint_apply(&self, y: &CMat) -> CMat {
        let mut out = CMat::zeros(self.in_dim(), self.in_dim());
        for k in &self.kraus {
            out += k.adjoint() * y * k;
        }
        out
    }

    pub fn apply(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        if rho.dim() != self.in_dim() {
            return Err(Error::DimensionMismatch(format!(
                "channel input dimension {} vs state dimension {}",
                self.in_dim(),
                rho.dim()
            )));
        }
        Ok(DensityOperator::from_trusted(self.apply_mat(rho.matrix()), self.out_structure.clone()))
    }

    /// `self ∘ first`.
    pub fn after(&self, first: &KrausChannel) -> Result<KrausChannel> {
        compose(self, first)
    }

    /// Parallel composition on concatenated structures.
    pub fn tensor(&self, other: &KrausChannel) -> KrausChannel {
        let mut kraus = Vec::with_capacity(self.kraus.len() * other.kraus.len());
        for a in &self.kraus {
            for b in &other.kraus {
                kraus.push(a.kronecker(b));
            }
        }
        KrausChannel {
            kraus,
            in_structure: self.in_structure.concat(&other.in_structure),
            out_structure: self.out_structure.concat(&other.out_structure),
        }
    }

    /// Act on the parties `labels` of `structure` (identity elsewhere).
    /// The channel must be square on those parties.
    pub fn embed(&self, structure: &TensorStructure, labels: &[&str]) -> Result<KrausChannel> {
        let pos = structure.positions(labels)?;
        let sub: Vec<usize> = pos.iter().map(|&k| structure.parties()[k].dim).collect();
        if sub != self.in_structure.dims() || sub != self.out_structure.dims() {
            return Err(Error::DimensionMismatch(format!(
                "channel dims {:?} do not match parties {labels:?}",
                self.in_structure.dims()
            )));
        }
        let dims = structure.dims();
        let kraus = self.kraus.iter().map(|k| embed_raw(k, &dims, &pos, &sub)).collect();
        Ok(KrausChannel { kraus, in_structure: structure.clone(), out_structure: structure.clone() })
    }

    /// Same Kraus operators, relabelled structures of equal shape.
    pub fn with_structures(&self, input: TensorStructure, output: TensorStructure) -> Result<KrausChannel> {
        if input.total_dim() != self.in_dim() || output.total_dim() != self.out_dim() {
            return Err(Error::DimensionMismatch("restructure changes dimension".into()));
        }
        Ok(KrausChannel { kraus: self.kraus.clone(), in_structure: input, out_structure: output })
    }

    /// Choi matrix `J = Σ_ij |i⟩⟨j| ⊗ Λ(|i⟩⟨j|)` (input factor first).
    pub fn choi(&self) -> CMat {
        let din = self.in_dim();
        let dout = self.out_dim();
        let mut j = CMat::zeros(din * dout, din * dout);
        for k in &self.kraus {
            // |K⟩⟩ = Σ_i |i⟩ ⊗ K|i⟩
            let v: Vec<_> = (0..din).flat_map(|i| (0..dout).map(move |o| (i, o))).map(|(i, o)| k[(o, i)]).collect();
            for a in 0..v.len() {
                if v[a] == ZERO {
                    continue;
                }
                for b in 0..v.len() {
                    j[(a, b)] += v[a] * v[b].conj();
                }
            }
        }
        j
    }

    /// Minimal Kraus family from a Choi matrix (input factor first).
    pub fn from_choi(j: &CMat, in_structure: TensorStructure, out_structure: TensorStructure) -> Result<Self> {
        let din = in_structure.total_dim();
        let dout = out_structure.total_dim();
        if j.nrows() != din * dout {
            return Err(Error::DimensionMismatch("Choi matrix size".into()));
        }
        let e = eigh(&hermitize(j));
        let scale = e.max().abs().max(1.0);
        if e.min() < -1e-9 * scale {
            return Err(Error::InvalidChannel(format!(
                "Choi matrix not positive (min eigenvalue {:.3e})",
                e.min()
            )));
        }
        let mut kraus = Vec::new();
        for (k, &l) in e.values.iter().enumerate().rev() {
            if l <= 1e-13 * scale {
                continue;
            }
            let v = e.vector(k);
            let s = l.sqrt();
            kraus.push(CMat::from_fn(dout, din, |o, i| v[i * dout + o] * s));
        }
        if kraus.is_empty() {
            return Err(Error::InvalidChannel("zero Choi matrix".into()));
        }
        Self::new(kraus, in_structure, out_structure)
    }

    /// True when ‖Λ(I/d) − I/d‖₁ ≤ tol. Non-square channels are never unital.
    pub fn is_unital(&self, tol: f64) -> bool {
        if self.in_dim() != self.out_dim() {
            return false;
        }
        unitality_defect(self) <= tol
    }

    /// Convex mixture `Σ w_k Λ_k` as one Kraus family with √w scaling.
    pub fn mixture(weights: &[f64], channels: &[KrausChannel]) -> Result<KrausChannel> {
        let first = channels.first().ok_or_else(|| Error::InvalidChannel("empty mixture".into()))?;
        if weights.len() != channels.len() {
            return Err(Error::InvalidChannel("weights and channels differ in length".into()));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|&w| w < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::OutOfRange("mixture weights must form a probability vector".into()));
        }
        let mut kraus = Vec::new();
        for (w, ch) in weights.iter().zip(channels) {
            if ch.in_dim() != first.in_dim() || ch.out_dim() != first.out_dim() {
                return Err(Error::DimensionMismatch("mixture components".into()));
            }
            if *w == 0.0 {
                continue;
            }
            kraus.extend(ch.kraus.iter().map(|k| k * c(w.sqrt(), 0.0)));
        }
        Self::new(kraus, first.in_structure.clone(), first.out_structure.clone())
    }

    /// Merge Kraus operators through the Choi matrix (minimal rank family).
    pub fn canonical(&self) -> Result<KrausChannel> {
        Self::from_choi(&self.choi(), self.in_structure.clone(), self.out_structure.clone())
    }
}

/// ‖Λ(I/d) − I/d‖₁.
pub fn unitality_defect(ch: &KrausChannel) -> f64 {
    let d = ch.in_dim();
    let mixed = CMat::identity(d, d) * c(1.0 / d as f64, 0.0);
    trace_norm(&(ch.apply_mat(&mixed) - mixed))
}

pub fn apply(ch: &KrausChannel, rho: &DensityOperator) -> Result<DensityOperator> {
    ch.apply(rho)
}

/// `second ∘ first`.
pub fn compose(second: &KrausChannel, first: &KrausChannel) -> Result<KrausChannel> {
    if first.out_dim() != second.in_dim() || first.out_structure.dims() != second.in_structure.dims() {
        return Err(Error::DimensionMismatch(format!(
            "cannot compose: first outputs {:?}, second takes {:?}",
            first.out_structure.dims(),
            second.in_structure.dims()
        )));
    }
    let mut kraus = Vec::with_capacity(first.kraus.len() * second.kraus.len());
    for b in &second.kraus {
        for a in &first.kraus {
            kraus.push(b * a);
        }
    }
    KrausChannel::new(kraus, first.in_structure.clone(), second.out_structure.clone())
}

pub fn is_unital(ch: &KrausChannel, tol: f64) -> bool {
    ch.is_unital(tol)
}

/// Effective single-party map `X ↦ Tr_ī Λ(X ⊗ ⊗_{j≠i} ρ_j)` as a Kraus
/// family, obtained by re-factorising its Choi matrix.
///
/// `target` labels a party present in both the input and the output
/// structure; `frozen` must supply a state for every other input party.
pub fn marginal_channel(
    ch: &KrausChannel,
    target: &str,
    frozen: &BTreeMap<String, DensityOperator>,
) -> Result<KrausChannel> {
    let ins = ch.in_structure();
    let outs = ch.out_structure();
    let t_in = ins.index_of(target)?;
    let t_out = outs.index_of(target)?;
    let dt = ins.parties()[t_in].dim;
    let dt_out = outs.parties()[t_out].dim;

    let mut factors: Vec<Option<CMat>> = Vec::with_capacity(ins.len());
    for (k, p) in ins.parties().iter().enumerate() {
        if k == t_in {
            factors.push(None);
            continue;
        }
        let st = frozen
            .get(&p.label)
            .ok_or_else(|| Error::Precondition(format!("missing frozen input for party `{}`", p.label)))?;
        if st.dim() != p.dim {
            return Err(Error::DimensionMismatch(format!("frozen input for `{}`", p.label)));
        }
        factors.push(Some(st.matrix().clone()));
    }

    let out_dims = outs.dims();
    let mut j = CMat::zeros(dt * dt_out, dt * dt_out);
    for a in 0..dt {
        for b in 0..dt {
            let mut x = CMat::identity(1, 1);
            for f in &factors {
                let m = match f {
                    Some(m) => m.clone(),
                    None => {
                        let mut e = CMat::zeros(dt, dt);
                        e[(a, b)] = c(1.0, 0.0);
                        e
                    }
                };
                x = x.kronecker(&m);
            }
            let y = partial_trace_raw(&ch.apply_mat(&x), &out_dims, &[t_out]);
            for o in 0..dt_out {
                for p in 0..dt_out {
                    j[(a * dt_out + o, b * dt_out + p)] = y[(o, p)];
                }
            }
        }
    }
    KrausChannel::from_choi(
        &j,
        TensorStructure::single(target, dt),
        TensorStructure::single(target, dt_out),
    )
}

/// Diagnostic variant: every other input party is fed the maximally mixed state.
pub fn marginal_channel_mixed(ch: &KrausChannel, target: &str) -> Result<KrausChannel> {
    let frozen: BTreeMap<String, DensityOperator> = ch
        .in_structure()
        .parties()
        .iter()
        .filter(|p| p.label != target)
        .map(|p| (p.label.clone(), DensityOperator::maximally_mixed(TensorStructure::single(&p.label, p.dim))))
        .collect();
    marginal_channel(ch, target, &frozen)
}

/// Effective POVM element on the unfrozen input parties:
/// `E = Tr_frozen[(I ⊗ √τ) Λ†(P_measured ⊗ I) (I ⊗ √τ)]`,
/// so that `Tr[(P ⊗ I) Λ(ρ ⊗ τ)] = Tr[E ρ]`.
pub fn effective_povm(
    ch: &KrausChannel,
    element: &HermitianOperator,
    measured_party: &str,
    frozen: &BTreeMap<String, DensityOperator>,
) -> Result<HermitianOperator> {
    let outs = ch.out_structure();
    let m = outs.index_of(measured_party)?;
    if element.dim() != outs.parties()[m].dim {
        return Err(Error::DimensionMismatch("POVM element size".into()));
    }
    let dims = outs.dims();
    let big = embed_raw(element.matrix(), &dims, &[m], &[element.dim()]);
    let heis = ch.adjoint_apply(&big);

    let ins = ch.in_structure();
    let in_dims = ins.dims();
    let mut keep = Vec::new();
    let mut sqrt_factors = Vec::with_capacity(ins.len());
    for (k, p) in ins.parties().iter().enumerate() {
        match frozen.get(&p.label) {
            Some(st) => {
                if st.dim() != p.dim {
                    return Err(Error::DimensionMismatch(format!("frozen input for `{}`", p.label)));
                }
                sqrt_factors.push(crate::qcore::eig::sqrt_psd(st.matrix()));
            }
            None => {
                keep.push(k);
                sqrt_factors.push(CMat::identity(p.dim, p.dim));
            }
        }
    }
    if keep.is_empty() {
        return Err(Error::Precondition("every input party is frozen".into()));
    }
    let s = crate::qcore::matrix::kron_all(&sqrt_factors);
    let sandwiched = &s * heis * &s;
    Ok(HermitianOperator::from_hermitized(&partial_trace_raw(&sandwiched, &in_dims, &keep)))
}

/// Channel file format `{in_dims, out_dims, kraus: [matrix literal]}` with
/// optional party labels.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChannelFile {
    pub in_dims: Vec<usize>,
    pub out_dims: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in_labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_labels: Option<Vec<String>>,
    pub kraus: Vec<MatrixLiteral>,
}

fn structure_from(dims: &[usize], labels: Option<&Vec<String>>) -> Result<TensorStructure> {
    let parties = dims
        .iter()
        .enumerate()
        .map(|(k, &d)| crate::qcore::structure::Party {
            label: labels.and_then(|l| l.get(k).cloned()).unwrap_or_else(|| k.to_string()),
            dim: d,
        })
        .collect();
    TensorStructure::new(parties)
}

impl TryFrom<ChannelFile> for KrausChannel {
    type Error = Error;
    fn try_from(f: ChannelFile) -> Result<Self> {
        let ins = structure_from(&f.in_dims, f.in_labels.as_ref())?;
        let outs = structure_from(&f.out_dims, f.out_labels.as_ref())?;
        let (din, dout) = (ins.total_dim(), outs.total_dim());
        let kraus = f.kraus.iter().map(|l| l.to_rect(dout, din)).collect::<Result<Vec<_>>>()?;
        KrausChannel::new(kraus, ins, outs)
    }
}

impl From<&KrausChannel> for ChannelFile {
    fn from(ch: &KrausChannel) -> Self {
        let labels = |s: &TensorStructure| s.labels().iter().map(|l| l.to_string()).collect::<Vec<_>>();
        ChannelFile {
            in_dims: ch.in_structure.dims(),
            out_dims: ch.out_structure.dims(),
            in_labels: Some(labels(&ch.in_structure)),
            out_labels: Some(labels(&ch.out_structure)),
            kraus: ch.kraus.iter().map(MatrixLiteral::from_matrix).collect(),
        }
    }
}

impl Serialize for KrausChannel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ChannelFile::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for KrausChannel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let f = ChannelFile::deserialize(d)?;
        KrausChannel::try_from(f).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::matrix::from_real_rows;
    use crate::qcore::random::{haar_unitary, random_density};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn qubit(label: &str) -> TensorStructure {
        TensorStructure::single(label, 2)
    }

    fn pauli_x() -> CMat {
        from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
    }

    fn dephasing(label: &str) -> KrausChannel {
        KrausChannel::on(vec![crate::qcore::matrix::diag(&[1.0, 0.0]), crate::qcore::matrix::diag(&[0.0, 1.0])], qubit(label))
            .unwrap()
    }

    #[test]
    fn pauli_x_flips_zero() {
        let x = KrausChannel::unitary(pauli_x(), qubit("A")).unwrap();
        let zero = DensityOperator::new(from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]]), qubit("A")).unwrap();
        let out = x.apply(&zero).unwrap();
        assert!((out.matrix()[(1, 1)].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dephasing_is_idempotent_and_unital() {
        let d = dephasing("A");
        let dd = compose(&d, &d).unwrap();
        assert!(max_abs(&(dd.choi() - d.choi())) < 1e-14);
        assert!(d.is_unital(1e-12));
    }

    #[test]
    fn choi_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = haar_unitary(2, &mut rng);
        let ch = KrausChannel::mixture(
            &[0.3, 0.7],
            &[KrausChannel::unitary(u, qubit("A")).unwrap(), dephasing("A")],
        )
        .unwrap();
        let back = ch.canonical().unwrap();
        let rho = random_density(2, &mut rng);
        assert!(max_abs(&(back.apply_mat(&rho) - ch.apply_mat(&rho))) < 1e-12);
    }

    #[test]
    fn replacer_is_not_unital() {
        let zero = DensityOperator::new(from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]]), qubit("A")).unwrap();
        let r = KrausChannel::replacer(qubit("A"), &zero);
        assert!(!r.is_unital(1e-6));
        assert!((unitality_defect(&r) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn marginal_of_product_channel_recovers_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = KrausChannel::unitary(haar_unitary(2, &mut rng), qubit("A")).unwrap();
        let b = dephasing("B");
        let ab = a.tensor(&b);
        let frozen_b = DensityOperator::new(random_density(2, &mut rng), qubit("B")).unwrap();
        let frozen: BTreeMap<_, _> = [("B".to_string(), frozen_b)].into();
        let m = marginal_channel(&ab, "A", &frozen).unwrap();
        // Spanning operator basis: the matrix units.
        for i in 0..2 {
            for j in 0..2 {
                let mut e = CMat::zeros(2, 2);
                e[(i, j)] = c(1.0, 0.0);
                assert!(max_abs(&(m.apply_mat(&e) - a.apply_mat(&e))) < 1e-12);
            }
        }
    }

    #[test]
    fn effective_povm_through_swap() {
        let s = TensorStructure::from_pairs(&[("A", 2), ("B", 2)]).unwrap();
        let swap = crate::qcore::tensor_ops::permutation_matrix(&[2, 2], &[1, 0]);
        let ch = KrausChannel::unitary(swap, s).unwrap();
        let p = HermitianOperator::new(from_real_rows(&[&[0.7, 0.2], &[0.2, 0.4]])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let tau = DensityOperator::new(random_density(2, &mut rng), qubit("B")).unwrap();
        let frozen: BTreeMap<_, _> = [("B".to_string(), tau)].into();
        let e = effective_povm(&ch, &p, "B", &frozen).unwrap();
        assert!(max_abs(&(e.matrix() - p.matrix())) < 1e-12);
    }

    #[test]
    fn channel_file_round_trip() {
        let ch = dephasing("A");
        let json = serde_json::to_string(&ch).unwrap();
        let back: KrausChannel = serde_json::from_str(&json).unwrap();
        assert_eq!(back.kraus(), ch.kraus());
        let bad = r#"{"in_dims":[2],"out_dims":[2],"kraus":[{"dim":2,"re":[1,0,0,0.5]}]}"#;
        assert!(serde_json::from_str::<KrausChannel>(bad).is_err());
    }
}
