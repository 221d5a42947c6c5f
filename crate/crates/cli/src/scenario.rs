//! Scenario files: what to compute, on which inputs, and what to expect.

use std::collections::BTreeMap;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use qrt::catalog;
use qrt::channels::kraus::ChannelFile;
use qrt::channels::KrausChannel;
use qrt::qcore::matrix::MatrixLiteral;
use qrt::qcore::state::DensityOperator;
use qrt::theories::ops::OpClassDescriptor;
use qrt::theories::sets::SetDescriptor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Divergence,
    SingleShot,
    Conversion,
    Assisted,
    Certification,
    Axioms,
    BpAxioms,
    Counterexample,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    /// Solver tolerance for hypothesis testing and D_max.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Verification states for sampled membership checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

/// Expected value of one named result. Numbers match within `tol` (default
/// 1e-9); `min`/`max` bound a number; anything else must be equal.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub kind: Kind,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    /// Short statements of what the scenario reproduces.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub anchors: Vec<String>,
    pub inputs: Value,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub expected: BTreeMap<String, Expectation>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).context("scenario does not match the schema")?;
        s.validate()?;
        Ok(s)
    }

    /// Resolve every input so schema problems surface before any computation.
    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            bail!("scenario name is empty");
        }
        if let Some(eps) = self.params.eps {
            if !(eps > 0.0 && eps < 1.0) {
                bail!("params.eps must lie in (0, 1), got {eps}");
            }
        }
        if let Some(gap) = self.params.gap {
            if !(gap > 0.0) {
                bail!("params.gap must be positive, got {gap}");
            }
        }
        for (k, e) in &self.expected {
            if e.value.is_none() && e.min.is_none() && e.max.is_none() {
                bail!("expected.{k} declares neither `value` nor a bound");
            }
        }
        Inputs::parse(self.kind, &self.inputs)?.resolve_all()
    }
}

/// A state given inline or by catalog name.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateRef {
    Catalog {
        catalog: String,
        #[serde(default)]
        labels: Vec<String>,
    },
    Explicit(DensityOperator),
}

fn label<'a>(labels: &'a [String], k: usize, default: &'a str) -> &'a str {
    labels.get(k).map(String::as_str).unwrap_or(default)
}

impl StateRef {
    pub fn resolve(&self) -> Result<DensityOperator> {
        let (name, labels) = match self {
            StateRef::Explicit(s) => return Ok(s.clone()),
            StateRef::Catalog { catalog, labels } => (catalog.as_str(), labels.as_slice()),
        };
        let q = || catalog::qubit(label(labels, 0, "q"));
        Ok(match name {
            "zero" => catalog::pure(&catalog::ket0(), q()),
            "one" => catalog::pure(&catalog::ket1(), q()),
            "plus" => catalog::pure(&catalog::ket_plus(), q()),
            "minus" => catalog::pure(&catalog::ket_minus(), q()),
            "plus_y" => catalog::pure(&catalog::ket_plus_y(), q()),
            "maximally_mixed" => DensityOperator::maximally_mixed(q()),
            "phi_plus" => catalog::phi_plus(label(labels, 0, "A"), label(labels, 1, "B")),
            "coh_ent_input" => catalog::coh_ent_input(),
            "coh_ent_target" => catalog::coh_ent_target(),
            other => bail!("unknown catalog state `{other}`"),
        })
    }
}

/// A channel given inline (`{in_dims, out_dims, kraus}`) or by catalog name.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChannelRef {
    Catalog {
        catalog: String,
        #[serde(default)]
        labels: Vec<String>,
        #[serde(default)]
        theta: Option<f64>,
    },
    Explicit(ChannelFile),
}

impl ChannelRef {
    pub fn resolve(&self) -> Result<KrausChannel> {
        let (name, labels, theta) = match self {
            ChannelRef::Explicit(f) => return Ok(KrausChannel::try_from(f.clone())?),
            ChannelRef::Catalog { catalog, labels, theta } => (catalog.as_str(), labels.as_slice(), *theta),
        };
        let q = || catalog::qubit(label(labels, 0, "q"));
        Ok(match name {
            "coh_ent" => catalog::coh_ent_channel(),
            "no_fmax" => catalog::no_fmax_channel()?,
            "prepare_phi" => catalog::prepare_phi_channel(),
            "pauli_x" => catalog::pauli_x_channel(label(labels, 0, "q")),
            "identity" => KrausChannel::identity(q()),
            "prepare_one" => catalog::prepare_pure(&catalog::ket1(), q()),
            "prepare_zero" => catalog::prepare_pure(&catalog::ket0(), q()),
            "hadamard" => KrausChannel::unitary(catalog::hadamard(), q())?,
            "rz" => {
                let t = theta.ok_or_else(|| anyhow!("`rz` needs `theta`"))?;
                KrausChannel::unitary(catalog::rz(t), q())?
            }
            other => bail!("unknown catalog channel `{other}`"),
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivergenceInputs {
    pub state: StateRef,
    pub set: SetDescriptor,
    /// `relative_entropy` (closed form when available), `relative_entropy_fw`,
    /// `hypothesis_testing` or `dmax`.
    pub measure: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingleShotInputs {
    pub input: StateRef,
    pub target: StateRef,
    pub locals: Vec<SetDescriptor>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bound {
    pub from: StateRef,
    pub from_set: SetDescriptor,
    pub to: StateRef,
    pub to_set: SetDescriptor,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConversionInputs {
    pub input: StateRef,
    pub target: StateRef,
    #[serde(default)]
    pub channel: Option<ChannelRef>,
    /// Set the channel must keep invariant.
    #[serde(default)]
    pub free_set: Option<SetDescriptor>,
    /// Divergence bound between two resources.
    #[serde(default)]
    pub bound: Option<Bound>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssistedInputs {
    pub state: StateRef,
    pub b_set: SetDescriptor,
    pub golden: StateRef,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessingRef {
    pub channel: ChannelRef,
    /// Relabel the output as B (single-party send channels).
    #[serde(default)]
    pub send_as: Option<String>,
    #[serde(default)]
    pub aux: Option<StateRef>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificationInputs {
    pub state: StateRef,
    pub set: SetDescriptor,
    pub b_class: OpClassDescriptor,
    pub family: Vec<PreprocessingRef>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalRef {
    pub states: SetDescriptor,
    pub ops: OpClassDescriptor,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxiomInputs {
    pub states: SetDescriptor,
    pub locals: Vec<LocalRef>,
    #[serde(default)]
    pub class: Option<OpClassDescriptor>,
    #[serde(default)]
    pub channels: Vec<ChannelRef>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BpInputs {
    /// `bp_violation`, or omit and give `family`.
    #[serde(default)]
    pub catalog: Option<String>,
    #[serde(default)]
    pub family: Vec<SetDescriptor>,
    #[serde(default)]
    pub probes: Vec<Vec<MatrixLiteral>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MembershipCheck {
    pub name: String,
    pub channel: ChannelRef,
    pub set: SetDescriptor,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleInputs {
    pub checks: Vec<MembershipCheck>,
}

pub enum Inputs {
    Divergence(DivergenceInputs),
    SingleShot(SingleShotInputs),
    Conversion(ConversionInputs),
    Assisted(AssistedInputs),
    Certification(CertificationInputs),
    Axioms(AxiomInputs),
    BpAxioms(BpInputs),
    Counterexample(CounterexampleInputs),
}

fn typed<T: serde::de::DeserializeOwned>(v: &Value) -> Result<T> {
    serde_json::from_value(v.clone()).context("inputs do not match the scenario kind")
}

pub fn set(d: &SetDescriptor) -> Result<qrt::theories::FreeStateSet> {
    Ok(qrt::theories::FreeStateSet::try_from(d)?)
}

pub fn class(d: &OpClassDescriptor) -> Result<qrt::theories::FreeOpClass> {
    Ok(qrt::theories::FreeOpClass::try_from(d)?)
}

impl Inputs {
    pub fn parse(kind: Kind, v: &Value) -> Result<Self> {
        Ok(match kind {
            Kind::Divergence => Inputs::Divergence(typed(v)?),
            Kind::SingleShot => Inputs::SingleShot(typed(v)?),
            Kind::Conversion => Inputs::Conversion(typed(v)?),
            Kind::Assisted => Inputs::Assisted(typed(v)?),
            Kind::Certification => Inputs::Certification(typed(v)?),
            Kind::Axioms => Inputs::Axioms(typed(v)?),
            Kind::BpAxioms => Inputs::BpAxioms(typed(v)?),
            Kind::Counterexample => Inputs::Counterexample(typed(v)?),
        })
    }

    /// Resolve every reference once, discarding the results.
    pub fn resolve_all(&self) -> Result<()> {
        match self {
            Inputs::Divergence(i) => {
                i.state.resolve()?;
                set(&i.set)?;
                if !["relative_entropy", "relative_entropy_fw", "hypothesis_testing", "dmax"].contains(&i.measure.as_str()) {
                    bail!("unknown measure `{}`", i.measure);
                }
            }
            Inputs::SingleShot(i) => {
                i.input.resolve()?;
                i.target.resolve()?;
                for l in &i.locals {
                    set(l)?;
                }
            }
            Inputs::Conversion(i) => {
                i.input.resolve()?;
                i.target.resolve()?;
                if let Some(ch) = &i.channel {
                    ch.resolve()?;
                }
                if let Some(s) = &i.free_set {
                    set(s)?;
                }
                if let Some(b) = &i.bound {
                    b.from.resolve()?;
                    b.to.resolve()?;
                    set(&b.from_set)?;
                    set(&b.to_set)?;
                }
            }
            Inputs::Assisted(i) => {
                i.state.resolve()?;
                i.golden.resolve()?;
                set(&i.b_set)?;
            }
            Inputs::Certification(i) => {
                i.state.resolve()?;
                set(&i.set)?;
                class(&i.b_class)?;
                if i.family.is_empty() {
                    bail!("certification family is empty");
                }
                for p in &i.family {
                    p.channel.resolve()?;
                    if let Some(a) = &p.aux {
                        a.resolve()?;
                    }
                }
            }
            Inputs::Axioms(i) => {
                set(&i.states)?;
                for l in &i.locals {
                    set(&l.states)?;
                    class(&l.ops)?;
                }
                if let Some(cl) = &i.class {
                    class(cl)?;
                }
                for ch in &i.channels {
                    ch.resolve()?;
                }
            }
            Inputs::BpAxioms(i) => match i.catalog.as_deref() {
                Some("bp_violation") => {}
                Some(other) => bail!("unknown catalog family `{other}`"),
                None => {
                    if i.family.is_empty() {
                        bail!("bp_axioms needs `catalog` or a non-empty `family`");
                    }
                    for s in &i.family {
                        set(s)?;
                    }
                    for row in &i.probes {
                        for m in row {
                            m.to_matrix()?;
                        }
                    }
                }
            },
            Inputs::Counterexample(i) => {
                if i.checks.is_empty() {
                    bail!("counterexample scenario has no checks");
                }
                for ch in &i.checks {
                    ch.channel.resolve()?;
                    set(&ch.set)?;
                }
            }
        }
        Ok(())
    }
}
