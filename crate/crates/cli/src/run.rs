//! Dispatch a scenario to the toolkit and collect named results.

use std::collections::BTreeMap;
use std::time::Instant;

use anyhow::{bail, Result};
use serde_json::{json, Value};

use qrt::catalog::bp_violation_family;
use qrt::certify::{remote_certification, Preprocessing};
use qrt::composite::{check_axioms, check_bp_axioms, AxiomOptions, CandidateOps, LocalTheory};
use qrt::divergences::{dmax, hypothesis_testing, rel_entropy_engine, rel_entropy_of_resource, DivergenceResult, FwOptions};
use qrt::laws::{assisted_distillation_bound, conversion_verdict, single_shot_verdict};
use qrt::serde_ext::to_json;
use qrt::theories::ops::rng_check;
use qrt::theories::sets::MEMBERSHIP_TOL;

use crate::report::{Report, Status};
use crate::scenario::{class, set, Inputs, Scenario};

const DEFAULT_EPS: f64 = 0.1;
const DEFAULT_TOL: f64 = 1e-6;
const DEFAULT_SAMPLES: usize = 200;

/// Command-line overrides applied on top of the scenario file.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub gap: Option<f64>,
}

/// Named results plus the raw certificates they were read from.
#[derive(Default)]
struct Outputs {
    results: BTreeMap<String, Value>,
    certificates: BTreeMap<String, Value>,
    unconverged: Vec<String>,
}

impl Outputs {
    fn put(&mut self, key: impl Into<String>, v: Value) {
        self.results.insert(key.into(), v);
    }

    fn num(&mut self, key: impl Into<String>, v: f64) {
        self.put(key, to_json(v));
    }

    fn cert<T: serde::Serialize>(&mut self, key: &str, v: &T) -> Result<()> {
        self.certificates.insert(key.to_string(), serde_json::to_value(v)?);
        Ok(())
    }

    fn divergence(&mut self, prefix: &str, r: &DivergenceResult) -> Result<()> {
        let p = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
        self.num(p("value"), r.value);
        self.num(p("lower_bound"), r.lower_bound);
        self.num(p("upper_bound"), r.upper_bound);
        self.put(p("converged"), json!(r.converged));
        if !r.converged {
            self.unconverged.push(if prefix.is_empty() { "divergence".into() } else { prefix.into() });
        }
        self.cert(if prefix.is_empty() { "divergence" } else { prefix }, r)
    }
}

struct Ctx {
    seed: u64,
    fw: FwOptions,
    eps: f64,
    tol: f64,
    samples: usize,
}

fn compute(inputs: &Inputs, ctx: &Ctx, out: &mut Outputs) -> Result<()> {
    match inputs {
        Inputs::Divergence(i) => {
            let rho = i.state.resolve()?;
            let s = set(&i.set)?;
            let r = match i.measure.as_str() {
                "relative_entropy" => rel_entropy_of_resource(&rho, &s, &ctx.fw)?,
                "relative_entropy_fw" => rel_entropy_engine(&rho, &s, &ctx.fw)?,
                "hypothesis_testing" => hypothesis_testing(&rho, &s, ctx.eps, ctx.tol)?,
                "dmax" => dmax(&rho, &s, ctx.tol)?,
                other => bail!("unknown measure `{other}`"),
            };
            out.divergence("", &r)?;
        }
        Inputs::SingleShot(i) => {
            let locals = i.locals.iter().map(set).collect::<Result<Vec<_>>>()?;
            let r = single_shot_verdict(&i.input.resolve()?, &i.target.resolve()?, &locals, &ctx.fw)?;
            out.num("lhs", r.lhs);
            out.num("rhs", r.rhs);
            out.put("verdict", serde_json::to_value(r.verdict)?);
            out.cert("bound", &r)?;
        }
        Inputs::Conversion(i) => {
            let input = i.input.resolve()?;
            let target = i.target.resolve()?;
            if let Some(ch) = &i.channel {
                let ch = ch.resolve()?;
                let image = ch.apply(&input)?;
                out.num("trace_distance", image.trace_distance(&target)?);
                out.num("fidelity", image.fidelity(&target)?);
                if let Some(fs) = &i.free_set {
                    let r = rng_check(&ch, &set(fs)?, MEMBERSHIP_TOL, ctx.samples, ctx.seed)?;
                    out.put("rng_member", json!(r.member));
                    out.put("rng_states_checked", json!(r.states_checked));
                    out.cert("rng", &r)?;
                }
            }
            if let Some(b) = &i.bound {
                let r = conversion_verdict(&b.from.resolve()?, &set(&b.from_set)?, &b.to.resolve()?, &set(&b.to_set)?, &ctx.fw)?;
                out.num("lhs", r.lhs);
                out.num("rhs", r.rhs);
                out.put("verdict", serde_json::to_value(r.verdict)?);
                out.cert("bound", &r)?;
            }
        }
        Inputs::Assisted(i) => {
            let r = assisted_distillation_bound(&i.state.resolve()?, &set(&i.b_set)?, &i.golden.resolve()?, &ctx.fw)?;
            out.num("bound", r.bound);
            out.num("bound_upper", r.bound_upper);
            out.num("numerator", r.numerator.result.value);
            out.num("denominator", r.denominator.result.value);
            out.put("certified", json!(r.certified));
            out.cert("rate_bound", &r)?;
        }
        Inputs::Certification(i) => {
            let rho = i.state.resolve()?;
            let family = i
                .family
                .iter()
                .map(|p| {
                    let mut ch = p.channel.resolve()?;
                    if let Some(label) = &p.send_as {
                        let out_st = qrt::qcore::structure::TensorStructure::single(label, ch.out_dim());
                        ch = ch.with_structures(ch.in_structure().clone(), out_st)?;
                    }
                    Ok(match &p.aux {
                        Some(a) => Preprocessing::joint(ch, a.resolve()?),
                        None => Preprocessing::send(ch),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let r = remote_certification(&rho, &set(&i.set)?, &class(&i.b_class)?, &family, ctx.eps, ctx.tol)?;
            out.num("value", r.value);
            out.num("ceiling", r.ceiling.value);
            out.num("alpha", r.alpha);
            out.num("beta", r.beta);
            out.num("floor", r.floor);
            out.put("achiever", json!(r.achiever.channel_id));
            out.put("within_ceiling", json!(r.within_ceiling));
            out.cert("certification", &r)?;
        }
        Inputs::Axioms(i) => {
            let locals = i
                .locals
                .iter()
                .map(|l| Ok(LocalTheory::new(set(&l.states)?, class(&l.ops)?)))
                .collect::<Result<Vec<_>>>()?;
            let ops = CandidateOps {
                class: i.class.as_ref().map(class).transpose()?,
                channels: i.channels.iter().map(|c| c.resolve()).collect::<Result<_>>()?,
            };
            let opts = AxiomOptions { seed: ctx.seed, ..AxiomOptions::default() };
            let r = check_axioms(&set(&i.states)?, &ops, &locals, &opts)?;
            for (k, c) in &r.conditions {
                out.put(format!("conditions.{k}"), serde_json::to_value(c.verdict)?);
            }
            for (k, o) in r.operations.iter().enumerate() {
                out.put(format!("operations.{k}.member"), json!(o.member));
            }
            out.put("all_pass", json!(r.all_pass()));
            out.cert("axioms", &r)?;
        }
        Inputs::BpAxioms(i) => {
            let (family, probes) = match i.catalog.as_deref() {
                Some(_) => bp_violation_family()?,
                None => (
                    i.family.iter().map(set).collect::<Result<Vec<_>>>()?,
                    i.probes
                        .iter()
                        .map(|row| row.iter().map(|m| Ok(m.to_matrix()?)).collect::<Result<Vec<_>>>())
                        .collect::<Result<Vec<_>>>()?,
                ),
            };
            let r = check_bp_axioms(&family, &probes, ctx.samples.min(50), ctx.seed)?;
            for (k, c) in &r.axioms {
                out.put(format!("axioms.{k}"), serde_json::to_value(c.verdict)?);
            }
            out.put("failed", json!(r.failed()));
            out.cert("bp_axioms", &r)?;
        }
        Inputs::Counterexample(i) => {
            for (k, check) in i.checks.iter().enumerate() {
                let ch = check.channel.resolve()?;
                let r = rng_check(&ch, &set(&check.set)?, MEMBERSHIP_TOL, ctx.samples, ctx.seed.wrapping_add(k as u64))?;
                out.put(format!("{}.member", check.name), json!(r.member));
                out.num(format!("{}.defect", check.name), r.defect);
                out.cert(&check.name, &r)?;
            }
        }
    }
    Ok(())
}

/// Run one validated scenario. Errors raised by the toolkit are kept in the
/// report together with whatever results were produced before them.
pub fn run(s: &Scenario, ov: Overrides) -> Report {
    let start = Instant::now();
    let seed = ov.seed.unwrap_or(s.seed);
    let mut fw = FwOptions { seed, ..FwOptions::default() };
    if let Some(g) = ov.gap.or(s.params.gap) {
        fw.gap = g;
    }
    if let Some(m) = s.params.max_iter {
        fw.max_iter = m;
    }
    let ctx = Ctx {
        seed,
        fw,
        eps: s.params.eps.unwrap_or(DEFAULT_EPS),
        tol: s.params.tol.unwrap_or(DEFAULT_TOL),
        samples: s.params.samples.unwrap_or(DEFAULT_SAMPLES),
    };
    let mut out = Outputs::default();
    let outcome = Inputs::parse(s.kind, &s.inputs).and_then(|i| compute(&i, &ctx, &mut out));
    let mut report = Report::new(s, seed, out.results, out.certificates);
    report.wall_time_s = start.elapsed().as_secs_f64();
    match outcome {
        Ok(()) if !out.unconverged.is_empty() => {
            report.status = Status::Unconverged;
            report.error = Some(format!("did not converge: {}", out.unconverged.join(", ")));
        }
        Ok(()) => report.status = if report.checks.iter().all(|c| c.pass) { Status::Pass } else { Status::Fail },
        Err(e) => {
            let numerical = e.downcast_ref::<qrt::Error>().is_some_and(|q| matches!(q, qrt::Error::Numerical(_)));
            report.status = if numerical { Status::Unconverged } else { Status::Invalid };
            report.error = Some(format!("{e:#}"));
        }
    }
    report
}
