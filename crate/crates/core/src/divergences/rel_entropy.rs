//! Relative entropy of resource `D(ρ‖S) = min_{σ∈S} D(ρ‖σ)`.

use std::f64::consts::LN_2;

use super::frank_wolfe::{minimize, FwOptions, Objective};
use super::result::{DivergenceResult, Method};
use crate::error::{Error, Result};
use crate::qcore::eig::eigh;
use crate::qcore::entropy::{entropy_mat, relative_entropy_mat, EIG_CLAMP, SUPPORT_TOL};
use crate::qcore::matrix::CMat;
use crate::qcore::state::DensityOperator;
use crate::theories::{FreeStateSet, LinearMinimizer};

/// Weight of the interior point in the starting iterate.
pub const INTERIOR_WEIGHT: f64 = 1e-3;

/// First divided difference of `log₂` (derivative on the diagonal).
pub fn log2_divided_difference(a: f64, b: f64) -> f64 {
    let a = a.max(EIG_CLAMP);
    let b = b.max(EIG_CLAMP);
    if (a - b).abs() <= 1e-12 * a.max(b) {
        1.0 / (0.5 * (a + b) * LN_2)
    } else {
        (a.log2() - b.log2()) / (a - b)
    }
}

/// `σ ↦ D(ρ‖σ)` with its gradient `−V[(V†ρV) ∘ Φ]V†`.
pub struct RelEntropyObjective {
    rho: CMat,
    entropy: f64,
}

impl RelEntropyObjective {
    pub fn new(rho: &CMat) -> Self {
        RelEntropyObjective { rho: rho.clone(), entropy: entropy_mat(rho) }
    }
}

impl Objective for RelEntropyObjective {
    fn value(&self, sigma: &CMat) -> f64 {
        let e = eigh(sigma);
        let r = e.vectors.adjoint() * &self.rho * &e.vectors;
        let mut cross = 0.0;
        for (i, &l) in e.values.iter().enumerate() {
            let w = r[(i, i)].re;
            if l <= EIG_CLAMP {
                if w > SUPPORT_TOL {
                    return f64::INFINITY;
                }
                continue;
            }
            cross -= w * l.log2();
        }
        (cross - self.entropy).max(0.0)
    }

    fn gradient(&self, sigma: &CMat) -> CMat {
        let e = eigh(sigma);
        let v = &e.vectors;
        let mut r = v.adjoint() * &self.rho * v;
        let n = r.nrows();
        for i in 0..n {
            for j in 0..n {
                // The value ignores the kernel of σ, so its gradient does too;
                // otherwise roundoff in ρ is amplified by 1/EIG_CLAMP. Dropping
                // this block only lowers the linearisation, so bounds stay valid.
                if e.values[i] <= EIG_CLAMP && e.values[j] <= EIG_CLAMP {
                    r[(i, j)] = crate::qcore::matrix::ZERO;
                } else {
                    r[(i, j)] *= -log2_divided_difference(e.values[i], e.values[j]);
                }
            }
        }
        v * r * v.adjoint()
    }
}

/// Frank–Wolfe on any set with a linear minimisation oracle.
pub fn rel_entropy_fw<S: LinearMinimizer + ?Sized>(rho: &CMat, set: &S, opts: &FwOptions) -> Result<DivergenceResult> {
    rel_entropy_fw_from(rho, set, None, opts)
}

/// Frank–Wolfe started from `warm` (a member of the set) when it is given and
/// has finite divergence, otherwise from the oracle's answer to `−ρ`.
pub fn rel_entropy_fw_from<S: LinearMinimizer + ?Sized>(
    rho: &CMat,
    set: &S,
    warm: Option<CMat>,
    opts: &FwOptions,
) -> Result<DivergenceResult> {
    if rho.nrows() != set.dim() {
        return Err(Error::DimensionMismatch("state vs set".into()));
    }
    let interior = set.interior_point();
    if relative_entropy_mat(rho, &interior).is_infinite() {
        return Ok(DivergenceResult {
            method: Method::Infeasible,
            ..DivergenceResult::exact(f64::INFINITY, None, Method::Infeasible)
        });
    }
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(opts.seed ^ 0x1f);
    let first = match warm.filter(|w| relative_entropy_mat(rho, w).is_finite()) {
        Some(w) => w,
        None => set.lmo(&(-rho), &mut rng)?,
    };
    let start = vec![(first, 1.0 - INTERIOR_WEIGHT), (interior, INTERIOR_WEIGHT)];
    let obj = RelEntropyObjective::new(rho);
    let out = minimize(&obj, set, start, opts)?;
    let lower = out.lower_bound.max(0.0);
    Ok(DivergenceResult {
        value: out.value,
        lower_bound: lower.min(out.value),
        upper_bound: out.value,
        iterations: out.iterations,
        converged: out.converged,
        method: Method::FrankWolfe,
        optimizer: Some(crate::qcore::matrix::MatrixLiteral::from_matrix(&out.sigma)),
    })
}

/// `D(ρ‖S)`: closed form where available, otherwise Frank–Wolfe.
pub fn rel_entropy_of_resource(rho: &DensityOperator, set: &FreeStateSet, opts: &FwOptions) -> Result<DivergenceResult> {
    if rho.dim() != set.dim() {
        return Err(Error::DimensionMismatch(format!("state dimension {} vs set dimension {}", rho.dim(), set.dim())));
    }
    if set.capabilities().has_closed_form_closest {
        let (sigma, v) = set.closest_free_state(rho)?;
        return Ok(DivergenceResult::exact(v, Some(sigma.matrix()), Method::ClosedForm));
    }
    rel_entropy_engine(rho, set, opts)
}

/// Always use the Frank–Wolfe engine, even when a closed form exists.
pub fn rel_entropy_engine(rho: &DensityOperator, set: &FreeStateSet, opts: &FwOptions) -> Result<DivergenceResult> {
    rel_entropy_fw_from(rho.matrix(), set, product_warm_start(rho.matrix(), set, opts), opts)
}

/// For composite sets with an inexact oracle, the product of the closest free
/// states of the block marginals. It lies in the minimal composite and so in
/// every composite, and is optimal whenever the divergence is additive on the
/// input. Exact oracles converge faster from the default vertex start.
fn product_warm_start(rho: &CMat, set: &FreeStateSet, opts: &FwOptions) -> Option<CMat> {
    if set.lmo_is_exact() {
        return None;
    }
    let locals = set.locals()?;
    let mut out: Option<CMat> = None;
    for (k, local) in locals.iter().enumerate() {
        let m = crate::qcore::matrix::hermitize(&set.block_marginal(rho, k));
        let sigma = if local.contains_mat(&m, crate::theories::sets::MEMBERSHIP_TOL) {
            m
        } else {
            let m = DensityOperator::new(m, local.structure().clone()).ok()?;
            let local_opts = FwOptions { gap: opts.gap / 10.0, ..*opts };
            let r = rel_entropy_of_resource(&m, local, &local_opts).ok()?;
            if !r.value.is_finite() {
                return None;
            }
            r.optimizer?.to_matrix().ok()?
        };
        out = Some(match out {
            None => sigma,
            Some(acc) => crate::qcore::matrix::kron(&acc, &sigma),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::matrix::{c, from_real_rows, trace_product_re};
    use crate::qcore::random::random_density;
    use crate::qcore::structure::TensorStructure;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gradient_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let rho = random_density(3, &mut rng);
        let sigma = random_density(3, &mut rng);
        let dir = random_density(3, &mut rng) - &sigma;
        let obj = RelEntropyObjective::new(&rho);
        let h = 1e-6;
        let fd = (obj.value(&(&sigma + &dir * c(h, 0.0))) - obj.value(&(&sigma - &dir * c(h, 0.0)))) / (2.0 * h);
        let an = trace_product_re(&obj.gradient(&sigma), &dir);
        assert!((fd - an).abs() < 1e-6, "{fd} vs {an}");
    }

    #[test]
    fn engine_reproduces_coherence_of_plus() {
        let plus = DensityOperator::single(from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]])).unwrap();
        let s = FreeStateSet::incoherent(TensorStructure::single("0", 2));
        let r = rel_entropy_engine(&plus, &s, &FwOptions::default()).unwrap();
        assert!(r.converged);
        assert!((r.value - 1.0).abs() < 1e-3, "{}", r.value);
        assert!(r.lower_bound <= 1.0 + 1e-12);
    }

    #[test]
    fn support_mismatch_is_infinite() {
        let one = DensityOperator::single(from_real_rows(&[&[0.0, 0.0], &[0.0, 1.0]])).unwrap();
        let zero = DensityOperator::single(from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]])).unwrap();
        let s = FreeStateSet::singleton(&zero);
        let r = rel_entropy_engine(&one, &s, &FwOptions::default()).unwrap();
        assert!(r.value.is_infinite() && r.lower_bound.is_infinite());
    }
}
