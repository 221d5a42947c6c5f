//! Hypothesis-testing relative entropy of resource,
//! `D_H^ε(ρ‖S) = −log₂ min{Tr ρ(I − P) : 0 ≤ P ≤ I, sup_{σ∈S} Tr σP ≤ ε}`,
//! optionally with `P` restricted to real or diagonal matrices.
//!
//! Primal: projected gradient on `Tr ρP` with a growing step. The projection
//! is Dykstra's scheme over the box (with the restriction) and half-spaces
//! `Tr σ_k P ≤ ε`, where the σ_k are collected from the LMO at each iterate.
//! Every candidate is rescaled by `min(1, ε/α)` with a certified `α`, so the
//! reported β is achieved by a feasible test.
//!
//! Dual: for any `t ≥ 0` and `σ ∈ S`, `Tr ρP ≤ Tr(Π(ρ − tσ))₊ + tε`, which
//! lower-bounds β. The pair `(t, σ)` is found by Frank–Wolfe on a softplus
//! smoothing over `Y = tσ ∈ ε⁻¹·conv({0} ∪ S)`, then a golden search in `t`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::frank_wolfe::{golden_section, minimize, FwOptions, Objective};
use super::result::{DivergenceResult, Method};
use crate::error::{Error, Result};
use crate::qcore::eig::{eigh, Eigen};
use crate::qcore::matrix::{c, diagonal_part, frobenius, hermitize, real_part, trace, trace_product_re, CMat, MatrixLiteral};
use crate::qcore::state::DensityOperator;
use crate::theories::{FreeStateSet, LinearMinimizer, SetKind};

/// β at or below this counts as exact annihilation (value +∞).
pub const BETA_ZERO: f64 = 1e-12;
/// Slack on `sup_S Tr σP ≤ ε`, covering the margin on SDP-certified α.
pub const FEASIBILITY_TOL: f64 = 1e-6;
const PRIMAL_ITERS: usize = 150;
const DYKSTRA_CYCLES: usize = 200;
const MAX_CUTS: usize = 48;
const DUAL_TAUS: [f64; 5] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

/// Admissible tests.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Restriction {
    #[default]
    None,
    /// Real symmetric tests (measurements available in imaginarity theory).
    Real,
    /// Diagonal tests.
    Diagonal,
}

impl Restriction {
    /// Orthogonal projection onto the admissible Hermitian subspace.
    pub fn apply(&self, m: &CMat) -> CMat {
        match self {
            Restriction::None => hermitize(m),
            Restriction::Real => real_part(&hermitize(m)),
            Restriction::Diagonal => diagonal_part(m).map(|z| c(z.re, 0.0)),
        }
    }
}

/// A test with its certified errors.
#[derive(Clone, Debug)]
pub struct HtOutcome {
    pub result: DivergenceResult,
    pub test: CMat,
    /// Certified upper bound on `sup_S Tr σP`.
    pub alpha: f64,
    pub beta: f64,
    /// Certified lower bound on the optimal β.
    pub beta_lower: f64,
}

fn clip_box(m: &CMat) -> CMat {
    eigh(m).map(|x| x.clamp(0.0, 1.0))
}

fn project_c1(m: &CMat, r: Restriction) -> CMat {
    r.apply(&clip_box(&r.apply(m)))
}

fn project_half(x: &CMat, normal: &CMat, nn: f64, eps: f64) -> CMat {
    let v = trace_product_re(normal, x);
    if v <= eps || nn == 0.0 {
        x.clone()
    } else {
        x - normal * c((v - eps) / nn, 0.0)
    }
}

fn dykstra(y: &CMat, cuts: &[(CMat, f64)], eps: f64, r: Restriction) -> CMat {
    let mut x = y.clone();
    let mut p = CMat::zeros(y.nrows(), y.ncols());
    let mut q: Vec<CMat> = cuts.iter().map(|_| CMat::zeros(y.nrows(), y.ncols())).collect();
    for _ in 0..DYKSTRA_CYCLES {
        let prev = x.clone();
        let z = project_c1(&(&x + &p), r);
        p = &x + &p - &z;
        x = z;
        for (k, (n, nn)) in cuts.iter().enumerate() {
            let z = project_half(&(&x + &q[k]), n, *nn, eps);
            q[k] = &x + &q[k] - &z;
            x = z;
        }
        if frobenius(&(&x - prev)) < 1e-12 {
            break;
        }
    }
    project_c1(&x, r)
}

/// Certified `sup_{σ∈S} Tr σP`.
pub fn alpha_of<S: LinearMinimizer + ?Sized>(set: &S, p: &CMat, rng: &mut ChaCha8Rng) -> Result<f64> {
    Ok(-set.lmo_lower_bound(&(-p), rng)?)
}

/// Tr(X)₊, the sum of positive eigenvalues.
fn positive_trace(x: &CMat) -> f64 {
    eigh(x).values.iter().filter(|&&v| v > 0.0).sum()
}

fn support_projector(e: &Eigen, threshold: f64) -> CMat {
    e.map(|x| if x > threshold { 1.0 } else { 0.0 })
}

/// Softplus smoothing of the dual over `Y ∈ ε⁻¹·conv({0} ∪ S)`.
struct SmoothDual<'a> {
    rho: &'a CMat,
    eps: f64,
    tau: f64,
    r: Restriction,
}

impl Objective for SmoothDual<'_> {
    fn value(&self, y: &CMat) -> f64 {
        let e = eigh(&self.r.apply(&(self.rho - y)));
        let sp: f64 = e.values.iter().map(|&x| softplus(x, self.tau)).sum();
        sp + self.eps * trace(y).re
    }

    fn gradient(&self, y: &CMat) -> CMat {
        let e = eigh(&self.r.apply(&(self.rho - y)));
        let s = e.map(|x| sigmoid(x / self.tau));
        let n = y.nrows();
        CMat::identity(n, n) * c(self.eps, 0.0) - self.r.apply(&s)
    }
}

fn softplus(x: f64, tau: f64) -> f64 {
    let z = x / tau;
    if z > 30.0 {
        x
    } else {
        tau * z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ε⁻¹·conv({0} ∪ S)`.
struct ConeSlice<'a, S: ?Sized> {
    set: &'a S,
    scale: f64,
}

impl<S: LinearMinimizer + ?Sized> LinearMinimizer for ConeSlice<'_, S> {
    fn dim(&self) -> usize {
        self.set.dim()
    }

    fn lmo(&self, g: &CMat, rng: &mut ChaCha8Rng) -> Result<CMat> {
        let s = self.set.lmo(g, rng)?;
        if trace_product_re(g, &s) < 0.0 {
            Ok(s * c(self.scale, 0.0))
        } else {
            Ok(CMat::zeros(g.nrows(), g.ncols()))
        }
    }

    fn lmo_lower_bound(&self, g: &CMat, rng: &mut ChaCha8Rng) -> Result<f64> {
        Ok((self.scale * self.set.lmo_lower_bound(g, rng)?).min(0.0))
    }

    fn interior_point(&self) -> CMat {
        self.set.interior_point() * c(0.5 * self.scale, 0.0)
    }

    fn lmo_is_exact(&self) -> bool {
        self.set.lmo_is_exact()
    }
}

/// Minimise `Tr(Π(ρ − tσ))₊ + tε` over `t ∈ [0, 1/ε]` for a fixed σ.
fn dual_line(rho: &CMat, sigma: &CMat, eps: f64, r: Restriction) -> f64 {
    let h = |t: f64| positive_trace(&r.apply(&(rho - sigma * c(t, 0.0)))) + t * eps;
    let (_, v) = golden_section(h, 1.0 / eps);
    v.min(h(1.0)).min(h(0.0))
}

/// Engine on any set with an LMO. `hints` are members of S tried as dual σ.
pub fn hypothesis_testing_engine<S: LinearMinimizer + ?Sized>(
    rho: &CMat,
    set: &S,
    eps: f64,
    restriction: Restriction,
    tol: f64,
    seed: u64,
    hints: &[CMat],
) -> Result<HtOutcome> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::OutOfRange(format!("ε = {eps} must lie in (0, 1)")));
    }
    if rho.nrows() != set.dim() {
        return Err(Error::DimensionMismatch("state vs set".into()));
    }
    let n = rho.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = restriction;
    let rho_r = r.apply(rho);

    // Primal.
    let mut best_p = CMat::identity(n, n) * c(eps, 0.0);
    let mut best_alpha = eps;
    let mut best_beta = 1.0 - eps;
    let consider = |q: &CMat, rng: &mut ChaCha8Rng, best: &mut (CMat, f64, f64)| -> Result<()> {
        let q = project_c1(q, r);
        let a = alpha_of(set, &q, rng)?;
        let s = if a > eps + FEASIBILITY_TOL { eps / a } else { 1.0 };
        let q = q * c(s, 0.0);
        let beta = (1.0 - trace_product_re(rho, &q)).max(0.0);
        if beta < best.2 {
            *best = (q, a * s, beta);
        }
        Ok(())
    };
    let mut best = (best_p.clone(), best_alpha, best_beta);
    consider(&support_projector(&eigh(&rho_r), 1e-12), &mut rng, &mut best)?;

    let mut cuts: Vec<(CMat, f64)> = Vec::new();
    let mut p = best.0.clone();
    let mut eta = 0.5;
    let mut iterations = 0;
    for _ in 0..PRIMAL_ITERS {
        iterations += 1;
        let sigma = r.apply(&set.lmo(&(-&p), &mut rng)?);
        if !cuts.iter().any(|(s, _)| frobenius(&(s - &sigma)) < 1e-12) {
            let nn = frobenius(&sigma).powi(2);
            cuts.push((sigma, nn));
            if cuts.len() > MAX_CUTS {
                cuts.remove(0);
            }
        }
        let next = dykstra(&(&p + &rho_r * c(eta, 0.0)), &cuts, eps, r);
        consider(&next, &mut rng, &mut best)?;
        let moved = frobenius(&(&next - &p));
        p = next;
        eta = (eta * 1.3).min(1e6);
        if moved < 1e-11 && eta > 1e3 {
            break;
        }
        if best.2 <= BETA_ZERO {
            break;
        }
    }
    // Eigen-rounded final iterate.
    consider(&support_projector(&eigh(&p), 0.5), &mut rng, &mut best)?;
    (best_p, best_alpha, best_beta) = best;

    // Dual.
    let mut g_min = 1.0_f64;
    if best_beta > BETA_ZERO {
        let mut candidates: Vec<CMat> = hints.to_vec();
        candidates.push(set.lmo(&(-&rho_r), &mut rng)?);
        let slice = ConeSlice { set, scale: 1.0 / eps };
        let first = set.lmo(&(-&rho_r), &mut rng)?;
        let mut atoms = vec![(first * c(1.0 / eps, 0.0), eps), (CMat::zeros(n, n), 1.0 - eps)];
        for &tau in &DUAL_TAUS {
            let obj = SmoothDual { rho, eps, tau, r };
            let opts = FwOptions { gap: tau * 1e-2, max_iter: 400, seed: rng.random(), lazy: true };
            let out = minimize(&obj, &slice, atoms.clone(), &opts)?;
            iterations += out.iterations;
            atoms = out.atoms;
            let y = out.sigma;
            let ty = trace(&y).re;
            g_min = g_min.min(positive_trace(&r.apply(&(rho - &y))) + eps * ty);
            if ty > 1e-12 {
                candidates.push(&y * c(1.0 / ty, 0.0));
            }
        }
        for s in &candidates {
            g_min = g_min.min(dual_line(rho, s, eps, r));
        }
        // Neyman–Pearson projectors from the best dual pair.
        if let Some(s) = candidates.last() {
            for t in [0.5, 1.0, 2.0] {
                let e = eigh(&r.apply(&(rho - s * c(t, 0.0))));
                let mut b = (best_p.clone(), best_alpha, best_beta);
                consider(&support_projector(&e, 0.0), &mut rng, &mut b)?;
                (best_p, best_alpha, best_beta) = b;
            }
        }
    }
    let beta_lower = (1.0 - g_min).max(0.0).min(best_beta);
    let to_bits = |b: f64| if b <= BETA_ZERO { f64::INFINITY } else { -b.log2() };
    let value = to_bits(best_beta);
    let upper = if best_beta <= BETA_ZERO { f64::INFINITY } else { to_bits(beta_lower) };
    let converged = value == upper || upper - value <= tol;
    Ok(HtOutcome {
        result: DivergenceResult {
            value,
            lower_bound: value,
            upper_bound: upper,
            iterations,
            converged,
            method: Method::ProjectedGradient,
            optimizer: Some(MatrixLiteral::from_matrix(&best_p)),
        },
        test: best_p,
        alpha: best_alpha,
        beta: best_beta,
        beta_lower,
    })
}

/// Free states worth trying as the dual σ.
pub fn dual_hints(rho: &DensityOperator, set: &FreeStateSet) -> Vec<CMat> {
    let mut out = Vec::new();
    if let Ok((s, _)) = set.closest_free_state(rho) {
        out.push(s.matrix().clone());
    }
    if matches!(set.kind(), SetKind::Incoherent { .. }) {
        out.push(rho.dephase().matrix().clone());
    }
    out
}

/// `D_H^ε(ρ‖S)` with unrestricted tests.
pub fn hypothesis_testing(rho: &DensityOperator, set: &FreeStateSet, eps: f64, tol: f64) -> Result<DivergenceResult> {
    hypothesis_testing_restricted(rho, set, eps, Restriction::None, tol).map(|o| o.result)
}

pub fn hypothesis_testing_restricted(
    rho: &DensityOperator,
    set: &FreeStateSet,
    eps: f64,
    restriction: Restriction,
    tol: f64,
) -> Result<HtOutcome> {
    if rho.dim() != set.dim() {
        return Err(Error::DimensionMismatch("state vs set".into()));
    }
    hypothesis_testing_engine(rho.matrix(), set, eps, restriction, tol, 0, &dual_hints(rho, set))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::matrix::from_real_rows;
    use crate::qcore::structure::TensorStructure;

    #[test]
    fn restriction_projections_are_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = crate::qcore::random::random_hermitian(3, &mut rng);
        for r in [Restriction::None, Restriction::Real, Restriction::Diagonal] {
            let once = r.apply(&h);
            assert!(frobenius(&(r.apply(&once) - &once)) < 1e-15);
        }
    }

    #[test]
    fn free_state_sits_on_the_floor() {
        let rho = DensityOperator::single(from_real_rows(&[&[0.7, 0.0], &[0.0, 0.3]])).unwrap();
        let s = FreeStateSet::incoherent(TensorStructure::single("0", 2));
        for eps in [0.1, 0.25, 0.5] {
            let r = hypothesis_testing(&rho, &s, eps, 1e-6).unwrap();
            let floor = -(1.0 - eps).log2();
            assert!((r.value - floor).abs() < 1e-9, "{eps}: {r:?}");
            assert!(r.upper_bound - floor < 1e-4, "{eps}: {r:?}");
        }
    }
}
