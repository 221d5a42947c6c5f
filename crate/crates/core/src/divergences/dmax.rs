//! Max-relative entropy of resource, `D_max(ρ‖S) = min_σ log₂ min{λ : ρ ≤ λσ}`.
//!
//! Bisection on `log₂λ`. Each step maximises a softmin of the eigenvalues of
//! `λσ − ρ` over `σ ∈ S` with Frank–Wolfe. Any σ found gives the upper bound
//! `λ_max(σ^{-1/2} ρ σ^{-1/2})`; the softmin weights `W` at the end of an
//! infeasible step give the lower bound `Tr Wρ / max_{σ∈S} Tr Wσ`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::frank_wolfe::{minimize, FwOptions, Objective};
use super::result::{DivergenceResult, Method};
use crate::error::{Error, Result};
use crate::qcore::eig::{eigh, Eigen};
use crate::qcore::entropy::{relative_entropy_mat, EIG_CLAMP, SUPPORT_TOL};
use crate::qcore::matrix::{c, trace_product_re, CMat, MatrixLiteral};
use crate::qcore::state::DensityOperator;
use crate::theories::{FreeStateSet, LinearMinimizer, SetKind};

const TAUS: [f64; 6] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7];
const MAX_BISECTIONS: usize = 60;

/// `λ_max(σ^{-1/2} ρ σ^{-1/2})` on the support of σ; ∞ if ρ leaves it.
pub fn max_ratio(rho: &CMat, sigma: &CMat) -> f64 {
    let e = eigh(sigma);
    let r = e.vectors.adjoint() * rho * &e.vectors;
    let n = r.nrows();
    for i in 0..n {
        if e.values[i] <= EIG_CLAMP && r[(i, i)].re > SUPPORT_TOL {
            return f64::INFINITY;
        }
    }
    let inv: Vec<f64> = e.values.iter().map(|&l| if l > EIG_CLAMP { 1.0 / l.sqrt() } else { 0.0 }).collect();
    let m = CMat::from_fn(n, n, |i, j| r[(i, j)] * inv[i] * inv[j]);
    eigh(&m).max().max(0.0)
}

/// Softmin weights of the eigenvalues, as an operator `Σ wᵢ|vᵢ⟩⟨vᵢ|`.
fn softmin_weights(e: &Eigen, tau: f64) -> CMat {
    let m0 = e.values[0];
    let w: Vec<f64> = e.values.iter().map(|&l| (-(l - m0) / tau).exp()).collect();
    let z: f64 = w.iter().sum();
    let w: Vec<f64> = w.iter().map(|x| x / z).collect();
    e.map_weights(&w)
}

trait WeightMap {
    fn map_weights(&self, w: &[f64]) -> CMat;
}

impl WeightMap for Eigen {
    fn map_weights(&self, w: &[f64]) -> CMat {
        let n = self.vectors.nrows();
        let mut out = CMat::zeros(n, n);
        for (k, &wk) in w.iter().enumerate() {
            if wk < 1e-300 {
                continue;
            }
            let v = self.vectors.column(k);
            out += v * v.adjoint() * c(wk, 0.0);
        }
        out
    }
}

/// `−softmin_τ eig(λσ − ρ)`, convex in σ.
struct NegSoftmin<'a> {
    rho: &'a CMat,
    lambda: f64,
    tau: f64,
}

impl Objective for NegSoftmin<'_> {
    fn value(&self, sigma: &CMat) -> f64 {
        let m = sigma * c(self.lambda, 0.0) - self.rho;
        let e = eigh(&m);
        let m0 = e.values[0];
        let z: f64 = e.values.iter().map(|&l| (-(l - m0) / self.tau).exp()).sum();
        -(m0 - self.tau * z.ln())
    }

    fn gradient(&self, sigma: &CMat) -> CMat {
        let m = sigma * c(self.lambda, 0.0) - self.rho;
        softmin_weights(&eigh(&m), self.tau) * c(-self.lambda, 0.0)
    }
}

/// `log₂(Tr Wρ / max_S Tr Wσ)`, a certified lower bound for any `W ⪰ 0`.
fn dual_bound<S: LinearMinimizer + ?Sized>(rho: &CMat, set: &S, w: &CMat, rng: &mut ChaCha8Rng) -> Result<f64> {
    let num = trace_product_re(w, rho);
    let den = -set.lmo_lower_bound(&(-w), rng)?;
    if num <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if den <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((num / den).log2())
}

/// Bisection engine on any set with an LMO.
pub fn dmax_engine<S: LinearMinimizer + ?Sized>(rho: &CMat, set: &S, tol: f64, seed: u64) -> Result<DivergenceResult> {
    if rho.nrows() != set.dim() {
        return Err(Error::DimensionMismatch("state vs set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let interior = set.interior_point();
    if relative_entropy_mat(rho, &interior).is_infinite() {
        return Ok(DivergenceResult::exact(f64::INFINITY, None, Method::Infeasible));
    }
    // Starting bounds: σ = interior point and W = ρ.
    let mut best_sigma = interior.clone();
    let mut hi = max_ratio(rho, &interior).log2();
    let mut lo = dual_bound(rho, set, rho, &mut rng)?.max(0.0).min(hi);
    let first = set.lmo(&(-rho), &mut rng)?;
    let r = max_ratio(rho, &first).log2();
    if r < hi {
        hi = r;
        best_sigma = first.clone();
    }
    let mut atoms = vec![(best_sigma.clone(), 1.0)];
    let (mut search_lo, mut search_hi) = (lo, hi);
    let mut iterations = 0;
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (search_lo + search_hi);
        let lambda = mid.exp2();
        let mut feasible = false;
        for &tau in TAUS.iter().filter(|&&t| t >= 0.1 * tol.min(1e-4)) {
            let obj = NegSoftmin { rho, lambda, tau };
            let opts = FwOptions { gap: tau * 1e-2, max_iter: 2_000, seed: rng.random(), lazy: true };
            let out = minimize(&obj, set, atoms.clone(), &opts)?;
            iterations += out.iterations;
            atoms = out.atoms.clone();
            let r = max_ratio(rho, &out.sigma).log2();
            if r < hi {
                hi = r;
                best_sigma = out.sigma.clone();
            }
            let m = &out.sigma * c(lambda, 0.0) - rho;
            let e = eigh(&m);
            if e.min() >= 0.0 {
                feasible = true;
                break;
            }
            let w = softmin_weights(&e, tau);
            let b = dual_bound(rho, set, &w, &mut rng)?;
            if b > lo {
                lo = b.min(hi);
            }
            if lo >= mid {
                break;
            }
        }
        if feasible || hi <= mid {
            search_hi = hi.min(mid);
        } else {
            search_lo = mid.max(lo);
        }
        if search_hi - search_lo <= 0.25 * tol {
            break;
        }
    }
    Ok(DivergenceResult {
        value: hi,
        lower_bound: lo,
        upper_bound: hi,
        iterations,
        converged: hi - lo <= tol,
        method: Method::Bisection,
        optimizer: Some(MatrixLiteral::from_matrix(&best_sigma)),
    })
}

/// `D_max(ρ‖S)` with certified bounds within `tol` bits.
pub fn dmax(rho: &DensityOperator, set: &FreeStateSet, tol: f64) -> Result<DivergenceResult> {
    if rho.dim() != set.dim() {
        return Err(Error::DimensionMismatch("state vs set".into()));
    }
    if let SetKind::Singleton { gamma } = set.kind() {
        let v = max_ratio(rho.matrix(), gamma);
        let v = if v.is_finite() { v.log2() } else { f64::INFINITY };
        return Ok(DivergenceResult::exact(v, Some(gamma), Method::ClosedForm));
    }
    dmax_engine(rho.matrix(), set, tol, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::matrix::from_real_rows;
    use crate::qcore::structure::TensorStructure;

    #[test]
    fn ratio_of_pure_state_against_maximally_mixed() {
        let zero = from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let mixed = from_real_rows(&[&[0.5, 0.0], &[0.0, 0.5]]);
        assert!((max_ratio(&zero, &mixed) - 2.0).abs() < 1e-12);
        assert!(max_ratio(&mixed, &zero).is_infinite());
    }

    #[test]
    fn plus_state_against_incoherent_is_one_bit() {
        let plus = DensityOperator::single(from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]])).unwrap();
        let s = FreeStateSet::incoherent(TensorStructure::single("0", 2));
        let r = dmax(&plus, &s, 1e-6).unwrap();
        assert!(r.converged, "{r:?}");
        assert!((r.value - 1.0).abs() < 1e-6);
    }
}
