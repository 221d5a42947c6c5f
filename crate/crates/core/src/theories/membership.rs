//! Membership by Hilbert–Schmidt projection, for sets without a direct test.

use crate::divergences::frank_wolfe::{minimize, FwOptions, Objective};
use crate::error::Result;
use crate::qcore::matrix::{c, frobenius, CMat};
use crate::theories::LinearMinimizer;

struct HsDistance<'a>(&'a CMat);

impl Objective for HsDistance<'_> {
    fn value(&self, s: &CMat) -> f64 {
        frobenius(&(s - self.0)).powi(2)
    }
    fn gradient(&self, s: &CMat) -> CMat {
        (s - self.0) * c(2.0, 0.0)
    }
}

/// Hilbert–Schmidt distance from `m` to the set, resolved to about `tol`.
pub fn distance_to_set<S: LinearMinimizer + ?Sized>(set: &S, m: &CMat, tol: f64) -> Result<f64> {
    let opts = FwOptions { gap: 0.5 * tol * tol, max_iter: 20_000, seed: 0, lazy: true };
    let start = vec![(set.interior_point(), 1.0)];
    let out = minimize(&HsDistance(m), set, start, &opts)?;
    Ok(out.value.max(0.0).sqrt())
}
