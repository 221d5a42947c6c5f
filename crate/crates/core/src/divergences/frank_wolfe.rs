//! Pairwise Frank–Wolfe with an active set and lazy oracle calls.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::matrix::{c, max_abs, trace_product_re, CMat};
use crate::theories::LinearMinimizer;

pub const DEFAULT_GAP: f64 = 1e-4;
pub const DEFAULT_MAX_ITER: usize = 50_000;
const LINE_SEARCH_TOL: f64 = 1e-10;
const INV_PHI: f64 = 0.618_033_988_749_894_9;
const STALL_LIMIT: usize = 200;

/// A convex function on states with a gradient.
pub trait Objective: Sync {
    /// Value at `σ`; `f64::INFINITY` outside the domain.
    fn value(&self, sigma: &CMat) -> f64;
    /// Hermitian gradient at `σ` (with respect to the trace inner product).
    fn gradient(&self, sigma: &CMat) -> CMat;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FwOptions {
    pub gap: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub lazy: bool,
}

impl Default for FwOptions {
    fn default() -> Self {
        FwOptions { gap: DEFAULT_GAP, max_iter: DEFAULT_MAX_ITER, seed: 0, lazy: true }
    }
}

impl FwOptions {
    pub fn with_gap(gap: f64) -> Self {
        FwOptions { gap, ..Self::default() }
    }
}

#[derive(Clone, Debug)]
pub struct FwOutcome {
    pub sigma: CMat,
    pub value: f64,
    /// Certified lower bound on the minimum (−∞ if never certified).
    pub lower_bound: f64,
    pub iterations: usize,
    pub lmo_calls: usize,
    pub converged: bool,
    /// Final active set with weights.
    pub atoms: Vec<(CMat, f64)>,
}

impl FwOutcome {
    pub fn certified_gap(&self) -> f64 {
        self.value - self.lower_bound
    }
}

/// Golden-section minimisation of a convex function on `[0, hi]`. Returns the
/// best point among the bracket result and the right endpoint.
pub fn golden_section(f: impl Fn(f64) -> f64, hi: f64) -> (f64, f64) {
    let (mut a, mut b) = (0.0, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > LINE_SEARCH_TOL {
        // Treat +∞ as larger than any finite value; ties move toward 0.
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    let (mut x, mut fx) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    let fh = f(hi);
    if fh <= fx {
        x = hi;
        fx = fh;
    }
    (x, fx)
}

fn combine(atoms: &[CMat], w: &[f64]) -> CMat {
    let d = atoms[0].nrows();
    let mut s = CMat::zeros(d, d);
    for (a, &wk) in atoms.iter().zip(w) {
        s += a * c(wk, 0.0);
    }
    s
}

/// Minimise a convex objective over a set given by a linear minimisation oracle.
pub fn minimize<O, S>(obj: &O, set: &S, start: Vec<(CMat, f64)>, opts: &FwOptions) -> Result<FwOutcome>
where
    O: Objective + ?Sized,
    S: LinearMinimizer + ?Sized,
{
    if start.is_empty() {
        return Err(Error::Precondition("empty starting active set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (mut atoms, mut w): (Vec<CMat>, Vec<f64>) = start.into_iter().unzip();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    let mut sigma = combine(&atoms, &w);
    let mut f = obj.value(&sigma);
    if !f.is_finite() {
        return Err(Error::Numerical("objective is infinite at the starting point".into()));
    }
    let mut lower = f64::NEG_INFINITY;
    let mut phi: Option<f64> = None;
    let mut lmo_calls = 0;
    let mut converged = false;
    let mut stalls = 0;
    // A lazy step that fails to descend hands the next step to the oracle.
    let mut force_lmo = false;
    let mut it = 0;
    while it < opts.max_iter {
        it += 1;
        let g = obj.gradient(&sigma);
        let gs = trace_product_re(&g, &sigma);
        let scores: Vec<f64> = atoms.iter().map(|a| trace_product_re(&g, a)).collect();
        let away = (0..atoms.len()).max_by(|&a, &b| scores[a].total_cmp(&scores[b])).unwrap();

        let mut target: Option<usize> = None;
        let mut lazy_step = false;
        if opts.lazy && !force_lmo {
            if let Some(p) = phi {
                let best = (0..atoms.len()).min_by(|&a, &b| scores[a].total_cmp(&scores[b])).unwrap();
                if gs - scores[best] >= p / 2.0 && best != away {
                    target = Some(best);
                    lazy_step = true;
                }
            }
        }
        let target = match target {
            Some(t) => t,
            None => {
                force_lmo = false;
                let s = set.lmo(&g, &mut rng)?;
                lmo_calls += 1;
                let ss = trace_product_re(&g, &s);
                let fw_gap = gs - ss;
                if fw_gap <= opts.gap {
                    let lb = if set.lmo_is_exact() { ss } else { set.lmo_lower_bound(&g, &mut rng)? };
                    lower = lower.max(f - (gs - lb));
                    if f - lower <= opts.gap {
                        converged = true;
                        break;
                    }
                }
                phi = Some(fw_gap.max(0.0));
                match atoms.iter().position(|a| max_abs(&(a - &s)) < 1e-12) {
                    Some(k) => k,
                    None => {
                        atoms.push(s);
                        w.push(0.0);
                        atoms.len() - 1
                    }
                }
            }
        };
        if target == away {
            phi = phi.map(|p| p / 2.0);
            stalls += 1;
            if stalls > STALL_LIMIT {
                break;
            }
            continue;
        }
        let d = &atoms[target] - &atoms[away];
        let gmax = w[away];
        let (gamma, fnew) = golden_section(|t| obj.value(&(&sigma + &d * c(t, 0.0))), gmax);
        if !(fnew < f) {
            force_lmo = lazy_step;
            phi = phi.map(|p| p / 2.0);
            stalls += 1;
            if stalls > STALL_LIMIT {
                break;
            }
            continue;
        }
        stalls = 0;
        w[target] += gamma;
        w[away] -= gamma;
        if w[away] <= 1e-15 {
            w.remove(away);
            atoms.remove(away);
        }
        sigma = if it % 64 == 0 { combine(&atoms, &w) } else { &sigma + d * c(gamma, 0.0) };
        f = obj.value(&sigma);
    }
    if !converged {
        let g = obj.gradient(&sigma);
        let gs = trace_product_re(&g, &sigma);
        let lb = set.lmo_lower_bound(&g, &mut rng)?;
        lower = lower.max(f - (gs - lb));
        converged = f - lower <= opts.gap;
    }
    Ok(FwOutcome {
        sigma,
        value: f,
        lower_bound: lower,
        iterations: it,
        lmo_calls,
        converged,
        atoms: atoms.into_iter().zip(w).collect(),
    })
}
