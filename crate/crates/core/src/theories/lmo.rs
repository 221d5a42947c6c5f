//! Linear minimisation oracles over free-state sets.

use rand_chacha::ChaCha8Rng;

use super::sets::{FreeStateSet, SetKind};
use crate::channels::KrausChannel;
use crate::error::{Error, Result};
use crate::qcore::eig::eigh;
use crate::qcore::matrix::{c, kron_all, outer, real_part, trace_product_re, CMat};
use crate::qcore::random::random_hermitian;
use crate::qcore::tensor_ops::partial_trace_raw;

/// See-saw restarts for product-state minimisation.
pub const SEESAW_RESTARTS: usize = 20;
const SEESAW_SWEEPS: usize = 100;
/// Cap on enumerated products of finite extreme points.
const MAX_ENUMERATION: usize = 4096;

/// A compact convex set of states that can be linearly minimised over.
pub trait LinearMinimizer: Sync {
    fn dim(&self) -> usize;
    /// A point of the set (approximately) minimising `Re Tr(G μ)`.
    fn lmo(&self, g: &CMat, rng: &mut ChaCha8Rng) -> Result<CMat>;
    /// A certified lower bound on `min_μ Re Tr(G μ)`.
    fn lmo_lower_bound(&self, g: &CMat, rng: &mut ChaCha8Rng) -> Result<f64>;
    /// A member of maximal support.
    fn interior_point(&self) -> CMat;
    /// Whether `lmo` returns a true minimiser.
    fn lmo_is_exact(&self) -> bool;
}

fn min_eigvec_state(g: &CMat) -> CMat {
    let e = eigh(g);
    outer(&e.vector(0))
}

/// Margin subtracted from interior-point dual values.
fn sdp_margin(v: f64) -> f64 {
    1e-7 * (1.0 + v.abs())
}

/// `Tr_{¬k}[G (μ_0 ⊗ … ⊗ I_k ⊗ … )]`.
pub(crate) fn contract(g: &CMat, bdims: &[usize], k: usize, mus: &[CMat]) -> CMat {
    let factors: Vec<CMat> = (0..bdims.len())
        .map(|j| if j == k { CMat::identity(bdims[j], bdims[j]) } else { mus[j].clone() })
        .collect();
    let m = g * kron_all(&factors);
    partial_trace_raw(&m, bdims, &[k])
}

/// Alternating minimisation of `Tr G (⊗ μ_k)` over products of local sets.
pub(crate) fn seesaw(
    g: &CMat,
    locals: &[&FreeStateSet],
    rng: &mut ChaCha8Rng,
    restarts: usize,
) -> Result<(Vec<CMat>, f64)> {
    let bdims: Vec<usize> = locals.iter().map(|l| l.dim()).collect();
    let mut best: Option<(Vec<CMat>, f64)> = None;
    for r in 0..restarts.max(1) {
        let mut mus: Vec<CMat> = Vec::with_capacity(locals.len());
        for (k, l) in locals.iter().enumerate() {
            let h = if r == 0 {
                // Start from the marginal of the global minimiser.
                partial_trace_raw(&min_eigvec_state(g), &bdims, &[k]) * c(-1.0, 0.0)
            } else {
                random_hermitian(bdims[k], rng)
            };
            mus.push(l.lmo(&h, rng)?);
        }
        let mut value = trace_product_re(g, &kron_all(&mus));
        for _ in 0..SEESAW_SWEEPS {
            for k in 0..locals.len() {
                let gk = contract(g, &bdims, k, &mus);
                mus[k] = locals[k].lmo(&gk, rng)?;
            }
            let v = trace_product_re(g, &kron_all(&mus));
            let done = value - v < 1e-13;
            value = v.min(value);
            if done {
                break;
            }
        }
        if best.as_ref().is_none_or(|b| value < b.1) {
            best = Some((mus, value));
        }
    }
    Ok(best.expect("at least one restart"))
}

fn is_finite_kind(l: &FreeStateSet) -> bool {
    l.finite_extreme_points().is_some()
}

/// LMO over a minimal composite: enumerate the finite locals, see-saw the rest.
fn min_composite_lmo(set: &FreeStateSet, locals: &[FreeStateSet], g: &CMat, rng: &mut ChaCha8Rng) -> Result<CMat> {
    let bdims: Vec<usize> = locals.iter().map(|l| l.dim()).collect();
    let finite: Vec<usize> = (0..locals.len()).filter(|&k| is_finite_kind(&locals[k])).collect();
    let rest: Vec<usize> = (0..locals.len()).filter(|k| !finite.contains(k)).collect();
    let lists: Vec<Vec<CMat>> = finite.iter().map(|&k| locals[k].finite_extreme_points().unwrap()).collect();
    let combos: usize = lists.iter().map(|l| l.len()).product();
    if combos > MAX_ENUMERATION {
        let refs: Vec<&FreeStateSet> = locals.iter().collect();
        let (mus, _) = seesaw(g, &refs, rng, SEESAW_RESTARTS)?;
        return Ok(kron_all(&mus));
    }
    let _ = set;
    let mut best: Option<(Vec<CMat>, f64)> = None;
    let mut idx = vec![0usize; finite.len()];
    for _ in 0..combos {
        let mut mus: Vec<CMat> = bdims.iter().map(|&d| CMat::identity(d, d)).collect();
        for (s, &k) in finite.iter().enumerate() {
            mus[k] = lists[s][idx[s]].clone();
        }
        // Reduce G onto the remaining blocks.
        match rest.len() {
            0 => {}
            1 => {
                let k = rest[0];
                let gk = contract(g, &bdims, k, &mus);
                mus[k] = locals[k].lmo(&gk, rng)?;
            }
            _ => {
                let fixed: Vec<CMat> = (0..bdims.len())
                    .map(|j| if rest.contains(&j) { CMat::identity(bdims[j], bdims[j]) } else { mus[j].clone() })
                    .collect();
                let gr = partial_trace_raw(&(g * kron_all(&fixed)), &bdims, &rest);
                let refs: Vec<&FreeStateSet> = rest.iter().map(|&k| &locals[k]).collect();
                let (sub, _) = seesaw(&gr, &refs, rng, SEESAW_RESTARTS)?;
                for (s, &k) in rest.iter().enumerate() {
                    mus[k] = sub[s].clone();
                }
            }
        }
        let v = trace_product_re(g, &kron_all(&mus));
        if best.as_ref().is_none_or(|b| v < b.1) {
            best = Some((mus, v));
        }
        for s in 0..idx.len() {
            idx[s] += 1;
            if idx[s] < lists[s].len() {
                break;
            }
            idx[s] = 0;
        }
    }
    Ok(kron_all(&best.expect("non-empty enumeration").0))
}

fn sdp_lower_bound(set: &FreeStateSet, g: &CMat) -> Result<f64> {
    let (s, _) = set.spectrahedron()?;
    let sol = s.minimize(g)?;
    let v = sol.primal.min(sol.dual);
    Ok(v - sdp_margin(v))
}

impl LinearMinimizer for FreeStateSet {
    fn dim(&self) -> usize {
        FreeStateSet::dim(self)
    }

    fn lmo(&self, g: &CMat, rng: &mut ChaCha8Rng) -> Result<CMat> {
        if g.nrows() != self.dim() {
            return Err(Error::DimensionMismatch("gradient vs set dimension".into()));
        }
        match self.kind() {
            SetKind::Incoherent { basis } => {
                let rot = match basis {
                    Some(u) => u.adjoint() * g * u,
                    None => g.clone(),
                };
                let k = (0..self.dim())
                    .min_by(|&a, &b| rot[(a, a)].re.total_cmp(&rot[(b, b)].re))
                    .unwrap();
                let mut e = CMat::zeros(self.dim(), self.dim());
                e[(k, k)] = c(1.0, 0.0);
                Ok(match basis {
                    Some(u) => u * e * u.adjoint(),
                    None => e,
                })
            }
            SetKind::Real { basis } => {
                // Tr(G μ) = Tr(Re(G) μ) for real symmetric μ.
                let rot = match basis {
                    Some(u) => u.adjoint() * g * u,
                    None => g.clone(),
                };
                let e = eigh(&real_part(&rot));
                // Undo any global phase so the minimiser is a real vector.
                let v = e.vector(0);
                let big = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
                let ph = big.conj() / big.norm();
                let v: Vec<_> = v.iter().map(|z| c((z * ph).re, 0.0)).collect();
                let m = outer(&v);
                Ok(match basis {
                    Some(u) => u * m * u.adjoint(),
                    None => m,
                })
            }
            SetKind::Singleton { gamma } => Ok(gamma.clone()),
            SetKind::AllStates => Ok(min_eigvec_state(g)),
            SetKind::SeparableTwoQubit => {
                let s = self.structure();
                let locals = [
                    FreeStateSet::all_states(s.select(&[0])),
                    FreeStateSet::all_states(s.select(&[1])),
                ];
                let refs: Vec<&FreeStateSet> = locals.iter().collect();
                let (mus, _) = seesaw(g, &refs, rng, SEESAW_RESTARTS)?;
                Ok(kron_all(&mus))
            }
            SetKind::MinComposite { locals } => min_composite_lmo(self, locals, g, rng),
            SetKind::MaxComposite { locals } => {
                // The oracle is inexact anyway, so a stalled solve falls back
                // to the product oracle over the minimal composite inside.
                let s = self.max_spectrahedron()?;
                match s.minimize(g) {
                    Ok(sol) => Ok(super::sdp::clean_state(&sol.argmin)),
                    Err(Error::Numerical(_)) => min_composite_lmo(self, locals, g, rng),
                    Err(e) => Err(e),
                }
            }
            SetKind::ConvexHull { points } => Ok(points
                .iter()
                .min_by(|a, b| trace_product_re(g, a).total_cmp(&trace_product_re(g, b)))
                .unwrap()
                .clone()),
        }
    }

    fn lmo_lower_bound(&self, g: &CMat, rng: &mut ChaCha8Rng) -> Result<f64> {
        if self.lmo_is_exact() {
            return Ok(trace_product_re(g, &self.lmo(g, rng)?));
        }
        match self.kind() {
            SetKind::SeparableTwoQubit | SetKind::MaxComposite { .. } | SetKind::MinComposite { .. } => {
                sdp_lower_bound(self, g).or_else(|_| Ok(eigh(g).min()))
            }
            _ => Ok(eigh(g).min()),
        }
    }

    fn interior_point(&self) -> CMat {
        FreeStateSet::interior_point(self)
    }

    fn lmo_is_exact(&self) -> bool {
        match self.kind() {
            SetKind::SeparableTwoQubit => false,
            SetKind::MaxComposite { .. } => false,
            SetKind::MinComposite { locals } => {
                let rest: Vec<&FreeStateSet> = locals.iter().filter(|l| !is_finite_kind(l)).collect();
                let combos: usize =
                    locals.iter().filter_map(|l| l.finite_extreme_points()).map(|p| p.len()).product();
                combos <= MAX_ENUMERATION && rest.len() <= 1 && rest.iter().all(|l| l.lmo_is_exact())
            }
            _ => true,
        }
    }
}

/// The image `Λ(S)` of a set under a channel; `LMO(G) = Λ(LMO_S(Λ†G))`.
pub struct ChannelImage<'a, S: LinearMinimizer> {
    pub channel: &'a KrausChannel,
    pub set: &'a S,
}

impl<S: LinearMinimizer> LinearMinimizer for ChannelImage<'_, S> {
    fn dim(&self) -> usize {
        self.channel.out_dim()
    }

    fn lmo(&self, g: &CMat, rng: &mut ChaCha8Rng) -> Result<CMat> {
        let pulled = self.channel.adjoint_apply(g);
        Ok(self.channel.apply_mat(&self.set.lmo(&pulled, rng)?))
    }

    fn lmo_lower_bound(&self, g: &CMat, rng: &mut ChaCha8Rng) -> Result<f64> {
        self.set.lmo_lower_bound(&self.channel.adjoint_apply(g), rng)
    }

    fn interior_point(&self) -> CMat {
        self.channel.apply_mat(&self.set.interior_point())
    }

    fn lmo_is_exact(&self) -> bool {
        self.set.lmo_is_exact()
    }
}
