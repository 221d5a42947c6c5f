use std::ops::Range;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sdp::Spectrahedron;
use crate::error::{Error, Result};
use crate::qcore::eig::{min_eigenvalue, trace_norm};
use crate::qcore::entropy::{entropy_mat, relative_entropy_mat};
use crate::qcore::matrix::{
    c, diagonal_part, frobenius, kron_all, real_part, unitarity_defect, CMat, MatrixLiteral,
};
use crate::qcore::random::{haar_vector, random_density, random_simplex, real_unit_vector};
use crate::qcore::state::DensityOperator;
use crate::qcore::structure::{digits, TensorStructure};
use crate::qcore::tensor_ops::{embed_raw, partial_trace_raw, partial_transpose_raw, permute_raw};

/// Default membership tolerance.
pub const MEMBERSHIP_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub enum SetKind {
    /// Diagonal states in the basis given by the columns of `basis`
    /// (computational basis when `None`).
    Incoherent { basis: Option<CMat> },
    /// States with real entries in the given basis.
    Real { basis: Option<CMat> },
    Singleton { gamma: CMat },
    /// Separable states across the two parties of the structure (PPT, exact
    /// for 2×2 and 2×3).
    SeparableTwoQubit,
    AllStates,
    /// conv{⊗ μ_i : μ_i ∈ S_i}; locals occupy consecutive parties.
    MinComposite { locals: Vec<FreeStateSet> },
    /// {μ : every local marginal of μ lies in S_i}.
    MaxComposite { locals: Vec<FreeStateSet> },
    /// Convex hull of finitely many states.
    ConvexHull { points: Vec<CMat> },
}

/// A closed convex set of states on a labelled tensor structure.
#[derive(Clone, Debug)]
pub struct FreeStateSet {
    kind: SetKind,
    structure: TensorStructure,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub has_closed_form_closest: bool,
    pub has_extreme_point_oracle: bool,
    pub has_linear_membership: bool,
}

fn check_basis(basis: &CMat, d: usize) -> Result<()> {
    if basis.nrows() != d || basis.ncols() != d {
        return Err(Error::DimensionMismatch(format!("basis must be {d}x{d}")));
    }
    if unitarity_defect(basis) > 1e-10 {
        return Err(Error::Precondition("basis is not orthonormal".into()));
    }
    Ok(())
}

fn rotate_in(basis: &Option<CMat>, m: &CMat) -> CMat {
    match basis {
        Some(u) => u.adjoint() * m * u,
        None => m.clone(),
    }
}

fn rotate_out(basis: &Option<CMat>, m: &CMat) -> CMat {
    match basis {
        Some(u) => u * m * u.adjoint(),
        None => m.clone(),
    }
}

fn offdiag_norm(m: &CMat) -> f64 {
    frobenius(&(m - diagonal_part(m)))
}

fn imag_norm(m: &CMat) -> f64 {
    m.iter().map(|z| z.im * z.im).sum::<f64>().sqrt()
}

fn normalize(m: CMat) -> CMat {
    let t = crate::qcore::matrix::trace(&m).re;
    m * c(1.0 / t, 0.0)
}

/// A linear constraint on a state, used to build spectrahedral descriptions.
#[derive(Clone)]
pub(crate) enum Constraint {
    Eq(CMat, f64),
    Psd(Arc<dyn Fn(&CMat) -> CMat + Send + Sync>),
}

impl FreeStateSet {
    pub fn incoherent(structure: TensorStructure) -> Self {
        FreeStateSet { kind: SetKind::Incoherent { basis: None }, structure }
    }

    pub fn incoherent_in(structure: TensorStructure, basis: CMat) -> Result<Self> {
        check_basis(&basis, structure.total_dim())?;
        Ok(FreeStateSet { kind: SetKind::Incoherent { basis: Some(basis) }, structure })
    }

    pub fn real(structure: TensorStructure) -> Self {
        FreeStateSet { kind: SetKind::Real { basis: None }, structure }
    }

    pub fn real_in(structure: TensorStructure, basis: CMat) -> Result<Self> {
        check_basis(&basis, structure.total_dim())?;
        Ok(FreeStateSet { kind: SetKind::Real { basis: Some(basis) }, structure })
    }

    pub fn singleton(gamma: &DensityOperator) -> Self {
        FreeStateSet {
            kind: SetKind::Singleton { gamma: gamma.matrix().clone() },
            structure: gamma.structure().clone(),
        }
    }

    pub fn separable_two_qubit(structure: TensorStructure) -> Result<Self> {
        let dims = structure.dims();
        let ok = matches!(dims.as_slice(), [2, 2] | [2, 3] | [3, 2]);
        if !ok {
            return Err(Error::Unsupported(format!(
                "PPT decides separability only for 2x2 and 2x3, got {dims:?}"
            )));
        }
        Ok(FreeStateSet { kind: SetKind::SeparableTwoQubit, structure })
    }

    pub fn all_states(structure: TensorStructure) -> Self {
        FreeStateSet { kind: SetKind::AllStates, structure }
    }

    pub fn min_composite(locals: Vec<FreeStateSet>) -> Result<Self> {
        let structure = Self::composite_structure(&locals)?;
        Ok(FreeStateSet { kind: SetKind::MinComposite { locals }, structure })
    }

    pub fn max_composite(locals: Vec<FreeStateSet>) -> Result<Self> {
        let structure = Self::composite_structure(&locals)?;
        Ok(FreeStateSet { kind: SetKind::MaxComposite { locals }, structure })
    }

    pub fn convex_hull(points: &[DensityOperator]) -> Result<Self> {
        let first = points.first().ok_or_else(|| Error::Precondition("empty point list".into()))?;
        if points.iter().any(|p| p.dim() != first.dim()) {
            return Err(Error::DimensionMismatch("hull points differ in dimension".into()));
        }
        Ok(FreeStateSet {
            kind: SetKind::ConvexHull { points: points.iter().map(|p| p.matrix().clone()).collect() },
            structure: first.structure().clone(),
        })
    }

    fn composite_structure(locals: &[FreeStateSet]) -> Result<TensorStructure> {
        if locals.len() < 2 {
            return Err(Error::Precondition("a composite needs at least two local sets".into()));
        }
        let mut s = locals[0].structure.clone();
        for l in &locals[1..] {
            s = s.concat(&l.structure);
        }
        Ok(s)
    }

    pub fn kind(&self) -> &SetKind {
        &self.kind
    }

    pub fn structure(&self) -> &TensorStructure {
        &self.structure
    }

    pub fn dim(&self) -> usize {
        self.structure.total_dim()
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            SetKind::Incoherent { .. } => "incoherent",
            SetKind::Real { .. } => "real",
            SetKind::Singleton { .. } => "singleton",
            SetKind::SeparableTwoQubit => "separable_two_qubit",
            SetKind::AllStates => "all_states",
            SetKind::MinComposite { .. } => "min_composite",
            SetKind::MaxComposite { .. } => "max_composite",
            SetKind::ConvexHull { .. } => "convex_hull",
        }
    }

    /// Same set on a relabelled structure of equal shape.
    pub fn with_structure(&self, structure: TensorStructure) -> Result<Self> {
        if !self.structure.same_shape(&structure) {
            return Err(Error::DimensionMismatch("relabelled structure changes shape".into()));
        }
        Ok(FreeStateSet { kind: self.kind.clone(), structure })
    }

    pub fn capabilities(&self) -> Capabilities {
        let linear = match &self.kind {
            SetKind::Incoherent { .. } | SetKind::Real { .. } | SetKind::Singleton { .. } | SetKind::AllStates => true,
            SetKind::MaxComposite { locals } => locals.iter().all(|l| l.capabilities().has_linear_membership),
            _ => false,
        };
        Capabilities {
            has_closed_form_closest: self.closed_form_available(),
            has_extreme_point_oracle: true,
            has_linear_membership: linear,
        }
    }

    fn closed_form_available(&self) -> bool {
        match &self.kind {
            SetKind::Incoherent { .. } | SetKind::Real { .. } | SetKind::Singleton { .. } | SetKind::AllStates => true,
            SetKind::MinComposite { locals } => locals
                .iter()
                .all(|l| matches!(l.kind, SetKind::Incoherent { .. } | SetKind::Singleton { .. })),
            _ => false,
        }
    }

    /// Party-position ranges of the locals of a composite.
    pub fn blocks(&self) -> Vec<Range<usize>> {
        match &self.kind {
            SetKind::MinComposite { locals } | SetKind::MaxComposite { locals } => {
                let mut out = Vec::with_capacity(locals.len());
                let mut start = 0;
                for l in locals {
                    let n = l.structure.len();
                    out.push(start..start + n);
                    start += n;
                }
                out
            }
            _ => vec![0..self.structure.len()],
        }
    }

    pub fn locals(&self) -> Option<&[FreeStateSet]> {
        match &self.kind {
            SetKind::MinComposite { locals } | SetKind::MaxComposite { locals } => Some(locals),
            _ => None,
        }
    }

    /// Reduced state of `m` on local block `k`.
    pub fn block_marginal(&self, m: &CMat, k: usize) -> CMat {
        let r = self.blocks()[k].clone();
        let keep: Vec<usize> = r.collect();
        partial_trace_raw(m, &self.structure.dims(), &keep)
    }

    /// Membership with tolerance.
    pub fn contains(&self, rho: &DensityOperator, tol: f64) -> Result<bool> {
        if rho.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "state dimension {} vs set dimension {}",
                rho.dim(),
                self.dim()
            )));
        }
        Ok(self.contains_mat(rho.matrix(), tol))
    }

    /// Membership of a matrix already known to be a state.
    pub fn contains_mat(&self, m: &CMat, tol: f64) -> bool {
        match &self.kind {
            SetKind::Incoherent { basis } => offdiag_norm(&rotate_in(basis, m)) <= tol,
            SetKind::Real { basis } => imag_norm(&rotate_in(basis, m)) <= tol,
            SetKind::Singleton { gamma } => trace_norm(&(m - gamma)) <= tol,
            SetKind::SeparableTwoQubit => {
                min_eigenvalue(&partial_transpose_raw(m, &self.structure.dims(), 1)) >= -tol
            }
            SetKind::AllStates => true,
            SetKind::MaxComposite { locals } => locals
                .iter()
                .enumerate()
                .all(|(k, l)| l.contains_mat(&self.block_marginal(m, k), tol)),
            SetKind::MinComposite { .. } => self.min_composite_contains(m, tol),
            SetKind::ConvexHull { .. } => super::membership::distance_to_set(self, m, tol)
                .map(|d| d <= tol)
                .unwrap_or(false),
        }
    }

    fn min_composite_contains(&self, m: &CMat, tol: f64) -> bool {
        let locals = match &self.kind {
            SetKind::MinComposite { locals } => locals,
            _ => unreachable!(),
        };
        let bdims: Vec<usize> = locals.iter().map(|l| l.dim()).collect();

        // Singleton factors must split off exactly.
        let singles: Vec<usize> =
            (0..locals.len()).filter(|&k| matches!(locals[k].kind, SetKind::Singleton { .. })).collect();
        if !singles.is_empty() {
            let rest: Vec<usize> = (0..locals.len()).filter(|k| !singles.contains(k)).collect();
            let mut factors = Vec::with_capacity(locals.len());
            let rest_marg = if rest.is_empty() { None } else { Some(partial_trace_raw(m, &bdims, &rest)) };
            // Build (⊗ rest-marginal) interleaved with the γ's via a permutation.
            let mut order_src: Vec<usize> = rest.clone();
            order_src.extend(singles.iter().copied());
            if let Some(r) = &rest_marg {
                factors.push(r.clone());
            }
            for &k in &singles {
                if let SetKind::Singleton { gamma } = &locals[k].kind {
                    factors.push(gamma.clone());
                }
            }
            let prod = kron_all(&factors);
            let src_dims: Vec<usize> = order_src.iter().map(|&k| bdims[k]).collect();
            // inverse permutation: output block k is source position of k
            let inv: Vec<usize> = (0..locals.len()).map(|k| order_src.iter().position(|&s| s == k).unwrap()).collect();
            let candidate = permute_raw(&prod, &src_dims, &inv);
            if trace_norm(&(m - &candidate)) > tol {
                return false;
            }
            return match rest.len() {
                0 => true,
                1 => locals[rest[0]].contains_mat(rest_marg.as_ref().unwrap(), tol),
                _ => {
                    let sub = FreeStateSet::min_composite(rest.iter().map(|&k| locals[k].clone()).collect())
                        .expect("at least two locals");
                    sub.contains_mat(rest_marg.as_ref().unwrap(), tol)
                }
            };
        }

        let incoh: Vec<usize> =
            (0..locals.len()).filter(|&k| matches!(locals[k].kind, SetKind::Incoherent { .. })).collect();
        if !incoh.is_empty() {
            // Rotate every incoherent block into its basis; the state must be
            // block diagonal in the incoherent indices, each block in S_min(others).
            let mut rot = Vec::with_capacity(locals.len());
            for l in locals {
                match &l.kind {
                    SetKind::Incoherent { basis: Some(u) } => rot.push(u.clone()),
                    _ => rot.push(CMat::identity(l.dim(), l.dim())),
                }
            }
            let u = kron_all(&rot);
            let mr = u.adjoint() * m * &u;
            let others: Vec<usize> = (0..locals.len()).filter(|k| !incoh.contains(k)).collect();
            let n = mr.nrows();
            let nb = bdims.len();
            let mut di = vec![0; nb];
            let mut dj = vec![0; nb];
            let mut off = 0.0;
            for i in 0..n {
                digits(i, &bdims, &mut di);
                for j in 0..n {
                    digits(j, &bdims, &mut dj);
                    if incoh.iter().any(|&k| di[k] != dj[k]) {
                        off += mr[(i, j)].norm_sqr();
                    }
                }
            }
            if off.sqrt() > tol {
                return false;
            }
            if others.is_empty() {
                return true;
            }
            let odims: Vec<usize> = others.iter().map(|&k| bdims[k]).collect();
            let od: usize = odims.iter().product();
            let idims: Vec<usize> = incoh.iter().map(|&k| bdims[k]).collect();
            let ni: usize = idims.iter().product();
            let sub = if others.len() == 1 {
                locals[others[0]].clone()
            } else {
                FreeStateSet::min_composite(others.iter().map(|&k| locals[k].clone()).collect())
                    .expect("at least two locals")
            };
            let mut ki = vec![0; idims.len()];
            for kk in 0..ni {
                digits(kk, &idims, &mut ki);
                let mut block = CMat::zeros(od, od);
                let mut oi = vec![0; odims.len()];
                let mut oj = vec![0; odims.len()];
                let index_of = |ki: &[usize], oi: &[usize]| -> usize {
                    let mut full = vec![0; nb];
                    for (s, &k) in incoh.iter().enumerate() {
                        full[k] = ki[s];
                    }
                    for (s, &k) in others.iter().enumerate() {
                        full[k] = oi[s];
                    }
                    crate::qcore::structure::flat(&full, &bdims)
                };
                for a in 0..od {
                    digits(a, &odims, &mut oi);
                    for b in 0..od {
                        digits(b, &odims, &mut oj);
                        block[(a, b)] = mr[(index_of(&ki, &oi), index_of(&ki, &oj))];
                    }
                }
                let p = crate::qcore::matrix::trace(&block).re;
                if p <= tol {
                    continue;
                }
                let local_tol = tol / p;
                if !sub.contains_mat(&(block * c(1.0 / p, 0.0)), local_tol) {
                    return false;
                }
            }
            return true;
        }

        let all_general = locals.iter().all(|l| matches!(l.kind, SetKind::AllStates));
        let small = matches!(bdims.as_slice(), [2, 2] | [2, 3] | [3, 2]);
        if all_general && small {
            return min_eigenvalue(&partial_transpose_raw(m, &bdims, 1)) >= -tol;
        }
                super::membership::distance_to_set(self, m, tol).map(|d| d <= tol).unwrap_or(false)
    }

    /// Closed-form closest free state in relative entropy, and the distance in bits.
    pub fn closest_free_state(&self, rho: &DensityOperator) -> Result<(DensityOperator, f64)> {
        if rho.dim() != self.dim() {
            return Err(Error::DimensionMismatch("state vs set".into()));
        }
        let m = rho.matrix();
        let s = self.structure.clone();
        match &self.kind {
            SetKind::Incoherent { basis } => {
                let d = rotate_out(basis, &diagonal_part(&rotate_in(basis, m)));
                let v = (entropy_mat(&d) - entropy_mat(m)).max(0.0);
                Ok((DensityOperator::from_trusted(d, s), v))
            }
            SetKind::Real { basis } => {
                let r = rotate_out(basis, &real_part(&rotate_in(basis, m)));
                let v = (entropy_mat(&r) - entropy_mat(m)).max(0.0);
                Ok((DensityOperator::from_trusted(r, s), v))
            }
            SetKind::Singleton { gamma } => {
                Ok((DensityOperator::from_trusted(gamma.clone(), s), relative_entropy_mat(m, gamma)))
            }
            SetKind::AllStates => Ok((rho.clone(), 0.0)),
            SetKind::MinComposite { locals } if self.closed_form_available() => {
                // σ* = Δ(ρ_I) ⊗ γ_S: dephase the joint marginal of the incoherent
                // blocks, keep the singleton factors.
                let bdims: Vec<usize> = locals.iter().map(|l| l.dim()).collect();
                let incoh: Vec<usize> = (0..locals.len())
                    .filter(|&k| matches!(locals[k].kind, SetKind::Incoherent { .. }))
                    .collect();
                let singles: Vec<usize> = (0..locals.len()).filter(|k| !incoh.contains(k)).collect();
                let mut factors = Vec::new();
                if !incoh.is_empty() {
                    let marg = partial_trace_raw(m, &bdims, &incoh);
                    let mut rot = Vec::new();
                    for &k in &incoh {
                        match &locals[k].kind {
                            SetKind::Incoherent { basis: Some(u) } => rot.push(u.clone()),
                            _ => rot.push(CMat::identity(bdims[k], bdims[k])),
                        }
                    }
                    let u = kron_all(&rot);
                    factors.push(&u * diagonal_part(&(u.adjoint() * marg * &u)) * u.adjoint());
                }
                for &k in &singles {
                    if let SetKind::Singleton { gamma } = &locals[k].kind {
                        factors.push(gamma.clone());
                    }
                }
                let mut order_src = incoh.clone();
                order_src.extend(singles.iter().copied());
                let src_dims: Vec<usize> = order_src.iter().map(|&k| bdims[k]).collect();
                let inv: Vec<usize> =
                    (0..locals.len()).map(|k| order_src.iter().position(|&x| x == k).unwrap()).collect();
                let sigma = permute_raw(&kron_all(&factors), &src_dims, &inv);
                let v = relative_entropy_mat(m, &sigma);
                Ok((DensityOperator::from_trusted(sigma, s), v))
            }
            _ => Err(Error::CapabilityMissing("closed-form closest state")),
        }
    }

    /// A state of maximal support in the set.
    pub fn interior_point(&self) -> CMat {
        let d = self.dim();
        match &self.kind {
            SetKind::Singleton { gamma } => gamma.clone(),
            SetKind::MinComposite { locals } | SetKind::MaxComposite { locals } => {
                kron_all(&locals.iter().map(|l| l.interior_point()).collect::<Vec<_>>())
            }
            SetKind::ConvexHull { points } => {
                let mut m = CMat::zeros(d, d);
                for p in points {
                    m += p;
                }
                m * c(1.0 / points.len() as f64, 0.0)
            }
            _ => CMat::identity(d, d) * c(1.0 / d as f64, 0.0),
        }
    }

    /// Extreme points when there are finitely many.
    pub fn finite_extreme_points(&self) -> Option<Vec<CMat>> {
        match &self.kind {
            SetKind::Incoherent { basis } => {
                let d = self.dim();
                Some(
                    (0..d)
                        .map(|k| {
                            let mut e = CMat::zeros(d, d);
                            e[(k, k)] = c(1.0, 0.0);
                            rotate_out(basis, &e)
                        })
                        .collect(),
                )
            }
            SetKind::Singleton { gamma } => Some(vec![gamma.clone()]),
            SetKind::ConvexHull { points } => Some(points.clone()),
            SetKind::MinComposite { locals } => {
                let lists: Option<Vec<Vec<CMat>>> = locals.iter().map(|l| l.finite_extreme_points()).collect();
                let lists = lists?;
                let mut out = vec![CMat::identity(1, 1)];
                for list in &lists {
                    let mut next = Vec::with_capacity(out.len() * list.len());
                    for a in &out {
                        for b in list {
                            next.push(a.kronecker(b));
                        }
                    }
                    out = next;
                }
                Some(out)
            }
            _ => None,
        }
    }

    /// A random element of the set (always passes `contains`).
    pub fn random_free_state<R: Rng + ?Sized>(&self, rng: &mut R) -> CMat {
        let d = self.dim();
        match &self.kind {
            SetKind::Incoherent { basis } => {
                let p = random_simplex(d, rng);
                rotate_out(basis, &crate::qcore::matrix::diag(&p))
            }
            SetKind::Real { basis } => {
                let rank = rng.random_range(1..=d);
                let mut m = CMat::zeros(d, d);
                for _ in 0..rank {
                    let v = real_unit_vector(d, rng);
                    m += crate::qcore::matrix::outer(&v) * c(rng.random::<f64>() + 1e-3, 0.0);
                }
                rotate_out(basis, &normalize(m))
            }
            SetKind::Singleton { gamma } => gamma.clone(),
            SetKind::AllStates => random_density(d, rng),
            SetKind::SeparableTwoQubit => {
                let dims = self.structure.dims();
                let n = rng.random_range(1..=8);
                let w = random_simplex(n, rng);
                let mut m = CMat::zeros(d, d);
                for wk in w {
                    let a = crate::qcore::matrix::outer(&haar_vector(dims[0], rng));
                    let b = crate::qcore::matrix::outer(&haar_vector(dims[1], rng));
                    m += a.kronecker(&b) * c(wk, 0.0);
                }
                m
            }
            SetKind::MinComposite { locals } => {
                let n = rng.random_range(1..=8);
                let w = random_simplex(n, rng);
                let mut m = CMat::zeros(d, d);
                for wk in w {
                    let prod = kron_all(&locals.iter().map(|l| l.random_free_state(rng)).collect::<Vec<_>>());
                    m += prod * c(wk, 0.0);
                }
                m
            }
            SetKind::MaxComposite { locals } => {
                let n = rng.random_range(1..=3);
                let mut parts: Vec<CMat> = (0..n)
                    .map(|_| kron_all(&locals.iter().map(|l| l.random_free_state(rng)).collect::<Vec<_>>()))
                    .collect();
                if rng.random::<bool>() {
                    let g = crate::qcore::random::random_hermitian(d, rng);
                    if let Ok(sol) = self.max_spectrahedron().and_then(|s| s.minimize(&g)) {
                        let cleaned = super::sdp::clean_state(&sol.argmin);
                        if self.contains_mat(&cleaned, 1e-7) {
                            parts.push(cleaned);
                        }
                    }
                }
                let w = random_simplex(parts.len(), rng);
                let mut m = CMat::zeros(d, d);
                for (wk, p) in w.iter().zip(parts) {
                    m += p * c(*wk, 0.0);
                }
                m
            }
            SetKind::ConvexHull { points } => {
                let w = random_simplex(points.len(), rng);
                let mut m = CMat::zeros(d, d);
                for (wk, p) in w.iter().zip(points) {
                    m += p * c(*wk, 0.0);
                }
                m
            }
        }
    }

    /// Spectrahedral constraints describing the set (beyond `μ ⪰ 0, Tr μ = 1`).
    /// The flag is `true` when the description is exact, `false` for a relaxation.
    pub(crate) fn constraints(&self) -> Result<(Vec<Constraint>, bool)> {
        let d = self.dim();
        let mut out = Vec::new();
        match &self.kind {
            SetKind::AllStates => Ok((out, true)),
            SetKind::Incoherent { basis } | SetKind::Real { basis } => {
                let real_only = matches!(self.kind, SetKind::Real { .. });
                for i in 0..d {
                    for j in (i + 1)..d {
                        let mut s = CMat::zeros(d, d);
                        s[(i, j)] = c(1.0, 0.0);
                        s[(j, i)] = c(1.0, 0.0);
                        let mut a = CMat::zeros(d, d);
                        a[(i, j)] = c(0.0, 1.0);
                        a[(j, i)] = c(0.0, -1.0);
                        if !real_only {
                            out.push(Constraint::Eq(rotate_out(basis, &s), 0.0));
                        }
                        out.push(Constraint::Eq(rotate_out(basis, &a), 0.0));
                    }
                }
                Ok((out, true))
            }
            SetKind::Singleton { gamma } => {
                let basis = super::sdp::hermitian_basis(d);
                for (k, b) in basis.iter().enumerate() {
                    if k == d - 1 {
                        continue; // implied by the trace constraint
                    }
                    out.push(Constraint::Eq(b.clone(), crate::qcore::matrix::trace_product_re(b, gamma)));
                }
                Ok((out, true))
            }
            SetKind::SeparableTwoQubit => {
                let dims = self.structure.dims();
                out.push(Constraint::Psd(Arc::new(move |m: &CMat| partial_transpose_raw(m, &dims, 1))));
                Ok((out, true))
            }
            SetKind::MaxComposite { locals } | SetKind::MinComposite { locals } => {
                let mut exact = matches!(self.kind, SetKind::MaxComposite { .. });
                let bdims: Vec<usize> = locals.iter().map(|l| l.dim()).collect();
                for (k, l) in locals.iter().enumerate() {
                    let (cs, local_exact) = l.constraints()?;
                    exact &= local_exact;
                    let ld = l.dim();
                    for cst in cs {
                        match cst {
                            Constraint::Eq(a, b) => {
                                out.push(Constraint::Eq(embed_raw(&a, &bdims, &[k], &[ld]), b));
                            }
                            Constraint::Psd(f) => {
                                let bd = bdims.clone();
                                out.push(Constraint::Psd(Arc::new(move |m: &CMat| f(&partial_trace_raw(m, &bd, &[k])))));
                            }
                        }
                    }
                }
                if matches!(self.kind, SetKind::MinComposite { .. }) {
                    // Every state of S_min is separable across each local block.
                    for k in 0..locals.len() {
                        let bd = bdims.clone();
                        out.push(Constraint::Psd(Arc::new(move |m: &CMat| partial_transpose_raw(m, &bd, k))));
                    }
                    let only_two_general = locals.len() == 2
                        && locals.iter().all(|l| matches!(l.kind, SetKind::AllStates))
                        && matches!(bdims.as_slice(), [2, 2] | [2, 3] | [3, 2]);
                    exact = only_two_general;
                }
                Ok((out, exact))
            }
            SetKind::ConvexHull { .. } => Err(Error::Unsupported("spectrahedral form of a convex hull".into())),
        }
    }

    /// Spectrahedron for the set, or an outer relaxation of it. The flag is
    /// `true` when exact.
    pub fn spectrahedron(&self) -> Result<(Spectrahedron, bool)> {
        let (cs, exact) = self.constraints()?;
        let mut s = Spectrahedron::states(self.dim());
        for cst in cs {
            match cst {
                Constraint::Eq(a, b) => s.add_equality(a, b),
                Constraint::Psd(f) => s.add_psd_map(move |m| f(m)),
            }
        }
        Ok((s, exact))
    }

    /// Exact spectrahedron of a maximal composite.
    pub(crate) fn max_spectrahedron(&self) -> Result<Spectrahedron> {
        let (s, exact) = self.spectrahedron()?;
        if !exact {
            return Err(Error::Unsupported("no exact spectrahedral form".into()));
        }
        Ok(s)
    }

    /// States used to verify `Λ(S) ⊆ S`: the extreme points when finitely
    /// many, otherwise random members plus oracle extreme points.
    pub fn verification_states<R: Rng + ?Sized>(&self, samples: usize, rng: &mut R) -> (Vec<CMat>, VerificationMode) {
        if let Some(pts) = self.finite_extreme_points() {
            return (pts, VerificationMode::Exhaustive);
        }
        let mut out = Vec::with_capacity(samples);
        for k in 0..samples {
            if k % 2 == 0 {
                out.push(self.random_free_state(rng));
            } else {
                let g = crate::qcore::random::random_hermitian(self.dim(), rng);
                let mut r = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(rng.random());
                match super::lmo::LinearMinimizer::lmo(self, &g, &mut r) {
                    Ok(p) => out.push(p),
                    Err(_) => out.push(self.random_free_state(rng)),
                }
            }
        }
        (out, VerificationMode::Sampled)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerificationMode {
    Exhaustive,
    Sampled,
}

/// Theory descriptor JSON: `{kind, parties?, basis?, gamma?, locals?, points?}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SetDescriptor {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parties: Option<TensorStructure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<MatrixLiteral>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<DensityOperator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub locals: Option<Vec<SetDescriptor>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<DensityOperator>>,
}

impl TryFrom<&SetDescriptor> for FreeStateSet {
    type Error = Error;
    fn try_from(d: &SetDescriptor) -> Result<Self> {
        let parties = || {
            d.parties.clone().ok_or_else(|| Error::Parse(format!("`{}` set needs `parties`", d.kind)))
        };
        let basis = |n: usize| -> Result<Option<CMat>> {
            match &d.basis {
                None => Ok(None),
                Some(l) => {
                    let b = l.to_matrix()?;
                    check_basis(&b, n)?;
                    Ok(Some(b))
                }
            }
        };
        match d.kind.as_str() {
            "incoherent" => {
                let s = parties()?;
                let b = basis(s.total_dim())?;
                Ok(FreeStateSet { kind: SetKind::Incoherent { basis: b }, structure: s })
            }
            "real" => {
                let s = parties()?;
                let b = basis(s.total_dim())?;
                Ok(FreeStateSet { kind: SetKind::Real { basis: b }, structure: s })
            }
            "singleton" => {
                let g = d.gamma.as_ref().ok_or_else(|| Error::Parse("singleton needs `gamma`".into()))?;
                Ok(FreeStateSet::singleton(g))
            }
            "separable_two_qubit" => FreeStateSet::separable_two_qubit(parties()?),
            "all_states" => Ok(FreeStateSet::all_states(parties()?)),
            "min_composite" | "max_composite" => {
                let ls = d.locals.as_ref().ok_or_else(|| Error::Parse("composite needs `locals`".into()))?;
                let locals = ls.iter().map(FreeStateSet::try_from).collect::<Result<Vec<_>>>()?;
                if d.kind == "min_composite" {
                    FreeStateSet::min_composite(locals)
                } else {
                    FreeStateSet::max_composite(locals)
                }
            }
            "convex_hull" => {
                let pts = d.points.as_ref().ok_or_else(|| Error::Parse("convex_hull needs `points`".into()))?;
                FreeStateSet::convex_hull(pts)
            }
            other => Err(Error::Parse(format!("unknown set kind `{other}`"))),
        }
    }
}

impl From<&FreeStateSet> for SetDescriptor {
    fn from(s: &FreeStateSet) -> Self {
        let mut d = SetDescriptor {
            kind: s.kind_name().to_string(),
            parties: None,
            basis: None,
            gamma: None,
            locals: None,
            points: None,
        };
        match &s.kind {
            SetKind::Incoherent { basis } | SetKind::Real { basis } => {
                d.parties = Some(s.structure.clone());
                d.basis = basis.as_ref().map(MatrixLiteral::from_matrix);
            }
            SetKind::Singleton { gamma } => {
                d.gamma = Some(DensityOperator::from_trusted(gamma.clone(), s.structure.clone()));
            }
            SetKind::SeparableTwoQubit | SetKind::AllStates => d.parties = Some(s.structure.clone()),
            SetKind::MinComposite { locals } | SetKind::MaxComposite { locals } => {
                d.locals = Some(locals.iter().map(SetDescriptor::from).collect());
            }
            SetKind::ConvexHull { points } => {
                d.points = Some(
                    points.iter().map(|p| DensityOperator::from_trusted(p.clone(), s.structure.clone())).collect(),
                );
            }
        }
        d
    }
}

impl Serialize for FreeStateSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SetDescriptor::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for FreeStateSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let desc = SetDescriptor::deserialize(d)?;
        FreeStateSet::try_from(&desc).map_err(serde::de::Error::custom)
    }
}

pub fn contains(s: &FreeStateSet, rho: &DensityOperator, tol: f64) -> Result<bool> {
    s.contains(rho, tol)
}

pub fn closest_free_state(s: &FreeStateSet, rho: &DensityOperator) -> Result<(DensityOperator, f64)> {
    s.closest_free_state(rho)
}

pub fn random_free_state(s: &FreeStateSet, seed: u64) -> DensityOperator {
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
    DensityOperator::from_trusted(s.random_free_state(&mut rng), s.structure.clone())
}
