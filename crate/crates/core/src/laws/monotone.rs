//! Monotones of one theory induced by composite channels into another, and
//! the measure-and-prepare channel that makes such a monotone faithful.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::phi_plus;
use crate::channels::KrausChannel;
use crate::divergences::{rel_entropy_of_resource, DivergenceResult, FwOptions};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::qcore::eig::eigh;
use crate::qcore::matrix::{c, hermitize, trace_product_re, CMat};
use crate::qcore::state::DensityOperator;
use crate::qcore::tensor_ops::partial_trace_raw;
use crate::theories::ops::rng_check;
use crate::theories::sets::MEMBERSHIP_TOL;
use crate::theories::{FreeStateSet, LinearMinimizer, SetKind};

const ASCENT_ITERS: usize = 300;
/// Bisection stops when the bracket on the mixing parameter is this narrow.
pub const BISECTION_TOL: f64 = 1e-8;
/// Membership tolerance used while bisecting; tighter than the default so
/// that the bracket lands on the boundary itself.
const BISECTION_MEMBERSHIP_TOL: f64 = 1e-12;
/// Shift of the two prepared states away from the boundary.
pub const DELTA: f64 = 1e-3;
pub const POSTCHECK_SAMPLES: usize = 1000;
const FAMILY_CHECK_SAMPLES: usize = 20;

/// A verified measure-and-prepare channel `X ↦ Tr[(I−W)X] σ' + Tr[WX] τ'`
/// with `Λ(S₁) ⊆ S₂` and `Λ(ρ) ∉ S₂`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WitnessChannel {
    pub channel: KrausChannel,
    /// Normalised witness: `Tr Wρ < 1/2 < Tr Wμ` for every free `μ`.
    pub witness: crate::qcore::matrix::MatrixLiteral,
    /// `Tr Wρ` after normalisation.
    pub rho_weight: f64,
    /// Certified `inf_{μ∈S₁} Tr Wμ` after normalisation.
    pub free_weight: f64,
    /// Boundary mixing parameter on the segment `(1−p)σ + pτ`, before rescaling.
    pub p_star: f64,
    /// Free states checked after construction.
    pub checked: usize,
}

fn clip_box(w: &CMat) -> CMat {
    eigh(&hermitize(w)).map(|x| x.clamp(0.0, 1.0))
}

/// `max_{0≤W≤I} inf_{μ∈S} Tr Wμ − Tr Wρ` by projected supergradient ascent.
/// Returns the best witness with its certified margin and `inf` value.
fn separating_witness(rho: &CMat, set: &FreeStateSet, seed: u64) -> Result<(CMat, f64, f64)> {
    let d = rho.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Start from the complement of ρ's dominant eigenvector.
    let e = eigh(rho);
    let top = crate::qcore::matrix::outer(&e.vector(d - 1));
    let mut w = CMat::identity(d, d) - top;
    let mut best = (w.clone(), f64::NEG_INFINITY, 0.0);
    for t in 0..ASCENT_ITERS {
        let lb = set.lmo_lower_bound(&w, &mut rng)?;
        let margin = lb - trace_product_re(&w, rho);
        if margin > best.1 {
            best = (w.clone(), margin, lb);
        }
        let mu = set.lmo(&w, &mut rng)?;
        let g = mu - rho;
        w = clip_box(&(&w + g * c(1.0 / (1.0 + t as f64).sqrt(), 0.0)));
    }
    Ok(best)
}

fn segment(sigma: &CMat, tau: &CMat, p: f64) -> CMat {
    sigma * c(1.0 - p, 0.0) + tau * c(p, 0.0)
}

/// Smallest `p` with `(1−p)σ + pτ ∈ S`, given `σ ∉ S` and `τ ∈ S`. The
/// returned end of the bracket is on the member side.
pub fn boundary_parameter(set: &FreeStateSet, sigma: &CMat, tau: &CMat) -> Result<f64> {
    if set.contains_mat(sigma, BISECTION_MEMBERSHIP_TOL) {
        return Err(Error::Precondition("outer point is a member".into()));
    }
    if !set.contains_mat(tau, BISECTION_MEMBERSHIP_TOL) {
        return Err(Error::Precondition("inner point is not a member".into()));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if set.contains_mat(&segment(sigma, tau, mid), BISECTION_MEMBERSHIP_TOL) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Default outer and inner points of a full-dimensional target set.
fn default_endpoints(s2: &FreeStateSet) -> Result<(CMat, CMat)> {
    match s2.kind() {
        SetKind::SeparableTwoQubit => {
            let l = s2.structure().labels();
            let phi = phi_plus(l[0], l[1]).matrix().clone();
            let d = s2.dim();
            Ok((phi, CMat::identity(d, d) * c(1.0 / d as f64, 0.0)))
        }
        _ => Err(Error::Precondition(format!(
            "no default outer point for the {} set; supply one",
            s2.kind_name()
        ))),
    }
}

fn reject_degenerate(s2: &FreeStateSet) -> Result<()> {
    match s2.kind() {
        SetKind::Incoherent { .. } | SetKind::Real { .. } | SetKind::Singleton { .. } => {
            Err(Error::Precondition(format!("the {} set is not full-dimensional", s2.kind_name())))
        }
        SetKind::AllStates => Err(Error::Precondition("every state is free in the target theory".into())),
        _ => Ok(()),
    }
}

/// Channel from theory 1 to theory 2 that keeps free states free and makes
/// `ρ` resourceful. Two-qubit separable targets use `Φ+` and `I/4`.
pub fn witness_channel(rho: &DensityOperator, s1: &FreeStateSet, s2: &FreeStateSet) -> Result<WitnessChannel> {
    reject_degenerate(s2)?;
    let (sigma, tau) = default_endpoints(s2)?;
    witness_channel_with(rho, s1, s2, &sigma, &tau, 0)
}

/// As [`witness_channel`] with explicit outer (`σ ∉ S₂`) and inner (`τ`,
/// interior of `S₂`) points.
pub fn witness_channel_with(
    rho: &DensityOperator,
    s1: &FreeStateSet,
    s2: &FreeStateSet,
    sigma: &CMat,
    tau: &CMat,
    seed: u64,
) -> Result<WitnessChannel> {
    reject_degenerate(s2)?;
    if rho.dim() != s1.dim() || sigma.nrows() != s2.dim() || tau.nrows() != s2.dim() {
        return Err(Error::DimensionMismatch("state, sets and endpoints".into()));
    }
    if s1.contains(rho, MEMBERSHIP_TOL)? {
        return Err(Error::Precondition("state is free".into()));
    }
    let (w, margin, inf) = separating_witness(rho.matrix(), s1, seed)?;
    if margin <= 1e-9 {
        return Err(Error::Numerical(format!("no separating witness found (margin {margin:.3e})")));
    }
    // Affine normalisation: centre the gap on 1/2 and shrink into [0, I].
    let d1 = s1.dim();
    let a = trace_product_re(&w, rho.matrix());
    let q = 0.5 * (a + inf);
    let spread = eigh(&w).values.iter().map(|l| (l - q).abs()).fold(0.0, f64::max);
    let eps = 0.5 / spread;
    let id1 = CMat::identity(d1, d1);
    let wn = hermitize(&(&id1 * c(0.5, 0.0) + (&w - &id1 * c(q, 0.0)) * c(eps, 0.0)));
    let rho_weight = 0.5 + eps * (a - q);
    let free_weight = 0.5 + eps * (inf - q);

    let p_star = boundary_parameter(s2, sigma, tau)?;
    if p_star - DELTA <= 0.0 || p_star + DELTA >= 1.0 {
        return Err(Error::Numerical(format!("boundary parameter {p_star} too close to an endpoint")));
    }
    let sig = DensityOperator::new(segment(sigma, tau, p_star - DELTA), s2.structure().clone())?;
    let tau_p = DensityOperator::new(segment(sigma, tau, p_star + DELTA), s2.structure().clone())?;
    let channel = KrausChannel::measure_prepare(&[&id1 - &wn, wn.clone()], &[sig, tau_p], s1.structure().clone())?;

    // Postconditions.
    let image = hermitize(&channel.apply_mat(rho.matrix()));
    if s2.contains_mat(&image, MEMBERSHIP_TOL) {
        return Err(Error::Numerical("image of the resource state is free".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let (mut states, _) = s1.verification_states(POSTCHECK_SAMPLES, &mut rng);
    if states.len() < POSTCHECK_SAMPLES {
        states.extend((states.len()..POSTCHECK_SAMPLES).map(|_| s1.random_free_state(&mut rng)));
    }
    let bad = Execution::default().map(states.len(), |k| {
        !s2.contains_mat(&hermitize(&channel.apply_mat(&states[k])), MEMBERSHIP_TOL)
    });
    if let Some(k) = bad.iter().position(|&b| b) {
        return Err(Error::Numerical(format!("free state {k} is mapped outside the target set")));
    }
    Ok(WitnessChannel {
        channel,
        witness: crate::qcore::matrix::MatrixLiteral::from_matrix(&wn),
        rho_weight,
        free_weight,
        p_star,
        checked: states.len(),
    })
}

/// `X ↦ τ₁ ⊗ W(Tr₂ X)` on `(1, 2)`, where `W` maps party 1 into party 2.
/// RNG for both extremal composites whenever `τ₁` is free and `W(S₁) ⊆ S₂`.
pub fn lift_to_second_party(w: &KrausChannel, tau1: &DensityOperator) -> Result<KrausChannel> {
    let st1 = w.in_structure().clone();
    let st2 = w.out_structure().clone();
    if tau1.dim() != w.in_dim() {
        return Err(Error::DimensionMismatch("τ₁ must live on the channel's input party".into()));
    }
    let (d1, d2) = (w.in_dim(), w.out_dim());
    let e = eigh(tau1.matrix());
    let mut kraus = Vec::new();
    for (k, &l) in e.values.iter().enumerate() {
        if l <= 1e-14 {
            continue;
        }
        let v = e.vector(k);
        let ket = CMat::from_fn(d1, 1, |r, _| v[r] * l.sqrt());
        let prep = ket.kronecker(&CMat::identity(d2, d2));
        for kw in w.kraus() {
            for j in 0..d2 {
                let bra = CMat::from_fn(1, d2, |_, col| if col == j { c(1.0, 0.0) } else { c(0.0, 0.0) });
                let discard = CMat::identity(d1, d1).kronecker(&bra);
                kraus.push(&prep * kw * discard);
            }
        }
    }
    KrausChannel::new(kraus, st1.concat(&st2), tau1.structure().concat(&st2))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InducedReport {
    /// Largest value seen; a lower bound on the supremum up to solver gaps.
    #[serde(with = "crate::serde_ext")]
    pub value: f64,
    /// Largest certified lower bound seen.
    #[serde(with = "crate::serde_ext")]
    pub lower_bound: f64,
    /// Index of the channel achieving `value`.
    pub best_channel: usize,
    pub per_channel: Vec<DivergenceResult>,
}

/// `sup_{Λ, μ₂} D(Tr₁ Λ(ρ₁ ⊗ μ₂) ‖ S₂)` over a finite family of channels on
/// `(1, 2)` and sampled free `μ₂`. Every channel must keep `free` invariant.
pub fn induced_monotone(
    rho1: &DensityOperator,
    s1: &FreeStateSet,
    s2: &FreeStateSet,
    free: &FreeStateSet,
    family: &[KrausChannel],
    mu2_samples: usize,
    opts: &FwOptions,
) -> Result<InducedReport> {
    if family.is_empty() {
        return Err(Error::Precondition("empty channel family".into()));
    }
    let d1 = s1.dim();
    let d2 = s2.dim();
    if free.dim() != d1 * d2 {
        return Err(Error::DimensionMismatch("composite set vs local sets".into()));
    }
    for (k, ch) in family.iter().enumerate() {
        if ch.in_dim() != d1 * d2 || ch.out_dim() != d1 * d2 {
            return Err(Error::DimensionMismatch(format!("channel {k} is not on the composite space")));
        }
        let r = rng_check(ch, free, MEMBERSHIP_TOL, FAMILY_CHECK_SAMPLES, opts.seed)?;
        if !r.member {
            return Err(Error::Precondition(format!("channel {k} is not free: {}", r.summary())));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut mus = vec![s2.interior_point()];
    mus.extend((0..mu2_samples).map(|_| s2.random_free_state(&mut rng)));
    let dims = [d1, d2];
    let mut per_channel = Vec::with_capacity(family.len());
    for ch in family {
        let results = Execution::default().map(mus.len(), |i| {
            let x = rho1.matrix().kronecker(&mus[i]);
            let m = hermitize(&partial_trace_raw(&ch.apply_mat(&x), &dims, &[1]));
            let st = DensityOperator::new(m, s2.structure().clone())?;
            rel_entropy_of_resource(&st, s2, opts)
        });
        let best = results
            .into_iter()
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .max_by(|a, b| a.value.total_cmp(&b.value))
            .expect("at least one sample");
        per_channel.push(best);
    }
    let (best_channel, top) =
        per_channel.iter().enumerate().max_by(|a, b| a.1.value.total_cmp(&b.1.value)).expect("non-empty family");
    let lower_bound = per_channel.iter().map(|r| r.lower_bound).fold(f64::NEG_INFINITY, f64::max);
    Ok(InducedReport { value: top.value, lower_bound, best_channel, per_channel })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{ket_plus, pure, qubit, two_qubits};
    use crate::composite::smax;

    fn setup() -> (DensityOperator, FreeStateSet, FreeStateSet) {
        (
            pure(&ket_plus(), qubit("1")),
            FreeStateSet::incoherent(qubit("1")),
            FreeStateSet::separable_two_qubit(two_qubits("A", "B")).unwrap(),
        )
    }

    #[test]
    fn witness_channel_for_plus_state() {
        let (rho, s1, s2) = setup();
        let w = witness_channel(&rho, &s1, &s2).unwrap();
        assert!((w.p_star - 2.0 / 3.0).abs() < 1e-6, "p* = {}", w.p_star);
        assert!(w.rho_weight < 0.5 && w.free_weight > 0.5);
        assert!(w.checked >= POSTCHECK_SAMPLES);
    }

    #[test]
    fn degenerate_targets_are_rejected() {
        let (rho, s1, _) = setup();
        let real = FreeStateSet::real(two_qubits("A", "B"));
        assert!(witness_channel(&rho, &s1, &real).is_err());
        let zero = pure(&crate::catalog::ket0(), qubit("1"));
        let sep = FreeStateSet::separable_two_qubit(two_qubits("A", "B")).unwrap();
        assert!(witness_channel(&zero, &s1, &sep).is_err());
    }

    #[test]
    fn lifted_channel_is_free_and_induces_a_positive_value() {
        let (rho, s1, s2) = setup();
        let w = witness_channel(&rho, &s1, &s2).unwrap();
        let tau1 = DensityOperator::maximally_mixed(qubit("1"));
        let lifted = lift_to_second_party(&w.channel, &tau1).unwrap();
        let free = smax(vec![s1.clone(), s2.clone()]).unwrap();
        let opts = FwOptions::default();
        let r = induced_monotone(&rho, &s1, &s2, &free, std::slice::from_ref(&lifted), 2, &opts).unwrap();
        assert!(r.value > 0.0);
        // Strict positivity rests on the image being NPT.
        let img = w.channel.apply(&rho).unwrap();
        assert!(img.partial_transpose("A").unwrap().min_eigenvalue() < -1e-4);
        let zero = pure(&crate::catalog::ket0(), qubit("1"));
        let r0 = induced_monotone(&zero, &s1, &s2, &free, &[lifted], 2, &opts).unwrap();
        assert!(r0.lower_bound <= opts.gap);
    }
}
