//! End-to-end acceptance checks. Each criterion prints one line and the
//! binary exits non-zero when any criterion fails.

use std::f64::consts::FRAC_PI_2;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use qrt::catalog::*;
use qrt::certify::{lfocc_ceiling, remote_certification, Preprocessing};
use qrt::channels::{is_unital, KrausChannel};
use qrt::composite::{block_marginal_channel, check_bp_axioms, fmin_element, smax, smin};
use qrt::divergences::{hypothesis_testing, rel_entropy_engine, rel_entropy_of_resource, FwOptions};
use qrt::laws::{nogo_entanglement_to_coherence, sample_rng_channels, uncorrelated_reduction, witness_channel};
use qrt::qcore::eig::trace_norm;
use qrt::qcore::matrix::{c, kron, max_abs, outer, CMat};
use qrt::qcore::random::{haar_vector, random_density, real_unit_vector};
use qrt::qcore::state::{DensityOperator, HermitianOperator};
use qrt::qcore::tensor_ops::{partial_trace_raw, partial_transpose_raw};
use qrt::theories::ops::rng_check;
use qrt::theories::samplers::{random_sio_channel, random_sio_real_protocol};
use qrt::theories::sets::MEMBERSHIP_TOL;
use qrt::composite::Verdict;
use qrt::theories::{FreeOpClass, FreeStateSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// Smallest eigenvalue through nalgebra's own symmetric solver, on the real
/// embedding `[[Re, −Im], [Im, Re]]`, so the oracle shares no code with the
/// toolkit's eigensolver.
fn oracle_min_eig(m: &CMat) -> f64 {
    let n = m.nrows();
    let big = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = m[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    big.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

fn c01_coherence_of_plus() -> Outcome {
    let t = Instant::now();
    let rho = pure(&ket_plus(), qubit("q"));
    let s = FreeStateSet::incoherent(qubit("q"));
    let closed = rel_entropy_of_resource(&rho, &s, &FwOptions::default()).map_err(|e| e.to_string())?;
    let fw = rel_entropy_engine(&rho, &s, &FwOptions::default()).map_err(|e| e.to_string())?;
    let el = t.elapsed();
    check(
        (closed.value - 1.0).abs() <= 1e-12 && (fw.value - 1.0).abs() <= 1e-3 && secs(el) < 1.0,
        format!("closed form {:.12}, Frank-Wolfe {:.6}, {:.3}s", closed.value, fw.value, secs(el)),
    )
}

fn c02_entanglement_of_phi() -> Outcome {
    let t = Instant::now();
    let s = FreeStateSet::separable_two_qubit(two_qubits("A", "B")).map_err(|e| e.to_string())?;
    let r = rel_entropy_of_resource(&phi_plus("A", "B"), &s, &FwOptions::default()).map_err(|e| e.to_string())?;
    let el = t.elapsed();
    check(
        (r.value - 1.0).abs() <= 1e-3 && r.lower_bound >= 1.0 - 1e-3 && r.upper_bound <= 1.0 + 1e-3 && secs(el) < 30.0,
        format!("value {:.6}, certified [{:.6}, {:.6}], {:.2}s", r.value, r.lower_bound, r.upper_bound, secs(el)),
    )
}

fn c03_coherence_to_entanglement() -> Outcome {
    let ch = coh_ent_channel();
    let out = ch.apply(&coh_ent_input()).map_err(|e| e.to_string())?;
    let td = out.trace_distance(&coh_ent_target()).map_err(|e| e.to_string())?;
    let (a, b) = coh_ent_locals();
    let lo = smin(vec![a.clone(), b.clone()]).map_err(|e| e.to_string())?;
    let hi = smax(vec![a, b]).map_err(|e| e.to_string())?;
    let r_lo = rng_check(&ch, &lo, MEMBERSHIP_TOL, 200, 3).map_err(|e| e.to_string())?;
    let r_hi = rng_check(&ch, &hi, MEMBERSHIP_TOL, 200, 4).map_err(|e| e.to_string())?;
    check(
        td <= 1e-10 && r_lo.member && r_hi.member,
        format!("trace distance {td:.2e}; RNG on S_min: {}; on S_max: {} (seeds 3, 4)", r_lo.summary(), r_hi.summary()),
    )
}

fn c04_entanglement_to_coherence() -> Outcome {
    let (a, b) = coh_ent_locals();
    let locals = vec![a, b];
    let chans = sample_rng_channels(&locals, 50, 7, 40).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    let mut failed = 0;
    for ch in &chans {
        let r = nogo_entanglement_to_coherence(ch, &locals, 0).map_err(|e| e.to_string())?;
        worst = worst.max(r.basis_offdiag).max(r.direct_offdiag);
        if !r.incoherent || !r.exhaustive {
            failed += 1;
        }
    }
    check(
        chans.len() == 50 && failed == 0 && worst <= 1e-9,
        format!("{} channels (seed 7), largest off-diagonal {worst:.2e}, {failed} failures", chans.len()),
    )
}

fn c05_rng_non_monotone() -> Outcome {
    let q = qubit("q");
    let mixed = DensityOperator::maximally_mixed(q.clone());
    let zero = pure(&ket0(), q.clone());
    let small = FreeStateSet::singleton(&mixed);
    let big = FreeStateSet::convex_hull(&[mixed.clone(), zero.clone()]).map_err(|e| e.to_string())?;
    let x = pauli_x_channel("q");
    let x_small = rng_check(&x, &small, MEMBERSHIP_TOL, 10, 0).map_err(|e| e.to_string())?.member;
    let x_big = rng_check(&x, &big, MEMBERSHIP_TOL, 10, 0).map_err(|e| e.to_string())?.member;
    let prep = prepare_pure(&ket1(), q.clone());
    let all = FreeStateSet::all_states(q.clone());
    let p_all = rng_check(&prep, &all, MEMBERSHIP_TOL, 50, 0).map_err(|e| e.to_string())?.member;
    let p_zero = rng_check(&prep, &FreeStateSet::singleton(&zero), MEMBERSHIP_TOL, 10, 0).map_err(|e| e.to_string())?.member;
    check(
        x_small && !x_big && p_all && !p_zero,
        format!("X on {{I/2}}: {x_small}, on {{I/2,|0><0|}}: {x_big}; prepare |1> on all states: {p_all}, on {{|0><0|}}: {p_zero}"),
    )
}

fn c06_no_fmax() -> Outcome {
    let ch = no_fmax_channel().map_err(|e| e.to_string())?;
    let half = CMat::identity(2, 2) * c(0.5, 0.0);
    let m = block_marginal_channel(&ch, &(0..1), &[None, Some(half.clone())]).map_err(|e| e.to_string())?;
    let dist = trace_norm(&(m.apply_mat(&half) - &half));
    let unital = is_unital(&m, 1e-9);
    check((dist - 1.0).abs() <= 1e-10 && !unital, format!("||marginal(I/2) - I/2||_1 = {dist:.12}, unital: {unital}"))
}

fn c07_sandwich() -> Outcome {
    let locals = vec![FreeStateSet::incoherent(qubit("A")), FreeStateSet::incoherent(qubit("B"))];
    let lo = smin(locals.clone()).map_err(|e| e.to_string())?;
    let hi = smax(locals).map_err(|e| e.to_string())?;
    let opts = FwOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(70);
    let mut worst: f64 = f64::NEG_INFINITY;
    for _ in 0..100 {
        let rho = DensityOperator::new(random_density(4, &mut rng), two_qubits("A", "B")).map_err(|e| e.to_string())?;
        let a = rel_entropy_of_resource(&rho, &lo, &opts).map_err(|e| e.to_string())?;
        let b = rel_entropy_of_resource(&rho, &hi, &opts).map_err(|e| e.to_string())?;
        worst = worst.max(b.lower_bound - a.upper_bound);
    }
    let mut outside = 0;
    for _ in 0..50 {
        let terms: Vec<Vec<KrausChannel>> = (0..2)
            .map(|_| {
                vec![
                    random_sio_channel(qubit("A"), 2, &mut rng).unwrap(),
                    random_sio_channel(qubit("B"), 2, &mut rng).unwrap(),
                ]
            })
            .collect();
        let w: f64 = rng.random();
        let ch = fmin_element(&terms, &[w, 1.0 - w]).map_err(|e| e.to_string())?;
        for _ in 0..4 {
            let mu = lo.random_free_state(&mut rng);
            if !hi.contains_mat(&ch.apply_mat(&mu), MEMBERSHIP_TOL) {
                outside += 1;
            }
        }
    }
    check(
        worst <= 0.0 && outside == 0,
        format!("max certified violation {worst:.2e} over 100 states; {outside}/200 F_min images outside S_max (seed 70)"),
    )
}

fn c08_uncorrelated() -> Outcome {
    let (a, b) = coh_ent_locals();
    let locals = vec![a.clone(), b.clone()];
    let opts = FwOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(80);
    let mut worst_split: f64 = 0.0;
    let mut worst_local: f64 = 0.0;
    let mut inconsistent = 0;
    for _ in 0..50 {
        let r1 = random_density(2, &mut rng);
        let mu = b.random_free_state(&mut rng);
        let rho = DensityOperator::new(kron(&r1, &mu), coh_ent_structure()).map_err(|e| e.to_string())?;
        let r = uncorrelated_reduction(&rho, &locals, 0, &opts).map_err(|e| e.to_string())?;
        if !r.consistent {
            inconsistent += 1;
        }
        worst_split = worst_split.max((r.smin.value - r.smax.value).abs());
        worst_local = worst_local.max((r.smin.value - r.local.value).abs()).max((r.smax.value - r.local.value).abs());
    }
    check(
        inconsistent == 0 && worst_local <= 1e-3,
        format!("max |S_min - S_max| {worst_split:.2e}, max deviation from local {worst_local:.2e}, {inconsistent} outside gaps (seed 80)"),
    )
}

fn c09_assisted_identity() -> Outcome {
    let set = smin(vec![FreeStateSet::all_states(qubit("A")), FreeStateSet::incoherent(qubit("B"))])
        .map_err(|e| e.to_string())?;
    let opts = FwOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(90);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let v = haar_vector(4, &mut rng);
        let psi = outer(&v);
        let rho_b = partial_trace_raw(&psi, &[2, 2], &[1]);
        let oracle: f64 = (0..2).map(|i| rho_b[(i, i)].re).filter(|&p| p > 0.0).map(|p| -p * p.log2()).sum();
        let rho = DensityOperator::new(psi, two_qubits("A", "B")).map_err(|e| e.to_string())?;
        let r = rel_entropy_engine(&rho, &set, &opts).map_err(|e| e.to_string())?;
        worst = worst.max((r.value - oracle).abs());
    }
    check(worst <= 1e-3, format!("max |D - S(diag psi_B)| = {worst:.2e} over 50 states (seed 90)"))
}

fn c10_bp_violation() -> Outcome {
    let (family, probes) = bp_violation_family().map_err(|e| e.to_string())?;
    let r = check_bp_axioms(&family, &probes, 20, 100).map_err(|e| e.to_string())?;
    let tc = &r.axioms["tensor_closure"];
    let phi = phi_plus("1", "2").matrix().clone();
    let want = kron(&phi, &phi);
    let witness_ok = tc
        .counterexample
        .as_ref()
        .and_then(|cx| cx.state.as_ref())
        .and_then(|s| s.to_matrix().ok())
        .is_some_and(|m| max_abs(&(m - &want)) <= 1e-12);
    check(
        tc.verdict == Verdict::Fail && witness_ok,
        format!("tensor closure {:?}, witness is Phi+ (x) Phi+: {witness_ok}; failed axioms {:?}", tc.verdict, r.failed()),
    )
}

fn c11_lfocc_ceiling() -> Outcome {
    let st = two_qubits("A", "B");
    let sa = FreeStateSet::incoherent(qubit("A"));
    let aux = DensityOperator::maximally_mixed(qubit("B"));
    let mut rng = ChaCha8Rng::seed_from_u64(110);
    let mut worst: f64 = 0.0;
    let mut over = 0;
    for i in 0..500 {
        let rounds = rng.random_range(1..=3);
        let p = random_sio_real_protocol(&st, "A", "B", rounds, &mut rng).map_err(|e| e.to_string())?;
        let rho = if i % 2 == 0 {
            pure(&ket_plus_y(), qubit("A"))
        } else {
            DensityOperator::new(random_density(2, &mut rng), qubit("A")).map_err(|e| e.to_string())?
        };
        let v = real_unit_vector(2, &mut rng);
        let test = HermitianOperator::new(outer(&v) * c(rng.random::<f64>(), 0.0)).map_err(|e| e.to_string())?;
        let eps = [0.1, 0.25, 0.5][i % 3];
        let r = lfocc_ceiling(&rho, &sa, &p, ("A", "B"), &aux, &test, eps, 1e-6).map_err(|e| e.to_string())?;
        worst = worst.max(r.effective_offdiag);
        if !r.report.within_ceiling {
            over += 1;
        }
    }
    check(
        worst <= 1e-10 && over == 0,
        format!("max effective off-diagonal {worst:.2e}, {over}/500 above the diagonal ceiling (seed 110)"),
    )
}

fn c12_case_study() -> Outcome {
    let rho = pure(&ket_plus_y(), qubit("A"));
    let s = FreeStateSet::incoherent(qubit("A"));
    let real = FreeOpClass::RealOps { basis: None };
    let send = |u: CMat| -> Result<Preprocessing, String> {
        let ch = KrausChannel::unitary(u, qubit("A"))
            .and_then(|ch| ch.with_structures(qubit("A"), qubit("B")))
            .map_err(|e| e.to_string())?;
        Ok(Preprocessing::send(ch))
    };
    let rotated = remote_certification(&rho, &s, &real, &[send(rz(FRAC_PI_2))?], 0.5, 1e-6).map_err(|e| e.to_string())?;
    let p = rotated.achiever.test.to_matrix().map_err(|e| e.to_string())?;
    let expected = (CMat::identity(2, 2) - pauli_x()) * c(0.5, 0.0);
    let ceiling = hypothesis_testing(&rho, &s, 0.5, 1e-6).map_err(|e| e.to_string())?;
    let mut floors_ok = true;
    let mut worst: f64 = 0.0;
    for eps in [0.1, 0.25, 0.5] {
        let plain = remote_certification(&rho, &s, &real, &[send(CMat::identity(2, 2))?], eps, 1e-6).map_err(|e| e.to_string())?;
        worst = worst.max((plain.value - plain.floor).abs());
        floors_ok &= (plain.value - plain.floor).abs() <= 1e-6;
    }
    check(
        rotated.value.is_infinite()
            && ceiling.value.is_infinite()
            && (rotated.alpha - 0.5).abs() <= 1e-6
            && rotated.beta <= 1e-12
            && max_abs(&(p - expected)) <= 1e-6
            && floors_ok,
        format!(
            "rotated: value {}, alpha {:.6}, beta {:.1e}, ceiling {}; unrotated max distance to floor {worst:.1e}",
            rotated.value, rotated.alpha, rotated.beta, ceiling.value
        ),
    )
}

fn c13_witness_channel() -> Outcome {
    let rho = pure(&ket_plus(), qubit("1"));
    let s1 = FreeStateSet::incoherent(qubit("1"));
    let s2 = FreeStateSet::separable_two_qubit(two_qubits("A", "B")).map_err(|e| e.to_string())?;
    let w = witness_channel(&rho, &s1, &s2).map_err(|e| e.to_string())?;
    // Oracle: bisect the PPT boundary on the segment with an independent eigensolver.
    let phi = phi_plus("A", "B").matrix().clone();
    let quarter = CMat::identity(4, 4) * c(0.25, 0.0);
    let ppt = |m: &CMat| oracle_min_eig(&partial_transpose_raw(m, &[2, 2], 1));
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if ppt(&(&phi * c(1.0 - mid, 0.0) + &quarter * c(mid, 0.0))) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(130);
    let mut npt_free = 0;
    for _ in 0..1000 {
        let mu = s1.random_free_state(&mut rng);
        if ppt(&w.channel.apply_mat(&mu)) < -1e-12 {
            npt_free += 1;
        }
    }
    let img = ppt(&w.channel.apply_mat(rho.matrix()));
    check(
        (w.p_star - 2.0 / 3.0).abs() <= 1e-6 && (w.p_star - hi).abs() <= 1e-6 && npt_free == 0 && img < 0.0,
        format!(
            "p* {:.9} (oracle {hi:.9}); {npt_free}/1000 free images NPT (seed 130); min eigenvalue of PT of image {img:.3e}",
            w.p_star
        ),
    )
}

fn c14_hypothesis_floor() -> Outcome {
    let sets = [
        FreeStateSet::incoherent(qubit("q")),
        FreeStateSet::real(TensorStructure::single("t", 3)),
        FreeStateSet::separable_two_qubit(two_qubits("A", "B")).map_err(|e| e.to_string())?,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(140);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let s = &sets[k % sets.len()];
        let rho = DensityOperator::new(s.random_free_state(&mut rng), s.structure().clone()).map_err(|e| e.to_string())?;
        for eps in [0.1, 0.25, 0.5] {
            let r = hypothesis_testing(&rho, s, eps, 1e-6).map_err(|e| e.to_string())?;
            worst = worst.max((r.value - (-(1.0 - eps).log2())).abs());
        }
    }
    check(worst <= 1e-4, format!("max |D_H - floor| = {worst:.2e} over 20 states x 3 budgets (seed 140)"))
}

use qrt::qcore::structure::TensorStructure;

fn main() {
    let criteria: [(&str, fn() -> Outcome); 14] = [
        ("coherence of |+>", c01_coherence_of_plus),
        ("entanglement of Phi+", c02_entanglement_of_phi),
        ("coherence to entanglement", c03_coherence_to_entanglement),
        ("entanglement to coherence no-go", c04_entanglement_to_coherence),
        ("RNG is not monotone in the free set", c05_rng_non_monotone),
        ("no maximal free operations", c06_no_fmax),
        ("sandwich property", c07_sandwich),
        ("uncorrelated reduction", c08_uncorrelated),
        ("assisted distillation identity", c09_assisted_identity),
        ("multi-copy axiom violation", c10_bp_violation),
        ("local-protocol certification ceiling", c11_lfocc_ceiling),
        ("certification case study", c12_case_study),
        ("witness channel", c13_witness_channel),
        ("hypothesis-testing floor", c14_hypothesis_floor),
    ];
    // Optional criterion numbers on the command line select a subset.
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let start = Instant::now();
    let mut failed = 0;
    let mut ran = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(k + 1)) {
            continue;
        }
        ran += 1;
        let t = Instant::now();
        let out = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let (tag, detail) = match out {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("acceptance {:02} {tag} {name}: {detail} [{:.2}s]", k + 1, secs(t.elapsed()));
    }
    println!("acceptance: {} of {} passed in {:.1}s", ran - failed, ran, secs(start.elapsed()));
    if failed > 0 {
        std::process::exit(1);
    }
}
