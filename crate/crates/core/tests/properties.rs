//! Randomised invariants checked against closed forms computed here.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qrt::catalog::{ket_plus_y, pure, qubit, two_qubits};
use qrt::certify::{floor, lfocc_ceiling};
use qrt::channels::KrausChannel;
use qrt::composite::{check_sandwich, smax, smin};
use qrt::divergences::{hypothesis_testing, rel_entropy_engine, FwOptions};
use qrt::laws::{induced_monotone, witness_channel};
use qrt::qcore::entropy::{relative_entropy, shannon, von_neumann_entropy};
use qrt::qcore::matrix::{c, from_real_rows, outer, CMat};
use qrt::qcore::random::{random_density, real_unit_vector};
use qrt::qcore::state::{DensityOperator, HermitianOperator};
use qrt::qcore::structure::TensorStructure;
use qrt::theories::samplers::{random_channel, random_sio_channel, random_sio_real_protocol};
use qrt::theories::sets::MEMBERSHIP_TOL;
use qrt::theories::FreeStateSet;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn state(d: usize, r: &mut ChaCha8Rng) -> DensityOperator {
    DensityOperator::new(random_density(d, r), TensorStructure::single("q", d)).unwrap()
}

/// `S(Δρ) − S(ρ)`: relative entropy of coherence in closed form.
fn coherence(rho: &DensityOperator) -> f64 {
    let p: Vec<f64> = (0..rho.dim()).map(|i| rho.matrix()[(i, i)].re).collect();
    shannon(&p) - von_neumann_entropy(rho)
}

fn swap() -> CMat {
    from_real_rows(&[&[1., 0., 0., 0.], &[0., 0., 1., 0.], &[0., 1., 0., 0.], &[0., 0., 0., 1.]])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fidelity_and_trace_distance_bound_each_other(seed in any::<u64>(), d in 2usize..5) {
        let mut r = rng(seed);
        let (a, b) = (state(d, &mut r), state(d, &mut r));
        let f = a.fidelity(&b).unwrap();
        prop_assert!((f - b.fidelity(&a).unwrap()).abs() < 1e-8);
        prop_assert!((-1e-12..=1.0 + 1e-9).contains(&f));
        let t = 0.5 * a.trace_distance(&b).unwrap();
        prop_assert!(1.0 - f.sqrt() <= t + 1e-8);
        prop_assert!(t <= (1.0 - f).max(0.0).sqrt() + 1e-8);
        prop_assert!((a.fidelity(&a).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn channels_contract_relative_entropy(seed in any::<u64>(), d in 2usize..4) {
        let mut r = rng(seed);
        let (rho, sigma) = (state(d, &mut r), state(d, &mut r));
        let ch = random_channel(TensorStructure::single("q", d), 3, &mut r).unwrap();
        let before = relative_entropy(&rho, &sigma).unwrap();
        let after = relative_entropy(&ch.apply(&rho).unwrap(), &ch.apply(&sigma).unwrap()).unwrap();
        prop_assert!(before >= -1e-10);
        prop_assert!(after <= before + 1e-8, "{after} > {before}");
    }

    #[test]
    fn strictly_incoherent_channels_do_not_create_coherence(seed in any::<u64>(), d in 2usize..5) {
        let mut r = rng(seed);
        let rho = state(d, &mut r);
        let ch = random_sio_channel(TensorStructure::single("q", d), 3, &mut r).unwrap();
        let out = ch.apply(&rho).unwrap();
        prop_assert!(coherence(&out) <= coherence(&rho) + 1e-9);
        let free = FreeStateSet::incoherent(TensorStructure::single("q", d));
        prop_assert!(free.contains(&ch.apply(&rho.dephase()).unwrap(), MEMBERSHIP_TOL).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn frank_wolfe_brackets_the_closed_form_coherence(seed in any::<u64>(), d in 2usize..4) {
        let mut r = rng(seed);
        let rho = state(d, &mut r);
        let set = FreeStateSet::incoherent(TensorStructure::single("q", d));
        let opts = FwOptions { seed, ..FwOptions::default() };
        let res = rel_entropy_engine(&rho, &set, &opts).unwrap();
        let exact = coherence(&rho);
        prop_assert!(res.converged);
        prop_assert!(res.lower_bound <= exact + 1e-8, "lower {} above {exact}", res.lower_bound);
        prop_assert!(res.upper_bound >= exact - 1e-8, "upper {} below {exact}", res.upper_bound);
        prop_assert!(res.lower_bound <= res.value + 1e-12 && res.value <= res.upper_bound + 1e-12);
        prop_assert!((res.value - exact).abs() <= opts.gap + 1e-8);
    }

    #[test]
    fn composites_are_sandwiched(seed in any::<u64>()) {
        let locals = vec![FreeStateSet::incoherent(qubit("A")), FreeStateSet::real(qubit("B"))];
        let lo = smin(locals.clone()).unwrap();
        let hi = smax(locals.clone()).unwrap();
        let mut r = rng(seed);
        for _ in 0..10 {
            let m = lo.random_free_state(&mut r);
            prop_assert!(hi.contains_mat(&m, MEMBERSHIP_TOL));
        }
        prop_assert!(check_sandwich(&lo, &locals, 20, seed).unwrap().holds);
        prop_assert!(check_sandwich(&hi, &locals, 20, seed).unwrap().holds);
    }

    #[test]
    fn hypothesis_testing_grows_with_the_budget(seed in any::<u64>(), e1 in 0.05f64..0.45, step in 0.05f64..0.45) {
        let mut r = rng(seed);
        let rho = DensityOperator::new(random_density(2, &mut r), qubit("q")).unwrap();
        let set = FreeStateSet::incoherent(qubit("q"));
        let e2 = e1 + step;
        let tol = 1e-6;
        let lo = hypothesis_testing(&rho, &set, e1, tol).unwrap();
        let hi = hypothesis_testing(&rho, &set, e2, tol).unwrap();
        prop_assert!(lo.value >= floor(e1) - tol);
        prop_assert!(hi.value >= floor(e2) - tol);
        prop_assert!(lo.lower_bound <= hi.upper_bound + tol, "{} > {}", lo.lower_bound, hi.upper_bound);
    }

    #[test]
    fn local_protocols_stay_under_the_diagonal_ceiling(seed in any::<u64>(), rounds in 1usize..4, eps in 0.05f64..0.6) {
        let mut r = rng(seed);
        let st = two_qubits("A", "B");
        let p = random_sio_real_protocol(&st, "A", "B", rounds, &mut r).unwrap();
        let rho = if r.random() { pure(&ket_plus_y(), qubit("A")) } else { state(2, &mut r).relabel(&["A"]).unwrap() };
        let v = real_unit_vector(2, &mut r);
        let test = HermitianOperator::new(outer(&v) * c(r.random::<f64>(), 0.0)).unwrap();
        let aux = DensityOperator::maximally_mixed(qubit("B"));
        let sa = FreeStateSet::incoherent(qubit("A"));
        let rep = lfocc_ceiling(&rho, &sa, &p, ("A", "B"), &aux, &test, eps, 1e-6).unwrap();
        prop_assert!(rep.effective_offdiag <= 1e-10);
        prop_assert!(rep.report.alpha <= eps + 1e-9);
        prop_assert!(rep.report.within_ceiling, "value {} ceiling {}", rep.report.value, rep.report.ceiling.value);
    }

    #[test]
    fn witness_channels_keep_free_states_free(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut rho = state(2, &mut r).relabel(&["A"]).unwrap();
        // Push the state away from the incoherent set so a witness exists.
        let off = rho.matrix()[(0, 1)];
        if off.norm() < 0.05 {
            rho = pure(&ket_plus_y(), qubit("A"));
        }
        let s1 = FreeStateSet::incoherent(qubit("A"));
        let s2 = FreeStateSet::separable_two_qubit(two_qubits("B1", "B2")).unwrap();
        let w = witness_channel(&rho, &s1, &s2).unwrap();
        prop_assert!(w.rho_weight < 0.5 && 0.5 < w.free_weight);
        let image = w.channel.apply(&rho).unwrap();
        prop_assert!(!s2.contains(&image, MEMBERSHIP_TOL).unwrap());
        prop_assert!(image.partial_transpose("B2").unwrap().min_eigenvalue() < 0.0);
        for _ in 0..20 {
            let mu = DensityOperator::new(s1.random_free_state(&mut r), qubit("A")).unwrap();
            prop_assert!(s2.contains(&w.channel.apply(&mu).unwrap(), MEMBERSHIP_TOL).unwrap());
        }
    }

    #[test]
    fn induced_monotone_reaches_the_local_value_and_vanishes_on_free_states(seed in any::<u64>()) {
        let mut r = rng(seed);
        let s1 = FreeStateSet::incoherent(qubit("A"));
        let s2 = FreeStateSet::incoherent(qubit("B"));
        let free = smax(vec![s1.clone(), s2.clone()]).unwrap();
        let st = two_qubits("A", "B");
        let family = vec![KrausChannel::identity(st.clone()), KrausChannel::unitary(swap(), st).unwrap()];
        let opts = FwOptions { seed, ..FwOptions::default() };
        let rho = state(2, &mut r).relabel(&["A"]).unwrap();
        let m = induced_monotone(&rho, &s1, &s2, &free, &family, 2, &opts).unwrap();
        // The swap hands A's state to B unchanged.
        prop_assert!(m.value >= coherence(&rho) - opts.gap - 1e-8);
        if coherence(&rho) > 1e-6 {
            prop_assert_eq!(m.best_channel, 1);
        }
        let zero = induced_monotone(&rho.dephase(), &s1, &s2, &free, &family, 2, &opts).unwrap();
        prop_assert!(zero.value <= opts.gap + 1e-8);
    }
}
