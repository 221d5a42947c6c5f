//! Sequential against rayon-parallel execution of the batch workloads.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qrt::catalog::{coh_ent_channel, coh_ent_locals};
use qrt::composite::{check_axioms, smax, AxiomOptions, CandidateOps, LocalTheory};
use qrt::divergences::{rel_entropy_engine, FwOptions};
use qrt::exec::Execution;
use qrt::qcore::random::random_density;
use qrt::qcore::state::DensityOperator;
use qrt::qcore::structure::TensorStructure;
use qrt::theories::{FreeOpClass, FreeStateSet};

const MODES: [Execution; 2] = [Execution::Sequential, Execution::Parallel];

fn divergence_batch(c: &mut Criterion) {
    let st = TensorStructure::from_pairs(&[("A", 2), ("B", 2)]).unwrap();
    let set = smax(vec![
        FreeStateSet::incoherent(TensorStructure::single("A", 2)),
        FreeStateSet::incoherent(TensorStructure::single("B", 2)),
    ])
    .unwrap();
    let opts = FwOptions::default();
    let mut g = c.benchmark_group("rel_entropy_batch_32");
    g.sample_size(10);
    for mode in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &mode, |b, &mode| {
            b.iter(|| {
                mode.map_seeded(5, 32, |_, rng| {
                    let rho = DensityOperator::new(random_density(4, rng), st.clone()).unwrap();
                    rel_entropy_engine(&rho, &set, &opts).unwrap().value
                })
            })
        });
    }
    g.finish();
}

fn axiom_check(c: &mut Criterion) {
    let (a, b) = coh_ent_locals();
    let locals = vec![
        LocalTheory::new(a.clone(), FreeOpClass::Sio { basis: None }),
        LocalTheory::new(b.clone(), FreeOpClass::Rng(Box::new(b.clone()))),
    ];
    let states = smax(vec![a, b]).unwrap();
    let ops = CandidateOps { class: None, channels: vec![coh_ent_channel()] };
    let mut g = c.benchmark_group("composite_axioms");
    g.sample_size(10);
    for mode in MODES {
        let opts = AxiomOptions { state_samples: 100, execution: mode, ..AxiomOptions::default() };
        g.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &opts, |b, opts| {
            b.iter(|| check_axioms(&states, &ops, &locals, opts).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, divergence_batch, axiom_check);
criterion_main!(benches);
