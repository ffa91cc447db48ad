use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use ptm_core::experiments::{detection_sweep, InstanceSpec, QueryShape, SweepSpec};
use ptm_core::generators::{gen_query_lb, gen_random_metric, gen_random_ultra};
use ptm_core::repair::{farness_bounds, floyd_warshall};
use ptm_core::testers::run_tester;
use ptm_core::violations::enumerate_violations;
use ptm_core::{
    ConstantsProfile, ProfileName, QueryOracle, TestOptions, TesterKind, ViolationKind,
};

fn oracles(c: &mut Criterion) {
    let mut g = c.benchmark_group("enumerate");
    for n in [40usize, 80] {
        let m = gen_query_lb(n, 0.1, 1).unwrap().matrix;
        g.bench_with_input(BenchmarkId::new("ultra_triples", n), &m, |b, m| {
            b.iter(|| {
                enumerate_violations(black_box(m), ViolationKind::UltraTriple)
                    .unwrap()
                    .len()
            })
        });
        g.bench_with_input(BenchmarkId::new("triangles", n), &m, |b, m| {
            b.iter(|| {
                enumerate_violations(black_box(m), ViolationKind::Triangle)
                    .unwrap()
                    .len()
            })
        });
    }
    g.finish();
}

fn repair(c: &mut Criterion) {
    let m = gen_random_metric(120, 3, 20).matrix;
    c.bench_function("floyd_warshall/120", |b| {
        b.iter(|| {
            let mut d = m.as_slice().to_vec();
            floyd_warshall(&mut d, m.n());
            black_box(d)
        })
    });
    let q = gen_query_lb(60, 0.1, 2).unwrap().matrix;
    c.bench_function("farness_bounds/60", |b| {
        b.iter(|| farness_bounds(black_box(&q)).unwrap())
    });
}

fn testers(c: &mut Criterion) {
    let mut g = c.benchmark_group("tester");
    let metric = gen_random_metric(400, 5, 20).matrix;
    let ultra = gen_random_ultra(400, 5).matrix;
    for (kind, m) in [(TesterKind::Metric, &metric), (TesterKind::Ultra, &ultra)] {
        let opts = TestOptions::new(0.1, ConstantsProfile::named(ProfileName::Desk), 9);
        g.bench_function(format!("{kind:?}/400"), |b| {
            b.iter(|| {
                run_tester(kind, &mut QueryOracle::new(m), &opts)
                    .unwrap()
                    .rejected()
            })
        });
    }
    g.finish();
}

fn sweeps(c: &mut Criterion) {
    let spec = SweepSpec {
        instance: InstanceSpec::QueryLb { n: 100, eps: 0.1 },
        strategy: QueryShape::Clique,
        violation: None,
        budgets: vec![20, 60, 120],
        trials: 30,
        seed: 4,
    };
    let mut g = c.benchmark_group("sweep");
    g.sample_size(10);
    g.bench_function("query_lb/100", |b| {
        b.iter(|| detection_sweep(black_box(&spec)).unwrap())
    });
    g.finish();
}

criterion_group!(benches, oracles, repair, testers, sweeps);
criterion_main!(benches);
