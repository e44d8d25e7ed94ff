use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use scuba_core::analytics::{binomial_tail, collision_monte_carlo, p_collision};
use scuba_core::engine::{run, NullSink, Simulation};
use scuba_core::paging::build_sl_schedule;
use scuba_core::{PagingConfig, Scenario, ScubaMode, SlPagingConfig, Topology, UeIdentity};

fn paging(c: &mut Criterion) {
    let paging = PagingConfig::default();
    let id = UeIdentity::new(310_150_123_456_789, 1024).unwrap();
    let mut g = c.benchmark_group("paging");
    for t_sl_drx in [32, 1024] {
        let sl = SlPagingConfig {
            t_sl_drx,
            ..SlPagingConfig::default()
        };
        g.bench_function(format!("build_sl_schedule/{t_sl_drx}"), |b| {
            b.iter(|| build_sl_schedule(black_box(&sl), &paging, &id).unwrap())
        });
    }
    g.finish();
}

fn engine(c: &mut Criterion) {
    let mut g = c.benchmark_group("engine");
    g.sample_size(20);
    for mode in [ScubaMode::Native, ScubaMode::Sam, ScubaMode::Llm] {
        let s = Scenario {
            horizon: 100_000,
            mode,
            ..Scenario::default()
        };
        g.throughput(Throughput::Elements(s.horizon));
        g.bench_function(format!("run_100k_sf/{mode:?}"), |b| {
            b.iter(|| run(black_box(&s)).unwrap())
        });
    }
    let s = Scenario {
        n_ue: 20,
        horizon: 10_000,
        ..Scenario::default()
    };
    g.throughput(Throughput::Elements(1_000));
    g.bench_function("step_1k_sf/20_ue", |b| {
        b.iter_batched(
            || Simulation::new(s.clone()).unwrap(),
            |mut sim| {
                for _ in 0..1_000 {
                    sim.step(&mut NullSink).unwrap();
                }
                sim
            },
            BatchSize::SmallInput,
        )
    });
    g.finish();
}

fn collision(c: &mut Criterion) {
    let mut g = c.benchmark_group("collision");
    g.bench_function("binomial_tail/100", |b| {
        b.iter(|| binomial_tail(black_box(100), 0.01).unwrap())
    });
    g.bench_function("p_collision/100_random_peers", |b| {
        b.iter(|| p_collision(black_box(100), 2, 0.29, 4, 10_240, Topology::RandomPeers).unwrap())
    });
    g.sample_size(10);
    g.throughput(Throughput::Elements(100_000));
    g.bench_function("monte_carlo_100k/10_ue", |b| {
        b.iter(|| collision_monte_carlo(10, 2, 0.29, 4, 10_240, Topology::CentralDst, 100_000, 1).unwrap())
    });
    g.finish();
}

criterion_group!(benches, paging, engine, collision);
criterion_main!(benches);
