use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use scot_core::filter::{Filter, Payload, Value};
use scot_core::scot::{build_scot, preset, preset_factors};
use scot_core::sim::{run, RoutingMode, SimConfig};
use scot_core::workload::{Generator, GeneratorConfig};

fn product(c: &mut Criterion) {
    let (af, cf) = preset_factors("fig10").unwrap();
    c.bench_function("build 70-broker overlay", |b| {
        b.iter(|| build_scot(black_box(af.clone()), black_box(cf.clone())).unwrap())
    });
}

fn matching(c: &mut Criterion) {
    let filter: Filter = "symbol = 'S42', price between 100 300, volume > 10"
        .parse()
        .unwrap();
    let other: Filter = "price >= 250, volume < 500".parse().unwrap();
    let payloads: Vec<Payload> = (0..256)
        .map(|i| {
            [
                ("symbol".to_string(), Value::Str(format!("S{}", i % 64))),
                ("price".to_string(), (i as f64 * 3.7).into()),
                ("volume".to_string(), (i as f64).into()),
            ]
            .into()
        })
        .collect();
    c.bench_function("match 256 payloads", |b| {
        b.iter(|| {
            payloads
                .iter()
                .filter(|p| filter.matches(black_box(p)))
                .count()
        })
    });
    c.bench_function("filter overlap", |b| {
        b.iter(|| black_box(&filter).overlaps(black_box(&other)).unwrap())
    });
}

fn scenario(c: &mut Criterion) {
    let topo = preset("fig3").unwrap();
    let w = Generator::new(&topo, 1).generate(&GeneratorConfig::default());
    let mut group = c.benchmark_group("simulate fig3 default workload");
    group.sample_size(20);
    for mode in [RoutingMode::Snr, RoutingMode::Idr, RoutingMode::TidStatic] {
        let cfg = SimConfig {
            routing: mode,
            ..SimConfig::default()
        };
        group.bench_function(mode.name(), |b| b.iter(|| run(&topo, &w, &cfg).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, product, matching, scenario);
criterion_main!(benches);
