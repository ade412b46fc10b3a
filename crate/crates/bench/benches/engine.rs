use cancsim_bench::engine_config;
use cancsim_core::sim::run;
use cancsim_core::{PhyFidelity, Protocol};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

fn engine(c: &mut Criterion) {
    let packets = 500;
    for fidelity in [PhyFidelity::Rate, PhyFidelity::Symbol] {
        let mut group = c.benchmark_group(format!("run/{}", fidelity.as_str()));
        group.sample_size(10);
        group.throughput(Throughput::Elements(packets));
        for p in Protocol::ALL {
            let cfg = engine_config(p, fidelity, packets);
            group.bench_with_input(BenchmarkId::from_parameter(p), &cfg, |b, cfg| {
                b.iter(|| run(cfg).unwrap())
            });
        }
        group.finish();
    }
}

criterion_group!(benches, engine);
criterion_main!(benches);
