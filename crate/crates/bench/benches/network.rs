use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sobolev_bench::{exported_network, start_point};
use sobolev_core::netexport::{eval_network, eval_with_jacobian};

fn network(c: &mut Criterion) {
    let mut group = c.benchmark_group("exported-network");
    for (samples, steps) in [(1, 8), (4, 8), (16, 8)] {
        let net = exported_network(4, samples, steps);
        let x = start_point(4);
        let id = format!("M{samples}-N{steps}");
        group.bench_with_input(BenchmarkId::new("eval", &id), &net, |b, net| b.iter(|| eval_network(net, &x).unwrap()));
        group.bench_with_input(BenchmarkId::new("jacobian", &id), &net, |b, net| {
            b.iter(|| eval_with_jacobian(net, &x).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, network);
criterion_main!(benches);
