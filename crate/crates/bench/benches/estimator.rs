use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use graphmean::dimselect::zg_elbow;
use graphmean::models::{sample_iem_graph, sample_memberships, sbm_probability_matrix};
use graphmean::permtest::{uniform_k_flip, FlipOptions, LabelAssignment, SpatialAdjacency};
use graphmean::spectral::{eig_sym, lowrank};
use graphmean::{estimate_phat, fixtures, rng, DimSelectMethod, GraphBatch, ProbabilityMatrix};

fn two_block_mean(n: usize) -> ProbabilityMatrix {
    let params = fixtures::two_block();
    let mut g = rng::seeded(1);
    let tau = sample_memberships(params.rho(), n, &mut g).unwrap();
    sbm_probability_matrix(&params, &tau).unwrap()
}

fn batch(n: usize, m: usize) -> GraphBatch {
    let p = two_block_mean(n);
    let mut g = rng::seeded(2);
    GraphBatch::new((0..m).map(|_| sample_iem_graph(&p, &mut g)).collect()).unwrap()
}

fn bench_lowrank(c: &mut Criterion) {
    let mut group = c.benchmark_group("lowrank");
    for n in [100, 200, 400] {
        let a = two_block_mean(n).into_data();
        group.bench_with_input(BenchmarkId::from_parameter(n), &a, |b, a| b.iter(|| lowrank(black_box(a), 2).unwrap()));
    }
    group.finish();
}

fn bench_estimate(c: &mut Criterion) {
    let mut group = c.benchmark_group("estimate_phat");
    group.sample_size(20);
    for n in [100, 200] {
        let batch = batch(n, 10);
        group.bench_with_input(BenchmarkId::new("zg3", n), &batch, |b, batch| {
            b.iter(|| estimate_phat(black_box(batch), DimSelectMethod::Zg(3)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("fixed2", n), &batch, |b, batch| {
            b.iter(|| estimate_phat(black_box(batch), DimSelectMethod::Fixed(2)).unwrap())
        });
    }
    group.finish();
}

fn bench_zg(c: &mut Criterion) {
    let a = batch(400, 5);
    let mean = graphmean::graph::sample_mean(&a).unwrap();
    let values = eig_sym(mean.data()).unwrap().values.to_vec();
    c.bench_function("zg_elbow/400", |b| b.iter(|| zg_elbow(black_box(&values), 3).unwrap()));
}

fn bench_flips(c: &mut Criterion) {
    let side = 16;
    let mut edges = Vec::new();
    for r in 0..side {
        for col in 0..side {
            let v = r * side + col;
            if col + 1 < side {
                edges.push((v, v + 1));
            }
            if r + 1 < side {
                edges.push((v, v + side));
            }
        }
    }
    let s = SpatialAdjacency::from_edges(side * side, &edges).unwrap();
    let labels = LabelAssignment::from_indices((0..side * side).map(|v| usize::from(v % side >= side / 2)).collect()).unwrap();
    let mut group = c.benchmark_group("k_flip");
    for (name, contiguity) in [("contiguous", true), ("free", false)] {
        let options = FlipOptions { contiguity, ..FlipOptions::default() };
        let mut g = rng::seeded(3);
        group.bench_function(name, |b| b.iter(|| uniform_k_flip(&labels, &s, 10, &options, &mut g).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, bench_lowrank, bench_estimate, bench_zg, bench_flips);
criterion_main!(benches);
