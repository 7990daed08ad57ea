use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use minmax_lab::harness::{preset, train, ExperimentConfig, Preset, StopRule};
use minmax_lab::par;
use std::hint::black_box;

fn short_runs(n: u64) -> Vec<ExperimentConfig> {
    (0..n)
        .map(|seed| {
            let mut c = preset(Preset::Nsgda);
            c.seed = seed;
            c.stop = StopRule::FixedBudget { t1: 200 };
            c.metric_stride = 50;
            c
        })
        .collect()
}

fn sweep_cells(c: &mut Criterion) {
    let cells = short_runs(8);
    let mut group = c.benchmark_group("sweep_cells");
    group.sample_size(10);
    group.bench_with_input(
        BenchmarkId::new("parallel", cells.len()),
        &cells,
        |b, cells| {
            b.iter(|| {
                par::map(black_box(cells), |c| {
                    train(c).unwrap().final_row().grad_norm
                })
            })
        },
    );
    group.bench_with_input(
        BenchmarkId::new("serial", cells.len()),
        &cells,
        |b, cells| {
            b.iter(|| {
                par::map_serial(black_box(cells), |c| {
                    train(c).unwrap().final_row().grad_norm
                })
            })
        },
    );
    group.finish();
}

criterion_group!(benches, sweep_cells);
criterion_main!(benches);
