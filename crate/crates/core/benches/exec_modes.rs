use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use chaos_sep::dynamics::detect_periods;
use chaos_sep::mlp::{loss_and_grad, training_grid, MlpModel};
use chaos_sep::pl::{grid_l1, self_compose, DEFAULT_PIECE_BUDGET};
use chaos_sep::separation::hard_family;
use chaos_sep::Exec;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn bench_grid_l1(c: &mut Criterion) {
    let f = hard_family(3).unwrap();
    let h = self_compose(&f, 16, DEFAULT_PIECE_BUDGET).unwrap();
    let mut group = c.benchmark_group("grid_l1");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| grid_l1(|z| h.eval(z).unwrap(), |z| z * 0.5, -1.0, 1.0, 1 << 16, black_box(exec)))
        });
    }
    group.finish();
}

fn bench_loss_and_grad(c: &mut Criterion) {
    let m = MlpModel::init(3, 20, 0).unwrap();
    let xs = training_grid(4096);
    let ys: Vec<f64> = xs.iter().map(|x| x.abs()).collect();
    let mut group = c.benchmark_group("loss_and_grad");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| loss_and_grad(&m, &xs, &ys, 256, black_box(exec)))
        });
    }
    group.finish();
}

fn bench_detect_periods(c: &mut Criterion) {
    let f = hard_family(5).unwrap();
    let mut group = c.benchmark_group("detect_periods");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| detect_periods(&f, 9, DEFAULT_PIECE_BUDGET, black_box(exec)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_grid_l1, bench_loss_and_grad, bench_detect_periods);
criterion_main!(benches);
