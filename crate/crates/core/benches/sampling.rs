use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use fps_core::detdeg::{counterexample_pencil, degree_at_level_with, Sampling};
use fps_core::geometry::{sample_outside, separate};
use fps_core::numkernel::{random_unitary, rng_from_seed, DEFAULT_RTOL};
use fps_core::par::Exec;
use fps_core::pencil::fixtures;
use fps_core::structure::{decompose_tuple, random_irreducible};

const MODES: [(&str, Exec); 2] = [
    ("sequential", Exec::Sequential),
    ("parallel", Exec::Parallel),
];

fn degree(c: &mut Criterion) {
    let l = counterexample_pencil();
    let mut group = c.benchmark_group("degree_at_level");
    for k in [2, 4] {
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, k), &k, |b, &k| {
                b.iter(|| degree_at_level_with(&l, k, 20, DEFAULT_RTOL, Sampling::Generic, 7, exec))
            });
        }
    }
    group.finish();
}

fn decompose(c: &mut Criterion) {
    let mut rng = rng_from_seed(3);
    let b1 = random_irreducible(2, 3, &mut rng);
    let b2 = random_irreducible(2, 2, &mut rng);
    let t = b1
        .direct_sum(&b1)
        .unwrap()
        .direct_sum(&b2)
        .unwrap()
        .direct_sum(&b2)
        .unwrap();
    let t = t.compress(&random_unitary(t.level(), &mut rng)).unwrap();
    let mut group = c.benchmark_group("decompose");
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| decompose_tuple(black_box(&t), 5, exec).unwrap())
        });
    }
    group.finish();
}

fn soundness(c: &mut Criterion) {
    let l = fixtures::cube();
    let y = sample_outside(&l, 3, &mut rng_from_seed(9)).unwrap();
    let cert = separate(&l, &y, None).unwrap();
    let mut group = c.benchmark_group("separation_soundness");
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| cert.soundness(&l, 200, 11, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, degree, decompose, soundness);
criterion_main!(benches);
