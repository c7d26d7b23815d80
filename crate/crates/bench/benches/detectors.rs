use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use ftn_soav::baselines::{linf_detect_parts, ml_oracle_parts, LinfConfig, MlConfig};
use ftn_soav::model::{sample_real_matrix, sample_symbols, snr_to_n0, transmit};
use ftn_soav::soav::{fista_detect_batch, fista_detect_parts, prox_soav};
use ftn_soav::{Epsilon, Modulation, SoavConfig};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn instance(n: usize, m: usize, snr_db: f64, seed: u64) -> (DMatrix<f64>, DVector<f64>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = sample_real_matrix(Modulation::Qpsk, n, m, &mut rng).unwrap();
    let x = sample_symbols(h.ncols(), &mut rng).unwrap();
    let n0 = snr_to_n0(snr_db, n, m);
    let y = transmit(&h, &x, n0, &mut rng).unwrap();
    (h, y, n0)
}

fn solvers(c: &mut Criterion) {
    let (h, y, n0) = instance(150, 100, 10.0, 1);
    let soav = SoavConfig::default();
    let linf = LinfConfig::default();
    let eps = Epsilon::Discrepancy.resolve_for(h.nrows(), n0);

    let mut g = c.benchmark_group("n150_m100");
    g.sample_size(20);
    g.bench_function("soav", |b| b.iter(|| fista_detect_parts(black_box(&h), black_box(&y), &soav)));
    g.bench_function("linf", |b| b.iter(|| linf_detect_parts(black_box(&h), black_box(&y), eps, &linf)));
    let ys = DMatrix::from_fn(h.nrows(), 32, |i, j| y[i] * if j % 2 == 0 { 1.0 } else { -1.0 });
    g.bench_function("soav_batch32", |b| b.iter(|| fista_detect_batch(black_box(&h), black_box(&ys), &soav)));
    g.finish();

    let (h, y, _) = instance(8, 6, 10.0, 2);
    c.bench_function("ml_k16", |b| b.iter(|| ml_oracle_parts(black_box(&h), black_box(&y), &MlConfig::default())));
}

fn prox(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    c.bench_function("prox_soav_300", |b| {
        b.iter_batched(
            || DVector::from_fn(300, |_, _| rng.random_range(-3.0..3.0)),
            |v| prox_soav(&v, 10.0),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, solvers, prox);
criterion_main!(benches);
