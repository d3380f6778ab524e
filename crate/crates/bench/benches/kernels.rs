use criterion::{criterion_group, criterion_main, Criterion};
use num_complex::Complex64;

use gchan::channels::apply_classical_noise_default;
use gchan::fock::{coherent_state, displacement_op};
use gchan::spectral::lambda0;
use gchan::theta::{build_theta, ThetaRoute};

fn bench_displacement(c: &mut Criterion) {
    c.bench_function("displacement_op d=64", |b| {
        b.iter(|| displacement_op(Complex64::new(0.7, -0.4), 64).unwrap())
    });
}

fn bench_classical_noise(c: &mut Criterion) {
    let rho = coherent_state(Complex64::new(0.5, 0.0), 40).unwrap().to_density();
    c.bench_function("classical_noise d=40 n=0.3", |b| {
        b.iter(|| apply_classical_noise_default(0.3, &rho).unwrap())
    });
}

fn bench_theta(c: &mut Criterion) {
    c.bench_function("theta factorized k=2 m=1 d=10", |b| {
        b.iter(|| build_theta(2, 1, 0.3, 10, ThetaRoute::Factorized).unwrap())
    });
}

fn bench_lambda0(c: &mut Criterion) {
    c.bench_function("lambda0 grid k=2..8", |b| {
        b.iter(|| {
            for k in 2..=8 {
                for n in [0.1, 0.3, 1.0, 5.0] {
                    lambda0(k, n, 2).unwrap();
                }
            }
        })
    });
}

criterion_group!(benches, bench_displacement, bench_classical_noise, bench_theta, bench_lambda0);
criterion_main!(benches);
