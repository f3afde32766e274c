use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;
use std::hint::black_box;
use zetatrap::hiprec::{solve_dual_vandermonde_f64, Precision};
use zetatrap::kernels::HelmholtzConstants;
use zetatrap::nystrom::{solve_direct, solve_gmres, QuadratureMethod};
use zetatrap::quadrature::helmholtz_rows;
use zetatrap::specfun::{hankel1_01, zeta_deriv_neg_even};
use zetatrap::zetaweights::{build_log_stencil, oracle_stencil, CutoffSpec};
use zetatrap_bench::{helmholtz_system, star};

fn weights(c: &mut Criterion) {
    let mut g = c.benchmark_group("weights");
    for k in [7usize, 20] {
        // Bypasses the stencil cache: moments plus the extended-precision solve.
        g.bench_with_input(BenchmarkId::new("moments_and_solve", k), &k, |b, &k| {
            b.iter(|| {
                let nodes: Vec<f64> = (0..=k).map(|j| (j * j) as f64).collect();
                let moments: Vec<f64> = (0..=k).map(|i| -zeta_deriv_neg_even(i).unwrap()).collect();
                solve_dual_vandermonde_f64(&nodes, &moments, Precision::digits(60), 3).unwrap()
            })
        });
    }
    g.sample_size(10);
    g.bench_function("oracle_k2", |b| {
        b.iter(|| oracle_stencil(2, 1.0 / 32.0, CutoffSpec::for_stencil(1.0, 2)).unwrap())
    });
    g.finish();
}

fn special_functions(c: &mut Criterion) {
    c.bench_function("hankel1_01", |b| {
        b.iter(|| hankel1_01(black_box(Complex64::new(7.3, 2.1))))
    });
}

fn rows(c: &mut Criterion) {
    let dc = star(512);
    let consts = HelmholtzConstants::new(Complex64::new(12.5, 0.0)).unwrap();
    let st = build_log_stencil(7).unwrap();
    c.bench_function("helmholtz_rows_n512_k7", |b| {
        b.iter(|| helmholtz_rows(&dc, black_box(100), &consts, &st).unwrap())
    });
}

fn solves(c: &mut Criterion) {
    let mut g = c.benchmark_group("helmholtz_n256");
    g.sample_size(10);
    let zeta = QuadratureMethod::Zeta(build_log_stencil(7).unwrap());
    let kappa = Complex64::new(12.5, 0.0);
    g.bench_function("assemble_zeta16", |b| {
        b.iter(|| helmholtz_system(256, kappa, &zeta))
    });
    g.bench_function("assemble_kress", |b| {
        b.iter(|| helmholtz_system(256, kappa, &QuadratureMethod::Kress))
    });
    let (a, rhs) = helmholtz_system(256, kappa, &zeta);
    g.bench_function("lu", |b| b.iter(|| solve_direct(&a, &rhs).unwrap()));
    g.bench_function("gmres", |b| {
        b.iter(|| solve_gmres(&a, &rhs, 1e-14, 2000).unwrap())
    });
    g.finish();
}

criterion_group!(benches, weights, special_functions, rows, solves);
criterion_main!(benches);
