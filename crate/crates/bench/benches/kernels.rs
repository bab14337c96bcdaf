use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use hadamard_core::constants::canonical;
use hadamard_core::experiment::analyse_model;
use hadamard_core::fixed_point::{build_free_solution, op_t, Couplings, SourceTerms};
use hadamard_core::majorant::{phi_coefficient, ModelMajorant};
use hadamard_core::metrology::select_parameters;
use hadamard_core::propagator::{integrate_modes, FrozenSymbol, PropagatorOptions};
use hadamard_core::symbol::cauchy_riemann;
use hadamard_core::{ps_mul, MultiIndex, PowerSeries, Space, C64};

fn dense(dim: usize, order: usize, rows: usize) -> PowerSeries {
    let mut s = PowerSeries::zeros(dim, order, rows, rows);
    for (i, z) in s.data_mut().iter_mut().enumerate() {
        *z = C64::new(1.0 / (i as f64 + 1.0), 0.5);
    }
    s
}

fn series(c: &mut Criterion) {
    let (a, b) = (dense(1, 6, 2), dense(1, 6, 2));
    c.bench_function("ps_mul d=1 K=6 2x2", |bn| bn.iter(|| ps_mul(black_box(&a), black_box(&b)).unwrap()));
    let (a, b) = (dense(3, 6, 1), dense(3, 6, 1));
    c.bench_function("ps_mul d=3 K=6 scalar", |bn| bn.iter(|| ps_mul(black_box(&a), black_box(&b)).unwrap()));
    let m = ModelMajorant::new(1.0, 2.0, 8.0, canonical().c0);
    let k = MultiIndex::new(vec![3, 2]);
    c.bench_function("phi_coefficient |k|=5 rho t=0.9", |bn| bn.iter(|| phi_coefficient(black_box(&k), 0.9 / 8.0, &m).unwrap()));
}

fn pipeline(c: &mut Criterion) {
    let fam = cauchy_riemann();
    let report = analyse_model(&fam).unwrap();
    let eps = 2f64.powi(-6);
    let params = select_parameters(eps, 0.3, report.case, 1, report.spectrum.gamma0).unwrap();
    let space = Space::new(params.space_params(), 200, canonical().c0, canonical().c1).unwrap();
    let grid = space.budget.grid().unwrap();
    let sym = FrozenSymbol::new(fam.symbol().frozen(), eps, 4);
    let opts = PropagatorOptions::default();
    let mut g = c.benchmark_group("cauchy-riemann eps=2^-6");
    g.sample_size(10);
    g.bench_function("integrate_modes N_theta=6", |bn| bn.iter(|| integrate_modes(&sym, 6, &grid, &opts).unwrap()));
    let p = integrate_modes(&sym, 6, &grid, &opts).unwrap();
    let free = build_free_solution(&report.spectrum.e_plus, &p, params.m_eps, 1, 4).unwrap();
    let src = SourceTerms::new(&fam, eps);
    g.bench_function("picard step", |bn| bn.iter(|| op_t(&src, &p, black_box(&free.f), Couplings::default()).unwrap()));
    g.finish();
}

criterion_group!(benches, series, pipeline);
criterion_main!(benches);
