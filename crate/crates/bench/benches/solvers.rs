use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use reflect_core::geometry::DomainSpec;
use reflect_core::paths::{sample_brownian, TimeGrid};
use reflect_core::sde::{solve_wong_zakai, CoefficientKind, Coefficients};
use reflect_core::skorokhod::{solve_discrete, solve_halfline};

fn bench_brownian(c: &mut Criterion) {
    let grid = TimeGrid::new(1.0, 1 << 12).unwrap();
    c.bench_function("sample_brownian_2d_4096", |b| {
        b.iter(|| sample_brownian(2, grid, 42, 0).unwrap())
    });
}

fn bench_halfline(c: &mut Criterion) {
    let grid = TimeGrid::new(1.0, 1 << 12).unwrap();
    let mut w = sample_brownian(1, grid, 42, 1).unwrap();
    w.values.iter_mut().for_each(|v| *v += 1.0);
    c.bench_function("solve_halfline_4096", |b| {
        b.iter_batched(|| w.clone(), |w| solve_halfline(&w).unwrap(), BatchSize::SmallInput)
    });
}

fn bench_box_2d(c: &mut Criterion) {
    let domain = DomainSpec::Box {
        dimension: 2,
        lower: vec![Some(0.0), Some(0.0)],
        upper: vec![Some(1.0), Some(1.0)],
    };
    let grid = TimeGrid::new(1.0, 1 << 10).unwrap();
    let mut w = sample_brownian(2, grid, 42, 2).unwrap();
    w.values.iter_mut().for_each(|v| *v = 0.5 + 0.5 * *v);
    c.bench_function("solve_discrete_box2d_1024x4", |b| {
        b.iter(|| solve_discrete(&domain, &w, 4).unwrap())
    });
}

fn bench_wong_zakai(c: &mut Criterion) {
    let domain = DomainSpec::Box {
        dimension: 2,
        lower: vec![Some(0.0), Some(0.0)],
        upper: vec![None, None],
    };
    let coeff = Coefficients::new(CoefficientKind::DiagSinusoid {
        dimension: 2,
        amplitude: 0.5,
        drift: vec![],
    })
    .unwrap();
    let grid = TimeGrid::new(1.0, 1 << 10).unwrap();
    let b_path = sample_brownian(2, grid, 42, 3).unwrap();
    c.bench_function("wong_zakai_orthant_1024x16", |b| {
        b.iter(|| {
            solve_wong_zakai(&domain, &coeff, &b_path, 1 << 10, 16, &[0.1, 0.1], false).unwrap()
        })
    });
}

criterion_group!(
    benches,
    bench_brownian,
    bench_halfline,
    bench_box_2d,
    bench_wong_zakai
);
criterion_main!(benches);
