use std::hint::black_box;

use covqec::channels::choi_distance;
use covqec::codes::{gyroscope_code, qutrit_base_code, random_covariant_code};
use covqec::experiments::demo::qutrit_swap_rep;
use covqec::groups::FiniteGroup;
use covqec::hilbert::haar_density;
use covqec::rng::seeded_rng;
use covqec::verify::{fworst_estimate, kl_erasure_check};
use covqec::ModeSpace;
use criterion::{criterion_group, criterion_main, Criterion};

fn partial_trace(c: &mut Criterion) {
    let rho = haar_density(ModeSpace::uniform(3, 5).unwrap(), &mut seeded_rng(1));
    c.bench_function("partial_trace 3^5 keep 2", |b| b.iter(|| black_box(&rho).partial_trace(&[1, 3]).unwrap()));
}

fn random_code(c: &mut Criterion) {
    let z2 = FiniteGroup::cyclic(2).unwrap();
    let z3 = FiniteGroup::cyclic(3).unwrap();
    c.bench_function("random_covariant_code z2 n=5", |b| {
        b.iter(|| random_covariant_code(&z2, 5, black_box(7), 4096).unwrap())
    });
    c.bench_function("random_covariant_code z3 n=4", |b| {
        b.iter(|| random_covariant_code(&z3, 4, black_box(7), 4096).unwrap())
    });
}

fn choi(c: &mut Criterion) {
    let code = gyroscope_code(&qutrit_base_code().unwrap(), &qutrit_swap_rep().unwrap()).unwrap();
    let a = code.encoder_channel().unwrap();
    let b = covqec::codes::twirl_code(&code, None).unwrap().encoder_channel().unwrap();
    c.bench_function("choi_distance gyroscope vs twirl", |bch| bch.iter(|| choi_distance(black_box(&a), &b)));
    c.bench_function("kl_erasure_check gyroscope mode 0", |bch| bch.iter(|| kl_erasure_check(black_box(&code), 0)));
}

fn fworst(c: &mut Criterion) {
    let (code, _) = random_covariant_code(&FiniteGroup::cyclic(2).unwrap(), 5, 3, 4096).unwrap();
    let mut g = c.benchmark_group("fworst");
    g.sample_size(10);
    g.bench_function("fworst_estimate z2 n=5, 8 restarts", |b| b.iter(|| fworst_estimate(&code, 0, 8, black_box(1))));
    g.finish();
}

criterion_group!(kernels, partial_trace, random_code, choi, fworst);
criterion_main!(kernels);
