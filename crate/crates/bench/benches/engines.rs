use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use qfa_core::problems::{build_zoo, build_mod_qfa_auto};
use qfa_core::qcompile::encode_table;
use qfa_core::qtm::{parity_qtm, PreparedQtm};
use qfa_core::sim::{simulate_2qfa, simulate_2qfa_traced};
use qfa_core::{qfa_family_to_qtm, AdviceFn, BlockSelector, QfaToQtmParams, SimOptions, ZooParams};

fn qfa_engines(c: &mut Criterion) {
    let m = build_mod_qfa_auto(7, 0, 0.125).unwrap();
    let eq = build_zoo("eq", &ZooParams { n: 4, seed: 0, eps: Some(0.25) }).unwrap();
    let opts = SimOptions::default();
    let mut g = c.benchmark_group("qfa");
    for len in [8usize, 32] {
        let x = "a".repeat(len) + "b";
        g.bench_with_input(BenchmarkId::new("mod7_exact", len), &x, |b, x| b.iter(|| simulate_2qfa(&m, black_box(x), opts)));
        g.bench_with_input(BenchmarkId::new("mod7_traced", len), &x, |b, x| {
            b.iter(|| simulate_2qfa_traced(&m, black_box(x), opts))
        });
    }
    let x = "aaaabbbb".to_string();
    g.bench_function("eq_2way_traced", |b| b.iter(|| simulate_2qfa_traced(&eq, black_box(&x), opts)));
    g.finish();
}

fn qtm_engines(c: &mut Criterion) {
    let mut g = c.benchmark_group("qtm");
    g.sample_size(10);
    let parity = PreparedQtm::new(&parity_qtm()).unwrap();
    let adv = AdviceFn::classical("0");
    let x = "0110".repeat(8);
    g.bench_function("parity_32", |b| b.iter(|| parity.simulate(black_box(&x), &adv, SimOptions::default())));

    let m = build_mod_qfa_auto(5, 0, 0.125).unwrap();
    let mut p = QfaToQtmParams::new(1, 0.125, BlockSelector::Fixed(1));
    p.row_eps = Some(0.3);
    let out = qfa_family_to_qtm(&|_| Ok(m.clone()), &p).unwrap();
    let interp = PreparedQtm::new(&out.qtm).unwrap();
    let long = SimOptions { max_steps: 5_000_000, residual_target: 1e-12 };
    g.bench_function("mod5_interpreted_aaaaab", |b| b.iter(|| interp.simulate(black_box("aaaaab"), &out.advice, long)));
    g.finish();
}

fn synthesis(c: &mut Criterion) {
    let m = build_mod_qfa_auto(5, 0, 0.125).unwrap();
    let mut g = c.benchmark_group("synthesis");
    g.sample_size(10);
    for eps in [0.1, 0.01] {
        g.bench_with_input(BenchmarkId::new("encode_mod5", eps), &eps, |b, &e| b.iter(|| encode_table(&m, e)));
    }
    g.finish();
}

criterion_group!(benches, qfa_engines, qtm_engines, synthesis);
criterion_main!(benches);
