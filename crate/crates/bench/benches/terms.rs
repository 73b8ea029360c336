use criterion::{black_box, criterion_group, criterion_main, Criterion};
use vpdiff_core::term::{mk_add, mk_and, mk_const, mk_eq, mk_ite, mk_ult, mk_var, PathCondition, Term};
use vpdiff_core::{Solver, SolverConfig};

/// A chain of `depth` nested ites over two bytes.
fn chain(depth: u64) -> Term {
    let (a, b) = (mk_var("a", 8), mk_var("b", 8));
    let mut t = a.clone();
    for i in 0..depth {
        let c = mk_ult(&mk_add(&t, &mk_const(8, i)), &b);
        t = mk_ite(&c, &mk_add(&t, &b), &mk_and(&t, &mk_const(8, i | 1)));
    }
    t
}

fn building(c: &mut Criterion) {
    c.bench_function("build ite chain 64", |b| b.iter(|| chain(black_box(64))));
}

fn solving(c: &mut Criterion) {
    let solver = Solver::new(SolverConfig::default());
    let t = chain(8);
    let pc = PathCondition::new().and(&mk_eq(&t, &mk_const(8, 0x5a)));
    c.bench_function("builtin 16-bit chain", |b| b.iter(|| solver.solve(black_box(&pc))));

    let (x, y, z) = (mk_var("x", 8), mk_var("y", 8), mk_var("z", 8));
    let pc = PathCondition::new()
        .and(&mk_ult(&z, &mk_const(8, 2)))
        .and(&mk_eq(&z, &mk_add(&x, &mk_const(8, 7))))
        .and(&mk_ult(&y, &mk_const(8, 200)))
        .and(&mk_eq(&z, &mk_const(8, 9)));
    c.bench_function("builtin 24-bit unsat", |b| b.iter(|| solver.solve(black_box(&pc))));
}

criterion_group!(benches, building, solving);
criterion_main!(benches);
