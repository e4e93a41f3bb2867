use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::{Matrix3, Vector3};

use lgvi::integrators::rotation::rotation_residual_map;
use lgvi::integrators::{elgvi_step, solve_relative_rotation, Lgvi, MomentumRule, RotationMethod};
use lgvi::lie::exp_so3;
use lgvi::objectives::GradientMethod;
use lgvi::{AlgebraVector, BregmanParams, GroupKind, Objective, SolverOptions};

fn integrator_steps(c: &mut Criterion) {
    let (w, g0) = lgvi_bench::wahba(1);
    let params = BregmanParams::standard(4.0, 1.0, GroupKind::So3).unwrap();
    let mu0 = AlgebraVector::zeros(3);

    c.bench_function("elgvi_step_wahba", |b| {
        b.iter(|| {
            elgvi_step(
                1.0,
                black_box(&g0),
                &mu0,
                0.01,
                &params,
                &w,
                MomentumRule::Variational,
            )
            .unwrap()
        })
    });

    let lgvi = Lgvi::new(&params, &w, SolverOptions::default()).unwrap();
    let state = lgvi.init(1.0, g0.clone(), mu0.clone(), 0.01).unwrap();
    c.bench_function("lgvi_step_wahba", |b| {
        b.iter(|| lgvi.step(black_box(&state), 0.01).unwrap())
    });
}

fn rotation_solve(c: &mut Criterion) {
    let f = exp_so3(&Vector3::new(0.3, -0.5, 0.2));
    let eye = Matrix3::identity();
    let jd_eye = eye * 0.5 * eye.trace() - eye;
    let target = rotation_residual_map(&f, &jd_eye);
    c.bench_function("relative_rotation_explicit", |b| {
        b.iter(|| solve_relative_rotation(black_box(&target), &jd_eye, RotationMethod::Explicit))
    });

    let j = Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 3.0));
    let jd = Matrix3::identity() * 0.5 * j.trace() - j;
    let target = rotation_residual_map(&f, &jd);
    let newton = RotationMethod::Newton { tolerance: 1e-12 };
    c.bench_function("relative_rotation_newton", |b| {
        b.iter(|| solve_relative_rotation(black_box(&target), &jd, newton))
    });
}

fn pose_gradient(c: &mut Criterion) {
    let mut group = c.benchmark_group("pose_gradient_516");
    for (name, method) in [
        ("analytic", GradientMethod::Analytic),
        ("finite_difference", GradientMethod::FiniteDifference),
    ] {
        let (obj, g) = lgvi_bench::pose(1, 516, method);
        group.bench_function(name, |b| b.iter(|| obj.gradient(black_box(&g)).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, integrator_steps, rotation_solve, pose_gradient);
criterion_main!(benches);
