//! Worst-case deviations between library routines and the references in
//! the parent module, over seeded random instances.

use nalgebra::{DVector, Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nonsmooth_adm::admittance::{
    admittance_step, AdmittanceGains, AdmittanceState, ConstantModel, K1Gain, Measurement, UsDiscretization,
};
use nonsmooth_adm::msta::{
    msta_implicit_decoupled_step, msta_implicit_step, sta_scalar_implicit_step, MstaGains, MstaState, RootTerm,
};
use nonsmooth_adm::setvalued::{prox_norm_quad, BoxConstraint, NormQuadWeights};
use nonsmooth_adm::{JointMatrix, JointVector};

use super::*;

fn rvec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-scale..scale))
}

/// Closed-form prox vs damped Newton minimization, `cases` instances.
pub fn prox_vs_newton(seed: u64, cases: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let n = rng.random_range(1..=5);
        let z = rvec(&mut rng, n, 4.0);
        let lambda = 10f64.powf(rng.random_range(-3.0..0.5));
        let (a, b) = (rng.random_range(0.0..3.0), rng.random_range(0.0..3.0));
        let closed = prox_norm_quad(&z, lambda, NormQuadWeights::new(a, b).unwrap());
        worst = worst.max((closed - prox_newton(&z, lambda, a, b)).norm());
    }
    worst
}

/// Scalar implicit STA vs bisection on the inclusion, over `u_s` and `v`.
pub fn sta_vs_bisection(seed: u64, cases: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let h = 10f64.powf(rng.random_range(-4.0..-2.0));
        let (k2, k3) = (rng.random_range(0.5..40.0), rng.random_range(0.5..400.0));
        let g = MstaGains::new(k2, k3, 0.0).unwrap();
        let beta = rng.random_range(1.0..3.0);
        let s = rng.random_range(-1.0..1.0) * 10f64.powf(rng.random_range(-9.0..0.0));
        let v = rng.random_range(-3.0..3.0);
        let out = sta_scalar_implicit_step(s, &g, beta, h, v);
        let (u, v_next) = sta_by_bisection(s, k2, k3, beta, h, v);
        worst = worst.max((out.u_s - u).abs()).max((out.v - v_next).abs());
    }
    worst
}

/// Vector implicit solver at `n = 1` (matrix and decoupled forms, with
/// the root term at the unknown state) vs the scalar closed form.
pub fn vector_vs_scalar(seed: u64, cases: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let h = 10f64.powf(rng.random_range(-3.5..-2.0));
        let (m, c) = (rng.random_range(0.05..3.0), rng.random_range(-1.0..5.0));
        let k1 = rng.random_range(1.0..100.0);
        let gamma1 = (k1 + c) / m;
        let g = MstaGains::new(rng.random_range(1.0..30.0), rng.random_range(5.0..300.0), 0.0)
            .unwrap()
            .with_gamma1(gamma1)
            .with_root(RootTerm::Implicit);
        let s = rng.random_range(-1.0..1.0) * 10f64.powf(rng.random_range(-8.0..0.0));
        let v = rng.random_range(-2.0..2.0);
        let state = MstaState { v: JointVector::from_element(1, v) };
        let one = |x: f64| JointMatrix::from_element(1, 1, x);
        let sv = JointVector::from_element(1, s);
        let matrix = msta_implicit_step(&sv, &one(m), &one(c), &one(k1), &g, h, &state).unwrap();
        let decoupled = msta_implicit_decoupled_step(&sv, &g, h, &state).unwrap();
        let scalar = sta_scalar_implicit_step(s, &g, 1.0 + h * gamma1, h, v);
        for out in [&matrix, &decoupled] {
            worst = worst
                .max((out.u_s[0] - scalar.u_s).abs())
                .max((out.state.v[0] - scalar.v).abs());
        }
    }
    worst
}

/// `admittance_step` vs the straight-line references: one joint with the
/// scalar implicit STA and two joints with full model matrices and the
/// explicit MSTA. Relative error on `τ*`, `τ`, `q_x` and `v`.
pub fn admittance_vs_straight_line(seed: u64, cases: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let v1 = |x: f64| JointVector::from_element(1, x);
    for i in 0..cases {
        if i % 2 == 0 {
            let p = ScalarGains {
                mx: rng.random_range(0.1..1.0),
                bx: rng.random_range(0.5..5.0),
                lambda: rng.random_range(1.0..50.0),
                k1: rng.random_range(5.0..80.0),
                k2: rng.random_range(1.0..30.0),
                k3: rng.random_range(10.0..300.0),
                limit: rng.random_range(0.5..5.0),
                h: 1e-3,
                m_hat: rng.random_range(0.05..1.0),
                c_hat: rng.random_range(0.0..2.0),
                g_hat: rng.random_range(-1.0..1.0),
            };
            let mem = ScalarMemory {
                qx: rng.random_range(-0.05..0.05),
                qxd: rng.random_range(-0.05..0.05),
                ux: rng.random_range(-0.05..0.05),
                q: rng.random_range(-0.05..0.05),
                qe: rng.random_range(-0.01..0.01),
                v: rng.random_range(-2.0..2.0),
            };
            let q = mem.q + rng.random_range(-1e-3..1e-3);
            let (fc, fd) = (rng.random_range(0.0..3.0), rng.random_range(-3.0..0.0));
            let gains = AdmittanceGains::new(
                JointMatrix::from_element(1, 1, p.mx),
                JointMatrix::from_element(1, 1, p.bx),
                p.lambda,
                K1Gain::Scalar(p.k1),
                MstaGains::new(p.k2, p.k3, 0.0).unwrap(),
                BoxConstraint::new(vec![p.limit]).unwrap(),
                p.h,
                UsDiscretization::ScalarImplicit,
            )
            .unwrap();
            let mut model = ConstantModel::diagonal(&[p.m_hat], &[p.c_hat]).unwrap();
            model.g = v1(p.g_hat);
            let state = AdmittanceState {
                qx_prev: v1(mem.qx),
                qxd_prev: v1(mem.qxd),
                ux_prev: v1(mem.ux),
                q_prev: v1(mem.q),
                qe_prev: v1(mem.qe),
                msta: MstaState { v: v1(mem.v) },
            };
            let meas = Measurement {
                q: v1(q),
                fc: v1(fc),
                fd: v1(fd),
            };
            let (tau, next, diag) = admittance_step(&state, &meas, &model, &gains).unwrap();
            let (tau_star_o, tau_o, next_o) = scalar_step(&mem, q, fc, fd, &p);
            worst = worst
                .max(rel_err(diag.tau_star[0], tau_star_o))
                .max(rel_err(tau[0], tau_o))
                .max(rel_err(next.qx_prev[0], next_o.qx))
                .max(rel_err(next.msta.v[0], next_o.v));
        } else {
            let spd = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
                let a = Matrix2::from_fn(|_, _| rng.random_range(-0.3..0.3));
                a * a.transpose() + Matrix2::from_diagonal(&Vector2::new(rng.random_range(lo..hi), rng.random_range(lo..hi)))
            };
            let p = PlanarGains {
                mx: spd(&mut rng, 0.2, 1.0),
                bx: Matrix2::from_diagonal(&Vector2::new(rng.random_range(0.5..5.0), rng.random_range(0.5..5.0))),
                lambda: rng.random_range(1.0..50.0),
                k1: rng.random_range(5.0..80.0),
                k2: rng.random_range(1.0..30.0),
                k3: rng.random_range(10.0..300.0),
                k4: rng.random_range(0.0..5.0),
                limits: Vector2::new(rng.random_range(0.5..5.0), rng.random_range(0.5..5.0)),
                h: 1e-3,
                m_hat: spd(&mut rng, 0.05, 1.0),
                c_hat: Matrix2::from_fn(|_, _| rng.random_range(-0.5..0.5)),
                g_hat: Vector2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            };
            let r2 = |rng: &mut ChaCha8Rng, s: f64| Vector2::new(rng.random_range(-s..s), rng.random_range(-s..s));
            let mem = PlanarMemory {
                qx: r2(&mut rng, 0.05),
                qxd: r2(&mut rng, 0.05),
                ux: r2(&mut rng, 0.05),
                q: r2(&mut rng, 0.05),
                qe: r2(&mut rng, 0.01),
                v: r2(&mut rng, 2.0),
            };
            let q = mem.q + r2(&mut rng, 1e-3);
            let (fc, fd) = (r2(&mut rng, 3.0), r2(&mut rng, 3.0));
            let dm = |m: &Matrix2<f64>| JointMatrix::from_fn(2, 2, |i, j| m[(i, j)]);
            let dv = |v: &Vector2<f64>| JointVector::from_vec(vec![v[0], v[1]]);
            let gains = AdmittanceGains::new(
                dm(&p.mx),
                dm(&p.bx),
                p.lambda,
                K1Gain::Scalar(p.k1),
                MstaGains::new(p.k2, p.k3, p.k4).unwrap(),
                BoxConstraint::new(vec![p.limits[0], p.limits[1]]).unwrap(),
                p.h,
                UsDiscretization::Explicit,
            )
            .unwrap();
            let model = ConstantModel {
                m: dm(&p.m_hat),
                c: dm(&p.c_hat),
                g: dv(&p.g_hat),
            };
            let state = AdmittanceState {
                qx_prev: dv(&mem.qx),
                qxd_prev: dv(&mem.qxd),
                ux_prev: dv(&mem.ux),
                q_prev: dv(&mem.q),
                qe_prev: dv(&mem.qe),
                msta: MstaState { v: dv(&mem.v) },
            };
            let meas = Measurement {
                q: dv(&q),
                fc: dv(&fc),
                fd: dv(&fd),
            };
            let (tau, next, diag) = admittance_step(&state, &meas, &model, &gains).unwrap();
            let (tau_star_o, tau_o, next_o) = planar_step(&mem, &q, &fc, &fd, &p);
            for j in 0..2 {
                worst = worst
                    .max(rel_err(diag.tau_star[j], tau_star_o[j]))
                    .max(rel_err(tau[j], tau_o[j]))
                    .max(rel_err(next.qx_prev[j], next_o.qx[j]))
                    .max(rel_err(next.msta.v[j], next_o.v[j]));
            }
        }
    }
    worst
}

/// Largest one-step increase of `V = k3 Ψ2(ŝ) + ||s2||²/2` along the
/// unperturbed implicit recursion
/// `ŝ_{k+1} = s1_k - h k2 m̂1 - h² k3 m̂2`, `s2_{k+1} = s2_k - h k3 m̂2`,
/// `s1_{k+1} = ŝ_{k+1} + h s2_{k+1}`, with `ŝ`, `m̂2` from the library step
/// and `V` evaluated here. Also returns the worst inclusion residual of `ŝ`.
pub fn lyapunov_increase(seed: u64, runs: usize, steps: usize) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut inclusion = 0.0f64;
    for _ in 0..runs {
        let n = rng.random_range(1..=3);
        let h = 10f64.powf(rng.random_range(-3.5..-1.5));
        let (k2, k3, k4) = (rng.random_range(0.5..20.0), rng.random_range(0.5..100.0), rng.random_range(0.0..5.0));
        let g = MstaGains::new(k2, k3, k4).unwrap();
        let alpha2 = k4 / k3;
        let mut shat = rvec(&mut rng, n, 1.0);
        let mut s2 = rvec(&mut rng, n, 1.0);
        let mut state = MstaState::zeros(n);
        let mut v_prev = lyapunov_v(&shat, &s2, k3, alpha2);
        for _ in 0..steps {
            let s1 = &shat + &s2 * h;
            let out = msta_implicit_decoupled_step(&s1, &g, h, &state).unwrap();
            let diag = out.diag.expect("implicit step reports ŝ and m̂2");
            let next_shat = diag.shat.clone();
            let m2 = diag.m2.clone();
            // m̂2 must lie in ∂Ψ2(ŝ): the unit ball at zero, (1 + α2 r) ŝ/r elsewhere
            let r = next_shat.norm();
            let dev = if r > 0.0 {
                (&m2 - &next_shat * ((1.0 + alpha2 * r) / r)).norm()
            } else {
                (m2.norm() - 1.0).max(0.0)
            };
            inclusion = inclusion.max(dev);
            s2 -= &m2 * (h * k3);
            shat = next_shat;
            state = out.state;
            let v = lyapunov_v(&shat, &s2, k3, alpha2);
            worst = worst.max(v - v_prev);
            v_prev = v;
        }
    }
    (worst, inclusion)
}
