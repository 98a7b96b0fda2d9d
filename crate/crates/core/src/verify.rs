//! Self-check suites behind `nonsmooth-adm verify`.
//!
//! Each group compares a library routine against an independent reference
//! (bisection, straight-line scalar arithmetic, algebraic identities) on
//! seeded random instances and reports the worst deviation against its
//! tolerance. `tolerance_scale` multiplies every tolerance; `0` turns the
//! run into a harness self-test in which any nonzero deviation fails.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::admittance::{admittance_step, AdmittanceGains, AdmittanceState, ConstantModel, K1Gain, Measurement, UsDiscretization};
use crate::msta::{
    msta_implicit_decoupled_step, msta_implicit_step, sta_scalar_implicit_step, MstaGains, MstaState, RootTerm,
};
use crate::plant::{forward_dynamics, Manipulator, PlantState, TwoLinkArm, TwoLinkParams};
use crate::setvalued::{
    probe_grid, project_box, prox_norm_quad, sat, sign0, variational_residual, BoxConstraint, NormQuadWeights,
};
use crate::sim::{preset, run_scenario};
use crate::{JointMatrix, JointVector, Result};

pub const GROUPS: [&str; 8] = [
    "projection",
    "prox",
    "sta_scalar",
    "msta_vector",
    "admittance",
    "lyapunov",
    "plant",
    "determinism",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupReport {
    pub group: String,
    pub passed: bool,
    pub worst: f64,
    pub tolerance: f64,
    pub cases: usize,
    pub note: String,
}

fn report(group: &str, worst: f64, tolerance: f64, cases: usize, note: &str) -> GroupReport {
    GroupReport {
        group: group.to_string(),
        passed: worst <= tolerance,
        worst,
        tolerance,
        cases,
        note: note.to_string(),
    }
}

fn rvec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> JointVector {
    JointVector::from_iterator(n, (0..n).map(|_| rng.random_range(-scale..scale)))
}

fn projection(scale: f64) -> GroupReport {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    let cases = 1000;
    for _ in 0..cases {
        let n = rng.random_range(1..=4);
        let limits: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..10.0)).collect();
        let b = BoxConstraint::new(limits).expect("positive limits");
        let y = rvec(&mut rng, n, 20.0);
        let z = rvec(&mut rng, n, 20.0);
        let py = project_box(&y, &b).expect("dims");
        let pz = project_box(&z, &b).expect("dims");
        let idem = (project_box(&py, &b).expect("dims") - &py).norm();
        let expansion = ((&py - &pz).norm() - (&y - &z).norm()).max(0.0);
        let vi = variational_residual(&y, &py, &b, &probe_grid(n)).expect("dims").max(0.0);
        let outside = if b.contains(&py) { 0.0 } else { f64::INFINITY };
        worst = worst.max(idem).max(expansion).max(vi).max(outside);
    }
    report("projection", worst, 1e-10 * scale, cases, "idempotence, non-expansiveness, VI residual")
}

/// Radial minimizer of `||x - z||²/(2λ) + a||x|| + (b/2)||x||²` by bisection
/// on the derivative along `z`.
fn prox_by_bisection(z: &JointVector, lambda: f64, a: f64, b: f64) -> JointVector {
    let r = z.norm();
    let dphi = |t: f64| (t - r) / lambda + a + b * t;
    if r == 0.0 || dphi(0.0) >= 0.0 {
        return JointVector::zeros(z.len());
    }
    let (mut lo, mut hi) = (0.0, r);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if dphi(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    z * (0.5 * (lo + hi) / r)
}

fn prox(scale: f64) -> GroupReport {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    let cases = 1000;
    for _ in 0..cases {
        let n = rng.random_range(1..=4);
        let z = rvec(&mut rng, n, 5.0);
        let lambda = rng.random_range(1e-3..2.0);
        let w = NormQuadWeights::new(rng.random_range(0.0..3.0), rng.random_range(0.0..3.0)).expect("weights");
        let closed = prox_norm_quad(&z, lambda, w);
        let numeric = prox_by_bisection(&z, lambda, w.a, w.b);
        worst = worst.max((closed - numeric).norm());
    }
    report("prox", worst, 1e-8 * scale, cases, "closed form vs radial bisection")
}

/// Solves `s/β ∈ ŝ + (h/β)(k2|ŝ|^{1/2} + h k3) sgn(ŝ)` for `ŝ` by bisection.
fn shat_by_bisection(s: f64, k2: f64, k3: f64, beta: f64, h: f64) -> f64 {
    if s.abs() <= h * h * k3 {
        return 0.0;
    }
    let g = |x: f64| beta * x + h * (k2 * x.sqrt() + h * k3) - s.abs();
    let (mut lo, mut hi) = (0.0, s.abs() / beta);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    sign0(s) * 0.5 * (lo + hi)
}

fn sta_scalar(scale: f64) -> GroupReport {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst = 0.0f64;
    let cases = 1000;
    for _ in 0..cases {
        let h = 10f64.powf(rng.random_range(-4.0..-2.0));
        let g = MstaGains::new(rng.random_range(0.5..30.0), rng.random_range(0.5..300.0), 0.0).expect("gains");
        let beta = rng.random_range(1.0..2.0);
        let s = rng.random_range(-1.0..1.0) * 10f64.powf(rng.random_range(-8.0..0.0));
        let v = rng.random_range(-2.0..2.0);
        let out = sta_scalar_implicit_step(s, &g, beta, h, v);
        let shat = shat_by_bisection(s, g.k2, g.k3, beta, h);
        let band = h * h * g.k3;
        let phi1 = sign0(s) * (h * g.k3 / g.k2 * sat(s.abs() / band) + shat.abs().sqrt());
        let v_next = v + h * g.k3 * sat(s / band);
        let u = g.k2 * phi1 + v_next;
        worst = worst.max((out.u_s - u).abs()).max((out.v - v_next).abs());
    }
    report("sta_scalar", worst, 1e-10 * scale, cases, "closed form vs bisection on the inclusion")
}

fn msta_vector(scale: f64) -> GroupReport {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut worst = 0.0f64;
    let cases = 500;
    for _ in 0..cases {
        let h = 1e-3;
        let gamma1 = rng.random_range(0.0..300.0);
        let g = MstaGains::new(rng.random_range(1.0..20.0), rng.random_range(10.0..200.0), 0.0)
            .expect("gains")
            .with_gamma1(gamma1)
            .with_root(RootTerm::Implicit);
        let s = rng.random_range(-1.0..1.0) * 10f64.powf(rng.random_range(-7.0..0.0));
        let v = rng.random_range(-1.0..1.0);
        let state = MstaState { v: JointVector::from_element(1, v) };
        let m = rng.random_range(0.05..2.0);
        let k1 = JointMatrix::from_element(1, 1, gamma1 * m);
        let out = msta_implicit_step(
            &JointVector::from_element(1, s),
            &JointMatrix::from_element(1, 1, m),
            &JointMatrix::zeros(1, 1),
            &k1,
            &g,
            h,
            &state,
        )
        .expect("solver");
        let scalar = sta_scalar_implicit_step(s, &g, g.beta(h), h, v);
        worst = worst.max((out.u_s[0] - scalar.u_s).abs());

        let dec = msta_implicit_decoupled_step(&JointVector::from_element(1, s), &g, h, &state).expect("solver");
        worst = worst.max((dec.u_s[0] - scalar.u_s).abs());
    }
    report("msta_vector", worst, 1e-8 * scale, cases, "vector solver at n = 1 vs scalar closed form")
}

/// Scalar straight-line evaluation of one controller sample with a constant
/// model and the closed-form scalar inner loop.
#[allow(clippy::too_many_arguments)]
fn admittance_scalar(
    st: &[f64; 6],
    q: f64,
    fc: f64,
    fd: f64,
    (mx, bx, lam, k1): (f64, f64, f64, f64),
    (m, c): (f64, f64),
    (k2, k3, f, h): (f64, f64, f64, f64),
) -> (f64, f64, f64) {
    let [qx_prev, qxd_prev, ux_prev, q_prev, qe_prev, v] = *st;
    let ux = (mx * qxd_prev + h * (fc + fd)) / (mx + bx * h);
    let qx_star = qx_prev + h * ux;
    let qe = qx_star - q;
    let s = (qe - qe_prev) / h + lam * qe;
    let beta = h * (k1 + c) / m + 1.0;
    let band = h * h * k3;
    let x = (-h * k2 + (h * h * k2 * k2 + 4.0 * beta * (s.abs() - band).max(0.0)).sqrt()) / (2.0 * beta);
    let phi1 = sign0(s) * (h * k3 / k2 * sat(s.abs() / band) + x);
    let v_next = v + h * k3 * sat(s / band);
    let us = k2 * phi1 + v_next;
    let b = m * lam + k1;
    let bh = b + c;
    let w = m / (h * h) + bh / h + (c + k1) * lam;
    let phi_a = (m + c * h) * q / (h * h) + b * q_prev / h + m * us;
    let phi_b = m * (qx_prev + h * ux_prev) / (h * h) + bh * qx_prev / h;
    let q1 = q + (phi_b - phi_a) / w;
    let tau_star = w * (qx_star - q1);
    let tau = tau_star.clamp(-f, f);
    (tau, tau / w + q1, v_next)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn admittance(scale: f64) -> GroupReport {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let (mx, bx, lam, k1, m, c, k2, k3, f, h) = (0.3, 2.0, 10.0, 30.0, 0.1, 0.0, 11.6, 66.0, 3.0, 1e-3);
    let gains = AdmittanceGains::new(
        JointMatrix::from_element(1, 1, mx),
        JointMatrix::from_element(1, 1, bx),
        lam,
        K1Gain::Scalar(k1),
        MstaGains::new(k2, k3, 0.0).expect("gains"),
        BoxConstraint::new(vec![f]).expect("limit"),
        h,
        UsDiscretization::ScalarImplicit,
    )
    .expect("gains");
    let model = ConstantModel::diagonal(&[m], &[c]).expect("model");
    let mut worst = 0.0f64;
    let cases = 100;
    for _ in 0..cases {
        let st: [f64; 6] = std::array::from_fn(|_| rng.random_range(-0.05..0.05));
        let q = st[3] + rng.random_range(-1e-3..1e-3);
        let (fc, fd) = (rng.random_range(0.0..2.0), rng.random_range(-2.0..0.0));
        let state = AdmittanceState {
            qx_prev: JointVector::from_element(1, st[0]),
            qxd_prev: JointVector::from_element(1, st[1]),
            ux_prev: JointVector::from_element(1, st[2]),
            q_prev: JointVector::from_element(1, st[3]),
            qe_prev: JointVector::from_element(1, st[4]),
            msta: MstaState { v: JointVector::from_element(1, st[5]) },
        };
        let meas = Measurement {
            q: JointVector::from_element(1, q),
            fc: JointVector::from_element(1, fc),
            fd: JointVector::from_element(1, fd),
        };
        let (tau, next, _) = admittance_step(&state, &meas, &model, &gains).expect("step");
        let (tau_o, qx_o, v_o) = admittance_scalar(&st, q, fc, fd, (mx, bx, lam, k1), (m, c), (k2, k3, f, h));
        worst = worst
            .max(rel(tau[0], tau_o))
            .max(rel(next.qx_prev[0], qx_o))
            .max(rel(next.msta.v[0], v_o));
    }
    report("admittance", worst, 1e-12 * scale, cases, "controller step vs straight-line scalar recursion")
}

/// `V = k3 Ψ2(ŝ) + ||s2||²/2` along the unperturbed implicit recursion.
pub fn lyapunov_max_increase(seed: u64, runs: usize, steps: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..runs {
        let n = rng.random_range(1..=3);
        let h = 10f64.powf(rng.random_range(-3.5..-1.5));
        let g = MstaGains::new(rng.random_range(0.5..20.0), rng.random_range(0.5..100.0), rng.random_range(0.0..5.0))?;
        let psi2 = NormQuadWeights::new(1.0, g.alpha2())?;
        let mut shat = rvec(&mut rng, n, 1.0);
        let mut s2 = rvec(&mut rng, n, 1.0);
        let mut state = MstaState::zeros(n);
        let mut v_prev = g.k3 * psi2.eval(&shat) + 0.5 * s2.norm_squared();
        for _ in 0..steps {
            let s1 = &shat + &s2 * h;
            let out = msta_implicit_decoupled_step(&s1, &g, h, &state)?;
            let diag = out.diag.expect("implicit path reports diagnostics");
            s2 -= &diag.m2 * (h * g.k3);
            shat = diag.shat;
            state = out.state;
            let v = g.k3 * psi2.eval(&shat) + 0.5 * s2.norm_squared();
            worst = worst.max(v - v_prev);
            v_prev = v;
        }
    }
    Ok(worst)
}

fn lyapunov(scale: f64) -> GroupReport {
    match lyapunov_max_increase(16, 100, 1000) {
        Ok(w) => report("lyapunov", w.max(0.0), 1e-12 * scale, 100, "V non-increasing, 1000 steps per run"),
        Err(e) => report("lyapunov", f64::INFINITY, 1e-12 * scale, 0, &e.to_string()),
    }
}

fn plant(scale: f64) -> GroupReport {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let arm = TwoLinkArm::new(TwoLinkParams::default()).expect("params");
    let mut worst = 0.0f64;
    let cases = 200;
    for _ in 0..cases {
        let q = rvec(&mut rng, 2, 3.0);
        let qd = rvec(&mut rng, 2, 3.0);
        let x = rvec(&mut rng, 2, 1.0);
        let eps = 1e-6;
        let mdot = (arm.mass(&(&q + &qd * eps)) - arm.mass(&(&q - &qd * eps))) / (2.0 * eps);
        let skew = (x.transpose() * (mdot - arm.coriolis(&q, &qd) * 2.0) * &x)[(0, 0)].abs();
        // skew tolerance is 1e-6 ||x||², mapped onto the group tolerance
        worst = worst.max(skew / (1e-6 * x.norm_squared()) * 1e-10);
        let st = PlantState::at_rest(q.clone());
        let z = JointVector::zeros(2);
        let qdd = forward_dynamics(&arm, &st, &arm.gravity(&q), &z, &z).expect("spd");
        worst = worst.max(qdd.norm());
    }
    report("plant", worst, 1e-10 * scale, cases, "two-link skew symmetry and gravity hold")
}

fn determinism(scale: f64) -> GroupReport {
    let mut sc = preset("fig3_one_dof").expect("preset");
    sc.duration_s = 0.6;
    match (run_scenario(&sc), run_scenario(&sc)) {
        (Ok(a), Ok(b)) => {
            let same = a == b;
            report("determinism", if same { 0.0 } else { 1.0 }, 0.5 * scale, 1, "bit-identical reruns")
        }
        (Err(e), _) | (_, Err(e)) => report("determinism", f64::INFINITY, 0.5 * scale, 0, &e.to_string()),
    }
}

pub fn run_group(name: &str, tolerance_scale: f64) -> Option<GroupReport> {
    let f: fn(f64) -> GroupReport = match name {
        "projection" => projection,
        "prox" => prox,
        "sta_scalar" => sta_scalar,
        "msta_vector" => msta_vector,
        "admittance" => admittance,
        "lyapunov" => lyapunov,
        "plant" => plant,
        "determinism" => determinism,
        _ => return None,
    };
    Some(f(tolerance_scale))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_groups_pass() {
        for g in ["projection", "prox", "sta_scalar", "msta_vector", "admittance", "plant"] {
            let r = run_group(g, 1.0).unwrap();
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn zero_tolerance_fails_some_group() {
        assert!(GROUPS[..5].iter().any(|g| !run_group(g, 0.0).unwrap().passed));
    }

    #[test]
    fn unknown_group() {
        assert!(run_group("nope", 1.0).is_none());
    }
}
