//! Structural invariants as proptest bodies, shared by the `props` test
//! target and the acceptance runner.

use nalgebra::DVector;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use nonsmooth_adm::admittance::{
    admittance_step, AdmittanceGains, AdmittanceState, ConstantModel, K1Gain, Measurement, UsDiscretization,
};
use nonsmooth_adm::msta::{MstaGains, MstaState};
use nonsmooth_adm::plant::{Manipulator, TwoLinkArm, TwoLinkParams};
use nonsmooth_adm::setvalued::{project_box, prox_norm_quad, BoxConstraint, NormQuadWeights};
use nonsmooth_adm::sim::{preset, run_scenario};
use nonsmooth_adm::{JointMatrix, JointVector};

use super::{scalar_step, ScalarGains, ScalarMemory};

pub fn vec_of(n: usize, scale: f64) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-scale..scale, n)
}

/// `(limits, y, z)` with matching dimensions in `1..=4`.
pub fn box_case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (1usize..=4).prop_flat_map(|n| (proptest::collection::vec(0.05..10.0f64, n), vec_of(n, 30.0), vec_of(n, 30.0)))
}

pub fn projection_idempotent_nonexpansive(limits: Vec<f64>, y: Vec<f64>, z: Vec<f64>) -> Result<(), TestCaseError> {
    let b = BoxConstraint::new(limits).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let (y, z) = (DVector::from_vec(y), DVector::from_vec(z));
    let py = project_box(&y, &b).unwrap();
    let pz = project_box(&z, &b).unwrap();
    prop_assert_eq!(project_box(&py, &b).unwrap(), py.clone());
    prop_assert!(b.contains(&py));
    prop_assert!((&py - &pz).norm() <= (&y - &z).norm() * (1.0 + 1e-15) + 1e-15);
    Ok(())
}

/// `(x, y, index, a, b)` for the norm-plus-quadratic prox.
pub fn prox_case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64, f64, f64)> {
    (1usize..=4).prop_flat_map(|n| (vec_of(n, 5.0), vec_of(n, 5.0), 1e-3..3.0f64, 0.0..4.0f64, 0.0..4.0f64))
}

pub fn prox_firmly_nonexpansive(x: Vec<f64>, y: Vec<f64>, index: f64, a: f64, b: f64) -> Result<(), TestCaseError> {
    let w = NormQuadWeights::new(a, b).unwrap();
    let (x, y) = (DVector::from_vec(x), DVector::from_vec(y));
    let d = prox_norm_quad(&x, index, w) - prox_norm_quad(&y, index, w);
    let slack = 1e-12 * (1.0 + (&x - &y).norm_squared());
    prop_assert!(d.norm_squared() <= d.dot(&(&x - &y)) + slack);
    Ok(())
}

fn fig3_like_gains(limit: f64) -> ScalarGains {
    ScalarGains {
        mx: 0.3,
        bx: 2.0,
        lambda: 10.0,
        k1: 30.0,
        k2: 11.6,
        k3: 66.0,
        limit,
        h: 1e-3,
        m_hat: 0.1,
        c_hat: 0.0,
        g_hat: 0.0,
    }
}

fn library_gains(p: &ScalarGains) -> AdmittanceGains {
    AdmittanceGains::new(
        JointMatrix::from_element(1, 1, p.mx),
        JointMatrix::from_element(1, 1, p.bx),
        p.lambda,
        K1Gain::Scalar(p.k1),
        MstaGains::new(p.k2, p.k3, 0.0).unwrap(),
        BoxConstraint::new(vec![p.limit]).unwrap(),
        p.h,
        UsDiscretization::ScalarImplicit,
    )
    .unwrap()
}

fn scalar_state(m: &ScalarMemory) -> AdmittanceState {
    let one = |x: f64| JointVector::from_element(1, x);
    AdmittanceState {
        qx_prev: one(m.qx),
        qxd_prev: one(m.qxd),
        ux_prev: one(m.ux),
        q_prev: one(m.q),
        qe_prev: one(m.qe),
        msta: MstaState { v: one(m.v) },
    }
}

/// Controller memory, joint position offset, contact and command torques.
pub fn step_case() -> impl Strategy<Value = ([f64; 6], f64, f64, f64)> {
    (
        proptest::array::uniform6(-0.05..0.05f64),
        -2e-3..2e-3f64,
        0.0..3.0f64,
        -3.0..0.0f64,
    )
}

/// With a limit no sample can reach, `τ = τ*` and the proxy is the
/// unconstrained prediction, matching the straight-line recursion.
pub fn unsaturated_transparency(mem: [f64; 6], dq: f64, fc: f64, fd: f64) -> Result<(), TestCaseError> {
    let p = fig3_like_gains(1e9);
    let m = ScalarMemory {
        qx: mem[0],
        qxd: mem[1],
        ux: mem[2],
        q: mem[3],
        qe: mem[4],
        v: mem[5],
    };
    let q = m.q + dq;
    let meas = Measurement {
        q: JointVector::from_element(1, q),
        fc: JointVector::from_element(1, fc),
        fd: JointVector::from_element(1, fd),
    };
    let model = ConstantModel::diagonal(&[p.m_hat], &[p.c_hat]).unwrap();
    let (tau, next, diag) = admittance_step(&scalar_state(&m), &meas, &model, &library_gains(&p)).unwrap();
    prop_assert!(!diag.any_saturated());
    prop_assert_eq!(tau[0], diag.tau_star[0]);
    prop_assert_eq!(next.qx_prev[0], diag.qx_star[0]);
    let (_, _, oracle) = scalar_step(&m, q, fc, fd, &p);
    prop_assert!((oracle.qx - diag.qx_star[0]).abs() <= 1e-9 * (1.0 + oracle.qx.abs()));
    Ok(())
}

/// Two joints, full model matrices, small limits so that most samples clip.
pub fn planar_case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    (vec_of(12, 0.1), vec_of(2, 5e-3), vec_of(4, 3.0), proptest::collection::vec(-1.0..1.0f64, 64))
}

/// Whenever the box clips, `λ = τ* - τ` lies in the normal cone at `τ`:
/// `<λ, p - F⁻¹τ> <= 0` for every `p` in `[-1, 1]^n`.
pub fn vi_residual_at_saturation(mem: Vec<f64>, dq: Vec<f64>, forces: Vec<f64>, probes: Vec<f64>) -> Result<(), TestCaseError> {
    let v2 = |a: f64, b: f64| JointVector::from_vec(vec![a, b]);
    let state = AdmittanceState {
        qx_prev: v2(mem[0], mem[1]),
        qxd_prev: v2(mem[2], mem[3]),
        ux_prev: v2(mem[4], mem[5]),
        q_prev: v2(mem[6], mem[7]),
        qe_prev: v2(mem[8], mem[9]),
        msta: MstaState { v: v2(mem[10], mem[11]) },
    };
    let meas = Measurement {
        q: &state.q_prev + v2(dq[0], dq[1]),
        fc: v2(forces[0], forces[1]),
        fd: v2(forces[2], forces[3]),
    };
    let model = ConstantModel {
        m: JointMatrix::from_row_slice(2, 2, &[0.6, 0.15, 0.15, 0.3]),
        c: JointMatrix::from_row_slice(2, 2, &[0.4, -0.2, 0.3, 0.1]),
        g: v2(0.5, -0.2),
    };
    let gains = AdmittanceGains::new(
        JointMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.4]),
        JointMatrix::from_diagonal(&v2(1.0, 2.0)),
        10.0,
        K1Gain::Scalar(30.0),
        MstaGains::new(11.6, 66.0, 0.0).unwrap(),
        BoxConstraint::new(vec![0.5, 0.8]).unwrap(),
        1e-3,
        UsDiscretization::Explicit,
    )
    .unwrap();
    let (tau, _, diag) = admittance_step(&state, &meas, &model, &gains).unwrap();
    if !diag.any_saturated() {
        return Ok(());
    }
    prop_assert!(diag.lambda_vi_residual <= 1e-10);
    let lambda = &diag.tau_star - &tau;
    let f = [0.5, 0.8];
    let corners = [[-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, 1.0]];
    let random = probes.chunks(2).map(|c| [c[0], c[1]]);
    for p in corners.into_iter().chain(random) {
        let r: f64 = (0..2).map(|i| lambda[i] * (p[i] - tau[i] / f[i])).sum();
        prop_assert!(r <= 1e-10, "residual {r} at probe {p:?}");
    }
    Ok(())
}

/// `xᵀ(Ṁ - 2C)x = 0`. `Ṁ` is rebuilt from the arm's own inertia: its only
/// configuration dependence is `b cos q2`, so `b = M12(q2=0) - M12(q2=π/2)`.
pub fn two_link_skew(q: Vec<f64>, qd: Vec<f64>, x: Vec<f64>) -> Result<(), TestCaseError> {
    let arm = TwoLinkArm::new(TwoLinkParams::default()).unwrap();
    let (q, qd, x) = (DVector::from_vec(q), DVector::from_vec(qd), DVector::from_vec(x));
    let m12 = |q2: f64| arm.mass(&DVector::from_vec(vec![0.0, q2]))[(0, 1)];
    let b = m12(0.0) - m12(std::f64::consts::FRAC_PI_2);
    let k = -b * q[1].sin() * qd[1];
    let mdot = JointMatrix::from_row_slice(2, 2, &[2.0 * k, k, k, 0.0]);
    let n = &mdot - arm.coriolis(&q, &qd) * 2.0;
    let val = (x.transpose() * &n * &x)[(0, 0)];
    let scale = n.norm().max(1.0) * x.norm_squared();
    prop_assert!(val.abs() <= 1e-12 * scale, "xᵀ(Ṁ-2C)x = {val}");
    Ok(())
}

/// Two runs of a shortened preset with the same configuration are equal
/// down to the last bit.
pub fn bit_identical_rerun(name: &str, duration: f64, seed: u64) -> Result<(), TestCaseError> {
    let mut sc = preset(name).unwrap();
    sc.duration_s = duration;
    sc.seed = seed;
    let a = run_scenario(&sc).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let b = run_scenario(&sc).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(a.rows.len(), b.rows.len());
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        let bits = |r: &nonsmooth_adm::sim::TraceRow| {
            r.q.iter()
                .chain(&r.qd)
                .chain(&r.qx)
                .chain(&r.tau)
                .chain(&r.u_s)
                .chain(&r.fc_cart)
                .map(|v| v.to_bits())
                .collect::<Vec<_>>()
        };
        prop_assert_eq!(bits(ra), bits(rb), "t = {}", ra.t);
    }
    Ok(())
}

pub fn rerun_case() -> impl Strategy<Value = (usize, u64)> {
    (0usize..3, 0u64..1000)
}

pub const RERUN_PRESETS: [&str; 3] = ["fig3_one_dof", "linmotor_steps", "msta_bench"];
