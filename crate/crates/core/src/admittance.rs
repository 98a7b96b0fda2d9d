//! The discrete-time set-valued admittance controller.
//!
//! One call to [`admittance_step`] runs the full recursion:
//!
//! 1. proxy prediction `u*_x`, `q*_x` from the contact and desired forces;
//! 2. sliding variable `s = q̇_e + Λ q_e` with `q_e = q*_x - q`;
//! 3. inner super-twisting term `u_s` from the selected discretization;
//! 4. unconstrained torque `τ* = W (q*_x - q*_1)`, `W = M̂/h² + K̂`;
//! 5. box projection `τ = F Proj([-1,1]^n; F⁻¹ τ*)`;
//! 6. proxy correction `q_x = W⁻¹ τ + q*_1`, so the proxy is pulled back by
//!    exactly the clipped torque and the loop does not wind up.

use serde::{Deserialize, Serialize};

use crate::msta::{
    msta_explicit_step, msta_implicit_decoupled_step_with_beta, msta_implicit_step, sta_scalar_implicit_vector,
    MstaGains, MstaState, SolverDiagnostics,
};
use crate::plant::Manipulator;
use crate::setvalued::{probe_grid, project_box, variational_residual, BoxConstraint};
use crate::{Error, JointMatrix, JointVector, Result};

/// Inner-loop gain `k1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum K1Gain {
    /// `k1 I`.
    Scalar(f64),
    /// `k1 = -Ĉ_k + γ1 M̂_k`.
    Structured { gamma1: f64 },
}

/// Which discretization produces `u_s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UsDiscretization {
    Explicit,
    ImplicitVector,
    ImplicitDecoupled,
    ScalarImplicit,
}

impl UsDiscretization {
    /// Closed-form scalar path for one joint, explicit MSTA otherwise.
    pub fn default_for(dof: usize) -> Self {
        if dof == 1 {
            UsDiscretization::ScalarImplicit
        } else {
            UsDiscretization::Explicit
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceGains {
    /// Proxy inertia `M_x`.
    pub mx: JointMatrix,
    /// Proxy damping `B_x`.
    pub bx: JointMatrix,
    pub lambda: f64,
    pub k1: K1Gain,
    pub msta: MstaGains,
    pub limits: BoxConstraint,
    /// Controller period in seconds.
    pub h: f64,
    pub us: UsDiscretization,
}

impl AdmittanceGains {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        mx: JointMatrix,
        bx: JointMatrix,
        lambda: f64,
        k1: K1Gain,
        msta: MstaGains,
        limits: BoxConstraint,
        h: f64,
        us: UsDiscretization,
    ) -> Result<Self> {
        let g = Self {
            mx,
            bx,
            lambda,
            k1,
            msta,
            limits,
            h,
            us,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn dof(&self) -> usize {
        self.limits.dim()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dof();
        for m in [&self.mx, &self.bx] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: m.nrows().max(m.ncols()),
                });
            }
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidParameter(format!("h must be > 0, got {}", self.h)));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0 / self.h) {
            return Err(Error::InvalidParameter(format!(
                "lambda must lie in (0, 1/h) = (0, {}), got {}",
                1.0 / self.h,
                self.lambda
            )));
        }
        let sym = (&self.mx + self.mx.transpose()) * 0.5;
        if (&sym - &self.mx).norm() > 1e-12 * self.mx.norm().max(1.0) || sym.clone().cholesky().is_none() {
            return Err(Error::InvalidParameter("M_x must be symmetric positive definite".into()));
        }
        let mx_inv = sym.cholesky().map(|c| c.inverse()).expect("checked above");
        let stable = (&self.bx * mx_inv)
            .complex_eigenvalues()
            .iter()
            .all(|e| e.re > 0.0);
        if !stable {
            return Err(Error::InvalidParameter("-B_x M_x^{-1} must be Hurwitz".into()));
        }
        match self.k1 {
            K1Gain::Scalar(k) if !(k > 0.0 && k.is_finite()) => {
                return Err(Error::InvalidParameter(format!("k1 must be > 0, got {k}")));
            }
            K1Gain::Structured { gamma1 } if !(gamma1 > 0.0 && gamma1.is_finite()) => {
                return Err(Error::InvalidParameter(format!("gamma1 must be > 0, got {gamma1}")));
            }
            _ => {}
        }
        self.msta.validate()
    }

    /// `k1` as a matrix for the current model values.
    pub fn k1_matrix(&self, m_hat: &JointMatrix, c_hat: &JointMatrix) -> JointMatrix {
        match self.k1 {
            K1Gain::Scalar(k) => JointMatrix::identity(self.dof(), self.dof()) * k,
            K1Gain::Structured { gamma1 } => m_hat * gamma1 - c_hat,
        }
    }

    /// `β = h γ1 + 1`. A scalar `k1` on one joint gives `γ1 = (k1 + Ĉ)/M̂`;
    /// on several joints it falls back to `β = 1`.
    pub fn beta(&self, m_hat: &JointMatrix, c_hat: &JointMatrix) -> f64 {
        match self.k1 {
            K1Gain::Structured { gamma1 } => self.h * gamma1 + 1.0,
            K1Gain::Scalar(k) if self.dof() == 1 => self.h * (k + c_hat[(0, 0)]) / m_hat[(0, 0)] + 1.0,
            K1Gain::Scalar(_) => 1.0,
        }
    }
}

/// Controller memory between samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmittanceState {
    pub qx_prev: JointVector,
    pub qxd_prev: JointVector,
    /// Unprojected proxy velocity `u*_{x,k-1}`.
    pub ux_prev: JointVector,
    pub q_prev: JointVector,
    /// `q_{x,k-1} - q_{k-1}`.
    pub qe_prev: JointVector,
    pub msta: MstaState,
}

impl AdmittanceState {
    /// Proxy on the robot, everything at rest.
    pub fn at_rest(q0: &JointVector) -> Self {
        Self::in_motion(q0, &JointVector::zeros(q0.len()))
    }

    /// Proxy on the robot moving with velocity `qd`.
    pub fn in_motion(q: &JointVector, qd: &JointVector) -> Self {
        let n = q.len();
        Self {
            qx_prev: q.clone(),
            qxd_prev: qd.clone(),
            ux_prev: qd.clone(),
            q_prev: q.clone(),
            qe_prev: JointVector::zeros(n),
            msta: MstaState::zeros(n),
        }
    }

    pub fn dof(&self) -> usize {
        self.q_prev.len()
    }

    pub fn is_finite(&self) -> bool {
        [&self.qx_prev, &self.qxd_prev, &self.ux_prev, &self.q_prev, &self.qe_prev, &self.msta.v]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub q: JointVector,
    /// Joint-space contact torque `Jᵀ f̄_c`.
    pub fc: JointVector,
    /// Desired joint torque.
    pub fd: JointVector,
}

/// Nominal model `M̂`, `Ĉ`, `Ĝ` used by the controller.
pub trait ModelEstimate: Send + Sync {
    fn mass(&self, q: &JointVector) -> JointMatrix;
    fn coriolis(&self, q: &JointVector, qd: &JointVector) -> JointMatrix;
    fn gravity(&self, q: &JointVector) -> JointVector;
}

/// State-independent rough model.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantModel {
    pub m: JointMatrix,
    pub c: JointMatrix,
    pub g: JointVector,
}

impl ConstantModel {
    pub fn diagonal(m: &[f64], c: &[f64]) -> Result<Self> {
        if m.len() != c.len() {
            return Err(Error::DimensionMismatch {
                expected: m.len(),
                got: c.len(),
            });
        }
        if m.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidParameter("mass estimate must be positive definite".into()));
        }
        Ok(Self {
            m: JointMatrix::from_diagonal(&JointVector::from_column_slice(m)),
            c: JointMatrix::from_diagonal(&JointVector::from_column_slice(c)),
            g: JointVector::zeros(m.len()),
        })
    }
}

impl ModelEstimate for ConstantModel {
    fn mass(&self, _q: &JointVector) -> JointMatrix {
        self.m.clone()
    }

    fn coriolis(&self, _q: &JointVector, _qd: &JointVector) -> JointMatrix {
        self.c.clone()
    }

    fn gravity(&self, _q: &JointVector) -> JointVector {
        self.g.clone()
    }
}

/// The true plant used as its own estimate.
pub struct ExactModel<'a>(pub &'a dyn Manipulator);

impl ModelEstimate for ExactModel<'_> {
    fn mass(&self, q: &JointVector) -> JointMatrix {
        self.0.mass(q)
    }

    fn coriolis(&self, q: &JointVector, qd: &JointVector) -> JointMatrix {
        self.0.coriolis(q, qd)
    }

    fn gravity(&self, q: &JointVector) -> JointVector {
        self.0.gravity(q)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub tau_star: JointVector,
    pub tau: JointVector,
    pub ux_star: JointVector,
    pub qx_star: JointVector,
    pub q1_star: JointVector,
    pub s: JointVector,
    pub qe: JointVector,
    pub u_s: JointVector,
    pub saturated: Vec<bool>,
    /// Largest `<τ* - τ, p - F⁻¹τ>` over the `{-1,0,1}^n` probes; `<= 0` for an exact projection.
    pub lambda_vi_residual: f64,
    pub msta: Option<SolverDiagnostics>,
}

impl StepDiagnostics {
    pub fn any_saturated(&self) -> bool {
        self.saturated.iter().any(|s| *s)
    }
}

fn check_len(v: &JointVector, n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: v.len(),
        });
    }
    Ok(())
}

/// `u*_x = (M_x + B_x h)⁻¹ (M_x q̇_{x,k-1} + h (f_c + f_d))`, `q*_x = q_{x,k-1} + h u*_x`.
pub fn proxy_predict(
    state: &AdmittanceState,
    fc: &JointVector,
    fd: &JointVector,
    g: &AdmittanceGains,
) -> Result<(JointVector, JointVector)> {
    let rhs = &g.mx * &state.qxd_prev + (fc + fd) * g.h;
    let ux = (&g.mx + &g.bx * g.h)
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularMatrix("M_x + B_x h"))?;
    let qx = &state.qx_prev + &ux * g.h;
    Ok((ux, qx))
}

/// Returns `(q_e, q̇_e, s)` with `q̇_e` the backward difference of `q_e`.
pub fn sliding_variable(
    qx_star: &JointVector,
    q: &JointVector,
    state: &AdmittanceState,
    g: &AdmittanceGains,
) -> (JointVector, JointVector, JointVector) {
    let qe = qx_star - q;
    let qed = (&qe - &state.qe_prev) / g.h;
    let s = &qed + &qe * g.lambda;
    (qe, qed, s)
}

/// Model values at one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSample {
    pub m: JointMatrix,
    pub c: JointMatrix,
    pub g: JointVector,
}

impl ModelSample {
    /// Evaluates the model at `q` with the backward-difference velocity.
    pub fn evaluate(model: &dyn ModelEstimate, q: &JointVector, state: &AdmittanceState, h: f64) -> Self {
        let qd = (q - &state.q_prev) / h;
        Self {
            m: model.mass(q),
            c: model.coriolis(q, &qd),
            g: model.gravity(q),
        }
    }
}

/// Output of [`inner_loop_candidate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub q1_star: JointVector,
    pub tau_star: JointVector,
    /// `W = M̂/h² + K̂`.
    pub w: JointMatrix,
}

/// Builds `φ_a`, `φ_b`, `q*_1` and `τ* = W (q*_x - q*_1)`.
pub fn inner_loop_candidate(
    qx_star: &JointVector,
    q: &JointVector,
    u_s: &JointVector,
    state: &AdmittanceState,
    model: &ModelSample,
    g: &AdmittanceGains,
) -> Result<Candidate> {
    let h = g.h;
    let n = g.dof();
    let (m, c) = (&model.m, &model.c);
    let k1 = g.k1_matrix(m, c);
    let b = m * g.lambda + &k1;
    let b_hat = &b + c;
    let k = (c + &k1) * g.lambda;
    let w = m / (h * h) + &b_hat / h + k;
    debug_assert_eq!(w.nrows(), n);

    let phi_a = (m + c * h) * q / (h * h) + &b * &state.q_prev / h + &model.g + m * u_s;
    let phi_b = m * (&state.qx_prev + &state.ux_prev * h) / (h * h) + &b_hat * &state.qx_prev / h;
    let lu = w.clone().lu();
    let q1_star = q + lu.solve(&(phi_b - phi_a)).ok_or(Error::SingularMatrix("M_k/h^2 + K_hat"))?;
    let tau_star = &w * (qx_star - &q1_star);
    Ok(Candidate { q1_star, tau_star, w })
}

/// Computes `u_s` and the next integrator state with the configured discretization.
pub fn inner_loop_term(
    s: &JointVector,
    state: &MstaState,
    model: &ModelSample,
    g: &AdmittanceGains,
) -> Result<(JointVector, MstaState, Option<SolverDiagnostics>)> {
    match g.us {
        UsDiscretization::Explicit => {
            let (u, st) = msta_explicit_step(s, state, &g.msta, g.h);
            Ok((u, st, None))
        }
        UsDiscretization::ImplicitVector => {
            let k1 = g.k1_matrix(&model.m, &model.c);
            let out = msta_implicit_step(s, &model.m, &model.c, &k1, &g.msta, g.h, state)?;
            Ok((out.u_s, out.state, out.diag))
        }
        UsDiscretization::ImplicitDecoupled => {
            let beta = g.beta(&model.m, &model.c);
            let out = msta_implicit_decoupled_step_with_beta(s, &g.msta, beta, g.h, state)?;
            Ok((out.u_s, out.state, out.diag))
        }
        UsDiscretization::ScalarImplicit => {
            let beta = g.beta(&model.m, &model.c);
            let out = sta_scalar_implicit_vector(s, &g.msta, beta, g.h, state);
            Ok((out.u_s, out.state, None))
        }
    }
}

fn check_inputs(state: &AdmittanceState, meas: &Measurement, g: &AdmittanceGains) -> Result<()> {
    let n = g.dof();
    for v in [&meas.q, &meas.fc, &meas.fd, &state.q_prev, &state.qx_prev, &state.qxd_prev] {
        check_len(v, n)?;
    }
    check_len(&state.msta.v, n)
}

fn saturation_flags(tau_star: &JointVector, tau: &JointVector) -> Vec<bool> {
    tau_star.iter().zip(tau.iter()).map(|(a, b)| (a - b).abs() > 1e-12).collect()
}

/// One sample of the set-valued admittance controller.
pub fn admittance_step(
    state: &AdmittanceState,
    meas: &Measurement,
    model: &dyn ModelEstimate,
    g: &AdmittanceGains,
) -> Result<(JointVector, AdmittanceState, StepDiagnostics)> {
    check_inputs(state, meas, g)?;
    let (ux_star, qx_star) = proxy_predict(state, &meas.fc, &meas.fd, g)?;
    let (qe, _qed, s) = sliding_variable(&qx_star, &meas.q, state, g);
    let sample = ModelSample::evaluate(model, &meas.q, state, g.h);
    let (u_s, msta, msta_diag) = inner_loop_term(&s, &state.msta, &sample, g)?;
    let cand = inner_loop_candidate(&qx_star, &meas.q, &u_s, state, &sample, g)?;

    let tau = project_box(&cand.tau_star, &g.limits)?;
    // q_x = W⁻¹τ + q*_1 = q*_x - W⁻¹(τ* - τ); exact when nothing is clipped
    let clipped = &cand.tau_star - &tau;
    let qx = if clipped.iter().all(|c| *c == 0.0) {
        qx_star.clone()
    } else {
        &qx_star
            - cand
                .w
                .clone()
                .lu()
                .solve(&clipped)
                .ok_or(Error::SingularMatrix("M_k/h^2 + K_hat"))?
    };
    let qxd = (&qx - &state.qx_prev) / g.h;

    let lambda_vi_residual = variational_residual(&cand.tau_star, &tau, &g.limits, &probe_grid(g.dof()))?;
    let next = AdmittanceState {
        qe_prev: &qx - &meas.q,
        qx_prev: qx,
        qxd_prev: qxd,
        ux_prev: ux_star.clone(),
        q_prev: meas.q.clone(),
        msta,
    };
    let diag = StepDiagnostics {
        saturated: saturation_flags(&cand.tau_star, &tau),
        tau_star: cand.tau_star,
        tau: tau.clone(),
        ux_star,
        qx_star,
        q1_star: cand.q1_star,
        s,
        qe,
        u_s,
        lambda_vi_residual,
        msta: msta_diag,
    };
    Ok((tau, next, diag))
}

/// PD gains of the clamped baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct PdGains {
    pub kp: JointMatrix,
    pub kd: JointMatrix,
}

impl PdGains {
    /// `K_p = k1 Λ`, `K_d = k1 + M̂ Λ`, the stiffness and damping the
    /// proposed loop uses, with a constant model.
    pub fn matching(g: &AdmittanceGains, m_hat: &JointMatrix, c_hat: &JointMatrix) -> Self {
        let k1 = g.k1_matrix(m_hat, c_hat);
        Self {
            kp: &k1 * g.lambda,
            kd: k1 + m_hat * g.lambda,
        }
    }
}

/// Proxy plus PD position loop plus hard clamp. The proxy never sees the
/// clipped torque, so it keeps integrating while the actuator saturates.
pub fn baseline_naive_step(
    state: &AdmittanceState,
    meas: &Measurement,
    model: &dyn ModelEstimate,
    pd: &PdGains,
    g: &AdmittanceGains,
) -> Result<(JointVector, AdmittanceState, StepDiagnostics)> {
    check_inputs(state, meas, g)?;
    let (ux_star, qx_star) = proxy_predict(state, &meas.fc, &meas.fd, g)?;
    let (qe, qed, s) = sliding_variable(&qx_star, &meas.q, state, g);
    let tau_star = &pd.kp * &qe + &pd.kd * &qed + model.gravity(&meas.q);
    let tau = project_box(&tau_star, &g.limits)?;
    let lambda_vi_residual = variational_residual(&tau_star, &tau, &g.limits, &probe_grid(g.dof()))?;
    let next = AdmittanceState {
        qx_prev: qx_star.clone(),
        qxd_prev: ux_star.clone(),
        ux_prev: ux_star.clone(),
        q_prev: meas.q.clone(),
        qe_prev: qe.clone(),
        msta: state.msta.clone(),
    };
    let diag = StepDiagnostics {
        saturated: saturation_flags(&tau_star, &tau),
        tau_star,
        tau: tau.clone(),
        ux_star,
        q1_star: qx_star.clone(),
        qx_star,
        s,
        qe,
        u_s: JointVector::zeros(g.dof()),
        lambda_vi_residual,
        msta: None,
    };
    Ok((tau, next, diag))
}
