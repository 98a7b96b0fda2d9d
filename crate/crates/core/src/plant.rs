//! Simulated plants and environments.
//!
//! All plants are written as `M(q) q̈ + C(q, q̇) q̇ + G(q) = κ τ + f_c + f_e + F_int(q̇)`
//! where `F_int` is an internal force (linear-motor friction), `κ` an input
//! gain, and `f_c = Jᵀ f̄_c` the joint image of a planar contact wrench.

use serde::{Deserialize, Serialize};

use crate::setvalued::{sign0, BoxConstraint};
use crate::{Error, JointMatrix, JointVector, Result};

/// Planar end-effector quantity `(x, y)`.
pub type Planar = [f64; 2];

pub trait Manipulator: Send + Sync {
    fn dof(&self) -> usize;
    fn mass(&self, q: &JointVector) -> JointMatrix;
    fn coriolis(&self, q: &JointVector, qd: &JointVector) -> JointMatrix;
    fn gravity(&self, q: &JointVector) -> JointVector;
    fn ee_position(&self, q: &JointVector) -> Planar;
    /// `2 × n` map from joint rates to end-effector `(ẋ, ẏ)`.
    fn jacobian(&self, q: &JointVector) -> JointMatrix;
    fn torque_limits(&self) -> &BoxConstraint;

    /// Driver gain `κ` multiplying the commanded input.
    fn input_gain(&self) -> f64 {
        1.0
    }

    /// Internal forces not captured by `C q̇` (friction, cogging).
    fn internal_force(&self, state: &PlantState) -> JointVector {
        JointVector::zeros(state.q.len())
    }

    fn ee_velocity(&self, state: &PlantState) -> Planar {
        let v = self.jacobian(&state.q) * &state.qd;
        [v[0], v[1]]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub q: JointVector,
    pub qd: JointVector,
}

impl PlantState {
    pub fn at_rest(q: JointVector) -> Self {
        let n = q.len();
        Self {
            q,
            qd: JointVector::zeros(n),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.qd.iter()).all(|v| v.is_finite())
    }
}

/// Unilateral linear spring along `y` with Coulomb friction along `x`.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentModel {
    pub ks_N_per_m: f64,
    pub ys_m: f64,
    pub mu_fric: f64,
}

impl EnvironmentModel {
    pub fn new(ks: f64, ys: f64, mu: f64) -> Result<Self> {
        let env = Self {
            ks_N_per_m: ks,
            ys_m: ys,
            mu_fric: mu,
        };
        env.validate()?;
        Ok(env)
    }

    /// No surface at all.
    pub fn free_space() -> Self {
        Self {
            ks_N_per_m: 0.0,
            ys_m: 0.0,
            mu_fric: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ks_N_per_m >= 0.0 && self.mu_fric >= 0.0 && self.ys_m.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "environment needs ks >= 0 and mu >= 0, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// `f_y = max(0, k_s (y_s - y))`, `f_x = -μ f_y sign(ẋ)`.
pub fn contact_wrench(ee_pos: Planar, ee_vel: Planar, env: &EnvironmentModel) -> Planar {
    let fy = (env.ks_N_per_m * (env.ys_m - ee_pos[1])).max(0.0);
    let fx = -env.mu_fric * fy * sign0(ee_vel[0]);
    [fx, fy]
}

/// `f_c = J(q)ᵀ f̄_c`.
pub fn joint_contact_torque(model: &dyn Manipulator, q: &JointVector, wrench: &[f64]) -> Result<JointVector> {
    let jac = model.jacobian(q);
    if wrench.len() != jac.nrows() {
        return Err(Error::DimensionMismatch {
            expected: jac.nrows(),
            got: wrench.len(),
        });
    }
    Ok(jac.transpose() * JointVector::from_column_slice(wrench))
}

/// `q̈ = M⁻¹(κτ + f_c + f_e + F_int - C q̇ - G)`.
pub fn forward_dynamics(
    model: &dyn Manipulator,
    state: &PlantState,
    tau: &JointVector,
    fc: &JointVector,
    fe: &JointVector,
) -> Result<JointVector> {
    let rhs = tau * model.input_gain() + fc + fe + model.internal_force(state)
        - model.coriolis(&state.q, &state.qd) * &state.qd
        - model.gravity(&state.q);
    model
        .mass(&state.q)
        .cholesky()
        .map(|chol| chol.solve(&rhs))
        .ok_or(Error::SingularMatrix("plant mass matrix (not positive definite)"))
}

/// Unmeasured joint disturbance `f_e(t, state)`.
pub trait Disturbance: Send + Sync {
    fn torque(&self, t: f64, state: &PlantState) -> JointVector;
}

impl<F> Disturbance for F
where
    F: Fn(f64, &PlantState) -> JointVector + Send + Sync,
{
    fn torque(&self, t: f64, state: &PlantState) -> JointVector {
        self(t, state)
    }
}

pub struct NoDisturbance;

impl Disturbance for NoDisturbance {
    fn torque(&self, _t: f64, state: &PlantState) -> JointVector {
        JointVector::zeros(state.q.len())
    }
}

/// Sum of sinusoids per joint; bounded with bounded derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct SineDisturbance {
    /// `(amplitude, omega, phase)` terms, applied to every joint scaled by `direction`.
    pub terms: Vec<(f64, f64, f64)>,
    pub direction: JointVector,
}

impl Disturbance for SineDisturbance {
    fn torque(&self, t: f64, _state: &PlantState) -> JointVector {
        let value: f64 = self.terms.iter().map(|(a, w, p)| a * (w * t + p).sin()).sum();
        &self.direction * value
    }
}

/// Semi-implicit Euler substeps under a zero-order-hold torque. The contact
/// wrench and disturbance are re-evaluated at every substep.
#[allow(clippy::too_many_arguments)]
pub fn integrate_substep(
    model: &dyn Manipulator,
    state: &PlantState,
    tau_held: &JointVector,
    env: &EnvironmentModel,
    disturbance: &dyn Disturbance,
    t: f64,
    dt_sub: f64,
    n_sub: usize,
) -> Result<PlantState> {
    let mut st = state.clone();
    for i in 0..n_sub {
        let ti = t + i as f64 * dt_sub;
        let wrench = contact_wrench(model.ee_position(&st.q), model.ee_velocity(&st), env);
        let fc = joint_contact_torque(model, &st.q, &wrench)?;
        let fe = disturbance.torque(ti, &st);
        let qdd = forward_dynamics(model, &st, tau_held, &fc, &fe)?;
        st.qd += qdd * dt_sub;
        st.q += &st.qd * dt_sub;
        if !st.is_finite() {
            return Err(Error::SimulationBlowUp { step: i, t: ti + dt_sub });
        }
    }
    Ok(st)
}

// ---------------------------------------------------------------------------
// concrete plants
// ---------------------------------------------------------------------------

/// Single rotary link: `M = J_s + m lc² + a sin q`, `C = c cos q`, `G = m g lc cos q`.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OneDofParams {
    pub m1_kg: f64,
    pub l1_m: f64,
    pub inertia_perturbation: f64,
    pub coriolis_coef: f64,
    pub g_m_per_s2: f64,
    pub torque_limit_Nm: f64,
}

impl Default for OneDofParams {
    fn default() -> Self {
        Self {
            m1_kg: 5.0,
            l1_m: 0.5,
            inertia_perturbation: 0.2,
            coriolis_coef: 0.1,
            g_m_per_s2: 9.81,
            torque_limit_Nm: 3.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OneDofArm {
    pub params: OneDofParams,
    limits: BoxConstraint,
}

impl OneDofArm {
    pub fn new(params: OneDofParams) -> Result<Self> {
        if !(params.m1_kg > 0.0 && params.l1_m > 0.0) {
            return Err(Error::InvalidParameter("one-DoF arm needs m1 > 0 and l1 > 0".into()));
        }
        let limits = BoxConstraint::new(vec![params.torque_limit_Nm])?;
        Ok(Self { params, limits })
    }

    fn lc1(&self) -> f64 {
        self.params.l1_m / 2.0
    }
}

impl Manipulator for OneDofArm {
    fn dof(&self) -> usize {
        1
    }

    fn mass(&self, q: &JointVector) -> JointMatrix {
        let p = &self.params;
        let js = p.m1_kg * p.l1_m * p.l1_m / 3.0;
        let lc = self.lc1();
        JointMatrix::from_element(1, 1, js + p.m1_kg * lc * lc + p.inertia_perturbation * q[0].sin())
    }

    fn coriolis(&self, q: &JointVector, _qd: &JointVector) -> JointMatrix {
        JointMatrix::from_element(1, 1, self.params.coriolis_coef * q[0].cos())
    }

    fn gravity(&self, q: &JointVector) -> JointVector {
        let p = &self.params;
        JointVector::from_element(1, p.m1_kg * p.g_m_per_s2 * self.lc1() * q[0].cos())
    }

    fn ee_position(&self, q: &JointVector) -> Planar {
        let l = self.params.l1_m;
        [l * q[0].cos(), l * q[0].sin()]
    }

    fn jacobian(&self, q: &JointVector) -> JointMatrix {
        let l = self.params.l1_m;
        JointMatrix::from_column_slice(2, 1, &[-l * q[0].sin(), l * q[0].cos()])
    }

    fn torque_limits(&self) -> &BoxConstraint {
        &self.limits
    }
}

/// Planar two-link arm, uniform links; `J1`, `J2` are link inertias about
/// their proximal joints.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TwoLinkParams {
    pub m1_kg: f64,
    pub m2_kg: f64,
    pub l1_m: f64,
    pub l2_m: f64,
    pub J1_kg_m2: f64,
    pub J2_kg_m2: f64,
    pub g_m_per_s2: f64,
    pub torque_limits_Nm: [f64; 2],
}

impl Default for TwoLinkParams {
    fn default() -> Self {
        Self {
            m1_kg: 6.0,
            m2_kg: 9.0,
            l1_m: 0.4,
            l2_m: 0.6,
            J1_kg_m2: 0.32,
            J2_kg_m2: 1.08,
            g_m_per_s2: 9.81,
            torque_limits_Nm: [3.0, 4.0],
        }
    }
}

#[derive(Debug, Clone)]
pub struct TwoLinkArm {
    pub params: TwoLinkParams,
    limits: BoxConstraint,
}

impl TwoLinkArm {
    pub fn new(params: TwoLinkParams) -> Result<Self> {
        let p = &params;
        if [p.m1_kg, p.m2_kg, p.l1_m, p.l2_m, p.J1_kg_m2, p.J2_kg_m2]
            .iter()
            .any(|v| !(*v > 0.0))
        {
            return Err(Error::InvalidParameter("two-link arm needs positive masses, lengths and inertias".into()));
        }
        let limits = BoxConstraint::new(params.torque_limits_Nm.to_vec())?;
        Ok(Self { params, limits })
    }

    /// `m2 l1 lc2`, the coupling coefficient.
    fn coupling(&self) -> f64 {
        self.params.m2_kg * self.params.l1_m * self.params.l2_m / 2.0
    }
}

impl Manipulator for TwoLinkArm {
    fn dof(&self) -> usize {
        2
    }

    fn mass(&self, q: &JointVector) -> JointMatrix {
        let p = &self.params;
        let c2 = q[1].cos();
        let a = self.coupling();
        let m11 = p.J1_kg_m2 + p.J2_kg_m2 + p.m2_kg * p.l1_m * p.l1_m + 2.0 * a * c2;
        let m12 = p.J2_kg_m2 + a * c2;
        JointMatrix::from_row_slice(2, 2, &[m11, m12, m12, p.J2_kg_m2])
    }

    fn coriolis(&self, q: &JointVector, qd: &JointVector) -> JointMatrix {
        let hc = -self.coupling() * q[1].sin();
        JointMatrix::from_row_slice(2, 2, &[hc * qd[1], hc * (qd[0] + qd[1]), -hc * qd[0], 0.0])
    }

    fn gravity(&self, q: &JointVector) -> JointVector {
        let p = &self.params;
        let g = p.g_m_per_s2;
        let c1 = q[0].cos();
        let c12 = (q[0] + q[1]).cos();
        let g2 = p.m2_kg * g * p.l2_m / 2.0 * c12;
        JointVector::from_column_slice(&[(p.m1_kg * p.l1_m / 2.0 + p.m2_kg * p.l1_m) * g * c1 + g2, g2])
    }

    fn ee_position(&self, q: &JointVector) -> Planar {
        let p = &self.params;
        let q12 = q[0] + q[1];
        [
            p.l1_m * q[0].cos() + p.l2_m * q12.cos(),
            p.l1_m * q[0].sin() + p.l2_m * q12.sin(),
        ]
    }

    fn jacobian(&self, q: &JointVector) -> JointMatrix {
        let p = &self.params;
        let (s1, c1) = q[0].sin_cos();
        let (s12, c12) = (q[0] + q[1]).sin_cos();
        JointMatrix::from_row_slice(
            2,
            2,
            &[
                -p.l1_m * s1 - p.l2_m * s12,
                -p.l2_m * s12,
                p.l1_m * c1 + p.l2_m * c12,
                p.l2_m * c12,
            ],
        )
    }

    fn torque_limits(&self) -> &BoxConstraint {
        &self.limits
    }
}

/// Vertical linear motor: `M q̈ + C q̇ = κ u - M g + F_f + f_c`, with
/// `F_f = -F_coulomb sign(q̇) - b q̇`. The stage moves along `y`.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearMotorParams {
    pub mass_kg: f64,
    pub viscous_C_N_s_per_m: f64,
    pub kappa: f64,
    pub coulomb_N: f64,
    pub friction_viscous_N_s_per_m: f64,
    pub g_m_per_s2: f64,
    pub force_limit_N: f64,
}

impl Default for LinearMotorParams {
    fn default() -> Self {
        Self {
            mass_kg: 0.3,
            viscous_C_N_s_per_m: 2.0,
            kappa: 1.0,
            coulomb_N: 1.0,
            friction_viscous_N_s_per_m: 5.0,
            g_m_per_s2: 9.81,
            force_limit_N: 12.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinearMotor {
    pub params: LinearMotorParams,
    limits: BoxConstraint,
}

impl LinearMotor {
    pub fn new(params: LinearMotorParams) -> Result<Self> {
        if !(params.mass_kg > 0.0 && params.viscous_C_N_s_per_m >= 0.0 && params.kappa > 0.0) {
            return Err(Error::InvalidParameter("linear motor needs M > 0, C >= 0, kappa > 0".into()));
        }
        let limits = BoxConstraint::new(vec![params.force_limit_N])?;
        Ok(Self { params, limits })
    }
}

impl Manipulator for LinearMotor {
    fn dof(&self) -> usize {
        1
    }

    fn mass(&self, _q: &JointVector) -> JointMatrix {
        JointMatrix::from_element(1, 1, self.params.mass_kg)
    }

    fn coriolis(&self, _q: &JointVector, _qd: &JointVector) -> JointMatrix {
        JointMatrix::from_element(1, 1, self.params.viscous_C_N_s_per_m)
    }

    fn gravity(&self, _q: &JointVector) -> JointVector {
        JointVector::from_element(1, self.params.mass_kg * self.params.g_m_per_s2)
    }

    fn ee_position(&self, q: &JointVector) -> Planar {
        [0.0, q[0]]
    }

    fn jacobian(&self, _q: &JointVector) -> JointMatrix {
        JointMatrix::from_column_slice(2, 1, &[0.0, 1.0])
    }

    fn torque_limits(&self) -> &BoxConstraint {
        &self.limits
    }

    fn input_gain(&self) -> f64 {
        self.params.kappa
    }

    fn internal_force(&self, state: &PlantState) -> JointVector {
        let v = state.qd[0];
        JointVector::from_element(
            1,
            -self.params.coulomb_N * sign0(v) - self.params.friction_viscous_N_s_per_m * v,
        )
    }
}

/// Unit-less double integrator `m ẍ = τ + f_e`, moving along `x`.
#[derive(Debug, Clone)]
pub struct DoubleIntegrator {
    pub mass: f64,
    limits: BoxConstraint,
}

impl DoubleIntegrator {
    pub fn new(mass: f64, limit: f64) -> Result<Self> {
        if !(mass > 0.0) {
            return Err(Error::InvalidParameter("double integrator needs mass > 0".into()));
        }
        Ok(Self {
            mass,
            limits: BoxConstraint::new(vec![limit])?,
        })
    }
}

impl Manipulator for DoubleIntegrator {
    fn dof(&self) -> usize {
        1
    }

    fn mass(&self, _q: &JointVector) -> JointMatrix {
        JointMatrix::from_element(1, 1, self.mass)
    }

    fn coriolis(&self, _q: &JointVector, _qd: &JointVector) -> JointMatrix {
        JointMatrix::zeros(1, 1)
    }

    fn gravity(&self, _q: &JointVector) -> JointVector {
        JointVector::zeros(1)
    }

    fn ee_position(&self, q: &JointVector) -> Planar {
        [q[0], 0.0]
    }

    fn jacobian(&self, _q: &JointVector) -> JointMatrix {
        JointMatrix::from_column_slice(2, 1, &[1.0, 0.0])
    }

    fn torque_limits(&self) -> &BoxConstraint {
        &self.limits
    }
}

/// Serializable plant selector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlantSpec {
    OneDof(OneDofParams),
    TwoLink(TwoLinkParams),
    LinearMotor(LinearMotorParams),
    #[allow(non_snake_case)]
    DoubleIntegrator { mass_kg: f64, limit_N: f64 },
}

impl PlantSpec {
    pub fn build(&self) -> Result<Box<dyn Manipulator>> {
        Ok(match self {
            PlantSpec::OneDof(p) => Box::new(OneDofArm::new(p.clone())?),
            PlantSpec::TwoLink(p) => Box::new(TwoLinkArm::new(p.clone())?),
            PlantSpec::LinearMotor(p) => Box::new(LinearMotor::new(p.clone())?),
            PlantSpec::DoubleIntegrator { mass_kg, limit_N } => Box::new(DoubleIntegrator::new(*mass_kg, *limit_N)?),
        })
    }

    pub fn dof(&self) -> usize {
        match self {
            PlantSpec::TwoLink(_) => 2,
            _ => 1,
        }
    }
}
