//! Discretizations of the (multivariable) super-twisting inner loop
//!
//! `u_s ∈ k2 s/||s||^{1/2} + v`, `v̇ ∈ k3 s/||s|| + k4 s`.
//!
//! * [`msta_explicit_step`]: forward Euler, chatters at the sampling rate.
//! * [`solve_shat_vector`] / [`msta_implicit_step`]: implicit Euler with the
//!   nominal next sliding state `ŝ` obtained from a proximal fixed point.
//! * [`msta_implicit_decoupled_step`]: the same fixed point with the scalar
//!   `β = h γ1 + 1` in place of `M⁻¹A`.
//! * [`sta_scalar_implicit_step`]: closed-form scalar implicit STA.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::setvalued::{prox_norm_quad, sat, sign0, NormQuadWeights};
use crate::{Error, JointMatrix, JointVector, Result};

/// How the `k2 ||·||^{1/2}` gain enters the implicit inclusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootTerm {
    /// `γ_k = k2 ||s_k||^{1/2} + h k3`, evaluated at the current sample.
    #[default]
    Lagged,
    /// `k2 ||ŝ||^{1/2} + h k3`, evaluated at the unknown nominal state.
    /// At `n = 1` this reproduces the closed-form scalar implicit STA.
    Implicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MstaGains {
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    /// Structured gain `k1 = -C_k + γ1 M_k`; gives `β = h γ1 + 1`.
    pub gamma1: f64,
    /// Proximal relaxation of the fixed-point iteration, in `(0, 1)`.
    pub mu: f64,
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    pub root: RootTerm,
}

impl Default for MstaGains {
    fn default() -> Self {
        Self {
            k2: 1.0,
            k3: 1.0,
            k4: 0.0,
            gamma1: 0.0,
            mu: 0.5,
            fp_tol: 1e-12,
            fp_max_iter: 100,
            root: RootTerm::Lagged,
        }
    }
}

impl MstaGains {
    pub fn new(k2: f64, k3: f64, k4: f64) -> Result<Self> {
        let g = Self {
            k2,
            k3,
            k4,
            ..Self::default()
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_gamma1(mut self, gamma1: f64) -> Self {
        self.gamma1 = gamma1;
        self
    }

    pub fn with_root(mut self, root: RootTerm) -> Self {
        self.root = root;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.k2 > 0.0 && self.k2.is_finite()) {
            return bad("k2 must be > 0");
        }
        if !(self.k3 > 0.0 && self.k3.is_finite()) {
            return bad("k3 must be > 0");
        }
        if !(self.k4 >= 0.0 && self.k4.is_finite()) {
            return bad("k4 must be >= 0");
        }
        if !(self.gamma1 >= 0.0 && self.gamma1.is_finite()) {
            return bad("gamma1 must be >= 0");
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return bad("mu must lie in (0, 1)");
        }
        if !(self.fp_tol > 0.0) || self.fp_max_iter == 0 {
            return bad("fp_tol must be > 0 and fp_max_iter >= 1");
        }
        Ok(())
    }

    /// `α2 = k4 / k3`, the quadratic weight inside `Ψ2`.
    pub fn alpha2(&self) -> f64 {
        self.k4 / self.k3
    }

    /// `β = h γ1 + 1`.
    pub fn beta(&self, h: f64) -> f64 {
        h * self.gamma1 + 1.0
    }
}

/// Integrator memory of the twisting term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MstaState {
    pub v: JointVector,
}

impl MstaState {
    pub fn zeros(dim: usize) -> Self {
        Self {
            v: JointVector::zeros(dim),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    /// Nominal next sliding state `ŝ_{k+1}`.
    pub shat: JointVector,
    /// Selection `m̂_2 ∈ ∂Ψ2(ŝ_{k+1})`.
    pub m2: JointVector,
    /// Relaxation actually used (may be halved from the configured value).
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MstaOutput {
    pub u_s: JointVector,
    pub state: MstaState,
    pub diag: Option<SolverDiagnostics>,
}

/// Explicit-Euler MSTA. Uses `v_k` in `u_s` and treats the normalized
/// terms as zero at `s = 0`.
pub fn msta_explicit_step(s: &JointVector, state: &MstaState, g: &MstaGains, h: f64) -> (JointVector, MstaState) {
    let norm = s.norm();
    let (root_dir, unit_dir) = if norm > 0.0 {
        (s / norm.sqrt(), s / norm)
    } else {
        (JointVector::zeros(s.len()), JointVector::zeros(s.len()))
    };
    let u_s = &state.v + root_dir * g.k2;
    let v = &state.v + (unit_dir * g.k3 + s * g.k4) * h;
    (u_s, MstaState { v })
}

/// The linear part `P` of `P ŝ + h·gain·m̂ = s`.
enum Linear<'a> {
    Scaled(f64),
    Matrix(&'a JointMatrix),
}

impl Linear<'_> {
    fn apply(&self, x: &JointVector) -> JointVector {
        match self {
            Linear::Scaled(beta) => x * *beta,
            Linear::Matrix(p) => *p * x,
        }
    }
}

/// Radial law of the nonsmooth term: `h·gain(r)·(1 + α2 r)·x/r`.
#[derive(Clone, Copy)]
struct Radial {
    h: f64,
    k2: f64,
    k3: f64,
    alpha2: f64,
    /// `Some(γ_k)` for the lagged law, `None` for the implicit root term.
    lagged_gamma: Option<f64>,
}

impl Radial {
    fn new(s: &JointVector, g: &MstaGains, h: f64) -> Self {
        let lagged_gamma = match g.root {
            RootTerm::Lagged => Some(g.k2 * s.norm().sqrt() + h * g.k3),
            RootTerm::Implicit => None,
        };
        Self {
            h,
            k2: g.k2,
            k3: g.k3,
            alpha2: g.alpha2(),
            lagged_gamma,
        }
    }

    /// `gain(r)`: `γ_k` or `k2 sqrt(r) + h k3`.
    fn gain(&self, r: f64) -> f64 {
        self.lagged_gamma
            .unwrap_or_else(|| self.k2 * r.sqrt() + self.h * self.k3)
    }

    /// Dead-zone radius `h·gain(0)`.
    fn threshold(&self) -> f64 {
        self.h * self.gain(0.0)
    }

    /// `prox` of index `c` of the radial potential.
    fn prox(&self, z: &JointVector, c: f64) -> JointVector {
        let norm = z.norm();
        if norm <= c * self.threshold() {
            return JointVector::zeros(z.len());
        }
        if let Some(gamma) = self.lagged_gamma {
            let hg = self.h * gamma;
            return prox_norm_quad(z, c, NormQuadWeights { a: hg, b: hg * self.alpha2 });
        }
        z * (self.radius(norm, c) / norm)
    }

    /// Solves `r + c h (k2 sqrt(r) + h k3)(1 + α2 r) = rho` for `r > 0`
    /// (implicit root term, outside the dead zone).
    fn radius(&self, rho: f64, c: f64) -> f64 {
        let (a1, a0) = (c * self.h * self.k2, c * self.h * self.h * self.k3);
        let excess = rho - a0;
        // α2 = 0: quadratic in x = sqrt(r), written without cancellation
        let x0 = 2.0 * excess / (a1 + (a1 * a1 + 4.0 * excess).sqrt());
        if self.alpha2 == 0.0 {
            return x0 * x0;
        }
        // safeguarded Newton on x = sqrt(r)
        let f = |x: f64| x * x + (a1 * x + a0) * (1.0 + self.alpha2 * x * x) - rho;
        let df = |x: f64| 2.0 * x + a1 * (1.0 + self.alpha2 * x * x) + (a1 * x + a0) * 2.0 * self.alpha2 * x;
        let (mut lo, mut hi) = (0.0, x0);
        let mut x = x0;
        for _ in 0..200 {
            let fx = f(x);
            if fx > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let mut next = x - fx / df(x);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - x).abs() <= 1e-16 * x.max(1e-300) {
                x = next;
                break;
            }
            x = next;
        }
        x * x
    }

    /// Residual map `P x + h·gain(r)(1 + α2 r) x/r - s` and its Jacobian, `x ≠ 0`.
    fn newton_step(&self, p: &Linear, x: &JointVector, s: &JointVector) -> Option<JointVector> {
        let n = x.len();
        let r = x.norm();
        if r == 0.0 {
            return None;
        }
        let gain = self.gain(r);
        let dgain = if self.lagged_gamma.is_some() { 0.0 } else { 0.5 * self.k2 / r.sqrt() };
        let phi1 = self.h * gain * (1.0 + self.alpha2 * r);
        let phi2 = self.h * (dgain * (1.0 + self.alpha2 * r) + gain * self.alpha2);
        let f = p.apply(x) + x * (phi1 / r) - s;
        let unit = x / r;
        let outer = &unit * unit.transpose();
        let ident = JointMatrix::identity(n, n);
        let p_mat = match p {
            Linear::Scaled(beta) => &ident * *beta,
            Linear::Matrix(m) => (*m).clone(),
        };
        let jac = p_mat + (&ident - &outer) * (phi1 / r) + outer * phi2;
        jac.lu().solve(&f).map(|dx| x - dx)
    }
}

fn is_scaled_identity(p: &JointMatrix) -> Option<f64> {
    let d = p[(0, 0)];
    let n = p.nrows();
    for i in 0..n {
        for j in 0..n {
            let want = if i == j { d } else { 0.0 };
            if p[(i, j)] != want {
                return None;
            }
        }
    }
    Some(d)
}

/// Largest relaxation `μ' = μ / 2^j` for which `P + Pᵀ - μ' PᵀP ≻ 0`.
fn admissible_mu(p: &JointMatrix, mu: f64) -> Result<f64> {
    let sym = p + p.transpose();
    let gram = p.transpose() * p;
    let mut m = mu;
    for _ in 0..40 {
        let test = &sym - &gram * m;
        let eig = SymmetricEigen::new(test);
        if eig.eigenvalues.min() > 0.0 {
            return Ok(m);
        }
        m *= 0.5;
    }
    Err(Error::InvalidParameter(
        "no relaxation mu satisfies A + A^T - mu A^T A > 0 (P + P^T not positive definite)".into(),
    ))
}

fn solve(s: &JointVector, p: Linear, g: &MstaGains, h: f64) -> Result<SolverDiagnostics> {
    let n = s.len();
    let law = Radial::new(s, g, h);
    let finish = |shat: JointVector, iterations, residual, mu| {
        let gain = law.gain(shat.norm());
        let m2 = (s - p.apply(&shat)) / (h * gain);
        SolverDiagnostics {
            iterations,
            residual,
            converged: true,
            shat,
            m2,
            mu,
        }
    };

    // dead zone: ŝ = 0 solves the inclusion iff ||s|| <= h·gain(0)
    if s.norm() <= law.threshold() {
        return Ok(finish(JointVector::zeros(n), 1, 0.0, g.mu));
    }

    let matrix = match p {
        Linear::Scaled(beta) => {
            let shat = law.prox(&(s / beta), 1.0 / beta);
            return Ok(finish(shat, 1, 0.0, g.mu));
        }
        Linear::Matrix(m) => m,
    };
    if let Some(beta) = is_scaled_identity(matrix) {
        let shat = law.prox(&(s / beta), 1.0 / beta);
        return Ok(finish(shat, 1, 0.0, g.mu));
    }

    let mu = admissible_mu(matrix, g.mu)?;
    let tol = g.fp_tol * (1.0 + s.norm());
    let fixed_point = |x: &JointVector| law.prox(&(x - (matrix * x - s) * mu), mu);
    let residual_at = |x: &JointVector| (x - fixed_point(x)).norm();

    let mean_diag = matrix.trace() / n as f64;
    let mut x = law.prox(&(s / mean_diag), 1.0 / mean_diag);
    let mut res = residual_at(&x);
    let mut iterations = 0;
    while res > tol {
        if iterations >= g.fp_max_iter {
            return Err(Error::SolverNonConvergence {
                iterations,
                residual: res,
            });
        }
        iterations += 1;
        let mut next = fixed_point(&x);
        let mut next_res = residual_at(&next);
        if let Some(candidate) = law.newton_step(&p, &next, s) {
            let cand_res = residual_at(&candidate);
            if cand_res < next_res {
                next = candidate;
                next_res = cand_res;
            }
        }
        x = next;
        res = next_res;
    }
    Ok(finish(x, iterations.max(1), res, mu))
}

/// Solves `ŝ = Prox_{μ h γ_k Ψ2}((I - μ M⁻¹A) ŝ + μ s)` and recovers
/// `m̂_2 = -(M⁻¹A ŝ - s) / (h γ_k)`.
pub fn solve_shat_vector(
    s: &JointVector,
    a_k: &JointMatrix,
    m_k: &JointMatrix,
    g: &MstaGains,
    h: f64,
) -> Result<SolverDiagnostics> {
    let p = m_k
        .clone()
        .lu()
        .solve(a_k)
        .ok_or(Error::SingularMatrix("inertia estimate M_k"))?;
    solve(s, Linear::Matrix(&p), g, h)
}

/// `A_k = M_k + h C_k + h k1`.
pub fn implicit_a_matrix(m_k: &JointMatrix, c_k: &JointMatrix, k1: &JointMatrix, h: f64) -> JointMatrix {
    m_k + (c_k + k1) * h
}

/// `k1 = -C_k + γ1 M_k`.
pub fn structured_k1(m_k: &JointMatrix, c_k: &JointMatrix, gamma1: f64) -> JointMatrix {
    m_k * gamma1 - c_k
}

fn implicit_output(s: &JointVector, diag: SolverDiagnostics, g: &MstaGains, h: f64, state: &MstaState) -> MstaOutput {
    let coef = match g.root {
        RootTerm::Lagged => g.k2 * s.norm().sqrt(),
        RootTerm::Implicit => g.k2 * diag.shat.norm().sqrt() + h * g.k3,
    };
    let v = &state.v + &diag.m2 * (h * g.k3);
    let u_s = &diag.m2 * coef + &v;
    MstaOutput {
        u_s,
        state: MstaState { v },
        diag: Some(diag),
    }
}

/// Implicit-Euler MSTA with matrix coupling `A_k = M_k + h C_k + h k1`:
/// `u_s = k2 ||s||^{1/2} m̂_2 + v_{k+1}`, `v_{k+1} = v_k + h k3 m̂_2`.
pub fn msta_implicit_step(
    s: &JointVector,
    m_k: &JointMatrix,
    c_k: &JointMatrix,
    k1: &JointMatrix,
    g: &MstaGains,
    h: f64,
    state: &MstaState,
) -> Result<MstaOutput> {
    let a_k = implicit_a_matrix(m_k, c_k, k1, h);
    let diag = solve_shat_vector(s, &a_k, m_k, g, h)?;
    Ok(implicit_output(s, diag, g, h, state))
}

/// Implicit MSTA with the decoupling `M⁻¹A = β I`, `β = h γ1 + 1`.
pub fn msta_implicit_decoupled_step(s: &JointVector, g: &MstaGains, h: f64, state: &MstaState) -> Result<MstaOutput> {
    msta_implicit_decoupled_step_with_beta(s, g, g.beta(h), h, state)
}

pub(crate) fn msta_implicit_decoupled_step_with_beta(
    s: &JointVector,
    g: &MstaGains,
    beta: f64,
    h: f64,
    state: &MstaState,
) -> Result<MstaOutput> {
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be > 0, got {beta}")));
    }
    let diag = solve(s, Linear::Scaled(beta), g, h)?;
    Ok(implicit_output(s, diag, g, h, state))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarStaOutput {
    pub u_s: f64,
    pub v: f64,
    pub phi1: f64,
    pub phi2: f64,
}

/// Closed-form implicit-Euler STA for a scalar sliding variable.
///
/// `Φ2 = sat(s / (h² k3))` and
/// `Φ1 = sign(s) ((h k3 / k2) sat(|s| / (h² k3)) + |ŝ|^{1/2})`, where
/// `|ŝ|^{1/2}` is the positive root of `β x² + h k2 x + h² k3 = |s|`
/// (zero inside the discrete sliding band `|s| <= h² k3`).
pub fn sta_scalar_implicit_step(s: f64, g: &MstaGains, beta: f64, h: f64, v: f64) -> ScalarStaOutput {
    let band = h * h * g.k3;
    let phi2 = sat(s / band);
    let root = (h * h * g.k2 * g.k2 + 4.0 * beta * (s.abs() - band).max(0.0)).sqrt();
    let sqrt_shat = -h * g.k2 / (2.0 * beta) + root / (2.0 * beta);
    let phi1 = sign0(s) * ((h * g.k3 / g.k2) * sat(s.abs() / band) + sqrt_shat);
    let v_next = v + h * g.k3 * phi2;
    ScalarStaOutput {
        u_s: g.k2 * phi1 + v_next,
        v: v_next,
        phi1,
        phi2,
    }
}

/// Elementwise scalar implicit STA on a vector sliding variable.
pub fn sta_scalar_implicit_vector(s: &JointVector, g: &MstaGains, beta: f64, h: f64, state: &MstaState) -> MstaOutput {
    let mut u_s = JointVector::zeros(s.len());
    let mut v = JointVector::zeros(s.len());
    for i in 0..s.len() {
        let out = sta_scalar_implicit_step(s[i], g, beta, h, state.v[i]);
        u_s[i] = out.u_s;
        v[i] = out.v;
    }
    MstaOutput {
        u_s,
        state: MstaState { v },
        diag: None,
    }
}
