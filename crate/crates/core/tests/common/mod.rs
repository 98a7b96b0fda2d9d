//! Reference computations shared by the integration tests. Nothing here
//! calls into the library's numerical routines.

#![allow(dead_code)]

pub mod checks;
pub mod props;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

/// Minimizes `||x - z||²/(2λ) + a||x|| + (b/2)||x||²` by damped Newton in
/// `n` dimensions, started at `z`.
pub fn prox_newton(z: &DVector<f64>, lambda: f64, a: f64, b: f64) -> DVector<f64> {
    let n = z.len();
    let obj = |x: &DVector<f64>| (x - z).norm_squared() / (2.0 * lambda) + a * x.norm() + 0.5 * b * x.norm_squared();
    // zero is optimal iff its subdifferential `-z/λ + a B` contains 0
    if z.norm() / lambda <= a {
        return DVector::zeros(n);
    }
    let mut x = z.clone();
    for _ in 0..100 {
        let r = x.norm();
        let u = &x / r;
        let grad = (&x - z) / lambda + &u * a + &x * b;
        if grad.norm() < 1e-15 * (1.0 + z.norm() / lambda) {
            break;
        }
        let eye = DMatrix::<f64>::identity(n, n);
        let hess = &eye * (1.0 / lambda + b) + (&eye - &u * u.transpose()) * (a / r);
        let step = hess.lu().solve(&grad).expect("hessian is positive definite");
        let f0 = obj(&x);
        let mut t = 1.0;
        loop {
            let cand = &x - &step * t;
            if cand.norm() > 0.0 && obj(&cand) <= f0 - 1e-4 * t * grad.dot(&step) {
                x = cand;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return x;
            }
        }
    }
    x
}

/// `|ŝ|` from `β|ŝ| + h k2 |ŝ|^{1/2} + h² k3 = |s|` by bisection, or zero
/// inside the band `|s| <= h² k3`.
pub fn shat_abs_bisection(s: f64, k2: f64, k3: f64, beta: f64, h: f64) -> f64 {
    let excess = s.abs() - h * h * k3;
    if excess <= 0.0 {
        return 0.0;
    }
    let f = |r: f64| beta * r + h * k2 * r.sqrt() - excess;
    let (mut lo, mut hi) = (0.0f64, excess / beta);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// One scalar implicit STA sample through the inclusion
/// `s ∈ β ŝ + h (k2 |ŝ|^{1/2} + h k3) Sgn(ŝ)`: returns `(u_s, v_next)`.
pub fn sta_by_bisection(s: f64, k2: f64, k3: f64, beta: f64, h: f64, v: f64) -> (f64, f64) {
    let r = shat_abs_bisection(s, k2, k3, beta, h);
    let m = if r > 0.0 { s.signum() } else { s / (h * h * k3) };
    let v_next = v + h * k3 * m;
    ((k2 * r.sqrt() + h * k3) * m + v_next, v_next)
}

/// Controller memory for [`scalar_step`].
#[derive(Debug, Clone, Copy)]
pub struct ScalarMemory {
    pub qx: f64,
    pub qxd: f64,
    pub ux: f64,
    pub q: f64,
    pub qe: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ScalarGains {
    pub mx: f64,
    pub bx: f64,
    pub lambda: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub limit: f64,
    pub h: f64,
    pub m_hat: f64,
    pub c_hat: f64,
    pub g_hat: f64,
}

/// One joint, constant model, closed-form implicit STA. Returns
/// `(τ*, τ, next memory)`.
pub fn scalar_step(mem: &ScalarMemory, q: f64, fc: f64, fd: f64, p: &ScalarGains) -> (f64, f64, ScalarMemory) {
    let h = p.h;
    let ux_star = (p.mx * mem.qxd + h * (fc + fd)) / (p.mx + h * p.bx);
    let qx_star = mem.qx + h * ux_star;
    let qe = qx_star - q;
    let s = (qe - mem.qe) / h + p.lambda * qe;

    let beta = 1.0 + h * (p.k1 + p.c_hat) / p.m_hat;
    let band = h * h * p.k3;
    let m2 = if s.abs() <= band { s / band } else { s.signum() };
    let disc = (h * p.k2).powi(2) + 4.0 * beta * (s.abs() - band).max(0.0);
    let root = (disc.sqrt() - h * p.k2) / (2.0 * beta);
    let v_next = mem.v + h * p.k3 * m2;
    let us = p.k2 * root * s.signum() + h * p.k3 * m2 + v_next;

    let big_b = p.m_hat * p.lambda + p.k1;
    let b_hat = big_b + p.c_hat;
    let w = p.m_hat / (h * h) + b_hat / h + (p.c_hat + p.k1) * p.lambda;
    let phi_a = (p.m_hat + p.c_hat * h) * q / (h * h) + big_b * mem.q / h + p.g_hat + p.m_hat * us;
    let phi_b = p.m_hat * (mem.qx + h * mem.ux) / (h * h) + b_hat * mem.qx / h;
    let q1_star = q + (phi_b - phi_a) / w;
    let tau_star = w * (qx_star - q1_star);
    let tau = tau_star.max(-p.limit).min(p.limit);
    let qx = q1_star + tau / w;
    let next = ScalarMemory {
        qx,
        qxd: (qx - mem.qx) / h,
        ux: ux_star,
        q,
        qe: qx - q,
        v: v_next,
    };
    (tau_star, tau, next)
}

/// Two joints, fixed model matrices, explicit-Euler MSTA.
#[derive(Debug, Clone, Copy)]
pub struct PlanarGains {
    pub mx: Matrix2<f64>,
    pub bx: Matrix2<f64>,
    pub lambda: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub limits: Vector2<f64>,
    pub h: f64,
    pub m_hat: Matrix2<f64>,
    pub c_hat: Matrix2<f64>,
    pub g_hat: Vector2<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct PlanarMemory {
    pub qx: Vector2<f64>,
    pub qxd: Vector2<f64>,
    pub ux: Vector2<f64>,
    pub q: Vector2<f64>,
    pub qe: Vector2<f64>,
    pub v: Vector2<f64>,
}

fn solve2(a: &Matrix2<f64>, b: &Vector2<f64>) -> Vector2<f64> {
    a.lu().solve(b).expect("nonsingular 2x2")
}

/// Returns `(τ*, τ, next memory)`.
pub fn planar_step(
    mem: &PlanarMemory,
    q: &Vector2<f64>,
    fc: &Vector2<f64>,
    fd: &Vector2<f64>,
    p: &PlanarGains,
) -> (Vector2<f64>, Vector2<f64>, PlanarMemory) {
    let h = p.h;
    let ux_star = solve2(&(p.mx + p.bx * h), &(p.mx * mem.qxd + (fc + fd) * h));
    let qx_star = mem.qx + ux_star * h;
    let qe = qx_star - q;
    let s = (qe - mem.qe) / h + qe * p.lambda;

    let ns = s.norm();
    let us = if ns > 0.0 { mem.v + s * (p.k2 / ns.sqrt()) } else { mem.v };
    let dir = if ns > 0.0 { s / ns } else { Vector2::zeros() };
    let v_next = mem.v + (dir * p.k3 + s * p.k4) * h;

    let k1 = Matrix2::identity() * p.k1;
    let big_b = p.m_hat * p.lambda + k1;
    let b_hat = big_b + p.c_hat;
    let w = p.m_hat / (h * h) + b_hat / h + (p.c_hat + k1) * p.lambda;
    let phi_a = (p.m_hat + p.c_hat * h) * q / (h * h) + big_b * mem.q / h + p.g_hat + p.m_hat * us;
    let phi_b = p.m_hat * (mem.qx + mem.ux * h) / (h * h) + b_hat * mem.qx / h;
    let q1_star = q + solve2(&w, &(phi_b - phi_a));
    let tau_star = w * (qx_star - q1_star);
    let tau = tau_star.zip_map(&p.limits, |t, f| t.max(-f).min(f));
    let qx = q1_star + solve2(&w, &tau);
    let next = PlanarMemory {
        qx,
        qxd: (qx - mem.qx) / h,
        ux: ux_star,
        q: *q,
        qe: qx - q,
        v: v_next,
    };
    (tau_star, tau, next)
}

/// `|a - b| / max(|a|, |b|, 1)`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// `Ψ2(x) = ||x|| + (α2/2)||x||²`.
pub fn psi2(x: &DVector<f64>, alpha2: f64) -> f64 {
    let r = x.norm();
    r + 0.5 * alpha2 * r * r
}

/// `V = k3 Ψ2(ŝ) + ||s2||²/2`.
pub fn lyapunov_v(shat: &DVector<f64>, s2: &DVector<f64>, k3: f64, alpha2: f64) -> f64 {
    k3 * psi2(shat, alpha2) + 0.5 * s2.norm_squared()
}

/// Continuous-time loop of one joint with constant model `M̂`, plant mass
/// `m`, proxy `(M_x, B_x)`, inner PD `k1 Λ`, `k1 + M̂ Λ` and a contact spring
/// `ke`, linearized about steady contact with the twisting terms removed.
/// Returns the eigenvalues of the state matrix.
pub fn linear_contact_loop_poles(m: f64, m_hat: f64, mx: f64, bx: f64, k1: f64, lambda: f64, ke: f64) -> Vec<nalgebra::Complex<f64>> {
    // x = [q, q̇, q_x, q̇_x]; contact torque -ke q, command absorbed in the offset
    let kp = k1 * lambda;
    let kd = k1 + m_hat * lambda;
    // τ = M̂ (q̈_x) + kd (q̇_x - q̇) + kp (q_x - q) with q̈_x from the proxy
    // M_x q̈_x = -B_x q̇_x - ke q
    let mut a = DMatrix::<f64>::zeros(4, 4);
    a[(0, 1)] = 1.0;
    a[(2, 3)] = 1.0;
    a[(3, 0)] = -ke / mx;
    a[(3, 3)] = -bx / mx;
    let qxdd = [a[(3, 0)], 0.0, 0.0, a[(3, 3)]];
    let tau = [
        m_hat * qxdd[0] - kp,
        m_hat * qxdd[1] - kd,
        m_hat * qxdd[2] + kp,
        m_hat * qxdd[3] + kd,
    ];
    for (j, t) in tau.iter().enumerate() {
        a[(1, j)] = t / m;
    }
    a[(1, 0)] -= ke / m;
    a.complex_eigenvalues().iter().copied().collect()
}
