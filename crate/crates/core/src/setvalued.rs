//! Elementary nonsmooth primitives.
//!
//! Only single-valued selections are exposed here. The set-valued sign never
//! gets evaluated directly; every selection in the controllers goes through
//! [`project_box`], [`prox_norm_quad`] or [`sat`].

use serde::{Deserialize, Serialize};

use crate::{Error, JointVector, Result};

/// `z` if `|z| <= 1`, otherwise `sign(z)`.
pub fn sat(z: f64) -> f64 {
    if z.abs() <= 1.0 {
        z
    } else {
        z.signum()
    }
}

/// Single-valued sign with `sign0(0) = 0`.
pub fn sign0(z: f64) -> f64 {
    if z == 0.0 {
        0.0
    } else {
        z.signum()
    }
}

/// Diagonal torque limits `F = diag(F_1, ..., F_n)`, all strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct BoxConstraint {
    limits: Vec<f64>,
}

impl BoxConstraint {
    pub fn new(limits: Vec<f64>) -> Result<Self> {
        if limits.is_empty() {
            return Err(Error::InvalidParameter("box constraint needs at least one limit".into()));
        }
        if let Some(bad) = limits.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "torque limit must be finite and > 0, got {bad}"
            )));
        }
        Ok(Self { limits })
    }

    pub fn uniform(dim: usize, limit: f64) -> Result<Self> {
        Self::new(vec![limit; dim])
    }

    pub fn dim(&self) -> usize {
        self.limits.len()
    }

    pub fn limits(&self) -> &[f64] {
        &self.limits
    }

    /// `true` when every entry satisfies `|y_i| <= F_i`.
    pub fn contains(&self, y: &JointVector) -> bool {
        y.len() == self.dim() && y.iter().zip(&self.limits).all(|(v, f)| v.abs() <= *f)
    }

    /// `F^{-1} y`, the point in the normalized box `[-1, 1]^n`.
    pub fn normalize(&self, y: &JointVector) -> JointVector {
        JointVector::from_iterator(y.len(), y.iter().zip(&self.limits).map(|(v, f)| v / f))
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for BoxConstraint {
    type Error = Error;

    fn try_from(limits: Vec<f64>) -> Result<Self> {
        Self::new(limits)
    }
}

impl From<BoxConstraint> for Vec<f64> {
    fn from(b: BoxConstraint) -> Self {
        b.limits
    }
}

/// `F Proj([-1,1]^n; F^{-1} y)`, i.e. an entrywise clamp to `[-F_i, F_i]`.
/// Entries already inside the box are returned bit for bit.
pub fn project_box(y: &JointVector, bounds: &BoxConstraint) -> Result<JointVector> {
    bounds.check_dim(y.len())?;
    Ok(JointVector::from_iterator(
        y.len(),
        y.iter().zip(bounds.limits()).map(|(v, f)| if v.abs() <= *f { *v } else { f * sign0(*v) }),
    ))
}

/// Weights of `f(x) = a ||x|| + (b/2) ||x||^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormQuadWeights {
    pub a: f64,
    pub b: f64,
}

impl NormQuadWeights {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "norm-quad weights must be finite and >= 0, got a={a}, b={b}"
            )));
        }
        Ok(Self { a, b })
    }

    pub fn eval(&self, x: &JointVector) -> f64 {
        let n = x.norm();
        self.a * n + 0.5 * self.b * n * n
    }
}

/// Proximal map of index `index` for `f(x) = a||x|| + (b/2)||x||^2`:
///
/// `argmin_x ||x - z||^2 / (2 index) + f(x)`
///
/// which is zero inside the dead zone `||z|| <= index * a` and a radial
/// shrink of `z` outside it.
pub fn prox_norm_quad(z: &JointVector, index: f64, w: NormQuadWeights) -> JointVector {
    debug_assert!(index > 0.0);
    let norm = z.norm();
    if norm <= index * w.a {
        return JointVector::zeros(z.len());
    }
    let scale = (norm - index * w.a) / ((1.0 + index * w.b) * norm);
    z * scale
}

/// Largest value of `<y_star - y_proj, p - F^{-1} y_proj>` over the probes.
///
/// For a correct projection every term is `<= 0`, so the result certifies
/// the variational inequality behind the normal-cone inclusion.
pub fn variational_residual(
    y_star: &JointVector,
    y_proj: &JointVector,
    bounds: &BoxConstraint,
    probes: &[JointVector],
) -> Result<f64> {
    bounds.check_dim(y_star.len())?;
    bounds.check_dim(y_proj.len())?;
    let lambda = y_star - y_proj;
    let normalized = bounds.normalize(y_proj);
    let mut worst = f64::NEG_INFINITY;
    for p in probes {
        bounds.check_dim(p.len())?;
        if p.iter().any(|c| !(c.abs() <= 1.0)) {
            return Err(Error::InvalidParameter(format!(
                "probe {:?} lies outside [-1, 1]^n",
                p.as_slice()
            )));
        }
        worst = worst.max(lambda.dot(&(p - &normalized)));
    }
    Ok(worst)
}

/// All `3^n` points of `{-1, 0, 1}^n`, the default probe grid.
pub fn probe_grid(dim: usize) -> Vec<JointVector> {
    let total = 3usize.pow(dim as u32);
    (0..total)
        .map(|mut code| {
            JointVector::from_iterator(
                dim,
                (0..dim).map(|_| {
                    let digit = code % 3;
                    code /= 3;
                    digit as f64 - 1.0
                }),
            )
        })
        .collect()
}
