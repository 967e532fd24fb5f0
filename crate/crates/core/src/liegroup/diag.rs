//! Closed forms for diagonal Gaussians.
//!
//! For `G = [[diag(sigma), mu], [0, 1]]` the logarithm is
//! `[[diag(phi), theta], [0, 0]]` with
//!
//! ```text
//! phi   = log(sigma)
//! theta = mu * log(sigma) / (sigma - 1)
//! ```
//!
//! and conversely `sigma = e^phi`, `mu = theta * (e^phi - 1) / phi`. Both
//! ratios have a removable singularity at `sigma = 1` / `phi = 0` where
//! `mu = theta`.

use serde::{Deserialize, Serialize};

use crate::linalg::DenseMatrix;

use super::{LieGroupError, Result, TangentMatrix, Utdat};

/// Below this magnitude the ratios are evaluated by their Taylor series.
pub const SINGULARITY_THRESHOLD: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagGaussian {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl DiagGaussian {
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if mu.len() != sigma.len() {
            return Err(LieGroupError::DimensionMismatch {
                expected: mu.len(),
                actual: sigma.len(),
            });
        }
        if mu.iter().chain(&sigma).any(|v| !v.is_finite()) {
            return Err(LieGroupError::NonFinite);
        }
        if let Some(k) = sigma.iter().position(|&s| s <= 0.0) {
            return Err(LieGroupError::InvalidUtdat(format!(
                "sigma[{k}] is not positive"
            )));
        }
        Ok(Self { mu, sigma })
    }

    pub fn standard(k: usize) -> Self {
        Self {
            mu: vec![0.0; k],
            sigma: vec![1.0; k],
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn to_utdat(&self) -> Utdat {
        Utdat::from_diagonal(&self.sigma, &self.mu)
            .expect("DiagGaussian invariants imply a valid UTDAT")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentDiag {
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
}

impl TangentDiag {
    pub fn new(phi: Vec<f64>, theta: Vec<f64>) -> Result<Self> {
        if phi.len() != theta.len() {
            return Err(LieGroupError::DimensionMismatch {
                expected: phi.len(),
                actual: theta.len(),
            });
        }
        if phi.iter().chain(&theta).any(|v| !v.is_finite()) {
            return Err(LieGroupError::NonFinite);
        }
        Ok(Self { phi, theta })
    }

    pub fn zeros(k: usize) -> Self {
        Self {
            phi: vec![0.0; k],
            theta: vec![0.0; k],
        }
    }

    pub fn dim(&self) -> usize {
        self.phi.len()
    }

    pub fn squared_norm(&self) -> f64 {
        self.phi.iter().chain(&self.theta).map(|v| v * v).sum()
    }

    pub fn to_tangent_matrix(&self) -> TangentMatrix {
        TangentMatrix::new(DenseMatrix::from_diag(&self.phi), self.theta.clone())
            .expect("TangentDiag invariants imply a valid tangent")
    }
}

/// `(e^x - 1) / x`, equal to 1 at `x = 0`.
#[inline]
pub fn exprel(x: f64) -> f64 {
    if x.abs() < SINGULARITY_THRESHOLD {
        1.0 + x * (0.5 + x / 6.0)
    } else {
        x.exp_m1() / x
    }
}

/// Derivative of [`exprel`]: `(x e^x - e^x + 1) / x^2`, equal to 1/2 at 0.
#[inline]
pub fn exprel_derivative(x: f64) -> f64 {
    if x.abs() < SINGULARITY_THRESHOLD {
        0.5 + x * (1.0 / 3.0 + x / 8.0)
    } else {
        (x * x.exp() - x.exp_m1()) / (x * x)
    }
}

/// `log(s) / (s - 1)`, equal to 1 at `s = 1`.
#[inline]
pub fn log_ratio(s: f64) -> f64 {
    let d = s - 1.0;
    if d.abs() < SINGULARITY_THRESHOLD {
        1.0 - d * (0.5 - d / 3.0)
    } else {
        d.ln_1p() / d
    }
}

pub fn diag_log_map(q: &DiagGaussian) -> TangentDiag {
    let phi = q.sigma.iter().map(|s| s.ln()).collect();
    let theta =
        q.mu.iter()
            .zip(&q.sigma)
            .map(|(&m, &s)| m * log_ratio(s))
            .collect();
    TangentDiag { phi, theta }
}

pub fn diag_exp_map(t: &TangentDiag) -> DiagGaussian {
    let sigma = t.phi.iter().map(|p| p.exp()).collect();
    let mu = t
        .theta
        .iter()
        .zip(&t.phi)
        .map(|(&th, &p)| th * exprel(p))
        .collect();
    DiagGaussian { mu, sigma }
}

/// Per-component partial derivatives of [`diag_exp_map`].
#[derive(Clone, Debug, PartialEq)]
pub struct DiagExpJacobian {
    pub dsigma_dphi: Vec<f64>,
    pub dmu_dphi: Vec<f64>,
    pub dmu_dtheta: Vec<f64>,
}

pub fn diag_exp_map_jacobian(t: &TangentDiag) -> DiagExpJacobian {
    DiagExpJacobian {
        dsigma_dphi: t.phi.iter().map(|p| p.exp()).collect(),
        dmu_dphi: t
            .phi
            .iter()
            .zip(&t.theta)
            .map(|(&p, &th)| th * exprel_derivative(p))
            .collect(),
        dmu_dtheta: t.phi.iter().map(|&p| exprel(p)).collect(),
    }
}

/// Mean over the batch of `sum_k phi_k^2 + theta_k^2`, i.e. of the squared
/// geodesic distance from each Gaussian to the standard one.
pub fn intrinsic_loss(batch: &[TangentDiag]) -> Result<f64> {
    let first = batch.first().ok_or(LieGroupError::EmptyBatch)?;
    let k = first.dim();
    let mut total = 0.0;
    for t in batch {
        if t.dim() != k || t.theta.len() != k {
            return Err(LieGroupError::DimensionMismatch {
                expected: k,
                actual: t.dim(),
            });
        }
        total += t.squared_norm();
    }
    Ok(total / batch.len() as f64)
}
