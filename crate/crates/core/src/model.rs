//! Linear generator, truncated-cubic discriminator with a sigmoid head, and
//! the one-sample GAN loss.

use crate::distributions::Latent;
use crate::error::{LabError, Result};
use crate::numerics::{dot, Matrix};

/// Truncated cubic: `z³` on `[-Λ, Λ]`, continued linearly with slope `3Λ²`.
#[inline]
pub fn sigma(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        3.0 * lambda * lambda * z - 2.0 * lambda.powi(3)
    } else if z < -lambda {
        3.0 * lambda * lambda * z + 2.0 * lambda.powi(3)
    } else {
        z * z * z
    }
}

#[inline]
pub fn sigma_prime(z: f64, lambda: f64) -> f64 {
    if z.abs() <= lambda {
        3.0 * z * z
    } else {
        3.0 * lambda * lambda
    }
}

#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log(sigmoid(t))` without overflow or cancellation.
#[inline]
pub fn log_sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        -(-t).exp().ln_1p()
    } else {
        t - t.exp().ln_1p()
    }
}

/// All trainable and fixed symbols of the synthetic GAN.
///
/// `v` holds generator rows `v_j` (`m_G × d`), `w` discriminator rows `w_i`
/// (`m_D × d`). `tau_b` scales the bias inside the logit and `lambda` is the
/// activation truncation (`f64::INFINITY` gives the plain cubic).
#[derive(Debug, Clone, PartialEq)]
pub struct GanParams {
    pub v: Matrix,
    pub w: Matrix,
    pub a: f64,
    pub b: f64,
    pub tau_b: f64,
    pub lambda: f64,
}

impl GanParams {
    pub fn new(v: Matrix, w: Matrix, a: f64, b: f64, tau_b: f64, lambda: f64) -> Result<Self> {
        if v.rows() == 0 || w.rows() == 0 {
            return Err(LabError::Config("m_G and m_D must be at least 1".into()));
        }
        if v.cols() != w.cols() {
            return Err(LabError::DimensionMismatch {
                expected: w.cols(),
                found: v.cols(),
            });
        }
        if !(tau_b > 0.0 && tau_b.is_finite()) {
            return Err(LabError::Config(format!(
                "tau_b must be positive, got {tau_b}"
            )));
        }
        if lambda.is_nan() || lambda <= 0.0 {
            return Err(LabError::Config(format!(
                "Lambda must be positive, got {lambda}"
            )));
        }
        Ok(Self {
            v,
            w,
            a,
            b,
            tau_b,
            lambda,
        })
    }

    pub fn dim(&self) -> usize {
        self.w.cols()
    }

    pub fn m_d(&self) -> usize {
        self.w.rows()
    }

    pub fn m_g(&self) -> usize {
        self.v.rows()
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite()
            && self.b.is_finite()
            && self.v.as_slice().iter().all(|x| x.is_finite())
            && self.w.as_slice().iter().all(|x| x.is_finite())
    }

    /// `|a| + |b| + ‖W‖_F`, the discriminator size under the per-player
    /// sum-of-norms convention.
    pub fn discriminator_norm(&self) -> f64 {
        self.a.abs() + self.b.abs() + self.w.frobenius_norm()
    }

    pub fn generator_norm(&self) -> f64 {
        self.v.frobenius_norm()
    }
}

/// Intermediate values of one discriminator evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// `<w_i, X>` per discriminator neuron.
    pub preacts: Vec<f64>,
    /// `Σ_i σ(<w_i, X>)`
    pub h: f64,
    /// Logit `a·h + τ_b·b`.
    pub f: f64,
    /// `sigmoid(f)`
    pub d: f64,
}

/// `G(z) = Σ_j z_j v_j`.
pub fn generator_forward(params: &GanParams, z: &Latent) -> Result<Vec<f64>> {
    if z.dim() != params.m_g() {
        return Err(LabError::DimensionMismatch {
            expected: params.m_g(),
            found: z.dim(),
        });
    }
    let mut out = vec![0.0; params.dim()];
    for &j in z.ones() {
        for (o, x) in out.iter_mut().zip(params.v.row(j)) {
            *o += x;
        }
    }
    Ok(out)
}

pub fn discriminator_forward(params: &GanParams, x: &[f64]) -> Result<ForwardTrace> {
    if x.len() != params.dim() {
        return Err(LabError::DimensionMismatch {
            expected: params.dim(),
            found: x.len(),
        });
    }
    let preacts: Vec<f64> = params.w.row_iter().map(|w| dot(w, x)).collect();
    let h = preacts
        .iter()
        .map(|&p| sigma(p, params.lambda))
        .sum::<f64>();
    let f = params.a * h + params.tau_b * params.b;
    Ok(ForwardTrace {
        preacts,
        h,
        f,
        d: sigmoid(f),
    })
}

/// `log D(X) + log(1 − D(G(z)))`, evaluated as
/// `logσ(f(X)) + logσ(−f(G(z)))`.
pub fn loss(params: &GanParams, x: &[f64], z: &Latent) -> Result<f64> {
    let real = discriminator_forward(params, x)?;
    let fake = discriminator_forward(params, &generator_forward(params, z)?)?;
    Ok(log_sigmoid(real.f) + log_sigmoid(-fake.f))
}
