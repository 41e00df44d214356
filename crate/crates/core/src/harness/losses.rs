use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    dims, frobenius_norm, inf_norm, op_norm, projection_distance, sample_covariance, sym_eig_topk,
    two_to_inf_loss, Mat, OrthoFrame,
};
use crate::synth::SpikedCovModel;

/// Covariance and subspace losses of one estimate against the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    /// `‖Σ̂ − Σ₀‖₂`.
    pub op_loss: f64,
    /// `‖ÛÛᵀ − U₀U₀ᵀ‖₂²`.
    pub proj_loss_sq: f64,
    /// `‖Û − U₀W_U‖²_{2→∞}`.
    pub two_inf_loss_sq: f64,
    /// `‖Σ̂ − Σ₀‖_F`.
    pub frob_loss: f64,
    /// `‖Σ̂ − Σ₀‖_∞` (max absolute row sum).
    pub inf_loss: f64,
}

impl LossReport {
    pub const FIELDS: [&'static str; 5] = [
        "op_loss",
        "proj_loss_sq",
        "two_inf_loss_sq",
        "frob_loss",
        "inf_loss",
    ];

    pub fn values(&self) -> [f64; 5] {
        [
            self.op_loss,
            self.proj_loss_sq,
            self.two_inf_loss_sq,
            self.frob_loss,
            self.inf_loss,
        ]
    }

    pub fn from_values(v: [f64; 5]) -> Self {
        LossReport {
            op_loss: v[0],
            proj_loss_sq: v[1],
            two_inf_loss_sq: v[2],
            frob_loss: v[3],
            inf_loss: v[4],
        }
    }
}

pub fn loss_report(
    sigma_hat: &Mat,
    u_hat: &OrthoFrame,
    sigma0: &Mat,
    u0: &OrthoFrame,
) -> Result<LossReport> {
    if sigma_hat.shape() != sigma0.shape() {
        return Err(Error::shape(dims(sigma0), dims(sigma_hat)));
    }
    let diff = sigma_hat - sigma0;
    Ok(LossReport {
        op_loss: op_norm(&diff)?,
        proj_loss_sq: projection_distance(u_hat, u0)?.powi(2),
        two_inf_loss_sq: two_to_inf_loss(u_hat, u0)?.powi(2),
        frob_loss: frobenius_norm(&diff)?,
        inf_loss: inf_norm(&diff)?,
    })
}

pub fn loss_against_truth(
    sigma_hat: &Mat,
    u_hat: &OrthoFrame,
    truth: &SpikedCovModel,
) -> Result<LossReport> {
    loss_report(sigma_hat, u_hat, &truth.covariance(), &truth.u0)
}

/// Losses of the sample covariance and its top-`r` eigenvectors.
pub fn naive_losses(y: &Mat, truth: &SpikedCovModel) -> Result<LossReport> {
    let s = sample_covariance(y);
    let u = sym_eig_topk(&s, truth.r())?.vectors;
    loss_against_truth(&s, &u, truth)
}

/// Column-wise medians.
pub fn median_report(reports: &[LossReport]) -> Result<LossReport> {
    if reports.is_empty() {
        return Err(Error::invalid("no loss reports to summarize"));
    }
    let mut out = [0.0; 5];
    for (k, slot) in out.iter_mut().enumerate() {
        let col: Vec<f64> = reports.iter().map(|r| r.values()[k]).collect();
        *slot = crate::diagnostics::median(&col);
    }
    Ok(LossReport::from_values(out))
}
