//! Subspace distances between orthonormal frames.

use crate::error::{Error, Result};

use super::{
    complete_basis, cs_decompose, dims, ensure_finite, op_norm, thin_svd, two_to_inf_norm, Mat,
    OrthoFrame,
};

/// Orthogonal `W` minimizing `‖target − source·W‖_F`, i.e. `P Qᵀ` from the SVD
/// `sourceᵀ·target = P Σ Qᵀ`.
pub fn orthogonal_procrustes(target: &Mat, source: &Mat) -> Result<Mat> {
    if target.shape() != source.shape() {
        return Err(Error::shape(dims(target), dims(source)));
    }
    ensure_finite(target, "procrustes target")?;
    ensure_finite(source, "procrustes source")?;
    let svd = thin_svd(&(source.transpose() * target))?;
    Ok(&svd.u * svd.v.transpose())
}

fn same_shape(u: &OrthoFrame, u0: &OrthoFrame) -> Result<()> {
    if u.mat().shape() != u0.mat().shape() {
        return Err(Error::shape(dims(u0.mat()), dims(u.mat())));
    }
    Ok(())
}

/// The Frobenius alignment `W_U = argmin_{W ∈ O(r)} ‖Û − U₀W‖_F`.
pub fn frobenius_alignment(u_hat: &OrthoFrame, u0: &OrthoFrame) -> Result<OrthoFrame> {
    same_shape(u_hat, u0)?;
    OrthoFrame::new(orthogonal_procrustes(u_hat.mat(), u0.mat())?)
}

/// Projection operator norm distance `‖UUᵀ − U₀U₀ᵀ‖₂`.
pub fn projection_distance(u: &OrthoFrame, u0: &OrthoFrame) -> Result<f64> {
    same_shape(u, u0)?;
    let d = op_norm(&(u.projector() - u0.projector()))?;
    Ok(d.min(1.0))
}

/// Two-to-infinity loss `‖U − U₀W_U‖_{2→∞}` after Frobenius alignment.
pub fn two_to_inf_loss(u: &OrthoFrame, u0: &OrthoFrame) -> Result<f64> {
    let w = frobenius_alignment(u, u0)?;
    two_to_inf_norm(&(u.mat() - u0.mat() * w.mat()))
}

/// Both sides of `‖U − U₀W_U‖_{2→∞} ≤ ‖V_U‖_{2→∞}(ρ + ρ²)`.
#[derive(Debug, Clone)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `ρ`, the projection distance.
    pub rho: f64,
    /// The `p×2r` frame `[U₀U₁₁, U₀⊥U₂₂₁]`.
    pub v_u: OrthoFrame,
}

impl BoundCheck {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + 1e-9
    }
}

/// Evaluate the two-to-infinity / projection bound with `V_U` built from the
/// CS decomposition of `[U₀, U₀⊥]ᵀ[U, U⊥]`. Needs `2r < p`.
pub fn two_to_inf_bound_check(u: &OrthoFrame, u0: &OrthoFrame) -> Result<BoundCheck> {
    same_shape(u, u0)?;
    let (p, r) = (u.nrows(), u.ncols());
    if 2 * r >= p {
        return Err(Error::UnsupportedShape(format!(
            "bound requires 2r < p (r = {r}, p = {p})"
        )));
    }
    let full0 = complete_basis(u0.mat());
    let full = complete_basis(u.mat());
    let w = OrthoFrame::with_tolerance(full0.transpose() * full, 1e-9)?;
    let cs = cs_decompose(&w, r)?;

    let u0_perp = full0.columns(r, p - r);
    let mut v_u = Mat::zeros(p, 2 * r);
    v_u.columns_mut(0, r).copy_from(&(u0.mat() * cs.u11.mat()));
    v_u.columns_mut(r, r).copy_from(&(u0_perp * cs.u221()));
    let v_u = OrthoFrame::with_tolerance(v_u, 1e-9)?;

    let rho = projection_distance(u, u0)?;
    let lhs = two_to_inf_loss(u, u0)?;
    let rhs = two_to_inf_norm(v_u.mat())? * (rho + rho * rho);
    Ok(BoundCheck { lhs, rhs, rho, v_u })
}
