//! Dense matrix numerics shared by every other module.
//!
//! Matrices are plain `nalgebra::DMatrix<f64>`; orthonormal frames are
//! wrapped in [`OrthoFrame`] so the orthonormality check happens once, at
//! construction.

mod cs;
mod eig;
mod norms;
mod subspace;

pub use cs::{cs_decompose, CsDecomp};
pub use eig::{sym_eig_topk, SymEig};
pub use norms::{frobenius_norm, inf_norm, op_norm, two_to_inf_norm};
pub use subspace::{
    frobenius_alignment, orthogonal_procrustes, projection_distance, two_to_inf_bound_check,
    two_to_inf_loss, BoundCheck,
};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Dense real matrix.
pub type Mat = DMatrix<f64>;

/// Tolerance for `UᵀU = I` when building an [`OrthoFrame`].
pub const ORTHO_TOL: f64 = 1e-10;

/// Reject matrices with NaN or infinite entries.
pub fn ensure_finite(a: &Mat, what: &str) -> Result<()> {
    if let Some(pos) = a.iter().position(|v| !v.is_finite()) {
        let (i, j) = (pos % a.nrows(), pos / a.nrows());
        return Err(Error::invalid(format!(
            "{what} has a non-finite entry at ({i}, {j})"
        )));
    }
    Ok(())
}

pub(crate) fn dims(a: &Mat) -> String {
    format!("{}x{}", a.nrows(), a.ncols())
}

/// A `p×r` matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthoFrame(Mat);

impl OrthoFrame {
    pub fn new(mat: Mat) -> Result<Self> {
        Self::with_tolerance(mat, ORTHO_TOL)
    }

    pub fn with_tolerance(mat: Mat, tol: f64) -> Result<Self> {
        ensure_finite(&mat, "orthonormal frame")?;
        if mat.ncols() > mat.nrows() {
            return Err(Error::UnsupportedShape(format!(
                "frame with more columns than rows ({})",
                dims(&mat)
            )));
        }
        let gram = mat.transpose() * &mat;
        let err = (gram - Mat::identity(mat.ncols(), mat.ncols())).norm();
        if err >= tol {
            return Err(Error::invalid(format!(
                "columns are not orthonormal: |UᵀU - I|_F = {err:.3e}"
            )));
        }
        Ok(OrthoFrame(mat))
    }

    /// Columns `0..r` of the `p×p` identity.
    pub fn canonical(p: usize, r: usize) -> Self {
        OrthoFrame(Mat::identity(p, r))
    }

    pub fn mat(&self) -> &Mat {
        &self.0
    }

    pub fn into_mat(self) -> Mat {
        self.0
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    /// `U Uᵀ`.
    pub fn projector(&self) -> Mat {
        &self.0 * self.0.transpose()
    }

    /// An orthonormal basis of the orthogonal complement, `p×(p−r)`.
    pub fn complement(&self) -> OrthoFrame {
        let full = complete_basis(&self.0);
        OrthoFrame(
            full.columns(self.ncols(), self.nrows() - self.ncols())
                .into_owned(),
        )
    }
}

impl TryFrom<Mat> for OrthoFrame {
    type Error = Error;

    fn try_from(m: Mat) -> Result<Self> {
        OrthoFrame::new(m)
    }
}

impl From<OrthoFrame> for Mat {
    fn from(f: OrthoFrame) -> Mat {
        f.0
    }
}

/// Extend the orthonormal columns of `u` to a full `p×p` orthogonal matrix
/// whose leading columns are exactly `u`.
pub(crate) fn complete_basis(u: &Mat) -> Mat {
    let (p, r) = (u.nrows(), u.ncols());
    let mut aug = Mat::zeros(p, r + p);
    aug.columns_mut(0, r).copy_from(u);
    aug.columns_mut(r, p).fill_with_identity();
    let q = aug.qr().q();
    let mut out = q.columns(0, p).into_owned();
    // Householder QR may flip the signs of the leading columns.
    out.columns_mut(0, r).copy_from(u);
    out
}

/// Flip each column so its largest-magnitude entry is positive (first index
/// wins ties). Returns the applied signs.
pub fn fix_column_signs(m: &mut Mat) -> Vec<f64> {
    let mut signs = Vec::with_capacity(m.ncols());
    for mut col in m.column_iter_mut() {
        let mut best = 0.0_f64;
        let mut sign = 1.0;
        for v in col.iter() {
            if v.abs() > best.abs() {
                best = *v;
            }
        }
        if best < 0.0 {
            col.neg_mut();
            sign = -1.0;
        }
        signs.push(sign);
    }
    signs
}

/// Thin SVD `A = U diag(s) Vᵀ` with singular values in descending order and
/// the sign convention applied to the columns of `U` (mirrored onto `V`).
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: Mat,
    pub s: Vec<f64>,
    pub v: Mat,
}

pub fn thin_svd(a: &Mat) -> Result<ThinSvd> {
    ensure_finite(a, "svd input")?;
    let k = a.nrows().min(a.ncols());
    let svd = a.clone().svd(true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::Numeric("svd did not return singular vectors".into())),
    };
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .total_cmp(&svd.singular_values[i])
            .then(i.cmp(&j))
    });

    let mut uu = Mat::zeros(a.nrows(), k);
    let mut vv = Mat::zeros(a.ncols(), k);
    let mut s = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        uu.set_column(dst, &u.column(src));
        vv.set_column(dst, &vt.row(src).transpose());
        s.push(svd.singular_values[src]);
    }
    let signs = fix_column_signs(&mut uu);
    for (mut col, sg) in vv.column_iter_mut().zip(signs) {
        col *= sg;
    }
    Ok(ThinSvd { u: uu, s, v: vv })
}

/// Nearest orthogonal matrix in Frobenius norm (polar factor).
pub(crate) fn polar_orthogonal(a: &Mat) -> Result<Mat> {
    let svd = thin_svd(a)?;
    Ok(&svd.u * svd.v.transpose())
}

/// Sample covariance `YᵀY / n` for zero-mean rows.
pub fn sample_covariance(y: &Mat) -> Mat {
    let n = y.nrows().max(1) as f64;
    let mut s = y.transpose() * y;
    s /= n;
    s
}
