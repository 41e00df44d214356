//! CS decomposition of a partitioned orthogonal matrix.
//!
//! For `W ∈ O(p)` split after row/column `r` (with `2r ≤ p`):
//!
//! ```text
//! W = diag(U11, U22) · [ C  -S  0 ]  · diag(V11, V22)ᵀ
//!                      [ S   C  0 ]
//!                      [ 0   0  I ]
//! ```
//!
//! `C` comes from the SVD of `W11`; the `S` block and `U22` come from a
//! Householder QR of `W21 V11`, so `U22` is orthogonal to working precision
//! even when some sines vanish. `V22` is then read off the trailing columns.

use crate::error::{Error, Result};

use super::{dims, polar_orthogonal, thin_svd, Mat, OrthoFrame};

#[derive(Debug, Clone)]
pub struct CsDecomp {
    pub u11: OrthoFrame,
    pub u22: OrthoFrame,
    pub v11: OrthoFrame,
    pub v22: OrthoFrame,
    /// Cosines, descending.
    pub c: Vec<f64>,
    /// Sines, paired with `c`.
    pub s: Vec<f64>,
}

impl CsDecomp {
    pub fn r(&self) -> usize {
        self.c.len()
    }

    /// The middle factor `[[C, -S, 0], [S, C, 0], [0, 0, I]]`.
    pub fn middle(&self) -> Mat {
        let r = self.r();
        let p = r + self.u22.nrows();
        let mut k = Mat::identity(p, p);
        for i in 0..r {
            k[(i, i)] = self.c[i];
            k[(r + i, r + i)] = self.c[i];
            k[(i, r + i)] = -self.s[i];
            k[(r + i, i)] = self.s[i];
        }
        k
    }

    pub fn reconstruct(&self) -> Mat {
        let r = self.r();
        let p = r + self.u22.nrows();
        let block = |a: &Mat, b: &Mat| {
            let mut m = Mat::zeros(p, p);
            m.view_mut((0, 0), (r, r)).copy_from(a);
            m.view_mut((r, r), (p - r, p - r)).copy_from(b);
            m
        };
        let u = block(self.u11.mat(), self.u22.mat());
        let v = block(self.v11.mat(), self.v22.mat());
        u * self.middle() * v.transpose()
    }

    /// First `r` columns of `U22`.
    pub fn u221(&self) -> Mat {
        self.u22.mat().columns(0, self.r()).into_owned()
    }
}

pub fn cs_decompose(w: &OrthoFrame, r: usize) -> Result<CsDecomp> {
    let p = w.nrows();
    if w.ncols() != p {
        return Err(Error::shape("square orthogonal matrix", dims(w.mat())));
    }
    if r == 0 || 2 * r > p {
        return Err(Error::UnsupportedShape(format!(
            "CS decomposition needs 1 <= r and 2r <= p (r = {r}, p = {p})"
        )));
    }
    let w = w.mat();
    let w11 = w.view((0, 0), (r, r)).into_owned();
    let w21 = w.view((r, 0), (p - r, r)).into_owned();

    let svd = thin_svd(&w11)?;
    let u11 = svd.u;
    let v11 = svd.v;
    let c: Vec<f64> = svd.s.iter().map(|x| x.clamp(0.0, 1.0)).collect();

    // W21 V11 = U22 [S; 0]; QR of [W21 V11 | I] yields a full orthogonal Q.
    let m = &w21 * &v11;
    let mut aug = Mat::zeros(p - r, r + p - r);
    aug.columns_mut(0, r).copy_from(&m);
    aug.columns_mut(r, p - r).fill_with_identity();
    let qr = aug.qr();
    let mut u22 = qr.q().columns(0, p - r).into_owned();
    let rr = qr.r();
    let mut s = Vec::with_capacity(r);
    for k in 0..r {
        let d = rr[(k, k)];
        if d < 0.0 {
            u22.column_mut(k).neg_mut();
        }
        s.push(d.abs().min(1.0));
    }

    // Trailing columns: X₂ = K₂ V22ᵀ with K₂ the last p−r columns of the middle factor.
    let mut ut = Mat::zeros(p, p);
    ut.view_mut((0, 0), (r, r)).copy_from(&u11.transpose());
    ut.view_mut((r, r), (p - r, p - r))
        .copy_from(&u22.transpose());
    let x2 = (ut * w).columns(r, p - r).into_owned();
    let mut k2 = Mat::zeros(p, p - r);
    for i in 0..r {
        k2[(i, i)] = -s[i];
        k2[(r + i, i)] = c[i];
    }
    for i in r..p - r {
        k2[(r + i, i)] = 1.0;
    }
    let v22 = polar_orthogonal(&(x2.transpose() * k2))?;

    let tol = 1e-9;
    Ok(CsDecomp {
        u11: OrthoFrame::with_tolerance(u11, tol)?,
        u22: OrthoFrame::with_tolerance(u22, tol)?,
        v11: OrthoFrame::with_tolerance(v11, tol)?,
        v22: OrthoFrame::with_tolerance(v22, tol)?,
        c,
        s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_orthogonal(p: usize, seed: u64) -> OrthoFrame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Mat::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        OrthoFrame::new(g.qr().q()).unwrap()
    }

    #[test]
    fn identity_gives_unit_cosines() {
        let cs = cs_decompose(&OrthoFrame::canonical(6, 6), 2).unwrap();
        assert_eq!(cs.c, vec![1.0, 1.0]);
        assert!(cs.s.iter().all(|s| s.abs() < 1e-15));
        assert!((cs.reconstruct() - Mat::identity(6, 6)).norm() < 1e-12);
    }

    #[test]
    fn planar_rotation() {
        let phi: f64 = 0.7;
        let w = Mat::from_row_slice(2, 2, &[phi.cos(), -phi.sin(), phi.sin(), phi.cos()]);
        let cs = cs_decompose(&OrthoFrame::new(w.clone()).unwrap(), 1).unwrap();
        assert!((cs.c[0] - phi.cos()).abs() < 1e-14);
        assert!((cs.s[0] - phi.sin()).abs() < 1e-14);
        assert!((cs.reconstruct() - w).norm() < 1e-12);
    }

    #[test]
    fn random_reconstruction() {
        let w = random_orthogonal(12, 1);
        let cs = cs_decompose(&w, 3).unwrap();
        assert!((cs.reconstruct() - w.mat()).norm() < 1e-9);
        for (c, s) in cs.c.iter().zip(&cs.s) {
            assert!(*c >= 0.0 && *s >= 0.0);
            assert!((c * c + s * s - 1.0).abs() < 1e-10);
        }
        assert!(cs.c.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rejects_bad_shapes() {
        let w = random_orthogonal(5, 2);
        assert!(matches!(
            cs_decompose(&w, 3),
            Err(Error::UnsupportedShape(_))
        ));
        assert!(cs_decompose(&w, 0).is_err());
        assert!(cs_decompose(&OrthoFrame::canonical(5, 2), 1).is_err());
    }
}
