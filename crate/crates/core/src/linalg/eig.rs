use crate::error::{Error, Result};

use super::{dims, ensure_finite, fix_column_signs, Mat, OrthoFrame};

/// Leading eigenpairs of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEig {
    /// Descending.
    pub values: Vec<f64>,
    pub vectors: OrthoFrame,
}

/// Top-`k` eigenpairs of a symmetric matrix, values descending, each vector
/// signed so its largest-magnitude entry is positive.
pub fn sym_eig_topk(s: &Mat, k: usize) -> Result<SymEig> {
    ensure_finite(s, "symmetric matrix")?;
    if s.nrows() != s.ncols() {
        return Err(Error::shape("square matrix", dims(s)));
    }
    let p = s.nrows();
    if k == 0 || k > p {
        return Err(Error::invalid(format!("k = {k} outside 1..={p}")));
    }
    let scale = s.amax().max(1.0);
    let asym = (s - s.transpose()).amax();
    if asym > 1e-8 * scale {
        return Err(Error::invalid(format!(
            "matrix is not symmetric (max |S - Sᵀ| = {asym:.3e})"
        )));
    }
    let sym = (s + s.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .total_cmp(&eig.eigenvalues[i])
            .then(i.cmp(&j))
    });
    let mut vecs = Mat::zeros(p, k);
    let mut values = Vec::with_capacity(k);
    for (dst, &src) in order.iter().take(k).enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
        values.push(eig.eigenvalues[src]);
    }
    fix_column_signs(&mut vecs);
    Ok(SymEig {
        values,
        vectors: OrthoFrame::new(vecs)?,
    })
}
