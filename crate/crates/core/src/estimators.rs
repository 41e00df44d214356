//! Posterior summaries and point estimators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    complete_basis, dims, orthogonal_procrustes, sample_covariance, sym_eig_topk, thin_svd, Mat,
    OrthoFrame,
};
use crate::sampler::ChainSamples;

/// Relative singular-value cutoff below which a loading draw counts as rank
/// deficient.
const RANK_TOL: f64 = 1e-12;

/// Left singular vectors `U_B` of a `p×r` loading matrix. When `B` has
/// numerical rank below `r`, the missing directions are filled by a
/// deterministic orthonormal completion and the flag is set.
pub fn loading_frame(b: &Mat) -> Result<(OrthoFrame, bool)> {
    let (p, r) = b.shape();
    if r == 0 || r > p {
        return Err(Error::shape("p x r with 1 <= r <= p", dims(b)));
    }
    let svd = thin_svd(b)?;
    let smax = svd.s[0];
    let keep = if smax > 0.0 {
        svd.s.iter().take_while(|&&s| s > RANK_TOL * smax).count()
    } else {
        0
    };
    if keep == r {
        return Ok((OrthoFrame::with_tolerance(svd.u, 1e-9)?, false));
    }
    let full = complete_basis(&svd.u.columns(0, keep).into_owned());
    Ok((
        OrthoFrame::with_tolerance(full.columns(0, r).into_owned(), 1e-9)?,
        true,
    ))
}

#[derive(Debug, Clone)]
pub struct PosteriorSummary {
    /// Posterior mean of `BBᵀ + σ²I`.
    pub sigma_hat: Mat,
    /// Posterior mean of `U_B U_Bᵀ`.
    pub omega_hat: Mat,
    /// Top-`r` eigenvectors of `omega_hat`.
    pub u_hat: OrthoFrame,
    /// Posterior inclusion frequency of each row.
    pub xi_freq: Vec<f64>,
    pub sigma2_mean: f64,
    pub n_draws: usize,
    pub n_padded: usize,
}

pub fn summarize(samples: &ChainSamples) -> Result<PosteriorSummary> {
    let n = samples.n_draws();
    if n == 0 {
        return Err(Error::invalid(
            "cannot summarize a chain with no kept draws",
        ));
    }
    let nf = n as f64;
    let sym = |m: &Mat| (m + m.transpose()) * (0.5 / nf);
    let sigma_hat = sym(&samples.sigma_sum);
    let omega_hat = sym(&samples.omega_sum);
    let u_hat = sym_eig_topk(&omega_hat, samples.r)?.vectors;
    Ok(PosteriorSummary {
        sigma_hat,
        omega_hat,
        u_hat,
        xi_freq: samples.xi_counts.iter().map(|&c| c as f64 / nf).collect(),
        sigma2_mean: samples.draws.iter().map(|d| d.sigma2).sum::<f64>() / nf,
        n_draws: n,
        n_padded: samples.n_padded,
    })
}

/// Outcome of the diagonal-thresholding rank rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankEstimate {
    /// `max(raw_rank, 1)`.
    pub rank: usize,
    pub raw_rank: usize,
    /// Number of coordinates passing the variance screen.
    pub n_selected: usize,
    /// Noise level estimate: median sample variance.
    pub noise_level: f64,
    /// Set when no coordinate passed the screen.
    pub empty_screen: bool,
}

/// Diagonal thresholding: screen coordinates whose sample variance exceeds
/// `σ̃²(1 + γ√(log p / n))`, then count eigenvalues of the screened block of
/// the sample covariance above `σ̃²(1 + γ(√(|J|/n) + √(log p / n)))`.
pub fn estimate_rank(y: &Mat, gamma: f64) -> Result<RankEstimate> {
    let (n, p) = y.shape();
    if n < 2 || p == 0 {
        return Err(Error::invalid(format!(
            "need n >= 2 and p >= 1, got {n}x{p}"
        )));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::invalid(format!(
            "gamma must be nonnegative, got {gamma}"
        )));
    }
    crate::linalg::ensure_finite(y, "data")?;
    let s = sample_covariance(y);
    let diag: Vec<f64> = s.diagonal().iter().copied().collect();
    let noise = crate::diagnostics::median(&diag);
    let (nf, lp) = (n as f64, (p as f64).ln());
    let screen = noise * (1.0 + gamma * (lp / nf).sqrt());
    let sel: Vec<usize> = (0..p).filter(|&j| diag[j] > screen).collect();
    if sel.is_empty() {
        return Ok(RankEstimate {
            rank: 1,
            raw_rank: 0,
            n_selected: 0,
            noise_level: noise,
            empty_screen: true,
        });
    }
    let m = sel.len();
    let sub = Mat::from_fn(m, m, |a, b| s[(sel[a], sel[b])]);
    let cut = noise * (1.0 + gamma * ((m as f64 / nf).sqrt() + (lp / nf).sqrt()));
    let eig = sym_eig_topk(&sub, m)?;
    let raw = eig.values.iter().filter(|&&v| v > cut).count();
    Ok(RankEstimate {
        rank: raw.max(1),
        raw_rank: raw,
        n_selected: m,
        noise_level: noise,
        empty_screen: false,
    })
}

/// Row scores `‖Û_j‖₁ / r`.
pub fn feature_scores(u_hat: &OrthoFrame) -> Vec<f64> {
    let r = u_hat.ncols() as f64;
    u_hat
        .mat()
        .row_iter()
        .map(|row| row.abs().sum() / r)
        .collect()
}

/// `{j : ‖Û_j‖₁ / r > τ}`, ascending.
pub fn key_features(u_hat: &OrthoFrame, tau: f64) -> Result<Vec<usize>> {
    if !(tau >= 0.0) {
        return Err(Error::invalid(format!(
            "tau must be nonnegative, got {tau}"
        )));
    }
    Ok(feature_scores(u_hat)
        .into_iter()
        .enumerate()
        .filter(|&(_, s)| s > tau)
        .map(|(j, _)| j)
        .collect())
}

/// Type-7 (linear interpolation) quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Entry-wise intervals for rotation-aligned loading draws.
#[derive(Debug, Clone)]
pub struct CredibleIntervals {
    pub lower: Mat,
    pub upper: Mat,
    /// The alignment target `Û diag(√(μ_k − σ̄²)₊)`.
    pub reference: Mat,
    pub level: f64,
}

/// Align each draw of `B` to a common reference by orthogonal Procrustes,
/// then take the `(1 ∓ level)/2` empirical quantiles of every entry.
pub fn credible_intervals(samples: &ChainSamples, level: f64) -> Result<CredibleIntervals> {
    if !(0.0..1.0).contains(&level) {
        return Err(Error::invalid(format!(
            "level must lie in [0, 1), got {level}"
        )));
    }
    let summary = summarize(samples)?;
    let (p, r) = (samples.p, samples.r);
    let top = sym_eig_topk(&summary.sigma_hat, r)?;
    let mut reference = summary.u_hat.mat().clone();
    for k in 0..r {
        reference
            .column_mut(k)
            .scale_mut((top.values[k] - summary.sigma2_mean).max(0.0).sqrt());
    }
    let aligned: Vec<Mat> = samples
        .draws
        .iter()
        .map(|d| orthogonal_procrustes(&reference, &d.b).map(|w| &d.b * w))
        .collect::<Result<_>>()?;
    let (ql, qu) = ((1.0 - level) / 2.0, (1.0 + level) / 2.0);
    let mut lower = Mat::zeros(p, r);
    let mut upper = Mat::zeros(p, r);
    let mut col = Vec::with_capacity(aligned.len());
    for j in 0..p {
        for k in 0..r {
            col.clear();
            col.extend(aligned.iter().map(|a| a[(j, k)]));
            col.sort_by(f64::total_cmp);
            lower[(j, k)] = quantile_sorted(&col, ql);
            upper[(j, k)] = quantile_sorted(&col, qu);
        }
    }
    Ok(CredibleIntervals {
        lower,
        upper,
        reference,
        level,
    })
}
