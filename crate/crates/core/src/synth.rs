//! Ground-truth spiked covariance models, Gaussian data simulation, and the
//! two-perturbation example that separates the projection and
//! two-to-infinity losses.

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{thin_svd, Mat, OrthoFrame};

/// `Σ₀ = U₀ Λ₀ U₀ᵀ + σ₀² I` with `U₀` supported on `support`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikedCovModel {
    pub u0: OrthoFrame,
    /// Spike sizes, descending.
    pub lambda0: Vec<f64>,
    pub sigma0_sq: f64,
    /// Nonzero rows of `U₀`, ascending.
    pub support: Vec<usize>,
}

impl SpikedCovModel {
    /// Assemble a model from the dense `s×r` block of nonzero rows.
    pub fn from_block(
        p: usize,
        support: Vec<usize>,
        block: &Mat,
        lambda0: Vec<f64>,
        sigma0_sq: f64,
    ) -> Result<Self> {
        let (s, r) = (block.nrows(), block.ncols());
        if support.len() != s || lambda0.len() != r {
            return Err(Error::invalid(format!(
                "block {s}x{r} does not match {} support rows / {} spikes",
                support.len(),
                lambda0.len()
            )));
        }
        if support.windows(2).any(|w| w[0] >= w[1]) || support.last().is_some_and(|&j| j >= p) {
            return Err(Error::invalid(
                "support must be strictly increasing and < p",
            ));
        }
        if lambda0.iter().any(|&l| !(l > 0.0)) || lambda0.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::invalid(
                "spike sizes must be positive and descending",
            ));
        }
        if !(sigma0_sq >= 0.0) {
            return Err(Error::invalid(format!(
                "noise variance must be nonnegative, got {sigma0_sq}"
            )));
        }
        let mut u0 = Mat::zeros(p, r);
        for (i, &j) in support.iter().enumerate() {
            u0.row_mut(j).copy_from(&block.row(i));
        }
        Ok(SpikedCovModel {
            u0: OrthoFrame::new(u0)?,
            lambda0,
            sigma0_sq,
            support,
        })
    }

    pub fn p(&self) -> usize {
        self.u0.nrows()
    }

    pub fn r(&self) -> usize {
        self.u0.ncols()
    }

    /// `U₀ Λ₀^{1/2}`.
    pub fn loading(&self) -> Mat {
        let mut b = self.u0.mat().clone();
        for (k, l) in self.lambda0.iter().enumerate() {
            b.column_mut(k).scale_mut(l.sqrt());
        }
        b
    }

    /// The dense covariance `Σ₀`.
    pub fn covariance(&self) -> Mat {
        let b = self.loading();
        &b * b.transpose() + Mat::identity(self.p(), self.p()) * self.sigma0_sq
    }

    /// The `s×r` block of nonzero rows.
    pub fn block(&self) -> Mat {
        Mat::from_fn(self.support.len(), self.r(), |i, k| {
            self.u0.mat()[(self.support[i], k)]
        })
    }
}

/// `r` values equally spaced from `lam_max` down to `lam_min`; a single spike
/// takes `lam_max`.
pub fn spike_sizes(r: usize, lam_min: f64, lam_max: f64) -> Vec<f64> {
    if r == 1 {
        return vec![lam_max];
    }
    (0..r)
        .map(|k| lam_max - (lam_max - lam_min) * k as f64 / (r - 1) as f64)
        .collect()
}

/// Random jointly `s`-sparse truth: uniform support, `U₀` block from the left
/// singular vectors of an `s×r` matrix of `Unif(1, 2)` entries.
pub fn generate_truth<R: Rng + ?Sized>(
    p: usize,
    r: usize,
    s: usize,
    lam_min: f64,
    lam_max: f64,
    sigma0_sq: f64,
    rng: &mut R,
) -> Result<SpikedCovModel> {
    if r == 0 || r > s || s > p {
        return Err(Error::invalid(format!(
            "need 1 <= r <= s <= p, got r = {r}, s = {s}, p = {p}"
        )));
    }
    if !(lam_min > 0.0 && lam_min <= lam_max) {
        return Err(Error::invalid(format!(
            "need 0 < lam_min <= lam_max, got [{lam_min}, {lam_max}]"
        )));
    }
    if !(sigma0_sq > 0.0) {
        return Err(Error::invalid(format!(
            "noise variance must be positive, got {sigma0_sq}"
        )));
    }
    let mut support = index::sample(rng, p, s).into_vec();
    support.sort_unstable();
    let l = Mat::from_fn(s, r, |_, _| rng.random_range(1.0..2.0));
    let block = thin_svd(&l)?.u;
    SpikedCovModel::from_block(
        p,
        support,
        &block,
        spike_sizes(r, lam_min, lam_max),
        sigma0_sq,
    )
}

/// `n` iid rows from `N(0, Σ₀)` via `y = U₀Λ₀^{1/2} z + σ₀ ε`.
pub fn sample_data<R: Rng + ?Sized>(model: &SpikedCovModel, n: usize, rng: &mut R) -> Result<Mat> {
    if n == 0 {
        return Err(Error::invalid("need at least one observation"));
    }
    let (p, r) = (model.p(), model.r());
    let z = Mat::from_fn(n, r, |_, _| rng.sample::<f64, _>(StandardNormal));
    let sigma0 = model.sigma0_sq.sqrt();
    let noise = Mat::from_fn(n, p, |_, _| sigma0 * rng.sample::<f64, _>(StandardNormal));
    Ok(z * model.loading().transpose() + noise)
}

/// The two equal-projection-loss perturbations of the flat single-spike truth.
#[derive(Debug, Clone)]
pub struct MotivatingPair {
    pub u0: OrthoFrame,
    /// All `s` support entries perturbed by `±ε` (then renormalized).
    pub u1_hat: OrthoFrame,
    /// Only two support entries perturbed, by `±δ`.
    pub u2_hat: OrthoFrame,
    pub delta: f64,
}

/// Largest `ε` for which the matching `δ` exists.
pub fn motivating_max_eps(s: usize) -> f64 {
    let s = s as f64;
    ((1.0 / (1.0 - 2.0 / s).powi(2) - 1.0) / s).sqrt()
}

/// Build `U₀ = (1/√s, …, 1/√s, 0, …)ᵀ` and its two perturbations.
///
/// With `c(x)² = 1/(1 + s x²)`, `Û₁` has entries `c(ε)(1/√s ± ε)` on the two
/// halves of the support and `Û₂` perturbs only the first and last support
/// entries to `c(δ)(1/√s ± δ)`. Equal projection losses need
/// `U₀ᵀÛ₁ = U₀ᵀÛ₂`, i.e. `c(δ) = (s/2)(c(ε) − 1 + 2/s)`.
pub fn motivating_pair(s: usize, p: usize, eps: f64) -> Result<MotivatingPair> {
    if s < 4 || s % 2 == 1 || s > p {
        return Err(Error::invalid(format!(
            "need even s with 4 <= s <= p, got s = {s}, p = {p}"
        )));
    }
    if !(eps >= 0.0) {
        return Err(Error::invalid(format!(
            "eps must be nonnegative, got {eps}"
        )));
    }
    let sf = s as f64;
    let c = |x: f64| 1.0 / (1.0 + sf * x * x).sqrt();
    let c_delta = 0.5 * sf * (c(eps) - 1.0 + 2.0 / sf);
    if !(c_delta > 0.0 && c_delta <= 1.0) {
        return Err(Error::Infeasible(format!(
            "no delta matches eps = {eps} at s = {s}; eps must stay below {:.6}",
            motivating_max_eps(s)
        )));
    }
    let delta = ((1.0 / (c_delta * c_delta) - 1.0) / sf).max(0.0).sqrt();
    let base = 1.0 / sf.sqrt();

    let u0 = Mat::from_fn(p, 1, |j, _| if j < s { base } else { 0.0 });
    let ce = c(eps);
    let u1 = Mat::from_fn(p, 1, |j, _| match j {
        j if j < s / 2 => ce * (base + eps),
        j if j < s => ce * (base - eps),
        _ => 0.0,
    });
    let u2 = Mat::from_fn(p, 1, |j, _| match j {
        0 => c_delta * (base + delta),
        j if j == s - 1 => c_delta * (base - delta),
        j if j < s => base,
        _ => 0.0,
    });
    Ok(MotivatingPair {
        u0: OrthoFrame::new(u0)?,
        u1_hat: OrthoFrame::new(u1)?,
        u2_hat: OrthoFrame::new(u2)?,
        delta,
    })
}
