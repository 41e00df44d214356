//! The matrix spike-and-slab LASSO prior on a `p×r` loading matrix `B`.
//!
//! Each row is drawn from one of two product laws, selected by `ξ_j`:
//!
//! ```text
//! ξ_j = 1 (slab):  b_jk ~ ψ₁(· | λ)          Laplace, |b_jk| ~ Exp(λ)
//! ξ_j = 0 (spike): b_jk ~ ψ_r(· | λ + λ₀)    |b_jk| ~ Gamma(1/r, λ + λ₀)
//! ξ_j ~ Bernoulli(θ),  θ ~ Beta(1, p^{1+κ}),  λ₀ ~ IGamma(1/p², 1)
//! ```
//!
//! where `ψ_α(x | λ) = λ^{1/α} / (2Γ(1/α)) · |x|^{1/α − 1} · exp(−λ|x|)`.
//!
//! The `λ₀` hyperprior is truncated to `λ₀ ≤ LAMBDA0_CAP`; both the exact
//! sampler here and the Metropolis step in the sampler target the same
//! truncated law.

use rand::Rng;
use rand_distr::{Beta, Distribution, Exp1, Gamma, Open01};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Upper truncation point of the `λ₀` hyperprior.
pub const LAMBDA0_CAP: f64 = 1e12;

/// Floor applied to `|x|` inside the double-Gamma log-density.
pub const ABS_FLOOR: f64 = 1e-300;

fn default_lambda() -> f64 {
    1.0
}
fn default_kappa() -> f64 {
    1.0
}
fn default_ab() -> f64 {
    1.0
}

/// Fixed hyperparameters of the prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsslHyper {
    /// Slab rate `λ`.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Exponent `κ` in `θ ~ Beta(1, p^{1+κ})`.
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_ab")]
    pub a_sigma: f64,
    #[serde(default = "default_ab")]
    pub b_sigma: f64,
    pub p: usize,
    pub r: usize,
}

impl MsslHyper {
    /// Hyperparameters with the documented defaults `λ = κ = a_σ = b_σ = 1`.
    pub fn new(p: usize, r: usize) -> Self {
        MsslHyper {
            lambda: 1.0,
            kappa: 1.0,
            a_sigma: 1.0,
            b_sigma: 1.0,
            p,
            r,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(Error::invalid(format!(
                "kappa must lie in (0, 1], got {}",
                self.kappa
            )));
        }
        if !(self.a_sigma >= 1.0 && self.b_sigma >= 1.0)
            || !self.a_sigma.is_finite()
            || !self.b_sigma.is_finite()
        {
            return Err(Error::invalid(format!(
                "a_sigma and b_sigma must be >= 1, got ({}, {})",
                self.a_sigma, self.b_sigma
            )));
        }
        if self.p == 0 || self.r == 0 || self.r > self.p {
            return Err(Error::invalid(format!(
                "need 1 <= r <= p, got p = {}, r = {}",
                self.p, self.r
            )));
        }
        Ok(())
    }

    /// Shape `1/p²` of the inverse-Gamma prior on `λ₀` (rate 1).
    pub fn lambda0_shape(&self) -> f64 {
        1.0 / (self.p as f64).powi(2)
    }

    /// Second Beta parameter `p^{1+κ}` of the `θ` prior.
    pub fn theta_beta(&self) -> f64 {
        (self.p as f64).powf(1.0 + self.kappa)
    }
}

/// One joint draw from the prior.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorDraw {
    pub b: Mat,
    pub xi: Vec<bool>,
    pub theta: f64,
    pub lambda0: f64,
}

/// Pins for the hierarchical levels, used to probe conditional laws.
#[derive(Debug, Clone, Copy, Default)]
pub struct PriorOverrides {
    pub theta: Option<f64>,
    pub lambda0: Option<f64>,
}

/// `log ψ(x)` for the double-Gamma law with the given shape (`1/α`) and rate.
pub fn double_gamma_logpdf(x: f64, shape: f64, rate: f64) -> Result<f64> {
    if !(shape > 0.0 && shape.is_finite()) || !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::invalid(format!(
            "double gamma needs positive shape and rate, got ({shape}, {rate})"
        )));
    }
    Ok(dg_logpdf(x, shape, rate))
}

#[inline]
pub(crate) fn dg_logpdf(x: f64, shape: f64, rate: f64) -> f64 {
    let ax = x.abs().max(ABS_FLOOR);
    shape * rate.ln() - std::f64::consts::LN_2 - ln_gamma(shape) + (shape - 1.0) * ax.ln()
        - rate * ax
}

/// Row log-prior given the indicator: slab `Σ log ψ₁(b | λ)` when `xi`,
/// spike `Σ log ψ_r(b | λ + λ₀)` otherwise (`r = b_row.len()`).
pub fn mssl_row_logprior(b_row: &[f64], xi: bool, lambda: f64, lambda0: f64) -> Result<f64> {
    if b_row.is_empty() {
        return Err(Error::invalid("empty row"));
    }
    if !(lambda > 0.0) || !(lambda0 > 0.0) {
        return Err(Error::invalid(format!(
            "lambda and lambda0 must be positive, got ({lambda}, {lambda0})"
        )));
    }
    Ok(row_logprior(
        b_row.iter().copied(),
        b_row.len(),
        xi,
        lambda,
        lambda0,
    ))
}

#[inline]
pub(crate) fn row_logprior(
    b_row: impl Iterator<Item = f64>,
    r: usize,
    xi: bool,
    lambda: f64,
    lambda0: f64,
) -> f64 {
    let (shape, rate) = component(r, xi, lambda, lambda0);
    b_row.map(|b| dg_logpdf(b, shape, rate)).sum()
}

/// (shape, rate) of the per-entry magnitude law for the given component.
#[inline]
pub(crate) fn component(r: usize, xi: bool, lambda: f64, lambda0: f64) -> (f64, f64) {
    if xi {
        (1.0, lambda)
    } else {
        (1.0 / r as f64, lambda + lambda0)
    }
}

/// Draw one row of `B` from the selected component: magnitudes from the
/// Gamma law, signs uniform.
pub fn sample_row<R: Rng + ?Sized>(
    r: usize,
    xi: bool,
    lambda: f64,
    lambda0: f64,
    rng: &mut R,
) -> Vec<f64> {
    let (shape, rate) = component(r, xi, lambda, lambda0);
    let gamma = Gamma::new(shape, 1.0 / rate).expect("positive shape and rate");
    (0..r)
        .map(|_| {
            let mag: f64 = gamma.sample(rng);
            if rng.random::<bool>() {
                mag
            } else {
                -mag
            }
        })
        .collect()
}

/// Log-density of the truncated `IGamma(a, 1)` law on `(0, LAMBDA0_CAP]`, up to
/// the normalizing constant.
pub fn lambda0_log_prior(lambda0: f64, shape: f64) -> f64 {
    if !(lambda0 > 0.0) || lambda0 > LAMBDA0_CAP {
        return f64::NEG_INFINITY;
    }
    -(shape + 1.0) * lambda0.ln() - 1.0 / lambda0
}

/// Exact draw of `λ₀ ~ IGamma(shape, 1)` truncated to `λ₀ ≤ LAMBDA0_CAP`.
///
/// Works on `t = log g` with `g = 1/λ₀ ~ Gamma(shape, 1)`, whose density is
/// `∝ exp(shape·t − eᵗ)` on `t ≥ −log(cap)`. For `shape < 1` this is sampled by
/// rejection from the envelope `exp(shape·t)` on `[t_min, 0]` and
/// `exp(−1 − (1 − shape)·t)` on `(0, ∞)`, which never underflows even for
/// shapes near zero.
pub fn sample_lambda0<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    let t_min = -LAMBDA0_CAP.ln();
    if shape >= 1.0 {
        let gamma = Gamma::new(shape, 1.0).expect("positive shape");
        loop {
            let g: f64 = gamma.sample(rng);
            if g >= 1.0 / LAMBDA0_CAP {
                return 1.0 / g;
            }
        }
    }
    // mass of the left piece: (1 − e^{a t_min}) / a
    let left_span = -(shape * t_min).exp_m1();
    let left_mass = left_span / shape;
    let right_mass = (-1.0f64).exp() / (1.0 - shape);
    let p_left = left_mass / (left_mass + right_mass);
    loop {
        let (t, log_accept) = if rng.random::<f64>() < p_left {
            // inverse cdf of e^{a t} on [t_min, 0]
            let u: f64 = rng.sample(Open01);
            let t = (-(u * left_span)).ln_1p() / shape;
            (t.max(t_min), -t.exp())
        } else {
            let e: f64 = rng.sample(Exp1);
            let t = e / (1.0 - shape);
            (t, 1.0 + t - t.exp())
        };
        let u: f64 = rng.sample(Open01);
        if u.ln() < log_accept {
            return (-t).exp().min(LAMBDA0_CAP);
        }
    }
}

/// Joint draw `(λ₀, θ, ξ, B)` from the prior.
pub fn sample_prior<R: Rng + ?Sized>(hyper: &MsslHyper, rng: &mut R) -> Result<PriorDraw> {
    sample_prior_with(hyper, &PriorOverrides::default(), rng)
}

/// [`sample_prior`] with optional pinned `θ` and/or `λ₀`.
pub fn sample_prior_with<R: Rng + ?Sized>(
    hyper: &MsslHyper,
    overrides: &PriorOverrides,
    rng: &mut R,
) -> Result<PriorDraw> {
    hyper.validate()?;
    let lambda0 = match overrides.lambda0 {
        Some(l) if l > 0.0 => l,
        Some(l) => {
            return Err(Error::invalid(format!(
                "lambda0 override must be positive, got {l}"
            )))
        }
        None => sample_lambda0(hyper.lambda0_shape(), rng),
    };
    let theta = match overrides.theta {
        Some(t) if (0.0..=1.0).contains(&t) => t,
        Some(t) => {
            return Err(Error::invalid(format!(
                "theta override outside [0, 1]: {t}"
            )))
        }
        None => Beta::new(1.0, hyper.theta_beta())
            .map_err(|e| Error::Numeric(format!("theta prior: {e}")))?
            .sample(rng),
    };
    let (p, r) = (hyper.p, hyper.r);
    let xi: Vec<bool> = (0..p).map(|_| rng.random::<f64>() < theta).collect();
    let mut b = Mat::zeros(p, r);
    for (j, &x) in xi.iter().enumerate() {
        let row = sample_row(r, x, hyper.lambda, lambda0, rng);
        for (k, v) in row.into_iter().enumerate() {
            b[(j, k)] = v;
        }
    }
    Ok(PriorDraw {
        b,
        xi,
        theta,
        lambda0,
    })
}

/// Generalized row support `{j : ‖B_j‖₂ > δ}`, ascending.
pub fn supp_delta(b: &Mat, delta: f64) -> Result<Vec<usize>> {
    if !(delta > 0.0) {
        return Err(Error::invalid(format!(
            "delta must be positive, got {delta}"
        )));
    }
    Ok(b.row_iter()
        .enumerate()
        .filter(|(_, row)| row.norm() > delta)
        .map(|(j, _)| j)
        .collect())
}

/// Monte Carlo summary of `|supp_δ(B)|` under the prior.
#[derive(Debug, Clone, Copy)]
pub struct TailStats {
    pub mean_support: f64,
    /// Empirical `Π(|supp_δ(B)| > β s)`.
    pub tail_freq: f64,
    pub n_draws: usize,
}

pub fn prior_tail_stats<R: Rng + ?Sized>(
    hyper: &MsslHyper,
    delta: f64,
    beta: f64,
    s: usize,
    n_draws: usize,
    overrides: &PriorOverrides,
    rng: &mut R,
) -> Result<TailStats> {
    if n_draws < 1000 {
        return Err(Error::invalid(format!(
            "need at least 1000 draws, got {n_draws}"
        )));
    }
    let threshold = beta * s as f64;
    let mut total = 0usize;
    let mut exceed = 0usize;
    for _ in 0..n_draws {
        let draw = sample_prior_with(hyper, overrides, rng)?;
        let size = supp_delta(&draw.b, delta)?.len();
        total += size;
        if size as f64 > threshold {
            exceed += 1;
        }
    }
    Ok(TailStats {
        mean_support: total as f64 / n_draws as f64,
        tail_freq: exceed as f64 / n_draws as f64,
        n_draws,
    })
}
