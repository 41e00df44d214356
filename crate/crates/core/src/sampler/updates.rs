//! Single-block updates of the Metropolis-within-Gibbs sweep.
//!
//! Each conjugate block has a `*_conditional` helper returning the exact
//! distribution parameters, and each Metropolis block exposes its log
//! acceptance ratio, so tests can check the algebra without sampling.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, Open01, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{dims, Mat};
use crate::prior::{lambda0_log_prior, row_logprior, sample_row, MsslHyper};

use super::ChainState;

/// `ZᵀZ` and `ZᵀY`, the only data summaries the row updates need.
#[derive(Debug, Clone)]
pub struct Sufficient {
    pub ztz: Mat,
    pub zty: Mat,
}

impl Sufficient {
    pub fn new(z: &Mat, y: &Mat) -> Self {
        Sufficient {
            ztz: z.transpose() * z,
            zty: z.transpose() * y,
        }
    }

    /// No data: every row likelihood is constant.
    pub fn flat(p: usize, r: usize) -> Self {
        Sufficient {
            ztz: Mat::zeros(r, r),
            zty: Mat::zeros(r, p),
        }
    }
}

/// Gaussian log-likelihood of column `j` of `Y` as a function of row `j` of
/// `B`, dropping terms free of `b`.
pub fn row_log_lik(b: &[f64], j: usize, suff: &Sufficient, sigma2: f64) -> f64 {
    let r = b.len();
    let mut quad = 0.0;
    let mut lin = 0.0;
    for k in 0..r {
        lin += b[k] * suff.zty[(k, j)];
        for l in 0..r {
            quad += b[k] * suff.ztz[(k, l)] * b[l];
        }
    }
    -(quad - 2.0 * lin) / (2.0 * sigma2)
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample::<f64, _>(Open01).ln()
}

fn accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    if log_ratio.is_nan() {
        return false;
    }
    log_ratio >= 0.0 || log_uniform(rng) < log_ratio
}

/// Conditional mean (`n×r`) and covariance (`r×r`) of the latent factors:
/// `z_i ~ N(M⁻¹Bᵀy_i, σ²M⁻¹)` with `M = BᵀB + σ²I`.
pub fn z_conditional(state: &ChainState, y: &Mat) -> Result<(Mat, Mat)> {
    let r = state.b.ncols();
    if y.ncols() != state.b.nrows() {
        return Err(Error::shape(format!("n x {}", state.b.nrows()), dims(y)));
    }
    let m = state.b.transpose() * &state.b + Mat::identity(r, r) * state.sigma2;
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::Numeric("B'B + sigma2 I is not positive definite".into()))?;
    let m_inv = chol.inverse();
    let mean = y * &state.b * &m_inv;
    Ok((mean, m_inv * state.sigma2))
}

pub fn update_z<R: Rng + ?Sized>(state: &mut ChainState, y: &Mat, rng: &mut R) -> Result<()> {
    let (mean, cov) = z_conditional(state, y)?;
    let l = cov
        .cholesky()
        .ok_or_else(|| Error::Numeric("latent factor covariance is not positive definite".into()))?
        .unpack();
    let g = Mat::from_fn(mean.nrows(), mean.ncols(), |_, _| {
        rng.sample::<f64, _>(StandardNormal)
    });
    state.z = mean + g * l.transpose();
    Ok(())
}

/// `(shape, scale)` of the inverse-Gamma conditional of `σ²`.
pub fn sigma2_conditional(state: &ChainState, y: &Mat, hyper: &MsslHyper) -> (f64, f64) {
    let (n, p) = (y.nrows(), y.ncols());
    let resid = y - &state.z * state.b.transpose();
    (
        hyper.a_sigma + 0.5 * (n * p) as f64,
        hyper.b_sigma + 0.5 * resid.norm_squared(),
    )
}

/// Draw from `IGamma(shape, scale)`.
pub fn sample_inv_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> Result<f64> {
    let g: f64 = Gamma::new(shape, 1.0)
        .map_err(|e| Error::Numeric(format!("inverse gamma shape {shape}: {e}")))?
        .sample(rng);
    Ok(scale / g)
}

pub fn update_sigma2<R: Rng + ?Sized>(
    state: &mut ChainState,
    y: &Mat,
    hyper: &MsslHyper,
    rng: &mut R,
) -> Result<()> {
    let (shape, scale) = sigma2_conditional(state, y, hyper);
    let s2 = sample_inv_gamma(shape, scale, rng)?;
    if !(s2 > 0.0 && s2.is_finite()) {
        return Err(Error::Numeric(format!(
            "sigma2 draw {s2} is not positive and finite"
        )));
    }
    state.sigma2 = s2;
    Ok(())
}

/// `(α, β)` of the Beta conditional of `θ`.
pub fn theta_conditional(xi: &[bool], hyper: &MsslHyper) -> (f64, f64) {
    let k = xi.iter().filter(|&&x| x).count() as f64;
    let p = xi.len() as f64;
    (1.0 + k, hyper.theta_beta() + p - k)
}

pub fn update_theta<R: Rng + ?Sized>(
    state: &mut ChainState,
    hyper: &MsslHyper,
    rng: &mut R,
) -> Result<()> {
    let (a, b) = theta_conditional(&state.xi, hyper);
    state.theta = Beta::new(a, b)
        .map_err(|e| Error::Numeric(format!("theta conditional Beta({a}, {b}): {e}")))?
        .sample(rng);
    Ok(())
}

/// `P(ξ_j = 1 | B_j, θ, λ₀)`.
pub fn xi_inclusion_prob(b_row: &[f64], theta: f64, lambda: f64, lambda0: f64) -> f64 {
    if theta >= 1.0 {
        return 1.0;
    }
    if theta <= 0.0 {
        return 0.0;
    }
    let r = b_row.len();
    let slab = theta.ln() + row_logprior(b_row.iter().copied(), r, true, lambda, lambda0);
    let spike = (-theta).ln_1p() + row_logprior(b_row.iter().copied(), r, false, lambda, lambda0);
    // 1 / (1 + e^{spike − slab}), stable for either sign
    let d = spike - slab;
    if d > 0.0 {
        let e = (-d).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + d.exp())
    }
}

pub fn update_xi<R: Rng + ?Sized>(state: &mut ChainState, hyper: &MsslHyper, rng: &mut R) {
    let r = state.b.ncols();
    let mut row = vec![0.0; r];
    for j in 0..state.b.nrows() {
        for k in 0..r {
            row[k] = state.b[(j, k)];
        }
        let prob = xi_inclusion_prob(&row, state.theta, hyper.lambda, state.lambda0);
        state.xi[j] = rng.random::<f64>() < prob;
    }
}

/// Log of the `λ₀` conditional density (truncated prior times spike rows),
/// up to a constant.
pub fn lambda0_log_target(lambda0: f64, b: &Mat, xi: &[bool], hyper: &MsslHyper) -> f64 {
    let prior = lambda0_log_prior(lambda0, hyper.lambda0_shape());
    if prior == f64::NEG_INFINITY {
        return prior;
    }
    let r = b.ncols();
    let spikes: f64 = xi
        .iter()
        .enumerate()
        .filter(|(_, &x)| !x)
        .map(|(j, _)| row_logprior(b.row(j).iter().copied(), r, false, hyper.lambda, lambda0))
        .sum();
    prior + spikes
}

/// Log acceptance ratio for moving `λ₀` from `from` to `to` under a
/// symmetric random walk on `log λ₀` (includes the Jacobian `to/from`).
pub fn lambda0_log_accept(from: f64, to: f64, b: &Mat, xi: &[bool], hyper: &MsslHyper) -> f64 {
    lambda0_log_target(to, b, xi, hyper) + to.ln()
        - lambda0_log_target(from, b, xi, hyper)
        - from.ln()
}

/// Random-walk Metropolis step on `log λ₀`. Returns whether the move was accepted.
pub fn update_lambda0<R: Rng + ?Sized>(
    state: &mut ChainState,
    hyper: &MsslHyper,
    step_sd: f64,
    rng: &mut R,
) -> bool {
    let step = step_sd * rng.sample::<f64, _>(StandardNormal);
    if step == 0.0 {
        return true;
    }
    let prop = state.lambda0 * step.exp();
    let ratio = lambda0_log_accept(state.lambda0, prop, &state.b, &state.xi, hyper);
    if accept(ratio, rng) {
        state.lambda0 = prop;
        true
    } else {
        false
    }
}

/// Log acceptance ratio of replacing row `j` of `B` by `proposal` in a
/// symmetric random walk.
pub fn b_row_log_accept(
    state: &ChainState,
    suff: &Sufficient,
    hyper: &MsslHyper,
    j: usize,
    proposal: &[f64],
) -> f64 {
    let r = state.b.ncols();
    let current: Vec<f64> = state.b.row(j).iter().copied().collect();
    let xi = state.xi[j];
    let lp = |b: &[f64]| {
        row_log_lik(b, j, suff, state.sigma2)
            + row_logprior(b.iter().copied(), r, xi, hyper.lambda, state.lambda0)
    };
    lp(proposal) - lp(&current)
}

/// One random-walk proposal `B_j + sd_j·g` per row, in index order. Returns
/// the per-row accept flags.
pub fn update_b_rows<R: Rng + ?Sized>(
    state: &mut ChainState,
    suff: &Sufficient,
    hyper: &MsslHyper,
    sds: &[f64],
    rng: &mut R,
) -> Vec<bool> {
    let (p, r) = (state.b.nrows(), state.b.ncols());
    let mut accepted = Vec::with_capacity(p);
    let mut prop = vec![0.0; r];
    for j in 0..p {
        for k in 0..r {
            prop[k] = state.b[(j, k)] + sds[j] * rng.sample::<f64, _>(StandardNormal);
        }
        let ratio = b_row_log_accept(state, suff, hyper, j, &prop);
        let ok = accept(ratio, rng);
        if ok {
            state
                .b
                .set_row(j, &DVector::from_column_slice(&prop).transpose());
        }
        accepted.push(ok);
    }
    accepted
}

/// Accept counts of the two prior-driven row moves.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct JumpCounts {
    pub refresh: usize,
    pub flip: usize,
}

/// Log acceptance ratio of moving row `j` to `(ξ', b')` with `b'` drawn from
/// the `ξ'` component of the prior: `π(ξ')L(b') / (π(ξ)L(b))`.
pub fn row_jump_log_accept(
    state: &ChainState,
    suff: &Sufficient,
    j: usize,
    new_xi: bool,
    proposal: &[f64],
) -> f64 {
    let log_pi = |x: bool| {
        if x {
            state.theta.ln()
        } else {
            (-state.theta).ln_1p()
        }
    };
    let current: Vec<f64> = state.b.row(j).iter().copied().collect();
    let num = log_pi(new_xi) + row_log_lik(proposal, j, suff, state.sigma2);
    let den = log_pi(state.xi[j]) + row_log_lik(&current, j, suff, state.sigma2);
    if den == f64::NEG_INFINITY {
        // the current indicator has zero prior mass; any finite move is an improvement
        return if num.is_finite() {
            0.0
        } else {
            f64::NEG_INFINITY
        };
    }
    num - den
}

/// Two prior-driven moves per row: an independence refresh of `B_j` within
/// its current component, then a joint proposal flipping `ξ_j` with a fresh
/// row from the other component.
pub fn update_rows_jump<R: Rng + ?Sized>(
    state: &mut ChainState,
    suff: &Sufficient,
    hyper: &MsslHyper,
    rng: &mut R,
) -> JumpCounts {
    let (p, r) = (state.b.nrows(), state.b.ncols());
    let mut counts = JumpCounts::default();
    for j in 0..p {
        for flip in [false, true] {
            let new_xi = state.xi[j] ^ flip;
            let prop = sample_row(r, new_xi, hyper.lambda, state.lambda0, rng);
            let ratio = row_jump_log_accept(state, suff, j, new_xi, &prop);
            if accept(ratio, rng) {
                state
                    .b
                    .set_row(j, &DVector::from_column_slice(&prop).transpose());
                state.xi[j] = new_xi;
                if flip {
                    counts.flip += 1;
                } else {
                    counts.refresh += 1;
                }
            }
        }
    }
    counts
}
