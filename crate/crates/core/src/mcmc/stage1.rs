//! Stage 1: per-margin Bayesian hierarchical regression with a latent
//! spatial field.
//!
//! Each margin is a normal linear model on a latent linear scale (the
//! unwrapped angle for the circular margin, log speed for the linear one):
//!
//!   w_i = beta0 + z_i' beta1 + psi_i' gamma + eps_i,  eps ~ N(0, sigma^2)
//!
//! with gamma a mesh-weight GMRF whose precision Q(theta) comes from the
//! SPDE approximation, optionally with a covariate-driven nonstationary
//! kappa field. The circular margin additionally samples per-observation
//! winding indices k_i so that w_i = phi_i + 2 pi k_i.
//!
//! Conjugate blocks (beta0, beta1, gamma, sigma^2, xi^2) are Gibbs steps;
//! theta uses an adaptive-Metropolis block, zeta^2 a log-scale scalar
//! Metropolis step, and the windings a symmetric +/-1 Metropolis sweep.

use crate::density::WindingSupport;
use crate::error::{Error, Result};
use crate::fem::FemMatrices;
use crate::mcmc::chain::ChainOutput;
use crate::mcmc::ram::RamAdapter;
use crate::mesh::BasisMatrix;
use crate::prior::{
    self, log_prior_spatial, normal_log_pdf_var, weibull_log_pdf, IG_RATE, IG_SHAPE,
    INTERCEPT_VAR_MARGIN, THETA_KAPPA0_BOUNDS,
};
use crate::sparse::{LdlFactor, SymSparse};
use crate::spde::{kappa_tau_fields, precision_nonstationary, PrecisionMatrix};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use std::f64::consts::TAU;

/// Observations and design for one margin.
#[derive(Debug, Clone)]
pub struct MarginData {
    /// Latent-scale response: angle in [-pi, pi) for the circular margin,
    /// log of the positive response for the linear margin.
    pub response: Vec<f64>,
    /// n x p slope covariates (may have p = 0).
    pub covariates: Vec<Vec<f64>>,
    /// Projection of mesh weights to observation sites.
    pub basis: BasisMatrix,
    pub circular: bool,
}

impl MarginData {
    pub fn n_obs(&self) -> usize {
        self.response.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.covariates.first().map_or(0, Vec::len)
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_obs();
        if self.covariates.len() != n && !self.covariates.is_empty() {
            return Err(Error::Data(format!(
                "{} covariate rows for {} observations",
                self.covariates.len(),
                n
            )));
        }
        if self.basis.rows.len() != n {
            return Err(Error::Data(format!(
                "{} basis rows for {} observations",
                self.basis.rows.len(),
                n
            )));
        }
        Ok(())
    }
}

/// Sampler settings for one margin chain.
#[derive(Debug, Clone)]
pub struct Stage1Config {
    pub iters: usize,
    pub burn: usize,
    pub thin: usize,
    /// Calibrated Weibull scale of the zeta^2 hyperprior.
    pub pc_lambda: f64,
    pub winding_support: WindingSupport,
}

impl Stage1Config {
    pub fn n_kept(&self) -> usize {
        (self.iters.saturating_sub(self.burn)) / self.thin.max(1)
    }

    fn validate(&self) -> Result<()> {
        if self.iters == 0 || self.burn >= self.iters || self.thin == 0 {
            return Err(Error::Config(format!(
                "bad chain lengths: iters {} burn {} thin {}",
                self.iters, self.burn, self.thin
            )));
        }
        Ok(())
    }
}

/// Full parameter state of one margin sampler.
#[derive(Debug, Clone)]
pub struct Stage1State {
    pub beta0: f64,
    pub beta1: Vec<f64>,
    pub gamma: Vec<f64>,
    pub sigma2: f64,
    pub xi2: f64,
    /// (theta_tau0, theta_kappa0, theta_kappa1...)
    pub theta: Vec<f64>,
    pub zeta2: f64,
    pub windings: Vec<i32>,
}

/// Immutable per-margin context shared by all update steps.
pub struct Stage1Model<'a> {
    pub data: &'a MarginData,
    pub fem: &'a FemMatrices,
    /// Nonstationarity covariates at mesh nodes (n_nodes x q; q may be 0).
    pub z_kappa_nodes: &'a [Vec<f64>],
    pub pc_lambda: f64,
    psi_gram: SymSparse,
}

impl<'a> Stage1Model<'a> {
    pub fn new(
        data: &'a MarginData,
        fem: &'a FemMatrices,
        z_kappa_nodes: &'a [Vec<f64>],
        pc_lambda: f64,
    ) -> Result<Self> {
        data.validate()?;
        let m = fem.mass_lumped.len();
        if data.basis.n_nodes != m || z_kappa_nodes.len() != m {
            return Err(Error::Data(
                "basis / kappa-covariate node count differs from mesh".into(),
            ));
        }
        let psi_gram = SymSparse::from_triplets(m, &data.basis.gram_triplets());
        Ok(Stage1Model {
            data,
            fem,
            z_kappa_nodes,
            pc_lambda,
            psi_gram,
        })
    }

    pub fn n_theta(&self) -> usize {
        2 + self.z_kappa_nodes.first().map_or(0, Vec::len)
    }

    /// Unwrapped working response for the current winding state.
    pub fn working_response(&self, state: &Stage1State) -> Vec<f64> {
        self.data
            .response
            .iter()
            .zip(&state.windings)
            .map(|(&r, &k)| r + TAU * k as f64)
            .collect()
    }

    /// Linear predictor without the intercept contribution split out.
    pub fn linear_predictor(&self, state: &Stage1State) -> Vec<f64> {
        let field = self.data.basis.apply(&state.gamma);
        (0..self.data.n_obs())
            .map(|i| {
                let zb: f64 = if state.beta1.is_empty() {
                    0.0
                } else {
                    self.data.covariates[i]
                        .iter()
                        .zip(&state.beta1)
                        .map(|(a, b)| a * b)
                        .sum()
                };
                state.beta0 + zb + field[i]
            })
            .collect()
    }

    pub fn precision(&self, theta: &[f64]) -> Result<PrecisionMatrix> {
        let (tau, kappa) = kappa_tau_fields(theta, self.z_kappa_nodes)?;
        precision_nonstationary(self.fem, &tau, &kappa)
    }

    pub fn initial_state(&self) -> Result<Stage1State> {
        let n = self.data.n_obs();
        let m = self.fem.mass_lumped.len();
        let circular = self.data.circular;
        // A circular response needs a circular-aware start: the arithmetic
        // mean of wrapped angles clustered near the +-pi seam lands near 0,
        // and recovering from that requires a slow joint migration of the
        // intercept and the windings. Start from the circular mean instead
        // and unwrap every observation onto that branch.
        let (mean, windings) = if circular {
            let (s, c) = self
                .data
                .response
                .iter()
                .fold((0.0, 0.0), |(s, c), &r| (s + r.sin(), c + r.cos()));
            let mean = s.atan2(c);
            let windings: Vec<i32> = self
                .data
                .response
                .iter()
                .map(|&r| ((mean - r) / TAU).round() as i32)
                .collect();
            (mean, windings)
        } else {
            (
                self.data.response.iter().sum::<f64>() / n as f64,
                vec![0; n],
            )
        };
        let var = self
            .data
            .response
            .iter()
            .zip(&windings)
            .map(|(&r, &k)| {
                let d = r + TAU * k as f64 - mean;
                d * d
            })
            .sum::<f64>()
            / (n as f64 - 1.0).max(1.0);
        let (tau_lo, tau_hi) = prior::theta_tau_bounds(circular);
        let mut theta = vec![
            0.5 * (tau_lo + tau_hi),
            0.5 * (THETA_KAPPA0_BOUNDS.0 + THETA_KAPPA0_BOUNDS.1),
        ];
        theta.resize(self.n_theta(), 0.0);
        Ok(Stage1State {
            beta0: mean,
            beta1: vec![0.0; self.data.n_covariates()],
            gamma: vec![0.0; m],
            sigma2: var.max(1e-4),
            xi2: 1.0,
            theta,
            zeta2: 1.0,
            windings,
        })
    }
}

pub fn sample_inv_gamma(shape: f64, rate: f64, rng: &mut impl Rng) -> f64 {
    let g = Gamma::new(shape, 1.0).expect("valid gamma shape");
    rate / g.sample(rng)
}

/// Gibbs step for the intercept.
pub fn gibbs_beta0(model: &Stage1Model, state: &mut Stage1State, rng: &mut impl Rng) {
    let w = model.working_response(state);
    let field = model.data.basis.apply(&state.gamma);
    let n = w.len() as f64;
    let mut rsum = 0.0;
    for i in 0..w.len() {
        let zb: f64 = model.data.covariates.get(i).map_or(0.0, |row| {
            row.iter().zip(&state.beta1).map(|(a, b)| a * b).sum()
        });
        rsum += w[i] - zb - field[i];
    }
    let prec = n / state.sigma2 + 1.0 / INTERCEPT_VAR_MARGIN;
    let mean = (rsum / state.sigma2) / prec;
    let z: f64 = StandardNormal.sample(rng);
    state.beta0 = mean + z / prec.sqrt();
}

/// Gibbs step for the slope block.
pub fn gibbs_beta1(model: &Stage1Model, state: &mut Stage1State, rng: &mut impl Rng) {
    let p = model.data.n_covariates();
    if p == 0 {
        return;
    }
    let w = model.working_response(state);
    let field = model.data.basis.apply(&state.gamma);
    let n = w.len();
    let mut ztz = DMatrix::zeros(p, p);
    let mut rhs = DVector::zeros(p);
    for i in 0..n {
        let zi = &model.data.covariates[i];
        let r = w[i] - state.beta0 - field[i];
        for a in 0..p {
            rhs[a] += zi[a] * r;
            for b in 0..p {
                ztz[(a, b)] += zi[a] * zi[b];
            }
        }
    }
    let mut prec = ztz / state.sigma2;
    for a in 0..p {
        prec[(a, a)] += 1.0 / state.xi2;
    }
    rhs /= state.sigma2;
    let chol = prec.clone().cholesky().expect("slope precision is SPD");
    let mean = chol.solve(&rhs);
    // sample mean + L^{-T} z
    let z = DVector::from_iterator(p, (0..p).map(|_| StandardNormal.sample(rng)));
    let lt = chol.l().transpose();
    let draw = mean + lt.solve_upper_triangular(&z).expect("triangular solve");
    state.beta1 = draw.iter().copied().collect();
}

/// Gibbs step for the mesh weights gamma.
pub fn gibbs_gamma(
    model: &Stage1Model,
    state: &mut Stage1State,
    rng: &mut impl Rng,
) -> Result<()> {
    let q = model.precision(&state.theta)?;
    let mut prec = q.q;
    // add psi' psi / sigma2
    let scaled: Vec<(usize, usize, f64)> = model
        .psi_gram
        .iter()
        .map(|(i, j, v)| (i, j, v / state.sigma2))
        .collect();
    prec = prec.add(&SymSparse::from_triplets(prec.n(), &scaled));
    let factor = LdlFactor::new(&prec)?;

    let w = model.working_response(state);
    let mut resid = vec![0.0; w.len()];
    for i in 0..w.len() {
        let zb: f64 = model.data.covariates.get(i).map_or(0.0, |row| {
            row.iter().zip(&state.beta1).map(|(a, b)| a * b).sum()
        });
        resid[i] = (w[i] - state.beta0 - zb) / state.sigma2;
    }
    let rhs = model.data.basis.apply_transpose(&resid);
    let mean = factor.solve(&rhs);
    let m = mean.len();
    let z: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
    let noise = factor.sample_from_precision(&z);
    state.gamma = mean.iter().zip(&noise).map(|(a, b)| a + b).collect();
    Ok(())
}

/// Gibbs step for the observation variance.
pub fn gibbs_sigma2(model: &Stage1Model, state: &mut Stage1State, rng: &mut impl Rng) {
    let w = model.working_response(state);
    let mu = model.linear_predictor(state);
    let ss: f64 = w.iter().zip(&mu).map(|(a, b)| (a - b) * (a - b)).sum();
    let shape = IG_SHAPE + 0.5 * w.len() as f64;
    let rate = IG_RATE + 0.5 * ss;
    state.sigma2 = sample_inv_gamma(shape, rate, rng);
}

/// Gibbs step for the slope-variance hyperparameter.
pub fn gibbs_xi2(state: &mut Stage1State, rng: &mut impl Rng) {
    let p = state.beta1.len() as f64;
    let ss: f64 = state.beta1.iter().map(|b| b * b).sum();
    state.xi2 = sample_inv_gamma(IG_SHAPE + 0.5 * p, IG_RATE + 0.5 * ss, rng);
}

/// Log conditional of theta given gamma and zeta^2 (up to a constant).
fn theta_log_target(model: &Stage1Model, state: &Stage1State, theta: &[f64]) -> Result<f64> {
    let lp = log_prior_spatial(theta, state.zeta2, model.pc_lambda, model.data.circular);
    if !lp.is_finite() {
        return Ok(f64::NEG_INFINITY);
    }
    let q = model.precision(theta)?;
    let factor = q.factor()?;
    Ok(0.5 * factor.log_det() - 0.5 * q.q.quad_form(&state.gamma) + lp)
}

/// Adaptive-Metropolis block update of theta. Returns acceptance indicator.
pub fn update_theta(
    model: &Stage1Model,
    state: &mut Stage1State,
    adapter: &mut RamAdapter,
    current_lp: &mut Option<f64>,
    rng: &mut impl Rng,
) -> Result<bool> {
    let lp = match *current_lp {
        Some(v) => v,
        None => theta_log_target(model, state, &state.theta)?,
    };
    let (delta, t) = adapter.propose(rng);
    let prop: Vec<f64> = state.theta.iter().zip(&delta).map(|(a, b)| a + b).collect();
    // out-of-support or non-SPD proposals have zero density
    let lp_prop = match theta_log_target(model, state, &prop) {
        Ok(v) => v,
        Err(Error::NotPositiveDefinite { .. }) | Err(Error::InvalidArgument(_)) => {
            f64::NEG_INFINITY
        }
        Err(e) => return Err(e),
    };
    let alpha = (lp_prop - lp).exp().min(1.0);
    let accept = lp_prop.is_finite() && rng.gen_range(0.0..1.0f64) < alpha;
    if accept {
        state.theta = prop;
        *current_lp = Some(lp_prop);
    } else {
        *current_lp = Some(lp);
    }
    adapter.adapt(if alpha.is_finite() { alpha } else { 0.0 }, &t);
    adapter.record(accept);
    Ok(accept)
}

/// Log-scale scalar Metropolis update of zeta^2.
pub fn update_zeta2(
    model: &Stage1Model,
    state: &mut Stage1State,
    adapter: &mut RamAdapter,
    rng: &mut impl Rng,
) -> bool {
    let kappa_slopes = &state.theta[2..];
    let target = |z2: f64| -> f64 {
        if z2 <= 0.0 || !z2.is_finite() {
            return f64::NEG_INFINITY;
        }
        let mut lp = weibull_log_pdf(z2, 0.5, model.pc_lambda);
        for &t in kappa_slopes {
            lp += normal_log_pdf_var(t, z2);
        }
        lp
    };
    let x = state.zeta2.ln();
    let (delta, t) = adapter.propose(rng);
    let xp = x + delta[0];
    let z2p = xp.exp();
    // include the log-scale Jacobian on both sides
    let num = target(z2p) + xp;
    let den = target(state.zeta2) + x;
    let alpha = (num - den).exp().min(1.0);
    let accept = num.is_finite() && rng.gen_range(0.0..1.0f64) < alpha;
    if accept {
        state.zeta2 = z2p;
    }
    adapter.adapt(if alpha.is_finite() { alpha } else { 0.0 }, &t);
    adapter.record(accept);
    accept
}

/// Symmetric +/-1 Metropolis sweep over the winding indices (circular
/// margin only). Returns number of accepted moves.
pub fn update_windings(
    model: &Stage1Model,
    state: &mut Stage1State,
    support: &WindingSupport,
    rng: &mut impl Rng,
) -> usize {
    if !model.data.circular {
        return 0;
    }
    let mu = model.linear_predictor(state);
    let mut accepted = 0;
    for i in 0..state.windings.len() {
        let k = state.windings[i];
        let kp = if rng.gen_bool(0.5) { k + 1 } else { k - 1 };
        if !support.contains(kp) {
            continue;
        }
        let w = model.data.response[i] + TAU * k as f64;
        let wp = model.data.response[i] + TAU * kp as f64;
        let d = ((w - mu[i]).powi(2) - (wp - mu[i]).powi(2)) / (2.0 * state.sigma2);
        if d >= 0.0 || rng.gen_range(0.0..1.0f64) < d.exp() {
            state.windings[i] = kp;
            accepted += 1;
        }
    }
    accepted
}

/// Per-observation log-density of the observable under the margin model.
fn margin_loglik(model: &Stage1Model, state: &Stage1State) -> Vec<f64> {
    let mu = model.linear_predictor(state);
    let support = WindingSupport::default();
    (0..model.data.n_obs())
        .map(|i| {
            if model.data.circular {
                crate::density::wn_log_pdf(
                    model.data.response[i],
                    &crate::density::WrappedNormalParams {
                        mu: mu[i],
                        sigma2: state.sigma2,
                    },
                    &support,
                )
            } else {
                // response is log y; density of y itself
                let sd = state.sigma2.sqrt();
                crate::math::norm_log_pdf((model.data.response[i] - mu[i]) / sd)
                    - sd.ln()
                    - model.data.response[i]
            }
        })
        .collect()
}

/// Posterior fit of one margin.
#[derive(Debug, Clone)]
pub struct MarginFit {
    pub chain: ChainOutput,
    /// draws x n winding draws (empty for the linear margin).
    pub winding_draws: Vec<Vec<i32>>,
    pub theta_acceptance: f64,
    pub zeta2_acceptance: f64,
}

impl MarginFit {
    /// Most frequent winding index per observation across retained draws.
    pub fn winding_mode(&self, n_obs: usize) -> Vec<i32> {
        if self.winding_draws.is_empty() {
            return vec![0; n_obs];
        }
        (0..n_obs)
            .map(|i| {
                let mut counts = std::collections::HashMap::new();
                for draw in &self.winding_draws {
                    *counts.entry(draw[i]).or_insert(0usize) += 1;
                }
                counts
                    .into_iter()
                    .max_by_key(|&(k, c)| (c, -k))
                    .map(|(k, _)| k)
                    .unwrap_or(0)
            })
            .collect()
    }

    /// Posterior-mean parameter state (windings at their modes).
    pub fn posterior_mean_state(&self, model: &Stage1Model) -> Result<Stage1State> {
        let p = model.data.n_covariates();
        let nt = model.n_theta();
        let mut beta1 = Vec::with_capacity(p);
        for j in 0..p {
            beta1.push(self.chain.scalar_mean(&format!("beta1_{j}"))?);
        }
        let mut theta = Vec::with_capacity(nt);
        theta.push(self.chain.scalar_mean("theta_tau0")?);
        theta.push(self.chain.scalar_mean("theta_kappa0")?);
        for j in 0..nt - 2 {
            theta.push(self.chain.scalar_mean(&format!("theta_kappa1_{j}"))?);
        }
        Ok(Stage1State {
            beta0: self.chain.scalar_mean("beta0")?,
            beta1,
            gamma: self.chain.gamma_mean(),
            sigma2: self.chain.scalar_mean("sigma2")?,
            xi2: self.chain.scalar_mean("xi2")?,
            theta,
            zeta2: self.chain.scalar_mean("zeta2")?,
            windings: self.winding_mode(model.data.n_obs()),
        })
    }
}

fn scalar_names(model: &Stage1Model) -> Vec<String> {
    let mut names = vec!["beta0".to_string()];
    for j in 0..model.data.n_covariates() {
        names.push(format!("beta1_{j}"));
    }
    names.push("sigma2".into());
    names.push("xi2".into());
    names.push("theta_tau0".into());
    names.push("theta_kappa0".into());
    for j in 0..model.n_theta() - 2 {
        names.push(format!("theta_kappa1_{j}"));
    }
    names.push("zeta2".into());
    names
}

fn scalar_row(state: &Stage1State) -> Vec<f64> {
    let mut row = vec![state.beta0];
    row.extend_from_slice(&state.beta1);
    row.push(state.sigma2);
    row.push(state.xi2);
    row.extend_from_slice(&state.theta);
    row.push(state.zeta2);
    row
}

/// Run one margin chain.
pub fn fit_margin(model: &Stage1Model, config: &Stage1Config, seed: u64) -> Result<MarginFit> {
    config.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut state = model.initial_state()?;
    let mut theta_adapter = RamAdapter::new_block(model.n_theta(), 0.1);
    let mut zeta_adapter = RamAdapter::new_scalar(0.5);

    let kept = config.n_kept();
    let mut chain = ChainOutput {
        scalar_names: scalar_names(model),
        scalars: Vec::with_capacity(kept),
        gamma: Vec::with_capacity(kept),
        loglik: Vec::with_capacity(kept),
    };
    let mut winding_draws = Vec::new();

    for it in 0..config.iters {
        if it == config.burn {
            theta_adapter.freeze();
            zeta_adapter.freeze();
        }
        update_windings(model, &mut state, &config.winding_support, &mut rng);
        gibbs_beta0(model, &mut state, &mut rng);
        gibbs_beta1(model, &mut state, &mut rng);
        gibbs_gamma(model, &mut state, &mut rng)?;
        gibbs_sigma2(model, &mut state, &mut rng);
        gibbs_xi2(&mut state, &mut rng);
        // gamma changed every sweep, so the theta target is never cached
        let mut theta_lp = None;
        update_theta(model, &mut state, &mut theta_adapter, &mut theta_lp, &mut rng)?;
        if model.n_theta() > 2 {
            update_zeta2(model, &mut state, &mut zeta_adapter, &mut rng);
        } else {
            // no nonstationarity coefficients: zeta^2 follows its prior
            state.zeta2 = prior::sample_weibull_half(model.pc_lambda, &mut rng);
        }

        if it >= config.burn && (it - config.burn) % config.thin == 0 {
            chain.scalars.push(scalar_row(&state));
            chain.gamma.push(state.gamma.clone());
            chain.loglik.push(margin_loglik(model, &state));
            if model.data.circular {
                winding_draws.push(state.windings.clone());
            }
        }
    }

    Ok(MarginFit {
        chain,
        winding_draws,
        theta_acceptance: theta_adapter.acceptance_rate(),
        zeta2_acceptance: zeta_adapter.acceptance_rate(),
    })
}

/// Run several independent chains in parallel and concatenate the retained
/// draws. Chain c uses seed `seed + c`.
pub fn fit_margin_chains(
    model: &Stage1Model,
    config: &Stage1Config,
    seed: u64,
    n_chains: usize,
) -> Result<MarginFit> {
    if n_chains == 0 {
        return Err(Error::Config("need at least one chain".into()));
    }
    let fits: Vec<Result<MarginFit>> = (0..n_chains)
        .into_par_iter()
        .map(|c| fit_margin(model, config, seed + c as u64))
        .collect();
    let mut iter = fits.into_iter();
    let mut merged = iter.next().unwrap()?;
    let mut n_merged = 1.0;
    for fit in iter {
        let fit = fit?;
        merged.chain.scalars.extend(fit.chain.scalars);
        merged.chain.gamma.extend(fit.chain.gamma);
        merged.chain.loglik.extend(fit.chain.loglik);
        merged.winding_draws.extend(fit.winding_draws);
        merged.theta_acceptance += fit.theta_acceptance;
        merged.zeta2_acceptance += fit.zeta2_acceptance;
        n_merged += 1.0;
    }
    merged.theta_acceptance /= n_merged;
    merged.zeta2_acceptance /= n_merged;
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble_fem;
    use crate::mesh::Mesh;
    use approx::assert_abs_diff_eq;
    use rand_chacha::ChaCha8Rng;

    fn toy_setup(
        n: usize,
        circular: bool,
        with_kappa_cov: bool,
    ) -> (MarginData, Mesh, Vec<Vec<f64>>) {
        let mesh = Mesh::regular(4, 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let sites: Vec<[f64; 2]> = (0..n)
            .map(|_| [rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95)])
            .collect();
        let basis = mesh.basis_matrix(&sites, false).unwrap();
        let response: Vec<f64> = (0..n)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let covariates: Vec<Vec<f64>> = sites
            .iter()
            .map(|s| vec![(TAU * s[0]).sin()])
            .collect();
        let z_kappa: Vec<Vec<f64>> = mesh
            .nodes
            .iter()
            .map(|p| {
                if with_kappa_cov {
                    vec![0.5 + (TAU * p[0]).sin()]
                } else {
                    vec![]
                }
            })
            .collect();
        (
            MarginData {
                response,
                covariates,
                basis,
                circular,
            },
            mesh,
            z_kappa,
        )
    }

    fn default_config() -> Stage1Config {
        Stage1Config {
            iters: 60,
            burn: 20,
            thin: 2,
            pc_lambda: 1.0,
            winding_support: WindingSupport::default(),
        }
    }

    #[test]
    fn kept_draw_count() {
        let c = default_config();
        assert_eq!(c.n_kept(), 20);
        let c2 = Stage1Config {
            iters: 15_000,
            burn: 7_000,
            thin: 1,
            ..default_config()
        };
        assert_eq!(c2.n_kept(), 8_000);
    }

    #[test]
    fn beta0_gibbs_matches_conjugate_posterior() {
        let (data, mesh, zk) = toy_setup(40, false, false);
        let fem = assemble_fem(&mesh).unwrap();
        let model = Stage1Model::new(&data, &fem, &zk, 1.0).unwrap();
        let mut state = model.initial_state().unwrap();
        state.sigma2 = 0.5;
        state.beta1 = vec![0.3];
        let mut rng = ChaCha8Rng::seed_from_u64(5);

        // analytic conditional
        let w = model.working_response(&state);
        let field = model.data.basis.apply(&state.gamma);
        let rsum: f64 = (0..w.len())
            .map(|i| w[i] - 0.3 * model.data.covariates[i][0] - field[i])
            .sum();
        let prec = w.len() as f64 / 0.5 + 1.0 / INTERCEPT_VAR_MARGIN;
        let want_mean = rsum / 0.5 / prec;
        let want_var = 1.0 / prec;

        let n = 40_000;
        let mut draws = Vec::with_capacity(n);
        for _ in 0..n {
            gibbs_beta0(&model, &mut state, &mut rng);
            draws.push(state.beta0);
        }
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1) as f64;
        assert_abs_diff_eq!(mean, want_mean, epsilon = 4.0 * (want_var / n as f64).sqrt());
        assert_abs_diff_eq!(var, want_var, epsilon = 0.05 * want_var);
    }

    #[test]
    fn sigma2_gibbs_matches_inverse_gamma_moments() {
        let (data, mesh, zk) = toy_setup(30, false, false);
        let fem = assemble_fem(&mesh).unwrap();
        let model = Stage1Model::new(&data, &fem, &zk, 1.0).unwrap();
        let mut state = model.initial_state().unwrap();
        state.beta1 = vec![0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(6);

        let w = model.working_response(&state);
        let mu = model.linear_predictor(&state);
        let ss: f64 = w.iter().zip(&mu).map(|(a, b)| (a - b) * (a - b)).sum();
        let a = IG_SHAPE + 15.0;
        let b = IG_RATE + 0.5 * ss;
        let want_mean = b / (a - 1.0);

        let n = 60_000;
        let mean: f64 = (0..n)
            .map(|_| {
                gibbs_sigma2(&model, &mut state, &mut rng);
                state.sigma2
            })
            .sum::<f64>()
            / n as f64;
        assert_abs_diff_eq!(mean, want_mean, epsilon = 0.02 * want_mean);
    }

    #[test]
    fn gamma_gibbs_matches_analytic_mean() {
        let (data, mesh, zk) = toy_setup(50, false, false);
        let fem = assemble_fem(&mesh).unwrap();
        let model = Stage1Model::new(&data, &fem, &zk, 1.0).unwrap();
        let mut state = model.initial_state().unwrap();
        state.beta1 = vec![0.0];
        state.beta0 = 0.0;
        state.sigma2 = 0.3;
        let mut rng = ChaCha8Rng::seed_from_u64(7);

        // analytic conditional mean
        let q = model.precision(&state.theta).unwrap();
        let scaled: Vec<(usize, usize, f64)> = model
            .psi_gram
            .iter()
            .map(|(i, j, v)| (i, j, v / 0.3))
            .collect();
        let prec = q.q.add(&SymSparse::from_triplets(q.q.n(), &scaled));
        let factor = LdlFactor::new(&prec).unwrap();
        let resid: Vec<f64> = model.data.response.iter().map(|r| r / 0.3).collect();
        let rhs = model.data.basis.apply_transpose(&resid);
        let want = factor.solve(&rhs);

        let n = 20_000;
        let m = want.len();
        let mut acc = vec![0.0; m];
        for _ in 0..n {
            let saved = state.gamma.clone();
            gibbs_gamma(&model, &mut state, &mut rng).unwrap();
            for (a, &g) in acc.iter_mut().zip(&state.gamma) {
                *a += g;
            }
            state.gamma = saved; // keep the conditional fixed
        }
        for (a, w) in acc.iter().zip(&want) {
            assert_abs_diff_eq!(a / n as f64, *w, epsilon = 0.03);
        }
    }

    #[test]
    fn winding_sweep_matches_exact_enumeration() {
        // 3 circular observations, all other parameters fixed: compare the
        // Metropolis stationary distribution over the 27 winding states to
        // the exact conditional probabilities
        let (mut data, mesh, zk) = toy_setup(3, true, false);
        data.response = vec![2.9, -3.0, 0.2];
        let fem = assemble_fem(&mesh).unwrap();
        let model = Stage1Model::new(&data, &fem, &zk, 1.0).unwrap();
        let mut state = model.initial_state().unwrap();
        state.beta0 = 2.2;
        state.beta1 = vec![0.0];
        state.sigma2 = 2.0;
        state.gamma.iter_mut().for_each(|g| *g = 0.0);
        let support = WindingSupport::default();

        // exact per-site conditional (independent across sites here)
        let mu = model.linear_predictor(&state);
        let exact: Vec<[f64; 3]> = (0..3)
            .map(|i| {
                let mut p = [0.0; 3];
                for (idx, k) in [-1i32, 0, 1].iter().enumerate() {
                    let w = data.response[i] + TAU * *k as f64;
                    p[idx] = (-(w - mu[i]).powi(2) / (2.0 * state.sigma2)).exp();
                }
                let s: f64 = p.iter().sum();
                [p[0] / s, p[1] / s, p[2] / s]
            })
            .collect();

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let sweeps = 200_000;
        let mut counts = vec![[0usize; 3]; 3];
        for _ in 0..sweeps {
            update_windings(&model, &mut state, &support, &mut rng);
            for i in 0..3 {
                counts[i][(state.windings[i] + 1) as usize] += 1;
            }
        }
        for i in 0..3 {
            let mut tv = 0.0;
            for j in 0..3 {
                tv += (counts[i][j] as f64 / sweeps as f64 - exact[i][j]).abs();
            }
            assert!(tv / 2.0 < 0.02, "site {i}: total variation {}", tv / 2.0);
        }
    }

    #[test]
    fn zeta2_reproduces_prior_without_likelihood() {
        // with the kappa slopes pinned at zero the zeta^2 conditional is
        // proportional to Weibull(1/2, lambda) times N(0, zeta^2) terms;
        // with *no* slopes at all it is exactly the prior
        let (data, mesh, zk) = toy_setup(10, false, false);
        let fem = assemble_fem(&mesh).unwrap();
        let lambda = 0.7;
        let model = Stage1Model::new(&data, &fem, &zk, lambda).unwrap();
        let config = Stage1Config {
            iters: 3000,
            burn: 500,
            thin: 1,
            pc_lambda: lambda,
            winding_support: WindingSupport::default(),
        };
        let fit = fit_margin(&model, &config, 44).unwrap();
        let z2 = fit.chain.scalar_trace("zeta2").unwrap();
        let mean = z2.iter().sum::<f64>() / z2.len() as f64;
        assert_abs_diff_eq!(mean, 2.0 * lambda, epsilon = 0.25);
    }

    #[test]
    fn fit_is_reproducible_bit_for_bit() {
        let (data, mesh, zk) = toy_setup(20, true, true);
        let fem = assemble_fem(&mesh).unwrap();
        let model = Stage1Model::new(&data, &fem, &zk, 1.0).unwrap();
        let config = default_config();
        let f1 = fit_margin(&model, &config, 123).unwrap();
        let f2 = fit_margin(&model, &config, 123).unwrap();
        assert_eq!(f1.chain.scalars, f2.chain.scalars);
        assert_eq!(f1.chain.gamma, f2.chain.gamma);
        assert_eq!(f1.winding_draws, f2.winding_draws);
        let f3 = fit_margin(&model, &config, 124).unwrap();
        assert_ne!(f1.chain.scalars, f3.chain.scalars);
    }

    #[test]
    fn multi_chain_concatenates() {
        let (data, mesh, zk) = toy_setup(15, false, false);
        let fem = assemble_fem(&mesh).unwrap();
        let model = Stage1Model::new(&data, &fem, &zk, 1.0).unwrap();
        let config = default_config();
        let fit = fit_margin_chains(&model, &config, 7, 3).unwrap();
        assert_eq!(fit.chain.n_draws(), 3 * config.n_kept());
        let state = fit.posterior_mean_state(&model).unwrap();
        assert_eq!(state.gamma.len(), mesh.nodes.len());
        assert!(state.sigma2 > 0.0);
    }

    #[test]
    fn winding_mode_majority() {
        let fit = MarginFit {
            chain: ChainOutput::default(),
            winding_draws: vec![vec![0, 1], vec![0, 1], vec![1, 1], vec![0, -1]],
            theta_acceptance: 0.0,
            zeta2_acceptance: 0.0,
        };
        assert_eq!(fit.winding_mode(2), vec![0, 1]);
    }
}
