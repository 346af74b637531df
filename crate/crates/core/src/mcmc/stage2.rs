//! Stage 2: copula regression on margin pseudo-observations.
//!
//! Margin fits are frozen at posterior summaries, observations are mapped
//! through the fitted margin CDFs to pseudo-uniform scores, and the copula
//! association predictor eta = x' beta is sampled with an
//! iteratively-reweighted-least-squares Metropolis-Hastings step: the
//! proposal is the Gaussian whose mean and precision come from one scored
//! Newton step, and the asymmetry is corrected with the reverse proposal
//! density.

use crate::copula::{CopulaSpec, U_EPS};
use crate::error::{Error, Result};
use crate::math::norm_cdf;
use crate::mcmc::chain::ChainOutput;
use crate::mcmc::stage1::{sample_inv_gamma, Stage1Model, Stage1State};
use crate::prior::{IG_RATE, IG_SHAPE, INTERCEPT_VAR_COPULA};
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::TAU;

/// Margin scores u in (0,1) feeding the copula stage.
#[derive(Debug, Clone)]
pub struct PseudoObs {
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

fn clamp_u(u: f64) -> f64 {
    u.clamp(U_EPS, 1.0 - U_EPS)
}

/// Pseudo-observations at the margin posterior means, with the circular
/// margin unwrapped at the per-observation posterior-mode winding.
pub fn pseudo_observations(
    ang_model: &Stage1Model,
    ang_state: &Stage1State,
    lin_model: &Stage1Model,
    lin_state: &Stage1State,
) -> Result<PseudoObs> {
    let n = ang_model.data.n_obs();
    if lin_model.data.n_obs() != n {
        return Err(Error::Data("margin observation counts differ".into()));
    }
    let mu1 = ang_model.linear_predictor(ang_state);
    let mu2 = lin_model.linear_predictor(lin_state);
    let s1 = ang_state.sigma2.sqrt();
    let s2 = lin_state.sigma2.sqrt();
    let mut u1 = Vec::with_capacity(n);
    let mut u2 = Vec::with_capacity(n);
    for i in 0..n {
        let w = ang_model.data.response[i] + TAU * ang_state.windings[i] as f64;
        u1.push(clamp_u(norm_cdf((w - mu1[i]) / s1)));
        u2.push(clamp_u(norm_cdf((lin_model.data.response[i] - mu2[i]) / s2)));
    }
    Ok(PseudoObs { u1, u2 })
}

/// Sampler settings for the copula stage.
#[derive(Debug, Clone)]
pub struct Stage2Config {
    pub iters: usize,
    pub burn: usize,
    pub thin: usize,
}

impl Stage2Config {
    pub fn n_kept(&self) -> usize {
        (self.iters.saturating_sub(self.burn)) / self.thin.max(1)
    }
}

/// Posterior fit of the copula regression.
#[derive(Debug, Clone)]
pub struct CopulaFit {
    pub spec: CopulaSpec,
    pub chain: ChainOutput,
    pub acceptance: f64,
}

impl CopulaFit {
    pub fn beta_mean(&self, dim: usize) -> Result<Vec<f64>> {
        (0..dim)
            .map(|j| self.chain.scalar_mean(&format!("beta_rho_{j}")))
            .collect()
    }
}

struct IwlsProposal {
    mean: DVector<f64>,
    chol: Cholesky<f64, nalgebra::Dyn>,
}

/// Scored Newton step: proposal mean and precision factor at beta.
fn iwls_proposal(
    spec: &CopulaSpec,
    x: &DMatrix<f64>,
    pseudo: &PseudoObs,
    beta: &DVector<f64>,
    xi2: f64,
) -> IwlsProposal {
    let n = x.nrows();
    let d = x.ncols();
    let eta = x * beta;
    let mut p: DMatrix<f64> = DMatrix::zeros(d, d);
    let mut b: DVector<f64> = DVector::zeros(d);
    for i in 0..n {
        let (v, w) = spec.eta_score_and_curvature(pseudo.u1[i], pseudo.u2[i], eta[i]);
        let t = eta[i] + v / w;
        for a in 0..d {
            b[a] += x[(i, a)] * w * t;
            for c in 0..d {
                p[(a, c)] += x[(i, a)] * w * x[(i, c)];
            }
        }
    }
    p[(0, 0)] += 1.0 / INTERCEPT_VAR_COPULA;
    for a in 1..d {
        p[(a, a)] += 1.0 / xi2;
    }
    let chol = match p.clone().cholesky() {
        Some(c) => c,
        None => {
            // near-singular working precision: ridge fallback
            let mut pr = p;
            for a in 0..d {
                pr[(a, a)] += 1e-8 + 1e-8 * pr[(a, a)].abs();
            }
            pr.cholesky().expect("ridged precision is SPD")
        }
    };
    let mean = chol.solve(&b);
    IwlsProposal { mean, chol }
}

/// Log-density of N(x; mean, P^{-1}) given the Cholesky factor of P.
fn gaussian_log_density(p: &IwlsProposal, x: &DVector<f64>) -> f64 {
    let d = x.len() as f64;
    let diff = x - &p.mean;
    let quad = (p.chol.l().transpose() * &diff).norm_squared();
    let log_det: f64 = p.chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
    0.5 * log_det - 0.5 * d * crate::math::LN_2PI - 0.5 * quad
}

/// Copula log-likelihood plus beta prior.
fn log_posterior(
    spec: &CopulaSpec,
    x: &DMatrix<f64>,
    pseudo: &PseudoObs,
    beta: &DVector<f64>,
    xi2: f64,
) -> f64 {
    let eta = x * beta;
    let mut lp = 0.0;
    for i in 0..x.nrows() {
        let rho = spec.link_to_rho(eta[i]);
        lp += spec.log_density(pseudo.u1[i], pseudo.u2[i], rho);
    }
    lp += -0.5 * beta[0] * beta[0] / INTERCEPT_VAR_COPULA;
    for a in 1..beta.len() {
        lp += -0.5 * beta[a] * beta[a] / xi2;
    }
    lp
}

/// One IWLS-MH update of beta. Returns whether the proposal was accepted.
pub fn iwls_mh_update(
    spec: &CopulaSpec,
    x: &DMatrix<f64>,
    pseudo: &PseudoObs,
    beta: &mut DVector<f64>,
    xi2: f64,
    rng: &mut impl Rng,
) -> bool {
    let d = beta.len();
    let fwd = iwls_proposal(spec, x, pseudo, beta, xi2);
    let z = DVector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(rng)));
    // draw from N(mean, P^{-1}): mean + L^{-T} z
    let prop = &fwd.mean
        + fwd
            .chol
            .l()
            .transpose()
            .solve_upper_triangular(&z)
            .expect("triangular solve");
    let rev = iwls_proposal(spec, x, pseudo, &prop, xi2);
    let log_ratio = log_posterior(spec, x, pseudo, &prop, xi2)
        - log_posterior(spec, x, pseudo, beta, xi2)
        + gaussian_log_density(&rev, beta)
        - gaussian_log_density(&fwd, &prop);
    if log_ratio >= 0.0 || rng.gen_range(0.0..1.0f64) < log_ratio.exp() {
        *beta = prop;
        true
    } else {
        false
    }
}

/// Gibbs update of the slope-variance hyperparameter.
pub fn gibbs_xi2_rho(beta: &DVector<f64>, rng: &mut impl Rng) -> f64 {
    let p = (beta.len() - 1) as f64;
    let ss: f64 = beta.iter().skip(1).map(|b| b * b).sum();
    sample_inv_gamma(IG_SHAPE + 0.5 * p, IG_RATE + 0.5 * ss, rng)
}

/// Fit the copula regression. `z_rho` holds the slope covariates (without
/// the intercept column, which is added internally).
pub fn fit_copula(
    spec: CopulaSpec,
    z_rho: &[Vec<f64>],
    pseudo: &PseudoObs,
    config: &Stage2Config,
    seed: u64,
) -> Result<CopulaFit> {
    let n = pseudo.u1.len();
    if pseudo.u2.len() != n {
        return Err(Error::Data("pseudo-observation lengths differ".into()));
    }
    if !z_rho.is_empty() && z_rho.len() != n {
        return Err(Error::Data(format!(
            "{} covariate rows for {n} pseudo-observations",
            z_rho.len()
        )));
    }
    if config.iters == 0 || config.burn >= config.iters || config.thin == 0 {
        return Err(Error::Config("bad stage-2 chain lengths".into()));
    }
    let p = z_rho.first().map_or(0, Vec::len);
    let d = 1 + p;
    let mut x = DMatrix::zeros(n, d);
    for i in 0..n {
        x[(i, 0)] = 1.0;
        for j in 0..p {
            x[(i, j + 1)] = z_rho[i][j];
        }
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut beta: DVector<f64> = DVector::zeros(d);
    let mut xi2 = 1.0;
    // warm-start at the penalized mode: without this the scored-Newton
    // proposal is an independence sampler aimed from a bad expansion point
    // and the reverse-density term rejects every move
    for _ in 0..30 {
        let step = iwls_proposal(&spec, &x, pseudo, &beta, xi2);
        let moved = (&step.mean - &beta).norm();
        beta = step.mean;
        if moved < 1e-10 {
            break;
        }
    }
    let mut accepted = 0usize;

    let mut names: Vec<String> = (0..d).map(|j| format!("beta_rho_{j}")).collect();
    names.push("xi2_rho".into());
    let mut chain = ChainOutput {
        scalar_names: names,
        scalars: Vec::with_capacity(config.n_kept()),
        gamma: Vec::new(),
        loglik: Vec::with_capacity(config.n_kept()),
    };

    for it in 0..config.iters {
        if iwls_mh_update(&spec, &x, pseudo, &mut beta, xi2, &mut rng) {
            accepted += 1;
        }
        if p > 0 {
            xi2 = gibbs_xi2_rho(&beta, &mut rng);
        }
        if it >= config.burn && (it - config.burn) % config.thin == 0 {
            let mut row: Vec<f64> = beta.iter().copied().collect();
            row.push(xi2);
            chain.scalars.push(row);
            let eta = &x * &beta;
            chain.loglik.push(
                (0..n)
                    .map(|i| {
                        spec.log_density(pseudo.u1[i], pseudo.u2[i], spec.link_to_rho(eta[i]))
                    })
                    .collect(),
            );
        }
    }

    Ok(CopulaFit {
        spec,
        chain,
        acceptance: accepted as f64 / config.iters as f64,
    })
}
