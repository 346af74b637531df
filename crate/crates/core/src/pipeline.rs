//! End-to-end model fitting: margins, copula, joint likelihood, posterior
//! prediction, and cross-validation.

use crate::copula::CopulaSpec;
use crate::density::{
    pwc_log_pdf, wn_log_pdf, LogNormalParams, WindingSupport, WrappedNormalParams,
};
use crate::error::{Error, Result};
use crate::fem::{assemble_fem, FemMatrices};
use crate::math::norm_quantile;
use crate::mcmc::stage1::{fit_margin_chains, MarginData, MarginFit, Stage1Config, Stage1Model};
use crate::mcmc::stage2::{fit_copula, pseudo_observations, CopulaFit, Stage2Config};
use crate::mesh::Mesh;
use crate::score::cv_folds;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Raw cylindrical dataset plus covariates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    pub sites: Vec<[f64; 2]>,
    /// Angle in [-pi, pi).
    pub phi: Vec<f64>,
    /// Positive linear response.
    pub y: Vec<f64>,
    /// Mean covariates of the angular margin (n x p, p may be 0).
    pub z_ang: Vec<Vec<f64>>,
    /// Mean covariates of the linear margin.
    pub z_lin: Vec<Vec<f64>>,
    /// Association covariates (without intercept).
    pub z_rho: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn n_obs(&self) -> usize {
        self.phi.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_obs();
        if self.sites.len() != n || self.y.len() != n {
            return Err(Error::Data("site/response length mismatch".into()));
        }
        if let Some(i) = self.y.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::Data(format!(
                "linear response must be positive and finite (row {i}: {})",
                self.y[i]
            )));
        }
        if let Some(i) = self.phi.iter().position(|&p| !p.is_finite()) {
            return Err(Error::Data(format!("non-finite angle at row {i}")));
        }
        for (name, z) in [("z_ang", &self.z_ang), ("z_lin", &self.z_lin), ("z_rho", &self.z_rho)] {
            if !z.is_empty() && z.len() != n {
                return Err(Error::Data(format!("{name} has {} rows for {n} observations", z.len())));
            }
        }
        Ok(())
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let pick_rows = |z: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            if z.is_empty() {
                Vec::new()
            } else {
                idx.iter().map(|&i| z[i].clone()).collect()
            }
        };
        Dataset {
            sites: idx.iter().map(|&i| self.sites[i]).collect(),
            phi: idx.iter().map(|&i| self.phi[i]).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            z_ang: pick_rows(&self.z_ang),
            z_lin: pick_rows(&self.z_lin),
            z_rho: pick_rows(&self.z_rho),
        }
    }
}

/// Association structure of the full model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AssocModel {
    /// Margins only; the copula is the independence copula.
    Independence,
    /// Copula with a constant association predictor.
    Constant(crate::copula::CopulaFamily),
    /// Copula with covariate-dependent association.
    Covariate(crate::copula::CopulaFamily),
}

impl AssocModel {
    pub fn family(&self) -> Option<crate::copula::CopulaFamily> {
        match self {
            AssocModel::Independence => None,
            AssocModel::Constant(f) | AssocModel::Covariate(f) => Some(*f),
        }
    }

    pub fn uses_covariates(&self) -> bool {
        matches!(self, AssocModel::Covariate(_))
    }

    pub fn label(&self) -> String {
        match self {
            AssocModel::Independence => "independence".into(),
            AssocModel::Constant(f) => format!("{f}-constant"),
            AssocModel::Covariate(f) => format!("{f}-covariate"),
        }
    }
}

/// Sampler settings for the full two-stage fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    pub iters: usize,
    pub burn: usize,
    pub thin: usize,
    pub n_chains: usize,
    /// Monte Carlo size for the hyperprior scale calibration.
    pub calibration_draws: usize,
    /// Use per-draw margin CDFs averaged over the posterior instead of the
    /// plug-in posterior-mean margins when forming pseudo-observations.
    pub pseudo_obs_average: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            iters: 15_000,
            burn: 7_000,
            thin: 8,
            n_chains: 8,
            calibration_draws: 20_000,
            pseudo_obs_average: false,
        }
    }
}

impl FitConfig {
    pub fn reduced() -> Self {
        FitConfig {
            iters: 5_000,
            burn: 2_000,
            thin: 4,
            n_chains: 1,
            calibration_draws: 5_000,
            pseudo_obs_average: false,
        }
    }

    fn stage1(&self, pc_lambda: f64) -> Stage1Config {
        Stage1Config {
            iters: self.iters,
            burn: self.burn,
            thin: self.thin,
            pc_lambda,
            winding_support: WindingSupport::default(),
        }
    }

    fn stage2(&self) -> Stage2Config {
        Stage2Config {
            iters: self.iters,
            burn: self.burn,
            thin: self.thin,
        }
    }
}

/// Spatial context shared by both margins.
pub struct SpatialContext {
    pub mesh: Mesh,
    pub fem: FemMatrices,
    /// Nonstationarity covariates at mesh nodes (may have 0 columns).
    pub z_kappa_nodes: Vec<Vec<f64>>,
    pub pc_lambda: f64,
}

impl SpatialContext {
    /// Build the context: assemble the finite-element matrices and calibrate
    /// the hyperprior scale from the node covariates.
    pub fn new(
        mesh: Mesh,
        z_kappa_nodes: Vec<Vec<f64>>,
        calibration_draws: usize,
        seed: u64,
    ) -> Result<Self> {
        let fem = assemble_fem(&mesh)?;
        if z_kappa_nodes.len() != mesh.nodes.len() {
            return Err(Error::Data(
                "kappa covariate rows differ from mesh node count".into(),
            ));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0xca11_b8a7e);
        let cal = crate::prior::calibrate_pc_lambda(
            &z_kappa_nodes,
            crate::prior::pc_bound_c(),
            crate::prior::PC_ALPHA,
            calibration_draws,
            &mut rng,
        )?;
        Ok(SpatialContext {
            mesh,
            fem,
            z_kappa_nodes,
            pc_lambda: cal.lambda,
        })
    }

    pub fn stationary(mesh: Mesh) -> Result<Self> {
        let n = mesh.nodes.len();
        Self::new(mesh, vec![vec![]; n], 1, 0)
    }
}

/// Two fitted margins plus their posterior-mean states.
pub struct FittedMargins {
    pub ang_data: MarginData,
    pub lin_data: MarginData,
    pub ang_fit: MarginFit,
    pub lin_fit: MarginFit,
    pub ang_mean: crate::mcmc::stage1::Stage1State,
    pub lin_mean: crate::mcmc::stage1::Stage1State,
}

/// Fit both margins of the dataset.
pub fn fit_margins(
    dataset: &Dataset,
    ctx: &SpatialContext,
    config: &FitConfig,
    seed: u64,
) -> Result<FittedMargins> {
    dataset.validate()?;
    let basis = ctx.mesh.basis_matrix(&dataset.sites, false)?;
    let ang_data = MarginData {
        response: dataset.phi.clone(),
        covariates: dataset.z_ang.clone(),
        basis: basis.clone(),
        circular: true,
    };
    let lin_data = MarginData {
        response: dataset.y.iter().map(|v| v.ln()).collect(),
        covariates: dataset.z_lin.clone(),
        basis,
        circular: false,
    };
    let s1cfg = config.stage1(ctx.pc_lambda);
    let ang_model = Stage1Model::new(&ang_data, &ctx.fem, &ctx.z_kappa_nodes, ctx.pc_lambda)?;
    let lin_model = Stage1Model::new(&lin_data, &ctx.fem, &ctx.z_kappa_nodes, ctx.pc_lambda)?;
    let ang_fit = fit_margin_chains(&ang_model, &s1cfg, seed, config.n_chains)?;
    let lin_fit = fit_margin_chains(&lin_model, &s1cfg, seed + 1000, config.n_chains)?;
    let ang_mean = ang_fit.posterior_mean_state(&ang_model)?;
    let lin_mean = lin_fit.posterior_mean_state(&lin_model)?;
    Ok(FittedMargins {
        ang_data,
        lin_data,
        ang_fit,
        lin_fit,
        ang_mean,
        lin_mean,
    })
}

/// Full two-stage fit of one association model on top of fitted margins.
pub struct FittedModel {
    pub assoc: AssocModel,
    /// None under independence.
    pub copula_fit: Option<CopulaFit>,
}

/// Fit the association stage for one model. Margins are shared.
pub fn fit_association(
    dataset: &Dataset,
    ctx: &SpatialContext,
    margins: &FittedMargins,
    assoc: AssocModel,
    config: &FitConfig,
    seed: u64,
) -> Result<FittedModel> {
    let Some(family) = assoc.family() else {
        return Ok(FittedModel {
            assoc,
            copula_fit: None,
        });
    };
    let ang_model =
        Stage1Model::new(&margins.ang_data, &ctx.fem, &ctx.z_kappa_nodes, ctx.pc_lambda)?;
    let lin_model =
        Stage1Model::new(&margins.lin_data, &ctx.fem, &ctx.z_kappa_nodes, ctx.pc_lambda)?;
    let pseudo = if config.pseudo_obs_average {
        averaged_pseudo_observations(&ang_model, &lin_model, margins)?
    } else {
        pseudo_observations(&ang_model, &margins.ang_mean, &lin_model, &margins.lin_mean)?
    };
    let z_rho: &[Vec<f64>] = if assoc.uses_covariates() {
        &dataset.z_rho
    } else {
        &[]
    };
    let fit = fit_copula(
        CopulaSpec::new(family),
        z_rho,
        &pseudo,
        &config.stage2(),
        seed,
    )?;
    Ok(FittedModel {
        assoc,
        copula_fit: Some(fit),
    })
}

/// Posterior-averaged margin CDF values (one per observation), using each
/// retained margin draw's parameters and windings.
pub fn averaged_pseudo_observations(
    ang_model: &Stage1Model,
    lin_model: &Stage1Model,
    margins: &FittedMargins,
) -> Result<crate::mcmc::stage2::PseudoObs> {
    let n = margins.ang_data.n_obs();
    let t_ang = margins.ang_fit.chain.n_draws();
    let t_lin = margins.lin_fit.chain.n_draws();
    let mut u1 = vec![0.0; n];
    let mut u2 = vec![0.0; n];
    for t in 0..t_ang {
        let state = margin_draw_state(&margins.ang_fit, ang_model, t)?;
        let mu = ang_model.linear_predictor(&state);
        let sd = state.sigma2.sqrt();
        for i in 0..n {
            let w = margins.ang_data.response[i] + TAU * state.windings[i] as f64;
            u1[i] += crate::math::norm_cdf((w - mu[i]) / sd);
        }
    }
    for t in 0..t_lin {
        let state = margin_draw_state(&margins.lin_fit, lin_model, t)?;
        let mu = lin_model.linear_predictor(&state);
        let sd = state.sigma2.sqrt();
        for i in 0..n {
            u2[i] += crate::math::norm_cdf((margins.lin_data.response[i] - mu[i]) / sd);
        }
    }
    let clamp = |v: f64| v.clamp(crate::copula::U_EPS, 1.0 - crate::copula::U_EPS);
    Ok(crate::mcmc::stage2::PseudoObs {
        u1: u1.iter().map(|v| clamp(v / t_ang as f64)).collect(),
        u2: u2.iter().map(|v| clamp(v / t_lin as f64)).collect(),
    })
}

/// Reconstruct the full parameter state of one retained margin draw.
fn margin_draw_state(
    fit: &MarginFit,
    model: &Stage1Model,
    t: usize,
) -> Result<crate::mcmc::stage1::Stage1State> {
    let chain = &fit.chain;
    let row = &chain.scalars[t];
    let p = model.data.n_covariates();
    let nt = model.n_theta();
    // layout must match scalar_row: beta0, beta1.., sigma2, xi2, theta.., zeta2
    let beta0 = row[0];
    let beta1 = row[1..1 + p].to_vec();
    let sigma2 = row[1 + p];
    let xi2 = row[2 + p];
    let theta = row[3 + p..3 + p + nt].to_vec();
    let zeta2 = row[3 + p + nt];
    let windings = if model.data.circular && !fit.winding_draws.is_empty() {
        fit.winding_draws[t].clone()
    } else {
        vec![0; model.data.n_obs()]
    };
    Ok(crate::mcmc::stage1::Stage1State {
        beta0,
        beta1,
        gamma: chain.gamma[t].clone(),
        sigma2,
        xi2,
        theta,
        zeta2,
        windings,
    })
}

/// Margin parameters of one paired posterior draw at a set of sites.
struct DrawMargins {
    mu1: Vec<f64>,
    s1: f64,
    mu2: Vec<f64>,
    s2: f64,
}

fn draw_margins(
    margins: &FittedMargins,
    basis: &crate::mesh::BasisMatrix,
    z_ang: &[Vec<f64>],
    z_lin: &[Vec<f64>],
    t: usize,
) -> DrawMargins {
    let eval = |fit: &MarginFit, z: &[Vec<f64>], t: usize| -> (Vec<f64>, f64) {
        let tt = t % fit.chain.n_draws();
        let row = &fit.chain.scalars[tt];
        let p = z.first().map_or(0, Vec::len);
        let beta0 = row[0];
        let beta1 = &row[1..1 + p];
        let sigma2 = row[1 + p];
        let field = basis.apply(&fit.chain.gamma[tt]);
        let mu: Vec<f64> = (0..basis.rows.len())
            .map(|i| {
                let zb: f64 = if p == 0 {
                    0.0
                } else {
                    z[i].iter().zip(beta1).map(|(a, b)| a * b).sum()
                };
                beta0 + zb + field[i]
            })
            .collect();
        (mu, sigma2.sqrt())
    };
    let (mu1, s1) = eval(&margins.ang_fit, z_ang, t);
    let (mu2, s2) = eval(&margins.lin_fit, z_lin, t);
    DrawMargins { mu1, s1, mu2, s2 }
}

fn assoc_eta(model: &FittedModel, z_rho: &[Vec<f64>], n: usize, t: usize) -> Vec<f64> {
    match &model.copula_fit {
        None => vec![0.0; n],
        Some(fit) => {
            let tt = t % fit.chain.n_draws();
            let row = &fit.chain.scalars[tt];
            let p = if model.assoc.uses_covariates() {
                z_rho.first().map_or(0, Vec::len)
            } else {
                0
            };
            (0..n)
                .map(|i| {
                    let mut eta = row[0];
                    for j in 0..p {
                        eta += row[j + 1] * z_rho[i][j];
                    }
                    eta
                })
                .collect()
        }
    }
}

/// Pointwise joint log-likelihood matrix over paired posterior draws.
///
/// Stage-1 and stage-2 draws are paired index-by-index (cycling the shorter
/// chain); each entry is the full cylindrical log-density with the winding
/// summed out.
pub fn joint_loglik(
    dataset: &Dataset,
    ctx: &SpatialContext,
    margins: &FittedMargins,
    model: &FittedModel,
    max_draws: usize,
) -> Result<Vec<Vec<f64>>> {
    let n = dataset.n_obs();
    let basis = ctx.mesh.basis_matrix(&dataset.sites, false)?;
    let t_total = margins
        .ang_fit
        .chain
        .n_draws()
        .max(model.copula_fit.as_ref().map_or(0, |f| f.chain.n_draws()))
        .min(max_draws.max(1));
    let support = WindingSupport::default();
    let spec = model.assoc.family().map(CopulaSpec::new);
    let mut out = Vec::with_capacity(t_total);
    for t in 0..t_total {
        let dm = draw_margins(margins, &basis, &dataset.z_ang, &dataset.z_lin, t);
        let eta = assoc_eta(model, &dataset.z_rho, n, t);
        let row: Vec<f64> = (0..n)
            .map(|i| {
                joint_point_loglik(
                    dataset.phi[i],
                    dataset.y[i],
                    dm.mu1[i],
                    dm.s1,
                    dm.mu2[i],
                    dm.s2,
                    spec.as_ref(),
                    eta[i],
                    &support,
                )
            })
            .collect();
        out.push(row);
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn joint_point_loglik(
    phi: f64,
    y: f64,
    mu1: f64,
    s1: f64,
    mu2: f64,
    s2: f64,
    spec: Option<&CopulaSpec>,
    eta: f64,
    support: &WindingSupport,
) -> f64 {
    let wn = WrappedNormalParams {
        mu: mu1,
        sigma2: s1 * s1,
    };
    let ln = LogNormalParams {
        mu: mu2,
        sigma2: s2 * s2,
    };
    match spec {
        None => wn_log_pdf(phi, &wn, support) + crate::density::ln_log_pdf(y, &ln),
        Some(spec) => {
            let rho = spec.link_to_rho(eta);
            pwc_log_pdf(phi, y, &wn, &ln, spec, rho, support)
        }
    }
}

/// Pointwise joint log-likelihood at the posterior mean (variances averaged
/// on the log scale, association coefficients on the link scale).
pub fn joint_loglik_at_mean(
    dataset: &Dataset,
    ctx: &SpatialContext,
    margins: &FittedMargins,
    model: &FittedModel,
) -> Result<Vec<f64>> {
    let n = dataset.n_obs();
    let basis = ctx.mesh.basis_matrix(&dataset.sites, false)?;
    let support = WindingSupport::default();
    let spec = model.assoc.family().map(CopulaSpec::new);

    let mean_margin = |fit: &MarginFit, z: &[Vec<f64>]| -> (Vec<f64>, f64) {
        let t = fit.chain.n_draws();
        let p = z.first().map_or(0, Vec::len);
        let mut beta0 = 0.0;
        let mut beta1 = vec![0.0; p];
        let mut log_s2 = 0.0;
        for row in &fit.chain.scalars {
            beta0 += row[0];
            for j in 0..p {
                beta1[j] += row[1 + j];
            }
            log_s2 += row[1 + p].ln();
        }
        beta0 /= t as f64;
        beta1.iter_mut().for_each(|b| *b /= t as f64);
        let sigma = (log_s2 / t as f64).exp().sqrt();
        let field = basis.apply(&fit.chain.gamma_mean());
        let mu: Vec<f64> = (0..n)
            .map(|i| {
                let zb: f64 = if p == 0 {
                    0.0
                } else {
                    z[i].iter().zip(&beta1).map(|(a, b)| a * b).sum()
                };
                beta0 + zb + field[i]
            })
            .collect();
        (mu, sigma)
    };

    let (mu1, s1) = mean_margin(&margins.ang_fit, &dataset.z_ang);
    let (mu2, s2) = mean_margin(&margins.lin_fit, &dataset.z_lin);
    let eta_mean: Vec<f64> = match &model.copula_fit {
        None => vec![0.0; n],
        Some(fit) => {
            let p = if model.assoc.uses_covariates() {
                dataset.z_rho.first().map_or(0, Vec::len)
            } else {
                0
            };
            let t = fit.chain.n_draws() as f64;
            let mut beta = vec![0.0; p + 1];
            for row in &fit.chain.scalars {
                for (b, &v) in beta.iter_mut().zip(row.iter()) {
                    *b += v;
                }
            }
            beta.iter_mut().for_each(|b| *b /= t);
            (0..n)
                .map(|i| {
                    let mut eta = beta[0];
                    for j in 0..p {
                        eta += beta[j + 1] * dataset.z_rho[i][j];
                    }
                    eta
                })
                .collect()
        }
    };

    Ok((0..n)
        .map(|i| {
            joint_point_loglik(
                dataset.phi[i],
                dataset.y[i],
                mu1[i],
                s1,
                mu2[i],
                s2,
                spec.as_ref(),
                eta_mean[i],
                &support,
            )
        })
        .collect())
}

/// Pointwise log-likelihood rows for association-model selection, following
/// the two-stage construction: the copula log-likelihood on the
/// pseudo-observations per retained stage-2 draw, plus the plug-in margin
/// log-density at the posterior-mean margins. The margin term is a constant
/// shared by every association model fitted on the same margins, so DIC and
/// WAIC differences reduce to the copula stage that the selection actually
/// compares; under independence the rows collapse to the single plug-in row.
///
/// Returns (rows over draws, pointwise log-likelihood at the posterior-mean
/// copula coefficients).
pub fn selection_loglik(
    dataset: &Dataset,
    ctx: &SpatialContext,
    margins: &FittedMargins,
    model: &FittedModel,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let base_model = FittedModel {
        assoc: AssocModel::Independence,
        copula_fit: None,
    };
    let base = joint_loglik_at_mean(dataset, ctx, margins, &base_model)?;
    let Some(cop) = &model.copula_fit else {
        return Ok((vec![base.clone()], base));
    };
    let ang_model =
        Stage1Model::new(&margins.ang_data, &ctx.fem, &ctx.z_kappa_nodes, ctx.pc_lambda)?;
    let lin_model =
        Stage1Model::new(&margins.lin_data, &ctx.fem, &ctx.z_kappa_nodes, ctx.pc_lambda)?;
    let pseudo = pseudo_observations(&ang_model, &margins.ang_mean, &lin_model, &margins.lin_mean)?;
    let n = dataset.n_obs();
    let p = if model.assoc.uses_covariates() {
        dataset.z_rho.first().map_or(0, Vec::len)
    } else {
        0
    };
    let rows = cop
        .chain
        .loglik
        .iter()
        .map(|ll| (0..n).map(|i| base[i] + ll[i]).collect())
        .collect();
    let beta = cop.beta_mean(p + 1)?;
    let at_mean = (0..n)
        .map(|i| {
            let mut eta = beta[0];
            for j in 0..p {
                eta += beta[j + 1] * dataset.z_rho[i][j];
            }
            base[i]
                + cop
                    .spec
                    .log_density(pseudo.u1[i], pseudo.u2[i], cop.spec.link_to_rho(eta))
        })
        .collect();
    Ok((rows, at_mean))
}

/// Posterior predictive draws at arbitrary sites: for each paired posterior
/// draw, sample copula scores and invert the margins. Returns per-site draw
/// vectors of (angle, linear value).
#[allow(clippy::too_many_arguments)]
pub fn predictive_draws(
    ctx: &SpatialContext,
    margins: &FittedMargins,
    model: &FittedModel,
    sites: &[[f64; 2]],
    z_ang: &[Vec<f64>],
    z_lin: &[Vec<f64>],
    z_rho: &[Vec<f64>],
    n_draws: usize,
    seed: u64,
    snap_outside: bool,
) -> Result<Vec<Vec<(f64, f64)>>> {
    let n = sites.len();
    let basis = ctx.mesh.basis_matrix(sites, snap_outside)?;
    let spec = model.assoc.family().map(CopulaSpec::new);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = vec![Vec::with_capacity(n_draws); n];
    for t in 0..n_draws {
        let dm = draw_margins(margins, &basis, z_ang, z_lin, t);
        let eta = assoc_eta(model, z_rho, n, t);
        for i in 0..n {
            let (u1, u2) = match &spec {
                None => (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)),
                Some(s) => s.sample_pair(s.link_to_rho(eta[i]), &mut rng),
            };
            let phi = crate::density::wrap_angle(dm.mu1[i] + dm.s1 * norm_quantile(u1));
            let y = (dm.mu2[i] + dm.s2 * norm_quantile(u2)).exp();
            out[i].push((phi, y));
        }
    }
    Ok(out)
}

/// Predictive pointwise log-likelihood of held-out observations: rows are
/// paired posterior draws, columns the held-out points.
#[allow(clippy::too_many_arguments)]
pub fn predictive_loglik(
    ctx: &SpatialContext,
    margins: &FittedMargins,
    model: &FittedModel,
    test: &Dataset,
    n_draws: usize,
    snap_outside: bool,
) -> Result<Vec<Vec<f64>>> {
    let n = test.n_obs();
    let basis = ctx.mesh.basis_matrix(&test.sites, snap_outside)?;
    let support = WindingSupport::default();
    let spec = model.assoc.family().map(CopulaSpec::new);
    let mut out = Vec::with_capacity(n_draws);
    for t in 0..n_draws {
        let dm = draw_margins(margins, &basis, &test.z_ang, &test.z_lin, t);
        let eta = assoc_eta(model, &test.z_rho, n, t);
        out.push(
            (0..n)
                .map(|i| {
                    joint_point_loglik(
                        test.phi[i],
                        test.y[i],
                        dm.mu1[i],
                        dm.s1,
                        dm.mu2[i],
                        dm.s2,
                        spec.as_ref(),
                        eta[i],
                        &support,
                    )
                })
                .collect(),
        );
    }
    Ok(out)
}

/// Out-of-sample scores of one association model from k-fold
/// cross-validation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvScores {
    pub label: String,
    pub neg_log_score: f64,
    pub energy_score: f64,
    pub crps_cyl: f64,
}

/// k-fold cross-validation of several association models with shared margin
/// fits per fold.
pub fn cross_validate(
    dataset: &Dataset,
    ctx: &SpatialContext,
    models: &[AssocModel],
    k: usize,
    config: &FitConfig,
    seed: u64,
    pred_draws: usize,
) -> Result<Vec<CvScores>> {
    dataset.validate()?;
    let folds = cv_folds(dataset.n_obs(), k, seed)?;
    let mut nls = vec![0.0; models.len()];
    let mut es = vec![0.0; models.len()];
    let mut crps = vec![0.0; models.len()];
    for (f, test_idx) in folds.iter().enumerate() {
        let train_idx: Vec<usize> = (0..dataset.n_obs())
            .filter(|i| !test_idx.contains(i))
            .collect();
        let train = dataset.subset(&train_idx);
        let test = dataset.subset(test_idx);
        let margins = fit_margins(&train, ctx, config, seed + 17 * f as u64)?;
        let obs: Vec<(f64, f64)> = test.phi.iter().zip(&test.y).map(|(&p, &y)| (p, y)).collect();
        for (mi, &assoc) in models.iter().enumerate() {
            let model =
                fit_association(&train, ctx, &margins, assoc, config, seed + 31 * f as u64)?;
            let ll = predictive_loglik(ctx, &margins, &model, &test, pred_draws, true)?;
            nls[mi] += crate::score::neg_log_score(&ll)?;
            let draws = predictive_draws(
                ctx,
                &margins,
                &model,
                &test.sites,
                &test.z_ang,
                &test.z_lin,
                &test.z_rho,
                pred_draws.min(200),
                seed + 97 * f as u64,
                true,
            )?;
            es[mi] += crate::score::energy_score(&draws, &obs)?;
            crps[mi] += crate::score::crps_cyl(&draws, &obs)?;
        }
    }
    let kf = k as f64;
    Ok(models
        .iter()
        .enumerate()
        .map(|(mi, m)| CvScores {
            label: m.label(),
            neg_log_score: nls[mi] / kf,
            energy_score: es[mi] / kf,
            crps_cyl: crps[mi] / kf,
        })
        .collect())
}
