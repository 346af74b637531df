//! Synthetic cylindrical data on the unit square.
//!
//! Generates observation sites, smooth deterministic covariate surfaces,
//! independent latent GMRF fields for the two margins, and copula-coupled
//! responses, recording the generating truth alongside the data.

use crate::copula::{CopulaFamily, CopulaSpec};
use crate::density::wrap_angle;
use crate::error::Result;
use crate::fem::FemMatrices;
use crate::math::norm_quantile;
use crate::mesh::Mesh;
use crate::spde::{kappa_tau_fields, precision_nonstationary, sample_gmrf};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Deterministic covariate surfaces (z_beta, z_kappa, z_rho) at a point of
/// the unit square: a margin-mean covariate, a nonstationarity covariate for
/// the log-kappa field, and an association covariate.
pub fn covariate_surfaces(s: [f64; 2]) -> (f64, f64, f64) {
    let (s1, s2) = (s[0], s[1]);
    let z_beta = 2.0 * (TAU * s1).sin() * (2.0 * TAU * s2).sin();
    let z_kappa = 0.5 + (TAU * s1).sin() * (2.0 * TAU * s2).cos();
    let z_rho = (4.0 * s2 + s1).sin() - 0.5 * (-64.0 * s1 * s1).exp();
    (z_beta, z_kappa, z_rho)
}

/// Evaluate the nonstationarity covariate at every mesh node.
pub fn kappa_covariates_at_nodes(mesh: &Mesh) -> Vec<Vec<f64>> {
    mesh.nodes
        .iter()
        .map(|&p| vec![covariate_surfaces(p).1])
        .collect()
}

/// Generating parameters of one synthetic scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n_obs: usize,
    pub family: CopulaFamily,
    /// Association intercept on the link scale.
    pub eta0: f64,
    /// Slope on the association covariate; None fixes eta at eta0.
    pub eta_slope: Option<f64>,
    /// True spatial hyperparameters (theta_tau0, theta_kappa0, theta_kappa1...).
    /// With more than two entries the kappa field follows the
    /// nonstationarity covariate surface.
    pub theta: Vec<f64>,
    /// Angular margin (intercept, covariate slope).
    pub beta_ang: (f64, f64),
    /// Linear margin (intercept, covariate slope) on the log scale.
    pub beta_lin: (f64, f64),
    pub sigma2_ang: f64,
    pub sigma2_lin: f64,
}

impl ScenarioConfig {
    /// Reference scenario: nominal correlation range 0.3 and marginal field
    /// variance 0.5, moderate positive association.
    pub fn reference(family: CopulaFamily, covariate_association: bool) -> Self {
        let kappa = 8.0f64.sqrt() / 0.3;
        let tau = 1.0 / (kappa * (4.0 * PI * 0.5).sqrt());
        ScenarioConfig {
            n_obs: 250,
            family,
            eta0: 0.577,
            eta_slope: if covariate_association { Some(-0.374) } else { None },
            theta: vec![tau.ln(), kappa.ln()],
            beta_ang: (PI, 0.5),
            beta_lin: (1.0, 0.3),
            sigma2_ang: 0.1,
            sigma2_lin: 0.1,
        }
    }
}

/// Everything the generator knew, kept for parameter-recovery checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulatedTruth {
    pub gamma_ang: Vec<f64>,
    pub gamma_lin: Vec<f64>,
    pub eta: Vec<f64>,
    /// Unwrapped latent angles before wrapping.
    pub unwrapped: Vec<f64>,
    pub windings: Vec<i32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulatedData {
    pub sites: Vec<[f64; 2]>,
    /// Angular response in [-pi, pi).
    pub phi: Vec<f64>,
    /// Positive linear response.
    pub y: Vec<f64>,
    /// Margin-mean covariate at the sites.
    pub z_beta: Vec<f64>,
    /// Association covariate at the sites.
    pub z_rho: Vec<f64>,
    pub truth: SimulatedTruth,
}

/// Draw one synthetic dataset.
pub fn simulate_scenario(
    config: &ScenarioConfig,
    mesh: &Mesh,
    fem: &FemMatrices,
    seed: u64,
) -> Result<SimulatedData> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let m = mesh.nodes.len();
    let z_kappa_nodes: Vec<Vec<f64>> = if config.theta.len() > 2 {
        kappa_covariates_at_nodes(mesh)
    } else {
        vec![vec![]; m]
    };
    let (tau_field, kappa_field) = kappa_tau_fields(&config.theta, &z_kappa_nodes)?;
    let prec = precision_nonstationary(fem, &tau_field, &kappa_field)?;
    let factor = prec.factor()?;
    let gamma_ang = sample_gmrf(&factor, m, &mut rng);
    let gamma_lin = sample_gmrf(&factor, m, &mut rng);

    let sites: Vec<[f64; 2]> = (0..config.n_obs)
        .map(|_| [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)])
        .collect();
    let basis = mesh.basis_matrix(&sites, false)?;
    let field_ang = basis.apply(&gamma_ang);
    let field_lin = basis.apply(&gamma_lin);

    let spec = CopulaSpec::new(config.family);
    let s1 = config.sigma2_ang.sqrt();
    let s2 = config.sigma2_lin.sqrt();
    let mut phi = Vec::with_capacity(config.n_obs);
    let mut y = Vec::with_capacity(config.n_obs);
    let mut z_beta = Vec::with_capacity(config.n_obs);
    let mut z_rho = Vec::with_capacity(config.n_obs);
    let mut eta_all = Vec::with_capacity(config.n_obs);
    let mut unwrapped = Vec::with_capacity(config.n_obs);
    let mut windings = Vec::with_capacity(config.n_obs);

    for i in 0..config.n_obs {
        let (zb, _, zr) = covariate_surfaces(sites[i]);
        let eta = config.eta0 + config.eta_slope.map_or(0.0, |b| b * zr);
        let rho = spec.link_to_rho(eta);
        let (u1, u2) = spec.sample_pair(rho, &mut rng);
        let mu1 = config.beta_ang.0 + config.beta_ang.1 * zb + field_ang[i];
        let mu2 = config.beta_lin.0 + config.beta_lin.1 * zb + field_lin[i];
        let w = mu1 + s1 * norm_quantile(u1);
        let p = wrap_angle(w);
        phi.push(p);
        y.push((mu2 + s2 * norm_quantile(u2)).exp());
        z_beta.push(zb);
        z_rho.push(zr);
        eta_all.push(eta);
        unwrapped.push(w);
        windings.push(((w - p) / TAU).round() as i32);
    }

    Ok(SimulatedData {
        sites,
        phi,
        y,
        z_beta,
        z_rho,
        truth: SimulatedTruth {
            gamma_ang,
            gamma_lin,
            eta: eta_all,
            unwrapped,
            windings,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble_fem;
    use approx::assert_abs_diff_eq;

    #[test]
    fn covariate_surface_reference_points() {
        let (zb, zk, zr) = covariate_surfaces([0.0, 0.0]);
        assert_abs_diff_eq!(zb, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(zk, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(zr, -0.5, epsilon = 1e-15);
        let (zb, _, _) = covariate_surfaces([0.25, 0.125]);
        assert_abs_diff_eq!(zb, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn mean_covariate_antisymmetric_in_s1() {
        for &(s1, s2) in &[(0.1, 0.3), (0.37, 0.8), (0.45, 0.12)] {
            let (a, _, _) = covariate_surfaces([s1, s2]);
            let (b, _, _) = covariate_surfaces([1.0 - s1, s2]);
            assert_abs_diff_eq!(a, -b, epsilon = 1e-12);
        }
    }

    #[test]
    fn reference_truth_matches_nominal_range_and_variance() {
        let cfg = ScenarioConfig::reference(CopulaFamily::Clayton, false);
        let kappa = cfg.theta[1].exp();
        let tau = cfg.theta[0].exp();
        assert_abs_diff_eq!(crate::spde::nominal_range(kappa), 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(crate::spde::nominal_variance(kappa, tau), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(cfg.theta[1], 2.2437, epsilon = 1e-3);
        assert_abs_diff_eq!(cfg.theta[0], -3.1631, epsilon = 1e-3);
    }

    #[test]
    fn simulation_shapes_and_domains() {
        let mesh = Mesh::regular(8, 0.2).unwrap();
        let fem = assemble_fem(&mesh).unwrap();
        let cfg = ScenarioConfig::reference(CopulaFamily::Gumbel, true);
        let data = simulate_scenario(&cfg, &mesh, &fem, 5).unwrap();
        assert_eq!(data.phi.len(), 250);
        assert!(data.y.iter().all(|&v| v > 0.0 && v.is_finite()));
        assert!(data.phi.iter().all(|&p| (-PI..PI).contains(&p)));
        assert_eq!(data.truth.gamma_ang.len(), mesh.nodes.len());
        // the recorded unwrapped angle reproduces phi and the winding
        for i in 0..250 {
            let w = data.truth.unwrapped[i];
            assert_abs_diff_eq!(wrap_angle(w), data.phi[i], epsilon = 1e-12);
            assert_abs_diff_eq!(
                data.phi[i] + TAU * data.truth.windings[i] as f64,
                w,
                epsilon = 1e-9
            );
        }
        // association covariate actually varies
        let (lo, hi) = data
            .z_rho
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &z| {
                (l.min(z), h.max(z))
            });
        assert!(hi - lo > 0.5);
    }

    #[test]
    fn simulation_reproducible() {
        let mesh = Mesh::regular(6, 0.2).unwrap();
        let fem = assemble_fem(&mesh).unwrap();
        let cfg = ScenarioConfig::reference(CopulaFamily::Gaussian, false);
        let a = simulate_scenario(&cfg, &mesh, &fem, 42).unwrap();
        let b = simulate_scenario(&cfg, &mesh, &fem, 42).unwrap();
        assert_eq!(a.phi, b.phi);
        assert_eq!(a.y, b.y);
        let c = simulate_scenario(&cfg, &mesh, &fem, 43).unwrap();
        assert_ne!(a.phi, c.phi);
    }

    #[test]
    fn constant_association_scenario_has_flat_eta() {
        let mesh = Mesh::regular(6, 0.2).unwrap();
        let fem = assemble_fem(&mesh).unwrap();
        let cfg = ScenarioConfig::reference(CopulaFamily::Clayton, false);
        let data = simulate_scenario(&cfg, &mesh, &fem, 1).unwrap();
        assert!(data.truth.eta.iter().all(|&e| (e - 0.577).abs() < 1e-15));
        let cfg2 = ScenarioConfig::reference(CopulaFamily::Clayton, true);
        let data2 = simulate_scenario(&cfg2, &mesh, &fem, 1).unwrap();
        assert!(data2.truth.eta.iter().any(|&e| (e - 0.577).abs() > 0.1));
    }
}
