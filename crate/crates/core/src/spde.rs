//! GMRF precision matrices from the SPDE finite-element discretization,
//! with smoothness fixed at nu = 1 (alpha = 2).
//!
//! Mass lumping is applied wherever the mass matrix enters the product, so
//! the nonstationary assembly with constant fields reproduces the stationary
//! one exactly.

use crate::error::{Error, Result};
use crate::fem::FemMatrices;
use crate::sparse::{LdlFactor, SymSparse};

/// Hard guard against overflowing field exponentials.
const LOG_FIELD_BOUND: f64 = 50.0;

/// Sparse SPD precision matrix Q(theta) of the field weights.
#[derive(Debug, Clone)]
pub struct PrecisionMatrix {
    pub q: SymSparse,
    /// (theta_tau0, theta_kappa0, theta_kappa1...) that produced q
    pub theta: Vec<f64>,
}

impl PrecisionMatrix {
    pub fn factor(&self) -> Result<LdlFactor> {
        LdlFactor::new(&self.q)
    }
}

/// Evaluate the log-linear tau and kappa fields at the mesh nodes.
///
/// log tau(s) = theta[0]; log kappa(s) = theta[1] + z_kappa(s) . theta[2..].
pub fn kappa_tau_fields(
    theta: &[f64],
    z_kappa_nodes: &[Vec<f64>],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = z_kappa_nodes.len();
    if theta.len() < 2 {
        return Err(Error::InvalidArgument(
            "theta needs at least (tau0, kappa0)".into(),
        ));
    }
    let tau = theta[0].exp();
    let mut kappa = Vec::with_capacity(m);
    for z in z_kappa_nodes {
        let mut lk = theta[1];
        for (zj, tj) in z.iter().zip(&theta[2..]) {
            lk += zj * tj;
        }
        if lk.abs() > LOG_FIELD_BOUND {
            return Err(Error::InvalidArgument(format!(
                "|log kappa| = {:.2} exceeds overflow guard",
                lk.abs()
            )));
        }
        kappa.push(lk.exp());
    }
    Ok((vec![tau; m], kappa))
}

/// Nominal Matern quantities for nu = 1: range sqrt(8)/kappa and marginal
/// variance 1 / (4 pi kappa^2 tau^2).
pub fn nominal_range(kappa: f64) -> f64 {
    8.0f64.sqrt() / kappa
}

pub fn nominal_variance(kappa: f64, tau: f64) -> f64 {
    1.0 / (4.0 * std::f64::consts::PI * kappa * kappa * tau * tau)
}

/// G C^{-1} G with diagonal (lumped) C, as triplets.
fn g_cinv_g_triplets(fem: &FemMatrices) -> Vec<(usize, usize, f64)> {
    let m = fem.mass_lumped.len();
    // column slices of G (symmetric, so column k == row k)
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    for (i, j, v) in fem.stiffness.iter() {
        cols[j].push((i, v));
    }
    let mut trip = Vec::new();
    for k in 0..m {
        let inv_c = 1.0 / fem.mass_lumped[k];
        for &(i, gi) in &cols[k] {
            for &(j, gj) in &cols[k] {
                trip.push((i, j, gi * inv_c * gj));
            }
        }
    }
    trip
}

/// Stationary precision: Q = tau^2 (kappa^4 C + 2 kappa^2 G + G C^{-1} G),
/// with C lumped.
pub fn precision_stationary(fem: &FemMatrices, tau: f64, kappa: f64) -> Result<PrecisionMatrix> {
    if tau <= 0.0 || kappa <= 0.0 {
        return Err(Error::InvalidArgument("tau and kappa must be positive".into()));
    }
    let m = fem.mass_lumped.len();
    let t2 = tau * tau;
    let k2 = kappa * kappa;
    let mut trip = g_cinv_g_triplets(fem);
    for (i, j, v) in fem.stiffness.iter() {
        trip.push((i, j, 2.0 * k2 * v));
    }
    for i in 0..m {
        trip.push((i, i, k2 * k2 * fem.mass_lumped[i]));
    }
    for t in trip.iter_mut() {
        t.2 *= t2;
    }
    Ok(PrecisionMatrix {
        q: SymSparse::from_triplets(m, &trip),
        theta: vec![tau.ln(), kappa.ln()],
    })
}

/// Nonstationary precision with nodewise fields:
/// Q = T (K C K + K G + G K + G C^{-1} G) T with K = diag(kappa^2),
/// T = diag(tau), C lumped; symmetrized as (Q + Q^T)/2 after assembly.
pub fn precision_nonstationary(
    fem: &FemMatrices,
    tau_field: &[f64],
    kappa_field: &[f64],
) -> Result<PrecisionMatrix> {
    let m = fem.mass_lumped.len();
    if tau_field.len() != m || kappa_field.len() != m {
        return Err(Error::InvalidArgument("field length != node count".into()));
    }
    if tau_field.iter().chain(kappa_field).any(|&v| v <= 0.0 || !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "tau/kappa fields must be strictly positive and finite".into(),
        ));
    }
    let k2: Vec<f64> = kappa_field.iter().map(|k| k * k).collect();
    let mut trip = g_cinv_g_triplets(fem);
    for (i, j, v) in fem.stiffness.iter() {
        // K G + G K
        trip.push((i, j, k2[i] * v));
        trip.push((i, j, v * k2[j]));
    }
    for i in 0..m {
        trip.push((i, i, k2[i] * fem.mass_lumped[i] * k2[i]));
    }
    for t in trip.iter_mut() {
        t.2 *= tau_field[t.0] * tau_field[t.1];
    }
    let q = SymSparse::from_triplets(m, &trip);
    let asym = q.asymmetry();
    debug_assert!(asym < 1e-10, "pre-symmetrization asymmetry {asym}");
    let q = q.symmetrize();
    Ok(PrecisionMatrix {
        q,
        theta: vec![tau_field[0].ln()],
    })
}

/// Draw a zero-mean GMRF sample with precision `prec`.
pub fn sample_gmrf(
    factor: &LdlFactor,
    m: usize,
    rng: &mut impl rand::Rng,
) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let z: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
    factor.sample_from_precision(&z)
}
