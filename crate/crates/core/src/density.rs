//! Cylindrical density: a wrapped-normal angular margin and a log-normal
//! linear margin joined by a copula on the latent (unwrapped) scale.
//!
//! The angular margin wraps a normal distribution onto [-pi, pi) by summing
//! over a finite winding support; the joint density sums the copula-weighted
//! terms over the same support, so each winding index carries its own copula
//! argument. Everything is computed in log space.

use crate::copula::CopulaSpec;
use crate::math::{log_sum_exp, norm_cdf, norm_log_pdf, norm_quantile};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WrappedNormalParams {
    pub mu: f64,
    pub sigma2: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LogNormalParams {
    pub mu: f64,
    pub sigma2: f64,
}

/// Winding indices summed over when wrapping. The default {-1, 0, 1}
/// captures all but O(1e-9) of the mass for angular variances up to about 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindingSupport(pub Vec<i32>);

impl Default for WindingSupport {
    fn default() -> Self {
        WindingSupport(vec![-1, 0, 1])
    }
}

impl WindingSupport {
    pub fn contains(&self, k: i32) -> bool {
        self.0.contains(&k)
    }

    pub fn iter(&self) -> impl Iterator<Item = i32> + '_ {
        self.0.iter().copied()
    }
}

/// Map an angle to the principal branch [-pi, pi).
pub fn wrap_angle(phi: f64) -> f64 {
    let w = (phi + PI).rem_euclid(TAU) - PI;
    // rem_euclid can return exactly TAU for tiny negative arguments
    if w >= PI { w - TAU } else { w }
}

/// Log-density of the wrapped normal at phi in [-pi, pi).
pub fn wn_log_pdf(phi: f64, p: &WrappedNormalParams, support: &WindingSupport) -> f64 {
    let sd = p.sigma2.sqrt();
    let terms: Vec<f64> = support
        .iter()
        .map(|k| norm_log_pdf((phi + TAU * k as f64 - p.mu) / sd) - sd.ln())
        .collect();
    log_sum_exp(&terms)
}

/// CDF of the underlying (unwrapped) normal evaluated at phi + 2*pi*k.
/// This is the angular copula argument for winding index k.
pub fn wn_cdf_unwrapped(phi: f64, k: i32, p: &WrappedNormalParams) -> f64 {
    norm_cdf((phi + TAU * k as f64 - p.mu) / p.sigma2.sqrt())
}

/// Log-density of the log-normal margin; -inf for y <= 0.
pub fn ln_log_pdf(y: f64, p: &LogNormalParams) -> f64 {
    if y <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let sd = p.sigma2.sqrt();
    norm_log_pdf((y.ln() - p.mu) / sd) - sd.ln() - y.ln()
}

/// Log-normal CDF.
pub fn ln_cdf(y: f64, p: &LogNormalParams) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    norm_cdf((y.ln() - p.mu) / p.sigma2.sqrt())
}

/// Log-normal quantile function.
pub fn ln_quantile(q: f64, p: &LogNormalParams) -> f64 {
    (p.mu + p.sigma2.sqrt() * norm_quantile(q)).exp()
}

/// Log of one winding term of the joint density: the copula density at the
/// unwrapped angular CDF and the linear CDF, times both margin densities.
/// This is the complete-data (winding-augmented) log-likelihood contribution.
pub fn pwc_log_term(
    phi: f64,
    y: f64,
    k: i32,
    wn: &WrappedNormalParams,
    ln: &LogNormalParams,
    copula: &CopulaSpec,
    rho: f64,
) -> f64 {
    let sd = wn.sigma2.sqrt();
    let z = (phi + TAU * k as f64 - wn.mu) / sd;
    let u1 = norm_cdf(z);
    let u2 = ln_cdf(y, ln);
    copula.log_density(u1, u2, rho) + norm_log_pdf(z) - sd.ln() + ln_log_pdf(y, ln)
}

/// Log joint density of (phi, y) with the winding index summed out.
pub fn pwc_log_pdf(
    phi: f64,
    y: f64,
    wn: &WrappedNormalParams,
    ln: &LogNormalParams,
    copula: &CopulaSpec,
    rho: f64,
    support: &WindingSupport,
) -> f64 {
    let terms: Vec<f64> = support
        .iter()
        .map(|k| pwc_log_term(phi, y, k, wn, ln, copula, rho))
        .collect();
    log_sum_exp(&terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::CopulaFamily;
    use approx::assert_abs_diff_eq;

    fn trapezoid(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
        let h = (hi - lo) / n as f64;
        let mut s = 0.5 * (f(lo) + f(hi));
        for i in 1..n {
            s += f(lo + i as f64 * h);
        }
        s * h
    }

    #[test]
    fn wrap_angle_principal_branch() {
        assert_abs_diff_eq!(wrap_angle(0.0), 0.0);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI), -PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(-PI), -PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(PI), -PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(2.5), 2.5, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_angle(TAU + 0.5), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(-TAU - 0.5), -0.5, epsilon = 1e-12);
        for &x in &[-10.0, -1e-300, 17.3, 1e6] {
            let w = wrap_angle(x);
            assert!((-PI..PI).contains(&w), "wrap_angle({x}) = {w}");
        }
    }

    #[test]
    fn wn_integrates_to_one() {
        let support = WindingSupport::default();
        for &(mu, s2) in &[(0.0, 0.25), (1.5, 0.5), (-3.0, 1.0), (3.1, 0.04)] {
            let p = WrappedNormalParams { mu, sigma2: s2 };
            let q = trapezoid(-PI, PI, 4000, |phi| wn_log_pdf(phi, &p, &support).exp());
            assert_abs_diff_eq!(q, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn wn_is_periodic_away_from_truncation() {
        // with support {-1,0,1} the density at phi and the same angle reached
        // by wrapping phi + 2*pi agree because the sum re-centers
        let support = WindingSupport::default();
        let p = WrappedNormalParams { mu: 0.7, sigma2: 0.3 };
        for &phi in &[-2.0, -0.3, 0.7, 2.9] {
            let direct = wn_log_pdf(phi, &p, &support);
            let wrapped = wn_log_pdf(wrap_angle(phi + TAU), &p, &support);
            assert_abs_diff_eq!(direct, wrapped, epsilon = 1e-10);
        }
    }

    #[test]
    fn wn_small_variance_matches_unwrapped_normal() {
        let support = WindingSupport::default();
        let p = WrappedNormalParams { mu: 0.4, sigma2: 0.09 };
        let sd = p.sigma2.sqrt();
        let phi = 0.9;
        let plain = norm_log_pdf((phi - p.mu) / sd) - sd.ln();
        assert_abs_diff_eq!(wn_log_pdf(phi, &p, &support), plain, epsilon = 1e-12);
    }

    #[test]
    fn ln_density_cdf_quantile_consistent() {
        let p = LogNormalParams { mu: 1.0, sigma2: 0.3 };
        // density integrates to CDF
        let y = 3.5;
        let q = trapezoid(1e-9, y, 20_000, |t| ln_log_pdf(t, &p).exp());
        assert_abs_diff_eq!(q, ln_cdf(y, &p), epsilon = 1e-6);
        // quantile inverts CDF
        for &pr in &[0.01, 0.3, 0.5, 0.9, 0.999] {
            assert_abs_diff_eq!(ln_cdf(ln_quantile(pr, &p), &p), pr, epsilon = 1e-10);
        }
        assert_eq!(ln_log_pdf(-1.0, &p), f64::NEG_INFINITY);
        assert_eq!(ln_cdf(0.0, &p), 0.0);
    }

    #[test]
    fn pwc_reduces_to_independence_product() {
        let support = WindingSupport::default();
        let wn = WrappedNormalParams { mu: 0.5, sigma2: 0.4 };
        let lnp = LogNormalParams { mu: 0.8, sigma2: 0.2 };
        let spec = CopulaSpec::new(CopulaFamily::Gaussian);
        for &(phi, y) in &[(0.1, 1.0), (-2.5, 3.0), (3.0, 0.4)] {
            let joint = pwc_log_pdf(phi, y, &wn, &lnp, &spec, 0.0, &support);
            let prod = wn_log_pdf(phi, &wn, &support) + ln_log_pdf(y, &lnp);
            assert_abs_diff_eq!(joint, prod, epsilon = 1e-10);
        }
    }

    #[test]
    fn pwc_marginalizes_to_wrapped_normal() {
        // integrating the joint over y recovers the angular margin
        let support = WindingSupport::default();
        let wn = WrappedNormalParams { mu: -0.3, sigma2: 0.5 };
        let lnp = LogNormalParams { mu: 0.5, sigma2: 0.25 };
        for family in [CopulaFamily::Gaussian, CopulaFamily::Clayton, CopulaFamily::Gumbel] {
            let spec = CopulaSpec::new(family);
            let rho = spec.link_to_rho(0.577);
            for &phi in &[-2.0, 0.0, 1.3] {
                let marg = trapezoid(1e-9, 60.0, 30_000, |y| {
                    pwc_log_pdf(phi, y, &wn, &lnp, &spec, rho, &support).exp()
                });
                let want = wn_log_pdf(phi, &wn, &support).exp();
                assert_abs_diff_eq!(marg, want, epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn pwc_marginalizes_to_log_normal() {
        let support = WindingSupport::default();
        let wn = WrappedNormalParams { mu: 0.9, sigma2: 0.3 };
        let lnp = LogNormalParams { mu: 0.2, sigma2: 0.4 };
        for family in [CopulaFamily::Gaussian, CopulaFamily::Clayton, CopulaFamily::Gumbel] {
            let spec = CopulaSpec::new(family);
            let rho = spec.link_to_rho(0.577);
            for &y in &[0.5, 1.2, 4.0] {
                let marg = trapezoid(-PI, PI, 8000, |phi| {
                    pwc_log_pdf(phi, y, &wn, &lnp, &spec, rho, &support).exp()
                });
                let want = ln_log_pdf(y, &lnp).exp();
                assert_abs_diff_eq!(marg, want, epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn pwc_integrates_to_one() {
        let support = WindingSupport::default();
        let wn = WrappedNormalParams { mu: 0.0, sigma2: 0.4 };
        let lnp = LogNormalParams { mu: 0.3, sigma2: 0.2 };
        let spec = CopulaSpec::new(CopulaFamily::Clayton);
        let rho = 1.781;
        let total = trapezoid(-PI, PI, 400, |phi| {
            trapezoid(1e-9, 20.0, 800, |y| {
                pwc_log_pdf(phi, y, &wn, &lnp, &spec, rho, &support).exp()
            })
        });
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-4);
    }

    #[test]
    fn winding_terms_sum_to_joint() {
        let support = WindingSupport::default();
        let wn = WrappedNormalParams { mu: 0.3, sigma2: 0.6 };
        let lnp = LogNormalParams { mu: 0.1, sigma2: 0.3 };
        let spec = CopulaSpec::new(CopulaFamily::Gumbel);
        let rho = 2.0;
        let (phi, y) = (-1.2, 2.4);
        let sum: f64 = support
            .iter()
            .map(|k| pwc_log_term(phi, y, k, &wn, &lnp, &spec, rho).exp())
            .sum();
        let joint = pwc_log_pdf(phi, y, &wn, &lnp, &spec, rho, &support);
        assert_abs_diff_eq!(sum.ln(), joint, epsilon = 1e-12);
    }

    #[test]
    fn custom_winding_support() {
        let wide = WindingSupport(vec![-2, -1, 0, 1, 2]);
        let wn = WrappedNormalParams { mu: 0.0, sigma2: 1.0 };
        let q = trapezoid(-PI, PI, 4000, |phi| wn_log_pdf(phi, &wn, &wide).exp());
        assert_abs_diff_eq!(q, 1.0, epsilon = 1e-9);
        assert!(wide.contains(2) && !wide.contains(3));
    }
}
