//! One-parameter copula families: Gaussian, Clayton, Gumbel.
//!
//! Provides the CDF, log-density, link/response functions, tail-dependence
//! coefficients, sampling, and the analytic score/curvature of the
//! log-density with respect to the unconstrained predictor eta, as needed by
//! the IWLS proposal.

use crate::error::{Error, Result};
use crate::math::{log_sum_exp, norm_cdf, norm_quantile, bivariate_norm_cdf};
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

/// Pseudo-observations are clamped into [U_EPS, 1 - U_EPS] before any log
/// transform; stage-2 inputs can hit numerical 0/1.
pub const U_EPS: f64 = 1e-12;

/// Curvature floor keeping the IWLS working precision positive.
pub const W_MIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CopulaFamily {
    Gaussian,
    Clayton,
    Gumbel,
}

impl std::fmt::Display for CopulaFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CopulaFamily::Gaussian => write!(f, "gaussian"),
            CopulaFamily::Clayton => write!(f, "clayton"),
            CopulaFamily::Gumbel => write!(f, "gumbel"),
        }
    }
}

impl std::str::FromStr for CopulaFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "n" => Ok(CopulaFamily::Gaussian),
            "clayton" | "c" => Ok(CopulaFamily::Clayton),
            "gumbel" | "g" => Ok(CopulaFamily::Gumbel),
            other => Err(Error::Config(format!("unknown copula family `{other}`"))),
        }
    }
}

/// Copula family plus its link between the unconstrained predictor eta and
/// the association parameter rho.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CopulaSpec {
    pub family: CopulaFamily,
}

fn clamp_u(u: f64) -> f64 {
    u.clamp(U_EPS, 1.0 - U_EPS)
}

impl CopulaSpec {
    pub fn new(family: CopulaFamily) -> Self {
        CopulaSpec { family }
    }

    /// True when rho lies strictly inside the family's admissible range.
    pub fn rho_admissible(&self, rho: f64) -> bool {
        match self.family {
            CopulaFamily::Gaussian => (-1.0..=1.0).contains(&rho),
            CopulaFamily::Clayton => rho > 0.0,
            CopulaFamily::Gumbel => rho >= 1.0,
        }
    }

    /// Response function eta -> rho (inverse of the link column of the
    /// family table).
    pub fn link_to_rho(&self, eta: f64) -> f64 {
        match self.family {
            CopulaFamily::Gaussian => eta / (1.0 + eta * eta).sqrt(),
            CopulaFamily::Clayton => eta.exp(),
            CopulaFamily::Gumbel => 1.0 + eta.exp(),
        }
    }

    /// Link function rho -> eta.
    pub fn rho_to_eta(&self, rho: f64) -> f64 {
        match self.family {
            CopulaFamily::Gaussian => rho / (1.0 - rho * rho).sqrt(),
            CopulaFamily::Clayton => rho.ln(),
            CopulaFamily::Gumbel => (rho - 1.0).ln(),
        }
    }

    /// First and second derivatives of the response function at eta.
    /// First and second derivatives of the link eta -> rho.
    pub fn link_derivs(&self, eta: f64) -> (f64, f64) {
        match self.family {
            CopulaFamily::Gaussian => {
                let t = 1.0 + eta * eta;
                (t.powf(-1.5), -3.0 * eta * t.powf(-2.5))
            }
            CopulaFamily::Clayton | CopulaFamily::Gumbel => {
                let e = eta.exp();
                (e, e)
            }
        }
    }

    /// Copula CDF C(u1, u2; rho).
    pub fn cdf(&self, u1: f64, u2: f64, rho: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u1) || !(0.0..=1.0).contains(&u2) {
            return Err(Error::InvalidArgument(format!(
                "u outside [0,1]: ({u1}, {u2})"
            )));
        }
        if !self.rho_admissible(rho) {
            return Err(Error::InvalidArgument(format!(
                "rho {rho} outside admissible range of {}",
                self.family
            )));
        }
        let (u, v) = (clamp_u(u1), clamp_u(u2));
        Ok(match self.family {
            CopulaFamily::Gaussian => {
                bivariate_norm_cdf(norm_quantile(u), norm_quantile(v), rho)
            }
            CopulaFamily::Clayton => {
                let ln_s = clayton_ln_s(u, v, rho).0;
                (-ln_s / rho).exp()
            }
            CopulaFamily::Gumbel => {
                let ln_t = gumbel_ln_t(u, v, rho).0;
                (-(ln_t / rho).exp()).exp()
            }
        })
    }

    /// log c(u1, u2; rho); overflow-safe in deep tails.
    pub fn log_density(&self, u1: f64, u2: f64, rho: f64) -> f64 {
        let (u, v) = (clamp_u(u1), clamp_u(u2));
        match self.family {
            CopulaFamily::Gaussian => {
                if rho.abs() < 1e-14 {
                    return 0.0;
                }
                let x = norm_quantile(u);
                let y = norm_quantile(v);
                let t = 1.0 - rho * rho;
                -0.5 * t.ln() - (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * t)
            }
            CopulaFamily::Clayton => {
                let (ln_s, _, _) = clayton_ln_s(u, v, rho);
                (1.0 + rho).ln() - (1.0 + rho) * (u.ln() + v.ln()) - (2.0 + 1.0 / rho) * ln_s
            }
            CopulaFamily::Gumbel => {
                let (ln_t, _, _) = gumbel_ln_t(u, v, rho);
                let a = -u.ln();
                let b = -v.ln();
                let big_a = (ln_t / rho).exp();
                -big_a + a + b
                    + (rho - 1.0) * (a.ln() + b.ln())
                    + (1.0 / rho - 2.0) * ln_t
                    + (big_a + rho - 1.0).ln()
            }
        }
    }

    /// d and d^2 of log c with respect to rho.
    pub fn log_density_rho_derivs(&self, u1: f64, u2: f64, rho: f64) -> (f64, f64) {
        let (u, v) = (clamp_u(u1), clamp_u(u2));
        match self.family {
            CopulaFamily::Gaussian => {
                let x = norm_quantile(u);
                let y = norm_quantile(v);
                let t = 1.0 - rho * rho;
                let s = x * x + y * y;
                let m = x * y;
                let n = rho * rho * s - 2.0 * rho * m;
                let n1 = 2.0 * rho * s - 2.0 * m;
                let n2 = 2.0 * s;
                let tp = -2.0 * rho;
                let d1 = rho / t - (n1 * t + 2.0 * rho * n) / (2.0 * t * t);
                let d2 = (t + 2.0 * rho * rho) / (t * t)
                    - ((n2 * t + n1 * tp + 2.0 * n + 2.0 * rho * n1) * t
                        - 2.0 * tp * (n1 * t + 2.0 * rho * n))
                        / (2.0 * t * t * t);
                (d1, d2)
            }
            CopulaFamily::Clayton => {
                let (ln_s, r1, r2) = clayton_ln_s(u, v, rho);
                let lu = u.ln();
                let lv = v.ln();
                let d1 = 1.0 / (1.0 + rho) - (lu + lv) + ln_s / (rho * rho)
                    - (2.0 + 1.0 / rho) * r1;
                let d2 = -1.0 / ((1.0 + rho) * (1.0 + rho)) - 2.0 * ln_s / rho.powi(3)
                    + 2.0 * r1 / (rho * rho)
                    - (2.0 + 1.0 / rho) * (r2 - r1 * r1);
                (d1, d2)
            }
            CopulaFamily::Gumbel => {
                let (ln_t, t1, t2) = gumbel_ln_t(u, v, rho);
                let big_a = (ln_t / rho).exp();
                let da = big_a * (-ln_t / (rho * rho) + t1 / rho);
                let dda = da * da / big_a
                    + big_a
                        * (2.0 * ln_t / rho.powi(3) - 2.0 * t1 / (rho * rho) + t2 / rho
                            - t1 * t1 / rho);
                let la = (-u.ln()).ln();
                let lb = (-v.ln()).ln();
                let g = big_a + rho - 1.0;
                let d1 = -da + (la + lb) - ln_t / (rho * rho)
                    + (1.0 / rho - 2.0) * t1
                    + (da + 1.0) / g;
                let d2 = -dda + 2.0 * ln_t / rho.powi(3) - 2.0 * t1 / (rho * rho)
                    + (1.0 / rho - 2.0) * (t2 - t1 * t1)
                    + (dda * g - (da + 1.0) * (da + 1.0)) / (g * g);
                (d1, d2)
            }
        }
    }

    /// IWLS working score v = d log c / d eta and curvature
    /// w = -d^2 log c / d eta^2, floored at [`W_MIN`].
    pub fn eta_score_and_curvature(&self, u1: f64, u2: f64, eta: f64) -> (f64, f64) {
        let rho = self.link_to_rho(eta);
        let (d1, d2) = self.log_density_rho_derivs(u1, u2, rho);
        let (rp, rpp) = self.link_derivs(eta);
        let v = d1 * rp;
        let w = -(d2 * rp * rp + d1 * rpp);
        (v, w.max(W_MIN))
    }

    /// (lambda_lower, lambda_upper).
    pub fn tail_dependence(&self, rho: f64) -> (f64, f64) {
        match self.family {
            CopulaFamily::Gaussian => (0.0, 0.0),
            CopulaFamily::Clayton => (2.0f64.powf(-1.0 / rho), 0.0),
            CopulaFamily::Gumbel => (0.0, 2.0 - 2.0f64.powf(1.0 / rho)),
        }
    }

    /// Population Kendall's tau (closed forms; used as a sampling oracle).
    pub fn kendall_tau(&self, rho: f64) -> f64 {
        match self.family {
            CopulaFamily::Gaussian => 2.0 / std::f64::consts::PI * rho.asin(),
            CopulaFamily::Clayton => rho / (rho + 2.0),
            CopulaFamily::Gumbel => 1.0 - 1.0 / rho,
        }
    }

    /// Draw one (u1, u2) pair from the copula.
    pub fn sample_pair(&self, rho: f64, rng: &mut impl Rng) -> (f64, f64) {
        match self.family {
            CopulaFamily::Gaussian => {
                let z1: f64 = StandardNormal.sample(rng);
                let z: f64 = StandardNormal.sample(rng);
                let z2 = rho * z1 + (1.0 - rho * rho).sqrt() * z;
                (norm_cdf(z1), norm_cdf(z2))
            }
            CopulaFamily::Clayton => {
                // conditional-inverse construction
                let u1: f64 = rng.gen_range(U_EPS..1.0 - U_EPS);
                let w: f64 = rng.gen_range(U_EPS..1.0 - U_EPS);
                let u2 = (u1.powf(-rho) * (w.powf(-rho / (1.0 + rho)) - 1.0) + 1.0)
                    .powf(-1.0 / rho);
                (u1, clamp_u(u2))
            }
            CopulaFamily::Gumbel => {
                let alpha = 1.0 / rho;
                if alpha > 1.0 - 1e-9 {
                    // rho == 1: independence
                    return (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
                }
                // Marshall-Olkin with a positive stable frailty
                // (Chambers-Mallows-Stuck sampler)
                let theta: f64 = rng.gen_range(0.0..std::f64::consts::PI);
                let e: f64 = Exp1.sample(rng);
                let v = (alpha * theta).sin() / theta.sin().powf(1.0 / alpha)
                    * (((1.0 - alpha) * theta).sin() / e).powf((1.0 - alpha) / alpha);
                let e1: f64 = Exp1.sample(rng);
                let e2: f64 = Exp1.sample(rng);
                let u1 = (-(e1 / v).powf(alpha)).exp();
                let u2 = (-(e2 / v).powf(alpha)).exp();
                (clamp_u(u1), clamp_u(u2))
            }
        }
    }
}

/// ln S, S'/S, S''/S for S = u^{-rho} + v^{-rho} - 1, computed without
/// forming the (possibly huge) powers.
fn clayton_ln_s(u: f64, v: f64, rho: f64) -> (f64, f64, f64) {
    let a = -rho * u.ln();
    let b = -rho * v.ln();
    let m = a.max(b).max(0.0);
    let ea = (a - m).exp();
    let eb = (b - m).exp();
    let e1 = (-m).exp();
    let s_scaled = ea + eb - e1;
    let ln_s = m + s_scaled.ln();
    let lu = u.ln();
    let lv = v.ln();
    let r1 = (-lu * ea - lv * eb) / s_scaled;
    let r2 = (lu * lu * ea + lv * lv * eb) / s_scaled;
    (ln_s, r1, r2)
}

/// ln T, T'/T, T''/T for T = a^rho + b^rho with a = -ln u, b = -ln v.
fn gumbel_ln_t(u: f64, v: f64, rho: f64) -> (f64, f64, f64) {
    let la = (-u.ln()).ln();
    let lb = (-v.ln()).ln();
    let ln_t = log_sum_exp(&[rho * la, rho * lb]);
    let w1 = (rho * la - ln_t).exp();
    let w2 = (rho * lb - ln_t).exp();
    let t1 = w1 * la + w2 * lb;
    let t2 = w1 * la * la + w2 * lb * lb;
    (ln_t, t1, t2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const FAMILIES: [CopulaFamily; 3] = [
        CopulaFamily::Gaussian,
        CopulaFamily::Clayton,
        CopulaFamily::Gumbel,
    ];

    fn mid_rho(f: CopulaFamily) -> f64 {
        CopulaSpec::new(f).link_to_rho(0.577)
    }

    #[test]
    fn link_targets_from_simulation_design() {
        let eta = 0.577;
        assert_abs_diff_eq!(
            CopulaSpec::new(CopulaFamily::Gaussian).link_to_rho(eta),
            0.4997,
            epsilon = 1e-3
        );
        assert_abs_diff_eq!(
            CopulaSpec::new(CopulaFamily::Clayton).link_to_rho(eta),
            1.781,
            epsilon = 1e-3
        );
        assert_abs_diff_eq!(
            CopulaSpec::new(CopulaFamily::Gumbel).link_to_rho(eta),
            2.781,
            epsilon = 1e-3
        );
        assert_abs_diff_eq!(
            CopulaSpec::new(CopulaFamily::Clayton).link_to_rho(0.0),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn links_are_mutual_inverses() {
        for f in FAMILIES {
            let spec = CopulaSpec::new(f);
            let mut eta = -10.0;
            while eta <= 10.0 {
                let rho = spec.link_to_rho(eta);
                assert!(spec.rho_admissible(rho), "{f} eta={eta} rho={rho}");
                assert_abs_diff_eq!(spec.rho_to_eta(rho), eta, epsilon = 1e-9 * eta.abs().max(1.0));
                eta += 0.25;
            }
        }
    }

    #[test]
    fn cdf_uniform_margins() {
        for f in FAMILIES {
            let spec = CopulaSpec::new(f);
            let rho = mid_rho(f);
            for &u in &[0.1, 0.37, 0.5, 0.92] {
                assert_abs_diff_eq!(spec.cdf(u, 1.0, rho).unwrap(), u, epsilon = 1e-8);
                assert_abs_diff_eq!(spec.cdf(1.0, u, rho).unwrap(), u, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn gumbel_rho_one_is_independence() {
        let spec = CopulaSpec::new(CopulaFamily::Gumbel);
        for &(u, v) in &[(0.2, 0.7), (0.5, 0.5), (0.93, 0.13)] {
            assert_abs_diff_eq!(spec.cdf(u, v, 1.0).unwrap(), u * v, epsilon = 1e-12);
        }
    }

    #[test]
    fn gaussian_rho_zero_is_product() {
        let spec = CopulaSpec::new(CopulaFamily::Gaussian);
        assert_abs_diff_eq!(spec.cdf(0.3, 0.7, 0.0).unwrap(), 0.21, epsilon = 1e-12);
        assert_abs_diff_eq!(spec.log_density(0.4, 0.9, 0.0), 0.0, epsilon = 1e-14);
    }

    /// 2-D quadrature of the copula density over the unit square, computed
    /// after the substitution u = Phi(x) so the integrand is smooth.
    fn density_quadrature(spec: CopulaSpec, rho: f64) -> f64 {
        let n = 400;
        let lim = 8.0;
        let h = 2.0 * lim / n as f64;
        let mut total = 0.0;
        for i in 0..=n {
            let x = -lim + i as f64 * h;
            let wx = if i == 0 || i == n { 0.5 } else { 1.0 };
            let u = norm_cdf(x);
            let px = crate::math::norm_pdf(x);
            for j in 0..=n {
                let y = -lim + j as f64 * h;
                let wy = if j == 0 || j == n { 0.5 } else { 1.0 };
                let v = norm_cdf(y);
                let py = crate::math::norm_pdf(y);
                total += wx * wy * spec.log_density(u, v, rho).exp() * px * py;
            }
        }
        total * h * h
    }

    #[test]
    fn density_integrates_to_one() {
        for f in FAMILIES {
            let spec = CopulaSpec::new(f);
            let rho = mid_rho(f);
            let q = density_quadrature(spec, rho);
            assert_abs_diff_eq!(q, 1.0, epsilon = 1e-5);
        }
    }

    #[test]
    fn clayton_cdf_matches_density_quadrature() {
        let spec = CopulaSpec::new(CopulaFamily::Clayton);
        let rho = 1.781;
        // integrate density over [0, 0.5]^2 via the normal substitution
        let n = 600;
        let lim = 8.0;
        let hi = 0.0; // Phi^{-1}(0.5)
        let h = (hi + lim) / n as f64;
        let mut total = 0.0;
        for i in 0..=n {
            let x = -lim + i as f64 * h;
            let wx = if i == 0 || i == n { 0.5 } else { 1.0 };
            let u = norm_cdf(x);
            let px = crate::math::norm_pdf(x);
            for j in 0..=n {
                let y = -lim + j as f64 * h;
                let wy = if j == 0 || j == n { 0.5 } else { 1.0 };
                let v = norm_cdf(y);
                let py = crate::math::norm_pdf(y);
                total += wx * wy * spec.log_density(u, v, rho).exp() * px * py;
            }
        }
        total *= h * h;
        assert_abs_diff_eq!(spec.cdf(0.5, 0.5, rho).unwrap(), total, epsilon = 1e-5);
    }

    #[test]
    fn density_matches_cdf_mixed_partial() {
        // central finite difference of the CDF, mixed partial, h = 1e-4
        let h = 1e-4;
        for f in FAMILIES {
            let spec = CopulaSpec::new(f);
            let rho = mid_rho(f);
            for &(u, v) in &[(0.3, 0.6), (0.5, 0.5), (0.75, 0.2)] {
                let c = |a: f64, b: f64| spec.cdf(a, b, rho).unwrap();
                let fd = (c(u + h, v + h) - c(u + h, v - h) - c(u - h, v + h)
                    + c(u - h, v - h))
                    / (4.0 * h * h);
                let d = spec.log_density(u, v, rho).exp();
                assert!(
                    (fd - d).abs() / d.abs() < 1e-3,
                    "{f} density {d} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn tail_dependence_formulas() {
        let (l, u) = CopulaSpec::new(CopulaFamily::Clayton).tail_dependence(1.781);
        assert_abs_diff_eq!(l, 2.0f64.powf(-1.0 / 1.781), epsilon = 1e-15);
        assert_abs_diff_eq!(l, 0.678, epsilon = 1e-3);
        assert_eq!(u, 0.0);
        let (l, u) = CopulaSpec::new(CopulaFamily::Gumbel).tail_dependence(2.781);
        assert_eq!(l, 0.0);
        assert_abs_diff_eq!(u, 0.717, epsilon = 1e-3);
        let (l, u) = CopulaSpec::new(CopulaFamily::Gaussian).tail_dependence(0.9);
        assert_eq!((l, u), (0.0, 0.0));
    }

    #[test]
    fn score_matches_finite_difference() {
        let h = 1e-5;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for f in FAMILIES {
            let spec = CopulaSpec::new(f);
            for _ in 0..50 {
                let u: f64 = rng.gen_range(0.05..0.95);
                let v: f64 = rng.gen_range(0.05..0.95);
                let eta: f64 = rng.gen_range(-1.5..1.5);
                let lc = |e: f64| spec.log_density(u, v, spec.link_to_rho(e));
                let fd = (lc(eta + h) - lc(eta - h)) / (2.0 * h);
                let (score, _) = spec.eta_score_and_curvature(u, v, eta);
                let denom = fd.abs().max(1e-2);
                assert!(
                    (score - fd).abs() / denom < 1e-4,
                    "{f} u={u} v={v} eta={eta}: score {score} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn curvature_matches_finite_difference() {
        let h = 1e-4;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for f in FAMILIES {
            let spec = CopulaSpec::new(f);
            for _ in 0..50 {
                let u: f64 = rng.gen_range(0.05..0.95);
                let v: f64 = rng.gen_range(0.05..0.95);
                let eta: f64 = rng.gen_range(-1.5..1.5);
                let lc = |e: f64| spec.log_density(u, v, spec.link_to_rho(e));
                let fd = -(lc(eta + h) - 2.0 * lc(eta) + lc(eta - h)) / (h * h);
                let rho = spec.link_to_rho(eta);
                let (d1, d2) = spec.log_density_rho_derivs(u, v, rho);
                let (rp, rpp) = spec.link_derivs(eta);
                let raw = -(d2 * rp * rp + d1 * rpp);
                if raw.abs() > 1e-3 {
                    assert!(
                        (raw - fd).abs() / fd.abs().max(1e-3) < 1e-3,
                        "{f} u={u} v={v} eta={eta}: w {raw} vs fd {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn gaussian_score_zero_at_median_independence() {
        let spec = CopulaSpec::new(CopulaFamily::Gaussian);
        let (v, _) = spec.eta_score_and_curvature(0.5, 0.5, 0.0);
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
    }

    fn empirical_tau(us: &[(f64, f64)]) -> f64 {
        // O(n^2) concordance count on a subsample
        let n = us.len();
        let mut s = 0i64;
        for i in 0..n {
            for j in (i + 1)..n {
                let c = (us[i].0 - us[j].0) * (us[i].1 - us[j].1);
                s += if c > 0.0 { 1 } else { -1 };
            }
        }
        2.0 * s as f64 / (n as f64 * (n as f64 - 1.0))
    }

    #[test]
    fn sampler_kendall_tau() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for (f, rho) in [
            (CopulaFamily::Gumbel, 1.0),
            (CopulaFamily::Clayton, 1.781),
            (CopulaFamily::Gaussian, 0.5),
        ] {
            let spec = CopulaSpec::new(f);
            let n = 4000; // O(n^2) tau estimator
            let draws: Vec<(f64, f64)> =
                (0..n).map(|_| spec.sample_pair(rho, &mut rng)).collect();
            let tau = empirical_tau(&draws);
            let want = spec.kendall_tau(rho);
            assert!(
                (tau - want).abs() < 0.025,
                "{f} rho={rho}: tau {tau} vs {want}"
            );
        }
    }

    #[test]
    fn sampler_margins_uniform() {
        // Kolmogorov-Smirnov against U(0,1); 99.9% critical value
        // 1.95/sqrt(n), chosen because 18 statistics are checked
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for f in FAMILIES {
            let spec = CopulaSpec::new(f);
            for &eta in &[-1.0, 0.577, 2.0] {
                let rho = spec.link_to_rho(eta);
                let n = 100_000;
                let mut u1s = Vec::with_capacity(n);
                let mut u2s = Vec::with_capacity(n);
                for _ in 0..n {
                    let (a, b) = spec.sample_pair(rho, &mut rng);
                    u1s.push(a);
                    u2s.push(b);
                }
                for us in [&mut u1s, &mut u2s] {
                    us.sort_by(|a, b| a.total_cmp(b));
                    let ks = us
                        .iter()
                        .enumerate()
                        .map(|(i, &u)| {
                            let e_hi = (i + 1) as f64 / n as f64;
                            let e_lo = i as f64 / n as f64;
                            (u - e_lo).abs().max((e_hi - u).abs())
                        })
                        .fold(0.0f64, f64::max);
                    let crit = 1.95 / (n as f64).sqrt();
                    assert!(ks < crit, "{f} eta={eta}: KS {ks} >= {crit}");
                }
            }
        }
    }

    #[test]
    fn log_density_finite_on_clamped_square() {
        for f in FAMILIES {
            let spec = CopulaSpec::new(f);
            for &eta in &[-3.0, 0.0, 0.577, 3.0] {
                let rho = spec.link_to_rho(eta);
                for &u in &[1e-12, 1e-6, 0.5, 1.0 - 1e-6, 1.0 - 1e-12] {
                    for &v in &[1e-12, 0.5, 1.0 - 1e-12] {
                        let ld = spec.log_density(u, v, rho);
                        assert!(ld.is_finite(), "{f} rho={rho} u={u} v={v}: {ld}");
                    }
                }
            }
        }
    }
}
