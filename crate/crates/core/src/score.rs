//! Model comparison and proper scoring rules.
//!
//! Information criteria operate on a draws-by-observations pointwise
//! log-likelihood matrix. Predictive scores operate on posterior predictive
//! draws of the cylindrical observable (angle, positive linear value): the
//! negative log score uses the posterior mixture density, the energy score
//! embeds the cylinder in R^3 as (cos phi, sin phi, y), and the cylindrical
//! continuous ranked probability score is the energy score under the
//! intrinsic cylinder metric with geodesic angular distance.

use crate::density::wrap_angle;
use crate::error::{Error, Result};
use crate::math::log_sum_exp;
use std::f64::consts::TAU;
#[cfg(test)]
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct DicResult {
    pub dic: f64,
    /// Effective number of parameters: mean deviance minus deviance at the
    /// posterior mean.
    pub p_d: f64,
    pub mean_deviance: f64,
    pub deviance_at_mean: f64,
}

/// Deviance information criterion: twice the posterior-mean deviance minus
/// the deviance at the posterior mean.
///
/// `loglik` is draws x observations; `loglik_at_mean` holds the pointwise
/// log-likelihood evaluated at the posterior-mean parameters (means taken
/// on unconstrained scales).
pub fn dic(loglik: &[Vec<f64>], loglik_at_mean: &[f64]) -> Result<DicResult> {
    let t = loglik.len();
    if t == 0 {
        return Err(Error::InvalidArgument("empty log-likelihood matrix".into()));
    }
    let n = loglik_at_mean.len();
    if loglik.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidArgument(
            "log-likelihood rows differ in length".into(),
        ));
    }
    let mean_deviance = loglik
        .iter()
        .map(|row| -2.0 * row.iter().sum::<f64>())
        .sum::<f64>()
        / t as f64;
    let deviance_at_mean = -2.0 * loglik_at_mean.iter().sum::<f64>();
    Ok(DicResult {
        dic: 2.0 * mean_deviance - deviance_at_mean,
        p_d: mean_deviance - deviance_at_mean,
        mean_deviance,
        deviance_at_mean,
    })
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct WaicResult {
    pub waic: f64,
    /// Log pointwise predictive density.
    pub lppd: f64,
    /// Effective parameter count: sum of pointwise posterior variances of
    /// the log-likelihood.
    pub p_waic: f64,
}

/// Widely applicable information criterion, variance form.
pub fn waic(loglik: &[Vec<f64>]) -> Result<WaicResult> {
    let t = loglik.len();
    if t < 2 {
        return Err(Error::InvalidArgument(
            "WAIC needs at least two draws".into(),
        ));
    }
    let n = loglik[0].len();
    if loglik.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidArgument(
            "log-likelihood rows differ in length".into(),
        ));
    }
    let mut lppd = 0.0;
    let mut p_waic = 0.0;
    let mut col = Vec::with_capacity(t);
    for i in 0..n {
        col.clear();
        col.extend(loglik.iter().map(|row| row[i]));
        lppd += log_sum_exp(&col) - (t as f64).ln();
        let mean = col.iter().sum::<f64>() / t as f64;
        p_waic += col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (t as f64 - 1.0);
    }
    Ok(WaicResult {
        waic: -2.0 * (lppd - p_waic),
        lppd,
        p_waic,
    })
}

/// Negative log score: minus the mean over observations of the log of the
/// posterior predictive mixture density (1/T) sum_t f(y_i | theta_t).
pub fn neg_log_score(loglik: &[Vec<f64>]) -> Result<f64> {
    let t = loglik.len();
    if t == 0 {
        return Err(Error::InvalidArgument("empty log-likelihood matrix".into()));
    }
    let n = loglik[0].len();
    let mut total = 0.0;
    let mut col = Vec::with_capacity(t);
    for i in 0..n {
        col.clear();
        col.extend(loglik.iter().map(|row| row[i]));
        total += log_sum_exp(&col) - (t as f64).ln();
    }
    Ok(-total / n as f64)
}

/// Geodesic distance between two angles on the circle.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (wrap_angle(a) - wrap_angle(b)).abs();
    d.min(TAU - d)
}

/// Cylindrical metric: sqrt of squared geodesic angular distance plus
/// squared linear difference.
pub fn cyl_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    let da = angular_distance(a.0, b.0);
    let dy = a.1 - b.1;
    (da * da + dy * dy).sqrt()
}

/// Euclidean distance of the R^3 cylinder embedding (cos phi, sin phi, y).
pub fn embed_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    let dx = a.0.cos() - b.0.cos();
    let dy = a.0.sin() - b.0.sin();
    let dz = a.1 - b.1;
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Sample energy score of one observation under an arbitrary metric:
/// mean distance from draws to the observation minus half the mean
/// pairwise distance among draws.
pub fn energy_score_with(
    draws: &[(f64, f64)],
    obs: (f64, f64),
    metric: impl Fn((f64, f64), (f64, f64)) -> f64,
) -> Result<f64> {
    let m = draws.len();
    if m < 2 {
        return Err(Error::InvalidArgument(
            "energy score needs at least two draws".into(),
        ));
    }
    let to_obs: f64 = draws.iter().map(|&d| metric(d, obs)).sum::<f64>() / m as f64;
    let mut pair = 0.0;
    for j in 0..m {
        for k in (j + 1)..m {
            pair += metric(draws[j], draws[k]);
        }
    }
    pair *= 2.0 / (m as f64 * m as f64);
    Ok(to_obs - 0.5 * pair)
}

/// Energy score with the R^3 embedding metric, averaged over observations.
/// `draws[i]` holds predictive (angle, linear) draws for observation i.
pub fn energy_score(draws: &[Vec<(f64, f64)>], obs: &[(f64, f64)]) -> Result<f64> {
    mean_score(draws, obs, embed_distance)
}

/// Energy score under the cylindrical metric (a multivariate CRPS on the
/// cylinder), averaged over observations.
pub fn crps_cyl(draws: &[Vec<(f64, f64)>], obs: &[(f64, f64)]) -> Result<f64> {
    mean_score(draws, obs, cyl_distance)
}

fn mean_score(
    draws: &[Vec<(f64, f64)>],
    obs: &[(f64, f64)],
    metric: impl Fn((f64, f64), (f64, f64)) -> f64 + Copy,
) -> Result<f64> {
    if draws.len() != obs.len() || obs.is_empty() {
        return Err(Error::InvalidArgument(
            "need one draw set per observation".into(),
        ));
    }
    let mut total = 0.0;
    for (d, &o) in draws.iter().zip(obs) {
        total += energy_score_with(d, o, metric)?;
    }
    Ok(total / obs.len() as f64)
}

/// Deterministic fold assignment for k-fold cross-validation: a seeded
/// shuffle of 0..n split into k nearly equal parts. Returns for each fold
/// the held-out indices.
pub fn cv_folds(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(Error::InvalidArgument(format!(
            "cannot split {n} observations into {k} folds"
        )));
    }
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let mut folds = vec![Vec::new(); k];
    for (pos, &i) in idx.iter().enumerate() {
        folds[pos % k].push(i);
    }
    for f in folds.iter_mut() {
        f.sort_unstable();
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn dic_on_toy_matrix() {
        // two draws, two observations
        let ll = vec![vec![-1.0, -2.0], vec![-2.0, -3.0]];
        let at_mean = vec![-1.2, -2.2];
        let r = dic(&ll, &at_mean).unwrap();
        // deviances: 6 and 10 -> mean 8; at mean: 6.8
        assert_abs_diff_eq!(r.mean_deviance, 8.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.deviance_at_mean, 6.8, epsilon = 1e-12);
        assert_abs_diff_eq!(r.p_d, 1.2, epsilon = 1e-12);
        assert_abs_diff_eq!(r.dic, 9.2, epsilon = 1e-12);
    }

    #[test]
    fn dic_zero_complexity_when_degenerate() {
        // identical draws: p_d = 0 and DIC equals the deviance
        let ll = vec![vec![-1.5, -0.5]; 4];
        let r = dic(&ll, &[-1.5, -0.5]).unwrap();
        assert_abs_diff_eq!(r.p_d, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.dic, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn waic_on_toy_matrix() {
        let ll = vec![vec![-1.0, -2.0], vec![-2.0, -3.0]];
        let r = waic(&ll).unwrap();
        // per-observation lppd: lse(-1,-2)-ln2, lse(-2,-3)-ln2
        let lppd = (log_sum_exp(&[-1.0, -2.0]) - 2.0f64.ln())
            + (log_sum_exp(&[-2.0, -3.0]) - 2.0f64.ln());
        assert_abs_diff_eq!(r.lppd, lppd, epsilon = 1e-12);
        // sample variance of each column is 0.5
        assert_abs_diff_eq!(r.p_waic, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.waic, -2.0 * (lppd - 1.0), epsilon = 1e-12);
    }

    #[test]
    fn neg_log_score_degenerate_matches_plain_loglik() {
        let ll = vec![vec![-1.0, -3.0]; 5];
        assert_abs_diff_eq!(neg_log_score(&ll).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn angular_distance_geodesic() {
        assert_abs_diff_eq!(angular_distance(0.1, -0.1), 0.2, epsilon = 1e-12);
        // across the branch cut the geodesic is short
        assert_abs_diff_eq!(angular_distance(PI - 0.1, -PI + 0.1), 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(angular_distance(0.0, PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(angular_distance(2.0, 2.0 + TAU), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn metrics_agree_for_small_angles() {
        // for nearby points the chord and geodesic metrics almost coincide
        let a = (0.10, 1.0);
        let b = (0.11, 1.2);
        let c = cyl_distance(a, b);
        let e = embed_distance(a, b);
        assert!((c - e).abs() < 1e-4, "cyl {c} embed {e}");
        // but across the cut only the intrinsic metrics stay small
        let p = (PI - 0.05, 0.0);
        let q = (-PI + 0.05, 0.0);
        assert!(cyl_distance(p, q) < 0.11);
        assert!(embed_distance(p, q) < 0.11);
    }

    #[test]
    fn energy_score_zero_for_point_mass_on_observation() {
        let draws = vec![(1.0, 2.0); 10];
        let s = energy_score_with(&draws, (1.0, 2.0), embed_distance).unwrap();
        assert_abs_diff_eq!(s, 0.0, epsilon = 1e-12);
        // a displaced point mass scores its distance
        let s = energy_score_with(&draws, (1.0, 3.0), embed_distance).unwrap();
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn energy_score_prefers_the_true_center() {
        // draws around (0, 1); observation at the center scores better than
        // an observation far away
        let mut rng_state = 123456789u64;
        let mut next = || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (rng_state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let draws: Vec<(f64, f64)> = (0..500).map(|_| (0.3 * next(), 1.0 + 0.3 * next())).collect();
        let near = energy_score_with(&draws, (0.0, 1.0), cyl_distance).unwrap();
        let far = energy_score_with(&draws, (2.0, 3.0), cyl_distance).unwrap();
        assert!(near < far);
    }

    #[test]
    fn mean_scores_validate_shapes() {
        assert!(energy_score(&[], &[]).is_err());
        let draws = vec![vec![(0.0, 1.0); 3]];
        assert!(crps_cyl(&draws, &[(0.0, 1.0)]).is_ok());
        assert!(crps_cyl(&draws, &[(0.0, 1.0), (1.0, 1.0)]).is_err());
    }

    #[test]
    fn folds_partition_and_reproduce() {
        let folds = cv_folds(103, 10, 7).unwrap();
        assert_eq!(folds.len(), 10);
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..103).collect::<Vec<_>>());
        for f in &folds {
            assert!(f.len() == 10 || f.len() == 11);
        }
        assert_eq!(cv_folds(103, 10, 7).unwrap(), folds);
        assert_ne!(cv_folds(103, 10, 8).unwrap(), folds);
        assert!(cv_folds(5, 1, 0).is_err());
        assert!(cv_folds(5, 6, 0).is_err());
    }
}
