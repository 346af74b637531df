//! Posterior draw storage, summaries, and CSV serialization.

use crate::error::{Error, Result};
use std::io::Write;
use std::path::Path;

/// Retained draws from one chain: named scalar traces plus optional vector
/// traces (latent field draws, per-observation log-likelihood rows).
#[derive(Debug, Clone, Default)]
pub struct ChainOutput {
    pub scalar_names: Vec<String>,
    /// draws x scalars
    pub scalars: Vec<Vec<f64>>,
    /// draws x field-dimension latent spatial effect draws
    pub gamma: Vec<Vec<f64>>,
    /// draws x observations pointwise log-likelihood
    pub loglik: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q975: f64,
}

pub fn summarize(draws: &[f64]) -> Summary {
    assert!(!draws.is_empty());
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let var = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    let mut sorted = draws.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    Summary {
        mean,
        sd: var.sqrt(),
        q025: quantile_sorted(&sorted, 0.025),
        q975: quantile_sorted(&sorted, 0.975),
    }
}

/// Linear-interpolated quantile of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

impl ChainOutput {
    pub fn n_draws(&self) -> usize {
        self.scalars.len()
    }

    pub fn scalar_index(&self, name: &str) -> Result<usize> {
        self.scalar_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::InvalidArgument(format!("no scalar trace `{name}`")))
    }

    pub fn scalar_trace(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self.scalar_index(name)?;
        Ok(self.scalars.iter().map(|row| row[idx]).collect())
    }

    pub fn scalar_summary(&self, name: &str) -> Result<Summary> {
        Ok(summarize(&self.scalar_trace(name)?))
    }

    pub fn scalar_mean(&self, name: &str) -> Result<f64> {
        Ok(self.scalar_summary(name)?.mean)
    }

    /// Columnwise posterior mean of the latent field draws.
    pub fn gamma_mean(&self) -> Vec<f64> {
        if self.gamma.is_empty() {
            return Vec::new();
        }
        let m = self.gamma[0].len();
        let mut out = vec![0.0; m];
        for row in &self.gamma {
            for (o, &v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        let n = self.gamma.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
        out
    }

    /// Write the scalar traces as CSV (one header row, one row per draw).
    pub fn write_scalars_csv(&self, path: &Path) -> Result<()> {
        write_matrix_csv(path, &self.scalar_names, &self.scalars)
    }

    /// Write a vector trace (gamma or loglik) as CSV with generated column
    /// names `prefix_0`, `prefix_1`, ...
    pub fn write_vector_csv(rows: &[Vec<f64>], prefix: &str, path: &Path) -> Result<()> {
        let m = rows.first().map_or(0, Vec::len);
        let names: Vec<String> = (0..m).map(|j| format!("{prefix}_{j}")).collect();
        write_matrix_csv(path, &names, rows)
    }

    /// Write one summary row per scalar.
    pub fn write_summary_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "parameter,mean,sd,q025,q975")?;
        for name in &self.scalar_names {
            let s = self.scalar_summary(name)?;
            writeln!(
                f,
                "{name},{},{},{},{}",
                fmt_f64(s.mean),
                fmt_f64(s.sd),
                fmt_f64(s.q025),
                fmt_f64(s.q975)
            )?;
        }
        Ok(())
    }
}

/// Shortest round-trippable decimal form, so reruns are byte-identical.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn write_matrix_csv(path: &Path, names: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{}", names.join(","))?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        writeln!(f, "{}", line.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn toy_chain() -> ChainOutput {
        ChainOutput {
            scalar_names: vec!["a".into(), "b".into()],
            scalars: (0..101)
                .map(|i| vec![i as f64, 2.0 * i as f64])
                .collect(),
            gamma: vec![vec![1.0, 3.0], vec![3.0, 5.0]],
            loglik: vec![vec![-1.0, -2.0], vec![-1.5, -2.5]],
        }
    }

    #[test]
    fn summaries() {
        let c = toy_chain();
        let s = c.scalar_summary("a").unwrap();
        assert_abs_diff_eq!(s.mean, 50.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.q025, 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.q975, 97.5, epsilon = 1e-12);
        let sb = c.scalar_summary("b").unwrap();
        assert_abs_diff_eq!(sb.mean, 100.0, epsilon = 1e-12);
        assert!(c.scalar_summary("nope").is_err());
        assert_eq!(c.gamma_mean(), vec![2.0, 4.0]);
    }

    #[test]
    fn quantile_interpolation() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_abs_diff_eq!(quantile_sorted(&xs, 0.5), 2.5);
        assert_abs_diff_eq!(quantile_sorted(&xs, 0.0), 1.0);
        assert_abs_diff_eq!(quantile_sorted(&xs, 1.0), 4.0);
        assert_abs_diff_eq!(quantile_sorted(&[7.0], 0.3), 7.0);
    }

    #[test]
    fn csv_round_trip_is_byte_identical() {
        let c = toy_chain();
        let dir = std::env::temp_dir().join("pwc_chain_test");
        std::fs::create_dir_all(&dir).unwrap();
        let p1 = dir.join("s1.csv");
        let p2 = dir.join("s2.csv");
        c.write_scalars_csv(&p1).unwrap();
        c.write_scalars_csv(&p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        let text = std::fs::read_to_string(&p1).unwrap();
        assert!(text.starts_with("a,b\n0,0\n1,2\n"));
        let pg = dir.join("g.csv");
        ChainOutput::write_vector_csv(&c.gamma, "gamma", &pg).unwrap();
        let text = std::fs::read_to_string(&pg).unwrap();
        assert!(text.starts_with("gamma_0,gamma_1\n1,3\n"));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn float_formatting_round_trips() {
        for &x in &[0.1, 1.0 / 3.0, 1e-300, -2.5e17, std::f64::consts::PI] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }
}
