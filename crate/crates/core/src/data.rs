//! Observational data import.
//!
//! Reads station records from CSV, validates responses, converts angles to
//! radians on the principal branch, rescales coordinates to the unit square
//! (preserving aspect ratio, with the transform stored for inversion), and
//! standardizes covariates with the constants kept for reuse on new data.

use crate::density::wrap_angle;
use crate::error::{Error, Result};
use crate::pipeline::Dataset;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Column names used when reading a station CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMap {
    pub x: String,
    pub y: String,
    pub direction: String,
    pub speed: String,
    /// Covariate columns for the margin means.
    pub margin_covariates: Vec<String>,
    /// Covariate columns for the association predictor.
    pub assoc_covariates: Vec<String>,
    /// Directions are degrees rather than radians.
    pub degrees: bool,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            x: "x".into(),
            y: "y".into(),
            direction: "direction".into(),
            speed: "speed".into(),
            margin_covariates: Vec::new(),
            assoc_covariates: Vec::new(),
            degrees: false,
        }
    }
}

/// Invertible affine map taking raw coordinates into [0, 1]^2 while
/// preserving the aspect ratio: both axes are scaled by the same factor
/// (the larger raw extent maps to unit length).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CoordTransform {
    pub x0: f64,
    pub y0: f64,
    pub scale: f64,
}

impl CoordTransform {
    pub fn fit(points: &[[f64; 2]]) -> Result<CoordTransform> {
        if points.is_empty() {
            return Err(Error::Data("no points to rescale".into()));
        }
        let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in points {
            xmin = xmin.min(p[0]);
            xmax = xmax.max(p[0]);
            ymin = ymin.min(p[1]);
            ymax = ymax.max(p[1]);
        }
        let extent = (xmax - xmin).max(ymax - ymin);
        if !(extent > 0.0) || !extent.is_finite() {
            return Err(Error::Data("degenerate coordinate extent".into()));
        }
        Ok(CoordTransform {
            x0: xmin,
            y0: ymin,
            scale: extent,
        })
    }

    pub fn forward(&self, p: [f64; 2]) -> [f64; 2] {
        [(p[0] - self.x0) / self.scale, (p[1] - self.y0) / self.scale]
    }

    pub fn inverse(&self, p: [f64; 2]) -> [f64; 2] {
        [p[0] * self.scale + self.x0, p[1] * self.scale + self.y0]
    }
}

/// Per-column standardization constants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Standardizer {
        let p = rows.first().map_or(0, Vec::len);
        let n = rows.len() as f64;
        let mut means = vec![0.0; p];
        for row in rows {
            for (m, &v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n.max(1.0));
        let mut sds = vec![0.0; p];
        for row in rows {
            for j in 0..p {
                let d = row[j] - means[j];
                sds[j] += d * d;
            }
        }
        for s in sds.iter_mut() {
            *s = (*s / (n - 1.0).max(1.0)).sqrt();
            if *s < 1e-12 {
                // constant column: leave it centered but unscaled
                *s = 1.0;
            }
        }
        Standardizer { means, sds }
    }

    pub fn apply(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|row| {
                row.iter()
                    .zip(self.means.iter().zip(&self.sds))
                    .map(|(&v, (&m, &s))| (v - m) / s)
                    .collect()
            })
            .collect()
    }
}

/// A loaded station dataset with its preprocessing constants.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub dataset: Dataset,
    pub transform: CoordTransform,
    pub margin_standardizer: Standardizer,
    pub assoc_standardizer: Standardizer,
}

/// Read a station CSV. Rows with missing fields, non-finite values, or a
/// non-positive speed are rejected with their (1-based, excluding header)
/// row number.
pub fn load_station_csv(path: &Path, cols: &ColumnMap) -> Result<LoadedData> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Data(format!("bad header: {e}")))?
        .clone();
    let col_idx = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("missing column `{name}`")))
    };
    let ix = col_idx(&cols.x)?;
    let iy = col_idx(&cols.y)?;
    let id = col_idx(&cols.direction)?;
    let is = col_idx(&cols.speed)?;
    let im: Vec<usize> = cols
        .margin_covariates
        .iter()
        .map(|c| col_idx(c))
        .collect::<Result<_>>()?;
    let ia: Vec<usize> = cols
        .assoc_covariates
        .iter()
        .map(|c| col_idx(c))
        .collect::<Result<_>>()?;

    let mut raw_sites = Vec::new();
    let mut phi = Vec::new();
    let mut speed = Vec::new();
    let mut zm_raw: Vec<Vec<f64>> = Vec::new();
    let mut za_raw: Vec<Vec<f64>> = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let row_id = row_no + 1;
        let record = record.map_err(|e| Error::Data(format!("row {row_id}: {e}")))?;
        let field = |i: usize| -> Result<f64> {
            let raw = record
                .get(i)
                .ok_or_else(|| Error::Data(format!("row {row_id}: missing field")))?;
            let trimmed = raw.trim();
            if trimmed.is_empty() {
                return Err(Error::Data(format!(
                    "row {row_id}: empty value in `{}`",
                    &headers[i]
                )));
            }
            trimmed.parse::<f64>().map_err(|_| {
                Error::Data(format!(
                    "row {row_id}: cannot parse `{trimmed}` in `{}`",
                    &headers[i]
                ))
            })
        };
        let x = field(ix)?;
        let y = field(iy)?;
        let mut d = field(id)?;
        let s = field(is)?;
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Data(format!(
                "row {row_id}: speed must be positive, got {s}"
            )));
        }
        if ![x, y, d].iter().all(|v| v.is_finite()) {
            return Err(Error::Data(format!("row {row_id}: non-finite value")));
        }
        if cols.degrees {
            d = d.to_radians();
        }
        raw_sites.push([x, y]);
        phi.push(wrap_angle(d));
        speed.push(s);
        zm_raw.push(im.iter().map(|&i| field(i)).collect::<Result<_>>()?);
        za_raw.push(ia.iter().map(|&i| field(i)).collect::<Result<_>>()?);
    }
    if raw_sites.is_empty() {
        return Err(Error::Data("no data rows".into()));
    }

    let transform = CoordTransform::fit(&raw_sites)?;
    let sites: Vec<[f64; 2]> = raw_sites.iter().map(|&p| transform.forward(p)).collect();
    let margin_standardizer = Standardizer::fit(&zm_raw);
    let assoc_standardizer = Standardizer::fit(&za_raw);
    let z_margin = margin_standardizer.apply(&zm_raw);
    let z_assoc = assoc_standardizer.apply(&za_raw);

    let dataset = Dataset {
        sites,
        phi,
        y: speed,
        z_ang: z_margin.clone(),
        z_lin: z_margin,
        z_rho: z_assoc,
    };
    dataset.validate()?;
    Ok(LoadedData {
        dataset,
        transform,
        margin_standardizer,
        assoc_standardizer,
    })
}
