//! Triangulated domains and piecewise-linear basis evaluation.

use crate::error::{Error, Result};
use std::io::{BufRead, Write};
use std::path::Path;

const AREA_EPS: f64 = 1e-12;

/// Triangulation of the (rescaled) spatial domain.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
}

/// One row of the n x M basis matrix: at most three (node, weight) pairs.
#[derive(Debug, Clone)]
pub struct BasisRow {
    pub entries: Vec<(usize, f64)>,
    /// true when the site was snapped to the nearest hull point
    pub snapped: bool,
}

/// Sparse n x M basis matrix mapping field weights to site values.
#[derive(Debug, Clone)]
pub struct BasisMatrix {
    pub rows: Vec<BasisRow>,
    pub n_nodes: usize,
}

impl BasisMatrix {
    /// psi * gamma
    pub fn apply(&self, gamma: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.entries.iter().map(|&(m, w)| w * gamma[m]).sum())
            .collect()
    }

    /// psi^T r
    pub fn apply_transpose(&self, r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_nodes];
        for (i, row) in self.rows.iter().enumerate() {
            for &(m, w) in &row.entries {
                out[m] += w * r[i];
            }
        }
        out
    }

    /// psi^T psi as triplets (for the gamma full-conditional precision).
    pub fn gram_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut trip = Vec::new();
        for row in &self.rows {
            for &(a, wa) in &row.entries {
                for &(b, wb) in &row.entries {
                    trip.push((a, b, wa * wb));
                }
            }
        }
        trip
    }
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Structured triangular grid over [-padding, 1+padding]^2 with
    /// (resolution+1)^2 nodes; each grid cell split into two triangles.
    pub fn regular(resolution: usize, padding: f64) -> Result<Mesh> {
        if resolution < 2 {
            return Err(Error::InvalidArgument(format!(
                "mesh resolution must be >= 2, got {resolution}"
            )));
        }
        if padding < 0.0 {
            return Err(Error::InvalidArgument("padding must be >= 0".into()));
        }
        let lo = -padding;
        let hi = 1.0 + padding;
        let n1 = resolution + 1;
        let h = (hi - lo) / resolution as f64;
        let mut nodes = Vec::with_capacity(n1 * n1);
        for j in 0..n1 {
            for i in 0..n1 {
                nodes.push([lo + i as f64 * h, lo + j as f64 * h]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * resolution * resolution);
        let at = |i: usize, j: usize| j * n1 + i;
        for j in 0..resolution {
            for i in 0..resolution {
                triangles.push([at(i, j), at(i + 1, j), at(i, j + 1)]);
                triangles.push([at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)]);
            }
        }
        let mesh = Mesh { nodes, triangles };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Reorient clockwise triangles, then reject degenerate ones.
    pub fn validate(&self) -> Result<()> {
        for (t, tri) in self.triangles.iter().enumerate() {
            let [a, b, c] = *tri;
            if a == b || b == c || a == c {
                return Err(Error::DegenerateTriangle { tri: t, area: 0.0 });
            }
            let area = signed_area(self.nodes[a], self.nodes[b], self.nodes[c]).abs();
            if area < AREA_EPS {
                return Err(Error::DegenerateTriangle { tri: t, area });
            }
        }
        for n in &self.nodes {
            if !n[0].is_finite() || !n[1].is_finite() {
                return Err(Error::MeshParse("non-finite node coordinate".into()));
            }
        }
        Ok(())
    }

    fn oriented(mut self) -> Self {
        for tri in self.triangles.iter_mut() {
            if signed_area(self.nodes[tri[0]], self.nodes[tri[1]], self.nodes[tri[2]]) < 0.0 {
                tri.swap(1, 2);
            }
        }
        self
    }

    /// Parse the text interchange format: header `M T`, M node lines `x y`,
    /// T triangle lines `i j k` with 0-based indices.
    pub fn load(path: &Path) -> Result<Mesh> {
        let file = std::fs::File::open(path)?;
        let mut lines = std::io::BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::MeshParse("empty mesh file".into()))??;
        let mut hp = header.split_whitespace();
        let m: usize = hp
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::MeshParse("bad node count in header".into()))?;
        let t: usize = hp
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::MeshParse("bad triangle count in header".into()))?;
        let mut nodes = Vec::with_capacity(m);
        for k in 0..m {
            let line = lines
                .next()
                .ok_or_else(|| Error::MeshParse(format!("missing node line {k}")))??;
            let mut it = line.split_whitespace();
            let x: f64 = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::MeshParse(format!("bad x on node line {k}")))?;
            let y: f64 = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::MeshParse(format!("bad y on node line {k}")))?;
            nodes.push([x, y]);
        }
        let mut triangles = Vec::with_capacity(t);
        for k in 0..t {
            let line = lines
                .next()
                .ok_or_else(|| Error::MeshParse(format!("missing triangle line {k}")))??;
            let idx: Vec<usize> = line
                .split_whitespace()
                .map(|s| s.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::MeshParse(format!("bad index on triangle line {k}")))?;
            if idx.len() != 3 {
                return Err(Error::MeshParse(format!(
                    "triangle line {k} needs 3 indices"
                )));
            }
            if idx.iter().any(|&i| i >= m) {
                return Err(Error::MeshParse(format!(
                    "triangle line {k} references node >= {m}"
                )));
            }
            triangles.push([idx[0], idx[1], idx[2]]);
        }
        let mesh = Mesh { nodes, triangles }.oriented();
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "{} {}", self.nodes.len(), self.triangles.len())?;
        for n in &self.nodes {
            writeln!(f, "{} {}", n[0], n[1])?;
        }
        for t in &self.triangles {
            writeln!(f, "{} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }

    /// Barycentric weights of `site` inside triangle `t`, if all weights are
    /// within [-eps, 1+eps].
    fn barycentric(&self, t: usize, site: [f64; 2]) -> Option<[f64; 3]> {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
        let l1 = ((pb[0] - site[0]) * (pc[1] - site[1])
            - (pc[0] - site[0]) * (pb[1] - site[1]))
            / det;
        let l2 = ((pc[0] - site[0]) * (pa[1] - site[1])
            - (pa[0] - site[0]) * (pc[1] - site[1]))
            / det;
        let l3 = 1.0 - l1 - l2;
        let eps = 1e-12;
        if l1 >= -eps && l2 >= -eps && l3 >= -eps {
            Some([l1.clamp(0.0, 1.0), l2.clamp(0.0, 1.0), l3.clamp(0.0, 1.0)])
        } else {
            None
        }
    }

    fn locate(&self, site: [f64; 2]) -> Option<(usize, [f64; 3])> {
        // brute-force scan; meshes at desk scale are small enough
        for t in 0..self.triangles.len() {
            if let Some(w) = self.barycentric(t, site) {
                return Some((t, w));
            }
        }
        None
    }

    /// Basis matrix rows for `sites`; sites outside the hull are an error
    /// unless `snap_outside` is set, in which case they are projected to the
    /// nearest node and flagged.
    pub fn basis_matrix(&self, sites: &[[f64; 2]], snap_outside: bool) -> Result<BasisMatrix> {
        let mut rows = Vec::with_capacity(sites.len());
        for (i, &site) in sites.iter().enumerate() {
            match self.locate(site) {
                Some((t, w)) => {
                    let [a, b, c] = self.triangles[t];
                    // renormalize so each row sums to exactly 1
                    let s = w[0] + w[1] + w[2];
                    rows.push(BasisRow {
                        entries: vec![(a, w[0] / s), (b, w[1] / s), (c, w[2] / s)],
                        snapped: false,
                    });
                }
                None if snap_outside => {
                    let (best, _) = self
                        .nodes
                        .iter()
                        .enumerate()
                        .map(|(m, n)| {
                            let d = (n[0] - site[0]).powi(2) + (n[1] - site[1]).powi(2);
                            (m, d)
                        })
                        .min_by(|a, b| a.1.total_cmp(&b.1))
                        .unwrap();
                    rows.push(BasisRow {
                        entries: vec![(best, 1.0)],
                        snapped: true,
                    });
                }
                None => {
                    return Err(Error::SiteOutsideHull {
                        index: i,
                        x: site[0],
                        y: site[1],
                    })
                }
            }
        }
        Ok(BasisMatrix {
            rows,
            n_nodes: self.nodes.len(),
        })
    }
}
