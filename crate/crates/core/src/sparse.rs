//! Sparse symmetric matrices and a simplicial LDL^T factorization.
//!
//! The factorization is exact (non-iterative), uses a reverse Cuthill–McKee
//! fill-reducing ordering, and separates the symbolic analysis from the
//! numeric phase so that repeated factorizations with an unchanged sparsity
//! pattern (one per MCMC proposal) skip the analysis.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Symmetric sparse matrix in CSC layout, both triangles stored, row indices
/// sorted within each column.
#[derive(Debug, Clone)]
pub struct SymSparse {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SymSparse {
    /// Build from (row, col, value) triplets; duplicates are summed.
    /// Only entries you pass are stored; symmetry is the caller's contract.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut per_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            debug_assert!(i < n && j < n);
            per_col[j].push((i, v));
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for col in per_col.iter_mut() {
            col.sort_unstable_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for &(i, v) in col.iter() {
                if last == Some(i) {
                    *values.last_mut().unwrap() += v;
                } else {
                    row_idx.push(i);
                    values.push(v);
                    last = Some(i);
                }
            }
            col_ptr.push(row_idx.len());
        }
        SymSparse { n, col_ptr, row_idx, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let lo = self.col_ptr[j];
        let hi = self.col_ptr[j + 1];
        match self.row_idx[lo..hi].binary_search(&i) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    /// Iterate (row, col, value) over stored entries.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |j| {
            (self.col_ptr[j]..self.col_ptr[j + 1])
                .map(move |p| (self.row_idx[p], j, self.values[p]))
        })
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, j, v) in self.iter() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            let xj = x[j];
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                y[self.row_idx[p]] += self.values[p] * xj;
            }
        }
        y
    }

    /// x^T A x.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for j in 0..self.n {
            let xj = x[j];
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                s += x[self.row_idx[p]] * self.values[p] * xj;
            }
        }
        s
    }

    /// Entrywise sum of two matrices (patterns may differ).
    pub fn add(&self, other: &SymSparse) -> SymSparse {
        assert_eq!(self.n, other.n);
        let trip: Vec<(usize, usize, f64)> =
            self.iter().chain(other.iter()).collect();
        SymSparse::from_triplets(self.n, &trip)
    }

    /// Maximum |A - A^T| entry; used to assert symmetrization quality.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, j, v) in self.iter() {
            worst = worst.max((v - self.get(j, i)).abs());
        }
        worst
    }

    /// Replace A by (A + A^T)/2 exactly.
    pub fn symmetrize(&self) -> SymSparse {
        let trip: Vec<(usize, usize, f64)> = self
            .iter()
            .flat_map(|(i, j, v)| [(i, j, 0.5 * v), (j, i, 0.5 * v)])
            .collect();
        SymSparse::from_triplets(self.n, &trip)
    }
}

/// Reverse Cuthill–McKee ordering of the adjacency structure.
fn rcm_ordering(a: &SymSparse) -> Vec<usize> {
    let n = a.n;
    let degree: Vec<usize> = (0..n)
        .map(|j| a.col_ptr[j + 1] - a.col_ptr[j])
        .collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = std::collections::VecDeque::new();
    while order.len() < n {
        // start each component from a minimum-degree node
        let start = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| degree[i])
            .unwrap();
        visited[start] = true;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut nbrs: Vec<usize> = (a.col_ptr[u]..a.col_ptr[u + 1])
                .map(|p| a.row_idx[p])
                .filter(|&v| !visited[v])
                .collect();
            nbrs.sort_unstable_by_key(|&v| degree[v]);
            for v in nbrs {
                if !visited[v] {
                    visited[v] = true;
                    queue.push_back(v);
                }
            }
        }
    }
    order.reverse();
    order
}

/// LDL^T factor of P A P^T with a cached symbolic analysis.
pub struct LdlFactor {
    n: usize,
    /// perm[k] = original index appearing at permuted position k
    perm: Vec<usize>,
    // column pointers / pattern of L (permuted ordering)
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
    parent: Vec<isize>,
    // permuted upper-triangular view of A used during numeric refactorization
    up: Vec<usize>,
    ui: Vec<usize>,
    /// maps entries of the permuted upper view back to `values` positions of A
    usrc: Vec<usize>,
}

impl LdlFactor {
    /// Symbolic analysis + first numeric factorization.
    pub fn new(a: &SymSparse) -> Result<Self> {
        let n = a.n;
        let perm = rcm_ordering(a);
        let mut iperm = vec![0usize; n];
        for (k, &orig) in perm.iter().enumerate() {
            iperm[orig] = k;
        }
        // permuted upper triangle in CSC: entry (pi, pj) with pi <= pj
        let mut cols: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for j in 0..n {
            for p in a.col_ptr[j]..a.col_ptr[j + 1] {
                let i = a.row_idx[p];
                let (pi, pj) = (iperm[i], iperm[j]);
                if pi <= pj {
                    cols[pj].push((pi, p));
                }
            }
        }
        let mut up = Vec::with_capacity(n + 1);
        let mut ui = Vec::new();
        let mut usrc = Vec::new();
        up.push(0);
        for col in cols.iter_mut() {
            col.sort_unstable_by_key(|e| e.0);
            for &(pi, src) in col.iter() {
                ui.push(pi);
                usrc.push(src);
            }
            up.push(ui.len());
        }
        // symbolic: elimination tree + column counts (Davis' LDL)
        let mut parent = vec![-1isize; n];
        let mut lnz = vec![0usize; n];
        let mut flag = vec![usize::MAX; n];
        for k in 0..n {
            flag[k] = k;
            for p in up[k]..up[k + 1] {
                let mut i = ui[p];
                while i < k && flag[i] != k {
                    if parent[i] == -1 {
                        parent[i] = k as isize;
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i] as usize;
                }
            }
        }
        let mut lp = Vec::with_capacity(n + 1);
        lp.push(0);
        for k in 0..n {
            lp.push(lp[k] + lnz[k]);
        }
        let total = lp[n];
        let mut f = LdlFactor {
            n,
            perm,
            lp,
            li: vec![0; total],
            lx: vec![0.0; total],
            d: vec![0.0; n],
            parent,
            up,
            ui,
            usrc,
        };
        f.refactor(a)?;
        Ok(f)
    }

    /// Numeric factorization assuming the sparsity pattern of `a` is the one
    /// this factor was built for.
    pub fn refactor(&mut self, a: &SymSparse) -> Result<()> {
        let n = self.n;
        let mut y = vec![0.0f64; n];
        let mut pattern = vec![0usize; n];
        let mut flag = vec![usize::MAX; n];
        let mut lnz_cur = vec![0usize; n];
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            self.d[k] = 0.0;
            for p in self.up[k]..self.up[k + 1] {
                let i = self.ui[p];
                let v = a.values[self.usrc[p]];
                if i == k {
                    self.d[k] += v;
                } else {
                    y[i] += v;
                    // walk up the etree recording the pattern of row k
                    let mut len = 0usize;
                    let mut ii = i;
                    while flag[ii] != k {
                        pattern[len] = ii;
                        len += 1;
                        flag[ii] = k;
                        ii = self.parent[ii] as usize;
                    }
                    for l in (0..len).rev() {
                        top -= 1;
                        pattern[top] = pattern[l];
                    }
                }
            }
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = 0.0;
                let p2 = self.lp[i] + lnz_cur[i];
                for p in self.lp[i]..p2 {
                    y[self.li[p]] -= self.lx[p] * yi;
                }
                let lki = yi / self.d[i];
                self.d[k] -= lki * yi;
                self.li[p2] = k;
                self.lx[p2] = lki;
                lnz_cur[i] += 1;
            }
            if self.d[k] <= 0.0 || !self.d[k].is_finite() {
                return Err(Error::NotPositiveDefinite { col: k, pivot: self.d[k] });
            }
        }
        Ok(())
    }

    pub fn log_det(&self) -> f64 {
        self.d.iter().map(|&d| d.ln()).sum()
    }

    /// Solve A x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut w: Vec<f64> = (0..n).map(|k| b[self.perm[k]]).collect();
        // L w = b
        for i in 0..n {
            let wi = w[i];
            for p in self.lp[i]..self.lp[i + 1] {
                w[self.li[p]] -= self.lx[p] * wi;
            }
        }
        for i in 0..n {
            w[i] /= self.d[i];
        }
        // L^T w = w
        for i in (0..n).rev() {
            let mut wi = w[i];
            for p in self.lp[i]..self.lp[i + 1] {
                wi -= self.lx[p] * w[self.li[p]];
            }
            w[i] = wi;
        }
        let mut x = vec![0.0; n];
        for k in 0..n {
            x[self.perm[k]] = w[k];
        }
        x
    }

    /// Transform i.i.d. standard normals z into a draw with covariance A^{-1}:
    /// solve L^T w = D^{-1/2} z and undo the permutation.
    pub fn sample_from_precision(&self, z: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut w: Vec<f64> = (0..n).map(|i| z[i] / self.d[i].sqrt()).collect();
        for i in (0..n).rev() {
            let mut wi = w[i];
            for p in self.lp[i]..self.lp[i + 1] {
                wi -= self.lx[p] * w[self.li[p]];
            }
            w[i] = wi;
        }
        let mut x = vec![0.0; n];
        for k in 0..n {
            x[self.perm[k]] = w[k];
        }
        x
    }
}
