//! Compressed sparse row matrices and the linear solvers used for the
//! global system: banded LU after reverse Cuthill–McKee reordering, and
//! Jacobi-preconditioned BiCGSTAB and restarted GMRES.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use crate::error::{Result, SwgError};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from (row, col, value) triplets. Duplicates are summed
    /// in insertion order, so the result is bit-reproducible.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut count = vec![0usize; nrows + 1];
        for &(r, _, _) in triplets {
            count[r + 1] += 1;
        }
        for r in 0..nrows {
            count[r + 1] += count[r];
        }
        let mut slot = count.clone();
        let mut entries = vec![(0usize, 0.0f64); triplets.len()];
        for &(r, c, v) in triplets {
            entries[slot[r]] = (c, v);
            slot[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for r in 0..nrows {
            let row = &mut entries[count[r]..count[r + 1]];
            row.sort_by_key(|e| e.0);
            for &(c, v) in row.iter() {
                if col_idx.len() > *row_ptr.last().unwrap() && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, n, &t)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.nrows) {
            *yr = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows).map(|r| self.get(r, r)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                t.push((c, r, v));
            }
        }
        Self::from_triplets(self.ncols, self.nrows, &t)
    }

    /// max |a_ij − a_ji| relative to max |a_ij|.
    pub fn asymmetry(&self) -> f64 {
        let mut diff: f64 = 0.0;
        let mut big: f64 = 0.0;
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                diff = diff.max((v - self.get(c, r)).abs());
                big = big.max(v.abs());
            }
        }
        if big == 0.0 {
            0.0
        } else {
            diff / big
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMethod {
    /// Direct LU for moderate sizes, BiCGSTAB above; falls back to GMRES
    /// and then LU when an iterative method fails.
    Auto,
    DirectLu,
    Bicgstab,
    Gmres,
}

impl FromStr for SolverMethod {
    type Err = SwgError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auto" => Ok(SolverMethod::Auto),
            "direct_lu" | "direct" | "lu" => Ok(SolverMethod::DirectLu),
            "bicgstab" => Ok(SolverMethod::Bicgstab),
            "gmres" => Ok(SolverMethod::Gmres),
            other => Err(SwgError::Parse(format!("unknown solver `{other}`"))),
        }
    }
}

impl fmt::Display for SolverMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverMethod::Auto => "auto",
            SolverMethod::DirectLu => "direct_lu",
            SolverMethod::Bicgstab => "bicgstab",
            SolverMethod::Gmres => "gmres",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub method: SolverMethod,
    pub tol: f64,
    pub maxit: usize,
    pub restart: usize,
    /// `Auto` uses the direct solver up to this many unknowns.
    pub direct_limit: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            method: SolverMethod::Auto,
            tol: 1e-12,
            maxit: 20_000,
            restart: 100,
            direct_limit: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub method: SolverMethod,
    pub iterations: usize,
    /// ‖b − Ax‖ / ‖b‖ of the returned solution.
    pub residual: f64,
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let mut ax = vec![0.0; a.nrows];
    a.mul_vec(x, &mut ax);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
    let nb = norm(b);
    if nb == 0.0 {
        norm(&r)
    } else {
        norm(&r) / nb
    }
}

/// Solves `a x = b` with the requested method.
pub fn solve(a: &CsrMatrix, b: &[f64], opts: &SolveOptions) -> Result<(Vec<f64>, SolveStats)> {
    if a.nrows != a.ncols {
        return Err(SwgError::InvalidArgument("matrix is not square".into()));
    }
    if b.len() != a.nrows {
        return Err(SwgError::SizeMismatch {
            expected: a.nrows,
            actual: b.len(),
        });
    }
    if !(opts.tol > 0.0) {
        return Err(SwgError::InvalidArgument("solver tolerance must be positive".into()));
    }
    let n = a.nrows;
    if n == 0 {
        return Ok((
            Vec::new(),
            SolveStats {
                method: opts.method,
                iterations: 0,
                residual: 0.0,
            },
        ));
    }
    match opts.method {
        SolverMethod::DirectLu => direct_lu(a, b),
        SolverMethod::Bicgstab => bicgstab(a, b, opts),
        SolverMethod::Gmres => gmres(a, b, opts),
        SolverMethod::Auto => {
            if n <= opts.direct_limit {
                return direct_lu(a, b);
            }
            bicgstab(a, b, opts)
                .or_else(|_| gmres(a, b, opts))
                .or_else(|_| direct_lu(a, b))
        }
    }
}

/// Reverse Cuthill–McKee ordering of the symmetrized pattern; `perm[k]` is
/// the original index placed at position k.
pub fn rcm_ordering(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for r in 0..n {
        for (c, _) in a.row(r) {
            if c != r {
                adj[r].push(c);
                adj[c].push(r);
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (degree[v], v));
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        let root = pseudo_peripheral(start, &adj);
        let mut queue = VecDeque::new();
        visited[root] = true;
        queue.push_back(root);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(root: usize, adj: &[Vec<usize>]) -> (usize, usize) {
    // returns (eccentricity, a node in the last level with minimum degree)
    let mut level = vec![usize::MAX; adj.len()];
    level[root] = 0;
    let mut queue = VecDeque::from([root]);
    let mut last = root;
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if level[w] == usize::MAX {
                level[w] = level[v] + 1;
                queue.push_back(w);
                if level[w] > level[last] || (level[w] == level[last] && adj[w].len() < adj[last].len()) {
                    last = w;
                }
            }
        }
    }
    (level[last], last)
}

fn pseudo_peripheral(start: usize, adj: &[Vec<usize>]) -> usize {
    let mut root = start;
    let (mut ecc, mut far) = bfs_levels(root, adj);
    for _ in 0..8 {
        let (e2, f2) = bfs_levels(far, adj);
        if e2 <= ecc {
            break;
        }
        root = far;
        ecc = e2;
        far = f2;
    }
    root
}

/// LU factorization with partial pivoting of a banded matrix.
struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    /// Row i holds columns i−kl ..= i+kl+ku.
    band: Vec<f64>,
    lower: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandLu {
    fn at(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    fn factor(n: usize, kl: usize, ku: usize, entries: impl Iterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let width = 2 * kl + ku + 1;
        let mut lu = BandLu {
            n,
            kl,
            ku,
            width,
            band: vec![0.0; n * width],
            lower: vec![0.0; n * kl.max(1)],
            pivots: vec![0; n],
        };
        for (i, j, v) in entries {
            let k = lu.at(i, j);
            lu.band[k] += v;
        }
        let scale = lu.band.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = lu.band[lu.at(k, k)].abs();
            for r in k + 1..=last_row {
                let v = lu.band[lu.at(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best <= scale * 1e-300 || best == 0.0 {
                return Err(SwgError::SingularMatrix { row: k, pivot: best });
            }
            lu.pivots[k] = p;
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (lu.at(k, j), lu.at(p, j));
                    lu.band.swap(a, b);
                }
            }
            let pivot = lu.band[lu.at(k, k)];
            for r in k + 1..=last_row {
                let idx = lu.at(r, k);
                let l = lu.band[idx] / pivot;
                lu.band[idx] = 0.0;
                lu.lower[k * kl.max(1) + (r - k - 1)] = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        let src = lu.band[lu.at(k, j)];
                        let dst = lu.at(r, j);
                        lu.band[dst] -= l * src;
                    }
                }
            }
        }
        Ok(lu)
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for r in k + 1..=(k + self.kl).min(n - 1) {
                b[r] -= self.lower[k * self.kl.max(1) + (r - k - 1)] * bk;
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + self.kl + self.ku).min(n - 1);
            let mut s = b[k];
            for j in k + 1..=last_col {
                s -= self.band[self.at(k, j)] * b[j];
            }
            b[k] = s / self.band[self.at(k, k)];
        }
    }
}

pub fn direct_lu(a: &CsrMatrix, b: &[f64]) -> Result<(Vec<f64>, SolveStats)> {
    let n = a.nrows;
    let perm = rcm_ordering(a);
    let mut inv = vec![0usize; n];
    for (k, &v) in perm.iter().enumerate() {
        inv[v] = k;
    }
    let (mut kl, mut ku) = (0usize, 0usize);
    for r in 0..n {
        for (c, _) in a.row(r) {
            let (i, j) = (inv[r], inv[c]);
            if i > j {
                kl = kl.max(i - j);
            } else {
                ku = ku.max(j - i);
            }
        }
    }
    let entries = (0..n).flat_map(|r| a.row(r).map(move |(c, v)| (r, c, v)));
    let lu = BandLu::factor(n, kl, ku, entries.map(|(r, c, v)| (inv[r], inv[c], v)))?;
    let mut y: Vec<f64> = perm.iter().map(|&v| b[v]).collect();
    lu.solve(&mut y);
    let mut x = vec![0.0; n];
    for (k, &v) in perm.iter().enumerate() {
        x[v] = y[k];
    }
    let residual = relative_residual(a, &x, b);
    Ok((
        x,
        SolveStats {
            method: SolverMethod::DirectLu,
            iterations: 1,
            residual,
        },
    ))
}

fn jacobi(a: &CsrMatrix) -> Vec<f64> {
    a.diagonal()
        .into_iter()
        .map(|d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect()
}

/// Right-preconditioned BiCGSTAB with a Jacobi preconditioner.
pub fn bicgstab(a: &CsrMatrix, b: &[f64], opts: &SolveOptions) -> Result<(Vec<f64>, SolveStats)> {
    let n = a.nrows;
    let minv = jacobi(a);
    let nb = norm(b);
    let mut x = vec![0.0; n];
    if nb == 0.0 {
        return Ok((
            x,
            SolveStats {
                method: SolverMethod::Bicgstab,
                iterations: 0,
                residual: 0.0,
            },
        ));
    }
    let mut r = b.to_vec();
    let r0 = r.clone();
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut phat = vec![0.0; n];
    let mut shat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let (mut rho, mut alpha, mut omega) = (1.0f64, 1.0f64, 1.0f64);
    for it in 1..=opts.maxit {
        let rho_new = dot(&r0, &r);
        if rho_new == 0.0 || omega == 0.0 {
            return Err(SwgError::Breakdown {
                method: "bicgstab".into(),
                iteration: it,
            });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            phat[i] = minv[i] * p[i];
        }
        a.mul_vec(&phat, &mut v);
        let denom = dot(&r0, &v);
        if denom == 0.0 {
            return Err(SwgError::Breakdown {
                method: "bicgstab".into(),
                iteration: it,
            });
        }
        alpha = rho / denom;
        for i in 0..n {
            r[i] -= alpha * v[i];
            x[i] += alpha * phat[i];
        }
        if norm(&r) <= opts.tol * nb {
            let res = relative_residual(a, &x, b);
            if res <= opts.tol {
                return Ok((x, stats(SolverMethod::Bicgstab, it, res)));
            }
        }
        for i in 0..n {
            shat[i] = minv[i] * r[i];
        }
        a.mul_vec(&shat, &mut t);
        let tt = dot(&t, &t);
        omega = if tt == 0.0 { 0.0 } else { dot(&t, &r) / tt };
        for i in 0..n {
            x[i] += omega * shat[i];
            r[i] -= omega * t[i];
        }
        if norm(&r) <= opts.tol * nb {
            // guard against drift between recursive and true residual
            let res = relative_residual(a, &x, b);
            if res <= opts.tol {
                return Ok((x, stats(SolverMethod::Bicgstab, it, res)));
            }
            a.mul_vec(&x, &mut t);
            for i in 0..n {
                r[i] = b[i] - t[i];
            }
        }
    }
    Err(SwgError::NotConverged {
        method: "bicgstab".into(),
        iterations: opts.maxit,
        residual: relative_residual(a, &x, b),
    })
}

fn stats(method: SolverMethod, iterations: usize, residual: f64) -> SolveStats {
    SolveStats {
        method,
        iterations,
        residual,
    }
}

/// Restarted GMRES(m), right-preconditioned with Jacobi.
pub fn gmres(a: &CsrMatrix, b: &[f64], opts: &SolveOptions) -> Result<(Vec<f64>, SolveStats)> {
    let n = a.nrows;
    let m = opts.restart.max(1).min(n);
    let minv = jacobi(a);
    let nb = norm(b);
    let mut x = vec![0.0; n];
    if nb == 0.0 {
        return Ok((x, stats(SolverMethod::Gmres, 0, 0.0)));
    }
    let mut total = 0;
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    while total < opts.maxit {
        a.mul_vec(&x, &mut w);
        let r: Vec<f64> = b.iter().zip(&w).map(|(b, w)| b - w).collect();
        let beta = norm(&r);
        if beta <= opts.tol * nb {
            return Ok((x, stats(SolverMethod::Gmres, total, beta / nb)));
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut hess = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            total += 1;
            for i in 0..n {
                z[i] = minv[i] * basis[k][i];
            }
            a.mul_vec(&z, &mut w);
            for (j, vj) in basis.iter().enumerate() {
                let hj = dot(&w, vj);
                hess[j][k] = hj;
                for i in 0..n {
                    w[i] -= hj * vj[i];
                }
            }
            let hn = norm(&w);
            hess[k + 1][k] = hn;
            for j in 0..k {
                let t = cs[j] * hess[j][k] + sn[j] * hess[j + 1][k];
                hess[j + 1][k] = -sn[j] * hess[j][k] + cs[j] * hess[j + 1][k];
                hess[j][k] = t;
            }
            let d = hess[k][k].hypot(hess[k + 1][k]);
            if d == 0.0 {
                return Err(SwgError::Breakdown {
                    method: "gmres".into(),
                    iteration: total,
                });
            }
            cs[k] = hess[k][k] / d;
            sn[k] = hess[k + 1][k] / d;
            hess[k][k] = d;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            if g[k + 1].abs() <= opts.tol * nb || hn == 0.0 || total >= opts.maxit {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| hess[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / hess[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for i in 0..n {
                x[i] += minv[i] * basis[j][i] * yj;
            }
        }
        let res = relative_residual(a, &x, b);
        if res <= opts.tol {
            return Ok((x, stats(SolverMethod::Gmres, total, res)));
        }
    }
    Err(SwgError::NotConverged {
        method: "gmres".into(),
        iterations: total,
        residual: relative_residual(a, &x, b),
    })
}
