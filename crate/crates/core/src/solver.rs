//! Linear solvers for the per-step system.
//!
//! The default path is restarted GMRES, right-preconditioned with ILU(0).
//! When GMRES breaks down or stalls on a system smaller than
//! [`DIRECT_FALLBACK_DIM`], a banded LU with partial pivoting on a reverse
//! Cuthill–McKee ordering takes over. [`dense_solve_oracle`] is a plain
//! dense elimination used to cross-check small systems.

use std::collections::VecDeque;

use log::{debug, warn};

use crate::sparse::{dot, norm2, CsrMatrix};
use crate::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_RESTART: usize = 60;
/// Iteration cap as a multiple of the system dimension.
pub const MAX_ITER_FACTOR: usize = 20;
/// Systems below this size may fall back to sparse direct elimination.
pub const DIRECT_FALLBACK_DIM: usize = 5000;
/// GMRES aims this factor below the requested tolerance.
pub const OVERSOLVE: f64 = 1e-2;
/// Largest system accepted by [`dense_solve_oracle`].
pub const DENSE_ORACLE_MAX_DIM: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    /// GMRES first, direct fallback below [`DIRECT_FALLBACK_DIM`].
    Auto,
    Gmres,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub restart: usize,
    pub method: SolveMethod,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: DEFAULT_TOL,
            restart: DEFAULT_RESTART,
            method: SolveMethod::Auto,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolverOptions {
            tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UsedMethod {
    Gmres,
    Direct,
    Trivial,
}

/// What a successful solve did; `residual` is recomputed from the returned
/// solution, not taken from the iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub residual: f64,
    pub iterations: usize,
    pub method: UsedMethod,
}

/// `‖b − A x‖ / ‖b‖` (absolute residual when `b = 0`).
pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: f64 = ax.iter().zip(b).map(|(p, q)| (q - p) * (q - p)).sum::<f64>().sqrt();
    let bn = norm2(b);
    if bn > 0.0 {
        r / bn
    } else {
        r
    }
}

/// Solves `A x = b` to relative residual `tol` with the default method.
pub fn solve_sparse(a: &CsrMatrix, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    solve_sparse_with(a, b, &SolverOptions::with_tol(tol)).map(|(x, _)| x)
}

pub fn solve_sparse_with(a: &CsrMatrix, b: &[f64], opts: &SolverOptions) -> Result<(Vec<f64>, SolveReport)> {
    solve_sparse_from(a, b, None, opts)
}

/// Like [`solve_sparse_with`], starting the iteration from `guess`.
pub fn solve_sparse_from(
    a: &CsrMatrix,
    b: &[f64],
    guess: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::InvalidArgument(format!(
            "solve needs a square system, got {}x{} with rhs {}",
            n,
            a.ncols(),
            b.len()
        )));
    }
    if !(opts.tol > 0.0 && opts.tol <= 1e-4) {
        return Err(Error::InvalidArgument(format!("solver tolerance {} outside (0, 1e-4]", opts.tol)));
    }
    if guess.is_some_and(|g| g.len() != n) {
        return Err(Error::InvalidArgument("initial guess has the wrong length".into()));
    }
    if norm2(b) == 0.0 {
        return Ok((
            vec![0.0; n],
            SolveReport {
                residual: 0.0,
                iterations: 0,
                method: UsedMethod::Trivial,
            },
        ));
    }

    let direct = |a: &CsrMatrix| -> Result<(Vec<f64>, SolveReport)> {
        let x = BandedLu::factor(a)?.solve(b);
        let residual = relative_residual(a, &x, b);
        if residual > opts.tol {
            return Err(Error::Solver {
                reason: "direct elimination did not reach the tolerance".into(),
                residual,
            });
        }
        Ok((
            x,
            SolveReport {
                residual,
                iterations: 0,
                method: UsedMethod::Direct,
            },
        ))
    };

    match opts.method {
        SolveMethod::Direct => direct(a),
        SolveMethod::Gmres | SolveMethod::Auto => {
            let attempt = Ilu0::factor(a).and_then(|ilu| {
                gmres(a, b, guess, &ilu, opts.restart, MAX_ITER_FACTOR * n, opts.tol)
            });
            match attempt {
                Ok((x, iterations)) => {
                    let residual = relative_residual(a, &x, b);
                    debug!("gmres converged in {iterations} iterations, residual {residual:.3e}");
                    Ok((
                        x,
                        SolveReport {
                            residual,
                            iterations,
                            method: UsedMethod::Gmres,
                        },
                    ))
                }
                Err(e) if opts.method == SolveMethod::Auto && n < DIRECT_FALLBACK_DIM => {
                    warn!("GMRES failed ({e}); falling back to direct elimination");
                    direct(a)
                }
                Err(e) => Err(e),
            }
        }
    }
}

/// Incomplete LU factorization with the sparsity pattern of `A`.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        let mut lu = a.clone();
        let row_ptr = lu.row_ptr().to_vec();
        let col_idx = lu.col_idx().to_vec();
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            for k in row_ptr[i]..row_ptr[i + 1] {
                if col_idx[k] == i {
                    diag[i] = k;
                }
            }
            if diag[i] == usize::MAX {
                return Err(Error::Solver {
                    reason: format!("ILU(0): row {i} has no diagonal entry"),
                    residual: f64::NAN,
                });
            }
        }
        let mut pos = vec![usize::MAX; n];
        let vals = lu.values_mut();
        for i in 0..n {
            let row = row_ptr[i]..row_ptr[i + 1];
            for k in row.clone() {
                pos[col_idx[k]] = k;
            }
            for kk in row.clone() {
                let k = col_idx[kk];
                if k >= i {
                    break;
                }
                let pivot = vals[diag[k]];
                let l = vals[kk] / pivot;
                vals[kk] = l;
                for jj in diag[k] + 1..row_ptr[k + 1] {
                    let p = pos[col_idx[jj]];
                    if p != usize::MAX {
                        vals[p] -= l * vals[jj];
                    }
                }
            }
            let d = vals[diag[i]];
            if d == 0.0 || !d.is_finite() {
                return Err(Error::Solver {
                    reason: format!("ILU(0): zero pivot in row {i}"),
                    residual: f64::NAN,
                });
            }
            for k in row {
                pos[col_idx[k]] = usize::MAX;
            }
        }
        Ok(Ilu0 { lu, diag })
    }

    /// Applies `(LU)⁻¹` to `x` in place.
    pub fn apply(&self, x: &mut [f64]) {
        let n = x.len();
        let rp = self.lu.row_ptr();
        let ci = self.lu.col_idx();
        let v = self.lu.values();
        for i in 0..n {
            let mut s = x[i];
            for k in rp[i]..self.diag[i] {
                s -= v[k] * x[ci[k]];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in self.diag[i] + 1..rp[i + 1] {
                s -= v[k] * x[ci[k]];
            }
            x[i] = s / v[self.diag[i]];
        }
    }
}

/// Restarted GMRES with right preconditioning and modified Gram–Schmidt.
/// Iterates towards `OVERSOLVE · tol` and accepts anything within `tol` once
/// the iteration budget is spent. Returns the solution and the number of
/// inner iterations.
pub fn gmres(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    precond: &Ilu0,
    restart: usize,
    max_iter: usize,
    tol: f64,
) -> Result<(Vec<f64>, usize)> {
    let n = b.len();
    let restart = restart.max(1).min(n.max(1));
    let bnorm = norm2(b);
    let target = OVERSOLVE * tol * bnorm;
    let accept = tol * bnorm;
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut iters = 0;
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(restart + 1);
    let mut hess = vec![vec![0.0; restart]; restart + 1];
    let mut cs = vec![0.0; restart];
    let mut sn = vec![0.0; restart];
    let mut g = vec![0.0; restart + 1];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];

    loop {
        let ax = a.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let beta = norm2(&r);
        if beta <= target {
            return Ok((x, iters));
        }
        if iters >= max_iter {
            if beta <= accept {
                return Ok((x, iters));
            }
            return Err(Error::Solver {
                reason: format!("GMRES did not converge in {iters} iterations"),
                residual: beta / bnorm,
            });
        }
        basis.clear();
        basis.push(r.iter().map(|v| v / beta).collect());
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = beta;
        let mut cols = 0;
        for j in 0..restart {
            z.copy_from_slice(&basis[j]);
            precond.apply(&mut z);
            a.mul_vec_into(&z, &mut w);
            for (i, vi) in basis.iter().enumerate() {
                let h = dot(&w, vi);
                hess[i][j] = h;
                w.iter_mut().zip(vi).for_each(|(wk, vk)| *wk -= h * vk);
            }
            let hnext = norm2(&w);
            hess[j + 1][j] = hnext;
            for i in 0..j {
                let t = cs[i] * hess[i][j] + sn[i] * hess[i + 1][j];
                hess[i + 1][j] = -sn[i] * hess[i][j] + cs[i] * hess[i + 1][j];
                hess[i][j] = t;
            }
            let (hjj, hj1) = (hess[j][j], hess[j + 1][j]);
            let denom = hjj.hypot(hj1);
            if denom == 0.0 {
                return Err(Error::Solver {
                    reason: "GMRES breakdown: singular Hessenberg column".into(),
                    residual: g[j].abs() / bnorm,
                });
            }
            cs[j] = hjj / denom;
            sn[j] = hj1 / denom;
            hess[j][j] = denom;
            hess[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            iters += 1;
            cols = j + 1;
            if g[j + 1].abs() <= target || hnext == 0.0 || iters >= max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / hnext).collect());
        }
        // back substitution for the least-squares coefficients
        let mut y = vec![0.0; cols];
        for i in (0..cols).rev() {
            let s: f64 = (i + 1..cols).map(|k| hess[i][k] * y[k]).sum();
            y[i] = (g[i] - s) / hess[i][i];
        }
        let mut u = vec![0.0; n];
        for (yi, vi) in y.iter().zip(&basis) {
            u.iter_mut().zip(vi).for_each(|(uk, vk)| *uk += yi * vk);
        }
        precond.apply(&mut u);
        x.iter_mut().zip(&u).for_each(|(xk, uk)| *xk += uk);
    }
}

/// Reverse Cuthill–McKee ordering of the symmetrized pattern of `A`.
/// Returns `perm` with `perm[new] = old`.
pub fn rcm_ordering(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j, _) in a.iter() {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let bfs_levels = |start: usize| -> (usize, usize) {
        // returns (eccentricity, a farthest vertex of minimum degree)
        let mut dist = vec![usize::MAX; n];
        let mut queue = VecDeque::from([start]);
        dist[start] = 0;
        let mut far = start;
        while let Some(v) = queue.pop_front() {
            if dist[v] > dist[far] || (dist[v] == dist[far] && degree[v] < degree[far]) {
                far = v;
            }
            for &w in &adj[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        (dist[far], far)
    };

    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        // pseudo-peripheral start vertex
        let mut start = seed;
        let (mut ecc, mut far) = bfs_levels(start);
        for _ in 0..8 {
            let (e2, f2) = bfs_levels(far);
            if e2 <= ecc {
                break;
            }
            start = far;
            ecc = e2;
            far = f2;
        }
        let (_, f) = bfs_levels(start);
        let _ = f;
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
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

/// Banded LU factorization with partial pivoting of a symmetrically
/// permuted sparse matrix.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
    perm: Vec<usize>,
}

impl BandedLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        let perm = rcm_ordering(a);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let (mut kl, mut ku) = (0usize, 0usize);
        for (i, j, _) in a.iter() {
            let (r, c) = (inv[i], inv[j]);
            if r > c {
                kl = kl.max(r - c);
            } else {
                ku = ku.max(c - r);
            }
        }
        // row r keeps columns [r - kl, r + kl + ku]
        let width = 2 * kl + ku + 1;
        let mut lu = BandedLu {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
            pivots: vec![0; n],
            perm,
        };
        for (i, j, v) in a.iter() {
            let idx = lu.idx(inv[i], inv[j]);
            lu.data[idx] += v;
        }
        let scale = a.max_abs();
        for c in 0..n {
            let last_row = (c + kl).min(n - 1);
            let mut p = c;
            let mut best = lu.data[lu.idx(c, c)].abs();
            for r in c + 1..=last_row {
                let v = lu.data[lu.idx(r, c)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > 1e-300 && best > f64::EPSILON * 1e-6 * scale) {
                return Err(Error::Solver {
                    reason: format!("banded LU: singular pivot at column {c}"),
                    residual: f64::NAN,
                });
            }
            lu.pivots[c] = p;
            let last_col = (c + kl + ku).min(n - 1);
            if p != c {
                for cc in c..=last_col {
                    let (x, y) = (lu.idx(c, cc), lu.idx(p, cc));
                    lu.data.swap(x, y);
                }
            }
            let pivot = lu.data[lu.idx(c, c)];
            for r in c + 1..=last_row {
                let irc = lu.idx(r, c);
                let l = lu.data[irc] / pivot;
                lu.data[irc] = l;
                if l == 0.0 {
                    continue;
                }
                for cc in c + 1..=last_col {
                    let src = lu.data[lu.idx(c, cc)];
                    let dst = lu.idx(r, cc);
                    lu.data[dst] -= l * src;
                }
            }
        }
        Ok(lu)
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        debug_assert!(c + self.kl >= r && c + self.kl - r < self.width);
        r * self.width + (c + self.kl - r)
    }

    /// Bandwidths `(lower, upper)` of the permuted matrix.
    pub fn bandwidth(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for c in 0..n {
            y.swap(c, self.pivots[c]);
            let last_row = (c + self.kl).min(n - 1);
            for r in c + 1..=last_row {
                y[r] -= self.data[self.idx(r, c)] * y[c];
            }
        }
        for c in (0..n).rev() {
            let last_col = (c + self.kl + self.ku).min(n - 1);
            let mut s = y[c];
            for cc in c + 1..=last_col {
                s -= self.data[self.idx(c, cc)] * y[cc];
            }
            y[c] = s / self.data[self.idx(c, c)];
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

/// Dense Gaussian elimination with partial pivoting.
pub fn dense_solve_oracle(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    if n > DENSE_ORACLE_MAX_DIM {
        return Err(Error::InvalidArgument(format!("dense oracle limited to {DENSE_ORACLE_MAX_DIM} unknowns")));
    }
    if a.len() != n || a.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidArgument("dense oracle needs a square matrix".into()));
    }
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut x = b.to_vec();
    let scale = m.iter().flatten().fold(0.0_f64, |s, v| s.max(v.abs()));
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))
            .unwrap();
        if !(m[p][c].abs() > 1e-14 * scale) {
            return Err(Error::Solver {
                reason: format!("dense oracle: numerically singular pivot at column {c}"),
                residual: f64::NAN,
            });
        }
        m.swap(c, p);
        x.swap(c, p);
        let (top, bottom) = m.split_at_mut(c + 1);
        let pivot_row = &top[c];
        for (off, row) in bottom.iter_mut().enumerate() {
            let l = row[c] / pivot_row[c];
            if l == 0.0 {
                continue;
            }
            for k in c..n {
                row[k] -= l * pivot_row[k];
            }
            x[c + 1 + off] -= l * x[c];
        }
    }
    for c in (0..n).rev() {
        let s: f64 = (c + 1..n).map(|k| m[c][k] * x[k]).sum();
        x[c] = (x[c] - s) / m[c][c];
    }
    Ok(x)
}
