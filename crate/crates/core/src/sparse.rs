//! Compressed sparse row matrices and the Krylov solvers (Jacobi-preconditioned
//! CG for SPD/SPSD systems, preconditioned MINRES for symmetric indefinite ones).
//!
//! All reductions are chunked in a fixed order, so results are bit-identical
//! regardless of the rayon thread count.

use rayon::prelude::*;

use crate::scalar::Real;

const CHUNK: usize = 8192;
const ROW_BLOCK: usize = 1024;

#[derive(Clone, Debug)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Assembles from unsorted triplets; duplicates are summed in input order.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, T)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            debug_assert!(r < nrows && c < ncols);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { nrows, ncols, row_ptr, col_idx, values }
    }

    /// Zero matrix with the given sorted, duplicate-free column lists per row.
    pub fn from_pattern(ncols: usize, rows: &[Vec<usize>]) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::with_capacity(rows.iter().map(Vec::len).sum());
        for r in rows {
            col_idx.extend_from_slice(r);
            row_ptr.push(col_idx.len());
        }
        let values = vec![T::zero(); col_idx.len()];
        Self { nrows: rows.len(), ncols, row_ptr, col_idx, values }
    }

    /// Adds `v` to entry `(r, c)`, which must be in the pattern.
    pub fn add_at(&mut self, r: usize, c: usize, v: T) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        let k = self.col_idx[span.clone()]
            .iter()
            .position(|&x| x == c)
            .expect("entry outside sparsity pattern");
        self.values[span.start + k] += v;
    }

    /// `self + alpha·other` for matrices sharing one pattern.
    pub fn add_scaled(&self, alpha: T, other: &Self) -> Self {
        debug_assert_eq!(self.col_idx, other.col_idx);
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| a + alpha * b).collect();
        Self { values, ..self.clone() }
    }

    /// Rows and columns with `Some(new_index)` in `keep`, renumbered.
    pub fn submatrix(&self, keep: &[Option<usize>], kept: usize) -> Self {
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for r in 0..self.nrows {
            if keep[r].is_none() {
                continue;
            }
            for (c, v) in self.row(r) {
                if let Some(nc) = keep[c] {
                    col_idx.push(nc);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { nrows: kept, ncols: kept, row_ptr, col_idx, values }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.nrows)
            .map(|r| self.row(r).find(|&(c, _)| c == r).map_or(T::zero(), |(_, v)| v))
            .collect()
    }

    /// `y = A x`.
    pub fn mul_into(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        y.par_chunks_mut(ROW_BLOCK).enumerate().for_each(|(blk, out)| {
            let base = blk * ROW_BLOCK;
            for (k, yr) in out.iter_mut().enumerate() {
                let r = base + k;
                let mut s = T::zero();
                for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                    s += self.values[idx] * x[self.col_idx[idx]];
                }
                *yr = s;
            }
        });
    }

    pub fn mul(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.nrows];
        self.mul_into(x, &mut y);
        y
    }

    /// `|A| |x|` computed row-wise, the scale used for normalized residuals.
    pub fn abs_mul(&self, x: &[T]) -> Vec<T> {
        (0..self.nrows)
            .map(|r| self.row(r).map(|(c, v)| v.abs() * x[c].abs()).sum())
            .collect()
    }
}

/// Order-fixed parallel dot product.
pub fn pdot<T: Real>(a: &[T], b: &[T]) -> T {
    let partial: Vec<T> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(&u, &v)| u * v).sum())
        .collect();
    partial.into_iter().sum()
}

pub fn pnorm<T: Real>(a: &[T]) -> T {
    pdot(a, a).sqrt()
}

fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    y.par_chunks_mut(CHUNK).zip(x.par_chunks(CHUNK)).for_each(|(yc, xc)| {
        for (yi, &xi) in yc.iter_mut().zip(xc) {
            *yi += alpha * xi;
        }
    });
}

fn mean<T: Real>(x: &[T]) -> T {
    let partial: Vec<T> = x.par_chunks(CHUNK).map(|c| c.iter().copied().sum()).collect();
    partial.into_iter().sum::<T>() / T::from_usize_lossy(x.len().max(1))
}

pub fn remove_mean<T: Real>(x: &mut [T]) {
    let m = mean(x);
    x.par_chunks_mut(CHUNK).for_each(|c| c.iter_mut().for_each(|v| *v -= m));
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveStats<T> {
    pub iterations: usize,
    pub relative_residual: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KrylovFailure<T> {
    /// Iteration cap hit; carries the last relative residual.
    NotConverged { iterations: usize, relative_residual: T },
    /// Breakdown from a non-positive curvature direction in CG.
    Indefinite { iterations: usize },
    /// Smallest |Ritz value| relative to the largest fell below the guard.
    NearSingular { ratio: T },
}

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions<T> {
    pub tolerance: T,
    pub max_iterations: usize,
    /// Restrict iterates to the zero-mean subspace (periodic cell problems).
    pub zero_mean: bool,
}

/// Jacobi-preconditioned conjugate gradients. `x` holds the initial guess on
/// entry and the solution on exit.
pub fn conjugate_gradient<T: Real>(
    a: &CsrMatrix<T>,
    b: &[T],
    x: &mut [T],
    opts: &SolverOptions<T>,
) -> Result<SolveStats<T>, KrylovFailure<T>> {
    let n = b.len();
    let bnorm = pnorm(b);
    if bnorm == T::zero() {
        x.iter_mut().for_each(|v| *v = T::zero());
        return Ok(SolveStats { iterations: 0, relative_residual: T::zero() });
    }
    let inv_diag: Vec<T> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > T::zero() { d.recip() } else { T::one() })
        .collect();
    let precondition = |r: &[T], z: &mut [T]| {
        z.par_chunks_mut(CHUNK)
            .zip(r.par_chunks(CHUNK).zip(inv_diag.par_chunks(CHUNK)))
            .for_each(|(zc, (rc, dc))| {
                for ((zi, &ri), &di) in zc.iter_mut().zip(rc).zip(dc) {
                    *zi = ri * di;
                }
            });
    };

    if opts.zero_mean {
        remove_mean(x);
    }
    let mut r = a.mul(x);
    r.par_iter_mut().zip(b.par_iter()).for_each(|(ri, &bi)| *ri = bi - *ri);
    if opts.zero_mean {
        remove_mean(&mut r);
    }
    let mut z = vec![T::zero(); n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![T::zero(); n];
    let mut rz = pdot(&r, &z);
    let mut rel = pnorm(&r) / bnorm;
    let mut it = 0;
    while rel > opts.tolerance {
        if it >= opts.max_iterations {
            return Err(KrylovFailure::NotConverged { iterations: it, relative_residual: rel });
        }
        a.mul_into(&p, &mut ap);
        let pap = pdot(&p, &ap);
        if pap <= T::zero() {
            return Err(KrylovFailure::Indefinite { iterations: it });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, x);
        axpy(-alpha, &ap, &mut r);
        if opts.zero_mean {
            remove_mean(&mut r);
        }
        it += 1;
        // Periodically recompute the true residual to avoid drift.
        if it % 200 == 0 {
            a.mul_into(x, &mut ap);
            r.par_iter_mut()
                .zip(b.par_iter().zip(ap.par_iter()))
                .for_each(|(ri, (&bi, &ai))| *ri = bi - ai);
            if opts.zero_mean {
                remove_mean(&mut r);
            }
        }
        precondition(&r, &mut z);
        let rz_new = pdot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_chunks_mut(CHUNK).zip(z.par_chunks(CHUNK)).for_each(|(pc, zc)| {
            for (pi, &zi) in pc.iter_mut().zip(zc) {
                *pi = zi + beta * *pi;
            }
        });
        rel = pnorm(&r) / bnorm;
    }
    if opts.zero_mean {
        remove_mean(x);
    }
    Ok(SolveStats { iterations: it, relative_residual: rel })
}

/// Preconditioned MINRES for symmetric (possibly indefinite) systems with a
/// Ritz-value singularity guard: if the smallest |Ritz value| of the
/// preconditioned operator falls below `singular_guard · max |Ritz value|`
/// the solve is rejected.
pub fn minres<T: Real>(
    a: &CsrMatrix<T>,
    b: &[T],
    x: &mut [T],
    opts: &SolverOptions<T>,
    singular_guard: T,
) -> Result<SolveStats<T>, KrylovFailure<T>> {
    let n = b.len();
    x.iter_mut().for_each(|v| *v = T::zero());
    let bnorm = pnorm(b);
    if bnorm == T::zero() {
        return Ok(SolveStats { iterations: 0, relative_residual: T::zero() });
    }
    let inv_diag: Vec<T> = a
        .diagonal()
        .into_iter()
        .map(|d| if d.abs() > T::zero() { d.abs().recip() } else { T::one() })
        .collect();
    let (dmin, dmax) = inv_diag
        .iter()
        .fold((T::infinity(), T::zero()), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    let inner_tol = opts.tolerance * (dmin / dmax).sqrt();

    let mut r1 = b.to_vec();
    let mut r2 = b.to_vec();
    let mut y: Vec<T> = r1.iter().zip(&inv_diag).map(|(&r, &d)| r * d).collect();
    let beta1 = pdot(&r1, &y).sqrt();
    let mut oldb = T::zero();
    let mut beta = beta1;
    let mut dbar = T::zero();
    let mut epsln = T::zero();
    let mut phibar = beta1;
    let mut cs = -T::one();
    let mut sn = T::zero();
    let mut w = vec![T::zero(); n];
    let mut w1 = vec![T::zero(); n];
    let mut w2 = vec![T::zero(); n];
    let mut v = vec![T::zero(); n];
    let mut alphas: Vec<T> = Vec::new();
    let mut betas: Vec<T> = Vec::new();
    let mut it = 0;
    let mut converged = false;
    while it < opts.max_iterations {
        it += 1;
        let s = beta.recip();
        v.iter_mut().zip(&y).for_each(|(vi, &yi)| *vi = s * yi);
        a.mul_into(&v, &mut y);
        if it >= 2 {
            axpy(-(beta / oldb), &r1, &mut y);
        }
        let alfa = pdot(&v, &y);
        axpy(-(alfa / beta), &r2, &mut y);
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        y.iter_mut().zip(r2.iter().zip(&inv_diag)).for_each(|(yi, (&ri, &di))| *yi = ri * di);
        oldb = beta;
        beta = pdot(&r2, &y).max(T::zero()).sqrt();
        alphas.push(alfa);
        betas.push(beta);

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = (gbar * gbar + beta * beta).sqrt().max(T::epsilon());
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar = sn * phibar;
        let denom = gamma.recip();
        std::mem::swap(&mut w1, &mut w2);
        std::mem::swap(&mut w2, &mut w);
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) * denom;
            x[i] += phi * w[i];
        }
        if phibar / beta1 <= inner_tol || beta == T::zero() {
            converged = true;
            break;
        }
    }
    betas.pop();
    let ratio = ritz_ratio(&alphas, &betas);
    if ratio <= singular_guard {
        return Err(KrylovFailure::NearSingular { ratio });
    }
    let mut res = a.mul(x);
    res.iter_mut().zip(b).for_each(|(ri, &bi)| *ri = bi - *ri);
    let rel = pnorm(&res) / bnorm;
    if !converged || rel > opts.tolerance * T::lit(10.0) {
        return Err(KrylovFailure::NotConverged { iterations: it, relative_residual: rel });
    }
    Ok(SolveStats { iterations: it, relative_residual: rel })
}

/// `min |θ| / max |θ|` over eigenvalues θ of the symmetric tridiagonal matrix
/// with diagonal `diag` and off-diagonal `off`, via Sturm-sequence bisection.
pub fn ritz_ratio<T: Real>(diag: &[T], off: &[T]) -> T {
    let k = diag.len();
    if k == 0 {
        return T::one();
    }
    let bound = (0..k)
        .map(|i| {
            let l = if i > 0 { off[i - 1].abs() } else { T::zero() };
            let r = if i < k - 1 { off[i].abs() } else { T::zero() };
            diag[i].abs() + l + r
        })
        .fold(T::zero(), T::max);
    if bound == T::zero() {
        return T::zero();
    }
    // Number of eigenvalues strictly below sigma.
    let count_below = |sigma: T| -> usize {
        let mut c = 0;
        let mut q = diag[0] - sigma;
        let tiny = T::min_positive_value();
        if q < T::zero() {
            c += 1;
        }
        for i in 1..k {
            let qq = if q.abs() < tiny { tiny } else { q };
            q = diag[i] - sigma - off[i - 1] * off[i - 1] / qq;
            if q < T::zero() {
                c += 1;
            }
        }
        c
    };
    let bisect = |index: usize| -> T {
        // index-th smallest eigenvalue (0-based)
        let mut lo = -bound;
        let mut hi = bound;
        for _ in 0..200 {
            let mid = T::lit(0.5) * (lo + hi);
            if count_below(mid) > index {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= T::epsilon() * bound {
                break;
            }
        }
        T::lit(0.5) * (lo + hi)
    };
    let neg = count_below(T::zero());
    let mut min_abs = T::infinity();
    if neg > 0 {
        min_abs = min_abs.min(bisect(neg - 1).abs());
    }
    if neg < k {
        min_abs = min_abs.min(bisect(neg).abs());
    }
    let max_abs = bisect(0).abs().max(bisect(k - 1).abs());
    min_abs / max_abs
}
