//! Compressed sparse row storage, ILU(0), and right-preconditioned BiCGSTAB
//! for the global asymmetric system.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::{Error, Result};

/// Square sparse matrix, rows stored contiguously with sorted column indices.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row (column, value) lists; row i of the matrix is
    /// `rows[i]`, already sorted by column without duplicates.
    pub fn from_rows(rows: &[Vec<(usize, f64)>]) -> CsrMatrix {
        let n = rows.len();
        let mut offsets = Vec::with_capacity(n + 1);
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        offsets.push(0);
        for row in rows {
            debug_assert!(row.windows(2).all(|w| w[0].0 < w[1].0), "unsorted row");
            for &(c, v) in row {
                debug_assert!(c < n);
                cols.push(c);
                vals.push(v);
            }
            offsets.push(cols.len());
        }
        CsrMatrix {
            n,
            offsets,
            cols,
            vals,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.offsets[i]..self.offsets[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    /// y = A x. Parallel over rows; each row is summed in storage order, so
    /// the result does not depend on the thread count.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let mut acc = 0.0;
            for idx in self.offsets[i]..self.offsets[i + 1] {
                acc += self.vals[idx] * x[self.cols[idx]];
            }
            *yi = acc;
        });
    }
}

/// Incomplete LU factorization with zero fill-in on the matrix pattern.
/// L has unit diagonal and shares the strictly-lower part of the pattern; U
/// the diagonal and strictly-upper part.
pub struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
    /// Number of pivots replaced by a small shift during factorization.
    pub zero_pivot_shifts: usize,
}

/// Factors A in place on its own sparsity pattern. A zero pivot is replaced
/// by 1e-12 times the 1-norm of its row (warned on stderr) so the triangular
/// solves stay finite.
pub fn ilu0(a: &CsrMatrix) -> Ilu0 {
    let n = a.n();
    let mut lu = a.clone();
    let mut diag = vec![usize::MAX; n];
    for i in 0..n {
        for idx in lu.offsets[i]..lu.offsets[i + 1] {
            if lu.cols[idx] == i {
                diag[i] = idx;
            }
        }
        assert!(diag[i] != usize::MAX, "missing diagonal in row {i}");
    }
    let mut shifts = 0;
    for i in 0..n {
        let (start, end) = (lu.offsets[i], lu.offsets[i + 1]);
        for kidx in start..end {
            let k = lu.cols[kidx];
            if k >= i {
                break;
            }
            let pivot = lu.vals[diag[k]];
            let lik = lu.vals[kidx] / pivot;
            lu.vals[kidx] = lik;
            // subtract lik * row k from row i, on the shared pattern only
            let (kcols, _) = {
                let r = lu.offsets[k]..lu.offsets[k + 1];
                (&lu.cols[r.clone()], ())
            };
            let mut jidx = kidx + 1;
            for (pos, &kc) in kcols.iter().enumerate() {
                if kc <= k {
                    continue;
                }
                while jidx < end && lu.cols[jidx] < kc {
                    jidx += 1;
                }
                if jidx == end {
                    break;
                }
                if lu.cols[jidx] == kc {
                    lu.vals[jidx] -= lik * lu.vals[lu.offsets[k] + pos];
                }
            }
        }
        if lu.vals[diag[i]] == 0.0 {
            let row_norm: f64 = (start..end).map(|idx| lu.vals[idx].abs()).sum();
            let shift = if row_norm > 0.0 { 1e-12 * row_norm } else { 1e-12 };
            lu.vals[diag[i]] = shift;
            shifts += 1;
        }
    }
    if shifts > 0 {
        eprintln!("warning: ILU(0) shifted {shifts} zero pivot(s)");
    }
    Ilu0 {
        lu,
        diag,
        zero_pivot_shifts: shifts,
    }
}

impl Ilu0 {
    /// z = (LU)^-1 r by forward then backward substitution.
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.lu.n;
        for i in 0..n {
            let mut acc = r[i];
            for idx in self.lu.offsets[i]..self.diag[i] {
                acc -= self.lu.vals[idx] * z[self.lu.cols[idx]];
            }
            z[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = z[i];
            for idx in self.diag[i] + 1..self.lu.offsets[i + 1] {
                acc -= self.lu.vals[idx] * z[self.lu.cols[idx]];
            }
            z[i] = acc / self.lu.vals[self.diag[i]];
        }
    }
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations: usize,
    /// True relative residual ||b - Ax|| / ||b|| at exit.
    pub residual: f64,
    pub converged: bool,
    pub seconds: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

const BREAKDOWN: f64 = 1e-30;

/// Right-preconditioned BiCGSTAB. Convergence is declared only after the
/// true residual confirms the recursive one. On a rho or omega breakdown the
/// iteration restarts once from the current iterate with a fresh shadow
/// vector; a second breakdown aborts.
pub fn bicgstab(
    a: &CsrMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    pre: Option<&Ilu0>,
) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    let n = a.n();
    assert_eq!(b.len(), n);
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((
            x,
            SolveReport {
                iterations: 0,
                residual: 0.0,
                converged: true,
                seconds: start.elapsed().as_secs_f64(),
            },
        ));
    }
    let precondition = |r: &[f64], z: &mut [f64]| match pre {
        Some(m) => m.apply(r, z),
        None => z.copy_from_slice(r),
    };
    let true_residual = |x: &[f64], scratch: &mut Vec<f64>| {
        a.matvec(x, scratch);
        for (ri, bi) in scratch.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        norm2(scratch) / bnorm
    };

    let mut r = b.to_vec();
    let mut rhat = r.clone();
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut phat = vec![0.0; n];
    let mut shat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let (mut rho_prev, mut alpha, mut omega) = (1.0f64, 1.0f64, 1.0f64);
    let mut restarted = false;
    let mut iterations = 0;

    macro_rules! restart_or_fail {
        ($what:expr) => {{
            if restarted {
                return Err(Error::Solver(format!(
                    "BiCGSTAB {} breakdown after restart at iteration {}",
                    $what, iterations
                )));
            }
            restarted = true;
            a.matvec(&x, &mut scratch);
            for i in 0..n {
                r[i] = b[i] - scratch[i];
            }
            rhat.copy_from_slice(&r);
            p.iter_mut().for_each(|z| *z = 0.0);
            v.iter_mut().for_each(|z| *z = 0.0);
            rho_prev = 1.0;
            alpha = 1.0;
            omega = 1.0;
            continue;
        }};
    }

    while iterations < max_iter {
        iterations += 1;
        let rho = dot(&rhat, &r);
        if rho.abs() < BREAKDOWN * norm2(&rhat) * norm2(&r) {
            restart_or_fail!("rho");
        }
        let beta = (rho / rho_prev) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        precondition(&p, &mut phat);
        a.matvec(&phat, &mut v);
        let denom = dot(&rhat, &v);
        if denom.abs() < BREAKDOWN * norm2(&rhat) * norm2(&v) {
            restart_or_fail!("alpha");
        }
        alpha = rho / denom;
        for i in 0..n {
            x[i] += alpha * phat[i];
            r[i] -= alpha * v[i];
        }
        if norm2(&r) / bnorm <= tol {
            let res = true_residual(&x, &mut scratch);
            if res <= tol {
                return Ok((
                    x,
                    SolveReport {
                        iterations,
                        residual: res,
                        converged: true,
                        seconds: start.elapsed().as_secs_f64(),
                    },
                ));
            }
            r.copy_from_slice(&scratch);
        }
        precondition(&r, &mut shat);
        a.matvec(&shat, &mut t);
        let tt = dot(&t, &t);
        if tt < f64::MIN_POSITIVE {
            restart_or_fail!("omega");
        }
        omega = dot(&t, &r) / tt;
        if omega.abs() < BREAKDOWN {
            restart_or_fail!("omega");
        }
        for i in 0..n {
            x[i] += omega * shat[i];
            r[i] -= omega * t[i];
        }
        rho_prev = rho;
        if norm2(&r) / bnorm <= tol {
            let res = true_residual(&x, &mut scratch);
            if res <= tol {
                return Ok((
                    x,
                    SolveReport {
                        iterations,
                        residual: res,
                        converged: true,
                        seconds: start.elapsed().as_secs_f64(),
                    },
                ));
            }
            r.copy_from_slice(&scratch);
        }
    }
    let res = true_residual(&x, &mut scratch);
    Err(Error::Solver(format!(
        "BiCGSTAB did not converge in {max_iter} iterations (relative residual {res:.3e})"
    )))
}

/// Writes the matrix in Matrix Market coordinate text format (1-based).
pub fn write_matrix_market<W: Write>(a: &CsrMatrix, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.n, a.n, a.nnz())?;
    for i in 0..a.n {
        let (cols, vals) = a.row(i);
        for (c, v) in cols.iter().zip(vals) {
            writeln!(w, "{} {} {:.16e}", i + 1, c + 1, v)?;
        }
    }
    Ok(())
}
