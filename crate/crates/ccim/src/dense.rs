//! Small dense linear algebra: LU with partial pivoting, inverse, 1-norm
//! condition number. The local systems here are at most 6x6, so everything is
//! explicit and allocation is not a concern. Matrices are row-major slices.

/// Maximum column absolute sum.
pub fn norm1(a: &[f64], n: usize) -> f64 {
    let mut best = 0.0f64;
    for j in 0..n {
        let mut s = 0.0;
        for i in 0..n {
            s += a[i * n + j].abs();
        }
        best = best.max(s);
    }
    best
}

/// LU factorization with partial pivoting.
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
    det_sign: f64,
}

impl Lu {
    /// Returns `None` if a pivot is exactly zero (structurally singular).
    pub fn factor(a: &[f64], n: usize) -> Option<Lu> {
        assert_eq!(a.len(), n * n);
        let mut lu = a.to_vec();
        let mut piv = vec![0usize; n];
        let mut det_sign = 1.0;
        for col in 0..n {
            let mut p = col;
            let mut best = lu[col * n + col].abs();
            for r in col + 1..n {
                let v = lu[r * n + col].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 {
                return None;
            }
            piv[col] = p;
            if p != col {
                det_sign = -det_sign;
                for j in 0..n {
                    lu.swap(col * n + j, p * n + j);
                }
            }
            let d = lu[col * n + col];
            for r in col + 1..n {
                let m = lu[r * n + col] / d;
                lu[r * n + col] = m;
                if m != 0.0 {
                    for j in col + 1..n {
                        lu[r * n + j] -= m * lu[col * n + j];
                    }
                }
            }
        }
        Some(Lu {
            n,
            lu,
            piv,
            det_sign,
        })
    }

    pub fn det(&self) -> f64 {
        let mut d = self.det_sign;
        for i in 0..self.n {
            d *= self.lu[i * self.n + i];
        }
        d
    }

    pub fn solve_into(&self, b: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        for i in 0..n {
            b.swap(i, self.piv[i]);
        }
        // forward: L has unit diagonal
        for i in 1..n {
            let mut s = b[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * b[j];
            }
            b[i] = s;
        }
        // backward
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * b[j];
            }
            b[i] = s / self.lu[i * n + i];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_into(&mut x);
        x
    }

    pub fn inverse(&self) -> Vec<f64> {
        let n = self.n;
        let mut inv = vec![0.0; n * n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            col.iter_mut().for_each(|v| *v = 0.0);
            col[j] = 1.0;
            self.solve_into(&mut col);
            for i in 0..n {
                inv[i * n + j] = col[i];
            }
        }
        inv
    }
}

/// Exact 1-norm condition number `||A||_1 ||A^-1||_1` via the explicit
/// inverse. Infinite for singular input.
pub fn cond1(a: &[f64], n: usize) -> f64 {
    match Lu::factor(a, n) {
        Some(lu) => norm1(a, n) * norm1(&lu.inverse(), n),
        None => f64::INFINITY,
    }
}
