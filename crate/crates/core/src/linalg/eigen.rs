//! Eigenvalues of a general real matrix.
//!
//! Balancing, reduction to upper Hessenberg form by stabilized elimination,
//! then Francis double-shift QR with deflation. Complex conjugate pairs come
//! out of the trailing 2x2 blocks. Internally the working array is indexed
//! from 1 to keep the classic recurrences readable.

use num_complex::Complex64;

use super::DenseMatrix;
use crate::error::{Error, Result};

const RADIX: f64 = 2.0;

struct Work {
    n: usize,
    a: Vec<f64>,
}

impl Work {
    fn new(m: &DenseMatrix) -> Self {
        let n = m.rows();
        let mut a = vec![0.0; (n + 1) * (n + 1)];
        for i in 0..n {
            for j in 0..n {
                a[(i + 1) * (n + 1) + j + 1] = m[(i, j)];
            }
        }
        Self { n, a }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * (self.n + 1) + j]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.a[i * (self.n + 1) + j]
    }

    fn balance(&mut self) {
        let n = self.n;
        let sqrdx = RADIX * RADIX;
        let mut done = false;
        while !done {
            done = true;
            for i in 1..=n {
                let mut r = 0.0;
                let mut c = 0.0;
                for j in 1..=n {
                    if j != i {
                        c += self.at(j, i).abs();
                        r += self.at(i, j).abs();
                    }
                }
                if c == 0.0 || r == 0.0 {
                    continue;
                }
                let s = c + r;
                let mut f = 1.0;
                let mut g = r / RADIX;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 1..=n {
                        *self.at_mut(i, j) *= g;
                    }
                    for j in 1..=n {
                        *self.at_mut(j, i) *= f;
                    }
                }
            }
        }
    }

    fn to_hessenberg(&mut self) {
        let n = self.n;
        for m in 2..n {
            let mut x: f64 = 0.0;
            let mut pivot = m;
            for j in m..=n {
                if self.at(j, m - 1).abs() > x.abs() {
                    x = self.at(j, m - 1);
                    pivot = j;
                }
            }
            if pivot != m {
                for j in (m - 1)..=n {
                    let (p, q) = (pivot * (n + 1) + j, m * (n + 1) + j);
                    self.a.swap(p, q);
                }
                for j in 1..=n {
                    let (p, q) = (j * (n + 1) + pivot, j * (n + 1) + m);
                    self.a.swap(p, q);
                }
            }
            if x != 0.0 {
                for i in (m + 1)..=n {
                    let mut y = self.at(i, m - 1);
                    if y != 0.0 {
                        y /= x;
                        *self.at_mut(i, m - 1) = y;
                        for j in m..=n {
                            let v = self.at(m, j);
                            *self.at_mut(i, j) -= y * v;
                        }
                        for j in 1..=n {
                            let v = self.at(j, i);
                            *self.at_mut(j, m) += y * v;
                        }
                    }
                }
            }
        }
        // drop the elimination multipliers stored below the subdiagonal
        for i in 1..=n {
            for j in 1..i.saturating_sub(1) {
                *self.at_mut(i, j) = 0.0;
            }
        }
    }

    fn hqr(&mut self, max_total: usize) -> Result<Vec<Complex64>> {
        let n = self.n;
        let mut wr = vec![0.0; n + 1];
        let mut wi = vec![0.0; n + 1];

        let mut anorm = 0.0;
        for i in 1..=n {
            for j in i.saturating_sub(1).max(1)..=n {
                anorm += self.at(i, j).abs();
            }
        }

        let mut total = 0usize;
        let mut nn = n;
        let mut t = 0.0;
        while nn >= 1 {
            let mut its = 0;
            loop {
                let mut l = nn;
                while l >= 2 {
                    let mut s = self.at(l - 1, l - 1).abs() + self.at(l, l).abs();
                    if s == 0.0 {
                        s = anorm;
                    }
                    if self.at(l, l - 1).abs() + s == s {
                        *self.at_mut(l, l - 1) = 0.0;
                        break;
                    }
                    l -= 1;
                }
                let mut x = self.at(nn, nn);
                if l == nn {
                    wr[nn] = x + t;
                    wi[nn] = 0.0;
                    nn -= 1;
                    break;
                }
                let mut y = self.at(nn - 1, nn - 1);
                let mut w = self.at(nn, nn - 1) * self.at(nn - 1, nn);
                if l == nn - 1 {
                    let p = 0.5 * (y - x);
                    let q = p * p + w;
                    let mut z = q.abs().sqrt();
                    x += t;
                    if q >= 0.0 {
                        z = p + z.copysign(p);
                        wr[nn - 1] = x + z;
                        wr[nn] = x + z;
                        if z != 0.0 {
                            wr[nn] = x - w / z;
                        }
                        wi[nn - 1] = 0.0;
                        wi[nn] = 0.0;
                    } else {
                        wr[nn - 1] = x + p;
                        wr[nn] = x + p;
                        wi[nn - 1] = -z;
                        wi[nn] = z;
                    }
                    nn -= 2;
                    break;
                }

                total += 1;
                if total > max_total {
                    return Err(Error::EigenNoConvergence);
                }
                if its > 0 && its % 10 == 0 {
                    // exceptional shift
                    t += x;
                    for i in 1..=nn {
                        *self.at_mut(i, i) -= x;
                    }
                    let s = self.at(nn, nn - 1).abs() + self.at(nn - 1, nn - 2).abs();
                    x = 0.75 * s;
                    y = x;
                    w = -0.4375 * s * s;
                }
                its += 1;

                let (mut p, mut q, mut r);
                let mut m = nn - 2;
                loop {
                    let z = self.at(m, m);
                    let rr = x - z;
                    let ss = y - z;
                    p = (rr * ss - w) / self.at(m + 1, m) + self.at(m, m + 1);
                    q = self.at(m + 1, m + 1) - z - rr - ss;
                    r = self.at(m + 2, m + 1);
                    let s = p.abs() + q.abs() + r.abs();
                    p /= s;
                    q /= s;
                    r /= s;
                    if m == l {
                        break;
                    }
                    let u = self.at(m, m - 1).abs() * (q.abs() + r.abs());
                    let v = p.abs()
                        * (self.at(m - 1, m - 1).abs() + z.abs() + self.at(m + 1, m + 1).abs());
                    if u + v == v {
                        break;
                    }
                    m -= 1;
                }
                for i in (m + 2)..=nn {
                    *self.at_mut(i, i - 2) = 0.0;
                    if i != m + 2 {
                        *self.at_mut(i, i - 3) = 0.0;
                    }
                }
                let mut k = m;
                while k < nn {
                    if k != m {
                        p = self.at(k, k - 1);
                        q = self.at(k + 1, k - 1);
                        r = if k != nn - 1 { self.at(k + 2, k - 1) } else { 0.0 };
                        x = p.abs() + q.abs() + r.abs();
                        if x != 0.0 {
                            p /= x;
                            q /= x;
                            r /= x;
                        }
                    }
                    let s = (p * p + q * q + r * r).sqrt().copysign(p);
                    if s != 0.0 {
                        if k == m {
                            if l != m {
                                *self.at_mut(k, k - 1) = -self.at(k, k - 1);
                            }
                        } else {
                            *self.at_mut(k, k - 1) = -s * x;
                        }
                        p += s;
                        x = p / s;
                        y = q / s;
                        let z = r / s;
                        q /= p;
                        r /= p;
                        for j in k..=nn {
                            let mut pp = self.at(k, j) + q * self.at(k + 1, j);
                            if k != nn - 1 {
                                pp += r * self.at(k + 2, j);
                                *self.at_mut(k + 2, j) -= pp * z;
                            }
                            *self.at_mut(k + 1, j) -= pp * y;
                            *self.at_mut(k, j) -= pp * x;
                        }
                        let mmin = nn.min(k + 3);
                        for i in l..=mmin {
                            let mut pp = x * self.at(i, k) + y * self.at(i, k + 1);
                            if k != nn - 1 {
                                pp += z * self.at(i, k + 2);
                                *self.at_mut(i, k + 2) -= pp * r;
                            }
                            *self.at_mut(i, k + 1) -= pp * q;
                            *self.at_mut(i, k) -= pp;
                        }
                    }
                    k += 1;
                }
                if l >= nn - 1 {
                    break;
                }
            }
        }

        Ok((1..=n).map(|i| Complex64::new(wr[i], wi[i])).collect())
    }
}

/// All eigenvalues of a square real matrix, with multiplicity.
///
/// Fails with [`Error::EigenNoConvergence`] when the QR sweep exceeds
/// `100 * n` iterations.
pub fn eigenvalues(matrix: &DenseMatrix) -> Result<Vec<Complex64>> {
    if !matrix.is_square() {
        return Err(Error::DimensionMismatch {
            context: "eigenvalues (square matrix)",
            expected: matrix.rows(),
            found: matrix.cols(),
        });
    }
    let n = matrix.rows();
    match n {
        0 => return Ok(Vec::new()),
        1 => return Ok(vec![Complex64::new(matrix[(0, 0)], 0.0)]),
        _ => {}
    }
    if matrix.as_slice().iter().any(|x| !x.is_finite()) {
        return Err(Error::EigenNoConvergence);
    }
    let mut work = Work::new(matrix);
    work.balance();
    work.to_hessenberg();
    work.hqr(100 * n.max(3))
}
