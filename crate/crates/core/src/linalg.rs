//! Dense complex linear algebra for the small systems that appear in
//! recovery: Householder-QR least squares and Hermitian eigenvalues (via
//! the equivalent real symmetric problem) for singular values and
//! condition numbers. Matrices here are at most tens of rows/columns.

use num_complex::Complex64;

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| {
            if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }
        })
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn matmul(&self, other: &CMat) -> CMat {
        assert_eq!(self.cols, other.rows);
        let mut out = CMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                let brow = other.row(k);
                let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn hermitian(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self.at(j, i).conj())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Select a subset of columns, in the given order.
    pub fn select_cols(&self, cols: &[usize]) -> CMat {
        CMat::from_fn(self.rows, cols.len(), |i, j| self.at(i, cols[j]))
    }
}

/// Eigenvalues of a real symmetric matrix by cyclic Jacobi. `a` is
/// consumed as scratch. Returns eigenvalues in ascending order.
fn symmetric_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    let total: f64 = a.iter().flatten().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off < total * 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

/// Eigenvalues of a Hermitian matrix `h` (ascending). Uses the real
/// embedding `[[Re, -Im], [Im, Re]]`, whose spectrum is that of `h` with
/// every eigenvalue doubled.
pub fn hermitian_eigenvalues(h: &CMat) -> Vec<f64> {
    assert_eq!(h.rows, h.cols);
    let n = h.rows;
    let mut m = vec![vec![0.0; 2 * n]; 2 * n];
    for i in 0..n {
        for j in 0..n {
            let v = h.at(i, j);
            m[i][j] = v.re;
            m[n + i][n + j] = v.re;
            m[i][n + j] = -v.im;
            m[n + i][j] = v.im;
        }
    }
    let ev = symmetric_eigenvalues(m);
    // Each eigenvalue appears twice; take every other one.
    ev.into_iter().step_by(2).collect()
}

/// Singular values of `a` (ascending), via the eigenvalues of `aᴴa`.
pub fn singular_values(a: &CMat) -> Vec<f64> {
    let gram = a.hermitian().matmul(a);
    hermitian_eigenvalues(&gram).into_iter().map(|l| l.max(0.0).sqrt()).collect()
}

/// 2-norm condition number `σ_max / σ_min`.
pub fn cond(a: &CMat) -> f64 {
    let sv = singular_values(a);
    let smin = sv.first().copied().unwrap_or(0.0);
    let smax = sv.last().copied().unwrap_or(0.0);
    if smin <= 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Householder-QR least-squares factorization of an m×n matrix (m ≥ n,
/// full column rank assumed; callers gate on `cond` first).
pub struct Lstsq {
    qr: CMat,
    /// Householder scalar per reflector.
    tau: Vec<Complex64>,
}

impl Lstsq {
    pub fn new(a: &CMat) -> Self {
        assert!(a.rows >= a.cols, "least squares needs rows >= cols");
        let m = a.rows;
        let n = a.cols;
        let mut qr = a.clone();
        let mut tau = Vec::with_capacity(n);
        for k in 0..n {
            // Build reflector for column k below the diagonal.
            let mut norm2 = 0.0;
            for i in k..m {
                norm2 += qr.at(i, k).norm_sqr();
            }
            let norm = norm2.sqrt();
            if norm == 0.0 {
                tau.push(Complex64::new(0.0, 0.0));
                continue;
            }
            let x0 = qr.at(k, k);
            let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { Complex64::new(1.0, 0.0) };
            let alpha = -phase * norm;
            // v = x - alpha*e1, normalized so v[0] = 1.
            let v0 = x0 - alpha;
            if v0.norm() == 0.0 {
                tau.push(Complex64::new(0.0, 0.0));
                qr.set(k, k, alpha);
                continue;
            }
            let mut vnorm2 = v0.norm_sqr();
            for i in (k + 1)..m {
                vnorm2 += qr.at(i, k).norm_sqr();
            }
            let t = 2.0 * v0.norm_sqr() / vnorm2;
            let tau_k = Complex64::new(t, 0.0);
            // Store v (scaled so v[0]=1) in the column below the diagonal.
            for i in (k + 1)..m {
                let v = qr.at(i, k) / v0;
                qr.set(i, k, v);
            }
            qr.set(k, k, alpha);
            tau.push(tau_k);
            // Apply reflector to remaining columns: A -= tau * v (vᴴ A).
            for j in (k + 1)..n {
                let mut dot = qr.at(k, j); // v[0] = 1
                for i in (k + 1)..m {
                    dot += qr.at(i, k).conj() * qr.at(i, j);
                }
                let f = tau_k * dot;
                qr.set(k, j, qr.at(k, j) - f);
                for i in (k + 1)..m {
                    let upd = qr.at(i, j) - f * qr.at(i, k);
                    qr.set(i, j, upd);
                }
            }
        }
        Self { qr, tau }
    }

    /// Solve `min ‖b − A x‖` column-wise for a matrix right-hand side.
    pub fn solve_mat(&self, b: &CMat) -> CMat {
        assert_eq!(b.rows, self.qr.rows);
        let m = self.qr.rows;
        let n = self.qr.cols;
        let k_cols = b.cols;
        let mut work = b.clone();
        // Apply Qᴴ to every column of b.
        for k in 0..n {
            let tau_k = self.tau[k];
            if tau_k.norm_sqr() == 0.0 {
                continue;
            }
            for j in 0..k_cols {
                let mut dot = work.at(k, j);
                for i in (k + 1)..m {
                    dot += self.qr.at(i, k).conj() * work.at(i, j);
                }
                let f = tau_k * dot;
                work.set(k, j, work.at(k, j) - f);
                for i in (k + 1)..m {
                    let upd = work.at(i, j) - f * self.qr.at(i, k);
                    work.set(i, j, upd);
                }
            }
        }
        // Back-substitute R x = (Qᴴ b)[0..n].
        let mut x = CMat::zeros(n, k_cols);
        for j in 0..k_cols {
            for i in (0..n).rev() {
                let mut acc = work.at(i, j);
                for l in (i + 1)..n {
                    acc -= self.qr.at(i, l) * x.at(l, j);
                }
                x.set(i, j, acc / self.qr.at(i, i));
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn randc(rng: &mut impl rand::Rng) -> Complex64 {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    }

    #[test]
    fn lstsq_recovers_exact_solution() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        for _ in 0..50 {
            let m = 8;
            let n = 5;
            let a = CMat::from_fn(m, n, |_, _| randc(&mut rng));
            let x_true = CMat::from_fn(n, 3, |_, _| randc(&mut rng));
            let b = a.matmul(&x_true);
            let x = Lstsq::new(&a).solve_mat(&b);
            for i in 0..n {
                for j in 0..3 {
                    let d = (x.at(i, j) - x_true.at(i, j)).norm();
                    assert!(d < 1e-10, "lstsq error {d}");
                }
            }
        }
    }

    #[test]
    fn lstsq_residual_orthogonal_to_range() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        let a = CMat::from_fn(10, 4, |_, _| randc(&mut rng));
        let b = CMat::from_fn(10, 2, |_, _| randc(&mut rng));
        let x = Lstsq::new(&a).solve_mat(&b);
        let ax = a.matmul(&x);
        let resid = CMat::from_fn(10, 2, |i, j| b.at(i, j) - ax.at(i, j));
        // Normal equations: Aᴴ r = 0 at the minimizer.
        let proj = a.hermitian().matmul(&resid);
        assert!(proj.frobenius_norm() < 1e-10);
    }

    #[test]
    fn hermitian_eigenvalues_match_known_matrix() {
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3.
        let mut h = CMat::zeros(2, 2);
        h.set(0, 0, Complex64::new(2.0, 0.0));
        h.set(0, 1, Complex64::new(0.0, 1.0));
        h.set(1, 0, Complex64::new(0.0, -1.0));
        h.set(1, 1, Complex64::new(2.0, 0.0));
        let ev = hermitian_eigenvalues(&h);
        assert!((ev[0] - 1.0).abs() < 1e-12);
        assert!((ev[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn singular_values_of_unitary_scaled() {
        // DFT-like matrix: rows orthogonal, all singular values equal.
        let n = 4;
        let a = CMat::from_fn(n, n, |i, j| {
            Complex64::from_polar(0.5, -std::f64::consts::TAU * (i * j) as f64 / n as f64)
        });
        let sv = singular_values(&a);
        for s in sv {
            assert!((s - 1.0).abs() < 1e-12, "sv {s}");
        }
        assert!((cond(&a) - 1.0).abs() < 1e-10);
    }
}
