//! Dense complex linear algebra: Hermitian eigendecomposition, the unitary
//! propagator `exp(-i H dt)` and its directional (Fréchet) derivative.
//!
//! Everything here is dense and allocation-happy. The largest matrices in
//! this crate are 125 x 125 (five levels per transmon), so no attempt is made
//! to exploit sparsity or block structure.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Row-major dense complex matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(precondition(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(precondition("matrix entries must be finite"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Sum of squared moduli, i.e. `Tr(A^dagger A)`.
    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `max |a_ij - b_ij|`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// `max |H - H^dagger|`; infinite for non-square input.
    pub fn hermiticity_residual(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0_f64;
        for r in 0..self.rows {
            for c in r..self.cols {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst
    }

    /// `max |U^dagger U - I|`.
    pub fn unitarity_residual(&self) -> f64 {
        let g = self.adjoint_mul(self);
        g.max_abs_diff(&Self::identity(self.cols))
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self^dagger * rhs` without materializing the adjoint.
    pub fn adjoint_mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.rows, rhs.rows, "adjoint_mul shape mismatch");
        let mut out = Self::zeros(self.cols, rhs.cols);
        for k in 0..self.rows {
            let lhs_row = self.row(k);
            let rhs_row = rhs.row(k);
            for (i, a) in lhs_row.iter().enumerate() {
                let a = a.conj();
                if a == ZERO {
                    continue;
                }
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * rhs^dagger` without materializing the adjoint.
    pub fn mul_adjoint(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.cols, "mul_adjoint shape mismatch");
        Self::from_fn(self.rows, rhs.rows, |i, j| {
            self.row(i).iter().zip(rhs.row(j)).map(|(a, b)| a * b.conj()).sum()
        })
    }

    /// Column subset, in the given order.
    pub fn select_cols(&self, cols: &[usize]) -> Self {
        Self::from_fn(self.rows, cols.len(), |r, c| self[(r, cols[c])])
    }

    /// Row subset, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self::from_fn(rows.len(), self.cols, |r, c| self[(rows[r], c)])
    }

    /// Elementwise (Hadamard) product.
    pub fn hadamard(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a * b).collect(),
        }
    }

    /// `self + s * rhs`.
    pub fn add_scaled(&self, rhs: &Self, s: f64) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b * s).collect(),
        }
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.add_scaled(rhs, 1.0)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.add_scaled(rhs, -1.0)
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for z in self.row(r) {
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Eigendecomposition `H = V diag(lambda) V^dagger` of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermEig {
    /// Ascending.
    pub values: Vec<f64>,
    /// Columns are eigenvectors.
    pub vectors: ComplexMatrix,
}

impl HermEig {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `V diag(lambda) V^dagger`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.dim();
        let scaled = ComplexMatrix::from_fn(n, n, |r, c| self.vectors[(r, c)] * self.values[c]);
        scaled.mul_adjoint(&self.vectors)
    }

    /// `exp(-i H dt)` from the stored decomposition.
    pub fn unitary(&self, dt: f64) -> ComplexMatrix {
        let n = self.dim();
        let phases: Vec<C64> = self.values.iter().map(|&l| C64::from_polar(1.0, -l * dt)).collect();
        let scaled = ComplexMatrix::from_fn(n, n, |r, c| self.vectors[(r, c)] * phases[c]);
        scaled.mul_adjoint(&self.vectors)
    }

    /// Divided-difference weights of `exp(-i x dt)` on the spectrum; the
    /// directional derivative is `V ((V^dagger dH V) o W) V^dagger`.
    pub fn frechet_weights(&self, dt: f64) -> ComplexMatrix {
        let n = self.dim();
        let scale = self.values.iter().fold(0.0_f64, |m, l| m.max(l.abs()));
        let tol = 1e-9 * scale;
        ComplexMatrix::from_fn(n, n, |a, b| {
            let (la, lb) = (self.values[a], self.values[b]);
            let gap = la - lb;
            if gap.abs() <= tol {
                -I * dt * C64::from_polar(1.0, -la * dt)
            } else {
                // (e^{-i la dt} - e^{-i lb dt}) / (la - lb), written as a
                // sinc so that nearly-degenerate pairs keep full precision.
                let half = 0.5 * gap * dt;
                let sinc = half.sin() / half;
                -I * dt * C64::from_polar(sinc, -0.5 * (la + lb) * dt)
            }
        })
    }

    /// Fréchet derivative of `exp(-i H dt)` along `dh` (given in the original basis).
    pub fn frechet(&self, dh: &ComplexMatrix, dt: f64) -> Result<ComplexMatrix> {
        if dh.rows() != self.dim() || dh.cols() != self.dim() {
            return Err(precondition(format!(
                "direction is {}x{}, expected {}x{}",
                dh.rows(),
                dh.cols(),
                self.dim(),
                self.dim()
            )));
        }
        let rotated = self.vectors.adjoint_mul(dh).matmul(&self.vectors);
        let inner = rotated.hadamard(&self.frechet_weights(dt));
        Ok(self.vectors.matmul(&inner).mul_adjoint(&self.vectors))
    }
}

/// Eigendecomposition of a Hermitian matrix via Householder reduction to a
/// real tridiagonal form followed by implicit-shift QL.
pub fn herm_eig(h: &ComplexMatrix) -> Result<HermEig> {
    if !h.is_square() {
        return Err(precondition(format!("herm_eig needs a square matrix, got {}x{}", h.rows(), h.cols())));
    }
    let residual = h.hermiticity_residual();
    if !(residual < 1e-9) {
        return Err(precondition(format!("matrix is not Hermitian (residual {residual:.3e})")));
    }
    let n = h.rows();
    if n == 0 {
        return Ok(HermEig { values: Vec::new(), vectors: ComplexMatrix::zeros(0, 0) });
    }

    let (diag, offdiag, q) = tridiagonalize(h);

    // Unitary diagonal phase that makes the sub-diagonal real and non-negative.
    let mut phase = vec![ONE; n];
    let mut sub = vec![0.0; n];
    for k in 0..n - 1 {
        let e = offdiag[k];
        let r = e.norm();
        sub[k] = r;
        phase[k + 1] = if r > 0.0 { phase[k] * (e / r) } else { phase[k] };
    }

    let mut d = diag;
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    tql_implicit(&mut d, &mut sub, &mut z, n)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));

    // V = Q * diag(phase) * Z, columns permuted into ascending order.
    let qd = ComplexMatrix::from_fn(n, n, |r, c| q[(r, c)] * phase[c]);
    let zc = ComplexMatrix::from_fn(n, n, |r, c| C64::new(z[r * n + order[c]], 0.0));
    let vectors = qd.matmul(&zc);
    let values = order.iter().map(|&i| d[i]).collect();
    Ok(HermEig { values, vectors })
}

/// Householder reduction `Q^dagger H Q = T` with `T` Hermitian tridiagonal.
/// Returns the (real) diagonal, the complex sub-diagonal `T[k+1, k]` and `Q`.
fn tridiagonalize(h: &ComplexMatrix) -> (Vec<f64>, Vec<C64>, ComplexMatrix) {
    let n = h.rows();
    let mut a = h.clone();
    let mut q = ComplexMatrix::identity(n);
    let mut v = vec![ZERO; n];
    let mut p = vec![ZERO; n];

    for k in 0..n.saturating_sub(2) {
        let norm: f64 = (k + 1..n).map(|i| a[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = a[(k + 1, k)];
        let unit = if x0.norm() > 0.0 { x0 / x0.norm() } else { ONE };
        let alpha = -unit * norm;

        v.iter_mut().for_each(|z| *z = ZERO);
        for i in k + 1..n {
            v[i] = a[(i, k)];
        }
        v[k + 1] -= alpha;
        let vnorm_sq: f64 = v[k + 1..].iter().map(|z| z.norm_sqr()).sum();
        if vnorm_sq == 0.0 {
            continue;
        }
        let beta = 2.0 / vnorm_sq;

        // p = beta * A v over the active block.
        for i in k..n {
            let row = a.row(i);
            p[i] = (k + 1..n).map(|j| row[j] * v[j]).sum::<C64>() * beta;
        }
        for z in p.iter_mut().take(k) {
            *z = ZERO;
        }
        let kappa = 0.5 * beta * (k + 1..n).map(|i| v[i].conj() * p[i]).sum::<C64>().re;
        for i in k..n {
            p[i] -= v[i] * kappa;
        }
        // A <- A - v p^dagger - p v^dagger.
        for i in k..n {
            for j in k..n {
                let delta = v[i] * p[j].conj() + p[i] * v[j].conj();
                a[(i, j)] -= delta;
            }
        }
        // Q <- Q (I - beta v v^dagger).
        for r in 0..n {
            let qv: C64 = (k + 1..n).map(|j| q[(r, j)] * v[j]).sum::<C64>() * beta;
            for j in k + 1..n {
                let delta = qv * v[j].conj();
                q[(r, j)] -= delta;
            }
        }
    }

    let diag = (0..n).map(|i| a[(i, i)].re).collect();
    let offdiag = (0..n).map(|i| if i + 1 < n { a[(i + 1, i)] } else { ZERO }).collect();
    (diag, offdiag, q)
}

/// Implicit-shift QL on a real symmetric tridiagonal matrix. `e[i]` couples
/// rows `i` and `i + 1`; `z` (row-major, n x n) accumulates the rotations.
fn tql_implicit(d: &mut [f64], e: &mut [f64], z: &mut [f64], n: usize) -> Result<()> {
    let cap = 30 * n;
    let mut total = 0usize;
    if n > 0 {
        e[n - 1] = 0.0;
    }
    for l in 0..n {
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            total += 1;
            if total > cap {
                return Err(Error::NoConvergence { iterations: total });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0_f64, 1.0_f64, 0.0_f64);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    let row = k * n;
                    let zf = z[row + i + 1];
                    z[row + i + 1] = s * z[row + i] + c * zf;
                    z[row + i] = c * z[row + i] - s * zf;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// `exp(-i H dt)` for Hermitian `H`.
pub fn unitary_step(h: &ComplexMatrix, dt: f64) -> Result<ComplexMatrix> {
    if !(dt >= 0.0) {
        return Err(precondition(format!("time step must be non-negative, got {dt}")));
    }
    Ok(herm_eig(h)?.unitary(dt))
}

/// Directional derivative of `exp(-i H dt)` along `dh`.
pub fn expm_frechet(h: &ComplexMatrix, dh: &ComplexMatrix, dt: f64) -> Result<ComplexMatrix> {
    if (h.rows(), h.cols()) != (dh.rows(), dh.cols()) {
        return Err(precondition(format!(
            "H is {}x{} but dH is {}x{}",
            h.rows(),
            h.cols(),
            dh.rows(),
            dh.cols()
        )));
    }
    herm_eig(h)?.frechet(dh, dt)
}
