//! Finite-difference oracle for the infidelity gradient, evaluated in
//! double-double arithmetic (about 32 significant digits).
//!
//! In plain f64 the infidelity carries ~1e-14 of rounding noise, which a
//! central difference with eps = 1e-6 turns into ~1e-8 of absolute noise per
//! component. Here the step exponentials, products and fidelity are all
//! carried in double-double, so the quotient resolves the derivative itself
//! and its only error is the O(eps^2) truncation of the stencil.

#![allow(dead_code)]

use std::ops::{Add, Mul, Neg, Sub};

use czgate_core::control::{cz_fidelity, trace_weights};
use czgate_core::numerics::{ComplexMatrix, C64};
use czgate_core::GateModel;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dd {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn div_f64(self, d: f64) -> Self {
        let q1 = self.hi / d;
        let p = Dd::new(q1) * Dd::new(d);
        let r = self - p;
        let q2 = (r.hi + r.lo) / d;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        let s = self.hi.sqrt();
        let r = self - Dd::new(s) * Dd::new(s);
        let (hi, lo) = quick_two_sum(s, r.to_f64() / (2.0 * s));
        Dd { hi, lo }
    }

    pub fn recip(self) -> Self {
        Dd::ONE.div_dd(self)
    }

    pub fn div_dd(self, d: Dd) -> Self {
        let q1 = self.hi / d.hi;
        let r = self - d * Dd::new(q1);
        let q2 = r.hi / d.hi;
        let r = r - d * Dd::new(q2);
        let q3 = r.hi / d.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::new(q3)
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        let (hi, lo) = quick_two_sum(p, e + (self.hi * o.lo + self.lo * o.hi));
        Dd { hi, lo }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Cd {
    pub re: Dd,
    pub im: Dd,
}

impl Cd {
    pub const ZERO: Cd = Cd { re: Dd::ZERO, im: Dd::ZERO };

    pub fn from_c64(z: C64) -> Self {
        Cd { re: Dd::new(z.re), im: Dd::new(z.im) }
    }

    pub fn to_c64(self) -> C64 {
        C64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn norm_sqr(self) -> Dd {
        self.re * self.re + self.im * self.im
    }

    pub fn scale(self, s: Dd) -> Cd {
        Cd { re: self.re * s, im: self.im * s }
    }
}

impl Add for Cd {
    type Output = Cd;
    fn add(self, o: Cd) -> Cd {
        Cd { re: self.re + o.re, im: self.im + o.im }
    }
}

impl Mul for Cd {
    type Output = Cd;
    fn mul(self, o: Cd) -> Cd {
        Cd { re: self.re * o.re - self.im * o.im, im: self.re * o.im + self.im * o.re }
    }
}

/// Dense row-major double-double complex matrix.
#[derive(Clone, Debug)]
pub struct CdMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Cd>,
}

impl CdMatrix {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Cd) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| if r == c { Cd { re: Dd::ONE, im: Dd::ZERO } } else { Cd::ZERO })
    }

    pub fn at(&self, r: usize, c: usize) -> Cd {
        self.data[r * self.cols + c]
    }

    pub fn matmul(&self, rhs: &CdMatrix) -> CdMatrix {
        assert_eq!(self.cols, rhs.rows);
        let mut out = vec![Cd::ZERO; self.rows * rhs.cols];
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == Cd::ZERO {
                    continue;
                }
                for c in 0..rhs.cols {
                    let o = &mut out[r * rhs.cols + c];
                    *o = *o + a * rhs.data[k * rhs.cols + c];
                }
            }
        }
        CdMatrix { rows: self.rows, cols: rhs.cols, data: out }
    }

    pub fn select(&self, rows: &[usize], cols: &[usize]) -> CdMatrix {
        CdMatrix::from_fn(rows.len(), cols.len(), |r, c| self.at(rows[r], cols[c]))
    }

    pub fn to_complex(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.rows, self.cols, |r, c| self.at(r, c).to_c64())
    }

    fn one_norm(&self) -> f64 {
        (0..self.cols)
            .map(|c| (0..self.rows).map(|r| self.at(r, c).to_c64().norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// `exp(-i (S + wc N) dt)` by scaling, Taylor series and squaring. `wc` is a
/// double-double so that `w +- eps` is represented exactly.
pub fn step_unitary(model: &GateModel, wc: Dd, dt: f64) -> CdMatrix {
    let s = model.hamiltonian(0.0);
    let n = model.coupler_number();
    let d = model.dim();
    // A = -i H dt
    let a = CdMatrix::from_fn(d, d, |r, c| {
        let h = Cd::from_c64(s[(r, c)]) + Cd::from_c64(n[(r, c)]).scale(wc);
        let h = h.scale(Dd::new(dt));
        Cd { re: h.im, im: -h.re }
    });
    let norm = a.one_norm();
    let squarings = if norm > 0.25 { (norm / 0.25).log2().ceil() as u32 } else { 0 };
    let scale = Dd::new(0.5f64.powi(squarings as i32));
    let a = CdMatrix { data: a.data.iter().map(|z| z.scale(scale)).collect(), ..a };
    // Horner: I + A (I + A/2 (I + A/3 (...)))
    const TERMS: usize = 30;
    let mut acc = CdMatrix::identity(d);
    for k in (1..=TERMS).rev() {
        let mut t = a.matmul(&acc);
        for z in &mut t.data {
            *z = Cd { re: z.re.div_f64(k as f64), im: z.im.div_f64(k as f64) };
        }
        for i in 0..d {
            let z = &mut t.data[i * d + i];
            z.re = z.re + Dd::ONE;
        }
        acc = t;
    }
    for _ in 0..squarings {
        acc = acc.matmul(&acc);
    }
    acc
}

/// Double-double fidelity of a 4x4 block at phases optimized by the f64
/// search. The phases only enter at second order at the optimum.
pub fn fidelity(u: &CdMatrix) -> Dd {
    let f = cz_fidelity(&u.to_complex());
    let w = trace_weights(f.beta1, f.beta2);
    let mut frob = Dd::ZERO;
    for r in 0..4 {
        for c in 0..4 {
            frob = frob + u.at(r, c).norm_sqr();
        }
    }
    let mut tr = Cd::ZERO;
    for (j, wj) in w.iter().enumerate() {
        // Renormalize the f64 weight so |w| = 1 holds in double-double.
        let wj = Cd::from_c64(*wj);
        let wj = wj.scale(wj.norm_sqr().sqrt().recip());
        tr = tr + wj * u.at(j, j);
    }
    (frob + tr.norm_sqr()).div_f64(20.0)
}

/// Central-difference gradient of `1 - F` with step `eps` (GHz) in every
/// component, each evaluation carried in double-double.
pub fn fd_gradient(model: &GateModel, values: &[f64], step_len: f64, eps: f64) -> Vec<f64> {
    let comp: Vec<usize> = model.computational_columns().to_vec();
    let d = model.dim();
    let all: Vec<usize> = (0..d).collect();
    let steps: Vec<CdMatrix> = values.iter().map(|&v| step_unitary(model, Dd::new(v), step_len)).collect();
    let n = steps.len();
    // prefix[k] = U_{k-1} ... U_0 restricted to computational columns
    let mut prefix = vec![CdMatrix::identity(d).select(&all, &comp)];
    for u in &steps {
        prefix.push(u.matmul(prefix.last().unwrap()));
    }
    // suffix[k] = rows of U_{n-1} ... U_{k+1}
    let mut suffix = vec![CdMatrix::identity(d).select(&comp, &all); n];
    for k in (0..n.saturating_sub(1)).rev() {
        suffix[k] = suffix[k + 1].matmul(&steps[k + 1]);
    }
    let eps_dd = Dd::new(eps);
    (0..n)
        .map(|k| {
            let at = |w: Dd| {
                let u = step_unitary(model, w, step_len);
                let block = suffix[k].matmul(&u).matmul(&prefix[k]);
                Dd::ONE - fidelity(&block)
            };
            let v = Dd::new(values[k]);
            let diff = at(v + eps_dd) - at(v - eps_dd);
            diff.div_f64(2.0 * eps).to_f64()
        })
        .collect()
}
