//! Matrix-valued polynomial fields on the plane and composed field expressions.
//!
//! `PolyField` stores p(x, y) = sum c_ij x^i y^j with complex matrix
//! coefficients (1x1 for scalars). Evaluation and partial derivatives of any
//! order are exact, so every field extends canonically past the disk boundary
//! and derivative-based identity checks carry no finite-difference noise.
//!
//! `FieldExpr` composes polynomial fields through products, sums and pointwise
//! inverses while keeping exact first partials (product and inverse rules).
//! Gauge-transformed connections are rational in general and live here.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone)]
struct Term {
    i: u32,
    j: u32,
    coeff: CMat,
}

/// Bivariate polynomial with n x m complex matrix coefficients.
#[derive(Debug, Clone)]
pub struct PolyField {
    rows: usize,
    cols: usize,
    terms: Vec<Term>,
}

impl PolyField {
    pub fn new(rows: usize, cols: usize, terms: Vec<(u32, u32, CMat)>) -> Result<Self> {
        for (_, _, c) in &terms {
            if c.nrows() != rows || c.ncols() != cols {
                return Err(Error::ShapeMismatch(format!(
                    "coefficient is {}x{}, field is {}x{}",
                    c.nrows(),
                    c.ncols(),
                    rows,
                    cols
                )));
            }
        }
        let mut f = PolyField {
            rows,
            cols,
            terms: terms
                .into_iter()
                .map(|(i, j, coeff)| Term { i, j, coeff })
                .collect(),
        };
        f.normalize();
        Ok(f)
    }

    /// Scalar field from real monomial coefficients.
    pub fn scalar_real(terms: &[(u32, u32, f64)]) -> Self {
        let t = terms
            .iter()
            .map(|&(i, j, c)| (i, j, CMat::from_element(1, 1, Complex64::new(c, 0.0))))
            .collect();
        Self::new(1, 1, t).expect("1x1 coefficients")
    }

    /// Scalar field from complex monomial coefficients.
    pub fn scalar(terms: &[(u32, u32, Complex64)]) -> Self {
        let t = terms
            .iter()
            .map(|&(i, j, c)| (i, j, CMat::from_element(1, 1, c)))
            .collect();
        Self::new(1, 1, t).expect("1x1 coefficients")
    }

    pub fn constant(m: CMat) -> Self {
        let (r, c) = (m.nrows(), m.ncols());
        Self::new(r, c, vec![(0, 0, m)]).expect("constant")
    }

    pub fn zero(rows: usize, cols: usize) -> Self {
        PolyField {
            rows,
            cols,
            terms: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(CMat::identity(n, n))
    }

    /// Boundary defining function rho(x, y) = radius^2 - x^2 - y^2 as a scalar field.
    pub fn boundary_defining(radius: f64) -> Self {
        Self::scalar_real(&[(0, 0, radius * radius), (2, 0, -1.0), (0, 2, -1.0)])
    }

    fn normalize(&mut self) {
        self.terms.sort_by_key(|t| (t.i, t.j));
        let mut merged: Vec<Term> = Vec::with_capacity(self.terms.len());
        for t in self.terms.drain(..) {
            match merged.last_mut() {
                Some(last) if last.i == t.i && last.j == t.j => last.coeff += &t.coeff,
                _ => merged.push(t),
            }
        }
        merged.retain(|t| t.coeff.iter().any(|c| c.norm_sqr() != 0.0));
        self.terms = merged;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_scalar(&self) -> bool {
        self.rows == 1 && self.cols == 1
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree bound.
    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|t| t.i + t.j).max().unwrap_or(0)
    }

    /// True when every coefficient entry has zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.coeff.iter().all(|c| c.im == 0.0))
    }

    pub fn eval(&self, x: f64, y: f64) -> CMat {
        let mut out = CMat::zeros(self.rows, self.cols);
        self.add_scaled_into(x, y, Complex64::new(1.0, 0.0), &mut out);
        out
    }

    /// out += scale * p(x, y), no allocation.
    pub fn add_scaled_into(&self, x: f64, y: f64, scale: Complex64, out: &mut CMat) {
        for t in &self.terms {
            let w = scale * mono(x, t.i) * mono(y, t.j);
            out.zip_apply(&t.coeff, |o, c| *o += w * c);
        }
    }

    pub fn eval_scalar(&self, x: f64, y: f64) -> Complex64 {
        debug_assert!(self.is_scalar());
        let mut acc = ZERO;
        for t in &self.terms {
            acc += t.coeff[(0, 0)] * mono(x, t.i) * mono(y, t.j);
        }
        acc
    }

    pub fn eval_real(&self, x: f64, y: f64) -> f64 {
        debug_assert!(self.is_scalar());
        let mut acc = 0.0;
        for t in &self.terms {
            acc += t.coeff[(0, 0)].re * mono(x, t.i) * mono(y, t.j);
        }
        acc
    }

    /// Exact partial derivative d^(a+b) p / dx^a dy^b as a new field.
    pub fn deriv(&self, a: u32, b: u32) -> PolyField {
        let mut terms = Vec::new();
        for t in &self.terms {
            if t.i < a || t.j < b {
                continue;
            }
            let mut f = 1.0;
            for k in 0..a {
                f *= (t.i - k) as f64;
            }
            for k in 0..b {
                f *= (t.j - k) as f64;
            }
            terms.push(Term {
                i: t.i - a,
                j: t.j - b,
                coeff: &t.coeff * Complex64::new(f, 0.0),
            });
        }
        let mut out = PolyField {
            rows: self.rows,
            cols: self.cols,
            terms,
        };
        out.normalize();
        out
    }

    pub fn dx(&self) -> PolyField {
        self.deriv(1, 0)
    }

    pub fn dy(&self) -> PolyField {
        self.deriv(0, 1)
    }

    /// Value of a partial derivative without materializing the derivative field.
    pub fn eval_deriv_scalar(&self, x: f64, y: f64, a: u32, b: u32) -> Complex64 {
        debug_assert!(self.is_scalar());
        let mut acc = ZERO;
        for t in &self.terms {
            if t.i < a || t.j < b {
                continue;
            }
            let mut f = 1.0;
            for k in 0..a {
                f *= (t.i - k) as f64;
            }
            for k in 0..b {
                f *= (t.j - k) as f64;
            }
            acc += t.coeff[(0, 0)] * f * mono(x, t.i - a) * mono(y, t.j - b);
        }
        acc
    }

    pub fn eval_deriv_real(&self, x: f64, y: f64, a: u32, b: u32) -> f64 {
        self.eval_deriv_scalar(x, y, a, b).re
    }

    pub fn scale(&self, s: Complex64) -> PolyField {
        let terms = self
            .terms
            .iter()
            .map(|t| Term {
                i: t.i,
                j: t.j,
                coeff: &t.coeff * s,
            })
            .collect();
        PolyField {
            rows: self.rows,
            cols: self.cols,
            terms,
        }
    }

    pub fn add(&self, other: &PolyField) -> Result<PolyField> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::ShapeMismatch("polynomial add".into()));
        }
        let mut terms: Vec<(u32, u32, CMat)> = Vec::new();
        for t in self.terms.iter().chain(other.terms.iter()) {
            terms.push((t.i, t.j, t.coeff.clone()));
        }
        PolyField::new(self.rows, self.cols, terms)
    }

    pub fn sub(&self, other: &PolyField) -> Result<PolyField> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Matrix product of two polynomial fields (monomial convolution).
    pub fn mul(&self, other: &PolyField) -> Result<PolyField> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "polynomial mul: {}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                terms.push((a.i + b.i, a.j + b.j, &a.coeff * &b.coeff));
            }
        }
        PolyField::new(self.rows, other.cols, terms)
    }

    /// Coefficient-wise complex conjugate; equals pointwise conjugation for real (x, y).
    pub fn conj(&self) -> PolyField {
        let terms = self
            .terms
            .iter()
            .map(|t| Term {
                i: t.i,
                j: t.j,
                coeff: t.coeff.map(|c| c.conj()),
            })
            .collect();
        PolyField {
            rows: self.rows,
            cols: self.cols,
            terms,
        }
    }

    /// Coefficient-wise transpose.
    pub fn transpose(&self) -> PolyField {
        let terms = self
            .terms
            .iter()
            .map(|t| Term {
                i: t.i,
                j: t.j,
                coeff: t.coeff.transpose(),
            })
            .collect();
        PolyField {
            rows: self.cols,
            cols: self.rows,
            terms,
        }
    }

    /// Coefficient-wise conjugate transpose; pointwise adjoint for real (x, y).
    pub fn adjoint(&self) -> PolyField {
        self.conj().transpose()
    }

    /// Induced field H -> p H on column-major flattened n x n matrices: Id_n (x) p.
    pub fn left_mul_operator(&self) -> Result<PolyField> {
        if self.rows != self.cols {
            return Err(Error::ShapeMismatch("left_mul_operator needs square".into()));
        }
        let n = self.rows;
        let id = CMat::identity(n, n);
        let terms = self
            .terms
            .iter()
            .map(|t| (t.i, t.j, id.kronecker(&t.coeff)))
            .collect();
        PolyField::new(n * n, n * n, terms)
    }

    /// Induced field H -> H p on column-major flattened n x n matrices: p^T (x) Id_n.
    pub fn right_mul_operator(&self) -> Result<PolyField> {
        if self.rows != self.cols {
            return Err(Error::ShapeMismatch("right_mul_operator needs square".into()));
        }
        let n = self.rows;
        let id = CMat::identity(n, n);
        let terms = self
            .terms
            .iter()
            .map(|t| (t.i, t.j, t.coeff.transpose().kronecker(&id)))
            .collect();
        PolyField::new(n * n, n * n, terms)
    }

    pub fn max_coeff_norm(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coeff.norm())
            .fold(0.0, f64::max)
    }

    /// Iterate (i, j, coefficient) monomials.
    pub fn term_views(&self) -> impl Iterator<Item = (u32, u32, &CMat)> {
        self.terms.iter().map(|t| (t.i, t.j, &t.coeff))
    }
}

#[inline]
fn mono(x: f64, k: u32) -> f64 {
    match k {
        0 => 1.0,
        1 => x,
        2 => x * x,
        _ => x.powi(k as i32),
    }
}

/// Matrix field expression with exact first partial derivatives.
///
/// Closed under the operations a gauge action needs: pointwise inverse,
/// product, sum and difference of polynomial fields.
#[derive(Debug, Clone)]
pub enum FieldExpr {
    Poly(PolyField),
    Inv(Box<FieldExpr>),
    Mul(Box<FieldExpr>, Box<FieldExpr>),
    Add(Box<FieldExpr>, Box<FieldExpr>),
    Sub(Box<FieldExpr>, Box<FieldExpr>),
}

impl From<PolyField> for FieldExpr {
    fn from(p: PolyField) -> Self {
        FieldExpr::Poly(p)
    }
}

impl FieldExpr {
    pub fn poly(p: PolyField) -> Self {
        FieldExpr::Poly(p)
    }

    pub fn inv(e: FieldExpr) -> Self {
        FieldExpr::Inv(Box::new(e))
    }

    pub fn mul(a: FieldExpr, b: FieldExpr) -> Self {
        FieldExpr::Mul(Box::new(a), Box::new(b))
    }

    pub fn add(a: FieldExpr, b: FieldExpr) -> Self {
        FieldExpr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: FieldExpr, b: FieldExpr) -> Self {
        FieldExpr::Sub(Box::new(a), Box::new(b))
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            FieldExpr::Poly(p) => (p.rows(), p.cols()),
            FieldExpr::Inv(e) => e.shape(),
            FieldExpr::Mul(a, b) => (a.shape().0, b.shape().1),
            FieldExpr::Add(a, _) | FieldExpr::Sub(a, _) => a.shape(),
        }
    }

    pub fn as_poly(&self) -> Option<&PolyField> {
        match self {
            FieldExpr::Poly(p) => Some(p),
            _ => None,
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> CMat {
        match self {
            FieldExpr::Poly(p) => p.eval(x, y),
            FieldExpr::Inv(e) => {
                let v = e.eval(x, y);
                v.try_inverse().unwrap_or_else(|| {
                    let (r, c) = self.shape();
                    CMat::from_element(r, c, Complex64::new(f64::NAN, 0.0))
                })
            }
            FieldExpr::Mul(a, b) => a.eval(x, y) * b.eval(x, y),
            FieldExpr::Add(a, b) => a.eval(x, y) + b.eval(x, y),
            FieldExpr::Sub(a, b) => a.eval(x, y) - b.eval(x, y),
        }
    }

    /// out += scale * value(x, y); polynomial leaves accumulate in place.
    pub fn add_scaled_into(&self, x: f64, y: f64, scale: Complex64, out: &mut CMat) {
        match self {
            FieldExpr::Poly(p) => p.add_scaled_into(x, y, scale, out),
            _ => {
                let v = self.eval(x, y);
                out.zip_apply(&v, |o, c| *o += scale * c);
            }
        }
    }

    /// Exact first partials via product and inverse rules.
    pub fn eval_d(&self, x: f64, y: f64, wrt_y: bool) -> CMat {
        match self {
            FieldExpr::Poly(p) => {
                if wrt_y {
                    p.deriv(0, 1).eval(x, y)
                } else {
                    p.deriv(1, 0).eval(x, y)
                }
            }
            FieldExpr::Inv(e) => {
                let v = e.eval(x, y);
                let vi = v.try_inverse().unwrap_or_else(|| {
                    CMat::from_element(v.nrows(), v.ncols(), Complex64::new(f64::NAN, 0.0))
                });
                -(&vi * e.eval_d(x, y, wrt_y) * &vi)
            }
            FieldExpr::Mul(a, b) => {
                a.eval_d(x, y, wrt_y) * b.eval(x, y) + a.eval(x, y) * b.eval_d(x, y, wrt_y)
            }
            FieldExpr::Add(a, b) => a.eval_d(x, y, wrt_y) + b.eval_d(x, y, wrt_y),
            FieldExpr::Sub(a, b) => a.eval_d(x, y, wrt_y) - b.eval_d(x, y, wrt_y),
        }
    }

    pub fn eval_dx(&self, x: f64, y: f64) -> CMat {
        self.eval_d(x, y, false)
    }

    pub fn eval_dy(&self, x: f64, y: f64) -> CMat {
        self.eval_d(x, y, true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eval_and_derivatives_match_hand_values() {
        // p(x, y) = 3 + 2 x^2 y
        let p = PolyField::scalar_real(&[(0, 0, 3.0), (2, 1, 2.0)]);
        assert_eq!(p.eval_real(2.0, 1.0), 3.0 + 8.0);
        assert_eq!(p.dx().eval_real(2.0, 1.0), 8.0); // 4xy
        assert_eq!(p.dy().eval_real(2.0, 1.0), 8.0); // 2x^2
        assert_eq!(p.deriv(1, 1).eval_real(2.0, 1.0), 8.0); // 4x
        assert_eq!(p.deriv(2, 0).eval_real(2.0, 1.0), 4.0); // 4y
        assert_eq!(p.eval_deriv_real(2.0, 1.0, 1, 0), 8.0);
    }

    #[test]
    fn duplicate_monomials_merge() {
        let p = PolyField::scalar_real(&[(1, 0, 2.0), (1, 0, 3.0)]);
        assert_eq!(p.eval_real(1.0, 0.0), 5.0);
        assert_eq!(p.term_views().count(), 1);
    }

    #[test]
    fn matrix_product_convolves_monomials() {
        let a = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 1.0), ZERO, c(2.0, 0.0)]);
        let b = CMat::from_row_slice(2, 2, &[c(0.0, -1.0), ZERO, c(1.0, 0.0), c(1.0, 1.0)]);
        let p = PolyField::new(2, 2, vec![(1, 0, a.clone())]).unwrap();
        let q = PolyField::new(2, 2, vec![(0, 2, b.clone())]).unwrap();
        let pq = p.mul(&q).unwrap();
        let (x, y) = (1.3, -0.7);
        let want = (a * b) * Complex64::new(x * y * y, 0.0);
        assert!((pq.eval(x, y) - want).norm() < 1e-14);
    }

    #[test]
    fn kron_operators_match_direct_products() {
        let m = CMat::from_row_slice(2, 2, &[c(1.0, 2.0), c(0.5, 0.0), c(0.0, -1.0), c(3.0, 0.0)]);
        let h = CMat::from_row_slice(2, 2, &[c(0.2, 0.0), c(1.0, 1.0), c(-1.0, 0.0), c(0.0, 2.0)]);
        let p = PolyField::constant(m.clone());
        let left = p.left_mul_operator().unwrap().eval(0.0, 0.0);
        let right = p.right_mul_operator().unwrap().eval(0.0, 0.0);
        let hv = CMat::from_column_slice(4, 1, h.as_slice());
        let lh = &left * &hv;
        let rh = &right * &hv;
        let want_l = &m * &h;
        let want_r = &h * &m;
        for col in 0..2 {
            for row in 0..2 {
                assert!((lh[(col * 2 + row, 0)] - want_l[(row, col)]).norm() < 1e-14);
                assert!((rh[(col * 2 + row, 0)] - want_r[(row, col)]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn boundary_defining_vanishes_on_circle() {
        let rho = PolyField::boundary_defining(1.5);
        assert!(rho.eval_real(1.5, 0.0).abs() < 1e-15);
        assert!(rho.eval_real(0.0, 0.0) > 0.0);
    }

    #[test]
    fn field_expr_inverse_derivative_is_exact() {
        // u = I + small polynomial, check d/dx u^-1 = -u^-1 u_x u^-1 against FD.
        let w = PolyField::new(
            2,
            2,
            vec![
                (1, 0, CMat::from_row_slice(2, 2, &[c(0.1, 0.0), c(0.05, 0.02), ZERO, c(-0.1, 0.0)])),
                (0, 2, CMat::from_row_slice(2, 2, &[ZERO, c(0.0, 0.1), c(0.07, 0.0), ZERO])),
            ],
        )
        .unwrap();
        let u = PolyField::identity(2).add(&w).unwrap();
        let expr = FieldExpr::inv(FieldExpr::poly(u));
        let (x, y) = (0.3, -0.4);
        let h = 1e-6;
        let fd = (expr.eval(x + h, y) - expr.eval(x - h, y)) / Complex64::new(2.0 * h, 0.0);
        let exact = expr.eval_dx(x, y);
        assert!((fd - exact).norm() < 1e-8);
    }

    proptest! {
        // Analytic partials agree with central differences (relative 1e-7).
        #[test]
        fn derivatives_match_finite_differences(
            x in -1.0f64..1.0,
            y in -1.0f64..1.0,
            a0 in -2.0f64..2.0,
            a1 in -2.0f64..2.0,
            a2 in -2.0f64..2.0,
        ) {
            let p = PolyField::scalar_real(&[(0, 0, a0), (2, 1, a1), (1, 3, a2)]);
            let h = 1e-5;
            let fd_x = (p.eval_real(x + h, y) - p.eval_real(x - h, y)) / (2.0 * h);
            let fd_y = (p.eval_real(x, y + h) - p.eval_real(x, y - h)) / (2.0 * h);
            let scale = 1.0 + fd_x.abs().max(fd_y.abs());
            prop_assert!((p.eval_deriv_real(x, y, 1, 0) - fd_x).abs() / scale < 1e-7);
            prop_assert!((p.eval_deriv_real(x, y, 0, 1) - fd_y).abs() / scale < 1e-7);
        }
    }
}
