//! Forward-mode truncated Taylor expansions in the Wirtinger variables.
//!
//! A [`WJet`] stores the coefficients of
//!
//! ```text
//! f(p + h) = Σ c(a, b) h^a h̄^b,      |a| + |b| ≤ order
//! ```
//!
//! where `h` and `h̄` are treated as 2n independent nilpotent variables.
//! Coefficients are the mixed partial derivatives divided by the multi-index
//! factorials, so `c(e_α, e_β) = ∂²f/∂z^α∂z̄^β` and `c(2e_α, 0) = ½ ∂²f/∂z^α²`.
//!
//! Arithmetic between jets is truncated polynomial multiplication; analytic
//! functions are applied by composing their univariate Taylor series with the
//! nilpotent part of the argument. Everything is exact up to the truncation
//! order and rounding.

use std::collections::HashMap;
use std::ops::{Add, Index, Mul, Neg, Sub};
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest supported complex dimension.
pub const MAX_DIM: usize = 4;
/// Largest supported truncation order.
pub const MAX_ORDER: usize = 4;

const MAX_VARS: usize = 2 * MAX_DIM;
const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

type Exponent = [u8; MAX_VARS];

/// A point of ℂⁿ, `1 ≤ n ≤ 4`, with finite coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct CPoint {
    coords: Arc<[Complex64]>,
}

impl CPoint {
    pub fn new(coords: Vec<Complex64>) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(Error::UnsupportedDimension(coords.len()));
        }
        if coords.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("point coordinate".into()));
        }
        Ok(Self {
            coords: coords.into(),
        })
    }

    pub fn origin(n: usize) -> Result<Self> {
        Self::new(vec![ZERO; n])
    }

    /// Builds a point from interleaved real coordinates `(x¹, y¹, x², y², …)`.
    pub fn from_real(xs: &[f64]) -> Result<Self> {
        if xs.len() % 2 != 0 {
            return Err(Error::InvalidParameter(
                "real coordinate vector must have even length".into(),
            ));
        }
        Self::new(
            xs.chunks(2)
                .map(|c| Complex64::new(c[0], c[1]))
                .collect(),
        )
    }

    pub fn to_real(&self) -> Vec<f64> {
        self.coords.iter().flat_map(|c| [c.re, c.im]).collect()
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.coords
    }

    pub fn norm_sq(&self) -> f64 {
        self.coords.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Returns a copy with coordinate `k` moved by `delta`.
    pub fn shifted(&self, k: usize, delta: Complex64) -> Result<Self> {
        let mut c = self.coords.to_vec();
        c[k] += delta;
        Self::new(c)
    }

    fn same_as(&self, other: &CPoint) -> bool {
        Arc::ptr_eq(&self.coords, &other.coords) || self.coords == other.coords
    }
}

impl Index<usize> for CPoint {
    type Output = Complex64;
    fn index(&self, i: usize) -> &Complex64 {
        &self.coords[i]
    }
}

/// Monomial bookkeeping for a fixed number of real-independent variables.
///
/// Monomials are enumerated by total degree, so the layout for order `k` is
/// a prefix of the layout for order `k + 1`; truncation is slicing.
struct Layout {
    exps: Vec<Exponent>,
    /// `degree_end[d]` = number of monomials of degree ≤ d.
    degree_end: [usize; MAX_ORDER + 1],
    index: HashMap<Exponent, usize>,
    /// For every monomial, the index pairs whose exponents add up to it.
    splits: Vec<Vec<(u32, u32)>>,
    /// `raise[v][k]` = index of monomial `k · x_v`, or `usize::MAX` past the top degree.
    raise: Vec<Vec<usize>>,
}

fn enumerate(nvars: usize, degree: usize, start: usize, cur: &mut Exponent, out: &mut Vec<Exponent>) {
    if degree == 0 {
        out.push(*cur);
        return;
    }
    for v in start..nvars {
        cur[v] += 1;
        enumerate(nvars, degree - 1, v, cur, out);
        cur[v] -= 1;
    }
}

impl Layout {
    fn build(nvars: usize) -> Self {
        let mut exps = Vec::new();
        let mut degree_end = [0; MAX_ORDER + 1];
        for d in 0..=MAX_ORDER {
            let mut cur = [0u8; MAX_VARS];
            enumerate(nvars, d, 0, &mut cur, &mut exps);
            degree_end[d] = exps.len();
        }
        let index: HashMap<Exponent, usize> =
            exps.iter().enumerate().map(|(i, e)| (*e, i)).collect();

        let mut splits = vec![Vec::new(); exps.len()];
        for (i, ei) in exps.iter().enumerate() {
            for (j, ej) in exps.iter().enumerate() {
                let deg: u32 = ei.iter().chain(ej.iter()).map(|&x| x as u32).sum();
                if deg as usize > MAX_ORDER {
                    continue;
                }
                let mut sum = [0u8; MAX_VARS];
                for v in 0..MAX_VARS {
                    sum[v] = ei[v] + ej[v];
                }
                splits[index[&sum]].push((i as u32, j as u32));
            }
        }

        let raise = (0..nvars)
            .map(|v| {
                exps.iter()
                    .map(|e| {
                        let mut up = *e;
                        up[v] += 1;
                        index.get(&up).copied().unwrap_or(usize::MAX)
                    })
                    .collect()
            })
            .collect();

        Self {
            exps,
            degree_end,
            index,
            splits,
            raise,
        }
    }

    fn len(&self, order: usize) -> usize {
        self.degree_end[order]
    }
}

fn layout(n: usize) -> &'static Layout {
    static LAYOUTS: [OnceLock<Layout>; MAX_DIM] =
        [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
    LAYOUTS[n - 1].get_or_init(|| Layout::build(2 * n))
}

fn factorial(k: u8) -> f64 {
    (1..=k as u32).map(f64::from).product()
}

/// One of the 2n Wirtinger directions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    Z(usize),
    Zbar(usize),
}

impl Var {
    fn slot(self, n: usize) -> usize {
        match self {
            Var::Z(a) => a,
            Var::Zbar(b) => n + b,
        }
    }
}

/// Truncated mixed Wirtinger–Taylor expansion of a scalar function at a point.
#[derive(Clone, Debug)]
pub struct WJet {
    base: CPoint,
    order: usize,
    coeffs: Vec<Complex64>,
}

impl WJet {
    pub fn constant(base: &CPoint, order: usize, value: Complex64) -> Result<Self> {
        check_order(order)?;
        let mut coeffs = vec![ZERO; layout(base.dim()).len(order)];
        coeffs[0] = value;
        Ok(Self {
            base: base.clone(),
            order,
            coeffs,
        })
    }

    /// Jet of the coordinate function `z^α` (or `z̄^α`) at `base`.
    pub fn variable(base: &CPoint, order: usize, var: Var) -> Result<Self> {
        let n = base.dim();
        let (value, a) = match var {
            Var::Z(a) => (base.coords().get(a).copied(), a),
            Var::Zbar(a) => (base.coords().get(a).copied().map(|c| c.conj()), a),
        };
        let value = value.ok_or_else(|| {
            Error::InvalidParameter(format!("coordinate index {a} out of range for n = {n}"))
        })?;
        let mut jet = Self::constant(base, order, value)?;
        if order >= 1 {
            jet.coeffs[1 + var.slot(n)] = ONE;
        }
        Ok(jet)
    }

    pub fn base(&self) -> &CPoint {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> Complex64 {
        self.coeffs[0]
    }

    /// Raw coefficient for unbarred exponents `a` and barred exponents `b`.
    /// Indices above the truncation order read as zero.
    pub fn coeff(&self, a: &[u8], b: &[u8]) -> Complex64 {
        let n = self.dim();
        let mut e = [0u8; MAX_VARS];
        let mut deg = 0usize;
        for (k, &x) in a.iter().enumerate().take(n) {
            e[k] = x;
            deg += x as usize;
        }
        for (k, &x) in b.iter().enumerate().take(n) {
            e[n + k] = x;
            deg += x as usize;
        }
        if deg > self.order {
            return ZERO;
        }
        layout(n).index.get(&e).map_or(ZERO, |&i| self.coeffs[i])
    }

    /// Mixed partial derivative `∂^{|a|+|b|} f / ∂z^{a} ∂z̄^{b}` where the
    /// multi-indices are given as lists of coordinate indices (repetition allowed).
    pub fn partial(&self, unbarred: &[usize], barred: &[usize]) -> Complex64 {
        let n = self.dim();
        let mut a = [0u8; MAX_DIM];
        let mut b = [0u8; MAX_DIM];
        for &i in unbarred {
            a[i] += 1;
        }
        for &i in barred {
            b[i] += 1;
        }
        let scale: f64 = a[..n].iter().chain(b[..n].iter()).map(|&k| factorial(k)).product();
        self.coeff(&a[..n], &b[..n]) * scale
    }

    /// `∂f/∂z^α` at the base point.
    pub fn d(&self, alpha: usize) -> Complex64 {
        self.partial(&[alpha], &[])
    }

    /// `∂f/∂z̄^β` at the base point.
    pub fn dbar(&self, beta: usize) -> Complex64 {
        self.partial(&[], &[beta])
    }

    /// Iterates over `(unbarred exponents, barred exponents, coefficient)`.
    pub fn terms(&self) -> impl Iterator<Item = (Vec<u8>, Vec<u8>, Complex64)> + '_ {
        let n = self.dim();
        let lay = layout(n);
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(i, &c)| (lay.exps[i][..n].to_vec(), lay.exps[i][n..2 * n].to_vec(), c))
    }

    /// Jet of the derivative in direction `var`; the order drops by one.
    pub fn diff(&self, var: Var) -> Result<Self> {
        if self.order == 0 {
            return Err(Error::UnsupportedOrder(0));
        }
        let n = self.dim();
        let lay = layout(n);
        let slot = var.slot(n);
        let len = lay.len(self.order - 1);
        let coeffs = (0..len)
            .map(|k| {
                let up = lay.raise[slot][k];
                self.coeffs[up] * f64::from(lay.exps[k][slot] + 1)
            })
            .collect();
        Ok(Self {
            base: self.base.clone(),
            order: self.order - 1,
            coeffs,
        })
    }

    /// Drops every coefficient above `order`.
    pub fn truncate(&self, order: usize) -> Self {
        let order = order.min(self.order);
        Self {
            base: self.base.clone(),
            order,
            coeffs: self.coeffs[..layout(self.dim()).len(order)].to_vec(),
        }
    }

    /// Jet of the complex conjugate function.
    pub fn conj(&self) -> Self {
        let n = self.dim();
        let lay = layout(n);
        let mut coeffs = vec![ZERO; self.coeffs.len()];
        for (k, c) in self.coeffs.iter().enumerate() {
            let mut swapped = [0u8; MAX_VARS];
            swapped[..n].copy_from_slice(&lay.exps[k][n..2 * n]);
            swapped[n..2 * n].copy_from_slice(&lay.exps[k][..n]);
            coeffs[lay.index[&swapped]] = c.conj();
        }
        Self {
            base: self.base.clone(),
            order: self.order,
            coeffs,
        }
    }

    fn compatible(&self, other: &WJet) -> Result<()> {
        if !self.base.same_as(&other.base) {
            return Err(Error::IncompatibleJets("base points differ"));
        }
        if self.order != other.order {
            return Err(Error::IncompatibleJets("truncation orders differ"));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &WJet) -> Result<Self> {
        self.compatible(other)?;
        Ok(self.zip(other, |a, b| a + b))
    }

    pub fn try_sub(&self, other: &WJet) -> Result<Self> {
        self.compatible(other)?;
        Ok(self.zip(other, |a, b| a - b))
    }

    pub fn try_mul(&self, other: &WJet) -> Result<Self> {
        self.compatible(other)?;
        let lay = layout(self.dim());
        let coeffs = (0..self.coeffs.len())
            .map(|k| {
                lay.splits[k]
                    .iter()
                    .map(|&(i, j)| self.coeffs[i as usize] * other.coeffs[j as usize])
                    .sum()
            })
            .collect();
        Ok(Self {
            base: self.base.clone(),
            order: self.order,
            coeffs,
        })
    }

    fn zip(&self, other: &WJet, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        Self {
            base: self.base.clone(),
            order: self.order,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            base: self.base.clone(),
            order: self.order,
            coeffs: self.coeffs.iter().map(|&c| c * s).collect(),
        }
    }

    pub fn add_scalar(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        out.coeffs[0] += s;
        out
    }

    /// Composes the univariate series `Σ taylor[k] x^k` (expanded around the
    /// value of `self`) with the nilpotent part of `self`.
    pub fn compose(&self, taylor: &[Complex64]) -> Self {
        let mut delta = self.clone();
        delta.coeffs[0] = ZERO;
        let top = taylor.len().min(self.order + 1);
        let mut acc = WJet {
            base: self.base.clone(),
            order: self.order,
            coeffs: vec![ZERO; self.coeffs.len()],
        };
        for k in (0..top).rev() {
            acc = acc.try_mul(&delta).expect("same base and order");
            acc.coeffs[0] += taylor[k];
        }
        acc
    }

    pub fn recip(&self) -> Result<Self> {
        let x0 = self.value();
        if x0.norm() == 0.0 {
            return Err(Error::Domain("reciprocal of a jet with zero value".into()));
        }
        let inv = x0.inv();
        let mut t = Vec::with_capacity(self.order + 1);
        let mut c = inv;
        for _ in 0..=self.order {
            t.push(c);
            c *= -inv;
        }
        Ok(self.compose(&t))
    }

    pub fn try_div(&self, other: &WJet) -> Result<Self> {
        self.try_mul(&other.recip()?)
    }

    /// Natural logarithm; the value must be a positive real number.
    pub fn ln(&self) -> Result<Self> {
        let x0 = positive_real(self.value(), "log")?;
        let mut t = vec![Complex64::new(x0.ln(), 0.0)];
        let mut pow = 1.0;
        for k in 1..=self.order {
            pow *= x0;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            t.push(Complex64::new(sign / (k as f64 * pow), 0.0));
        }
        Ok(self.compose(&t))
    }

    pub fn exp(&self) -> Self {
        let e0 = self.value().exp();
        let t: Vec<_> = (0..=self.order)
            .map(|k| e0 / factorial(k as u8))
            .collect();
        self.compose(&t)
    }

    /// Real power `x^r`; the value must be a positive real number.
    pub fn powf(&self, r: f64) -> Result<Self> {
        let x0 = positive_real(self.value(), "powf")?;
        let mut t = Vec::with_capacity(self.order + 1);
        let mut binom = 1.0;
        for k in 0..=self.order {
            t.push(Complex64::new(binom * x0.powf(r - k as f64), 0.0));
            binom *= (r - k as f64) / (k as f64 + 1.0);
        }
        Ok(self.compose(&t))
    }

    pub fn sqrt(&self) -> Result<Self> {
        self.powf(0.5)
    }

    /// Largest `|c(a,b) − conj(c(b,a))|` over stored indices; zero for the jet
    /// of a real-valued function up to rounding.
    pub fn reality_defect(&self) -> f64 {
        let conj = self.conj();
        self.coeffs
            .iter()
            .zip(&conj.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

fn positive_real(x: Complex64, what: &str) -> Result<f64> {
    if x.re > 0.0 && x.im.abs() <= 1e-12 * x.re {
        Ok(x.re)
    } else {
        Err(Error::Domain(format!("{what} of non-positive value {x}")))
    }
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_ORDER {
        Err(Error::UnsupportedOrder(order))
    } else {
        Ok(())
    }
}

impl Add for &WJet {
    type Output = WJet;
    fn add(self, rhs: &WJet) -> WJet {
        self.try_add(rhs).expect("jet addition")
    }
}

impl Sub for &WJet {
    type Output = WJet;
    fn sub(self, rhs: &WJet) -> WJet {
        self.try_sub(rhs).expect("jet subtraction")
    }
}

impl Mul for &WJet {
    type Output = WJet;
    fn mul(self, rhs: &WJet) -> WJet {
        self.try_mul(rhs).expect("jet multiplication")
    }
}

impl Add for WJet {
    type Output = WJet;
    fn add(self, rhs: WJet) -> WJet {
        &self + &rhs
    }
}

impl Sub for WJet {
    type Output = WJet;
    fn sub(self, rhs: WJet) -> WJet {
        &self - &rhs
    }
}

impl Mul for WJet {
    type Output = WJet;
    fn mul(self, rhs: WJet) -> WJet {
        &self * &rhs
    }
}

impl Mul<f64> for &WJet {
    type Output = WJet;
    fn mul(self, rhs: f64) -> WJet {
        self.scale(Complex64::new(rhs, 0.0))
    }
}

impl Mul<f64> for WJet {
    type Output = WJet;
    fn mul(self, rhs: f64) -> WJet {
        &self * rhs
    }
}

impl Add<f64> for WJet {
    type Output = WJet;
    fn add(self, rhs: f64) -> WJet {
        self.add_scalar(Complex64::new(rhs, 0.0))
    }
}

impl Neg for &WJet {
    type Output = WJet;
    fn neg(self) -> WJet {
        self * -1.0
    }
}

impl Neg for WJet {
    type Output = WJet;
    fn neg(self) -> WJet {
        &self * -1.0
    }
}

/// Operations accepted by [`jet_arith`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JetOp {
    Add,
    Mul,
    Neg,
    Reciprocal,
    Log,
    Exp,
}

/// Checked jet arithmetic. `Add` and `Mul` fold over all arguments; the
/// remaining operations are unary.
pub fn jet_arith(op: JetOp, args: &[&WJet]) -> Result<WJet> {
    let (first, rest) = args
        .split_first()
        .ok_or_else(|| Error::InvalidParameter("jet_arith needs at least one operand".into()))?;
    let unary = |f: &dyn Fn(&WJet) -> Result<WJet>| {
        if rest.is_empty() {
            f(first)
        } else {
            Err(Error::InvalidParameter(format!("{op:?} takes one operand")))
        }
    };
    match op {
        JetOp::Add => rest.iter().try_fold((*first).clone(), |acc, j| acc.try_add(j)),
        JetOp::Mul => rest.iter().try_fold((*first).clone(), |acc, j| acc.try_mul(j)),
        JetOp::Neg => unary(&|j| Ok(-j)),
        JetOp::Reciprocal => unary(&|j| j.recip()),
        JetOp::Log => unary(&|j| j.ln()),
        JetOp::Exp => unary(&|j| Ok(j.exp())),
    }
}

/// Jets of the coordinate functions (or of anything substituted for them).
#[derive(Clone, Debug)]
pub struct Coords {
    pub z: Vec<WJet>,
    pub zbar: Vec<WJet>,
}

impl Coords {
    /// The independent variables `z^α`, `z̄^α` at `p`.
    pub fn variables(p: &CPoint, order: usize) -> Result<Self> {
        let n = p.dim();
        Ok(Self {
            z: (0..n)
                .map(|a| WJet::variable(p, order, Var::Z(a)))
                .collect::<Result<_>>()?,
            zbar: (0..n)
                .map(|a| WJet::variable(p, order, Var::Zbar(a)))
                .collect::<Result<_>>()?,
        })
    }

    /// Coordinates given by holomorphic component jets; barred parts are conjugates.
    pub fn from_holomorphic(z: Vec<WJet>) -> Self {
        let zbar = z.iter().map(WJet::conj).collect();
        Self { z, zbar }
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    pub fn order(&self) -> usize {
        self.z[0].order()
    }

    pub fn base(&self) -> &CPoint {
        self.z[0].base()
    }

    /// Values of the substituted coordinates, i.e. the image point.
    pub fn point(&self) -> Result<CPoint> {
        CPoint::new(self.z.iter().map(WJet::value).collect())
    }

    pub fn constant(&self, c: f64) -> WJet {
        WJet::constant(self.base(), self.order(), Complex64::new(c, 0.0))
            .expect("order already validated")
    }

    pub fn constant_c(&self, c: Complex64) -> WJet {
        WJet::constant(self.base(), self.order(), c).expect("order already validated")
    }

    /// `‖z‖² = Σ z^α z̄^α`.
    pub fn norm_sq(&self) -> WJet {
        let mut acc = self.constant(0.0);
        for (z, zb) in self.z.iter().zip(&self.zbar) {
            acc = &acc + &(z * zb);
        }
        acc
    }

    /// `⟨z, a⟩ = Σ z^α ā^α` as a holomorphic jet.
    pub fn inner(&self, a: &CPoint) -> WJet {
        let mut acc = self.constant(0.0);
        for (z, c) in self.z.iter().zip(a.coords()) {
            acc = &acc + &z.scale(c.conj());
        }
        acc
    }
}

/// Anything whose truncated expansion can be computed from coordinate jets.
pub trait JetEval {
    fn dim(&self) -> usize;
    fn contains(&self, p: &CPoint) -> bool;
    fn eval(&self, x: &Coords) -> Result<WJet>;
    fn label(&self) -> &str {
        "function"
    }
}

/// A closure-backed [`JetEval`] defined on all of ℂⁿ (or on a given predicate).
pub struct FnJet<F> {
    dim: usize,
    f: F,
    domain: Option<fn(&CPoint) -> bool>,
}

impl<F> FnJet<F>
where
    F: Fn(&Coords) -> Result<WJet>,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f, domain: None }
    }

    pub fn with_domain(mut self, domain: fn(&CPoint) -> bool) -> Self {
        self.domain = Some(domain);
        self
    }
}

impl<F> JetEval for FnJet<F>
where
    F: Fn(&Coords) -> Result<WJet>,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn contains(&self, p: &CPoint) -> bool {
        self.domain.map_or(true, |d| d(p))
    }
    fn eval(&self, x: &Coords) -> Result<WJet> {
        (self.f)(x)
    }
}

/// Exact truncated expansion of `f` at `p`.
pub fn jet_of<F: JetEval + ?Sized>(f: &F, p: &CPoint, order: usize) -> Result<WJet> {
    check_order(order)?;
    if p.dim() != f.dim() {
        return Err(Error::InvalidParameter(format!(
            "point of dimension {} for a function on C^{}",
            p.dim(),
            f.dim()
        )));
    }
    if !f.contains(p) {
        return Err(Error::OutsideDomain(f.label().to_string()));
    }
    let jet = f.eval(&Coords::variables(p, order)?)?;
    if jet.coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::NonFinite(format!("jet of {}", f.label())));
    }
    Ok(jet)
}

/// Scalar value of `f` at `p`.
pub fn value_of<F: JetEval + ?Sized>(f: &F, p: &CPoint) -> Result<Complex64> {
    Ok(jet_of(f, p, 0)?.value())
}

/// Central finite-difference estimate of a mixed Wirtinger partial.
///
/// Each `∂/∂z^α = ½(∂_x − i∂_y)` and `∂/∂z̄^α = ½(∂_x + i∂_y)` is replaced by
/// symmetric differences with step `h`, applied recursively.
pub fn fd_check<F: JetEval + ?Sized>(
    f: &F,
    p: &CPoint,
    unbarred: &[usize],
    barred: &[usize],
    h: f64,
) -> Result<Complex64> {
    let scale = 1.0 + p.norm();
    if !(h.is_finite() && h > 1e-10 * scale && h < 1.0) {
        return Err(Error::InvalidStep(h));
    }
    let ops: Vec<Var> = unbarred
        .iter()
        .map(|&a| Var::Z(a))
        .chain(barred.iter().map(|&b| Var::Zbar(b)))
        .collect();
    fd_recurse(f, p, &ops, h)
}

fn fd_recurse<F: JetEval + ?Sized>(f: &F, p: &CPoint, ops: &[Var], h: f64) -> Result<Complex64> {
    let Some((op, rest)) = ops.split_first() else {
        return value_of(f, p);
    };
    let (k, sign) = match *op {
        Var::Z(a) => (a, -1.0),
        Var::Zbar(b) => (b, 1.0),
    };
    let hx = Complex64::new(h, 0.0);
    let hy = Complex64::new(0.0, h);
    let dx = (fd_recurse(f, &p.shifted(k, hx)?, rest, h)?
        - fd_recurse(f, &p.shifted(k, -hx)?, rest, h)?)
        / (2.0 * h);
    let dy = (fd_recurse(f, &p.shifted(k, hy)?, rest, h)?
        - fd_recurse(f, &p.shifted(k, -hy)?, rest, h)?)
        / (2.0 * h);
    Ok(0.5 * (dx + Complex64::new(0.0, sign) * dy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pt(v: &[Complex64]) -> CPoint {
        CPoint::new(v.to_vec()).unwrap()
    }

    #[test]
    fn layout_counts_match_binomials() {
        // C(2n + 4, 4) monomials of degree ≤ 4 in 2n variables.
        assert_eq!(layout(1).len(4), 15);
        assert_eq!(layout(2).len(4), 70);
        assert_eq!(layout(4).len(4), 495);
        assert_eq!(layout(3).len(2), 28);
    }

    #[test]
    fn modulus_squared_at_two() {
        let p = pt(&[c(2.0, 0.0)]);
        let f = FnJet::new(1, |x: &Coords| Ok(x.norm_sq()));
        let j = jet_of(&f, &p, 2).unwrap();
        assert_abs_diff_eq!(j.d(0).re, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(j.dbar(0).re, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(j.partial(&[0], &[0]).re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(j.partial(&[0, 0], &[]).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn log_one_minus_modulus_at_origin() {
        let p = pt(&[c(0.0, 0.0)]);
        let f = FnJet::new(1, |x: &Coords| (-x.norm_sq() + 1.0).ln());
        let j = jet_of(&f, &p, 2).unwrap();
        assert_abs_diff_eq!(j.value().norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(j.d(0).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(j.partial(&[0], &[0]).re, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn horospherical_first_order_at_origin() {
        let phi = FnJet::new(1, |x: &Coords| {
            let one_plus = x.z[0].add_scalar(ONE);
            let num = &one_plus * &one_plus.conj();
            let den = -x.norm_sq() + 1.0;
            Ok(num.try_div(&den)?.ln()? * 2.0)
        });
        let j = jet_of(&phi, &CPoint::origin(1).unwrap(), 1).unwrap();
        assert_abs_diff_eq!(j.value().norm(), 0.0, epsilon = 1e-15);
        // closed form ∂φ̃ = 2(1/(1+z) + z̄/(1−|z|²))
        assert_abs_diff_eq!(j.d(0).re, 2.0, epsilon = 1e-14);
        let p = pt(&[c(0.3, -0.2)]);
        let j = jet_of(&phi, &p, 1).unwrap();
        let z = p[0];
        let expect = 2.0 * (1.0 / (1.0 + z) + z.conj() / (1.0 - z.norm_sqr()));
        assert_abs_diff_eq!((j.d(0) - expect).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn exp_log_round_trip() {
        let p = pt(&[c(0.2, 0.1), c(-0.3, 0.05)]);
        let f = FnJet::new(2, |x: &Coords| Ok((-x.norm_sq() + 1.5) * (&x.z[0] * &x.zbar[1] + x.zbar[0].clone() * x.z[1].clone() + 2.0)));
        let j = jet_of(&f, &p, 4).unwrap();
        let back = j.ln().unwrap().exp();
        for (a, b) in j.coeffs.iter().zip(&back.coeffs) {
            assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn product_of_z_and_zbar_is_modulus() {
        let p = pt(&[c(0.4, -0.7)]);
        let z = WJet::variable(&p, 3, Var::Z(0)).unwrap();
        let zb = WJet::variable(&p, 3, Var::Zbar(0)).unwrap();
        let direct = jet_of(&FnJet::new(1, |x: &Coords| Ok(x.norm_sq())), &p, 3).unwrap();
        let prod = jet_arith(JetOp::Mul, &[&z, &zb]).unwrap();
        assert_eq!(prod.coeffs, direct.coeffs);
    }

    #[test]
    fn quotient_rule_for_log_of_defining_factor() {
        let p = pt(&[c(0.5, 0.0)]);
        let f = FnJet::new(1, |x: &Coords| (-x.norm_sq() + 1.0).ln());
        let j = jet_of(&f, &p, 2).unwrap();
        assert_abs_diff_eq!(j.d(0).re, -0.5 / 0.75, epsilon = 1e-15);
    }

    #[test]
    fn errors_for_bad_inputs() {
        let p = CPoint::origin(1).unwrap();
        let f = FnJet::new(1, |x: &Coords| Ok(x.norm_sq()));
        assert_eq!(jet_of(&f, &p, 5).unwrap_err(), Error::UnsupportedOrder(5));
        assert!(matches!(
            CPoint::origin(5).unwrap_err(),
            Error::UnsupportedDimension(5)
        ));
        let inside = FnJet::new(1, |x: &Coords| Ok(x.norm_sq())).with_domain(|p| p.norm() < 1.0);
        assert!(matches!(
            jet_of(&inside, &pt(&[c(2.0, 0.0)]), 1),
            Err(Error::OutsideDomain(_))
        ));
        let neg = WJet::constant(&p, 2, c(-1.0, 0.0)).unwrap();
        assert!(matches!(neg.ln(), Err(Error::Domain(_))));
        let zero = WJet::constant(&p, 2, ZERO).unwrap();
        assert!(matches!(jet_arith(JetOp::Reciprocal, &[&zero]), Err(Error::Domain(_))));
        let q = pt(&[c(0.1, 0.0)]);
        let other = WJet::constant(&q, 2, ONE).unwrap();
        assert!(matches!(
            jet_arith(JetOp::Add, &[&other, &neg]),
            Err(Error::IncompatibleJets(_))
        ));
        let lower = WJet::constant(&p, 1, ONE).unwrap();
        assert!(matches!(neg.try_mul(&lower), Err(Error::IncompatibleJets(_))));
        assert!(matches!(fd_check(&f, &p, &[0], &[], 0.0), Err(Error::InvalidStep(_))));
        assert!(matches!(fd_check(&f, &p, &[0], &[], 1e-14), Err(Error::InvalidStep(_))));
    }

    #[test]
    fn fd_matches_quartic_mixed_partial() {
        let f = FnJet::new(1, |x: &Coords| {
            let t = x.norm_sq();
            Ok(&t * &t)
        });
        let p = pt(&[c(0.3, 0.0)]);
        let jet = jet_of(&f, &p, 2).unwrap().partial(&[0], &[0]);
        assert_abs_diff_eq!(jet.re, 0.36, epsilon = 1e-15);
        let fd = fd_check(&f, &p, &[0], &[0], 1e-4).unwrap();
        assert_abs_diff_eq!((fd - jet).norm(), 0.0, epsilon = 1e-6);
    }

    #[test]
    fn fd_of_constant_vanishes() {
        let f = FnJet::new(2, |x: &Coords| Ok(x.constant(3.5)));
        let p = pt(&[c(0.1, 0.2), c(-0.2, 0.0)]);
        for (a, b) in [(vec![0], vec![]), (vec![], vec![1]), (vec![0, 1], vec![1])] {
            let v = fd_check(&f, &p, &a, &b, 1e-3).unwrap();
            assert!(v.norm() < 1e-10);
        }
    }

    #[test]
    fn derivative_jet_matches_partials() {
        let p = pt(&[c(0.2, 0.1), c(0.0, -0.3)]);
        let f = FnJet::new(2, |x: &Coords| (-x.norm_sq() + 1.0).ln());
        let j = jet_of(&f, &p, 4).unwrap();
        let dz1 = j.diff(Var::Z(1)).unwrap();
        assert_eq!(dz1.order(), 3);
        assert_abs_diff_eq!((dz1.partial(&[0], &[1, 1]) - j.partial(&[0, 1], &[1, 1])).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!((dz1.value() - j.d(1)).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn conj_swaps_indices() {
        let p = pt(&[c(0.3, 0.4)]);
        let z = WJet::variable(&p, 2, Var::Z(0)).unwrap();
        let sq = &z * &z;
        let conj = sq.conj();
        assert_abs_diff_eq!((conj.value() - sq.value().conj()).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((conj.coeff(&[0], &[2]) - ONE).norm(), 0.0, epsilon = 1e-15);
        assert!(z.reality_defect() > 0.1);
        assert!((&z * &z.conj()).reality_defect() < 1e-15);
    }
}
