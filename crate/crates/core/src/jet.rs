//! Truncated multivariate Taylor series ("jets") in the four state variables.
//!
//! A jet of order `k` stores every partial derivative of a scalar function up
//! to total degree `k` at a base point, as Taylor coefficients. Arithmetic on
//! jets is exact up to rounding, so derivatives of nested Lie brackets can be
//! taken to any depth without finite-difference noise: differentiating a jet
//! of order `k` yields a jet of order `k - 1`.
//!
//! Monomials are stored in graded order (all degree-0 terms, then degree 1,
//! ...), so a jet of order `k` is a prefix of the same function's jet of any
//! higher order.

use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

use crate::trig::sin_cos;

/// Number of independent variables (θ1, θ2, ω1, ω2).
pub const NVARS: usize = 4;

/// Largest supported jet order.
pub const MAX_ORDER: usize = 7;

struct Table {
    exps: Vec<[u8; NVARS]>,
    /// `count[k]` = number of monomials of degree <= k.
    count: Vec<usize>,
    /// (lhs, rhs, target) sorted by target degree.
    products: Vec<(u16, u16, u16)>,
    /// `products_upto[k]` = number of leading products with target degree <= k.
    products_upto: Vec<usize>,
    /// `derivs[v][dst] = (src, factor)`: d/dz_v of monomial `src` lands on `dst`.
    derivs: [Vec<(u16, f64)>; NVARS],
}

fn degree(e: &[u8; NVARS]) -> usize {
    e.iter().map(|&x| x as usize).sum()
}

fn build_table() -> Table {
    let mut exps = Vec::new();
    let mut count = Vec::with_capacity(MAX_ORDER + 1);
    for d in 0..=MAX_ORDER {
        // lexicographically descending within a degree
        for a in (0..=d).rev() {
            for b in (0..=d - a).rev() {
                for c in (0..=d - a - b).rev() {
                    let e = d - a - b - c;
                    exps.push([a as u8, b as u8, c as u8, e as u8]);
                }
            }
        }
        count.push(exps.len());
    }
    let index: HashMap<[u8; NVARS], usize> =
        exps.iter().enumerate().map(|(i, e)| (*e, i)).collect();

    let mut products = Vec::new();
    for (i, ei) in exps.iter().enumerate() {
        for (j, ej) in exps.iter().enumerate() {
            if degree(ei) + degree(ej) > MAX_ORDER {
                continue;
            }
            let mut t = [0u8; NVARS];
            for v in 0..NVARS {
                t[v] = ei[v] + ej[v];
            }
            products.push((i as u16, j as u16, index[&t] as u16));
        }
    }
    products.sort_by_key(|&(_, _, t)| (degree(&exps[t as usize]), t));
    let products_upto = (0..=MAX_ORDER)
        .map(|k| {
            products
                .iter()
                .take_while(|&&(_, _, t)| degree(&exps[t as usize]) <= k)
                .count()
        })
        .collect();

    let derivs = std::array::from_fn(|v| {
        exps[..count[MAX_ORDER - 1]]
            .iter()
            .map(|e| {
                let mut src = *e;
                src[v] += 1;
                (index[&src] as u16, src[v] as f64)
            })
            .collect()
    });

    Table {
        exps,
        count,
        products,
        products_upto,
        derivs,
    }
}

fn table() -> &'static Table {
    static TABLE: OnceLock<Table> = OnceLock::new();
    TABLE.get_or_init(build_table)
}

/// Number of Taylor coefficients of a jet of the given order.
pub fn coefficient_count(order: usize) -> usize {
    table().count[order]
}

/// A truncated Taylor expansion in (θ1, θ2, ω1, ω2) about a fixed point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    order: usize,
    coeffs: Vec<f64>,
}

impl Jet {
    pub fn constant(value: f64, order: usize) -> Self {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        let mut coeffs = vec![0.0; coefficient_count(order)];
        coeffs[0] = value;
        Self { order, coeffs }
    }

    /// The coordinate function `z_var` expanded about `value`.
    pub fn variable(value: f64, var: usize, order: usize) -> Self {
        let mut jet = Self::constant(value, order);
        if order >= 1 {
            // degree-1 monomials are stored as e_0, e_1, e_2, e_3
            jet.coeffs[1 + var] = 1.0;
        }
        jet
    }

    /// Seeds all four coordinates of `point` as jet variables.
    pub fn seed(point: [f64; NVARS], order: usize) -> [Jet; NVARS] {
        std::array::from_fn(|v| Jet::variable(point[v], v, order))
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// First partial derivatives. Zero for order-0 jets.
    pub fn gradient(&self) -> [f64; NVARS] {
        if self.order == 0 {
            return [0.0; NVARS];
        }
        std::array::from_fn(|v| self.coeffs[1 + v])
    }

    /// Second partial derivative d²/dz_i dz_j. Requires order >= 2.
    pub fn second_derivative(&self, i: usize, j: usize) -> f64 {
        assert!(self.order >= 2, "second derivative needs an order-2 jet");
        let mut e = [0u8; NVARS];
        e[i] += 1;
        e[j] += 1;
        let idx = table().exps.iter().position(|x| *x == e).unwrap();
        let c = self.coeffs[idx];
        if i == j {
            2.0 * c
        } else {
            c
        }
    }

    pub fn truncate(&self, order: usize) -> Self {
        assert!(order <= self.order);
        Self {
            order,
            coeffs: self.coeffs[..coefficient_count(order)].to_vec(),
        }
    }

    /// Partial derivative with respect to `z_var`; the result has order `order - 1`.
    pub fn derivative(&self, var: usize) -> Self {
        assert!(self.order >= 1, "cannot differentiate an order-0 jet");
        let order = self.order - 1;
        let t = table();
        let coeffs = t.derivs[var][..t.count[order]]
            .iter()
            .map(|&(src, k)| k * self.coeffs[src as usize])
            .collect();
        Self { order, coeffs }
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * k).collect(),
        }
    }

    pub fn offset(&self, k: f64) -> Self {
        let mut out = self.clone();
        out.coeffs[0] += k;
        out
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let order = self.order.min(other.order);
        let n = coefficient_count(order);
        Self {
            order,
            coeffs: (0..n).map(|i| f(self.coeffs[i], other.coeffs[i])).collect(),
        }
    }

    fn product(&self, other: &Self) -> Self {
        let order = self.order.min(other.order);
        let t = table();
        let mut coeffs = vec![0.0; t.count[order]];
        for &(i, j, k) in &t.products[..t.products_upto[order]] {
            coeffs[k as usize] += self.coeffs[i as usize] * other.coeffs[j as usize];
        }
        Self { order, coeffs }
    }

    /// The jet minus its constant term, plus its powers up to the jet order.
    fn nilpotent_powers(&self) -> Vec<Jet> {
        let mut delta = self.clone();
        delta.coeffs[0] = 0.0;
        let mut powers = vec![Jet::constant(1.0, self.order)];
        for n in 1..=self.order {
            let next = powers[n - 1].product(&delta);
            powers.push(next);
        }
        powers
    }

    /// Evaluates `sum_n series[n] * delta^n` where `delta = self - value`.
    fn compose(&self, series: impl Fn(usize) -> f64) -> Self {
        let powers = self.nilpotent_powers();
        let mut out = Jet::constant(0.0, self.order);
        for (n, p) in powers.iter().enumerate() {
            let k = series(n);
            if k != 0.0 {
                for (o, c) in out.coeffs.iter_mut().zip(&p.coeffs) {
                    *o += k * c;
                }
            }
        }
        out
    }

    pub fn sin(&self) -> Self {
        let (s, c) = sin_cos(self.value());
        // sin(a + d) = sin a cos d + cos a sin d
        self.compose(|n| {
            let f = factorial(n);
            match n % 4 {
                0 => s / f,
                1 => c / f,
                2 => -s / f,
                _ => -c / f,
            }
        })
    }

    pub fn cos(&self) -> Self {
        let (s, c) = sin_cos(self.value());
        // cos(a + d) = cos a cos d - sin a sin d
        self.compose(|n| {
            let f = factorial(n);
            match n % 4 {
                0 => c / f,
                1 => -s / f,
                2 => -c / f,
                _ => s / f,
            }
        })
    }

    pub fn recip(&self) -> Self {
        let a = self.value();
        // 1/(a + d) = (1/a) sum (-d/a)^n
        self.compose(|n| {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            sign / a.powi(n as i32 + 1)
        })
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        self.zip_with(&rhs, |a, b| a + b)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self.zip_with(&rhs, |a, b| a - b)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        self.product(&rhs)
    }
}

impl<'a> Mul<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.product(rhs)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

/// The arithmetic the model equations need, shared by `f64` and [`Jet`].
pub trait Scalar:
    Clone + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn scale(&self, k: f64) -> Self;
    fn offset(&self, k: f64) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn recip(&self) -> Self;
}

impl Scalar for f64 {
    fn scale(&self, k: f64) -> Self {
        self * k
    }
    fn offset(&self, k: f64) -> Self {
        self + k
    }
    fn sin(&self) -> Self {
        sin_cos(*self).0
    }
    fn cos(&self) -> Self {
        sin_cos(*self).1
    }
    fn recip(&self) -> Self {
        1.0 / self
    }
}

impl Scalar for Jet {
    fn scale(&self, k: f64) -> Self {
        Jet::scale(self, k)
    }
    fn offset(&self, k: f64) -> Self {
        Jet::offset(self, k)
    }
    fn sin(&self) -> Self {
        Jet::sin(self)
    }
    fn cos(&self) -> Self {
        Jet::cos(self)
    }
    fn recip(&self) -> Self {
        Jet::recip(self)
    }
}
