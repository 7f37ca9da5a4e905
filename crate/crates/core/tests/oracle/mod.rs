//! Equations of motion rederived from the Lagrangian alone.
//!
//! Derivatives of L come from hyper-dual numbers, which are exact to rounding
//! for first and second partials and share no code with the library.

use std::ops::{Add, Mul, Sub};

use pidp_core::dynamics::{Params, State, Vec4};

/// a + b ε1 + c ε2 + d ε1ε2 with ε1² = ε2² = 0.
#[derive(Clone, Copy, Debug)]
struct HyperDual {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl HyperDual {
    fn constant(a: f64) -> Self {
        Self {
            a,
            b: 0.0,
            c: 0.0,
            d: 0.0,
        }
    }
    fn cos(self) -> Self {
        let (s, co) = self.a.sin_cos();
        Self {
            a: co,
            b: -s * self.b,
            c: -s * self.c,
            d: -s * self.d - co * self.b * self.c,
        }
    }
}

impl Add for HyperDual {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            a: self.a + o.a,
            b: self.b + o.b,
            c: self.c + o.c,
            d: self.d + o.d,
        }
    }
}

impl Sub for HyperDual {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self {
            a: self.a - o.a,
            b: self.b - o.b,
            c: self.c - o.c,
            d: self.d - o.d,
        }
    }
}

impl Mul for HyperDual {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self {
            a: self.a * o.a,
            b: self.a * o.b + self.b * o.a,
            c: self.a * o.c + self.c * o.a,
            d: self.a * o.d + self.b * o.c + self.c * o.b + self.d * o.a,
        }
    }
}

impl Mul<HyperDual> for f64 {
    type Output = HyperDual;
    fn mul(self, o: HyperDual) -> HyperDual {
        HyperDual {
            a: self * o.a,
            b: self * o.b,
            c: self * o.c,
            d: self * o.d,
        }
    }
}

/// L = T − U written directly from the kinetic and potential energy formulas.
fn lagrangian(p: &Params, x: [HyperDual; 4]) -> HyperDual {
    let [t1, t2, w1, w2] = x;
    let kinetic = (0.5 * (p.m1 + p.m2) * p.r1 * p.r1) * (w1 * w1)
        + (p.m2 * p.r1 * p.r2) * (w1 * w2 * (t1 - t2).cos())
        + (0.5 * p.m2 * p.r2 * p.r2) * (w2 * w2);
    let potential = p.g * ((p.m1 + p.m2) * p.r1 * t1.cos() + (p.m2 * p.r2) * t2.cos());
    kinetic - potential
}

/// (∂L/∂x_i, ∂²L/∂x_i∂x_j).
fn partials(p: &Params, z: &State, i: usize, j: usize) -> (f64, f64) {
    let base = z.to_array();
    let x: [HyperDual; 4] = std::array::from_fn(|k| {
        let mut v = HyperDual::constant(base[k]);
        if k == i {
            v.b = 1.0;
        }
        if k == j {
            v.c = 1.0;
        }
        v
    });
    let l = lagrangian(p, x);
    (l.b, l.d)
}

/// f and h from ∂L/∂θ_i − d/dt ∂L/∂ω_i = m_i u.
pub fn euler_lagrange(p: &Params, z: &State) -> (Vec4, Vec4) {
    let m = |i: usize, j: usize| partials(p, z, 2 + i, 2 + j).1;
    let c = |i: usize, j: usize| partials(p, z, 2 + i, j).1;
    let grad_theta = |i: usize| partials(p, z, i, i).0;
    let omega = [z.omega1, z.omega2];

    let (m11, m12, m21, m22) = (m(0, 0), m(0, 1), m(1, 0), m(1, 1));
    let det = m11 * m22 - m12 * m21;
    let solve = |r: [f64; 2]| {
        [
            (m22 * r[0] - m12 * r[1]) / det,
            (m11 * r[1] - m21 * r[0]) / det,
        ]
    };

    let force: [f64; 2] =
        std::array::from_fn(|i| grad_theta(i) - (0..2).map(|j| c(i, j) * omega[j]).sum::<f64>());
    let acc = solve(force);
    let per_u = solve([-p.m1, -p.m2]);
    (
        Vec4::new(z.omega1, z.omega2, acc[0], acc[1]),
        Vec4::new(0.0, 0.0, per_u[0], per_u[1]),
    )
}
