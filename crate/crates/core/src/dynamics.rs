//! The inverted double pendulum on a cart driven by a horizontal acceleration.
//!
//! Angles are measured from the upward vertical, so (0, 0) is the upright
//! configuration and (π, π) hangs down. The state is z = (θ1, θ2, ω1, ω2) and
//! the motion obeys the control-affine system ż = f(z) + h(z)u.

use std::f64::consts::{PI, TAU};
use std::ops::Deref;

use nalgebra::{Matrix2, Vector2, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jet::Scalar;
use crate::trig::sin_cos;

pub type Vec4 = Vector4<f64>;

/// Relative tolerance used when testing the admissibility inequalities.
pub const ADMISSIBILITY_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("parameter {name} must be strictly positive (got {value})")]
    NonPositiveParameter { name: &'static str, value: f64 },
    #[error("admissibility condition {condition} violated: m1/m2 = {lhs} equals {rhs}")]
    AdmissibilityViolation { condition: u8, lhs: f64, rhs: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("state component {index} is not finite ({value})")]
    NonFiniteState { index: usize, value: f64 },
    #[error("a state has 4 components, got {0}")]
    WrongLength(usize),
}

/// Physical constants of the pendulum, in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub m1: f64,
    pub m2: f64,
    pub r1: f64,
    pub r2: f64,
    pub g: f64,
}

impl Params {
    pub fn new(m1: f64, m2: f64, r1: f64, r2: f64, g: f64) -> Self {
        Self { m1, m2, r1, r2, g }
    }

    /// Unit masses and lengths with the given gravity.
    pub fn unit(g: f64) -> Self {
        Self::new(1.0, 1.0, 1.0, 1.0, g)
    }
}

/// Parameters that passed [`validate_params`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct AdmissibleParams(Params);

impl AdmissibleParams {
    pub fn params(&self) -> &Params {
        &self.0
    }
}

impl Deref for AdmissibleParams {
    type Target = Params;
    fn deref(&self) -> &Params {
        &self.0
    }
}

/// One of the three excluded mass ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdmissibilityCheck {
    /// 1: r1(r1+r2)/(r2²-r1(r1+r2)), 2: r1(r1-r2)/(r2²-r1(r1-r2)), 3: (r2²-r1²)/r1².
    pub condition: u8,
    /// m1/m2.
    pub lhs: f64,
    /// Excluded ratio; `None` when its denominator vanishes.
    pub rhs: Option<f64>,
    pub violated: bool,
}

/// Evaluates the three excluded-ratio conditions with relative tolerance `tol`.
pub fn admissibility_checks(p: &Params, tol: f64) -> [AdmissibilityCheck; 3] {
    let ratio = p.m1 / p.m2;
    let excluded = |num: f64, den: f64| if den == 0.0 { None } else { Some(num / den) };
    let plus = p.r1 * (p.r1 + p.r2);
    let minus = p.r1 * (p.r1 - p.r2);
    let rhs = [
        excluded(plus, p.r2 * p.r2 - plus),
        excluded(minus, p.r2 * p.r2 - minus),
        excluded(p.r2 * p.r2 - p.r1 * p.r1, p.r1 * p.r1),
    ];
    std::array::from_fn(|i| {
        let violated = rhs[i]
            .map(|r| (ratio - r).abs() <= tol * ratio.abs().max(r.abs()))
            .unwrap_or(false);
        AdmissibilityCheck {
            condition: i as u8 + 1,
            lhs: ratio,
            rhs: rhs[i],
            violated,
        }
    })
}

pub fn check_positive(p: &Params) -> Result<(), ParamError> {
    let fields = [
        ("m1", p.m1),
        ("m2", p.m2),
        ("r1", p.r1),
        ("r2", p.r2),
        ("g", p.g),
    ];
    for (name, value) in fields {
        if !(value > 0.0 && value.is_finite()) {
            return Err(ParamError::NonPositiveParameter { name, value });
        }
    }
    Ok(())
}

pub fn validate_params(p: Params) -> Result<AdmissibleParams, ParamError> {
    validate_params_with_tol(p, ADMISSIBILITY_TOL)
}

pub fn validate_params_with_tol(p: Params, tol: f64) -> Result<AdmissibleParams, ParamError> {
    check_positive(&p)?;
    if let Some(bad) = admissibility_checks(&p, tol).iter().find(|c| c.violated) {
        return Err(ParamError::AdmissibilityViolation {
            condition: bad.condition,
            lhs: bad.lhs,
            rhs: bad.rhs.unwrap_or(f64::NAN),
        });
    }
    Ok(AdmissibleParams(p))
}

/// A point z = (θ1, θ2, ω1, ω2) of the state space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct State {
    pub theta1: f64,
    pub theta2: f64,
    pub omega1: f64,
    pub omega2: f64,
}

impl State {
    pub const fn new(theta1: f64, theta2: f64, omega1: f64, omega2: f64) -> Self {
        Self {
            theta1,
            theta2,
            omega1,
            omega2,
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.theta1, self.theta2, self.omega1, self.omega2]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_vector(self) -> Vec4 {
        Vec4::from(self.to_array())
    }

    pub fn from_vector(v: &Vec4) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }

    pub fn check_finite(self) -> Result<Self, StateError> {
        match self.to_array().iter().position(|x| !x.is_finite()) {
            Some(index) => Err(StateError::NonFiniteState {
                index,
                value: self.to_array()[index],
            }),
            None => Ok(self),
        }
    }
}

impl TryFrom<[f64; 4]> for State {
    type Error = StateError;
    fn try_from(a: [f64; 4]) -> Result<Self, StateError> {
        State::from_array(a).check_finite()
    }
}

impl TryFrom<&[f64]> for State {
    type Error = StateError;
    fn try_from(s: &[f64]) -> Result<Self, StateError> {
        let a: [f64; 4] = s.try_into().map_err(|_| StateError::WrongLength(s.len()))?;
        State::try_from(a)
    }
}

impl From<State> for [f64; 4] {
    fn from(s: State) -> [f64; 4] {
        s.to_array()
    }
}

/// Shifts an angle by a multiple of 2π into [-π, π).
pub fn wrap_angle(theta: f64) -> f64 {
    if (-PI..PI).contains(&theta) {
        return theta;
    }
    let wrapped = (theta + PI).rem_euclid(TAU) - PI;
    // rem_euclid can round up to TAU itself
    if wrapped >= PI {
        wrapped - TAU
    } else {
        wrapped
    }
}

pub fn wrap_state(z: State) -> Result<State, StateError> {
    let z = z.check_finite()?;
    Ok(State::new(
        wrap_angle(z.theta1),
        wrap_angle(z.theta2),
        z.omega1,
        z.omega2,
    ))
}

/// Δ(θ) = r1 r2 (m1 + m2 sin²(θ1 − θ2)).
pub fn delta(p: &Params, theta1: f64, theta2: f64) -> f64 {
    delta_of(p, &theta1, &theta2)
}

pub(crate) fn delta_of<T: Scalar>(p: &Params, theta1: &T, theta2: &T) -> T {
    let s = (theta1.clone() - theta2.clone()).sin();
    (s.clone() * s).scale(p.m2).offset(p.m1).scale(p.r1 * p.r2)
}

/// The drift f(z); the first two components are (ω1, ω2) verbatim.
pub(crate) fn drift_of<T: Scalar>(p: &Params, z: &[T; 4]) -> [T; 4] {
    let [t1, t2, w1, w2] = z.clone();
    let mt = p.m1 + p.m2;
    let diff = t1.clone() - t2.clone();
    let (s, c) = (diff.sin(), diff.cos());
    let (s1, s2) = (t1.sin(), t2.sin());
    let w1sq = w1.clone() * w1.clone();
    let w2sq = w2.clone() * w2.clone();

    let gravity3 = ((s2.clone() * c.clone()).scale(p.m2) - s1.scale(mt)).scale(-p.g * p.r2);
    let gravity4 = (c.clone() * s1 - s2).scale(-p.g * p.r1 * mt);
    let inertial3 =
        s.clone() * ((c.clone() * w1sq.clone()).scale(p.r1) + w2sq.scale(p.r2)).scale(-p.m2 * p.r2);
    let inertial4 = s * (w1sq.scale(p.r1 * mt) + (c * w2sq).scale(p.r2 * p.m2)).scale(p.r1);

    let inv = delta_of(p, &t1, &t2).recip();
    [
        w1,
        w2,
        (gravity3 + inertial3) * inv.clone(),
        (gravity4 + inertial4) * inv,
    ]
}

/// The control field h(z); the first two components are zero.
pub(crate) fn control_of<T: Scalar>(p: &Params, z: &[T; 4]) -> [T; 4] {
    let [t1, t2, _, _] = z.clone();
    let c = (t1.clone() - t2.clone()).cos();
    let inv = delta_of(p, &t1, &t2).recip();
    let zero = t1.clone() - t1.clone();
    let b1 = c
        .scale(p.m2 * p.r2 * p.r1 * p.m2)
        .offset(-p.m2 * p.r2 * p.r2 * p.m1);
    let b2 = c
        .scale(p.m2 * p.r1 * p.r2 * p.m1)
        .offset(-p.m2 * p.r1 * p.r1 * (p.m1 + p.m2));
    [zero.clone(), zero, b1 * inv.clone(), b2 * inv]
}

/// X1 = Δ(θ) f(z) = (Ω1, Ω2, a1, a2).
pub(crate) fn scaled_drift_of<T: Scalar>(p: &Params, z: &[T; 4]) -> [T; 4] {
    let d = delta_of(p, &z[0], &z[1]);
    drift_of(p, z).map(|c| c * d.clone())
}

/// X2 = Δ(θ) h(z) = (0, 0, b1, b2).
pub(crate) fn scaled_control_of<T: Scalar>(p: &Params, z: &[T; 4]) -> [T; 4] {
    let d = delta_of(p, &z[0], &z[1]);
    control_of(p, z).map(|c| c * d.clone())
}

pub fn drift_f(p: &Params, z: &State) -> Vec4 {
    Vec4::from(drift_of(p, &z.to_array()))
}

pub fn control_h(p: &Params, z: &State) -> Vec4 {
    Vec4::from(control_of(p, &z.to_array()))
}

/// ż = f(z) + u h(z).
pub fn rhs(p: &Params, z: &State, u: f64) -> Vec4 {
    drift_f(p, z) + control_h(p, z) * u
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub potential: f64,
    pub lagrangian: f64,
    pub hamiltonian: f64,
}

pub fn kinetic_energy(p: &Params, z: &State) -> f64 {
    let c = sin_cos(z.theta1 - z.theta2).1;
    0.5 * (p.m1 + p.m2) * p.r1 * p.r1 * z.omega1 * z.omega1
        + p.m2 * p.r1 * p.r2 * z.omega1 * z.omega2 * c
        + 0.5 * p.m2 * p.r2 * p.r2 * z.omega2 * z.omega2
}

pub fn potential_energy(p: &Params, theta1: f64, theta2: f64) -> f64 {
    p.g * ((p.m1 + p.m2) * p.r1 * sin_cos(theta1).1 + p.m2 * p.r2 * sin_cos(theta2).1)
}

pub fn energies(p: &Params, z: &State) -> EnergyBreakdown {
    let kinetic = kinetic_energy(p, z);
    let potential = potential_energy(p, z.theta1, z.theta2);
    EnergyBreakdown {
        kinetic,
        potential,
        lagrangian: kinetic - potential,
        hamiltonian: kinetic + potential,
    }
}

/// The configuration-dependent inertia M(θ), with T = ½ ωᵀ M ω.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassMatrix(pub Matrix2<f64>);

impl MassMatrix {
    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
    }

    /// Solves M x = rhs by Cramer's rule; M is positive definite.
    pub fn solve(&self, rhs: &Vector2<f64>) -> Vector2<f64> {
        let m = &self.0;
        let det = self.det();
        Vector2::new(
            (m[(1, 1)] * rhs[0] - m[(0, 1)] * rhs[1]) / det,
            (m[(0, 0)] * rhs[1] - m[(1, 0)] * rhs[0]) / det,
        )
    }
}

pub fn mass_matrix(p: &Params, theta1: f64, theta2: f64) -> MassMatrix {
    let off = p.m2 * p.r1 * p.r2 * sin_cos(theta1 - theta2).1;
    MassMatrix(Matrix2::new(
        (p.m1 + p.m2) * p.r1 * p.r1,
        off,
        off,
        p.m2 * p.r2 * p.r2,
    ))
}

/// Conjugate momenta p = M(θ) ω.
pub fn momenta(p: &Params, z: &State) -> Vector2<f64> {
    mass_matrix(p, z.theta1, z.theta2).0 * Vector2::new(z.omega1, z.omega2)
}

/// Inverse Legendre map: ω = M(θ)⁻¹ p.
pub fn velocities_from_momenta(
    p: &Params,
    theta1: f64,
    theta2: f64,
    mom: &Vector2<f64>,
) -> Vector2<f64> {
    mass_matrix(p, theta1, theta2).solve(mom)
}

/// H(θ, p) = ½ pᵀ M⁻¹ p + U(θ).
pub fn hamiltonian_from_momenta(p: &Params, theta1: f64, theta2: f64, mom: &Vector2<f64>) -> f64 {
    let omega = velocities_from_momenta(p, theta1, theta2, mom);
    0.5 * mom.dot(&omega) + potential_energy(p, theta1, theta2)
}
