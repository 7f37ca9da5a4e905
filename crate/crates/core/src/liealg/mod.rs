//! Vector fields on the PIDP state space and their Lie brackets.
//!
//! Two evaluation routes exist side by side:
//!
//! * [`VectorField`]: a value plus a Jacobian. Brackets built with
//!   [`FdBracket`] differentiate their children by central differences,
//!   which is simple and works for any field but loses accuracy with nesting.
//! * [`TaylorField`]: fields that can produce a truncated Taylor expansion
//!   ([`Jet`]) of any order. Brackets built with [`JetBracket`] are exact up
//!   to rounding at every depth. Every `TaylorField` is also a `VectorField`
//!   with an exact Jacobian.
//!
//! The bracket convention throughout is `[X, Y] = DY·X − DX·Y`.

mod fields;
mod notation;
mod word;

pub use fields::{
    scaled_family, ConstantField, Family, FdBracket, FieldKind, FnField, JetBracket, LinearField,
    PidpField, ScaledField,
};
pub use notation::{
    alternate_family, closed_form_check, notation_components, AlternateFamily, ClosedFormReport,
    NotationComponents,
};
pub use word::{evaluate_word, evaluate_word_exact, BracketWord, DEFAULT_MAX_DEPTH};

use nalgebra::Matrix4;
use thiserror::Error;

use crate::dynamics::{State, Vec4};
use crate::jet::{Jet, MAX_ORDER};

pub type Mat4 = Matrix4<f64>;

/// Base finite-difference step; scaled by `max(1, ‖z‖)`.
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LieError {
    #[error("field {label} evaluated to a non-finite value")]
    NonFiniteEvaluation { label: String },
    #[error("bracket depth {depth} exceeds the limit {max}")]
    DepthExceeded { depth: usize, max: usize },
    #[error("generator index {index} outside a family of {size}")]
    UnknownGenerator { index: usize, size: usize },
    #[error("finite-difference step must be positive (got {0})")]
    InvalidStep(f64),
    #[error("rank tolerance must be positive (got {0})")]
    InvalidTolerance(f64),
    #[error("X2 and X4 are dependent in the ω-directions here (|det| = {det:e})")]
    SingularOnGamma { det: f64 },
}

/// A smooth vector field on the 4-dimensional state space.
pub trait VectorField: Send + Sync {
    fn label(&self) -> String;

    fn eval(&self, z: &State) -> Result<Vec4, LieError>;

    /// `J[(i, j)] = ∂X_i/∂z_j`. Defaults to central differences.
    fn jacobian(&self, z: &State) -> Result<Mat4, LieError> {
        jacobian_fd(self, z, default_step(z))
    }
}

/// A field whose Taylor expansion can be computed to any order up to [`MAX_ORDER`].
pub trait TaylorField: Send + Sync {
    fn name(&self) -> String;

    /// Taylor expansion of each component about `z`, of exactly `order`.
    fn jet(&self, z: &State, order: usize) -> [Jet; 4];
}

impl<F: TaylorField + ?Sized> VectorField for F {
    fn label(&self) -> String {
        self.name()
    }

    fn eval(&self, z: &State) -> Result<Vec4, LieError> {
        let v = Vec4::from(self.jet(z, 0).map(|j| j.value()));
        check_finite(v, || self.name())
    }

    fn jacobian(&self, z: &State) -> Result<Mat4, LieError> {
        let rows = self.jet(z, 1).map(|j| j.gradient());
        let m = Mat4::from_fn(|i, j| rows[i][j]);
        if m.iter().all(|x| x.is_finite()) {
            Ok(m)
        } else {
            Err(LieError::NonFiniteEvaluation { label: self.name() })
        }
    }
}

fn check_finite(v: Vec4, label: impl FnOnce() -> String) -> Result<Vec4, LieError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(v)
    } else {
        Err(LieError::NonFiniteEvaluation { label: label() })
    }
}

/// `max(1e-6, 1e-6·‖z‖)`.
pub fn default_step(z: &State) -> f64 {
    FD_STEP * z.to_vector().norm().max(1.0)
}

fn shifted(z: &State, var: usize, h: f64) -> State {
    let mut a = z.to_array();
    a[var] += h;
    State::from_array(a)
}

fn central_difference<F: VectorField + ?Sized>(
    x: &F,
    z: &State,
    step: f64,
) -> Result<Mat4, LieError> {
    if step.is_nan() || step <= 0.0 {
        return Err(LieError::InvalidStep(step));
    }
    let mut jac = Mat4::zeros();
    for var in 0..4 {
        let fwd = x.eval(&shifted(z, var, step))?;
        let bwd = x.eval(&shifted(z, var, -step))?;
        jac.set_column(var, &((fwd - bwd) / (2.0 * step)));
    }
    Ok(jac)
}

/// Central-difference Jacobian with the given step.
pub fn jacobian_fd<F: VectorField + ?Sized>(x: &F, z: &State, step: f64) -> Result<Mat4, LieError> {
    central_difference(x, z, step)
}

/// Central differences at `step` and `step/2`, combined by one Richardson
/// level to cancel the O(step²) truncation term.
pub fn jacobian_fd_richardson<F: VectorField + ?Sized>(
    x: &F,
    z: &State,
    step: f64,
) -> Result<Mat4, LieError> {
    let coarse = central_difference(x, z, step)?;
    let fine = central_difference(x, z, 0.5 * step)?;
    Ok((fine * 4.0 - coarse) / 3.0)
}

/// `[X, Y](z) = DY(z)·X(z) − DX(z)·Y(z)`.
pub fn lie_bracket<X, Y>(x: &X, y: &Y, z: &State) -> Result<Vec4, LieError>
where
    X: VectorField + ?Sized,
    Y: VectorField + ?Sized,
{
    let xv = x.eval(z)?;
    let yv = y.eval(z)?;
    let jx = x.jacobian(z)?;
    let jy = y.jacobian(z)?;
    Ok(jy * xv - jx * yv)
}

/// Bracket of two Taylor expansions: `l` and `r` of order `k + 1` give order `k`.
pub(crate) fn bracket_jets(l: &[Jet; 4], r: &[Jet; 4]) -> [Jet; 4] {
    let dl: [[Jet; 4]; 4] = std::array::from_fn(|i| std::array::from_fn(|j| l[i].derivative(j)));
    let dr: [[Jet; 4]; 4] = std::array::from_fn(|i| std::array::from_fn(|j| r[i].derivative(j)));
    std::array::from_fn(|i| {
        let mut acc = &dr[i][0] * &l[0] - &dl[i][0] * &r[0];
        for j in 1..4 {
            acc = acc + &dr[i][j] * &l[j] - &dl[i][j] * &r[j];
        }
        acc
    })
}

pub(crate) fn check_order(order: usize) {
    assert!(
        order <= MAX_ORDER,
        "jet order {order} exceeds the supported maximum {MAX_ORDER}"
    );
}
