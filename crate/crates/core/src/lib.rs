//! Numerical toolkit for the planar inverted double pendulum on a cart:
//! model equations, Lie brackets of its control vector fields, Lie-algebra
//! rank and singular strata, and flow-based simulation experiments.

pub mod dynamics;
pub mod jet;
pub mod liealg;
pub mod rank;
pub mod sim;
mod trig;

pub use dynamics::{AdmissibleParams, Params, State, Vec4};
pub use liealg::{BracketWord, Family, LieError, TaylorField, VectorField};
