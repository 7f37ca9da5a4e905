use std::sync::Arc;

use super::{
    bracket_jets, check_order, jacobian_fd_richardson, LieError, Mat4, TaylorField, VectorField,
};
use crate::dynamics::{
    control_of, drift_of, scaled_control_of, scaled_drift_of, Params, State, Vec4,
};
use crate::jet::Jet;

/// Which of the model's fields a [`PidpField`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// f(z)
    Drift,
    /// h(z)
    Control,
    /// X1 = Δ(θ) f(z)
    ScaledDrift,
    /// X2 = Δ(θ) h(z)
    ScaledControl,
}

#[derive(Debug, Clone, Copy)]
pub struct PidpField {
    params: Params,
    kind: FieldKind,
}

impl PidpField {
    pub fn new(params: Params, kind: FieldKind) -> Self {
        Self { params, kind }
    }
}

impl TaylorField for PidpField {
    fn name(&self) -> String {
        match self.kind {
            FieldKind::Drift => "f",
            FieldKind::Control => "h",
            FieldKind::ScaledDrift => "X1",
            FieldKind::ScaledControl => "X2",
        }
        .to_string()
    }

    fn jet(&self, z: &State, order: usize) -> [Jet; 4] {
        check_order(order);
        let vars = Jet::seed(z.to_array(), order);
        match self.kind {
            FieldKind::Drift => drift_of(&self.params, &vars),
            FieldKind::Control => control_of(&self.params, &vars),
            FieldKind::ScaledDrift => scaled_drift_of(&self.params, &vars),
            FieldKind::ScaledControl => scaled_control_of(&self.params, &vars),
        }
    }
}

/// Exact bracket `[left, right]` of two Taylor fields.
#[derive(Clone)]
pub struct JetBracket {
    left: Arc<dyn TaylorField>,
    right: Arc<dyn TaylorField>,
    label: Option<String>,
}

impl JetBracket {
    pub fn new(left: Arc<dyn TaylorField>, right: Arc<dyn TaylorField>) -> Self {
        Self {
            left,
            right,
            label: None,
        }
    }

    pub fn labelled(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }
}

impl TaylorField for JetBracket {
    fn name(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| format!("[{},{}]", self.left.name(), self.right.name()))
    }

    fn jet(&self, z: &State, order: usize) -> [Jet; 4] {
        check_order(order + 1);
        let l = self.left.jet(z, order + 1);
        let r = self.right.jet(z, order + 1);
        bracket_jets(&l, &r)
    }
}

/// `X(z) = A z`.
#[derive(Debug, Clone, Copy)]
pub struct LinearField {
    matrix: Mat4,
}

impl LinearField {
    pub fn new(matrix: Mat4) -> Self {
        Self { matrix }
    }
}

impl TaylorField for LinearField {
    fn name(&self) -> String {
        "linear".to_string()
    }

    fn jet(&self, z: &State, order: usize) -> [Jet; 4] {
        check_order(order);
        let vars = Jet::seed(z.to_array(), order);
        std::array::from_fn(|i| {
            (1..4).fold(vars[0].scale(self.matrix[(i, 0)]), |acc, j| {
                acc + vars[j].scale(self.matrix[(i, j)])
            })
        })
    }
}

/// `X(z) = c`.
#[derive(Debug, Clone, Copy)]
pub struct ConstantField {
    value: Vec4,
}

impl ConstantField {
    pub fn new(value: Vec4) -> Self {
        Self { value }
    }
}

impl TaylorField for ConstantField {
    fn name(&self) -> String {
        "constant".to_string()
    }

    fn jet(&self, _z: &State, order: usize) -> [Jet; 4] {
        check_order(order);
        std::array::from_fn(|i| Jet::constant(self.value[i], order))
    }
}

/// `c · X` for a constant `c`.
#[derive(Clone)]
pub struct ScaledField {
    factor: f64,
    inner: Arc<dyn TaylorField>,
}

impl ScaledField {
    pub fn new(factor: f64, inner: Arc<dyn TaylorField>) -> Self {
        Self { factor, inner }
    }
}

impl TaylorField for ScaledField {
    fn name(&self) -> String {
        format!("{}*{}", self.factor, self.inner.name())
    }

    fn jet(&self, z: &State, order: usize) -> [Jet; 4] {
        self.inner.jet(z, order).map(|j| j.scale(self.factor))
    }
}

/// A field given by a closure; its Jacobian comes from finite differences.
pub struct FnField<F> {
    label: String,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(&State) -> Vec4 + Send + Sync,
{
    pub fn new(label: impl Into<String>, f: F) -> Self {
        Self {
            label: label.into(),
            f,
        }
    }
}

impl<F> VectorField for FnField<F>
where
    F: Fn(&State) -> Vec4 + Send + Sync,
{
    fn label(&self) -> String {
        self.label.clone()
    }

    fn eval(&self, z: &State) -> Result<Vec4, LieError> {
        let v = (self.f)(z);
        if v.iter().all(|x| x.is_finite()) {
            Ok(v)
        } else {
            Err(LieError::NonFiniteEvaluation {
                label: self.label.clone(),
            })
        }
    }
}

/// Base steps for differentiating a bracket nested `k` levels deep
/// (index `k - 1`), before scaling by `max(1, ‖z‖)`.
///
/// Each level inherits the previous level's error as noise, so the
/// noise-optimal step for a Richardson-corrected central difference grows
/// roughly as `noise^(1/5)`.
const NESTED_STEPS: [f64; 4] = [1e-3, 4e-3, 1.5e-2, 4e-2];

/// `[left, right]` evaluated through the children's Jacobian contracts; its
/// own Jacobian is a Richardson-corrected central difference.
#[derive(Clone)]
pub struct FdBracket {
    left: Arc<dyn VectorField>,
    right: Arc<dyn VectorField>,
    nesting: usize,
    label: String,
}

impl FdBracket {
    /// `nesting` is the bracket depth of this node (1 for a bracket of plain fields).
    pub fn new(left: Arc<dyn VectorField>, right: Arc<dyn VectorField>, nesting: usize) -> Self {
        let label = format!("[{},{}]", left.label(), right.label());
        Self {
            left,
            right,
            nesting: nesting.max(1),
            label,
        }
    }

    pub fn labelled(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn step(&self, z: &State) -> f64 {
        let base = NESTED_STEPS[(self.nesting - 1).min(NESTED_STEPS.len() - 1)];
        base * z.to_vector().norm().max(1.0)
    }
}

impl VectorField for FdBracket {
    fn label(&self) -> String {
        self.label.clone()
    }

    fn eval(&self, z: &State) -> Result<Vec4, LieError> {
        super::lie_bracket(self.left.as_ref(), self.right.as_ref(), z)
    }

    fn jacobian(&self, z: &State) -> Result<Mat4, LieError> {
        jacobian_fd_richardson(self, z, self.step(z))
    }
}

/// The family {X1, X2, X3 = [X1, X2], X4 = [X2, X3]} with exact Taylor brackets.
#[derive(Clone)]
pub struct Family {
    members: Vec<Arc<dyn TaylorField>>,
}

impl Family {
    pub fn new(members: Vec<Arc<dyn TaylorField>>) -> Self {
        Self { members }
    }

    pub fn pidp(params: &Params) -> Self {
        let x1: Arc<dyn TaylorField> = Arc::new(PidpField::new(*params, FieldKind::ScaledDrift));
        let x2: Arc<dyn TaylorField> = Arc::new(PidpField::new(*params, FieldKind::ScaledControl));
        let x3: Arc<dyn TaylorField> =
            Arc::new(JetBracket::new(x1.clone(), x2.clone()).labelled("X3"));
        let x4: Arc<dyn TaylorField> =
            Arc::new(JetBracket::new(x2.clone(), x3.clone()).labelled("X4"));
        Self::new(vec![x1, x2, x3, x4])
    }

    pub fn members(&self) -> &[Arc<dyn TaylorField>] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Member by 1-based index.
    pub fn get(&self, index: usize) -> Result<&Arc<dyn TaylorField>, LieError> {
        index
            .checked_sub(1)
            .and_then(|i| self.members.get(i))
            .ok_or(LieError::UnknownGenerator {
                index,
                size: self.members.len(),
            })
    }

    /// Values of all members at `z`.
    pub fn values(&self, z: &State) -> Result<Vec<Vec4>, LieError> {
        self.members.iter().map(|m| m.eval(z)).collect()
    }
}

/// {X1, X2, X3, X4} where X3, X4 are [`FdBracket`]s over exact X1, X2.
pub fn scaled_family(params: &Params) -> Vec<Arc<dyn VectorField>> {
    let x1: Arc<dyn VectorField> = Arc::new(PidpField::new(*params, FieldKind::ScaledDrift));
    let x2: Arc<dyn VectorField> = Arc::new(PidpField::new(*params, FieldKind::ScaledControl));
    let x3: Arc<dyn VectorField> =
        Arc::new(FdBracket::new(x1.clone(), x2.clone(), 1).labelled("X3"));
    let x4: Arc<dyn VectorField> =
        Arc::new(FdBracket::new(x2.clone(), x3.clone(), 2).labelled("X4"));
    vec![x1, x2, x3, x4]
}
