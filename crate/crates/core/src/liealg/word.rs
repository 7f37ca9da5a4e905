use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{bracket_jets, Family, FdBracket, LieError, VectorField};
use crate::dynamics::{State, Vec4};
use crate::jet::{Jet, MAX_ORDER};

pub const DEFAULT_MAX_DEPTH: usize = 4;

/// An iterated Lie bracket over 1-based generator indices.
///
/// Serialized as nested arrays: `[2,[1,2]]` is `[X2,[X1,X2]]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BracketWord {
    Leaf(usize),
    Node(Box<BracketWord>, Box<BracketWord>),
}

impl BracketWord {
    pub fn leaf(index: usize) -> Self {
        BracketWord::Leaf(index)
    }

    pub fn node(left: BracketWord, right: BracketWord) -> Self {
        BracketWord::Node(Box::new(left), Box::new(right))
    }

    pub fn depth(&self) -> usize {
        match self {
            BracketWord::Leaf(_) => 0,
            BracketWord::Node(l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    fn check(&self, size: usize) -> Result<(), LieError> {
        match self {
            BracketWord::Leaf(i) if *i == 0 || *i > size => {
                Err(LieError::UnknownGenerator { index: *i, size })
            }
            BracketWord::Leaf(_) => Ok(()),
            BracketWord::Node(l, r) => {
                l.check(size)?;
                r.check(size)
            }
        }
    }

    fn check_depth(&self, max_depth: usize) -> Result<(), LieError> {
        let depth = self.depth();
        if depth > max_depth {
            Err(LieError::DepthExceeded {
                depth,
                max: max_depth,
            })
        } else {
            Ok(())
        }
    }
}

impl fmt::Display for BracketWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BracketWord::Leaf(i) => write!(f, "{i}"),
            BracketWord::Node(l, r) => write!(f, "[{l},{r}]"),
        }
    }
}

fn materialize(word: &BracketWord, family: &[Arc<dyn VectorField>]) -> Arc<dyn VectorField> {
    match word {
        BracketWord::Leaf(i) => family[i - 1].clone(),
        BracketWord::Node(l, r) => Arc::new(FdBracket::new(
            materialize(l, family),
            materialize(r, family),
            word.depth(),
        )),
    }
}

/// Evaluates `word` through [`FdBracket`]s: inner brackets are differentiated
/// by finite differences.
pub fn evaluate_word(
    word: &BracketWord,
    family: &[Arc<dyn VectorField>],
    z: &State,
    max_depth: usize,
) -> Result<Vec4, LieError> {
    word.check_depth(max_depth)?;
    word.check(family.len())?;
    materialize(word, family).eval(z)
}

/// Taylor expansion of `word` of the given order; exact up to rounding.
pub(crate) fn word_jet(word: &BracketWord, family: &Family, z: &State, order: usize) -> [Jet; 4] {
    match word {
        BracketWord::Leaf(i) => family.members()[i - 1].jet(z, order),
        BracketWord::Node(l, r) => {
            let lj = word_jet(l, family, z, order + 1);
            let rj = word_jet(r, family, z, order + 1);
            bracket_jets(&lj, &rj)
        }
    }
}

/// Evaluates `word` with exact Taylor-mode brackets.
pub fn evaluate_word_exact(
    word: &BracketWord,
    family: &Family,
    z: &State,
    max_depth: usize,
) -> Result<Vec4, LieError> {
    word.check_depth(max_depth.min(MAX_ORDER))?;
    word.check(family.len())?;
    let v = Vec4::from(word_jet(word, family, z, 0).map(|j| j.value()));
    if v.iter().all(|x| x.is_finite()) {
        Ok(v)
    } else {
        Err(LieError::NonFiniteEvaluation {
            label: word.to_string(),
        })
    }
}
