use std::fmt;
use std::sync::Arc;

use super::value::{SymOp, SymValue, SymVar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Relation {
    Eq,
    Ne,
    Lt,
    Le,
}

impl Relation {
    fn op(self) -> SymOp {
        match self {
            Relation::Eq => SymOp::Eq,
            Relation::Ne => SymOp::Ne,
            Relation::Lt => SymOp::Lt,
            Relation::Le => SymOp::Le,
        }
    }

    pub fn holds(self, a: i64, b: i64) -> bool {
        match self {
            Relation::Eq => a == b,
            Relation::Ne => a != b,
            Relation::Lt => a < b,
            Relation::Le => a <= b,
        }
    }
}

/// One relational conjunct of a path condition.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AtomicConstraint {
    pub relation: Relation,
    pub lhs: SymValue,
    pub rhs: SymValue,
    text: Arc<str>,
}

impl AtomicConstraint {
    /// Builds a constraint, ordering the operands of `Eq`/`Ne` by text.
    pub fn new(relation: Relation, lhs: SymValue, rhs: SymValue) -> AtomicConstraint {
        // Reuse value canonicalization so that atom text and value text agree.
        let v = SymValue::app(relation.op(), vec![lhs.clone(), rhs.clone()]);
        let (lhs, rhs, text) = match &v {
            SymValue::App(a) => (a.args[0].clone(), a.args[1].clone(), v.text()),
            _ => {
                let text = format!("({:?} {} {})", relation, lhs, rhs);
                (lhs, rhs, text)
            }
        };
        AtomicConstraint {
            relation,
            lhs,
            rhs,
            text: text.into(),
        }
    }

    /// Canonical serialization, e.g. `(Le (Add 1 x) 3)`.
    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn eval(&self, assign: &dyn Fn(&SymVar) -> Option<i64>) -> Option<bool> {
        Some(self.relation.holds(self.lhs.eval(assign)?, self.rhs.eval(assign)?))
    }

    pub fn vars(&self) -> Vec<Arc<SymVar>> {
        let mut out = Vec::new();
        self.lhs.collect_vars(&mut out);
        self.rhs.collect_vars(&mut out);
        out.sort_by_key(|v| v.id);
        out.dedup_by_key(|v| v.id);
        out
    }

    /// Constant truth value when the constraint mentions no variables.
    pub fn constant(&self) -> Option<bool> {
        Some(self.relation.holds(self.lhs.as_concrete()?, self.rhs.as_concrete()?))
    }
}

impl fmt::Display for AtomicConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// Splits the assertion `cond != 0` (or `cond == 0` when `truth` is false)
/// into atomic constraints.
///
/// Relations become atoms directly, negations are pushed inward, and
/// conjunctions (`a && b` true, `a || b` false) split into one atom per
/// operand. Anything else is compared against zero.
pub fn atoms_of(cond: &SymValue, truth: bool) -> Vec<AtomicConstraint> {
    let mut out = Vec::new();
    split(cond, truth, &mut out);
    out
}

fn split(cond: &SymValue, truth: bool, out: &mut Vec<AtomicConstraint>) {
    if let Some(app) = cond.as_app() {
        let args = &app.args;
        match (app.op, truth) {
            (SymOp::Not, _) => return split(&args[0], !truth, out),
            (SymOp::And, true) | (SymOp::Or, false) => {
                split(&args[0], truth, out);
                split(&args[1], truth, out);
                return;
            }
            (SymOp::Eq, t) => {
                let rel = if t { Relation::Eq } else { Relation::Ne };
                out.push(AtomicConstraint::new(rel, args[0].clone(), args[1].clone()));
                return;
            }
            (SymOp::Ne, t) => {
                let rel = if t { Relation::Ne } else { Relation::Eq };
                out.push(AtomicConstraint::new(rel, args[0].clone(), args[1].clone()));
                return;
            }
            (SymOp::Lt, true) => {
                out.push(AtomicConstraint::new(Relation::Lt, args[0].clone(), args[1].clone()));
                return;
            }
            (SymOp::Lt, false) => {
                out.push(AtomicConstraint::new(Relation::Le, args[1].clone(), args[0].clone()));
                return;
            }
            (SymOp::Le, true) => {
                out.push(AtomicConstraint::new(Relation::Le, args[0].clone(), args[1].clone()));
                return;
            }
            (SymOp::Le, false) => {
                out.push(AtomicConstraint::new(Relation::Lt, args[1].clone(), args[0].clone()));
                return;
            }
            _ => {}
        }
    }
    let rel = if truth { Relation::Ne } else { Relation::Eq };
    out.push(AtomicConstraint::new(rel, SymValue::Concrete(0), cond.clone()));
}
