//! Symbolic values over 32-bit two's-complement integers.

use std::fmt;
use std::sync::Arc;

use crate::flc::ast::Width;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SymVar {
    /// Index into the owning path's variable table.
    pub id: u32,
    pub base: String,
    pub instance: u32,
    pub width: Width,
    pub lo: i64,
    pub hi: i64,
    /// Injected by instrumentation rather than written by the user.
    pub metadata: bool,
}

impl SymVar {
    pub fn display_name(&self) -> String {
        display_name(&self.base, self.instance)
    }

    pub fn domain_size(&self) -> u64 {
        (self.hi - self.lo + 1) as u64
    }
}

pub fn display_name(base: &str, instance: u32) -> String {
    if instance == 1 {
        base.to_string()
    } else {
        format!("{base}_{instance}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SymOp {
    Neg,
    Not,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Eq,
    Ne,
    Lt,
    Le,
    And,
    Or,
    /// Narrowing to a smaller width on store.
    Trunc(Width),
}

impl SymOp {
    pub fn is_relation(self) -> bool {
        matches!(self, SymOp::Eq | SymOp::Ne | SymOp::Lt | SymOp::Le)
    }

    /// Results are always 0 or 1.
    pub fn is_boolean(self) -> bool {
        self.is_relation() || matches!(self, SymOp::Not | SymOp::And | SymOp::Or)
    }

    fn commutative(self) -> bool {
        matches!(
            self,
            SymOp::Add | SymOp::Mul | SymOp::Eq | SymOp::Ne | SymOp::And | SymOp::Or
        )
    }

    pub fn keyword(self) -> &'static str {
        match self {
            SymOp::Neg => "Neg",
            SymOp::Not => "Not",
            SymOp::Add => "Add",
            SymOp::Sub => "Sub",
            SymOp::Mul => "Mul",
            SymOp::Div => "Div",
            SymOp::Rem => "Rem",
            SymOp::Eq => "Eq",
            SymOp::Ne => "Ne",
            SymOp::Lt => "Lt",
            SymOp::Le => "Le",
            SymOp::And => "And",
            SymOp::Or => "Or",
            SymOp::Trunc(Width::W8) => "Trunc8",
            SymOp::Trunc(Width::W16) => "Trunc16",
            SymOp::Trunc(Width::W32) => "Trunc32",
        }
    }
}

#[derive(Debug, PartialEq, Eq, Hash)]
pub struct SymApp {
    pub op: SymOp,
    pub args: Vec<SymValue>,
    text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SymValue {
    Concrete(i64),
    Var(Arc<SymVar>),
    App(Arc<SymApp>),
}

fn wrap32(v: i64) -> i64 {
    v as i32 as i64
}

/// Concrete semantics of every operator. Division and remainder by zero
/// yield 0; callers that care fork on the divisor first.
pub fn apply(op: SymOp, args: &[i64]) -> i64 {
    let a = args[0] as i32;
    let b = args.get(1).copied().unwrap_or(0) as i32;
    let v = match op {
        SymOp::Neg => a.wrapping_neg(),
        SymOp::Not => (a == 0) as i32,
        SymOp::Add => a.wrapping_add(b),
        SymOp::Sub => a.wrapping_sub(b),
        SymOp::Mul => a.wrapping_mul(b),
        SymOp::Div => {
            if b == 0 {
                0
            } else {
                a.wrapping_div(b)
            }
        }
        SymOp::Rem => {
            if b == 0 {
                0
            } else {
                a.wrapping_rem(b)
            }
        }
        SymOp::Eq => (a == b) as i32,
        SymOp::Ne => (a != b) as i32,
        SymOp::Lt => (a < b) as i32,
        SymOp::Le => (a <= b) as i32,
        SymOp::And => (a != 0 && b != 0) as i32,
        SymOp::Or => (a != 0 || b != 0) as i32,
        SymOp::Trunc(w) => return w.wrap(a as i64),
    };
    v as i64
}

impl SymValue {
    pub fn concrete(v: i64) -> SymValue {
        SymValue::Concrete(wrap32(v))
    }

    pub fn as_concrete(&self) -> Option<i64> {
        match self {
            SymValue::Concrete(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_symbolic(&self) -> bool {
        !matches!(self, SymValue::Concrete(_))
    }

    /// Builds `op(args)`, folding constants and normalizing operand order
    /// of commutative operators by canonical text.
    pub fn app(op: SymOp, mut args: Vec<SymValue>) -> SymValue {
        if let Some(cs) = args.iter().map(SymValue::as_concrete).collect::<Option<Vec<i64>>>() {
            return SymValue::Concrete(apply(op, &cs));
        }
        match op {
            // Negating a relation flips it; relations only produce 0 or 1.
            SymOp::Not => {
                if let SymValue::App(inner) = &args[0] {
                    let (a, b) = (inner.args.first().cloned(), inner.args.get(1).cloned());
                    match (inner.op, a, b) {
                        (SymOp::Eq, Some(a), Some(b)) => return SymValue::app(SymOp::Ne, vec![a, b]),
                        (SymOp::Ne, Some(a), Some(b)) => return SymValue::app(SymOp::Eq, vec![a, b]),
                        (SymOp::Lt, Some(a), Some(b)) => return SymValue::app(SymOp::Le, vec![b, a]),
                        (SymOp::Le, Some(a), Some(b)) => return SymValue::app(SymOp::Lt, vec![b, a]),
                        (SymOp::Not, Some(a), None) => return SymValue::app(SymOp::Ne, vec![SymValue::Concrete(0), a]),
                        _ => {}
                    }
                }
            }
            SymOp::Trunc(w) => {
                if w == Width::W32 {
                    return args.pop().unwrap();
                }
                if let SymValue::Var(v) = &args[0] {
                    if v.lo >= w.min() && v.hi <= w.max() {
                        return args.pop().unwrap();
                    }
                }
                if let SymValue::App(a) = &args[0] {
                    if a.op.is_boolean() {
                        return args.pop().unwrap();
                    }
                }
            }
            _ => {}
        }
        if op.commutative() {
            args.sort_by_key(|a| a.text());
        }
        let mut text = format!("({}", op.keyword());
        for a in &args {
            text.push(' ');
            a.write_text(&mut text);
        }
        text.push(')');
        SymValue::App(Arc::new(SymApp { op, args, text }))
    }

    /// Maps an IR operator onto the symbolic operator set; `>` and `>=`
    /// become `<` and `<=` with swapped operands.
    pub fn from_ir(op: crate::flc::Op, mut args: Vec<SymValue>) -> SymValue {
        use crate::flc::Op;
        let sop = match op {
            Op::Neg => SymOp::Neg,
            Op::Not => SymOp::Not,
            Op::Add => SymOp::Add,
            Op::Sub => SymOp::Sub,
            Op::Mul => SymOp::Mul,
            Op::Div => SymOp::Div,
            Op::Rem => SymOp::Rem,
            Op::Eq => SymOp::Eq,
            Op::Ne => SymOp::Ne,
            Op::Lt => SymOp::Lt,
            Op::Le => SymOp::Le,
            Op::Gt => {
                args.swap(0, 1);
                SymOp::Lt
            }
            Op::Ge => {
                args.swap(0, 1);
                SymOp::Le
            }
            Op::And => SymOp::And,
            Op::Or => SymOp::Or,
        };
        SymValue::app(sop, args)
    }

    pub fn text(&self) -> String {
        match self {
            SymValue::App(a) => a.text.clone(),
            _ => {
                let mut s = String::new();
                self.write_text(&mut s);
                s
            }
        }
    }

    fn write_text(&self, out: &mut String) {
        match self {
            SymValue::Concrete(v) => out.push_str(&v.to_string()),
            SymValue::Var(v) => out.push_str(&v.display_name()),
            SymValue::App(a) => out.push_str(&a.text),
        }
    }

    /// Evaluates under `assign`, which maps variable ids to values. Returns
    /// `None` if some variable is unassigned.
    pub fn eval(&self, assign: &dyn Fn(&SymVar) -> Option<i64>) -> Option<i64> {
        match self {
            SymValue::Concrete(v) => Some(*v),
            SymValue::Var(v) => assign(v),
            SymValue::App(a) => {
                let mut vals = [0i64; 2];
                for (i, arg) in a.args.iter().enumerate() {
                    vals[i] = arg.eval(assign)?;
                }
                Some(apply(a.op, &vals[..a.args.len()]))
            }
        }
    }

    /// Pushes every variable occurring in the value (with repetitions).
    pub fn collect_vars(&self, out: &mut Vec<Arc<SymVar>>) {
        match self {
            SymValue::Concrete(_) => {}
            SymValue::Var(v) => out.push(v.clone()),
            SymValue::App(a) => a.args.iter().for_each(|x| x.collect_vars(out)),
        }
    }

    pub fn as_var(&self) -> Option<&Arc<SymVar>> {
        match self {
            SymValue::Var(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_app(&self) -> Option<&SymApp> {
        match self {
            SymValue::App(a) => Some(a),
            _ => None,
        }
    }
}

impl fmt::Display for SymValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(id: u32, name: &str, lo: i64, hi: i64) -> SymValue {
        SymValue::Var(Arc::new(SymVar {
            id,
            base: name.into(),
            instance: 1,
            width: Width::W32,
            lo,
            hi,
            metadata: false,
        }))
    }

    #[test]
    fn constants_fold_with_wrapping() {
        let v = SymValue::app(
            SymOp::Add,
            vec![SymValue::concrete(i32::MAX as i64), SymValue::concrete(1)],
        );
        assert_eq!(v, SymValue::Concrete(i32::MIN as i64));
        assert_eq!(apply(SymOp::Div, &[7, 0]), 0);
        assert_eq!(apply(SymOp::Div, &[i32::MIN as i64, -1]), i32::MIN as i64);
        assert_eq!(apply(SymOp::Trunc(Width::W8), &[200]), -56);
    }

    #[test]
    fn commutative_operands_sorted() {
        let x = var(0, "x", 0, 7);
        let a = SymValue::app(SymOp::Add, vec![x.clone(), SymValue::concrete(1)]);
        let b = SymValue::app(SymOp::Add, vec![SymValue::concrete(1), x]);
        assert_eq!(a.text(), "(Add 1 x)");
        assert_eq!(a, b);
    }

    #[test]
    fn not_of_relation_flips() {
        let x = var(0, "x", 0, 7);
        let lt = SymValue::from_ir(crate::flc::Op::Lt, vec![x.clone(), SymValue::concrete(3)]);
        let n = SymValue::app(SymOp::Not, vec![lt]);
        assert_eq!(n.text(), "(Le 3 x)");
        let gt = SymValue::from_ir(crate::flc::Op::Gt, vec![SymValue::concrete(3), x]);
        assert_eq!(gt.text(), "(Lt x 3)");
    }

    #[test]
    fn display_names() {
        assert_eq!(display_name("fRes", 1), "fRes");
        assert_eq!(display_name("fRes", 2), "fRes_2");
    }
}
