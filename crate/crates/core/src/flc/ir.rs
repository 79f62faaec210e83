//! Three-address IR of one product.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::ast::Width;
use super::feature::FeatureExpr;
use super::product::ProductDef;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SrcLoc {
    pub file: Arc<str>,
    pub line: u32,
}

impl fmt::Display for SrcLoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.file, self.line)
    }
}

pub type TempId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operand {
    Const(i64),
    Temp(TempId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
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
    Gt,
    Ge,
    And,
    Or,
}

impl Op {
    pub fn arity(self) -> usize {
        match self {
            Op::Neg | Op::Not => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObjectScope {
    Global,
    Local,
}

/// Reference to a global, or to a local of the enclosing function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjRef {
    pub scope: ObjectScope,
    pub index: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryObjectDecl {
    /// Qualified identifier: `g` for globals, `f::x` for locals of `f`.
    pub id: String,
    pub name: String,
    pub count: u32,
    pub width: Width,
    /// Owning function for locals.
    pub function: Option<String>,
    /// Initial value of every element.
    pub init: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InstKind {
    Assign {
        dst: TempId,
        op: Op,
        args: Vec<Operand>,
    },
    /// `tracked = false` marks accesses introduced by instrumentation; they
    /// never take part in data-flow dependencies.
    Load {
        dst: TempId,
        obj: ObjRef,
        index: Operand,
        tracked: bool,
    },
    Store {
        obj: ObjRef,
        index: Operand,
        value: Operand,
        tracked: bool,
    },
    /// `cond = None` is an unconditional jump to `then_target`.
    Branch {
        cond: Option<Operand>,
        then_target: usize,
        else_target: usize,
    },
    Call {
        dst: Option<TempId>,
        callee: String,
        args: Vec<Operand>,
    },
    Return {
        value: Option<Operand>,
    },
    MakeSymbolic {
        obj: ObjRef,
        index: Operand,
        name: String,
        lo: i64,
        hi: i64,
        metadata: bool,
    },
    Assume {
        cond: Operand,
    },
    Assert {
        cond: Operand,
    },
    Fail {
        spec: Option<String>,
    },
    /// Loop bound exhausted.
    Halt,
}

impl InstKind {
    pub fn name(&self) -> &'static str {
        match self {
            InstKind::Assign { .. } => "assign",
            InstKind::Load { .. } => "load",
            InstKind::Store { .. } => "store",
            InstKind::Branch { .. } => "branch",
            InstKind::Call { .. } => "call",
            InstKind::Return { .. } => "return",
            InstKind::MakeSymbolic { .. } => "make_symbolic",
            InstKind::Assume { .. } => "assume",
            InstKind::Assert { .. } => "assert",
            InstKind::Fail { .. } => "fail",
            InstKind::Halt => "halt",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IrInstruction {
    pub kind: InstKind,
    pub loc: SrcLoc,
    pub presence: FeatureExpr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IrFunction {
    pub name: String,
    /// The first `params` locals are the parameters; arguments arrive in
    /// temps `0..params`.
    pub params: u32,
    pub locals: Vec<MemoryObjectDecl>,
    pub temps: u32,
    pub body: Vec<IrInstruction>,
    pub returns_value: bool,
    pub loc: SrcLoc,
    pub presence: FeatureExpr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IrProgram {
    pub product: ProductDef,
    pub file: Arc<str>,
    pub functions: BTreeMap<String, IrFunction>,
    pub globals: Vec<MemoryObjectDecl>,
    pub entry: String,
}

impl IrProgram {
    pub fn function(&self, name: &str) -> &IrFunction {
        &self.functions[name]
    }

    pub fn object<'a>(&'a self, func: &'a IrFunction, r: ObjRef) -> &'a MemoryObjectDecl {
        match r.scope {
            ObjectScope::Global => &self.globals[r.index as usize],
            ObjectScope::Local => &func.locals[r.index as usize],
        }
    }

    pub fn instructions(&self) -> impl Iterator<Item = (&IrFunction, &IrInstruction)> {
        self.functions.values().flat_map(|f| f.body.iter().map(move |i| (f, i)))
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Const(v) => write!(f, "{v}"),
            Operand::Temp(t) => write!(f, "%{t}"),
        }
    }
}

impl fmt::Display for IrFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "fn {} ({} params):", self.name, self.params)?;
        for (i, inst) in self.body.iter().enumerate() {
            let obj = |r: &ObjRef| match r.scope {
                ObjectScope::Global => format!("@{}", r.index),
                ObjectScope::Local => format!("${}", self.locals[r.index as usize].name),
            };
            let text = match &inst.kind {
                InstKind::Assign { dst, op, args } => {
                    let a: Vec<String> = args.iter().map(|a| a.to_string()).collect();
                    format!("%{dst} = {op:?} {}", a.join(", "))
                }
                InstKind::Load { dst, obj: o, index, .. } => {
                    format!("%{dst} = load {}[{index}]", obj(o))
                }
                InstKind::Store {
                    obj: o, index, value, ..
                } => format!("store {value} -> {}[{index}]", obj(o)),
                InstKind::Branch {
                    cond: Some(c),
                    then_target,
                    else_target,
                } => format!("br {c} ? {then_target} : {else_target}"),
                InstKind::Branch { then_target, .. } => format!("jmp {then_target}"),
                InstKind::Call { dst, callee, args } => {
                    let a: Vec<String> = args.iter().map(|a| a.to_string()).collect();
                    match dst {
                        Some(d) => format!("%{d} = call {callee}({})", a.join(", ")),
                        None => format!("call {callee}({})", a.join(", ")),
                    }
                }
                InstKind::Return { value: Some(v) } => format!("ret {v}"),
                InstKind::Return { value: None } => "ret".into(),
                InstKind::MakeSymbolic {
                    obj: o, name, lo, hi, ..
                } => format!("make_symbolic {} \"{name}\" [{lo}, {hi}]", obj(o)),
                InstKind::Assume { cond } => format!("assume {cond}"),
                InstKind::Assert { cond } => format!("assert {cond}"),
                InstKind::Fail { spec } => format!("fail {spec:?}"),
                InstKind::Halt => "halt".into(),
            };
            writeln!(f, "  {i:4}: {text:<40} ; line {}", inst.loc.line)?;
        }
        Ok(())
    }
}
