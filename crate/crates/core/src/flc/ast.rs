//! Syntax tree of an FLC source unit.
//!
//! Feature directives are part of the tree: a `#if` block is a node holding
//! the items or statements of its two branches, so directive scopes always
//! align with syntactic boundaries.

use super::feature::FeatureExpr;

/// Storage width of an integer object, in bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Width {
    W8,
    W16,
    W32,
}

impl Width {
    pub fn bits(self) -> u32 {
        match self {
            Width::W8 => 8,
            Width::W16 => 16,
            Width::W32 => 32,
        }
    }

    pub fn from_bits(bits: u32) -> Option<Width> {
        match bits {
            8 => Some(Width::W8),
            16 => Some(Width::W16),
            32 => Some(Width::W32),
            _ => None,
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            Width::W8 => "int8",
            Width::W16 => "int16",
            Width::W32 => "int",
        }
    }

    pub fn min(self) -> i64 {
        -(1i64 << (self.bits() - 1))
    }

    pub fn max(self) -> i64 {
        (1i64 << (self.bits() - 1)) - 1
    }

    /// Two's-complement truncation to this width.
    pub fn wrap(self, v: i64) -> i64 {
        match self {
            Width::W8 => v as i8 as i64,
            Width::W16 => v as i16 as i64,
            Width::W32 => v as i32 as i64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
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

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LValue {
    pub name: String,
    pub index: Option<Box<Expr>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Int(i64),
    Var(LValue),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call { name: String, args: Vec<Expr> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub line: u32,
    /// Last source line spanned by the statement.
    pub end_line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    Decl {
        name: String,
        width: Width,
        len: Option<u32>,
        init: Option<Expr>,
    },
    Assign {
        target: LValue,
        value: Expr,
    },
    Call {
        name: String,
        args: Vec<Expr>,
    },
    If {
        cond: Expr,
        then_block: Vec<Stmt>,
        else_block: Option<Vec<Stmt>>,
    },
    While {
        cond: Expr,
        body: Vec<Stmt>,
    },
    Return(Option<Expr>),
    MakeSymbolic {
        target: LValue,
        range: Option<(i64, i64)>,
    },
    Assume(Expr),
    Assert(Expr),
    Fail {
        spec: Option<String>,
    },
    Block(Vec<Stmt>),
    Directive(Directive<Stmt>),
}

/// A `#if cond ... [#else ...] #endif` region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Directive<T> {
    pub cond: FeatureExpr,
    pub then_part: Vec<T>,
    pub else_part: Option<Vec<T>>,
    pub if_line: u32,
    pub else_line: Option<u32>,
    pub endif_line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub width: Width,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalDecl {
    pub name: String,
    pub width: Width,
    pub len: Option<u32>,
    pub init: Option<i64>,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionDef {
    pub name: String,
    /// `None` for `void` functions.
    pub ret: Option<Width>,
    pub params: Vec<Param>,
    pub body: Vec<Stmt>,
    pub line: u32,
    pub end_line: u32,
    /// Metadata variable constrained to the return value at every return.
    pub meta_var: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Item {
    Features { names: Vec<String>, line: u32 },
    Global(GlobalDecl),
    Function(FunctionDef),
    Directive(Directive<Item>),
}

impl Item {
    pub fn line(&self) -> u32 {
        match self {
            Item::Features { line, .. } => *line,
            Item::Global(g) => g.line,
            Item::Function(f) => f.line,
            Item::Directive(d) => d.if_line,
        }
    }
}

/// Visits every function definition in `items`, including those nested in
/// directive blocks, together with the presence condition of its scope.
pub fn walk_functions<'a>(items: &'a [Item], presence: &FeatureExpr, f: &mut dyn FnMut(&'a FunctionDef, &FeatureExpr)) {
    for item in items {
        match item {
            Item::Function(def) => f(def, presence),
            Item::Directive(d) => {
                let then_p = FeatureExpr::and([presence.clone(), d.cond.clone()]);
                walk_functions(&d.then_part, &then_p, f);
                if let Some(else_part) = &d.else_part {
                    let else_p = FeatureExpr::and([presence.clone(), FeatureExpr::not(d.cond.clone())]);
                    walk_functions(else_part, &else_p, f);
                }
            }
            _ => {}
        }
    }
}

pub fn walk_globals<'a>(items: &'a [Item], f: &mut dyn FnMut(&'a GlobalDecl)) {
    for item in items {
        match item {
            Item::Global(g) => f(g),
            Item::Directive(d) => {
                walk_globals(&d.then_part, f);
                if let Some(e) = &d.else_part {
                    walk_globals(e, f);
                }
            }
            _ => {}
        }
    }
}

/// Visits every statement (pre-order), descending into nested blocks.
pub fn walk_stmts<'a>(stmts: &'a [Stmt], f: &mut dyn FnMut(&'a Stmt)) {
    for s in stmts {
        f(s);
        match &s.kind {
            StmtKind::If {
                then_block, else_block, ..
            } => {
                walk_stmts(then_block, f);
                if let Some(e) = else_block {
                    walk_stmts(e, f);
                }
            }
            StmtKind::While { body, .. } | StmtKind::Block(body) => walk_stmts(body, f),
            StmtKind::Directive(d) => {
                walk_stmts(&d.then_part, f);
                if let Some(e) = &d.else_part {
                    walk_stmts(e, f);
                }
            }
            _ => {}
        }
    }
}

pub fn walk_stmts_mut(stmts: &mut [Stmt], f: &mut dyn FnMut(&mut Stmt)) {
    for s in stmts {
        f(s);
        match &mut s.kind {
            StmtKind::If {
                then_block, else_block, ..
            } => {
                walk_stmts_mut(then_block, f);
                if let Some(e) = else_block {
                    walk_stmts_mut(e, f);
                }
            }
            StmtKind::While { body, .. } | StmtKind::Block(body) => walk_stmts_mut(body, f),
            StmtKind::Directive(d) => {
                walk_stmts_mut(&mut d.then_part, f);
                if let Some(e) = &mut d.else_part {
                    walk_stmts_mut(e, f);
                }
            }
            _ => {}
        }
    }
}

impl Expr {
    pub fn walk(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Int(_) => {}
            Expr::Var(lv) => {
                if let Some(i) = &lv.index {
                    i.walk(f)
                }
            }
            Expr::Unary(_, e) => e.walk(f),
            Expr::Binary(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            Expr::Call { args, .. } => args.iter().for_each(|a| a.walk(f)),
        }
    }
}
