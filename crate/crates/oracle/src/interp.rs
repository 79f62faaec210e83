//! Concrete interpreter over the syntax tree, enumerating every choice of
//! every `make_symbolic` input.
//!
//! It shares no code with the lowering or the symbolic engine: directives
//! are evaluated while walking statements, loops are counted directly, and
//! metadata variables take the value the function returns.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use featint_core::flc::ast::{BinOp, Expr, FunctionDef, GlobalDecl, Item, LValue, Stmt, StmtKind, UnOp, Width};
use featint_core::flc::{ProductDef, SourceUnit};
use featint_core::symex::{ExtractResult, PathStatus, SymVar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Termination {
    Normal,
    Failure,
    BoundExhausted,
}

/// One complete concrete run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConcreteRun {
    pub termination: Termination,
    pub spec_id: Option<String>,
    /// Value of every symbolic input, keyed by display name (`x`, `x_2`, ...).
    pub assignment: BTreeMap<String, i64>,
}

pub fn display_name(base: &str, instance: u32) -> String {
    if instance == 1 {
        base.to_string()
    } else {
        format!("{base}_{instance}")
    }
}

fn wrap32(v: i64) -> i64 {
    v as i32 as i64
}

fn wrap(width: Width, v: i64) -> i64 {
    match width {
        Width::W8 => v as i8 as i64,
        Width::W16 => v as i16 as i64,
        Width::W32 => v as i32 as i64,
    }
}

fn width_range(width: Width) -> (i64, i64) {
    let bits = match width {
        Width::W8 => 8,
        Width::W16 => 16,
        Width::W32 => 32,
    };
    (-(1i64 << (bits - 1)), (1i64 << (bits - 1)) - 1)
}

struct Object {
    width: Width,
    cells: Vec<i64>,
}

struct Frame<'p> {
    def: &'p FunctionDef,
    locals: HashMap<String, Object>,
    /// Names declared anywhere in the body.
    local_names: BTreeSet<String>,
}

enum Flow {
    Next,
    Return(Option<i64>),
}

enum Stop {
    Terminated(Termination, Option<String>),
    /// An `assume` failed: this input has no path.
    Infeasible,
    /// The choice prefix ran out; the run must be extended.
    NeedChoice(i64, i64),
    Unsupported(String),
}

struct Program<'p> {
    enabled: &'p BTreeSet<String>,
    functions: HashMap<&'p str, &'p FunctionDef>,
    globals: Vec<&'p GlobalDecl>,
}

fn select<'p>(items: &'p [Item], enabled: &BTreeSet<String>, p: &mut Program<'p>) {
    for item in items {
        match item {
            Item::Global(g) => p.globals.push(g),
            Item::Function(f) => {
                p.functions.insert(&f.name, f);
            }
            Item::Directive(d) => {
                if d.cond.eval(enabled) {
                    select(&d.then_part, enabled, p);
                } else if let Some(e) = &d.else_part {
                    select(e, enabled, p);
                }
            }
            Item::Features { .. } => {}
        }
    }
}

fn collect_decls(stmts: &[Stmt], out: &mut BTreeSet<String>) {
    for s in stmts {
        match &s.kind {
            StmtKind::Decl { name, .. } => {
                out.insert(name.clone());
            }
            StmtKind::If {
                then_block, else_block, ..
            } => {
                collect_decls(then_block, out);
                if let Some(e) = else_block {
                    collect_decls(e, out);
                }
            }
            StmtKind::While { body, .. } | StmtKind::Block(body) => collect_decls(body, out),
            StmtKind::Directive(d) => {
                collect_decls(&d.then_part, out);
                if let Some(e) = &d.else_part {
                    collect_decls(e, out);
                }
            }
            _ => {}
        }
    }
}

struct Run<'p> {
    prog: &'p Program<'p>,
    loop_bound: usize,
    globals: HashMap<String, Object>,
    frames: Vec<Frame<'p>>,
    choices: &'p [i64],
    used: usize,
    instances: HashMap<String, u32>,
    assignment: BTreeMap<String, i64>,
}

type R<T> = Result<T, Stop>;

impl<'p> Run<'p> {
    fn fail(spec: Option<String>) -> Stop {
        Stop::Terminated(Termination::Failure, spec)
    }

    fn object_mut(&mut self, name: &str) -> R<&mut Object> {
        let frame = self.frames.last_mut().unwrap();
        if let Some(o) = frame.locals.get_mut(name) {
            return Ok(o);
        }
        if frame.local_names.contains(name) && self.globals.contains_key(name) {
            return Err(Stop::Unsupported(format!("`{name}` used before its local declaration")));
        }
        self.globals
            .get_mut(name)
            .ok_or_else(|| Stop::Unsupported(format!("unknown variable `{name}`")))
    }

    fn index(&mut self, lv: &LValue) -> R<i64> {
        match &lv.index {
            None => Ok(0),
            Some(e) => self.eval(e),
        }
    }

    fn load(&mut self, lv: &LValue) -> R<i64> {
        let i = self.index(lv)?;
        let o = self.object_mut(&lv.name)?;
        if i < 0 || i as usize >= o.cells.len() {
            return Err(Self::fail(None));
        }
        Ok(o.cells[i as usize])
    }

    fn store_at(&mut self, name: &str, i: i64, v: i64) -> R<()> {
        let o = self.object_mut(name)?;
        if i < 0 || i as usize >= o.cells.len() {
            return Err(Self::fail(None));
        }
        o.cells[i as usize] = wrap(o.width, v);
        Ok(())
    }

    fn eval(&mut self, e: &Expr) -> R<i64> {
        Ok(match e {
            Expr::Int(v) => wrap32(*v),
            Expr::Var(lv) => self.load(lv)?,
            Expr::Unary(op, a) => {
                let a = self.eval(a)? as i32;
                match op {
                    UnOp::Neg => a.wrapping_neg() as i64,
                    UnOp::Not => (a == 0) as i64,
                }
            }
            Expr::Binary(op, l, r) => {
                // Both operands are always evaluated, `&&` and `||` included.
                let a = self.eval(l)? as i32;
                let b = self.eval(r)? as i32;
                (match op {
                    BinOp::Add => a.wrapping_add(b),
                    BinOp::Sub => a.wrapping_sub(b),
                    BinOp::Mul => a.wrapping_mul(b),
                    BinOp::Div | BinOp::Rem if b == 0 => return Err(Self::fail(None)),
                    BinOp::Div => a.wrapping_div(b),
                    BinOp::Rem => a.wrapping_rem(b),
                    BinOp::Eq => (a == b) as i32,
                    BinOp::Ne => (a != b) as i32,
                    BinOp::Lt => (a < b) as i32,
                    BinOp::Le => (a <= b) as i32,
                    BinOp::Gt => (a > b) as i32,
                    BinOp::Ge => (a >= b) as i32,
                    BinOp::And => (a != 0 && b != 0) as i32,
                    BinOp::Or => (a != 0 || b != 0) as i32,
                }) as i64
            }
            Expr::Call { name, args } => self.call(name, args)?.unwrap_or(0),
        })
    }

    fn call(&mut self, name: &str, args: &[Expr]) -> R<Option<i64>> {
        let mut values = Vec::with_capacity(args.len());
        for a in args {
            values.push(self.eval(a)?);
        }
        let def = *self
            .prog
            .functions
            .get(name)
            .ok_or_else(|| Stop::Unsupported(format!("unknown function `{name}`")))?;
        let mut local_names = BTreeSet::new();
        collect_decls(&def.body, &mut local_names);
        let mut locals = HashMap::new();
        for (p, v) in def.params.iter().zip(values) {
            locals.insert(
                p.name.clone(),
                Object {
                    width: p.width,
                    cells: vec![wrap(p.width, v)],
                },
            );
            local_names.insert(p.name.clone());
        }
        self.frames.push(Frame {
            def,
            locals,
            local_names,
        });
        let flow = self.block(&def.body)?;
        let value = match flow {
            Flow::Return(v) => v,
            Flow::Next => def.ret.map(|_| 0),
        };
        if let (Some(meta), Some(v)) = (&def.meta_var, value) {
            let n = self.instances.get(meta).copied().unwrap_or(0);
            self.assignment.insert(display_name(meta, n), wrap32(v));
            self.store_at(meta, 0, v)?;
        }
        self.frames.pop();
        Ok(value)
    }

    fn block(&mut self, stmts: &[Stmt]) -> R<Flow> {
        for s in stmts {
            match self.stmt(s)? {
                Flow::Next => {}
                other => return Ok(other),
            }
        }
        Ok(Flow::Next)
    }

    fn choose(&mut self, lo: i64, hi: i64) -> R<i64> {
        if lo == hi {
            return Ok(lo);
        }
        match self.choices.get(self.used) {
            Some(&v) => {
                self.used += 1;
                Ok(v)
            }
            None => Err(Stop::NeedChoice(lo, hi)),
        }
    }

    fn stmt(&mut self, s: &Stmt) -> R<Flow> {
        match &s.kind {
            StmtKind::Decl { name, width, len, init } => {
                let v = match init {
                    Some(e) => Some(self.eval(e)?),
                    None => None,
                };
                let frame = self.frames.last_mut().unwrap();
                let obj = frame.locals.entry(name.clone()).or_insert_with(|| Object {
                    width: *width,
                    cells: vec![0; len.unwrap_or(1) as usize],
                });
                if let Some(v) = v {
                    obj.cells[0] = wrap(*width, v);
                }
            }
            StmtKind::Assign { target, value } => {
                let i = self.index(target)?;
                let v = self.eval(value)?;
                self.store_at(&target.name, i, v)?;
            }
            StmtKind::Call { name, args } => {
                self.call(name, args)?;
            }
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                if self.eval(cond)? != 0 {
                    return self.block(then_block);
                } else if let Some(e) = else_block {
                    return self.block(e);
                }
            }
            StmtKind::While { cond, body } => {
                let mut iterations = 0;
                while self.eval(cond)? != 0 {
                    if iterations == self.loop_bound {
                        return Err(Stop::Terminated(Termination::BoundExhausted, None));
                    }
                    iterations += 1;
                    match self.block(body)? {
                        Flow::Next => {}
                        other => return Ok(other),
                    }
                }
            }
            StmtKind::Return(e) => {
                let v = match e {
                    Some(e) => Some(self.eval(e)?),
                    None => None,
                };
                return Ok(Flow::Return(v));
            }
            StmtKind::MakeSymbolic { target, range } => {
                let i = self.index(target)?;
                let width = self.object_mut(&target.name)?.width;
                {
                    let o = self.object_mut(&target.name)?;
                    if i < 0 || i as usize >= o.cells.len() {
                        return Err(Self::fail(None));
                    }
                }
                let n = {
                    let c = self.instances.entry(target.name.clone()).or_insert(0);
                    *c += 1;
                    *c
                };
                let meta = self.frames.last().unwrap().def.meta_var.as_deref() == Some(target.name.as_str());
                if !meta {
                    let (lo, hi) = range.unwrap_or_else(|| width_range(width));
                    let v = self.choose(lo, hi)?;
                    self.assignment.insert(display_name(&target.name, n), v);
                    self.store_at(&target.name, i, v)?;
                }
            }
            StmtKind::Assume(e) => {
                if self.eval(e)? == 0 {
                    return Err(Stop::Infeasible);
                }
            }
            StmtKind::Assert(e) => {
                if self.eval(e)? == 0 {
                    return Err(Self::fail(None));
                }
            }
            StmtKind::Fail { spec } => return Err(Self::fail(spec.clone())),
            StmtKind::Block(b) => return self.block(b),
            StmtKind::Directive(d) => {
                if d.cond.eval(self.prog.enabled) {
                    return self.block(&d.then_part);
                } else if let Some(e) = &d.else_part {
                    return self.block(e);
                }
            }
        }
        Ok(Flow::Next)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EnumError {
    /// More runs than the caller allowed.
    TooManyRuns(usize),
    Unsupported(String),
}

/// Runs `product` of `unit` once per combination of symbolic choices.
/// Runs whose `assume` fails are not reported.
pub fn enumerate_runs(
    unit: &SourceUnit,
    product: &ProductDef,
    loop_bound: usize,
    max_runs: usize,
) -> Result<Vec<ConcreteRun>, EnumError> {
    let mut prog = Program {
        enabled: &product.enabled,
        functions: HashMap::new(),
        globals: Vec::new(),
    };
    select(&unit.items, &product.enabled, &mut prog);
    let mut out = Vec::new();
    let mut pending: Vec<Vec<i64>> = vec![Vec::new()];
    let mut runs = 0;
    while let Some(prefix) = pending.pop() {
        runs += 1;
        if runs > max_runs {
            return Err(EnumError::TooManyRuns(max_runs));
        }
        let globals = prog
            .globals
            .iter()
            .map(|g| {
                let init = wrap(g.width, g.init.unwrap_or(0));
                (
                    g.name.clone(),
                    Object {
                        width: g.width,
                        cells: vec![init; g.len.unwrap_or(1) as usize],
                    },
                )
            })
            .collect();
        let mut run = Run {
            prog: &prog,
            loop_bound,
            globals,
            frames: Vec::new(),
            choices: &prefix,
            used: 0,
            instances: HashMap::new(),
            assignment: BTreeMap::new(),
        };
        let stop = match run.call("main", &[]) {
            Ok(_) => Stop::Terminated(Termination::Normal, None),
            Err(s) => s,
        };
        match stop {
            Stop::Terminated(termination, spec_id) => out.push(ConcreteRun {
                termination,
                spec_id,
                assignment: run.assignment,
            }),
            Stop::Infeasible => {}
            Stop::NeedChoice(lo, hi) => {
                // Reverse so that smaller values are explored first.
                for v in (lo..=hi).rev() {
                    let mut next = prefix.clone();
                    next.push(v);
                    pending.push(next);
                }
            }
            Stop::Unsupported(m) => return Err(EnumError::Unsupported(m)),
        }
    }
    Ok(out)
}

/// Checks that `runs` map one-to-one onto the terminated paths of `result`:
/// every run satisfies the path condition of exactly one path, with the same
/// termination and spec id, and every path is reached by some run.
pub fn match_paths(result: &ExtractResult, runs: &[ConcreteRun]) -> Result<(), String> {
    let mut hit = vec![0usize; result.paths.len()];
    for run in runs {
        let lookup = |v: &SymVar| run.assignment.get(&v.display_name()).copied();
        let matching: Vec<usize> = (0..result.paths.len())
            .filter(|&k| result.paths[k].satisfied_by(&lookup))
            .collect();
        let [k] = matching[..] else {
            return Err(format!(
                "{}: input {:?} matches {} paths",
                result.product,
                run.assignment,
                matching.len()
            ));
        };
        let p = &result.paths[k];
        let status = match p.status {
            PathStatus::Normal => Termination::Normal,
            PathStatus::Failure => Termination::Failure,
            PathStatus::BoundExhausted => Termination::BoundExhausted,
            PathStatus::Active => return Err(format!("{}: path {k} still active", result.product)),
        };
        if status != run.termination || p.spec_id != run.spec_id {
            return Err(format!(
                "{}: input {:?} ends {:?}/{:?} concretely but {:?}/{:?} symbolically",
                result.product, run.assignment, run.termination, run.spec_id, status, p.spec_id
            ));
        }
        hit[k] += 1;
    }
    if let Some(k) = hit.iter().position(|&h| h == 0) {
        return Err(format!(
            "{}: path {k} ({:?}, atoms {:?}) reached by no input",
            result.product,
            result.paths[k].status,
            result.paths[k].atom_texts()
        ));
    }
    Ok(())
}
