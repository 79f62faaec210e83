use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use super::ast::*;
use super::feature::FeatureExpr;
use super::ir::*;
use super::product::ProductDef;
use super::{FlcError, SourceUnit};

pub const DEFAULT_LOOP_BOUND: i64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LowerOptions {
    pub loop_bound: i64,
}

impl Default for LowerOptions {
    fn default() -> Self {
        LowerOptions {
            loop_bound: DEFAULT_LOOP_BOUND,
        }
    }
}

/// Selects the code of `product` from `unit` and lowers it to IR.
///
/// Directive conditions are evaluated against `product.enabled`; retained
/// instructions carry the presence condition of their original scope. Loops
/// are unrolled `loop_bound` times, followed by a `halt` reached only when the
/// loop condition still holds.
pub fn resolve_product(unit: &SourceUnit, product: &ProductDef, opts: &LowerOptions) -> Result<IrProgram, FlcError> {
    product.validate(unit)?;
    if opts.loop_bound <= 0 {
        return Err(FlcError::LoopBound(opts.loop_bound));
    }
    let mut globals_ast = Vec::new();
    let mut functions_ast = Vec::new();
    select_items(
        &unit.items,
        &FeatureExpr::True,
        &product.enabled,
        &mut globals_ast,
        &mut functions_ast,
    );

    let file: Arc<str> = Arc::from(unit.path.as_str());
    let mut globals = Vec::new();
    let mut global_ix = HashMap::new();
    for g in &globals_ast {
        if global_ix.contains_key(&g.name) {
            return Err(FlcError::Semantic {
                line: g.line,
                message: format!("global `{}` defined twice in product `{}`", g.name, product.name),
            });
        }
        global_ix.insert(g.name.clone(), globals.len() as u32);
        globals.push(MemoryObjectDecl {
            id: g.name.clone(),
            name: g.name.clone(),
            count: g.len.unwrap_or(1),
            width: g.width,
            function: None,
            init: g.width.wrap(g.init.unwrap_or(0)),
        });
    }

    let mut sigs: HashMap<&str, (usize, bool)> = HashMap::new();
    for (f, _) in &functions_ast {
        if sigs.insert(&f.name, (f.params.len(), f.ret.is_some())).is_some() {
            return Err(FlcError::Semantic {
                line: f.line,
                message: format!("function `{}` defined twice in product `{}`", f.name, product.name),
            });
        }
    }
    let all_functions = unit.function_names();

    let mut functions = BTreeMap::new();
    for (f, presence) in &functions_ast {
        let lowered = FnLower {
            def: f,
            product,
            enabled: &product.enabled,
            file: file.clone(),
            globals: &globals,
            global_ix: &global_ix,
            sigs: &sigs,
            all_functions: &all_functions,
            loop_bound: opts.loop_bound as usize,
            locals: Vec::new(),
            local_ix: HashMap::new(),
            temps: f.params.len() as u32,
            body: Vec::new(),
            meta: None,
        }
        .lower(presence.clone())?;
        functions.insert(f.name.clone(), lowered);
    }

    let entry = "main".to_string();
    match functions.get(&entry) {
        None => {
            return Err(FlcError::Semantic {
                line: 0,
                message: format!("product `{}` has no `main` function", product.name),
            })
        }
        Some(m) if m.params != 0 => {
            return Err(FlcError::Semantic {
                line: m.loc.line,
                message: "`main` must not take parameters".into(),
            })
        }
        _ => {}
    }
    check_recursion(&functions)?;

    Ok(IrProgram {
        product: product.clone(),
        file,
        functions,
        globals,
        entry,
    })
}

fn select_items<'a>(
    items: &'a [Item],
    presence: &FeatureExpr,
    enabled: &BTreeSet<String>,
    globals: &mut Vec<&'a GlobalDecl>,
    functions: &mut Vec<(&'a FunctionDef, FeatureExpr)>,
) {
    for item in items {
        match item {
            Item::Features { .. } => {}
            Item::Global(g) => globals.push(g),
            Item::Function(f) => functions.push((f, presence.clone())),
            Item::Directive(d) => {
                if d.cond.eval(enabled) {
                    let p = FeatureExpr::and([presence.clone(), d.cond.clone()]);
                    select_items(&d.then_part, &p, enabled, globals, functions);
                } else if let Some(e) = &d.else_part {
                    let p = FeatureExpr::and([presence.clone(), FeatureExpr::not(d.cond.clone())]);
                    select_items(e, &p, enabled, globals, functions);
                }
            }
        }
    }
}

fn check_recursion(functions: &BTreeMap<String, IrFunction>) -> Result<(), FlcError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    fn visit(
        name: &str,
        functions: &BTreeMap<String, IrFunction>,
        marks: &mut HashMap<String, Mark>,
        path: &mut Vec<String>,
    ) -> Result<(), FlcError> {
        match marks.get(name).copied().unwrap_or(Mark::New) {
            Mark::Done => return Ok(()),
            Mark::Active => {
                let start = path.iter().position(|p| p == name).unwrap();
                let mut cycle = path[start..].to_vec();
                cycle.push(name.to_string());
                return Err(FlcError::Recursion {
                    cycle: cycle.join(" -> "),
                });
            }
            Mark::New => {}
        }
        marks.insert(name.to_string(), Mark::Active);
        path.push(name.to_string());
        let callees: BTreeSet<&str> = functions[name]
            .body
            .iter()
            .filter_map(|i| match &i.kind {
                InstKind::Call { callee, .. } => Some(callee.as_str()),
                _ => None,
            })
            .collect();
        for c in callees {
            visit(c, functions, marks, path)?;
        }
        path.pop();
        marks.insert(name.to_string(), Mark::Done);
        Ok(())
    }
    let mut marks = HashMap::new();
    for name in functions.keys() {
        visit(name, functions, &mut marks, &mut Vec::new())?;
    }
    Ok(())
}

struct FnLower<'a> {
    def: &'a FunctionDef,
    product: &'a ProductDef,
    enabled: &'a BTreeSet<String>,
    file: Arc<str>,
    globals: &'a [MemoryObjectDecl],
    global_ix: &'a HashMap<String, u32>,
    sigs: &'a HashMap<&'a str, (usize, bool)>,
    all_functions: &'a BTreeSet<String>,
    loop_bound: usize,
    locals: Vec<MemoryObjectDecl>,
    /// name -> (local index, declaring line)
    local_ix: HashMap<String, (u32, u32)>,
    temps: u32,
    body: Vec<IrInstruction>,
    meta: Option<ObjRef>,
}

impl FnLower<'_> {
    fn lower(mut self, presence: FeatureExpr) -> Result<IrFunction, FlcError> {
        let def = self.def;
        for (i, p) in def.params.iter().enumerate() {
            let obj = self.declare_local(&p.name, p.width, None, p.line)?;
            self.emit(
                InstKind::Store {
                    obj,
                    index: Operand::Const(0),
                    value: Operand::Temp(i as u32),
                    tracked: true,
                },
                def.line,
                &presence,
            );
        }
        if let Some(m) = &def.meta_var {
            if def.ret.is_none() {
                return Err(FlcError::Semantic {
                    line: def.line,
                    message: format!("`@meta` on void function `{}`", def.name),
                });
            }
            self.meta = Some(self.resolve_var(m, def.line)?);
        }
        self.lower_stmts(&def.body, &presence)?;
        // Falling off the end returns 0 (or nothing for void functions).
        let value = def.ret.map(|_| Operand::Const(0));
        self.emit_return(value, def.end_line, &presence);

        Ok(IrFunction {
            name: def.name.clone(),
            params: def.params.len() as u32,
            locals: self.locals,
            temps: self.temps,
            body: self.body,
            returns_value: def.ret.is_some(),
            loc: SrcLoc {
                file: self.file,
                line: def.line,
            },
            presence,
        })
    }

    fn semantic(&self, line: u32, message: String) -> FlcError {
        FlcError::Semantic { line, message }
    }

    fn fresh(&mut self) -> TempId {
        self.temps += 1;
        self.temps - 1
    }

    fn emit(&mut self, kind: InstKind, line: u32, presence: &FeatureExpr) -> usize {
        self.body.push(IrInstruction {
            kind,
            loc: SrcLoc {
                file: self.file.clone(),
                line,
            },
            presence: presence.clone(),
        });
        self.body.len() - 1
    }

    fn patch(&mut self, at: usize, then_to: Option<usize>, else_to: Option<usize>) {
        if let InstKind::Branch {
            then_target,
            else_target,
            ..
        } = &mut self.body[at].kind
        {
            if let Some(t) = then_to {
                *then_target = t;
            }
            if let Some(e) = else_to {
                *else_target = e;
            }
        }
    }

    fn declare_local(&mut self, name: &str, width: Width, len: Option<u32>, line: u32) -> Result<ObjRef, FlcError> {
        if let Some(&(ix, decl_line)) = self.local_ix.get(name) {
            // Re-lowering an unrolled loop body revisits the same declaration.
            if decl_line == line {
                return Ok(ObjRef {
                    scope: ObjectScope::Local,
                    index: ix,
                });
            }
            return Err(self.semantic(line, format!("local `{name}` declared twice")));
        }
        let ix = self.locals.len() as u32;
        self.locals.push(MemoryObjectDecl {
            id: format!("{}::{}", self.def.name, name),
            name: name.to_string(),
            count: len.unwrap_or(1),
            width,
            function: Some(self.def.name.clone()),
            init: 0,
        });
        self.local_ix.insert(name.to_string(), (ix, line));
        Ok(ObjRef {
            scope: ObjectScope::Local,
            index: ix,
        })
    }

    fn resolve_var(&self, name: &str, line: u32) -> Result<ObjRef, FlcError> {
        if let Some(&(ix, _)) = self.local_ix.get(name) {
            return Ok(ObjRef {
                scope: ObjectScope::Local,
                index: ix,
            });
        }
        if let Some(&ix) = self.global_ix.get(name) {
            return Ok(ObjRef {
                scope: ObjectScope::Global,
                index: ix,
            });
        }
        Err(self.semantic(
            line,
            format!("undeclared variable `{name}` in product `{}`", self.product.name),
        ))
    }

    fn object(&self, r: ObjRef) -> &MemoryObjectDecl {
        match r.scope {
            ObjectScope::Global => &self.globals[r.index as usize],
            ObjectScope::Local => &self.locals[r.index as usize],
        }
    }

    fn lower_lvalue(&mut self, lv: &LValue, line: u32, presence: &FeatureExpr) -> Result<(ObjRef, Operand), FlcError> {
        let obj = self.resolve_var(&lv.name, line)?;
        let count = self.object(obj).count;
        let index = match (&lv.index, count) {
            (None, 1) => Operand::Const(0),
            (None, _) => return Err(self.semantic(line, format!("array `{}` used without index", lv.name))),
            (Some(i), _) => self.lower_expr(i, line, presence)?,
        };
        Ok((obj, index))
    }

    fn lower_expr(&mut self, e: &Expr, line: u32, presence: &FeatureExpr) -> Result<Operand, FlcError> {
        match e {
            Expr::Int(v) => Ok(Operand::Const(Width::W32.wrap(*v))),
            Expr::Var(lv) => {
                let (obj, index) = self.lower_lvalue(lv, line, presence)?;
                let dst = self.fresh();
                self.emit(
                    InstKind::Load {
                        dst,
                        obj,
                        index,
                        tracked: true,
                    },
                    line,
                    presence,
                );
                Ok(Operand::Temp(dst))
            }
            Expr::Unary(op, inner) => {
                let a = self.lower_expr(inner, line, presence)?;
                let dst = self.fresh();
                let op = match op {
                    UnOp::Neg => Op::Neg,
                    UnOp::Not => Op::Not,
                };
                self.emit(InstKind::Assign { dst, op, args: vec![a] }, line, presence);
                Ok(Operand::Temp(dst))
            }
            Expr::Binary(op, l, r) => {
                let a = self.lower_expr(l, line, presence)?;
                let b = self.lower_expr(r, line, presence)?;
                let dst = self.fresh();
                let op = match op {
                    BinOp::Add => Op::Add,
                    BinOp::Sub => Op::Sub,
                    BinOp::Mul => Op::Mul,
                    BinOp::Div => Op::Div,
                    BinOp::Rem => Op::Rem,
                    BinOp::Eq => Op::Eq,
                    BinOp::Ne => Op::Ne,
                    BinOp::Lt => Op::Lt,
                    BinOp::Le => Op::Le,
                    BinOp::Gt => Op::Gt,
                    BinOp::Ge => Op::Ge,
                    BinOp::And => Op::And,
                    BinOp::Or => Op::Or,
                };
                self.emit(
                    InstKind::Assign {
                        dst,
                        op,
                        args: vec![a, b],
                    },
                    line,
                    presence,
                );
                Ok(Operand::Temp(dst))
            }
            Expr::Call { name, args } => {
                let returns = self.check_call(name, args.len(), line)?;
                if !returns {
                    return Err(self.semantic(line, format!("void function `{name}` used as a value")));
                }
                let args = self.lower_args(args, line, presence)?;
                let dst = self.fresh();
                self.emit(
                    InstKind::Call {
                        dst: Some(dst),
                        callee: name.clone(),
                        args,
                    },
                    line,
                    presence,
                );
                Ok(Operand::Temp(dst))
            }
        }
    }

    fn lower_args(&mut self, args: &[Expr], line: u32, presence: &FeatureExpr) -> Result<Vec<Operand>, FlcError> {
        args.iter().map(|a| self.lower_expr(a, line, presence)).collect()
    }

    /// Returns whether the callee produces a value.
    fn check_call(&self, name: &str, argc: usize, line: u32) -> Result<bool, FlcError> {
        match self.sigs.get(name) {
            Some(&(arity, returns)) => {
                if arity != argc {
                    return Err(self.semantic(line, format!("`{name}` expects {arity} arguments, got {argc}")));
                }
                Ok(returns)
            }
            None if self.all_functions.contains(name) => Err(FlcError::DanglingCall {
                line,
                callee: name.to_string(),
                product: self.product.name.clone(),
            }),
            None => Err(FlcError::UnknownIntrinsic {
                line,
                name: name.to_string(),
            }),
        }
    }

    fn emit_return(&mut self, value: Option<Operand>, line: u32, presence: &FeatureExpr) {
        if let (Some(meta), Some(v)) = (self.meta, value) {
            let cur = self.fresh();
            self.emit(
                InstKind::Load {
                    dst: cur,
                    obj: meta,
                    index: Operand::Const(0),
                    tracked: false,
                },
                line,
                presence,
            );
            let c = self.fresh();
            self.emit(
                InstKind::Assign {
                    dst: c,
                    op: Op::Eq,
                    args: vec![Operand::Temp(cur), v],
                },
                line,
                presence,
            );
            self.emit(InstKind::Assume { cond: Operand::Temp(c) }, line, presence);
        }
        self.emit(InstKind::Return { value }, line, presence);
    }

    fn lower_stmts(&mut self, stmts: &[Stmt], presence: &FeatureExpr) -> Result<(), FlcError> {
        for s in stmts {
            self.lower_stmt(s, presence)?;
        }
        Ok(())
    }

    fn lower_stmt(&mut self, s: &Stmt, presence: &FeatureExpr) -> Result<(), FlcError> {
        let line = s.line;
        match &s.kind {
            StmtKind::Decl { name, width, len, init } => {
                // The initializer is evaluated before the name comes into scope.
                let value = match init {
                    Some(e) => Some(self.lower_expr(e, line, presence)?),
                    None => None,
                };
                let obj = self.declare_local(name, *width, *len, line)?;
                if let Some(value) = value {
                    self.emit(
                        InstKind::Store {
                            obj,
                            index: Operand::Const(0),
                            value,
                            tracked: true,
                        },
                        line,
                        presence,
                    );
                }
            }
            StmtKind::Assign { target, value } => {
                let (obj, index) = self.lower_lvalue(target, line, presence)?;
                let value = self.lower_expr(value, line, presence)?;
                self.emit(
                    InstKind::Store {
                        obj,
                        index,
                        value,
                        tracked: true,
                    },
                    line,
                    presence,
                );
            }
            StmtKind::Call { name, args } => {
                self.check_call(name, args.len(), line)?;
                let args = self.lower_args(args, line, presence)?;
                self.emit(
                    InstKind::Call {
                        dst: None,
                        callee: name.clone(),
                        args,
                    },
                    line,
                    presence,
                );
            }
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                let c = self.lower_expr(cond, line, presence)?;
                let br = self.emit(
                    InstKind::Branch {
                        cond: Some(c),
                        then_target: 0,
                        else_target: 0,
                    },
                    line,
                    presence,
                );
                let then_start = self.body.len();
                self.lower_stmts(then_block, presence)?;
                match else_block {
                    Some(e) => {
                        let jump = self.emit(
                            InstKind::Branch {
                                cond: None,
                                then_target: 0,
                                else_target: 0,
                            },
                            line,
                            presence,
                        );
                        let else_start = self.body.len();
                        self.lower_stmts(e, presence)?;
                        let end = self.body.len();
                        self.patch(br, Some(then_start), Some(else_start));
                        self.patch(jump, Some(end), Some(end));
                    }
                    None => {
                        let end = self.body.len();
                        self.patch(br, Some(then_start), Some(end));
                    }
                }
            }
            StmtKind::While { cond, body } => {
                let mut exits = Vec::new();
                for _ in 0..self.loop_bound {
                    let c = self.lower_expr(cond, line, presence)?;
                    let br = self.emit(
                        InstKind::Branch {
                            cond: Some(c),
                            then_target: 0,
                            else_target: 0,
                        },
                        line,
                        presence,
                    );
                    let start = self.body.len();
                    self.patch(br, Some(start), None);
                    exits.push(br);
                    self.lower_stmts(body, presence)?;
                }
                let c = self.lower_expr(cond, line, presence)?;
                let br = self.emit(
                    InstKind::Branch {
                        cond: Some(c),
                        then_target: 0,
                        else_target: 0,
                    },
                    line,
                    presence,
                );
                let halt = self.emit(InstKind::Halt, line, presence);
                self.patch(br, Some(halt), None);
                exits.push(br);
                let end = self.body.len();
                for b in exits {
                    self.patch(b, None, Some(end));
                }
            }
            StmtKind::Return(value) => {
                let value = match (value, self.def.ret) {
                    (Some(e), Some(w)) => {
                        let _ = w;
                        Some(self.lower_expr(e, line, presence)?)
                    }
                    (None, None) => None,
                    (Some(_), None) => return Err(self.semantic(line, "void function returns a value".into())),
                    (None, Some(_)) => return Err(self.semantic(line, "missing return value".into())),
                };
                self.emit_return(value, line, presence);
            }
            StmtKind::MakeSymbolic { target, range } => {
                let (obj, index) = self.lower_lvalue(target, line, presence)?;
                let width = self.object(obj).width;
                let (lo, hi) = range.unwrap_or((width.min(), width.max()));
                if lo < width.min() || hi > width.max() {
                    return Err(self.semantic(
                        line,
                        format!("symbolic range [{lo}, {hi}] exceeds {}-bit width", width.bits()),
                    ));
                }
                let metadata = self.def.meta_var.as_deref() == Some(target.name.as_str());
                self.emit(
                    InstKind::MakeSymbolic {
                        obj,
                        index,
                        name: target.name.clone(),
                        lo,
                        hi,
                        metadata,
                    },
                    line,
                    presence,
                );
            }
            StmtKind::Assume(e) => {
                let cond = self.lower_expr(e, line, presence)?;
                self.emit(InstKind::Assume { cond }, line, presence);
            }
            StmtKind::Assert(e) => {
                let cond = self.lower_expr(e, line, presence)?;
                self.emit(InstKind::Assert { cond }, line, presence);
            }
            StmtKind::Fail { spec } => {
                self.emit(InstKind::Fail { spec: spec.clone() }, line, presence);
            }
            StmtKind::Block(b) => self.lower_stmts(b, presence)?,
            StmtKind::Directive(d) => {
                if d.cond.eval(self.enabled) {
                    let p = FeatureExpr::and([presence.clone(), d.cond.clone()]);
                    self.lower_stmts(&d.then_part, &p)?;
                } else if let Some(e) = &d.else_part {
                    let p = FeatureExpr::and([presence.clone(), FeatureExpr::not(d.cond.clone())]);
                    self.lower_stmts(e, &p)?;
                }
            }
        }
        Ok(())
    }
}
