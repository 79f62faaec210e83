use std::fmt::Write;

use super::ast::*;
use super::SourceUnit;

/// Renders a unit back to FLC source. Re-parsing the output yields the same
/// tree up to line numbers.
pub fn pretty_print(unit: &SourceUnit) -> String {
    let mut out = String::new();
    for item in &unit.items {
        item_to(&mut out, item);
    }
    out
}

fn item_to(out: &mut String, item: &Item) {
    match item {
        Item::Features { names, .. } => {
            let _ = writeln!(out, "features {};", names.join(", "));
        }
        Item::Global(g) => {
            let _ = write!(out, "{} {}", g.width.keyword(), g.name);
            if let Some(n) = g.len {
                let _ = write!(out, "[{n}]");
            }
            if let Some(v) = g.init {
                let _ = write!(out, " = {v}");
            }
            out.push_str(";\n");
        }
        Item::Function(f) => {
            if let Some(m) = &f.meta_var {
                let _ = writeln!(out, "@meta({m})");
            }
            let ret = f.ret.map(|w| w.keyword()).unwrap_or("void");
            let params: Vec<String> = f
                .params
                .iter()
                .map(|p| format!("{} {}", p.width.keyword(), p.name))
                .collect();
            let _ = writeln!(out, "{ret} {}({}) {{", f.name, params.join(", "));
            stmts_to(out, &f.body, 1);
            out.push_str("}\n");
        }
        Item::Directive(d) => {
            let _ = writeln!(out, "#if {}", d.cond);
            d.then_part.iter().for_each(|i| item_to(out, i));
            if let Some(e) = &d.else_part {
                out.push_str("#else\n");
                e.iter().for_each(|i| item_to(out, i));
            }
            out.push_str("#endif\n");
        }
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn stmts_to(out: &mut String, stmts: &[Stmt], depth: usize) {
    for s in stmts {
        stmt_to(out, s, depth);
    }
}

fn stmt_to(out: &mut String, s: &Stmt, depth: usize) {
    if let StmtKind::Directive(d) = &s.kind {
        let _ = writeln!(out, "#if {}", d.cond);
        stmts_to(out, &d.then_part, depth);
        if let Some(e) = &d.else_part {
            out.push_str("#else\n");
            stmts_to(out, e, depth);
        }
        out.push_str("#endif\n");
        return;
    }
    indent(out, depth);
    match &s.kind {
        StmtKind::Decl { name, width, len, init } => {
            let _ = write!(out, "{} {name}", width.keyword());
            if let Some(n) = len {
                let _ = write!(out, "[{n}]");
            }
            if let Some(e) = init {
                let _ = write!(out, " = {}", expr_string(e));
            }
            out.push_str(";\n");
        }
        StmtKind::Assign { target, value } => {
            let _ = writeln!(out, "{} = {};", lvalue_string(target), expr_string(value));
        }
        StmtKind::Call { name, args } => {
            let _ = writeln!(out, "{name}({});", args_string(args));
        }
        StmtKind::If {
            cond,
            then_block,
            else_block,
        } => {
            let _ = writeln!(out, "if ({}) {{", expr_string(cond));
            stmts_to(out, then_block, depth + 1);
            indent(out, depth);
            out.push('}');
            if let Some(e) = else_block {
                out.push_str(" else {\n");
                stmts_to(out, e, depth + 1);
                indent(out, depth);
                out.push('}');
            }
            out.push('\n');
        }
        StmtKind::While { cond, body } => {
            let _ = writeln!(out, "while ({}) {{", expr_string(cond));
            stmts_to(out, body, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
        }
        StmtKind::Return(v) => match v {
            Some(e) => {
                let _ = writeln!(out, "return {};", expr_string(e));
            }
            None => out.push_str("return;\n"),
        },
        StmtKind::MakeSymbolic { target, range } => {
            let _ = write!(out, "make_symbolic({}", lvalue_string(target));
            if let Some((lo, hi)) = range {
                let _ = write!(out, ", {lo}, {hi}");
            }
            out.push_str(");\n");
        }
        StmtKind::Assume(e) => {
            let _ = writeln!(out, "assume({});", expr_string(e));
        }
        StmtKind::Assert(e) => {
            let _ = writeln!(out, "assert({});", expr_string(e));
        }
        StmtKind::Fail { spec } => {
            if let Some(id) = spec {
                let _ = write!(out, "@spec({id}) ");
            }
            out.push_str("fail();\n");
        }
        StmtKind::Block(b) => {
            out.push_str("{\n");
            stmts_to(out, b, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
        }
        StmtKind::Directive(_) => unreachable!(),
    }
}

fn lvalue_string(lv: &LValue) -> String {
    match &lv.index {
        Some(i) => format!("{}[{}]", lv.name, expr_string(i)),
        None => lv.name.clone(),
    }
}

fn args_string(args: &[Expr]) -> String {
    args.iter().map(expr_string).collect::<Vec<_>>().join(", ")
}

pub fn expr_string(e: &Expr) -> String {
    let mut s = String::new();
    expr_to(&mut s, e, 0);
    s
}

fn expr_to(out: &mut String, e: &Expr, min_prec: u8) {
    match e {
        Expr::Int(v) => {
            let _ = write!(out, "{v}");
        }
        Expr::Var(lv) => out.push_str(&lvalue_string(lv)),
        Expr::Call { name, args } => {
            let _ = write!(out, "{name}({})", args_string(args));
        }
        Expr::Unary(op, inner) => {
            out.push(match op {
                UnOp::Neg => '-',
                UnOp::Not => '!',
            });
            match inner.as_ref() {
                Expr::Binary(..) => {
                    out.push('(');
                    expr_to(out, inner, 0);
                    out.push(')');
                }
                // `--5` would re-lex as a negated negative literal; keep it apart.
                Expr::Int(v) if *v < 0 => {
                    let _ = write!(out, "({v})");
                }
                Expr::Unary(UnOp::Neg, _) if *op == UnOp::Neg => {
                    out.push('(');
                    expr_to(out, inner, 0);
                    out.push(')');
                }
                _ => expr_to(out, inner, 7),
            }
        }
        Expr::Binary(op, a, b) => {
            let prec = op.precedence();
            let paren = prec < min_prec;
            if paren {
                out.push('(');
            }
            expr_to(out, a, prec);
            let _ = write!(out, " {} ", op.symbol());
            expr_to(out, b, prec + 1);
            if paren {
                out.push(')');
            }
        }
    }
}
