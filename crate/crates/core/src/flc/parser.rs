use std::collections::BTreeSet;

use super::ast::*;
use super::feature::FeatureExpr;
use super::lexer::{lex, Tok, Token};
use super::{FlcError, SourceUnit};

pub const INTRINSICS: &[&str] = &["make_symbolic", "assume", "assert", "fail"];

const KEYWORDS: &[&str] = &[
    "int",
    "int8",
    "int16",
    "int32",
    "void",
    "if",
    "else",
    "while",
    "return",
    "features",
    "make_symbolic",
    "assume",
    "assert",
    "fail",
];

/// Parses FLC source text into a [`SourceUnit`].
pub fn parse_unit(source: &str, path: &str) -> Result<SourceUnit, FlcError> {
    let lexed = lex(source)?;
    let mut p = Parser {
        toks: lexed.tokens,
        pos: 0,
    };
    let items = p.parse_items(false)?;
    let unit = SourceUnit {
        path: path.to_string(),
        line_count: lexed.line_count,
        features: collect_features(&items)?,
        items,
        scopes: lexed.scopes,
    };
    check_unit(&unit)?;
    Ok(unit)
}

fn collect_features(items: &[Item]) -> Result<Vec<String>, FlcError> {
    let mut out: Vec<String> = Vec::new();
    for item in items {
        if let Item::Features { names, line } = item {
            for n in names {
                if out.contains(n) {
                    return Err(FlcError::Semantic {
                        line: *line,
                        message: format!("feature `{n}` declared twice"),
                    });
                }
                out.push(n.clone());
            }
        }
    }
    Ok(out)
}

fn check_unit(unit: &SourceUnit) -> Result<(), FlcError> {
    let declared: BTreeSet<&str> = unit.features.iter().map(String::as_str).collect();
    check_directive_features(&unit.items, &declared)?;

    let mut functions = BTreeSet::new();
    walk_functions(&unit.items, &FeatureExpr::True, &mut |f, _| {
        functions.insert(f.name.clone());
    });
    let mut err = None;
    walk_functions(&unit.items, &FeatureExpr::True, &mut |f, _| {
        if err.is_some() {
            return;
        }
        walk_stmts(&f.body, &mut |s| {
            if err.is_some() {
                return;
            }
            if let Some(e) = check_stmt(s, &functions, &declared) {
                err = Some(e);
            }
        });
    });
    match err {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn check_directive_features(items: &[Item], declared: &BTreeSet<&str>) -> Result<(), FlcError> {
    fn check(cond: &FeatureExpr, line: u32, declared: &BTreeSet<&str>) -> Result<(), FlcError> {
        for a in cond.atoms() {
            if !declared.contains(a) {
                return Err(FlcError::UndeclaredFeature {
                    line,
                    name: a.to_string(),
                });
            }
        }
        Ok(())
    }
    for item in items {
        match item {
            Item::Directive(d) => {
                check(&d.cond, d.if_line, declared)?;
                check_directive_features(&d.then_part, declared)?;
                if let Some(e) = &d.else_part {
                    check_directive_features(e, declared)?;
                }
            }
            Item::Function(f) => {
                let mut res = Ok(());
                walk_stmts(&f.body, &mut |s| {
                    if let StmtKind::Directive(d) = &s.kind {
                        if res.is_ok() {
                            res = check(&d.cond, d.if_line, declared);
                        }
                    }
                });
                res?;
            }
            _ => {}
        }
    }
    Ok(())
}

fn check_stmt(s: &Stmt, functions: &BTreeSet<String>, _: &BTreeSet<&str>) -> Option<FlcError> {
    let mut err = None;
    let mut visit = |e: &Expr| {
        if let Expr::Call { name, .. } = e {
            if err.is_none() && !functions.contains(name) {
                err = Some(FlcError::UnknownIntrinsic {
                    line: s.line,
                    name: name.clone(),
                });
            }
        }
    };
    match &s.kind {
        StmtKind::Call { name, args } => {
            if !functions.contains(name) {
                return Some(FlcError::UnknownIntrinsic {
                    line: s.line,
                    name: name.clone(),
                });
            }
            args.iter().for_each(|a| a.walk(&mut visit));
        }
        StmtKind::Decl { init: Some(e), .. }
        | StmtKind::Return(Some(e))
        | StmtKind::Assume(e)
        | StmtKind::Assert(e) => e.walk(&mut visit),
        StmtKind::Assign { target, value } => {
            if let Some(i) = &target.index {
                i.walk(&mut visit);
            }
            value.walk(&mut visit);
        }
        StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => cond.walk(&mut visit),
        StmtKind::MakeSymbolic { target, range } => {
            if let Some(i) = &target.index {
                i.walk(&mut visit);
            }
            if has_instance_suffix(&target.name) {
                return Some(FlcError::Semantic {
                    line: s.line,
                    message: format!(
                        "symbolic variable `{}` must not end in `_<digits>` (reserved for instance numbering)",
                        target.name
                    ),
                });
            }
            if let Some((lo, hi)) = range {
                if lo > hi {
                    return Some(FlcError::Semantic {
                        line: s.line,
                        message: format!("empty symbolic range [{lo}, {hi}]"),
                    });
                }
            }
        }
        _ => {}
    }
    err
}

/// True for names such as `x_2`, which collide with instance display names.
pub fn has_instance_suffix(name: &str) -> bool {
    match name.rfind('_') {
        Some(i) => {
            let tail = &name[i + 1..];
            i > 0 && !tail.is_empty() && tail.bytes().all(|b| b.is_ascii_digit())
        }
        None => false,
    }
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn cur(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn line(&self) -> u32 {
        self.cur().line
    }

    fn prev_line(&self) -> u32 {
        self.toks[self.pos.saturating_sub(1)].line
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> FlcError {
        let t = self.cur();
        FlcError::Parse {
            line: t.line,
            col: t.col,
            message: message.into(),
        }
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_ident(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Ident(q) if q == w)
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), FlcError> {
        if self.is_punct(p) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected `{p}`, found {}", describe(self.peek()))))
        }
    }

    fn expect_ident(&mut self) -> Result<String, FlcError> {
        match self.peek().clone() {
            Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => {
                self.bump();
                Ok(name)
            }
            other => Err(self.error(format!("expected identifier, found {}", describe(&other)))),
        }
    }

    fn expect_int(&mut self) -> Result<i64, FlcError> {
        let neg = if self.is_punct("-") {
            self.bump();
            true
        } else {
            false
        };
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(if neg { -v } else { v })
            }
            other => Err(self.error(format!("expected integer, found {}", describe(&other)))),
        }
    }

    fn width_keyword(&self) -> Option<Width> {
        match self.peek() {
            Tok::Ident(w) => match w.as_str() {
                "int" | "int32" => Some(Width::W32),
                "int16" => Some(Width::W16),
                "int8" => Some(Width::W8),
                _ => None,
            },
            _ => None,
        }
    }

    /// Items until EOF (top level) or until `#else`/`#endif` (inside a directive).
    fn parse_items(&mut self, in_directive: bool) -> Result<Vec<Item>, FlcError> {
        let mut items = Vec::new();
        loop {
            match self.peek() {
                Tok::Eof => {
                    return if in_directive {
                        Err(self.error("unexpected end of input inside `#if`"))
                    } else {
                        Ok(items)
                    }
                }
                Tok::DirElse | Tok::DirEndif => {
                    return if in_directive {
                        Ok(items)
                    } else {
                        Err(self.error("unexpected directive"))
                    }
                }
                Tok::DirIf(_) => {
                    let d = self.parse_directive(|p| p.parse_items(true))?;
                    items.push(Item::Directive(d));
                }
                _ => items.push(self.parse_item()?),
            }
        }
    }

    fn parse_directive<T>(
        &mut self,
        mut body: impl FnMut(&mut Parser) -> Result<Vec<T>, FlcError>,
    ) -> Result<Directive<T>, FlcError> {
        let if_line = self.line();
        let cond = match self.bump() {
            Tok::DirIf(c) => c,
            _ => unreachable!(),
        };
        let then_part = body(self)?;
        let (else_part, else_line) = if matches!(self.peek(), Tok::DirElse) {
            let l = self.line();
            self.bump();
            (Some(body(self)?), Some(l))
        } else {
            (None, None)
        };
        if !matches!(self.peek(), Tok::DirEndif) {
            return Err(self.error("directive must enclose whole statements or items"));
        }
        let endif_line = self.line();
        self.bump();
        Ok(Directive {
            cond,
            then_part,
            else_part,
            if_line,
            else_line,
            endif_line,
        })
    }

    fn parse_item(&mut self) -> Result<Item, FlcError> {
        let line = self.line();
        if self.is_ident("features") {
            self.bump();
            let mut names = vec![self.expect_ident()?];
            while self.is_punct(",") {
                self.bump();
                names.push(self.expect_ident()?);
            }
            self.expect_punct(";")?;
            return Ok(Item::Features { names, line });
        }
        let mut meta_var = None;
        if self.is_punct("@") {
            self.bump();
            if !self.is_ident("meta") {
                return Err(self.error("expected `@meta(<name>)` before a function"));
            }
            self.bump();
            self.expect_punct("(")?;
            meta_var = Some(self.expect_ident()?);
            self.expect_punct(")")?;
        }
        let line = self.line();
        let ret = if self.is_ident("void") {
            self.bump();
            None
        } else if let Some(w) = self.width_keyword() {
            self.bump();
            Some(w)
        } else {
            return Err(self.error(format!("expected declaration, found {}", describe(self.peek()))));
        };
        let name = self.expect_ident()?;
        if self.is_punct("(") {
            return self.parse_function(name, ret, line, meta_var).map(Item::Function);
        }
        if meta_var.is_some() {
            return Err(self.error("`@meta` applies to functions only"));
        }
        let Some(width) = ret else {
            return Err(self.error("variables cannot be `void`"));
        };
        let len = self.parse_array_len()?;
        let init = if self.is_punct("=") {
            self.bump();
            if len.is_some() {
                return Err(self.error("array initializers are not supported"));
            }
            Some(self.expect_int()?)
        } else {
            None
        };
        self.expect_punct(";")?;
        Ok(Item::Global(GlobalDecl {
            name,
            width,
            len,
            init,
            line,
        }))
    }

    fn parse_array_len(&mut self) -> Result<Option<u32>, FlcError> {
        if !self.is_punct("[") {
            return Ok(None);
        }
        self.bump();
        let n = self.expect_int()?;
        if !(1..=1 << 20).contains(&n) {
            return Err(self.error("array length must be between 1 and 2^20"));
        }
        self.expect_punct("]")?;
        Ok(Some(n as u32))
    }

    fn parse_function(
        &mut self,
        name: String,
        ret: Option<Width>,
        line: u32,
        meta_var: Option<String>,
    ) -> Result<FunctionDef, FlcError> {
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.is_punct(")") {
            loop {
                let pline = self.line();
                let Some(width) = self.width_keyword() else {
                    return Err(self.error("expected parameter type"));
                };
                self.bump();
                params.push(Param {
                    name: self.expect_ident()?,
                    width,
                    line: pline,
                });
                if self.is_punct(",") {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        let body = self.parse_block()?;
        Ok(FunctionDef {
            name,
            ret,
            params,
            body,
            line,
            end_line: self.prev_line(),
            meta_var,
        })
    }

    fn parse_block(&mut self) -> Result<Vec<Stmt>, FlcError> {
        self.expect_punct("{")?;
        let stmts = self.parse_stmts(false)?;
        self.expect_punct("}")?;
        Ok(stmts)
    }

    fn parse_stmts(&mut self, in_directive: bool) -> Result<Vec<Stmt>, FlcError> {
        let mut out = Vec::new();
        loop {
            match self.peek() {
                Tok::Punct("}") => {
                    return if in_directive {
                        Err(self.error("directive must enclose whole statements or items"))
                    } else {
                        Ok(out)
                    }
                }
                Tok::DirElse | Tok::DirEndif => {
                    return if in_directive {
                        Ok(out)
                    } else {
                        Err(self.error("directive must enclose whole statements or items"))
                    }
                }
                Tok::Eof => return Err(self.error("unexpected end of input")),
                _ => out.push(self.parse_stmt()?),
            }
        }
    }

    fn parse_stmt(&mut self) -> Result<Stmt, FlcError> {
        let line = self.line();
        let kind = self.parse_stmt_kind()?;
        Ok(Stmt {
            kind,
            line,
            end_line: self.prev_line(),
        })
    }

    fn parse_stmt_kind(&mut self) -> Result<StmtKind, FlcError> {
        if matches!(self.peek(), Tok::DirIf(_)) {
            let d = self.parse_directive(|p| p.parse_stmts(true))?;
            return Ok(StmtKind::Directive(d));
        }
        if self.is_punct("{") {
            return Ok(StmtKind::Block(self.parse_block()?));
        }
        if let Some(width) = self.width_keyword() {
            self.bump();
            let name = self.expect_ident()?;
            let len = self.parse_array_len()?;
            let init = if self.is_punct("=") {
                self.bump();
                if len.is_some() {
                    return Err(self.error("array initializers are not supported"));
                }
                Some(self.parse_expr()?)
            } else {
                None
            };
            self.expect_punct(";")?;
            return Ok(StmtKind::Decl { name, width, len, init });
        }
        if self.is_punct("@") {
            self.bump();
            if !self.is_ident("spec") {
                return Err(self.error("expected `@spec(<id>)`"));
            }
            self.bump();
            self.expect_punct("(")?;
            let id = match self.bump() {
                Tok::Ident(s) => s,
                Tok::Int(v) => v.to_string(),
                other => return Err(self.error(format!("bad spec id {}", describe(&other)))),
            };
            self.expect_punct(")")?;
            if !self.is_ident("fail") {
                return Err(self.error("`@spec` must annotate a `fail()` call"));
            }
            self.bump();
            self.expect_punct("(")?;
            self.expect_punct(")")?;
            self.expect_punct(";")?;
            return Ok(StmtKind::Fail { spec: Some(id) });
        }
        let word = match self.peek() {
            Tok::Ident(w) => w.clone(),
            other => return Err(self.error(format!("expected statement, found {}", describe(other)))),
        };
        match word.as_str() {
            "if" => {
                self.bump();
                self.expect_punct("(")?;
                let cond = self.parse_expr()?;
                self.expect_punct(")")?;
                let then_block = self.parse_block()?;
                let else_block = if self.is_ident("else") {
                    self.bump();
                    if self.is_ident("if") {
                        Some(vec![self.parse_stmt()?])
                    } else {
                        Some(self.parse_block()?)
                    }
                } else {
                    None
                };
                Ok(StmtKind::If {
                    cond,
                    then_block,
                    else_block,
                })
            }
            "while" => {
                self.bump();
                self.expect_punct("(")?;
                let cond = self.parse_expr()?;
                self.expect_punct(")")?;
                let body = self.parse_block()?;
                Ok(StmtKind::While { cond, body })
            }
            "return" => {
                self.bump();
                let value = if self.is_punct(";") {
                    None
                } else {
                    Some(self.parse_expr()?)
                };
                self.expect_punct(";")?;
                Ok(StmtKind::Return(value))
            }
            "make_symbolic" => {
                self.bump();
                self.expect_punct("(")?;
                let target = self.parse_lvalue()?;
                let range = if self.is_punct(",") {
                    self.bump();
                    let lo = self.expect_int()?;
                    self.expect_punct(",")?;
                    let hi = self.expect_int()?;
                    Some((lo, hi))
                } else {
                    None
                };
                self.expect_punct(")")?;
                self.expect_punct(";")?;
                Ok(StmtKind::MakeSymbolic { target, range })
            }
            "assume" | "assert" => {
                self.bump();
                self.expect_punct("(")?;
                let e = self.parse_expr()?;
                self.expect_punct(")")?;
                self.expect_punct(";")?;
                Ok(if word == "assume" {
                    StmtKind::Assume(e)
                } else {
                    StmtKind::Assert(e)
                })
            }
            "fail" => {
                self.bump();
                self.expect_punct("(")?;
                self.expect_punct(")")?;
                self.expect_punct(";")?;
                Ok(StmtKind::Fail { spec: None })
            }
            _ if matches!(self.peek_at(1), Tok::Punct("(")) => {
                let name = self.expect_ident()?;
                let args = self.parse_args()?;
                self.expect_punct(";")?;
                Ok(StmtKind::Call { name, args })
            }
            _ => {
                let target = self.parse_lvalue()?;
                self.expect_punct("=")?;
                let value = self.parse_expr()?;
                self.expect_punct(";")?;
                Ok(StmtKind::Assign { target, value })
            }
        }
    }

    fn parse_args(&mut self) -> Result<Vec<Expr>, FlcError> {
        self.expect_punct("(")?;
        let mut args = Vec::new();
        if !self.is_punct(")") {
            loop {
                args.push(self.parse_expr()?);
                if self.is_punct(",") {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        Ok(args)
    }

    fn parse_lvalue(&mut self) -> Result<LValue, FlcError> {
        let name = self.expect_ident()?;
        let index = if self.is_punct("[") {
            self.bump();
            let e = self.parse_expr()?;
            self.expect_punct("]")?;
            Some(Box::new(e))
        } else {
            None
        };
        Ok(LValue { name, index })
    }

    pub fn parse_expr(&mut self) -> Result<Expr, FlcError> {
        self.parse_binary(1)
    }

    fn binop(&self) -> Option<BinOp> {
        let Tok::Punct(p) = self.peek() else {
            return None;
        };
        Some(match *p {
            "||" => BinOp::Or,
            "&&" => BinOp::And,
            "==" => BinOp::Eq,
            "!=" => BinOp::Ne,
            "<" => BinOp::Lt,
            "<=" => BinOp::Le,
            ">" => BinOp::Gt,
            ">=" => BinOp::Ge,
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            "*" => BinOp::Mul,
            "/" => BinOp::Div,
            "%" => BinOp::Rem,
            _ => return None,
        })
    }

    fn parse_binary(&mut self, min_prec: u8) -> Result<Expr, FlcError> {
        let mut lhs = self.parse_unary()?;
        while let Some(op) = self.binop() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.parse_binary(prec + 1)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Expr, FlcError> {
        if self.is_punct("-") {
            self.bump();
            return Ok(match self.parse_unary()? {
                Expr::Int(v) => Expr::Int(-v),
                e => Expr::Unary(UnOp::Neg, Box::new(e)),
            });
        }
        if self.is_punct("!") {
            self.bump();
            return Ok(Expr::Unary(UnOp::Not, Box::new(self.parse_unary()?)));
        }
        self.parse_primary()
    }

    fn parse_primary(&mut self) -> Result<Expr, FlcError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::Int(v))
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.parse_expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if INTRINSICS.contains(&name.as_str()) {
                    return Err(self.error(format!("intrinsic `{name}` cannot be used as a value")));
                }
                if matches!(self.peek_at(1), Tok::Punct("(")) {
                    let name = self.expect_ident()?;
                    let args = self.parse_args()?;
                    return Ok(Expr::Call { name, args });
                }
                Ok(Expr::Var(self.parse_lvalue()?))
            }
            other => Err(self.error(format!("expected expression, found {}", describe(&other)))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Int(v) => format!("`{v}`"),
        Tok::Punct(p) => format!("`{p}`"),
        Tok::DirIf(_) => "`#if`".into(),
        Tok::DirElse => "`#else`".into(),
        Tok::DirEndif => "`#endif`".into(),
        Tok::Eof => "end of input".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn body_of(unit: &SourceUnit, name: &str) -> Vec<Stmt> {
        let mut out = None;
        walk_functions(&unit.items, &FeatureExpr::True, &mut |f, _| {
            if f.name == name {
                out = Some(f.body.clone());
            }
        });
        out.unwrap()
    }

    #[test]
    fn directive_inside_function_records_scope() {
        let src = "features A;\nvoid main() {\nint x;\n#if A\nx = 1;\n#endif\n}\n";
        let unit = parse_unit(src, "t.flc").unwrap();
        let body = body_of(&unit, "main");
        match &body[1].kind {
            StmtKind::Directive(d) => {
                assert_eq!(d.cond, FeatureExpr::atom("A"));
                assert_eq!((d.if_line, d.endif_line), (4, 6));
                assert_eq!(d.then_part.len(), 1);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(unit.scopes.len(), 1);
        assert_eq!((unit.scopes[0].first_line, unit.scopes[0].last_line), (5, 5));
        assert_eq!(unit.scopes[0].condition, FeatureExpr::atom("A"));
    }

    #[test]
    fn compound_condition() {
        let src = "features A, B;\nvoid main() {\n#if A && !B\nfail();\n#endif\n}\n";
        let unit = parse_unit(src, "t.flc").unwrap();
        assert_eq!(unit.presence_of(4).unwrap().to_string(), "A && !B");
    }

    #[test]
    fn unterminated_directive() {
        let err = parse_unit("features A;\nvoid main() {\n#if A\nfail();\n}\n", "t.flc").unwrap_err();
        assert_eq!(err.to_string(), "unbalanced directive at line 3");
    }

    #[test]
    fn directive_splitting_a_statement_is_rejected() {
        let src = "features A;\nvoid main() {\n#if A\nif (1) {\n#endif\nfail();\n}\n}\n";
        assert!(matches!(parse_unit(src, "t.flc"), Err(FlcError::Parse { .. })));
    }

    #[test]
    fn unknown_intrinsic_and_undeclared_feature() {
        let err = parse_unit("void main() {\nklee_silent_exit(0);\n}\n", "t.flc").unwrap_err();
        assert!(matches!(err, FlcError::UnknownIntrinsic { line: 2, .. }), "{err}");
        let err = parse_unit("void main() {\n#if Z\nfail();\n#endif\n}\n", "t.flc").unwrap_err();
        assert!(matches!(err, FlcError::UndeclaredFeature { line: 2, .. }), "{err}");
    }

    #[test]
    fn parse_error_positions() {
        match parse_unit("void main() {\n  x = ;\n}\n", "t.flc") {
            Err(FlcError::Parse { line, col, .. }) => assert_eq!((line, col), (2, 7)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn expression_precedence() {
        let unit = parse_unit("void main() {\nint x;\nx = 1 + 2 * 3 < 4 && !0;\n}\n", "t").unwrap();
        let body = body_of(&unit, "main");
        let StmtKind::Assign { value, .. } = &body[1].kind else {
            panic!()
        };
        let Expr::Binary(BinOp::And, lhs, _) = value else {
            panic!("{value:?}")
        };
        let Expr::Binary(BinOp::Lt, sum, _) = lhs.as_ref() else {
            panic!()
        };
        assert!(matches!(sum.as_ref(), Expr::Binary(BinOp::Add, _, _)));
    }

    #[test]
    fn instance_suffix_names_are_reserved() {
        assert!(has_instance_suffix("x_2"));
        assert!(!has_instance_suffix("x2"));
        assert!(!has_instance_suffix("_2"));
        assert!(!has_instance_suffix("x_"));
        let src = "void main() {\nint x_2;\nmake_symbolic(x_2, 0, 1);\n}\n";
        assert!(matches!(parse_unit(src, "t"), Err(FlcError::Semantic { line: 3, .. })));
    }
}
