use super::feature::FeatureExpr;
use super::FlcError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Punct(&'static str),
    DirIf(FeatureExpr),
    DirElse,
    DirEndif,
    Eof,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
}

/// Directive scope computed from directive lines alone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectiveScope {
    /// First and last line covered (directive lines themselves excluded).
    pub first_line: u32,
    pub last_line: u32,
    /// Cumulative condition: conjunction of every enclosing branch condition.
    pub condition: FeatureExpr,
}

// Longest first so that `<=` wins over `<`.
const PUNCTS: &[&str] = &[
    "&&", "||", "==", "!=", "<=", ">=", "->", "(", ")", "{", "}", "[", "]", ";", ",", "=", "<", ">", "+", "-", "*",
    "/", "%", "!", "@",
];

#[derive(Debug)]
pub struct Lexed {
    pub tokens: Vec<Token>,
    pub scopes: Vec<DirectiveScope>,
    pub line_count: u32,
}

struct OpenScope {
    line: u32,
    cond: FeatureExpr,
    outer: FeatureExpr,
    seen_else: bool,
}

pub fn lex(src: &str) -> Result<Lexed, FlcError> {
    let mut tokens = Vec::new();
    let mut scopes = Vec::new();
    let mut open: Vec<OpenScope> = Vec::new();
    let mut line_count = 0u32;

    for (idx, raw) in src.split('\n').enumerate() {
        let line = idx as u32 + 1;
        line_count = line;
        let text = raw.strip_suffix('\r').unwrap_or(raw);
        let trimmed = text.trim_start();
        if let Some(directive) = trimmed.strip_prefix('#') {
            let (word, rest) = split_word(directive);
            let current = open.last().map(branch_condition).unwrap_or(FeatureExpr::True);
            match word {
                "if" => {
                    let rest = strip_comment(rest);
                    let cond = FeatureExpr::parse(rest.trim()).map_err(|e| FlcError::Lex {
                        line,
                        col: (text.len() - trimmed.len()) as u32 + 1,
                        message: format!("bad directive condition: {e}"),
                    })?;
                    open.push(OpenScope {
                        line,
                        cond,
                        outer: current,
                        seen_else: false,
                    });
                    tokens.push(Token {
                        tok: Tok::DirIf(open.last().unwrap().cond.clone()),
                        line,
                        col: 1,
                    });
                }
                "else" => {
                    let Some(top) = open.last_mut() else {
                        return Err(FlcError::UnbalancedDirective { line });
                    };
                    if top.seen_else {
                        return Err(FlcError::UnbalancedDirective { line });
                    }
                    scopes.push(DirectiveScope {
                        first_line: top.line + 1,
                        last_line: line - 1,
                        condition: current,
                    });
                    top.seen_else = true;
                    top.line = line;
                    tokens.push(Token {
                        tok: Tok::DirElse,
                        line,
                        col: 1,
                    });
                }
                "endif" => {
                    let Some(top) = open.pop() else {
                        return Err(FlcError::UnbalancedDirective { line });
                    };
                    scopes.push(DirectiveScope {
                        first_line: top.line + 1,
                        last_line: line - 1,
                        condition: current,
                    });
                    tokens.push(Token {
                        tok: Tok::DirEndif,
                        line,
                        col: 1,
                    });
                }
                other => {
                    return Err(FlcError::Lex {
                        line,
                        col: 1,
                        message: format!("unknown directive `#{other}`"),
                    })
                }
            }
            continue;
        }
        lex_line(text, line, &mut tokens)?;
    }
    if let Some(top) = open.last() {
        return Err(FlcError::UnbalancedDirective { line: top.line });
    }
    // A trailing newline terminates the last line rather than starting one.
    if src.ends_with('\n') && line_count > 1 {
        line_count -= 1;
    }
    tokens.push(Token {
        tok: Tok::Eof,
        line: line_count,
        col: 1,
    });
    scopes.sort_by_key(|s| (s.first_line, std::cmp::Reverse(s.last_line)));
    Ok(Lexed {
        tokens,
        scopes,
        line_count,
    })
}

fn branch_condition(o: &OpenScope) -> FeatureExpr {
    let local = if o.seen_else {
        FeatureExpr::not(o.cond.clone())
    } else {
        o.cond.clone()
    };
    FeatureExpr::and([o.outer.clone(), local])
}

fn split_word(s: &str) -> (&str, &str) {
    let end = s
        .find(|c: char| !c.is_ascii_alphanumeric() && c != '_')
        .unwrap_or(s.len());
    (&s[..end], &s[end..])
}

fn strip_comment(s: &str) -> &str {
    match s.find("//") {
        Some(i) => &s[..i],
        None => s,
    }
}

fn lex_line(text: &str, line: u32, out: &mut Vec<Token>) -> Result<(), FlcError> {
    let bytes = text.as_bytes();
    let mut i = 0;
    'outer: while i < bytes.len() {
        let c = bytes[i];
        let col = i as u32 + 1;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if text[i..].starts_with("//") {
            break;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let v: i64 = text[start..i].parse().map_err(|_| FlcError::Lex {
                line,
                col,
                message: "integer literal out of range".into(),
            })?;
            if v > 1i64 << 31 {
                return Err(FlcError::Lex {
                    line,
                    col,
                    message: "integer literal out of range".into(),
                });
            }
            out.push(Token {
                tok: Tok::Int(v),
                line,
                col,
            });
            continue;
        }
        if c == b'_' || c.is_ascii_alphabetic() {
            let start = i;
            while i < bytes.len() && (bytes[i] == b'_' || bytes[i].is_ascii_alphanumeric()) {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(text[start..i].to_string()),
                line,
                col,
            });
            continue;
        }
        for p in PUNCTS {
            if text[i..].starts_with(p) {
                out.push(Token {
                    tok: Tok::Punct(p),
                    line,
                    col,
                });
                i += p.len();
                continue 'outer;
            }
        }
        return Err(FlcError::Lex {
            line,
            col,
            message: format!("unexpected character {:?}", text[i..].chars().next().unwrap()),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_and_positions() {
        let l = lex("x = a <= 10;").unwrap();
        let toks: Vec<_> = l.tokens.iter().map(|t| t.tok.clone()).collect();
        assert_eq!(
            toks,
            vec![
                Tok::Ident("x".into()),
                Tok::Punct("="),
                Tok::Ident("a".into()),
                Tok::Punct("<="),
                Tok::Int(10),
                Tok::Punct(";"),
                Tok::Eof
            ]
        );
        assert_eq!(l.tokens[4].col, 10);
    }

    #[test]
    fn nested_scopes_accumulate() {
        let src = "#if A\nx;\n#if B\ny;\n#else\nz;\n#endif\n#endif\n";
        let l = lex(src).unwrap();
        let conds: Vec<_> = l
            .scopes
            .iter()
            .map(|s| (s.first_line, s.last_line, s.condition.to_string()))
            .collect();
        assert_eq!(
            conds,
            vec![
                (2, 7, "A".to_string()),
                (4, 4, "A && B".to_string()),
                (6, 6, "A && !B".to_string()),
            ]
        );
    }

    #[test]
    fn unterminated_if_is_reported_at_its_line() {
        match lex("x;\n#if A\ny;\n") {
            Err(FlcError::UnbalancedDirective { line }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            lex("#endif\n"),
            Err(FlcError::UnbalancedDirective { line: 1 })
        ));
        assert!(matches!(
            lex("#if A\n#else\n#else\n#endif"),
            Err(FlcError::UnbalancedDirective { line: 3 })
        ));
    }

    #[test]
    fn unknown_directive() {
        assert!(matches!(lex("#ifdef A\n#endif"), Err(FlcError::Lex { .. })));
    }
}
