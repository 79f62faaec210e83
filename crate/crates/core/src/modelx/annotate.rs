use std::collections::BTreeSet;

use crate::flc::ast::*;
use crate::flc::{FeatureExpr, FlcError, SourceUnit};

/// Name of the metadata variable injected for function `f`.
pub fn metadata_var_name(function: &str) -> String {
    format!("{function}Res")
}

/// Exposes return values in path conditions.
///
/// For every function returning a value, injects a global `<F>Res`, makes it
/// symbolic on entry to `F`, and marks it as the function's metadata
/// variable so that lowering constrains it to the returned value at every
/// return. Each call creates a fresh symbolic instance.
pub fn annotate_metadata_vars(unit: &SourceUnit) -> Result<SourceUnit, FlcError> {
    let taken = identifiers(unit);
    let mut out = unit.clone();
    let mut injected: Vec<(String, u32)> = Vec::new();
    let mut result = Ok(());
    for_each_function_mut(&mut out.items, &mut |f| {
        if f.ret.is_none() || f.meta_var.is_some() || result.is_err() {
            return;
        }
        let name = metadata_var_name(&f.name);
        if taken.contains(&name) || injected.iter().any(|(n, _)| *n == name) {
            result = Err(FlcError::NameCollision { name });
            return;
        }
        f.body.insert(
            0,
            Stmt {
                kind: StmtKind::MakeSymbolic {
                    target: LValue {
                        name: name.clone(),
                        index: None,
                    },
                    range: None,
                },
                line: f.line,
                end_line: f.line,
            },
        );
        f.meta_var = Some(name.clone());
        injected.push((name, f.line));
    });
    result?;
    // Globals go first so every function can see them, whatever its scope.
    let globals = injected.into_iter().map(|(name, line)| {
        Item::Global(GlobalDecl {
            name,
            width: Width::W32,
            len: None,
            init: None,
            line,
        })
    });
    let at = out
        .items
        .iter()
        .position(|i| !matches!(i, Item::Features { .. }))
        .unwrap_or(out.items.len());
    out.items.splice(at..at, globals);
    Ok(out)
}

fn for_each_function_mut(items: &mut [Item], f: &mut dyn FnMut(&mut FunctionDef)) {
    for item in items {
        match item {
            Item::Function(def) => f(def),
            Item::Directive(d) => {
                for_each_function_mut(&mut d.then_part, f);
                if let Some(e) = &mut d.else_part {
                    for_each_function_mut(e, f);
                }
            }
            _ => {}
        }
    }
}

/// Every identifier the unit declares or uses.
fn identifiers(unit: &SourceUnit) -> BTreeSet<String> {
    let mut out: BTreeSet<String> = unit.features.iter().cloned().collect();
    walk_globals(&unit.items, &mut |g| {
        out.insert(g.name.clone());
    });
    walk_functions(&unit.items, &FeatureExpr::True, &mut |f, _| {
        out.insert(f.name.clone());
        out.extend(f.params.iter().map(|p| p.name.clone()));
        walk_stmts(&f.body, &mut |s| match &s.kind {
            StmtKind::Decl { name, .. } => {
                out.insert(name.clone());
            }
            StmtKind::Assign { target, .. } | StmtKind::MakeSymbolic { target, .. } => {
                out.insert(target.name.clone());
            }
            _ => {}
        });
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flc::{parse_unit, pretty_print, resolve_product, InstKind, LowerOptions, ProductDef};

    const SRC: &str = "\
int verified;
int isVerified() {
  if (verified == 1) {
    return 1;
  }
  return 0;
}
void log() {
}
void main() {
  int r;
  r = isVerified();
  log();
}
";

    #[test]
    fn int_functions_get_metadata_variable() {
        let unit = parse_unit(SRC, "t.flc").unwrap();
        let ann = annotate_metadata_vars(&unit).unwrap();
        let text = pretty_print(&ann);
        assert!(text.contains("int isVerifiedRes;"), "{text}");
        assert!(text.contains("@meta(isVerifiedRes)"), "{text}");
        assert!(text.contains("make_symbolic(isVerifiedRes);"), "{text}");
        assert!(!text.contains("logRes"));
        // The annotated unit still round-trips through the parser.
        assert!(parse_unit(&text, "t.flc").is_ok());

        let prog = resolve_product(
            &ann,
            &ProductDef::new("p", Vec::<String>::new()),
            &LowerOptions::default(),
        )
        .unwrap();
        let f = prog.function("isVerified");
        let assumes = f
            .body
            .iter()
            .filter(|i| matches!(i.kind, InstKind::Assume { .. }))
            .count();
        assert_eq!(assumes, 3, "two explicit returns plus the implicit one");
        assert!(f
            .body
            .iter()
            .any(|i| matches!(i.kind, InstKind::MakeSymbolic { metadata: true, .. })));
        // Void functions are untouched.
        assert_eq!(
            prog.function("log"),
            resolve_product(
                &unit,
                &ProductDef::new("p", Vec::<String>::new()),
                &LowerOptions::default()
            )
            .unwrap()
            .function("log")
        );
    }

    #[test]
    fn collision_is_reported() {
        let src = "int fRes;\nint f() {\nreturn 1;\n}\nvoid main() {\n}\n";
        let unit = parse_unit(src, "t.flc").unwrap();
        assert_eq!(
            annotate_metadata_vars(&unit).unwrap_err(),
            FlcError::NameCollision { name: "fRes".into() }
        );
    }
}
