//! Properties of the front end, the engine and metadata annotation over
//! randomly generated feature-annotated programs.

use std::collections::{BTreeMap, BTreeSet};

use featint_core::flc::{parse_unit, pretty_print, resolve_product, FeatureExpr, LowerOptions, ProductDef, SourceUnit};
use featint_core::modelx::{annotate_metadata_vars, metadata_var_name, PathRecord, RecordStatus};
use featint_core::symex::{extract_feature_models, EngineConfig, PathStatus};
use featint_oracle::interp::{enumerate_runs, match_paths, ConcreteRun, EnumError};
use proptest::prelude::*;

const FEATURES: [&str; 3] = ["A", "B", "C"];

#[derive(Debug, Clone)]
enum Cond {
    Atom(usize),
    Not(Box<Cond>),
    And(Box<Cond>, Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
}

impl Cond {
    fn text(&self) -> String {
        match self {
            Cond::Atom(k) => FEATURES[*k].into(),
            Cond::Not(c) => format!("!({})", c.text()),
            Cond::And(a, b) => format!("({} && {})", a.text(), b.text()),
            Cond::Or(a, b) => format!("({} || {})", a.text(), b.text()),
        }
    }

    fn holds(&self, on: &[bool; 3]) -> bool {
        match self {
            Cond::Atom(k) => on[*k],
            Cond::Not(c) => !c.holds(on),
            Cond::And(a, b) => a.holds(on) && b.holds(on),
            Cond::Or(a, b) => a.holds(on) || b.holds(on),
        }
    }
}

#[derive(Debug, Clone)]
enum Stmt {
    Assign {
        dst: usize,
        src: usize,
        c: i64,
    },
    Call {
        dst: usize,
        src: usize,
    },
    Symbolic {
        dst: usize,
    },
    FailIf {
        var: usize,
        c: i64,
    },
    Assert {
        var: usize,
        c: i64,
    },
    ArrayStore {
        index: usize,
        src: usize,
    },
    If {
        var: usize,
        c: i64,
        then: Vec<Stmt>,
        other: Vec<Stmt>,
    },
    While {
        body: Vec<Stmt>,
    },
    Directive {
        cond: Cond,
        then: Vec<Stmt>,
        other: Option<Vec<Stmt>>,
    },
}

fn cond() -> impl Strategy<Value = Cond> {
    (0..3usize).prop_map(Cond::Atom).prop_recursive(2, 6, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|c| Cond::Not(Box::new(c))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Cond::And(Box::new(a), Box::new(b))),
            (inner.clone(), inner).prop_map(|(a, b)| Cond::Or(Box::new(a), Box::new(b))),
        ]
    })
}

fn stmt() -> impl Strategy<Value = Stmt> {
    let leaf = prop_oneof![
        4 => (0..3usize, 0..3usize, -2..4i64).prop_map(|(dst, src, c)| Stmt::Assign { dst, src, c }),
        1 => (0..3usize, 0..3usize).prop_map(|(dst, src)| Stmt::Call { dst, src }),
        1 => (0..3usize).prop_map(|dst| Stmt::Symbolic { dst }),
        1 => (0..3usize, 0..4i64).prop_map(|(var, c)| Stmt::FailIf { var, c }),
        1 => (0..3usize, 0..4i64).prop_map(|(var, c)| Stmt::Assert { var, c }),
        1 => (0..3usize, 0..3usize).prop_map(|(index, src)| Stmt::ArrayStore { index, src }),
    ];
    leaf.prop_recursive(3, 14, 3, |inner| {
        let block = || prop::collection::vec(inner.clone(), 0..3);
        prop_oneof![
            (0..3usize, 0..3i64, block(), block()).prop_map(|(var, c, then, other)| Stmt::If { var, c, then, other }),
            block().prop_map(|body| Stmt::While { body }),
            (cond(), block(), prop::option::of(block())).prop_map(|(cond, then, other)| Stmt::Directive {
                cond,
                then,
                other
            }),
        ]
    })
}

/// Source text plus, for every line of `main`, the directive conditions
/// enclosing it (with polarity) and whether it opens a statement.
struct Rendered {
    text: String,
    lines: BTreeMap<u32, LineInfo>,
}

#[derive(Debug, Clone)]
struct LineInfo {
    ctx: Vec<(Cond, bool)>,
    statement: bool,
    directive: bool,
}

impl LineInfo {
    fn holds(&self, on: &[bool; 3]) -> bool {
        self.ctx.iter().all(|(c, pol)| c.holds(on) == *pol)
    }
}

struct Writer {
    text: String,
    line: u32,
    lines: BTreeMap<u32, LineInfo>,
    ctx: Vec<(Cond, bool)>,
}

impl Writer {
    fn emit(&mut self, depth: usize, s: &str, statement: bool, directive: bool) {
        self.line += 1;
        self.text.push_str(&"  ".repeat(depth));
        self.text.push_str(s);
        self.text.push('\n');
        self.lines.insert(
            self.line,
            LineInfo {
                ctx: self.ctx.clone(),
                statement,
                directive,
            },
        );
    }

    fn block(&mut self, stmts: &[Stmt], depth: usize, spec: &mut u32) {
        for s in stmts {
            self.stmt(s, depth, spec);
        }
    }

    fn stmt(&mut self, s: &Stmt, d: usize, spec: &mut u32) {
        match s {
            Stmt::Assign { dst, src, c } => {
                let rhs = if *c < 0 {
                    format!("g{src} - {}", -c)
                } else {
                    format!("g{src} + {c}")
                };
                self.emit(d, &format!("g{dst} = {rhs};"), true, false);
            }
            Stmt::Call { dst, src } => self.emit(d, &format!("g{dst} = h(g{src});"), true, false),
            Stmt::Symbolic { dst } => self.emit(d, &format!("make_symbolic(g{dst}, 0, 2);"), true, false),
            Stmt::FailIf { var, c } => {
                *spec += 1;
                self.emit(d, &format!("if (g{var} == {c}) {{"), true, false);
                self.emit(d + 1, &format!("@spec(s{spec}) fail();"), true, false);
                self.emit(d, "}", false, false);
            }
            Stmt::Assert { var, c } => self.emit(d, &format!("assert(g{var} != {c});"), true, false),
            Stmt::ArrayStore { index, src } => self.emit(d, &format!("arr[g{index}] = g{src};"), true, false),
            Stmt::If { var, c, then, other } => {
                self.emit(d, &format!("if (g{var} < {c}) {{"), true, false);
                self.block(then, d + 1, spec);
                if other.is_empty() {
                    self.emit(d, "}", false, false);
                } else {
                    self.emit(d, "} else {", false, false);
                    self.block(other, d + 1, spec);
                    self.emit(d, "}", false, false);
                }
            }
            Stmt::While { body } => {
                self.emit(d, "while (g2 < 2) {", true, false);
                self.block(body, d + 1, spec);
                self.emit(d + 1, "g2 = g2 + 1;", true, false);
                self.emit(d, "}", false, false);
            }
            Stmt::Directive { cond, then, other } => {
                self.emit(0, &format!("#if {}", cond.text()), false, true);
                self.ctx.push((cond.clone(), true));
                self.block(then, d, spec);
                self.ctx.pop();
                if let Some(other) = other {
                    self.emit(0, "#else", false, true);
                    self.ctx.push((cond.clone(), false));
                    self.block(other, d, spec);
                    self.ctx.pop();
                }
                self.emit(0, "#endif", false, true);
            }
        }
    }
}

fn render(body: &[Stmt]) -> Rendered {
    let mut w = Writer {
        text: String::new(),
        line: 0,
        lines: BTreeMap::new(),
        ctx: Vec::new(),
    };
    let header = "features A, B, C;\nint g0;\nint g1;\nint g2;\nint arr[3];\n\
                  int h(int v) {\n  if (v > 1) {\n    return 1;\n  }\n  return v;\n}\n";
    w.text.push_str(header);
    w.line = header.lines().count() as u32;
    w.emit(0, "void main() {", false, false);
    w.emit(1, "make_symbolic(g0, 0, 3);", true, false);
    w.block(body, 1, &mut 0);
    w.emit(0, "}", false, false);
    Rendered {
        text: w.text,
        lines: w.lines,
    }
}

fn products() -> Vec<(ProductDef, [bool; 3])> {
    (0..8u32)
        .map(|mask| {
            let on = [mask & 1 != 0, mask & 2 != 0, mask & 4 != 0];
            let enabled = (0..3).filter(|&k| on[k]).map(|k| FEATURES[k].to_string()).collect();
            (
                ProductDef {
                    name: format!("p{mask}"),
                    enabled,
                },
                on,
            )
        })
        .collect()
}

fn no_empty_lists(e: &FeatureExpr) -> bool {
    match e {
        FeatureExpr::True | FeatureExpr::Atom(_) => true,
        FeatureExpr::Not(x) => no_empty_lists(x),
        FeatureExpr::And(v) | FeatureExpr::Or(v) => !v.is_empty() && v.iter().all(no_empty_lists),
    }
}

fn program() -> impl Strategy<Value = Vec<Stmt>> {
    prop::collection::vec(stmt(), 2..8)
}

fn parse(text: &str) -> SourceUnit {
    parse_unit(text, "gen.flc").unwrap_or_else(|e| panic!("{e}\n{text}"))
}

/// Runs, with metadata inputs dropped, as a sorted list.
fn observable(runs: &[ConcreteRun], hidden: &BTreeSet<String>) -> Vec<String> {
    let mut out: Vec<String> = runs
        .iter()
        .map(|r| {
            let visible: BTreeMap<&String, &i64> = r.assignment.iter().filter(|(k, _)| !hidden.contains(*k)).collect();
            format!("{:?} {:?} {:?}", r.termination, r.spec_id, visible)
        })
        .collect();
    out.sort();
    out
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, ..ProptestConfig::default() })]

    #[test]
    fn pretty_printing_reparses_to_the_same_tree(body in program()) {
        let r = render(&body);
        let once = pretty_print(&parse(&r.text));
        let twice = pretty_print(&parse(&once));
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn resolution_keeps_exactly_the_enabled_lines(body in program()) {
        let r = render(&body);
        let unit = parse(&r.text);
        for (p, on) in products() {
            let ir = resolve_product(&unit, &p, &LowerOptions { loop_bound: 2 }).unwrap();
            let mut present: BTreeMap<u32, &FeatureExpr> = BTreeMap::new();
            for (f, inst) in ir.instructions() {
                if f.name == "main" {
                    present.insert(inst.loc.line, &inst.presence);
                }
            }
            for (line, info) in &r.lines {
                if info.directive {
                    prop_assert!(!present.contains_key(line), "instruction on directive line {}", line);
                    continue;
                }
                if info.statement {
                    prop_assert_eq!(present.contains_key(line), info.holds(&on), "line {} in {}", line, p);
                } else if present.contains_key(line) {
                    prop_assert!(info.holds(&on), "line {} kept in {}", line, p);
                }
                if let Some(presence) = present.get(line) {
                    for (_, other) in products() {
                        let enabled: BTreeSet<String> =
                            (0..3).filter(|&k| other[k]).map(|k| FEATURES[k].to_string()).collect();
                        prop_assert_eq!(presence.eval(&enabled), info.holds(&other), "presence of line {}", line);
                    }
                }
            }
        }
    }

    #[test]
    fn presence_of_is_total_and_matches_directive_nesting(body in program()) {
        let r = render(&body);
        let unit = parse(&r.text);
        let total = r.text.lines().count() as u32;
        for line in 1..=total {
            let e = unit.presence_of(line).unwrap();
            prop_assert!(no_empty_lists(&e));
            if let Some(info) = r.lines.get(&line).filter(|i| !i.directive) {
                for (p, on) in products() {
                    prop_assert_eq!(e.eval(&p.enabled), info.holds(&on), "line {}", line);
                }
            }
        }
        prop_assert!(unit.presence_of(0).is_err());
        prop_assert!(unit.presence_of(total + 1).is_err());
    }

    #[test]
    fn symbolic_paths_match_concrete_runs(body in program()) {
        let r = render(&body);
        let unit = annotate_metadata_vars(&parse(&r.text)).unwrap();
        for (p, _) in products().into_iter().step_by(3) {
            let runs = match enumerate_runs(&unit, &p, 2, 4000) {
                Ok(runs) => runs,
                Err(EnumError::TooManyRuns(_)) => continue,
                Err(e) => panic!("{e:?}"),
            };
            let config = EngineConfig { loop_bound: 2, longest: 2, ..EngineConfig::default() };
            let ir = resolve_product(&unit, &p, &LowerOptions { loop_bound: 2 }).unwrap();
            let result = extract_feature_models(&ir, &config).unwrap();
            prop_assert!(!result.truncated);
            if let Err(e) = match_paths(&result, &runs) {
                return Err(TestCaseError::fail(format!("{e}\n{}", r.text)));
            }
            for path in &result.paths {
                let Some(rec) = PathRecord::from_outcome(&p.name, path) else {
                    prop_assert_eq!(path.status, PathStatus::BoundExhausted);
                    continue;
                };
                prop_assert!(rec.validate().is_ok());
                match rec.status {
                    RecordStatus::Failure => prop_assert_eq!(rec.call_sequences.len(), 1),
                    RecordStatus::Normal => prop_assert!((1..=2).contains(&rec.call_sequences.len())),
                }
            }
        }
    }

    #[test]
    fn annotation_preserves_concrete_behaviour(body in program()) {
        let r = render(&body);
        let plain = parse(&r.text);
        let annotated = annotate_metadata_vars(&plain).unwrap();
        let hidden: BTreeSet<String> = [metadata_var_name("h")].into_iter().chain(
            (2..40).map(|k| format!("{}_{k}", metadata_var_name("h")))).collect();
        for (p, _) in products().into_iter().step_by(2) {
            let (Ok(a), Ok(b)) = (enumerate_runs(&plain, &p, 2, 4000), enumerate_runs(&annotated, &p, 2, 4000)) else {
                continue;
            };
            prop_assert_eq!(observable(&a, &hidden), observable(&b, &hidden));
        }
    }

    #[test]
    fn extraction_is_deterministic(body in program(), seed in any::<u64>()) {
        let r = render(&body);
        let unit = annotate_metadata_vars(&parse(&r.text)).unwrap();
        let p = &products()[7].0;
        let config = EngineConfig { loop_bound: 2, seed, ..EngineConfig::default() };
        let ir = resolve_product(&unit, p, &LowerOptions { loop_bound: 2 }).unwrap();
        let a = extract_feature_models(&ir, &config).unwrap();
        let b = extract_feature_models(&ir, &config).unwrap();
        let show = |x: &featint_core::symex::ExtractResult| {
            let paths: Vec<_> = x.paths.iter().filter_map(|o| PathRecord::from_outcome("p", o)).collect();
            format!("{:?} {:?} {:?}", paths, x.sl, x.ss)
        };
        prop_assert_eq!(show(&a), show(&b));
    }
}
