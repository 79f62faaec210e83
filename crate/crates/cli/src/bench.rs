//! Generators for the shipped benchmark product lines.
//!
//! Every suite follows one program shape. `main` makes a symbolic `mode`,
//! then runs an `outgoing` stage, a `deliver` stage and a `finish` chain.
//! Each feature contributes role functions (`<stage>__role__<Feature>`)
//! inside `#if <Feature>`, called from the stages under the same guard.
//!
//! A seeded interaction `s` between features `A` and `B` is a data flow
//! through the global `flow_s`: `A` stores it during `outgoing`, `B` loads it
//! (store-load) or overwrites it (store-store) during `deliver`. A guarded
//! interaction also gets a top-level checker `A_B_spec__s`, called from
//! `deliver` under `#if A && B`, that fails on the clashing value for one
//! value of `mode`. Failures therefore stop before the `finish` chain runs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use featint_core::flc::ProductDef;
use featint_core::symex::DepKind;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SeededInteraction {
    pub spec_id: String,
    pub features: (String, String),
    /// Whether a specification checker exists for it.
    pub guarded: bool,
}

#[derive(Debug, Clone)]
pub struct BenchmarkSuite {
    pub name: String,
    pub file_name: String,
    pub source: String,
    pub features: Vec<String>,
    pub products: Vec<ProductDef>,
    pub interactions: Vec<SeededInteraction>,
}

impl BenchmarkSuite {
    pub fn products_text(&self) -> String {
        self.products.iter().map(|p| format!("{p}\n")).collect()
    }

    pub fn interactions_csv(&self) -> String {
        let mut out = String::from("spec_id,feature_a,feature_b,guarded\n");
        for i in &self.interactions {
            let _ = writeln!(out, "{},{},{},{}", i.spec_id, i.features.0, i.features.1, i.guarded);
        }
        out
    }

    pub fn line_count(&self) -> usize {
        self.source.lines().count()
    }

    pub fn interaction(&self, spec_id: &str) -> Option<&SeededInteraction> {
        self.interactions.iter().find(|i| i.spec_id == spec_id)
    }
}

pub const SUITE_NAMES: [&str; 3] = ["mailkit", "liftkit", "pumpkit"];

#[derive(Debug, Clone)]
enum ProductPlan {
    /// Base product, every single feature, every seeded pair, then random
    /// combinations of `size` features up to `total` products.
    Mixed {
        total: usize,
        size: std::ops::RangeInclusive<usize>,
    },
    /// All subsets of the non-mandatory features.
    AllSubsets { mandatory: Vec<String> },
}

struct SuiteShape {
    name: &'static str,
    features: Vec<String>,
    /// `(spec id, source feature side, destination side, guarded)`.
    interactions: Vec<(u32, String, String, bool)>,
    plan: ProductPlan,
    /// Extra straight-line statements per role function, to scale the unit.
    padding: usize,
    /// Give each feature a self dependency where its items allow it.
    self_deps: bool,
}

/// One seeded data flow after orientation.
#[derive(Debug, Clone)]
struct Flow {
    spec: u32,
    src: String,
    dst: String,
    kind: DepKind,
    guarded: bool,
}

type Item = (String, bool, DepKind);

/// Orients every interaction and picks its dependency kind so that, where
/// possible, one of its two mining items (feature, role, kind) is used by
/// no other seeded flow.
fn orient(interactions: &[(u32, String, String, bool)]) -> Vec<Flow> {
    let mut used: BTreeMap<Item, usize> = BTreeMap::new();
    let mut claimed: BTreeSet<Item> = BTreeSet::new();
    let mut out = Vec::new();
    for (spec, a, b, guarded) in interactions {
        let options = [
            (a, b, DepKind::SL),
            (b, a, DepKind::SL),
            (a, b, DepKind::SS),
            (b, a, DepKind::SS),
        ];
        let items = |(s, d, k): (&String, &String, DepKind)| ((s.clone(), true, k), (d.clone(), false, k));
        let pick = options
            .iter()
            .copied()
            .find(|&o| {
                let (si, di) = items(o);
                let free = |i: &Item| used.get(i).copied().unwrap_or(0) == 0;
                (free(&si) && !claimed.contains(&di)) || (free(&di) && !claimed.contains(&si))
            })
            .unwrap_or(options[0]);
        let (si, di) = items(pick);
        if used.get(&si).copied().unwrap_or(0) == 0 && !claimed.contains(&di) {
            claimed.insert(si.clone());
        } else if used.get(&di).copied().unwrap_or(0) == 0 {
            claimed.insert(di.clone());
        }
        *used.entry(si).or_default() += 1;
        *used.entry(di).or_default() += 1;
        out.push(Flow {
            spec: *spec,
            src: pick.0.clone(),
            dst: pick.1.clone(),
            kind: pick.2,
            guarded: *guarded,
        });
    }
    out
}

struct Writer {
    text: String,
}

impl Writer {
    fn line(&mut self, indent: usize, s: &str) {
        for _ in 0..indent {
            self.text.push_str("  ");
        }
        self.text.push_str(s);
        self.text.push('\n');
    }
}

const MODES: u32 = 3;

fn render(shape: &SuiteShape, flows: &[Flow]) -> String {
    let mut w = Writer { text: String::new() };
    let feats = &shape.features;
    w.line(0, &format!("features {};", feats.join(", ")));
    w.line(0, "");
    w.line(0, "int mode;");
    w.line(0, "int events;");
    w.line(0, "int outbox[4];");
    w.line(0, "int archived;");
    for f in flows {
        w.line(0, &format!("int flow_{};", f.spec));
    }
    for f in feats {
        w.line(0, &format!("int opt_{f};"));
    }
    // Self dependencies only where they do not share an item with a seeded flow.
    let mut busy: BTreeSet<Item> = BTreeSet::new();
    for f in flows {
        busy.insert((f.src.clone(), true, f.kind));
        busy.insert((f.dst.clone(), false, f.kind));
    }
    let self_dep: BTreeSet<&String> = feats
        .iter()
        .filter(|f| {
            shape.self_deps
                && !busy.contains(&((*f).clone(), true, DepKind::SL))
                && !busy.contains(&((*f).clone(), false, DepKind::SL))
        })
        .collect();
    for f in &self_dep {
        w.line(0, &format!("int level_{f};"));
    }
    w.line(0, "");
    w.line(0, "void log_event(int code) {");
    w.line(1, "events = events + code;");
    w.line(0, "}");
    w.line(0, "");

    for f in flows.iter().filter(|f| f.guarded) {
        let value = if f.kind == DepKind::SL { 1 } else { 2 };
        w.line(0, &format!("void {}_{}_spec__{}() {{", f.src, f.dst, f.spec));
        w.line(
            1,
            &format!("if (flow_{} == {value} && mode == {}) {{", f.spec, f.spec % MODES),
        );
        w.line(2, &format!("@spec({}) fail();", f.spec));
        w.line(1, "}");
        w.line(0, "}");
        w.line(0, "");
    }

    for feat in feats {
        w.line(0, &format!("#if {feat}"));
        w.line(0, &format!("int ready__role__{feat}() {{"));
        w.line(1, &format!("if (opt_{feat} == 1) {{"));
        w.line(2, "return 1;");
        w.line(1, "}");
        w.line(1, "return 0;");
        w.line(0, "}");
        w.line(0, "");
        w.line(0, &format!("void outgoing__role__{feat}() {{"));
        w.line(1, &format!("make_symbolic(opt_{feat}, 0, 1);"));
        pad(&mut w, shape.padding, "o");
        w.line(1, &format!("if (ready__role__{feat}() == 1) {{"));
        for f in flows.iter().filter(|f| &f.src == feat) {
            w.line(2, &format!("flow_{} = 1;", f.spec));
        }
        if self_dep.contains(feat) {
            w.line(2, &format!("level_{feat} = 1;"));
        }
        w.line(2, "log_event(1);");
        w.line(1, "}");
        w.line(0, "}");
        w.line(0, "");
        w.line(0, &format!("void incoming__role__{feat}() {{"));
        pad(&mut w, shape.padding, "i");
        for f in flows.iter().filter(|f| &f.dst == feat) {
            match f.kind {
                DepKind::SL => {
                    w.line(1, &format!("if (flow_{} == 1) {{", f.spec));
                    w.line(2, &format!("log_event({});", f.spec + 2));
                    w.line(1, "}");
                }
                DepKind::SS => {
                    w.line(1, &format!("if (opt_{feat} == 1) {{"));
                    w.line(2, &format!("flow_{} = 2;", f.spec));
                    w.line(1, "}");
                }
            }
        }
        if self_dep.contains(feat) {
            w.line(1, &format!("if (level_{feat} == 1) {{"));
            w.line(2, "log_event(2);");
            w.line(1, "}");
        }
        w.line(1, "log_event(0);");
        w.line(0, "}");
        w.line(0, "#endif");
        w.line(0, "");
    }

    w.line(0, "void outgoing() {");
    w.line(1, "outbox[0] = mode;");
    for feat in feats {
        w.line(0, &format!("#if {feat}"));
        w.line(1, &format!("outgoing__role__{feat}();"));
        w.line(0, "#endif");
    }
    w.line(0, "}");
    w.line(0, "");
    w.line(0, "void store_mail() {");
    w.line(1, "outbox[1] = outbox[0] + 1;");
    w.line(0, "}");
    w.line(0, "");
    w.line(0, "void filter_mail() {");
    w.line(1, "outbox[2] = outbox[0];");
    w.line(0, "}");
    w.line(0, "");
    w.line(0, "void deliver() {");
    w.line(1, "int i;");
    w.line(1, "i = 0;");
    w.line(1, "while (i < 2) {");
    w.line(2, "outbox[i] = outbox[i] + 1;");
    w.line(2, "i = i + 1;");
    w.line(1, "}");
    w.line(1, "if (mode == 0) {");
    w.line(2, "filter_mail();");
    w.line(1, "} else {");
    w.line(2, "store_mail();");
    w.line(1, "}");
    for feat in feats {
        w.line(0, &format!("#if {feat}"));
        w.line(1, &format!("incoming__role__{feat}();"));
        w.line(0, "#endif");
    }
    for f in flows.iter().filter(|f| f.guarded) {
        w.line(0, &format!("#if {} && {}", f.src, f.dst));
        w.line(1, &format!("{}_{}_spec__{}();", f.src, f.dst, f.spec));
        w.line(0, "#endif");
    }
    w.line(0, "}");
    w.line(0, "");
    let chain = ["finish", "archive", "compact", "notify", "cleanup"];
    for (k, name) in chain.iter().enumerate().rev() {
        w.line(0, &format!("void {name}() {{"));
        w.line(1, &format!("archived = archived + {};", k + 1));
        if let Some(next) = chain.get(k + 1) {
            w.line(1, &format!("{next}();"));
        }
        w.line(0, "}");
        w.line(0, "");
    }
    w.line(0, "void main() {");
    w.line(1, &format!("make_symbolic(mode, 0, {});", MODES - 1));
    w.line(1, "outgoing();");
    w.line(1, "deliver();");
    w.line(1, "finish();");
    w.line(0, "}");
    w.text
}

/// Straight-line local arithmetic that makes a role function longer.
fn pad(w: &mut Writer, lines: usize, tag: &str) {
    if lines == 0 {
        return;
    }
    w.line(1, &format!("int pad_{tag};"));
    w.line(1, &format!("pad_{tag} = 0;"));
    for k in 0..lines {
        w.line(1, &format!("pad_{tag} = pad_{tag} + {};", k % 7 + 1));
    }
}

fn products(shape: &SuiteShape, flows: &[Flow], seed: u64) -> Vec<ProductDef> {
    let feats = &shape.features;
    match &shape.plan {
        ProductPlan::AllSubsets { mandatory } => {
            let optional: Vec<&String> = feats.iter().filter(|f| !mandatory.contains(f)).collect();
            (0u32..1 << optional.len())
                .map(|mask| {
                    let mut enabled: BTreeSet<String> = mandatory.iter().cloned().collect();
                    for (k, f) in optional.iter().enumerate() {
                        if mask & (1 << k) != 0 {
                            enabled.insert((*f).clone());
                        }
                    }
                    (mask, enabled)
                })
                .map(|(mask, enabled)| ProductDef::new(format!("{}_p{mask:02}", shape.name), enabled))
                .collect()
        }
        ProductPlan::Mixed { total, size } => {
            let mut sets: Vec<BTreeSet<String>> = vec![BTreeSet::new()];
            let push = |s: BTreeSet<String>, sets: &mut Vec<BTreeSet<String>>| {
                if !sets.contains(&s) && sets.len() < *total {
                    sets.push(s);
                }
            };
            for f in flows {
                push([f.src.clone(), f.dst.clone()].into(), &mut sets);
            }
            for f in feats {
                push([f.clone()].into(), &mut sets);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut guard = 0;
            while sets.len() < *total && guard < 10_000 {
                guard += 1;
                let n = *size.start() + (guard % (size.end() - size.start() + 1));
                let pick: BTreeSet<String> = feats.choose_multiple(&mut rng, n).cloned().collect();
                push(pick, &mut sets);
            }
            sets.into_iter()
                .enumerate()
                .map(|(k, s)| ProductDef::new(format!("{}_p{k:02}", shape.name), s))
                .collect()
        }
    }
}

fn build(shape: SuiteShape, seed: u64) -> BenchmarkSuite {
    let flows = orient(&shape.interactions);
    let source = render(&shape, &flows);
    let products = products(&shape, &flows, seed);
    BenchmarkSuite {
        name: shape.name.to_string(),
        file_name: format!("{}.flc", shape.name),
        source,
        features: shape.features.clone(),
        products,
        interactions: shape
            .interactions
            .iter()
            .map(|(id, a, b, g)| SeededInteraction {
                spec_id: id.to_string(),
                features: (a.clone(), b.clone()),
                guarded: *g,
            })
            .collect(),
    }
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn pairs(v: &[(u32, &str, &str, bool)]) -> Vec<(u32, String, String, bool)> {
    v.iter()
        .map(|(i, a, b, g)| (*i, a.to_string(), b.to_string(), *g))
        .collect()
}

/// E-mail client analog: 8 features, 10 interactions, 36 products.
pub fn mailkit(seed: u64) -> BenchmarkSuite {
    build(
        SuiteShape {
            name: "mailkit",
            features: strings(&[
                "Addressbook",
                "Autoresponder",
                "Decrypt",
                "Encrypt",
                "Forward",
                "Keys",
                "Sign",
                "Verify",
            ]),
            interactions: pairs(&[
                (0, "Decrypt", "Forward", true),
                (1, "Addressbook", "Encrypt", true),
                (3, "Sign", "Verify", true),
                (4, "Sign", "Forward", true),
                (6, "Encrypt", "Decrypt", true),
                (7, "Encrypt", "Verify", true),
                (8, "Encrypt", "Autoresponder", true),
                (9, "Encrypt", "Forward", true),
                (11, "Decrypt", "Autoresponder", true),
                (27, "Verify", "Forward", true),
            ]),
            plan: ProductPlan::Mixed { total: 36, size: 3..=4 },
            padding: 0,
            self_deps: true,
        },
        seed,
    )
}

/// Elevator analog: 6 features, 5 interactions, 20 products.
pub fn liftkit(seed: u64) -> BenchmarkSuite {
    build(
        SuiteShape {
            name: "liftkit",
            features: strings(&[
                "Base",
                "Empty",
                "ExecutiveFloor",
                "Overloaded",
                "TwoThirdsFull",
                "Weight",
            ]),
            interactions: pairs(&[
                (1, "Empty", "Weight", true),
                (2, "ExecutiveFloor", "TwoThirdsFull", true),
                (3, "Overloaded", "Weight", true),
                (9, "ExecutiveFloor", "Empty", true),
                (13, "TwoThirdsFull", "Overloaded", true),
            ]),
            plan: ProductPlan::Mixed { total: 20, size: 3..=4 },
            padding: 0,
            self_deps: true,
        },
        seed,
    )
}

/// Mine pump analog: 7 features, 4 interactions (one without a checker),
/// 64 products over the six optional features.
pub fn pumpkit(seed: u64) -> BenchmarkSuite {
    build(
        SuiteShape {
            name: "pumpkit",
            features: strings(&["Base", "Command", "High", "Low", "MethaneAlarm", "MethaneQuery", "Stop"]),
            interactions: pairs(&[
                (1, "MethaneAlarm", "Command", true),
                (2, "Low", "Stop", true),
                (3, "High", "MethaneQuery", true),
                (4, "High", "Low", false),
            ]),
            plan: ProductPlan::AllSubsets {
                mandatory: strings(&["Base"]),
            },
            padding: 0,
            self_deps: true,
        },
        seed,
    )
}

/// Large unit for throughput checks: `features` features, a chain of
/// interactions between neighbours, and padded role functions.
pub fn scale_unit(seed: u64, features: usize, padding: usize, product_count: usize) -> BenchmarkSuite {
    let names: Vec<String> = (0..features).map(|k| format!("F{k:03}")).collect();
    let interactions = (0..features / 2)
        .map(|k| (k as u32 + 1, names[2 * k].clone(), names[2 * k + 1].clone(), true))
        .collect();
    build(
        SuiteShape {
            name: "scale",
            features: names,
            interactions,
            plan: ProductPlan::Mixed {
                total: product_count,
                size: 4..=6,
            },
            padding,
            self_deps: true,
        },
        seed,
    )
}

/// The 120-feature unit of roughly 15k lines.
pub fn scale_default(seed: u64) -> BenchmarkSuite {
    scale_unit(seed, 120, 43, 40)
}

pub fn by_name(name: &str, seed: u64) -> Option<BenchmarkSuite> {
    match name {
        "mailkit" => Some(mailkit(seed)),
        "liftkit" => Some(liftkit(seed)),
        "pumpkit" => Some(pumpkit(seed)),
        "scale" => Some(scale_default(seed)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use featint_core::flc::parse_unit;

    #[test]
    fn suites_parse_and_have_documented_shape() {
        let m = mailkit(0);
        assert_eq!(m.features.len(), 8);
        assert_eq!(m.products.len(), 36);
        assert_eq!(m.interactions.len(), 10);
        let l = liftkit(0);
        assert_eq!(l.features.len(), 6);
        assert_eq!(l.products.len(), 20);
        assert_eq!(l.interactions.len(), 5);
        let p = pumpkit(0);
        assert_eq!(p.features.len(), 7);
        assert_eq!(p.products.len(), 64);
        assert_eq!(p.interactions.iter().filter(|i| !i.guarded).count(), 1);
        for s in [m, l, p] {
            let unit = parse_unit(&s.source, &s.file_name).unwrap_or_else(|e| panic!("{}: {e}", s.name));
            for prod in &s.products {
                prod.validate(&unit).unwrap();
            }
            let names: BTreeSet<&String> = s.products.iter().map(|p| &p.name).collect();
            assert_eq!(names.len(), s.products.len());
        }
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(mailkit(3).source, mailkit(3).source);
        assert_eq!(mailkit(3).products, mailkit(3).products);
    }

    #[test]
    fn mailkit_flows_each_own_an_item() {
        let shape = mailkit(0);
        let flows = orient(
            &shape
                .interactions
                .iter()
                .map(|i| {
                    (
                        i.spec_id.parse().unwrap(),
                        i.features.0.clone(),
                        i.features.1.clone(),
                        true,
                    )
                })
                .collect::<Vec<_>>(),
        );
        let mut uses: BTreeMap<Item, usize> = BTreeMap::new();
        for f in &flows {
            *uses.entry((f.src.clone(), true, f.kind)).or_default() += 1;
            *uses.entry((f.dst.clone(), false, f.kind)).or_default() += 1;
        }
        for f in &flows {
            let own = uses[&(f.src.clone(), true, f.kind)] == 1 || uses[&(f.dst.clone(), false, f.kind)] == 1;
            assert!(own, "flow {} shares both items", f.spec);
        }
    }

    #[test]
    fn scale_unit_size() {
        let s = scale_default(0);
        assert_eq!(s.features.len(), 120);
        let lines = s.line_count();
        assert!((13_000..=17_000).contains(&lines), "{lines} lines");
        parse_unit(&s.source, &s.file_name).unwrap();
    }
}
