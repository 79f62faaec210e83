//! Random straight-line programs and their store/load dependencies computed
//! by a last-writer walk over the statement list.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use featint_core::symex::{DepKind, ExtractResult};
use rand::Rng;

pub const ARRAY_LEN: i64 = 4;
const GLOBALS: [&str; 3] = ["g0", "g1", "g2"];
const ARRAY: &str = "arr";
const LOCALS: [&str; 2] = ["x", "y"];

/// A memory cell with a concrete address.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cell {
    Global(&'static str),
    Element(i64),
    Local(&'static str),
    Param,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Const(i64),
    Read(Cell),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Line {
    /// `dst = a op b;`
    Assign { dst: Cell, a: Term, b: Option<Term> },
    /// `make_symbolic(dst);`
    Symbolic(Cell),
    /// `helper(arg);`
    CallHelper(Term),
}

/// `main` plus an optional one-parameter `helper`; every statement sits on
/// its own line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StraightLine {
    pub helper: Vec<Line>,
    pub main: Vec<Line>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    StoreLoad,
    StoreStore,
}

/// `(kind, src function, src line, dst function, dst line, object)`.
pub type Dep = (Kind, String, u32, String, u32, String);

fn random_term(rng: &mut impl Rng, in_helper: bool) -> Term {
    match rng.gen_range(0..10) {
        0..=2 => Term::Const(rng.gen_range(-3..10)),
        _ => Term::Read(random_cell(rng, in_helper)),
    }
}

fn random_cell(rng: &mut impl Rng, in_helper: bool) -> Cell {
    let pick = rng.gen_range(0..if in_helper { 5 } else { 6 });
    match pick {
        0..=2 => Cell::Global(GLOBALS[pick]),
        3 => Cell::Element(rng.gen_range(0..ARRAY_LEN)),
        4 if in_helper => Cell::Param,
        _ => Cell::Local(LOCALS[rng.gen_range(0..LOCALS.len())]),
    }
}

fn random_line(rng: &mut impl Rng, in_helper: bool, helper: bool) -> Line {
    match rng.gen_range(0..10) {
        0 => Line::Symbolic(random_cell(rng, in_helper)),
        1 if helper && !in_helper => Line::CallHelper(random_term(rng, false)),
        _ => Line::Assign {
            dst: random_cell(rng, in_helper),
            a: random_term(rng, in_helper),
            b: rng.gen_bool(0.6).then(|| random_term(rng, in_helper)),
        },
    }
}

impl StraightLine {
    /// At most `max_lines` statements across both functions.
    pub fn random(rng: &mut impl Rng, max_lines: usize) -> StraightLine {
        let with_helper = rng.gen_bool(0.5);
        let helper_len = if with_helper { rng.gen_range(1..=3) } else { 0 };
        let main_len = rng.gen_range(1..=max_lines.saturating_sub(helper_len).max(1));
        StraightLine {
            helper: (0..helper_len).map(|_| random_line(rng, true, false)).collect(),
            main: (0..main_len).map(|_| random_line(rng, false, with_helper)).collect(),
        }
    }

    fn has_helper(&self) -> bool {
        !self.helper.is_empty()
    }

    /// Source lines: globals on 1-2, the helper from 3, then `main`.
    pub fn helper_line(&self) -> u32 {
        3
    }

    pub fn main_line(&self) -> u32 {
        if self.has_helper() {
            self.helper_line() + self.helper.len() as u32 + 2
        } else {
            3
        }
    }

    fn cell_text(c: &Cell) -> String {
        match c {
            Cell::Global(g) => g.to_string(),
            Cell::Element(i) => format!("{ARRAY}[{i}]"),
            Cell::Local(l) => l.to_string(),
            Cell::Param => "p".into(),
        }
    }

    fn term_text(t: &Term) -> String {
        match t {
            Term::Const(v) if *v < 0 => format!("(0 - {})", -v),
            Term::Const(v) => v.to_string(),
            Term::Read(c) => Self::cell_text(c),
        }
    }

    fn line_text(l: &Line) -> String {
        match l {
            Line::Assign { dst, a, b } => match b {
                Some(b) => format!(
                    "  {} = {} + {};",
                    Self::cell_text(dst),
                    Self::term_text(a),
                    Self::term_text(b)
                ),
                None => format!("  {} = {};", Self::cell_text(dst), Self::term_text(a)),
            },
            Line::Symbolic(c) => format!("  make_symbolic({});", Self::cell_text(c)),
            Line::CallHelper(t) => format!("  helper({});", Self::term_text(t)),
        }
    }

    pub fn to_flc(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "int {}; int {}; int {};", GLOBALS[0], GLOBALS[1], GLOBALS[2]);
        let _ = writeln!(s, "int {ARRAY}[{ARRAY_LEN}];");
        if self.has_helper() {
            let _ = writeln!(s, "void helper(int p) {{");
            for l in &self.helper {
                let _ = writeln!(s, "{}", Self::line_text(l));
            }
            let _ = writeln!(s, "}}");
        }
        let _ = writeln!(s, "void main() {{ int {}; int {};", LOCALS[0], LOCALS[1]);
        for l in &self.main {
            let _ = writeln!(s, "{}", Self::line_text(l));
        }
        let _ = writeln!(s, "}}");
        s
    }

    /// Store-load and store-store pairs of the single execution. With
    /// `per_element` every array element is its own cell; otherwise the
    /// whole array is one.
    pub fn dependencies(&self, per_element: bool) -> BTreeSet<Dep> {
        let mut w = Walker {
            per_element,
            last: HashMap::new(),
            deps: BTreeSet::new(),
            activation: 0,
        };
        let main_start = self.main_line() + 1;
        for (k, l) in self.main.iter().enumerate() {
            let here = ("main", main_start + k as u32);
            match l {
                Line::CallHelper(arg) => {
                    w.read(arg, here, 0);
                    w.activation += 1;
                    let act = w.activation;
                    // The parameter store sits on the definition line.
                    w.write(&Cell::Param, ("helper", self.helper_line()), act);
                    for (j, hl) in self.helper.iter().enumerate() {
                        w.line(hl, ("helper", self.helper_line() + 1 + j as u32), act);
                    }
                }
                _ => w.line(l, here, 0),
            }
        }
        w.deps
    }
}

/// The engine's SL and SS pairs in the same shape as [`StraightLine::dependencies`].
pub fn engine_dependencies(result: &ExtractResult) -> BTreeSet<Dep> {
    result
        .sl
        .iter()
        .chain(&result.ss)
        .map(|d| {
            let kind = match d.kind {
                DepKind::SL => Kind::StoreLoad,
                DepKind::SS => Kind::StoreStore,
            };
            let (src, dst) = (&d.src, &d.dst);
            (
                kind,
                src.function.clone(),
                src.loc.line,
                dst.function.clone(),
                dst.loc.line,
                d.object.clone(),
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Key {
    object: String,
    activation: u32,
    offset: Option<i64>,
}

struct Walker {
    per_element: bool,
    /// Key -> (function, line) of the last store.
    last: HashMap<Key, (&'static str, u32)>,
    deps: BTreeSet<Dep>,
    activation: u32,
}

impl Walker {
    fn object(c: &Cell) -> String {
        match c {
            Cell::Global(g) => g.to_string(),
            Cell::Element(_) => ARRAY.into(),
            Cell::Local(l) => format!("main::{l}"),
            Cell::Param => "helper::p".into(),
        }
    }

    fn key(&self, c: &Cell, activation: u32) -> Key {
        let local = matches!(c, Cell::Local(_) | Cell::Param);
        Key {
            object: Self::object(c),
            activation: if local { activation } else { 0 },
            offset: match c {
                Cell::Element(i) if self.per_element => Some(*i),
                _ if self.per_element => Some(0),
                _ => None,
            },
        }
    }

    fn read(&mut self, t: &Term, here: (&'static str, u32), act: u32) {
        if let Term::Read(c) = t {
            let key = self.key(c, act);
            if let Some(&(f, l)) = self.last.get(&key) {
                self.deps
                    .insert((Kind::StoreLoad, f.into(), l, here.0.into(), here.1, Self::object(c)));
            }
        }
    }

    fn write(&mut self, c: &Cell, here: (&'static str, u32), act: u32) {
        let key = self.key(c, act);
        if let Some(&prev) = self.last.get(&key) {
            if prev != here {
                self.deps.insert((
                    Kind::StoreStore,
                    prev.0.into(),
                    prev.1,
                    here.0.into(),
                    here.1,
                    Self::object(c),
                ));
            }
        }
        self.last.insert(key, here);
    }

    fn line(&mut self, l: &Line, here: (&'static str, u32), act: u32) {
        match l {
            Line::Assign { dst, a, b } => {
                self.read(a, here, act);
                if let Some(b) = b {
                    self.read(b, here, act);
                }
                self.write(dst, here, act);
            }
            Line::Symbolic(c) => {
                let key = self.key(c, act);
                self.last.remove(&key);
            }
            Line::CallHelper(_) => unreachable!("helper does not call itself"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_checked_program() {
        let p = StraightLine {
            helper: vec![],
            main: vec![
                Line::Assign {
                    dst: Cell::Global("g0"),
                    a: Term::Const(1),
                    b: None,
                },
                Line::Assign {
                    dst: Cell::Element(1),
                    a: Term::Read(Cell::Global("g0")),
                    b: None,
                },
                Line::Assign {
                    dst: Cell::Element(2),
                    a: Term::Read(Cell::Element(1)),
                    b: None,
                },
            ],
        };
        // main opens on line 3; statements on 4, 5, 6.
        let whole = p.dependencies(false);
        assert!(whole.contains(&(Kind::StoreLoad, "main".into(), 4, "main".into(), 5, "g0".into())));
        assert!(whole.contains(&(Kind::StoreLoad, "main".into(), 5, "main".into(), 6, "arr".into())));
        assert!(whole.contains(&(Kind::StoreStore, "main".into(), 5, "main".into(), 6, "arr".into())));
        let split = p.dependencies(true);
        assert!(!split.iter().any(|d| d.0 == Kind::StoreStore));
        assert_eq!(split.len(), 2);
    }
}
