//! Bounded decision procedure for path conditions.
//!
//! Variable domains are first narrowed by interval propagation over simple
//! `var ~ const` and `var ~ var` atoms. Variables pinned by an equation
//! `v == e` are computed rather than enumerated. If the product of the
//! remaining domains fits the budget, the answer comes from exhaustive
//! backtracking search; otherwise it is `Unknown`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use super::atom::{AtomicConstraint, Relation};
use super::value::{SymValue, SymVar};

pub const DEFAULT_FEASIBILITY_BUDGET: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feasibility {
    Sat,
    Unsat,
    Unknown,
}

/// Decides a whole constraint set, one independent component at a time.
pub fn check_feasibility(atoms: &[AtomicConstraint], budget: u64) -> Feasibility {
    let mut result = Feasibility::Sat;
    for comp in components(atoms) {
        match check_component(&comp, budget) {
            Feasibility::Unsat => return Feasibility::Unsat,
            Feasibility::Unknown => result = Feasibility::Unknown,
            Feasibility::Sat => {}
        }
    }
    result
}

/// Decides `pc ∧ new`, assuming `pc` alone was already checked. Only atoms
/// sharing variables (transitively) with `new` are re-examined.
pub fn check_extension(pc: &[AtomicConstraint], new: &[AtomicConstraint], budget: u64) -> Feasibility {
    let mut vars: BTreeSet<u32> = BTreeSet::new();
    for a in new {
        if a.constant() == Some(false) {
            return Feasibility::Unsat;
        }
        vars.extend(a.vars().iter().map(|v| v.id));
    }
    let pc_vars: Vec<Vec<u32>> = pc.iter().map(|a| a.vars().iter().map(|v| v.id).collect()).collect();
    let mut taken = vec![false; pc.len()];
    loop {
        let mut grew = false;
        for (i, vs) in pc_vars.iter().enumerate() {
            if !taken[i] && vs.iter().any(|v| vars.contains(v)) {
                taken[i] = true;
                vars.extend(vs.iter().copied());
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    let comp: Vec<&AtomicConstraint> = pc
        .iter()
        .zip(&taken)
        .filter(|(_, t)| **t)
        .map(|(a, _)| a)
        .chain(new.iter())
        .collect();
    check_component(&comp, budget)
}

fn components(atoms: &[AtomicConstraint]) -> Vec<Vec<&AtomicConstraint>> {
    let mut parent: HashMap<u32, u32> = HashMap::new();
    fn find(parent: &mut HashMap<u32, u32>, x: u32) -> u32 {
        let p = *parent.entry(x).or_insert(x);
        if p == x {
            return x;
        }
        let r = find(parent, p);
        parent.insert(x, r);
        r
    }
    let atom_vars: Vec<Vec<u32>> = atoms.iter().map(|a| a.vars().iter().map(|v| v.id).collect()).collect();
    for vs in &atom_vars {
        for w in vs.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            if a != b {
                parent.insert(a, b);
            }
        }
        if let Some(&v) = vs.first() {
            find(&mut parent, v);
        }
    }
    let mut groups: BTreeMap<Option<u32>, Vec<&AtomicConstraint>> = BTreeMap::new();
    for (a, vs) in atoms.iter().zip(&atom_vars) {
        let key = vs.first().map(|&v| find(&mut parent, v));
        groups.entry(key).or_default().push(a);
    }
    groups.into_values().collect()
}

#[derive(Clone, Copy)]
struct Interval {
    lo: i64,
    hi: i64,
}

fn check_component(atoms: &[&AtomicConstraint], budget: u64) -> Feasibility {
    let mut vars: BTreeMap<u32, Arc<SymVar>> = BTreeMap::new();
    for a in atoms {
        if a.constant() == Some(false) {
            return Feasibility::Unsat;
        }
        for v in a.vars() {
            vars.entry(v.id).or_insert(v);
        }
    }
    if vars.is_empty() {
        return Feasibility::Sat;
    }
    let mut dom: BTreeMap<u32, Interval> = vars
        .iter()
        .map(|(&id, v)| (id, Interval { lo: v.lo, hi: v.hi }))
        .collect();
    if !propagate(atoms, &mut dom) {
        return Feasibility::Unsat;
    }

    let plan = Plan::build(atoms, &vars, &dom);
    let mut cost: u128 = 1;
    for step in &plan.steps {
        if let Step::Free(id) = step {
            let d = dom[id];
            cost = cost.saturating_mul((d.hi - d.lo + 1) as u128);
        }
    }
    if cost > budget as u128 {
        return Feasibility::Unknown;
    }
    let mut values: HashMap<u32, i64> = HashMap::new();
    if plan.search(0, &dom, &mut values) {
        Feasibility::Sat
    } else {
        Feasibility::Unsat
    }
}

/// Narrows domains to a fixpoint. Returns false if some domain empties.
fn propagate(atoms: &[&AtomicConstraint], dom: &mut BTreeMap<u32, Interval>) -> bool {
    for _ in 0..64 {
        let mut changed = false;
        for a in atoms {
            let l = bound_of(&a.lhs, dom);
            let r = bound_of(&a.rhs, dom);
            let (Some(l), Some(r)) = (l, r) else { continue };
            let (mut nl, mut nr) = (l, r);
            match a.relation {
                Relation::Eq => {
                    let lo = l.lo.max(r.lo);
                    let hi = l.hi.min(r.hi);
                    nl = Interval { lo, hi };
                    nr = nl;
                }
                Relation::Ne => {
                    if r.lo == r.hi {
                        nl = trim_point(l, r.lo);
                    }
                    if l.lo == l.hi {
                        nr = trim_point(r, l.lo);
                    }
                }
                Relation::Lt => {
                    nl.hi = l.hi.min(r.hi - 1);
                    nr.lo = r.lo.max(l.lo + 1);
                }
                Relation::Le => {
                    nl.hi = l.hi.min(r.hi);
                    nr.lo = r.lo.max(l.lo);
                }
            }
            for (side, old, new) in [(&a.lhs, l, nl), (&a.rhs, r, nr)] {
                if new.lo > new.hi {
                    return false;
                }
                if let Some(v) = side.as_var() {
                    if new.lo != old.lo || new.hi != old.hi {
                        dom.insert(v.id, new);
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    true
}

fn trim_point(i: Interval, p: i64) -> Interval {
    if i.lo == p {
        Interval { lo: p + 1, hi: i.hi }
    } else if i.hi == p {
        Interval { lo: i.lo, hi: p - 1 }
    } else {
        i
    }
}

/// Interval of a side: exact for constants and variables, unknown otherwise.
fn bound_of(v: &SymValue, dom: &BTreeMap<u32, Interval>) -> Option<Interval> {
    match v {
        SymValue::Concrete(c) => Some(Interval { lo: *c, hi: *c }),
        SymValue::Var(x) => dom.get(&x.id).copied(),
        SymValue::App(_) => None,
    }
}

enum Step {
    Free(u32),
    /// Variable fixed by an equation with an expression of earlier ones.
    Defined(u32, SymValue),
}

struct Plan<'a> {
    steps: Vec<Step>,
    /// Atoms to test once step `i` has been assigned.
    checks: Vec<Vec<&'a AtomicConstraint>>,
}

impl<'a> Plan<'a> {
    fn build(
        atoms: &[&'a AtomicConstraint],
        vars: &BTreeMap<u32, Arc<SymVar>>,
        dom: &BTreeMap<u32, Interval>,
    ) -> Plan<'a> {
        let atom_vars: Vec<BTreeSet<u32>> = atoms.iter().map(|a| a.vars().iter().map(|v| v.id).collect()).collect();
        // Candidate definitions: `v == e` with v not occurring in e.
        let mut defs: BTreeMap<u32, (SymValue, BTreeSet<u32>)> = BTreeMap::new();
        for (a, vs) in atoms.iter().zip(&atom_vars) {
            if a.relation != Relation::Eq {
                continue;
            }
            for (side, other) in [(&a.lhs, &a.rhs), (&a.rhs, &a.lhs)] {
                if let Some(v) = side.as_var() {
                    let deps: BTreeSet<u32> = vs.iter().copied().filter(|&x| x != v.id).collect();
                    let occurs = {
                        let mut o = Vec::new();
                        other.collect_vars(&mut o);
                        o.iter().any(|x| x.id == v.id)
                    };
                    let d = dom[&v.id];
                    // Already-fixed variables are cheaper enumerated.
                    if !occurs && d.lo < d.hi && !defs.contains_key(&v.id) {
                        defs.insert(v.id, (other.clone(), deps));
                    }
                }
            }
        }

        let mut steps = Vec::new();
        let mut placed: BTreeSet<u32> = BTreeSet::new();
        let mut pending: BTreeSet<u32> = vars.keys().copied().collect();
        // Free variables in id order, each followed by every definition that
        // becomes computable. Cyclic definitions degrade to free variables.
        loop {
            let mut progress = true;
            while progress {
                progress = false;
                let ready: Vec<u32> = pending
                    .iter()
                    .copied()
                    .filter(|v| defs.get(v).is_some_and(|(_, deps)| deps.is_subset(&placed)))
                    .collect();
                for v in ready {
                    let (e, _) = defs.remove(&v).unwrap();
                    steps.push(Step::Defined(v, e));
                    placed.insert(v);
                    pending.remove(&v);
                    progress = true;
                }
            }
            let next = pending
                .iter()
                .copied()
                .find(|v| !defs.contains_key(v))
                .or_else(|| pending.iter().copied().next());
            let Some(v) = next else { break };
            defs.remove(&v);
            steps.push(Step::Free(v));
            placed.insert(v);
            pending.remove(&v);
        }

        let position: HashMap<u32, usize> = steps
            .iter()
            .enumerate()
            .map(|(i, s)| match s {
                Step::Free(v) | Step::Defined(v, _) => (*v, i),
            })
            .collect();
        let mut checks: Vec<Vec<&AtomicConstraint>> = (0..steps.len()).map(|_| Vec::new()).collect();
        for (a, vs) in atoms.iter().zip(&atom_vars) {
            if let Some(last) = vs.iter().map(|v| position[v]).max() {
                checks[last].push(a);
            }
        }
        Plan { steps, checks }
    }

    fn search(&self, i: usize, dom: &BTreeMap<u32, Interval>, values: &mut HashMap<u32, i64>) -> bool {
        if i == self.steps.len() {
            return true;
        }
        let ok = |values: &HashMap<u32, i64>| {
            self.checks[i]
                .iter()
                .all(|a| a.eval(&|v: &SymVar| values.get(&v.id).copied()) == Some(true))
        };
        match &self.steps[i] {
            Step::Free(v) => {
                let d = dom[v];
                for x in d.lo..=d.hi {
                    values.insert(*v, x);
                    if ok(values) && self.search(i + 1, dom, values) {
                        return true;
                    }
                }
                values.remove(v);
                false
            }
            Step::Defined(v, e) => {
                let Some(x) = e.eval(&|w: &SymVar| values.get(&w.id).copied()) else {
                    return false;
                };
                let d = dom[v];
                if x < d.lo || x > d.hi {
                    return false;
                }
                values.insert(*v, x);
                let found = ok(values) && self.search(i + 1, dom, values);
                values.remove(v);
                found
            }
        }
    }
}
