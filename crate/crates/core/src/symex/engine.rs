use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::flc::ast::Width;
use crate::flc::{InstKind, IrFunction, IrProgram, ObjRef, ObjectScope, Operand};

use super::atom::{atoms_of, AtomicConstraint, Relation};
use super::feasible::{check_extension, Feasibility};
use super::value::{SymOp, SymValue, SymVar};
use super::*;

/// Identifies one IR instruction of a program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InstRef {
    pub func: u32,
    pub index: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Base {
    Global(u32),
    /// Local `index` of the frame activation `activation`.
    Local {
        activation: u32,
        index: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct StoreKey {
    base: Base,
    offset: Option<u32>,
}

/// Object identity independent of activation, for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct ObjId {
    func: u32,
    obj: ObjRef,
}

#[derive(Debug, Clone)]
struct PairHit {
    kind: DepKind,
    src: InstRef,
    dst: InstRef,
    obj: ObjId,
}

/// Immutable cons list shared between forked paths.
struct Node<T> {
    head: T,
    tail: Option<Arc<Node<T>>>,
}

struct List<T>(Option<Arc<Node<T>>>);

impl<T> Clone for List<T> {
    fn clone(&self) -> Self {
        List(self.0.clone())
    }
}

impl<T> List<T> {
    fn new() -> Self {
        List(None)
    }

    fn push(&mut self, head: T) {
        let tail = self.0.take();
        self.0 = Some(Arc::new(Node { head, tail }));
    }

    fn iter(&self) -> impl Iterator<Item = &T> {
        let mut cur = self.0.as_deref();
        std::iter::from_fn(move || {
            let n = cur?;
            cur = n.tail.as_deref();
            Some(&n.head)
        })
    }
}

impl<T> Drop for List<T> {
    // Iterative, so long lists do not overflow the stack.
    fn drop(&mut self) {
        let mut cur = self.0.take();
        while let Some(node) = cur {
            match Arc::try_unwrap(node) {
                Ok(mut n) => cur = n.tail.take(),
                Err(_) => break,
            }
        }
    }
}

#[derive(Clone)]
struct Frame {
    func: u32,
    ip: usize,
    locals: Vec<Arc<Vec<SymValue>>>,
    temps: Vec<SymValue>,
    ret_dst: Option<u32>,
    entry: CallEntry,
    activation: u32,
}

/// One symbolic execution state.
#[derive(Clone)]
pub struct PathState {
    pub id: u64,
    pub status: PathStatus,
    pub pc: Vec<AtomicConstraint>,
    pub over_approx: bool,
    pub spec_id: Option<String>,
    pub diagnostic: Option<String>,
    next_var: u32,
    instances: BTreeMap<String, u32>,
    globals: Vec<Arc<Vec<SymValue>>>,
    frames: Vec<Frame>,
    next_activation: u32,
    sm: HashMap<StoreKey, InstRef>,
    pairs: List<PairHit>,
    seqs: List<CallSequence>,
    failure_sequence: Option<CallSequence>,
}

impl PathState {
    /// Current call stack as a call sequence.
    pub fn call_sequence(&self) -> CallSequence {
        CallSequence {
            entries: self.frames.iter().map(|f| f.entry.clone()).collect(),
        }
    }

    pub fn depth(&self) -> usize {
        self.frames.len()
    }

    fn frame(&mut self) -> &mut Frame {
        self.frames.last_mut().expect("active state has a frame")
    }

    fn fail(&mut self, diagnostic: impl Into<String>) {
        self.failure_sequence = Some(self.call_sequence());
        self.status = PathStatus::Failure;
        self.diagnostic = Some(diagnostic.into());
    }
}

enum Effect {
    Enter(CallSequence),
    Load {
        key: StoreKey,
        obj: ObjId,
    },
    Store {
        key: StoreKey,
        obj: ObjId,
    },
    /// Fresh symbolic contents: no store instruction wrote them.
    Forget(StoreKey),
}

/// Successors of one step, split by whether they are still running.
#[derive(Default)]
pub struct StepOutput {
    pub active: Vec<PathState>,
    pub terminated: Vec<PathState>,
}

pub struct Engine<'p> {
    program: &'p IrProgram,
    config: EngineConfig,
    funcs: Vec<&'p IrFunction>,
    func_ix: HashMap<&'p str, u32>,
    stats: std::cell::Cell<(u64, u64)>,
}

impl<'p> Engine<'p> {
    pub fn new(program: &'p IrProgram, config: EngineConfig) -> Engine<'p> {
        let funcs: Vec<&IrFunction> = program.functions.values().collect();
        let func_ix = funcs
            .iter()
            .enumerate()
            .map(|(i, f)| (f.name.as_str(), i as u32))
            .collect();
        Engine {
            program,
            config,
            funcs,
            func_ix,
            stats: Default::default(),
        }
    }

    pub fn initial_state(&self) -> PathState {
        let entry_ix = self.func_ix[self.program.entry.as_str()];
        let entry_fn = self.funcs[entry_ix as usize];
        let entry = CallEntry {
            function: entry_fn.name.clone(),
            loc: entry_fn.loc.clone(),
        };
        let mut seqs = List::new();
        seqs.push(CallSequence {
            entries: vec![entry.clone()],
        });
        PathState {
            id: 0,
            status: PathStatus::Active,
            pc: Vec::new(),
            over_approx: false,
            spec_id: None,
            diagnostic: None,
            next_var: 0,
            instances: BTreeMap::new(),
            globals: self
                .program
                .globals
                .iter()
                .map(|g| Arc::new(vec![SymValue::concrete(g.init); g.count as usize]))
                .collect(),
            frames: vec![self.new_frame(entry_ix, entry, None, Vec::new(), 0)],
            next_activation: 1,
            sm: HashMap::new(),
            pairs: List::new(),
            seqs,
            failure_sequence: None,
        }
    }

    fn new_frame(
        &self,
        func: u32,
        entry: CallEntry,
        ret_dst: Option<u32>,
        args: Vec<SymValue>,
        activation: u32,
    ) -> Frame {
        let f = self.funcs[func as usize];
        let mut temps = vec![SymValue::Concrete(0); f.temps as usize];
        for (i, a) in args.into_iter().enumerate() {
            temps[i] = a;
        }
        Frame {
            func,
            ip: 0,
            locals: f
                .locals
                .iter()
                .map(|d| Arc::new(vec![SymValue::Concrete(0); d.count as usize]))
                .collect(),
            temps,
            ret_dst,
            entry,
            activation,
        }
    }

    fn operand(st: &PathState, op: &Operand) -> SymValue {
        match op {
            Operand::Const(c) => SymValue::concrete(*c),
            Operand::Temp(t) => st.frames.last().unwrap().temps[*t as usize].clone(),
        }
    }

    /// Adds `atoms` to the path condition. Returns false if that makes it
    /// unsatisfiable.
    fn constrain(&self, st: &mut PathState, atoms: Vec<AtomicConstraint>) -> bool {
        let mut fresh: Vec<AtomicConstraint> = Vec::new();
        for a in atoms {
            match a.constant() {
                Some(true) => continue,
                Some(false) => return false,
                None => {}
            }
            if !st.pc.iter().chain(&fresh).any(|p| p.text() == a.text()) {
                fresh.push(a);
            }
        }
        if fresh.is_empty() {
            return true;
        }
        match check_extension(&st.pc, &fresh, self.config.feasibility_budget) {
            Feasibility::Unsat => {
                let (i, f) = self.stats.get();
                self.stats.set((i + 1, f));
                return false;
            }
            Feasibility::Unknown => {
                let (i, f) = self.stats.get();
                self.stats.set((i, f + 1));
                st.over_approx = true;
            }
            Feasibility::Sat => {}
        }
        st.pc.extend(fresh);
        true
    }

    /// Successors of `st` with `cond` assumed true and false; either may be
    /// `None` when infeasible.
    fn fork(&self, st: PathState, cond: &SymValue) -> (Option<PathState>, Option<PathState>) {
        let mut yes = st.clone();
        let mut no = st;
        let y = self.constrain(&mut yes, atoms_of(cond, true));
        let n = self.constrain(&mut no, atoms_of(cond, false));
        (y.then_some(yes), n.then_some(no))
    }

    fn key(&self, st: &PathState, obj: ObjRef, offset: u32) -> StoreKey {
        let base = match obj.scope {
            ObjectScope::Global => Base::Global(obj.index),
            ObjectScope::Local => Base::Local {
                activation: st.frames.last().unwrap().activation,
                index: obj.index,
            },
        };
        let offset = match self.config.store_key_mode {
            StoreKeyMode::BaseAddress => None,
            StoreKeyMode::ObjectOffset => Some(offset),
        };
        StoreKey { base, offset }
    }

    fn obj_id(st: &PathState, obj: ObjRef) -> ObjId {
        ObjId {
            func: match obj.scope {
                ObjectScope::Global => u32::MAX,
                ObjectScope::Local => st.frames.last().unwrap().func,
            },
            obj,
        }
    }

    fn cell(st: &mut PathState, obj: ObjRef) -> &mut Arc<Vec<SymValue>> {
        match obj.scope {
            ObjectScope::Global => &mut st.globals[obj.index as usize],
            ObjectScope::Local => &mut st.frame().locals[obj.index as usize],
        }
    }

    fn object_decl(&self, st: &PathState, obj: ObjRef) -> &crate::flc::MemoryObjectDecl {
        let f = self.funcs[st.frames.last().unwrap().func as usize];
        self.program.object(f, obj)
    }

    /// Resolves an address to concrete offsets: one successor per feasible
    /// in-bounds offset, plus failing successors for feasible out-of-bounds
    /// values.
    fn resolve(&self, st: PathState, obj: ObjRef, index: &SymValue) -> Vec<(PathState, Option<u32>)> {
        let count = self.object_decl(&st, obj).count as i64;
        let name = self.object_decl(&st, obj).name.clone();
        if let Some(i) = index.as_concrete() {
            if (0..count).contains(&i) {
                return vec![(st, Some(i as u32))];
            }
            let mut st = st;
            st.fail(format!("index {i} out of bounds for `{name}`[{count}]"));
            return vec![(st, None)];
        }
        let mut out = Vec::new();
        for k in 0..count {
            let mut s = st.clone();
            let eq = AtomicConstraint::new(Relation::Eq, index.clone(), SymValue::concrete(k));
            if self.constrain(&mut s, vec![eq]) {
                out.push((s, Some(k as u32)));
            }
        }
        let below = AtomicConstraint::new(Relation::Lt, index.clone(), SymValue::Concrete(0));
        let above = AtomicConstraint::new(Relation::Le, SymValue::concrete(count), index.clone());
        for a in [below, above] {
            let mut s = st.clone();
            if self.constrain(&mut s, vec![a]) {
                s.fail(format!("symbolic index out of bounds for `{name}`[{count}]"));
                out.push((s, None));
            }
        }
        out
    }

    /// Executes the next instruction of `st`.
    fn step(&self, mut st: PathState) -> Vec<(PathState, Option<Effect>)> {
        let frame = st.frames.last().unwrap();
        let func_ix = frame.func;
        let func = self.funcs[func_ix as usize];
        let ip = frame.ip;
        let inst = &func.body[ip];
        st.frame().ip += 1;
        match &inst.kind {
            InstKind::Assign { dst, op, args } => {
                let vals: Vec<SymValue> = args.iter().map(|a| Self::operand(&st, a)).collect();
                if matches!(op, crate::flc::Op::Div | crate::flc::Op::Rem) {
                    let divisor = &vals[1];
                    match divisor.as_concrete() {
                        Some(0) => {
                            st.fail("division by zero");
                            return vec![(st, None)];
                        }
                        Some(_) => {}
                        None => {
                            let is_zero = SymValue::app(SymOp::Eq, vec![SymValue::Concrete(0), divisor.clone()]);
                            let (zero, nonzero) = self.fork(st, &is_zero);
                            let mut out = Vec::new();
                            if let Some(mut s) = nonzero {
                                s.frame().temps[*dst as usize] = SymValue::from_ir(*op, vals.clone());
                                out.push((s, None));
                            }
                            if let Some(mut s) = zero {
                                s.fail("division by zero");
                                out.push((s, None));
                            }
                            return out;
                        }
                    }
                }
                st.frame().temps[*dst as usize] = SymValue::from_ir(*op, vals);
                vec![(st, None)]
            }
            InstKind::Load {
                dst,
                obj,
                index,
                tracked,
            } => {
                let index = Self::operand(&st, index);
                self.resolve(st, *obj, &index)
                    .into_iter()
                    .map(|(mut s, off)| {
                        let Some(off) = off else { return (s, None) };
                        let v = Self::cell(&mut s, *obj)[off as usize].clone();
                        s.frame().temps[*dst as usize] = v;
                        let eff = tracked.then(|| Effect::Load {
                            key: self.key(&s, *obj, off),
                            obj: Self::obj_id(&s, *obj),
                        });
                        (s, eff)
                    })
                    .collect()
            }
            InstKind::Store {
                obj,
                index,
                value,
                tracked,
            } => {
                let index = Self::operand(&st, index);
                let width = self.object_decl(&st, *obj).width;
                let value = truncate(Self::operand(&st, value), width);
                self.resolve(st, *obj, &index)
                    .into_iter()
                    .map(|(mut s, off)| {
                        let Some(off) = off else { return (s, None) };
                        Arc::make_mut(Self::cell(&mut s, *obj))[off as usize] = value.clone();
                        let key = self.key(&s, *obj, off);
                        let eff = if *tracked {
                            Effect::Store {
                                key,
                                obj: Self::obj_id(&s, *obj),
                            }
                        } else {
                            Effect::Forget(key)
                        };
                        (s, Some(eff))
                    })
                    .collect()
            }
            InstKind::Branch {
                cond,
                then_target,
                else_target,
            } => {
                let Some(cond) = cond else {
                    st.frame().ip = *then_target;
                    return vec![(st, None)];
                };
                let c = Self::operand(&st, cond);
                if let Some(v) = c.as_concrete() {
                    st.frame().ip = if v != 0 { *then_target } else { *else_target };
                    return vec![(st, None)];
                }
                let (yes, no) = self.fork(st, &c);
                let mut out = Vec::new();
                if let Some(mut s) = yes {
                    s.frame().ip = *then_target;
                    out.push((s, None));
                }
                if let Some(mut s) = no {
                    s.frame().ip = *else_target;
                    out.push((s, None));
                }
                out
            }
            InstKind::Call { dst, callee, args } => {
                let args: Vec<SymValue> = args.iter().map(|a| Self::operand(&st, a)).collect();
                let callee_ix = self.func_ix[callee.as_str()];
                let entry = CallEntry {
                    function: callee.clone(),
                    loc: inst.loc.clone(),
                };
                let activation = st.next_activation;
                st.next_activation += 1;
                let frame = self.new_frame(callee_ix, entry, *dst, args, activation);
                st.frames.push(frame);
                let seq = st.call_sequence();
                vec![(st, Some(Effect::Enter(seq)))]
            }
            InstKind::Return { value } => {
                let v = value.as_ref().map(|v| Self::operand(&st, v));
                let done = st.frames.pop().unwrap();
                match st.frames.last_mut() {
                    None => st.status = PathStatus::Normal,
                    Some(caller) => {
                        if let (Some(d), Some(v)) = (done.ret_dst, v) {
                            caller.temps[d as usize] = v;
                        }
                    }
                }
                vec![(st, None)]
            }
            InstKind::MakeSymbolic {
                obj,
                index,
                name,
                lo,
                hi,
                metadata,
            } => {
                let index = Self::operand(&st, index);
                let width = self.object_decl(&st, *obj).width;
                self.resolve(st, *obj, &index)
                    .into_iter()
                    .map(|(mut s, off)| {
                        let Some(off) = off else { return (s, None) };
                        let instance = {
                            let n = s.instances.entry(name.clone()).or_insert(0);
                            *n += 1;
                            *n
                        };
                        let var = SymVar {
                            id: s.next_var,
                            base: name.clone(),
                            instance,
                            width,
                            lo: *lo,
                            hi: *hi,
                            metadata: *metadata,
                        };
                        s.next_var += 1;
                        let v = if lo == hi {
                            SymValue::concrete(*lo)
                        } else {
                            SymValue::Var(Arc::new(var))
                        };
                        Arc::make_mut(Self::cell(&mut s, *obj))[off as usize] = v;
                        let key = self.key(&s, *obj, off);
                        (s, Some(Effect::Forget(key)))
                    })
                    .collect()
            }
            InstKind::Assume { cond } => {
                let c = Self::operand(&st, cond);
                if self.constrain(&mut st, atoms_of(&c, true)) {
                    vec![(st, None)]
                } else {
                    Vec::new()
                }
            }
            InstKind::Assert { cond } => {
                let c = Self::operand(&st, cond);
                if let Some(v) = c.as_concrete() {
                    if v == 0 {
                        st.fail(format!("assertion failed at line {}", inst.loc.line));
                    }
                    return vec![(st, None)];
                }
                let (yes, no) = self.fork(st, &c);
                let mut out: Vec<(PathState, Option<Effect>)> = yes.into_iter().map(|s| (s, None)).collect();
                if let Some(mut s) = no {
                    s.fail(format!("assertion failed at line {}", inst.loc.line));
                    out.push((s, None));
                }
                out
            }
            InstKind::Fail { spec } => {
                st.fail(format!("fail() at line {}", inst.loc.line));
                st.spec_id = spec.clone();
                vec![(st, None)]
            }
            InstKind::Halt => {
                st.status = PathStatus::BoundExhausted;
                st.diagnostic = Some(format!("loop bound exhausted at line {}", inst.loc.line));
                vec![(st, None)]
            }
        }
    }

    /// Executes one instruction of `st` and applies the call-sequence and
    /// store-map bookkeeping to every successor.
    pub fn execute_track_and_update(&self, st: PathState, out: &mut StepOutput) {
        let frame = st.frames.last().unwrap();
        let here = InstRef {
            func: frame.func,
            index: frame.ip as u32,
        };
        for (mut s, eff) in self.step(st) {
            match eff {
                Some(Effect::Enter(seq)) => s.seqs.push(seq),
                Some(Effect::Store { key, obj }) => {
                    if let Some(&prev) = s.sm.get(&key) {
                        if prev != here {
                            s.pairs.push(PairHit {
                                kind: DepKind::SS,
                                src: prev,
                                dst: here,
                                obj,
                            });
                        }
                    }
                    s.sm.insert(key, here);
                }
                Some(Effect::Load { key, obj }) => {
                    if let Some(&prev) = s.sm.get(&key) {
                        s.pairs.push(PairHit {
                            kind: DepKind::SL,
                            src: prev,
                            dst: here,
                            obj,
                        });
                    }
                }
                Some(Effect::Forget(key)) => {
                    s.sm.remove(&key);
                }
                None => {}
            }
            if s.status == PathStatus::Active {
                out.active.push(s);
            } else {
                out.terminated.push(s);
            }
        }
    }

    fn endpoint(&self, r: InstRef) -> DepEndpoint {
        let f = self.funcs[r.func as usize];
        let inst = &f.body[r.index as usize];
        DepEndpoint {
            loc: inst.loc.clone(),
            presence: inst.presence.clone(),
            function: f.name.clone(),
            inst: r,
        }
    }

    fn object_name(&self, id: ObjId) -> String {
        match id.obj.scope {
            ObjectScope::Global => self.program.globals[id.obj.index as usize].id.clone(),
            ObjectScope::Local => self.funcs[id.func as usize].locals[id.obj.index as usize].id.clone(),
        }
    }

    fn finish(
        &self,
        st: PathState,
        id: usize,
        pairs: &mut BTreeMap<(DepKind, SrcLoc, SrcLoc, String), DepPair>,
    ) -> PathOutcome {
        let mut hits: Vec<&PairHit> = st.pairs.iter().collect();
        // The list is newest-first; merge oldest-first for stable endpoints.
        hits.reverse();
        for h in hits {
            let pair = DepPair {
                kind: h.kind,
                object: self.object_name(h.obj),
                src: self.endpoint(h.src),
                dst: self.endpoint(h.dst),
            };
            pairs.entry(pair.key()).or_insert(pair);
        }
        let call_sequences = match st.status {
            PathStatus::Failure => vec![st.failure_sequence.clone().expect("failure snapshot")],
            _ => {
                let seqs: Vec<CallSequence> = st.seqs.iter().cloned().collect();
                choose_longest(&seqs, self.config.longest)
            }
        };
        let mut atoms = st.pc.clone();
        atoms.sort_by(|a, b| a.text().cmp(b.text()));
        atoms.dedup_by(|a, b| a.text() == b.text());
        PathOutcome {
            id,
            status: st.status,
            spec_id: st.spec_id.clone(),
            diagnostic: st.diagnostic.clone(),
            call_sequences,
            atoms,
            over_approx: st.over_approx,
        }
    }

    /// Worklist loop: explores until no state is active, the timeout
    /// expires, or `max_paths` paths have terminated.
    pub fn run(&self) -> Result<ExtractResult, SymexError> {
        let start = Instant::now();
        let timeout = Duration::from_secs_f64(self.config.timeout_secs);
        let mut work: VecDeque<PathState> = VecDeque::new();
        work.push_back(self.initial_state());
        let mut next_id = 1u64;
        let mut paths = Vec::new();
        let mut pairs = BTreeMap::new();
        let mut truncated = false;
        let mut stats = EngineStats::default();

        'outer: while let Some(mut cur) = match self.config.search {
            SearchOrder::Dfs => work.pop_back(),
            SearchOrder::Bfs => work.pop_front(),
        } {
            loop {
                if stats.instructions % 16 == 0 && start.elapsed() >= timeout {
                    work.push_back(cur);
                    truncated = true;
                    break 'outer;
                }
                stats.instructions += 1;
                let mut out = StepOutput::default();
                self.execute_track_and_update(cur, &mut out);
                for t in out.terminated {
                    let id = paths.len();
                    paths.push(self.finish(t, id, &mut pairs));
                }
                if paths.len() >= self.config.max_paths {
                    if !out.active.is_empty() || !work.is_empty() {
                        truncated = true;
                    }
                    break 'outer;
                }
                if out.active.len() == 1 {
                    cur = out.active.pop().unwrap();
                    continue;
                }
                if out.active.len() > 1 {
                    stats.forks += 1;
                }
                let mut children = out.active;
                for c in children.iter_mut().skip(1) {
                    c.id = next_id;
                    next_id += 1;
                }
                match self.config.search {
                    // Reverse so the first (source-order) child runs next.
                    SearchOrder::Dfs => work.extend(children.into_iter().rev()),
                    SearchOrder::Bfs => work.extend(children),
                }
                break;
            }
        }
        let (infeasible, unknown) = self.stats.get();
        stats.infeasible = infeasible;
        stats.unknown_checks = unknown;
        if paths.is_empty() && !truncated {
            return Err(SymexError::NoPaths(self.program.product.name.clone()));
        }
        let (mut ss, mut sl) = (Vec::new(), Vec::new());
        for (k, p) in pairs {
            match k.0 {
                DepKind::SS => ss.push(p),
                DepKind::SL => sl.push(p),
            }
        }
        Ok(ExtractResult {
            product: self.program.product.name.clone(),
            paths,
            ss,
            sl,
            truncated,
            stats,
        })
    }
}

fn truncate(v: SymValue, width: Width) -> SymValue {
    SymValue::app(SymOp::Trunc(width), vec![v])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flc::{parse_unit, resolve_product, LowerOptions, ProductDef};

    fn run_with(src: &str, mode: StoreKeyMode) -> ExtractResult {
        let unit = parse_unit(src, "t.flc").unwrap();
        let prog = resolve_product(
            &unit,
            &ProductDef::new("p", Vec::<String>::new()),
            &LowerOptions::default(),
        )
        .unwrap();
        let config = EngineConfig {
            store_key_mode: mode,
            ..EngineConfig::default()
        };
        extract_feature_models(&prog, &config).unwrap()
    }

    fn run(src: &str) -> ExtractResult {
        run_with(src, StoreKeyMode::BaseAddress)
    }

    fn pair_lines(pairs: &[DepPair]) -> Vec<(u32, u32)> {
        pairs.iter().map(|p| (p.src.loc.line, p.dst.loc.line)).collect()
    }

    #[test]
    fn symbolic_branch_forks_in_source_order() {
        let r = run("void main() {\nint x;\nmake_symbolic(x, 0, 7);\nif (x < 3) {\nx = 1;\n}\n}\n");
        assert_eq!(r.paths.len(), 2);
        assert_eq!(r.paths[0].atom_texts(), ["(Lt x 3)"]);
        assert_eq!(r.paths[1].atom_texts(), ["(Le 3 x)"]);
        assert!(r.fail_paths().next().is_none());
    }

    #[test]
    fn concrete_branch_does_not_fork() {
        let r = run("void main() {\nint x;\nif (2 < 3) {\nx = 1;\n}\n}\n");
        assert_eq!(r.paths.len(), 1);
        assert!(r.paths[0].atoms.is_empty());
    }

    #[test]
    fn symbolic_index_forks_per_offset() {
        let r = run("int a[2];\nvoid main() {\nint i;\nmake_symbolic(i, 0, 1);\na[i] = 5;\n}\n");
        let atoms: Vec<Vec<String>> = r.paths.iter().map(|p| p.atom_texts()).collect();
        assert_eq!(atoms, [vec!["(Eq 0 i)".to_string()], vec!["(Eq 1 i)".to_string()]]);
    }

    #[test]
    fn symbolic_index_out_of_bounds_fails() {
        let r = run("int a[2];\nvoid main() {\nint i;\nmake_symbolic(i, 0, 2);\na[i] = 5;\n}\n");
        assert_eq!(r.normal_paths().count(), 2);
        let fails: Vec<&PathOutcome> = r.fail_paths().collect();
        assert_eq!(fails.len(), 1);
        assert_eq!(fails[0].atom_texts(), ["(Le 2 i)"]);
    }

    #[test]
    fn store_load_and_store_store_pairs() {
        let r = run("int x;\nint y;\nvoid main() {\nx = 1;\ny = x;\n}\n");
        assert_eq!(pair_lines(&r.sl), [(4, 5)]);
        assert!(r.ss.is_empty());
        let r = run("int x;\nvoid main() {\nx = 1;\nx = 2;\n}\n");
        assert_eq!(pair_lines(&r.ss), [(3, 4)]);
        let r = run("int x;\nint y;\nvoid main() {\nx = 1;\nx = 2;\ny = x;\n}\n");
        assert_eq!(pair_lines(&r.ss), [(4, 5)]);
        assert_eq!(pair_lines(&r.sl), [(5, 6)]);
    }

    #[test]
    fn key_mode_controls_array_aliasing() {
        let src = "int a[2];\nint y;\nvoid main() {\na[0] = 1;\na[1] = 2;\ny = a[0];\n}\n";
        let base = run_with(src, StoreKeyMode::BaseAddress);
        assert_eq!(pair_lines(&base.ss), [(4, 5)]);
        assert_eq!(pair_lines(&base.sl), [(5, 6)]);
        let exact = run_with(src, StoreKeyMode::ObjectOffset);
        assert!(exact.ss.is_empty());
        assert_eq!(pair_lines(&exact.sl), [(4, 6)]);
    }

    #[test]
    fn failure_records_stack_snapshot() {
        let src = "\
void check() {
  @spec(7) fail();
}
void deliver() {
  check();
}
void main() {
  deliver();
}
";
        let r = run(src);
        let f: Vec<&PathOutcome> = r.fail_paths().collect();
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].spec_id.as_deref(), Some("7"));
        assert_eq!(f[0].call_sequences.len(), 1);
        let names: Vec<&str> = f[0].call_sequences[0].names().collect();
        assert_eq!(names, ["main", "deliver", "check"]);
    }

    #[test]
    fn normal_paths_keep_longest_sequences() {
        let src = "void c() {\n}\nvoid b() {\nc();\n}\nvoid main() {\nb();\nc();\n}\n";
        let r = run(src);
        let seqs: Vec<String> = r.paths[0].call_sequences.iter().map(|s| s.to_string()).collect();
        assert_eq!(
            seqs,
            [
                "main@t.flc:6 > b@t.flc:7 > c@t.flc:4",
                "main@t.flc:6 > b@t.flc:7",
                "main@t.flc:6 > c@t.flc:8",
                "main@t.flc:6"
            ]
        );
    }

    #[test]
    fn division_by_symbolic_zero_forks() {
        let r = run("void main() {\nint x;\nint y;\nmake_symbolic(x, 0, 3);\ny = 6 / x;\n}\n");
        assert_eq!(r.normal_paths().count(), 1);
        assert_eq!(r.fail_paths().count(), 1);
    }

    #[test]
    fn loop_bound_exhaustion_is_its_own_status() {
        let r = run("void main() {\nint i;\nwhile (1) {\ni = i + 1;\n}\n}\n");
        assert_eq!(r.paths.len(), 1);
        assert_eq!(r.paths[0].status, PathStatus::BoundExhausted);
    }

    #[test]
    fn infeasible_assume_drops_path() {
        let unit = parse_unit("void main() {\nassume(0);\n}\n", "t.flc").unwrap();
        let prog = resolve_product(
            &unit,
            &ProductDef::new("p", Vec::<String>::new()),
            &LowerOptions::default(),
        )
        .unwrap();
        let err = extract_feature_models(&prog, &EngineConfig::default()).unwrap_err();
        assert_eq!(err, SymexError::NoPaths("p".into()));
    }

    #[test]
    fn repeated_instances_get_suffixes() {
        let src = "int g;\nint f() {\nint r;\nmake_symbolic(r, 0, 1);\nreturn r;\n}\nvoid main() {\nif (f() == f()) {\ng = 1;\n}\n}\n";
        let r = run(src);
        let texts: Vec<String> = r.paths.iter().flat_map(|p| p.atom_texts()).collect();
        assert!(texts.contains(&"(Eq r r_2)".to_string()), "{texts:?}");
    }

    #[test]
    fn timeout_truncates() {
        let src = "void main() {\nint x;\nint i;\nmake_symbolic(x, 0, 1000);\nwhile (i < x) {\ni = i + 1;\n}\n}\n";
        let unit = parse_unit(src, "t.flc").unwrap();
        let prog = resolve_product(
            &unit,
            &ProductDef::new("p", Vec::<String>::new()),
            &LowerOptions { loop_bound: 400 },
        )
        .unwrap();
        let config = EngineConfig {
            timeout_secs: 1e-6,
            ..EngineConfig::default()
        };
        let r = extract_feature_models(&prog, &config).unwrap();
        assert!(r.truncated);
        let config = EngineConfig {
            max_paths: 3,
            ..EngineConfig::default()
        };
        let r = extract_feature_models(&prog, &config).unwrap();
        assert!(r.truncated);
        assert_eq!(r.paths.len(), 3);
    }
}
