//! Block division, control-flow edges and the operation dictionary.
//!
//! Block ids are built from the method name and the path of constructs
//! leading to the block: `visit().if_2`, `update().for_1.for_1.bool`.
//! Constructs are numbered per kind within their enclosing region.

pub mod dictionary;
pub mod ops;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::lang::ast::*;
use crate::lang::CheckedProgram;

pub use dictionary::{build_dictionary, total_op_counts, CountError, OpCountVector, OperationDictionary};
pub use ops::{Category, Group, OpKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockKind {
    Entry,
    IfBody,
    ElseBody,
    /// Taken when an `if` has no `else`, or a `switch` no matching arm and
    /// no `default`. Holds only the construct's goto.
    Skip,
    ForInit,
    ForBoolean,
    ForUpdate,
    LoopBody,
    WhileHeader,
    SwitchArm,
    /// Statements following a construct that may return or break early.
    Continuation,
}

impl BlockKind {
    pub fn is_ablatable(self) -> bool {
        matches!(self, BlockKind::IfBody | BlockKind::ElseBody | BlockKind::LoopBody | BlockKind::SwitchArm)
    }

    pub fn is_loop_header(self) -> bool {
        matches!(self, BlockKind::ForInit | BlockKind::ForBoolean | BlockKind::ForUpdate | BlockKind::WhileHeader)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockInfo {
    pub id: String,
    pub kind: BlockKind,
    pub method: String,
    pub span: Span,
    /// For loop header blocks: the loop body they belong to.
    pub loop_body: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeKind {
    Sequence,
    Branch,
    Join,
    Back,
    Exit,
    Call,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub kind: EdgeKind,
}

/// Where a statement's own operations are counted, and which blocks its
/// nested parts open.
#[derive(Clone, Debug, PartialEq)]
pub struct Placement {
    pub block: usize,
    pub targets: Targets,
    /// Block entered after this construct when it can exit early.
    pub continuation: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Targets {
    None,
    If { then: usize, other: usize },
    For { init: usize, boolean: usize, body: usize, update: usize },
    While { header: usize, body: usize },
    Switch { arms: Vec<usize>, other: usize },
}

/// Path selectors. A statement at index `i` of a nested list is reached by
/// appending `[selector, i]` to its parent's path; for-loop headers append
/// only the selector.
pub mod path {
    pub const THEN: u32 = 0;
    pub const ELSE: u32 = 1;
    pub const BODY: u32 = 2;
    pub const INIT: u32 = 3;
    pub const UPDATE: u32 = 4;
    pub const DEFAULT: u32 = 5;
    pub const ARM: u32 = 6;

    pub fn child(parent: &[u32], selector: u32, index: usize) -> Vec<u32> {
        let mut p = parent.to_vec();
        p.push(selector);
        p.push(index as u32);
        p
    }

    pub fn header(parent: &[u32], selector: u32) -> Vec<u32> {
        let mut p = parent.to_vec();
        p.push(selector);
        p
    }
}

#[derive(Clone, Debug, Default)]
pub struct BlockMap {
    pub blocks: Vec<BlockInfo>,
    pub edges: Vec<Edge>,
    index: HashMap<String, usize>,
    placements: HashMap<String, HashMap<Vec<u32>, Placement>>,
}

impl BlockMap {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id(&self, i: usize) -> &str {
        &self.blocks[i].id
    }

    pub fn get(&self, id: &str) -> Option<&BlockInfo> {
        self.index_of(id).map(|i| &self.blocks[i])
    }

    pub fn placement(&self, method: &str, path: &[u32]) -> Option<&Placement> {
        self.placements.get(method)?.get(path)
    }

    pub fn entry_id(method: &str) -> String {
        format!("{method}()")
    }

    pub fn ablatable(&self) -> Vec<&str> {
        self.blocks.iter().filter(|b| b.kind.is_ablatable()).map(|b| b.id.as_str()).collect()
    }

    /// Index of the block that a folded (loop-level) view reports `i` under:
    /// loop header blocks fold into their loop body.
    pub fn fold_target(&self, i: usize) -> usize {
        match &self.blocks[i].loop_body {
            Some(body) => self.index[body],
            None => i,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "blocks": self.blocks, "edges": self.edges })
    }
}

impl fmt::Display for BlockMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.blocks {
            writeln!(f, "{:<40} {:?}", b.id, b.kind)?;
        }
        Ok(())
    }
}

/// Divide every method of a checked program into blocks.
pub fn divide_blocks(program: &CheckedProgram) -> BlockMap {
    let mut d = Divider { map: BlockMap::default(), calls: BTreeSet::new() };
    for m in &program.methods {
        let entry = d.add(BlockMap::entry_id(&m.name), BlockKind::Entry, &m.name, m.span, None);
        d.map.placements.insert(m.name.clone(), HashMap::new());
        d.region(&m.name, &BlockMap::entry_id(&m.name), &m.body, &[], None, entry);
    }
    let calls = std::mem::take(&mut d.calls);
    for (from, callee) in calls {
        let to = BlockMap::entry_id(&callee);
        d.map.edges.push(Edge { from, to, kind: EdgeKind::Call });
    }
    d.map
}

struct Divider {
    map: BlockMap,
    calls: BTreeSet<(String, String)>,
}

#[derive(Default)]
struct Counters {
    ifs: usize,
    fors: usize,
    whiles: usize,
    switches: usize,
    conts: usize,
}

impl Divider {
    fn add(&mut self, id: String, kind: BlockKind, method: &str, span: Span, loop_body: Option<String>) -> usize {
        let i = self.map.blocks.len();
        assert!(self.map.index.insert(id.clone(), i).is_none(), "duplicate block id {id}");
        self.map.blocks.push(BlockInfo { id, kind, method: method.to_string(), span, loop_body });
        i
    }

    fn edge(&mut self, from: usize, to: usize, kind: EdgeKind) {
        let e = Edge { from: self.map.blocks[from].id.clone(), to: self.map.blocks[to].id.clone(), kind };
        self.map.edges.push(e);
    }

    fn place(&mut self, method: &str, path: Vec<u32>, block: usize, targets: Targets) {
        self.map.placements.get_mut(method).expect("method").insert(path, Placement { block, targets, continuation: None });
    }

    fn note_calls(&mut self, block: usize, exprs: Vec<&Expr>) {
        for e in exprs {
            e.walk(&mut |x| {
                if let ExprKind::Call { callee, .. } = &x.kind {
                    self.calls.insert((self.map.blocks[block].id.clone(), callee.clone()));
                }
            });
        }
    }

    fn region(&mut self, method: &str, prefix: &str, body: &[Stmt], parent: &[u32], selector: Option<u32>, start: usize) {
        let mut cur = start;
        let mut n = Counters::default();
        for (i, s) in body.iter().enumerate() {
            let p = match selector {
                Some(sel) => path::child(parent, sel, i),
                None => vec![i as u32],
            };
            let exits: Vec<usize> = match &s.kind {
                StmtKind::If { cond, then_body, else_body } => {
                    n.ifs += 1;
                    let base = format!("{prefix}.if_{}", n.ifs);
                    self.note_calls(cur, vec![cond]);
                    let then = self.add(base.clone(), BlockKind::IfBody, method, s.span, None);
                    self.edge(cur, then, EdgeKind::Branch);
                    self.region(method, &base, then_body, &p, Some(path::THEN), then);
                    let other = match else_body {
                        Some(e) => {
                            let id = format!("{base}.else");
                            let b = self.add(id.clone(), BlockKind::ElseBody, method, s.span, None);
                            self.edge(cur, b, EdgeKind::Branch);
                            self.region(method, &id, e, &p, Some(path::ELSE), b);
                            b
                        }
                        None => {
                            let b = self.add(format!("{base}.skip"), BlockKind::Skip, method, s.span, None);
                            self.edge(cur, b, EdgeKind::Branch);
                            b
                        }
                    };
                    self.place(method, p.clone(), cur, Targets::If { then, other });
                    vec![then, other]
                }
                StmtKind::For { init, cond, update, body } => {
                    n.fors += 1;
                    let base = format!("{prefix}.for_{}", n.fors);
                    let lb = Some(base.clone());
                    let bi = self.add(format!("{base}.init"), BlockKind::ForInit, method, s.span, lb.clone());
                    let bb = self.add(format!("{base}.bool"), BlockKind::ForBoolean, method, s.span, lb.clone());
                    let body_b = self.add(base.clone(), BlockKind::LoopBody, method, s.span, None);
                    let bu = self.add(format!("{base}.update"), BlockKind::ForUpdate, method, s.span, lb);
                    if let Some(st) = init {
                        self.note_calls(bi, st.exprs());
                        self.place(method, path::header(&p, path::INIT), bi, Targets::None);
                    }
                    if let Some(st) = update {
                        self.note_calls(bu, st.exprs());
                        self.place(method, path::header(&p, path::UPDATE), bu, Targets::None);
                    }
                    self.note_calls(bb, vec![cond]);
                    self.edge(cur, bi, EdgeKind::Sequence);
                    self.edge(bi, bb, EdgeKind::Sequence);
                    self.edge(bb, body_b, EdgeKind::Branch);
                    self.region(method, &base, body, &p, Some(path::BODY), body_b);
                    self.edge(body_b, bu, EdgeKind::Sequence);
                    self.edge(bu, bb, EdgeKind::Back);
                    self.place(method, p.clone(), cur, Targets::For { init: bi, boolean: bb, body: body_b, update: bu });
                    vec![bb]
                }
                StmtKind::While { cond, body } => {
                    n.whiles += 1;
                    let base = format!("{prefix}.while_{}", n.whiles);
                    let h = self.add(format!("{base}.header"), BlockKind::WhileHeader, method, s.span, Some(base.clone()));
                    let b = self.add(base.clone(), BlockKind::LoopBody, method, s.span, None);
                    self.note_calls(h, vec![cond]);
                    self.edge(cur, h, EdgeKind::Sequence);
                    self.edge(h, b, EdgeKind::Branch);
                    self.region(method, &base, body, &p, Some(path::BODY), b);
                    self.edge(b, h, EdgeKind::Back);
                    self.place(method, p.clone(), cur, Targets::While { header: h, body: b });
                    vec![h]
                }
                StmtKind::Switch { scrutinee, arms, default } => {
                    n.switches += 1;
                    let base = format!("{prefix}.switch_{}", n.switches);
                    self.note_calls(cur, vec![scrutinee]);
                    let mut arm_blocks = Vec::new();
                    for (k, arm) in arms.iter().enumerate() {
                        let id = format!("{base}.arm_{}", k + 1);
                        let b = self.add(id.clone(), BlockKind::SwitchArm, method, s.span, None);
                        self.edge(cur, b, EdgeKind::Branch);
                        self.region(method, &id, &arm.body, &p, Some(path::ARM + k as u32), b);
                        arm_blocks.push(b);
                    }
                    let other = match default {
                        Some(d) => {
                            let id = format!("{base}.default");
                            let b = self.add(id.clone(), BlockKind::SwitchArm, method, s.span, None);
                            self.edge(cur, b, EdgeKind::Branch);
                            self.region(method, &id, d, &p, Some(path::DEFAULT), b);
                            b
                        }
                        None => {
                            let b = self.add(format!("{base}.skip"), BlockKind::Skip, method, s.span, None);
                            self.edge(cur, b, EdgeKind::Branch);
                            b
                        }
                    };
                    let mut exits = arm_blocks.clone();
                    exits.push(other);
                    self.place(method, p.clone(), cur, Targets::Switch { arms: arm_blocks, other });
                    exits
                }
                _ => {
                    self.note_calls(cur, s.exprs());
                    self.place(method, p.clone(), cur, Targets::None);
                    vec![]
                }
            };
            if s.is_compound() {
                let after = if can_escape(s) {
                    n.conts += 1;
                    let c = self.add(format!("{prefix}.cont_{}", n.conts), BlockKind::Continuation, method, s.span, None);
                    let pl = self.map.placements.get_mut(method).and_then(|m| m.get_mut(&p)).expect("placed");
                    pl.continuation = Some(c);
                    c
                } else {
                    cur
                };
                let kind = if matches!(s.kind, StmtKind::For { .. } | StmtKind::While { .. }) {
                    EdgeKind::Exit
                } else {
                    EdgeKind::Join
                };
                for x in exits {
                    self.edge(x, after, kind);
                }
                cur = after;
            }
        }
    }
}

/// Whether control can leave `s` other than by falling through: a `return`
/// anywhere inside, or a `break` that targets an enclosing construct.
pub fn can_escape(s: &Stmt) -> bool {
    fn go(body: &[Stmt], breakable: bool) -> bool {
        body.iter().any(|s| stmt(s, breakable))
    }
    fn stmt(s: &Stmt, breakable: bool) -> bool {
        match &s.kind {
            StmtKind::Return(_) => true,
            StmtKind::Break => !breakable,
            StmtKind::If { then_body, else_body, .. } => {
                go(then_body, breakable) || else_body.as_ref().is_some_and(|e| go(e, breakable))
            }
            StmtKind::For { body, .. } | StmtKind::While { body, .. } => go(body, true),
            StmtKind::Switch { arms, default, .. } => {
                arms.iter().any(|a| go(&a.body, true)) || default.as_ref().is_some_and(|d| go(d, true))
            }
            _ => false,
        }
    }
    match &s.kind {
        StmtKind::For { body, .. } | StmtKind::While { body, .. } => go(body, true),
        StmtKind::Switch { .. } => stmt(s, true),
        _ => stmt(s, false),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::load;

    fn ids(src: &str) -> Vec<String> {
        let p = load(src).unwrap();
        divide_blocks(&p).blocks.into_iter().map(|b| b.id).collect()
    }

    #[test]
    fn straight_line_method_is_one_block() {
        assert_eq!(ids("void f(){ int x = 1; x = x + 1; }"), vec!["f()"]);
    }

    #[test]
    fn if_else_has_three_blocks_and_two_branch_edges() {
        let p = load("void f(int a){ if (a > 0) { a = 1; } else { a = 2; } }").unwrap();
        let map = divide_blocks(&p);
        assert_eq!(map.len(), 3);
        assert_eq!(map.edges.iter().filter(|e| e.kind == EdgeKind::Branch).count(), 2);
    }

    #[test]
    fn nested_for_loops_split_headers() {
        let got = ids("void update(){ for (int i = 0; i < 3; i++) { for (int j = 0; j < 3; j++) { emit_int(j); } } }");
        let want = [
            "update()",
            "update().for_1.init",
            "update().for_1.bool",
            "update().for_1",
            "update().for_1.update",
            "update().for_1.for_1.init",
            "update().for_1.for_1.bool",
            "update().for_1.for_1",
            "update().for_1.for_1.update",
        ];
        assert_eq!(got, want);
    }

    #[test]
    fn early_return_opens_a_continuation() {
        let got = ids("int f(int a){ if (a > 0) { return 1; } a = a + 1; return a; }");
        assert_eq!(got, vec!["f()", "f().if_1", "f().if_1.skip", "f().cont_1"]);
    }

    #[test]
    fn loop_with_internal_break_does_not_escape() {
        let got = ids("void f(){ while (true) { break; } emit_int(1); }");
        assert_eq!(got, vec!["f()", "f().while_1.header", "f().while_1"]);
    }

    #[test]
    fn only_bodies_are_ablatable() {
        let p = load("void f(int k){ for (int i = 0; i < k; i++) { if (i > 1) { emit_int(i); } } switch (k) { case 1: emit_int(1); } }").unwrap();
        let map = divide_blocks(&p);
        assert_eq!(map.ablatable(), vec!["f().for_1", "f().for_1.if_1", "f().switch_1.arm_1"]);
    }
}
