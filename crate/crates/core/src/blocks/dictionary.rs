//! Static operation counts per block.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ops::{GotoKind, OpKind};
use super::{path, BlockMap, Targets};
use crate::lang::ast::*;
use crate::lang::{CheckedProgram, Ty};

/// O[i,j]: occurrences of operation j in block i.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperationDictionary {
    pub op_universe: Vec<OpKind>,
    /// Keyed by block id; every block of the map has a (possibly empty) row.
    pub counts: BTreeMap<String, BTreeMap<OpKind, u64>>,
}

/// N_e over an operation universe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpCountVector {
    pub universe: Vec<OpKind>,
    pub counts: Vec<u64>,
}

impl OpCountVector {
    pub fn get(&self, op: OpKind) -> u64 {
        self.universe.iter().position(|o| *o == op).map_or(0, |i| self.counts[i])
    }

    pub fn as_map(&self) -> BTreeMap<OpKind, u64> {
        self.universe.iter().copied().zip(self.counts.iter().copied()).filter(|(_, c)| *c > 0).collect()
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum CountError {
    #[error("block `{0}` is not in the dictionary")]
    UnknownBlock(String),
}

impl OperationDictionary {
    pub fn row(&self, block: &str) -> Option<&BTreeMap<OpKind, u64>> {
        self.counts.get(block)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: BTreeMap<&String, BTreeMap<String, u64>> = self
            .counts
            .iter()
            .map(|(b, row)| (b, row.iter().map(|(k, v)| (k.to_string(), *v)).collect()))
            .collect();
        serde_json::to_value(rows).expect("serializable")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, String> {
        let rows: BTreeMap<String, BTreeMap<String, u64>> = serde_json::from_value(v.clone()).map_err(|e| e.to_string())?;
        let mut universe = BTreeSet::new();
        let mut counts = BTreeMap::new();
        for (b, row) in rows {
            let mut parsed = BTreeMap::new();
            for (k, v) in row {
                let op: OpKind = k.parse()?;
                universe.insert(op);
                parsed.insert(op, v);
            }
            counts.insert(b, parsed);
        }
        Ok(OperationDictionary { op_universe: universe.into_iter().collect(), counts })
    }

    /// CSV with `block_id` followed by one column per operation.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["block_id".to_string()];
        header.extend(self.op_universe.iter().map(|o| o.to_string()));
        w.write_record(&header).expect("in-memory write");
        for (b, row) in &self.counts {
            let mut rec = vec![b.clone()];
            rec.extend(self.op_universe.iter().map(|o| row.get(o).copied().unwrap_or(0).to_string()));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}

/// Count operations per block.
pub fn build_dictionary(program: &CheckedProgram, map: &BlockMap) -> OperationDictionary {
    let mut rows: Vec<BTreeMap<OpKind, u64>> = vec![BTreeMap::new(); map.len()];
    for m in &program.methods {
        let mut c = Counter { map, method: &m.name, ret: m.ret, rows: &mut rows };
        c.list(&m.body, &[], None);
    }
    let universe: BTreeSet<OpKind> = rows.iter().flat_map(|r| r.keys().copied()).collect();
    let counts = rows.into_iter().enumerate().map(|(i, r)| (map.id(i).to_string(), r)).collect();
    OperationDictionary { op_universe: universe.into_iter().collect(), counts }
}

struct Counter<'a> {
    map: &'a BlockMap,
    method: &'a str,
    ret: Ty,
    rows: &'a mut Vec<BTreeMap<OpKind, u64>>,
}

impl Counter<'_> {
    fn add(&mut self, block: usize, op: OpKind) {
        *self.rows[block].entry(op).or_insert(0) += 1;
    }

    fn expr(&mut self, block: usize, e: &Expr) {
        e.walk(&mut |x| {
            for op in OpKind::of_expr(x) {
                *self.rows[block].entry(op).or_insert(0) += 1;
            }
        });
    }

    fn list(&mut self, body: &[Stmt], parent: &[u32], selector: Option<u32>) {
        for (i, s) in body.iter().enumerate() {
            let p = match selector {
                Some(sel) => path::child(parent, sel, i),
                None => vec![i as u32],
            };
            self.stmt(s, &p);
        }
    }

    fn stmt(&mut self, s: &Stmt, p: &[u32]) {
        let placement = self.map.placement(self.method, p).expect("statement placed").clone();
        let b = placement.block;
        match (&s.kind, &placement.targets) {
            (StmtKind::Decl { ty, init, .. }, _) => {
                self.add(b, OpKind::Declaration(*ty));
                if let Some(e) = init {
                    self.expr(b, e);
                    self.add(b, OpKind::Assign(*ty, e.ty));
                }
            }
            (StmtKind::Assign { target, value }, _) => {
                self.expr(b, target);
                self.expr(b, value);
                self.add(b, OpKind::Assign(target.ty, value.ty));
            }
            (StmtKind::IncDec { target, increment }, _) => {
                self.expr(b, target);
                self.add(b, if *increment { OpKind::Increment } else { OpKind::Decrement });
            }
            (StmtKind::Expr(e), _) => self.expr(b, e),
            (StmtKind::Return(v), _) => {
                if let Some(e) = v {
                    self.expr(b, e);
                }
                self.add(b, OpKind::Return(self.ret));
            }
            (StmtKind::Break, _) => self.add(b, OpKind::Break),
            (StmtKind::If { cond, then_body, else_body }, Targets::If { then, other }) => {
                self.expr(b, cond);
                self.add(*then, OpKind::BlockGoto(GotoKind::If));
                self.add(*other, OpKind::BlockGoto(GotoKind::If));
                self.list(then_body, p, Some(path::THEN));
                if let Some(e) = else_body {
                    self.list(e, p, Some(path::ELSE));
                }
            }
            (StmtKind::For { init, cond, update, body }, Targets::For { boolean, body: bb, .. }) => {
                if let Some(st) = init {
                    self.stmt(st, &path::header(p, path::INIT));
                }
                self.expr(*boolean, cond);
                self.add(*bb, OpKind::BlockGoto(GotoKind::For));
                self.list(body, p, Some(path::BODY));
                if let Some(st) = update {
                    self.stmt(st, &path::header(p, path::UPDATE));
                }
            }
            (StmtKind::While { cond, body }, Targets::While { header, body: bb }) => {
                self.expr(*header, cond);
                self.add(*bb, OpKind::BlockGoto(GotoKind::While));
                self.list(body, p, Some(path::BODY));
            }
            (StmtKind::Switch { scrutinee, arms, default }, Targets::Switch { arms: ab, other }) => {
                self.expr(b, scrutinee);
                self.add(b, OpKind::Switch);
                for (k, arm) in arms.iter().enumerate() {
                    self.add(ab[k], OpKind::BlockGoto(GotoKind::Switch));
                    self.list(&arm.body, p, Some(path::ARM + k as u32));
                }
                self.add(*other, OpKind::BlockGoto(GotoKind::Switch));
                if let Some(d) = default {
                    self.list(d, p, Some(path::DEFAULT));
                }
            }
            _ => unreachable!("placement does not match statement kind"),
        }
    }
}

/// N_e(op_j) = Σ_i B[i]·O[i,j].
pub fn total_op_counts(
    block_counts: &BTreeMap<String, u64>,
    dict: &OperationDictionary,
) -> Result<OpCountVector, CountError> {
    let pos: BTreeMap<OpKind, usize> = dict.op_universe.iter().enumerate().map(|(i, o)| (*o, i)).collect();
    let mut counts = vec![0u64; dict.op_universe.len()];
    for (block, &n) in block_counts {
        let row = dict.counts.get(block).ok_or_else(|| CountError::UnknownBlock(block.clone()))?;
        for (op, &o) in row {
            counts[pos[op]] += n * o;
        }
    }
    Ok(OpCountVector { universe: dict.op_universe.clone(), counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::divide_blocks;
    use crate::blocks::ops::{ArithOp, CmpOp};
    use crate::lang::load;

    fn dict(src: &str) -> OperationDictionary {
        let p = load(src).unwrap();
        let map = divide_blocks(&p);
        build_dictionary(&p, &map)
    }

    #[test]
    fn repeated_statement_counts_twice() {
        let d = dict("void f(int a, int b){ int v; v = a + b; v = a + b; }");
        let row = d.row("f()").unwrap();
        assert_eq!(row[&OpKind::Arith(ArithOp::Addition, Ty::Int, Ty::Int)], 2);
        assert_eq!(row[&OpKind::Assign(Ty::Int, Ty::Int)], 2);
    }

    #[test]
    fn empty_block_has_empty_row() {
        let d = dict("void f(){}");
        assert!(d.row("f()").unwrap().is_empty());
    }

    #[test]
    fn header_comparisons_are_attributed_to_the_boolean_block() {
        let d = dict("void f(){ for (int i = 0; i < 10; i++) { emit_int(i); } }");
        assert_eq!(d.row("f().for_1.bool").unwrap()[&OpKind::Compare(CmpOp::Less, Ty::Int, Ty::Int)], 1);
        assert_eq!(d.row("f().for_1").unwrap()[&OpKind::BlockGoto(GotoKind::For)], 1);
        assert_eq!(d.row("f().for_1.update").unwrap()[&OpKind::Increment], 1);
        assert_eq!(d.row("f().for_1.init").unwrap()[&OpKind::Declaration(Ty::Int)], 1);
    }

    #[test]
    fn linear_in_block_counts() {
        let d = dict("void f(){ int i = 0; i++; i++; }");
        let bc = BTreeMap::from([("f()".to_string(), 3u64)]);
        assert_eq!(total_op_counts(&bc, &d).unwrap().get(OpKind::Increment), 6);
        let zero = BTreeMap::from([("f()".to_string(), 0u64)]);
        assert!(total_op_counts(&zero, &d).unwrap().counts.iter().all(|c| *c == 0));
        let bad = BTreeMap::from([("g()".to_string(), 1u64)]);
        assert!(total_op_counts(&bad, &d).is_err());
    }

    #[test]
    fn json_and_csv_exports() {
        let d = dict("void f(int a){ if (a > 0) { a = 1; } }");
        let back = OperationDictionary::from_json(&d.to_json()).unwrap();
        assert_eq!(back, d);
        let csv = d.to_csv();
        assert!(csv.starts_with("block_id,"));
        assert_eq!(csv.lines().count(), 4);
    }
}
