//! Per-block energy profiles, category breakdowns and operation rankings.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::blocks::{BlockMap, Group, OpKind, OperationDictionary};
use crate::interp::ExecutionLog;
use crate::model::EnergyModel;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum AccountError {
    #[error("model has no cost for: {}", .0.iter().map(|o| o.to_string()).collect::<Vec<_>>().join(", "))]
    MissingOps(Vec<OpKind>),
    #[error("block `{0}` is not in the dictionary")]
    UnknownBlock(String),
    #[error("total energy is zero")]
    ZeroTotal,
    #[error("model was rejected by validation")]
    Rejected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockCost {
    pub id: String,
    pub executions: u64,
    #[serde(rename = "cost_J")]
    pub cost_j: f64,
    #[serde(rename = "op_costs_J")]
    pub op_costs: BTreeMap<OpKind, f64>,
}

impl BlockCost {
    pub fn group_costs(&self) -> BTreeMap<Group, f64> {
        let mut g: BTreeMap<Group, f64> = Group::ALL.iter().map(|k| (*k, 0.0)).collect();
        for (op, c) in &self.op_costs {
            *g.get_mut(&op.group()).expect("all groups present") += c;
        }
        g
    }

    /// Percentage of the block cost per category.
    pub fn group_shares(&self) -> BTreeMap<Group, f64> {
        self.group_costs().into_iter().map(|(k, c)| (k, if self.cost_j > 0.0 { 100.0 * c / self.cost_j } else { 0.0 })).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyProfile {
    pub case_id: String,
    #[serde(rename = "total_J")]
    pub total_j: f64,
    pub blocks: Vec<BlockCost>,
}

impl EnergyProfile {
    /// Builds a profile from given block costs. The total is their sum.
    pub fn from_blocks(case_id: impl Into<String>, blocks: Vec<BlockCost>) -> Self {
        let total_j = blocks.iter().map(|b| b.cost_j).sum();
        EnergyProfile { case_id: case_id.into(), total_j, blocks }
    }

    pub fn block(&self, id: &str) -> Option<&BlockCost> {
        self.blocks.iter().find(|b| b.id == id)
    }

    /// Blocks in descending cost order, ties by id.
    pub fn ranked(&self) -> Vec<&BlockCost> {
        let mut v: Vec<&BlockCost> = self.blocks.iter().collect();
        v.sort_by(|a, b| b.cost_j.total_cmp(&a.cost_j).then_with(|| a.id.cmp(&b.id)));
        v
    }

    /// Merges every loop header block (init, condition, update) into its loop
    /// body, so that a loop is reported as one unit.
    pub fn folded(&self, map: &BlockMap) -> EnergyProfile {
        let mut merged: Vec<BlockCost> = Vec::new();
        let mut pos: BTreeMap<String, usize> = BTreeMap::new();
        for b in &self.blocks {
            let target = match map.index_of(&b.id) {
                Some(i) => map.id(map.fold_target(i)).to_string(),
                None => b.id.clone(),
            };
            let slot = *pos.entry(target.clone()).or_insert_with(|| {
                merged.push(BlockCost { id: target.clone(), executions: 0, cost_j: 0.0, op_costs: BTreeMap::new() });
                merged.len() - 1
            });
            let m = &mut merged[slot];
            if m.id == b.id {
                m.executions = b.executions;
            }
            m.cost_j += b.cost_j;
            for (op, c) in &b.op_costs {
                *m.op_costs.entry(*op).or_default() += c;
            }
        }
        EnergyProfile { case_id: self.case_id.clone(), total_j: self.total_j, blocks: merged }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("profile serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, serde_json::Error> {
        EnergyProfile::deserialize(v)
    }
}

/// Block costs of one run: cost(block) = executions × Σ_op count × cost.
/// Only operations of executed blocks need a cost.
pub fn block_profiles(log: &ExecutionLog, dict: &OperationDictionary, model: &EnergyModel) -> Result<EnergyProfile, AccountError> {
    let mut missing: Vec<OpKind> = Vec::new();
    for (id, _) in log.block_counts.iter().filter(|(_, n)| **n > 0) {
        for op in dict.row(id).into_iter().flat_map(|r| r.keys()) {
            if model.cost(*op).is_none() && !missing.contains(op) {
                missing.push(*op);
            }
        }
    }
    missing.sort();
    if !missing.is_empty() {
        return Err(AccountError::MissingOps(missing));
    }
    let mut blocks = Vec::new();
    for (id, &n) in &log.block_counts {
        let row = dict.row(id).ok_or_else(|| AccountError::UnknownBlock(id.clone()))?;
        if n == 0 {
            continue;
        }
        let op_costs: BTreeMap<OpKind, f64> =
            row.iter().map(|(op, k)| (*op, n as f64 * *k as f64 * model.cost(*op).expect("checked above") * 1e-6)).collect();
        let cost_j = op_costs.values().sum();
        blocks.push(BlockCost { id: id.clone(), executions: n, cost_j, op_costs });
    }
    Ok(EnergyProfile::from_blocks(log.case_id.clone(), blocks))
}

/// Like [`block_profiles`] but refuses models that failed validation.
pub fn accepted_profile(log: &ExecutionLog, dict: &OperationDictionary, model: &EnergyModel) -> Result<EnergyProfile, AccountError> {
    if !model.accepted {
        return Err(AccountError::Rejected);
    }
    block_profiles(log, dict, model)
}

/// Operations by descending single-execution cost, ties by name.
pub fn rank_operations(model: &EnergyModel) -> Vec<(OpKind, f64)> {
    rank_costs(&model.cost_uj)
}

pub fn rank_costs(costs: &BTreeMap<OpKind, f64>) -> Vec<(OpKind, f64)> {
    let mut v: Vec<(OpKind, f64)> = costs.iter().map(|(o, c)| (*o, *c)).collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.to_string().cmp(&b.0.to_string())));
    v
}

/// Percentage of the profile total held by the selected blocks.
pub fn share_of_total(profile: &EnergyProfile, selector: impl Fn(&BlockCost) -> bool) -> Result<f64, AccountError> {
    if profile.total_j <= 0.0 {
        return Err(AccountError::ZeroTotal);
    }
    Ok(100.0 * profile.blocks.iter().filter(|b| selector(b)).map(|b| b.cost_j).sum::<f64>() / profile.total_j)
}

/// Top-N blocks with their cost and category breakdown as a Markdown table.
pub fn blocks_markdown(profile: &EnergyProfile, top: usize) -> String {
    let mut s = String::from("| Rank | Block ID | Executions | Energy (mJ) | Share |");
    for g in Group::ALL {
        s.push_str(&format!(" {} |", g.name()));
    }
    s.push_str("\n|---:|---|---:|---:|---:|");
    s.push_str(&"---:|".repeat(Group::ALL.len()));
    s.push('\n');
    for (i, b) in profile.ranked().into_iter().take(top).enumerate() {
        let share = if profile.total_j > 0.0 { 100.0 * b.cost_j / profile.total_j } else { 0.0 };
        s.push_str(&format!("| {} | {} | {} | {:.1} | {:.1}% |", i + 1, b.id, b.executions, b.cost_j * 1e3, share));
        for (_, p) in b.group_shares() {
            s.push_str(&format!(" {p:.1}% |"));
        }
        s.push('\n');
    }
    s
}

/// Operation ranking as a Markdown table. Members of a collinear group are
/// shown as one row because only their combined cost is supported by the data.
pub fn operations_markdown(model: &EnergyModel, top: usize) -> String {
    let mut rows: Vec<(String, f64, String)> = Vec::new();
    let mut seen_groups = Vec::new();
    for (op, c) in rank_operations(model) {
        match model.analysis.group_of(op) {
            Some(g) if model.analysis.unidentifiable.contains(&op) => {
                if seen_groups.contains(&g.to_vec()) {
                    continue;
                }
                seen_groups.push(g.to_vec());
                let sum: f64 = g.iter().filter_map(|o| model.cost(*o)).sum();
                let name = g.iter().map(|o| o.to_string()).collect::<Vec<_>>().join(" + ");
                rows.push((name, sum, "group sum; split unavailable".into()));
            }
            _ => rows.push((op.to_string(), c, String::new())),
        }
    }
    let mut s = String::from("| Rank | Operation | Cost (µJ) | Note |\n|---:|---|---:|---|\n");
    for (i, (name, c, note)) in rows.into_iter().take(top).enumerate() {
        s.push_str(&format!("| {} | {} | {:.3} | {} |\n", i + 1, name, c, note));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::ops::GotoKind;

    fn log(counts: &[(&str, u64)]) -> ExecutionLog {
        ExecutionLog {
            case_id: "c".into(),
            block_counts: counts.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            output_digest: String::new(),
            step_count: 1,
            duration_s: 1.0,
            failed: None,
        }
    }

    fn dict(rows: &[(&str, &[(OpKind, u64)])]) -> OperationDictionary {
        let counts: BTreeMap<String, BTreeMap<OpKind, u64>> =
            rows.iter().map(|(id, r)| (id.to_string(), r.iter().copied().collect())).collect();
        let mut u: Vec<OpKind> = counts.values().flat_map(|r| r.keys().copied()).collect();
        u.sort();
        u.dedup();
        OperationDictionary { op_universe: u, counts }
    }

    #[test]
    fn single_block_linearity() {
        let d = dict(&[("f()", &[(OpKind::Increment, 2)])]);
        let m = EnergyModel::from_costs(BTreeMap::from([(OpKind::Increment, 1.5)]));
        let p = block_profiles(&log(&[("f()", 3)]), &d, &m).unwrap();
        assert!((p.blocks[0].cost_j - 9.0e-6).abs() < 1e-18);
        assert_eq!(p.total_j, p.blocks[0].cost_j);
    }

    #[test]
    fn missing_costs_are_listed() {
        let d = dict(&[("f()", &[(OpKind::Increment, 2), (OpKind::Not, 1)])]);
        let m = EnergyModel::from_costs(BTreeMap::from([(OpKind::Increment, 1.5)]));
        assert_eq!(block_profiles(&log(&[("f()", 1)]), &d, &m), Err(AccountError::MissingOps(vec![OpKind::Not])));
    }

    #[test]
    fn ranking_and_ties() {
        let m = EnergyModel::from_costs(BTreeMap::from([
            (OpKind::BlockGoto(GotoKind::While), 1.1),
            (OpKind::BlockGoto(GotoKind::If), 6.7),
            (OpKind::BlockGoto(GotoKind::For), 4.1),
            (OpKind::Not, 1.1),
        ]));
        let r: Vec<String> = rank_operations(&m).iter().map(|(o, _)| o.to_string()).collect();
        assert_eq!(r, ["BlockGoto_if", "BlockGoto_for", "BlockGoto_while", "Not"]);
        assert!(rank_operations(&EnergyModel::from_costs(BTreeMap::new())).is_empty());
    }

    #[test]
    fn shares() {
        let b = |id: &str, c: f64| BlockCost { id: id.into(), executions: 1, cost_j: c, op_costs: BTreeMap::from([(OpKind::Not, c)]) };
        let p = EnergyProfile::from_blocks("c", vec![b("a", 80.9), b("b", 1.3), b("c", 17.8)]);
        assert!((share_of_total(&p, |_| true).unwrap() - 100.0).abs() < 1e-12);
        assert!((share_of_total(&p, |x| x.id == "a").unwrap() - 80.9).abs() < 1e-9);
        assert_eq!(share_of_total(&p, |_| false).unwrap(), 0.0);
        assert!(share_of_total(&EnergyProfile::from_blocks("z", vec![]), |_| true).is_err());
    }
}
