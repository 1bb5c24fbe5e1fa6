//! Hot-spot identification, strategy selection, refactoring, differential
//! equivalence checking and before/after evaluation.

pub mod analysis;
pub mod transform;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::accounting::{block_profiles, AccountError, EnergyProfile};
use crate::blocks::{build_dictionary, total_op_counts, BlockMap, Group, OpKind};
use crate::interp::{ExecutionCase, InterpConfig, InterpError, Interpreter};
use crate::lang::ast::{Program, StmtKind};
use crate::lang::{pretty_print, CheckedProgram};
use crate::model::EnergyModel;

pub use transform::{InlineConfig, NotApplicable, Rewrite};

#[derive(Debug, thiserror::Error)]
pub enum OptimizeError {
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error(transparent)]
    Account(#[from] AccountError),
    #[error("model has no cost for: {}", .0.iter().map(|o| o.to_string()).collect::<Vec<_>>().join(", "))]
    Unpriced(Vec<OpKind>),
    #[error("case `{case}` failed: {message}")]
    Failed { case: String, message: String },
    #[error("programs are not equivalent: {0}")]
    NotEquivalent(Verdict),
}

// ---------------------------------------------------------------- strategies

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    LibraryReplacement,
    LoopUnroll(Option<usize>),
    LoopInvariantMotion,
    IfCombination,
    MethodInline,
    ConstantFoldPropagate,
    CommonSubexprElim,
    LoopUnswitching,
    InductionVariableElimination,
}

impl Strategy {
    /// Strategies the optimizer tries unless told otherwise.
    pub const DEFAULT: [Strategy; 7] = [
        Strategy::IfCombination,
        Strategy::MethodInline,
        Strategy::LoopInvariantMotion,
        Strategy::LoopUnroll(None),
        Strategy::ConstantFoldPropagate,
        Strategy::CommonSubexprElim,
        Strategy::LibraryReplacement,
    ];

    pub fn parse_list(s: &str) -> Result<Vec<Strategy>, String> {
        s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(Strategy::from_str).collect()
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::LoopUnroll(Some(k)) => write!(f, "LoopUnroll({k})"),
            Strategy::LoopUnroll(None) => f.write_str("LoopUnroll"),
            other => write!(f, "{other:?}"),
        }
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "IfCombination" => Strategy::IfCombination,
            "MethodInline" => Strategy::MethodInline,
            "LoopInvariantMotion" => Strategy::LoopInvariantMotion,
            "LoopUnroll" => Strategy::LoopUnroll(None),
            "ConstantFoldPropagate" => Strategy::ConstantFoldPropagate,
            "CommonSubexprElim" => Strategy::CommonSubexprElim,
            "LibraryReplacement" => Strategy::LibraryReplacement,
            "LoopUnswitching" => Strategy::LoopUnswitching,
            "InductionVariableElimination" => Strategy::InductionVariableElimination,
            _ => match s.strip_prefix("LoopUnroll(").and_then(|r| r.strip_suffix(')')).and_then(|k| k.parse().ok()) {
                Some(k) => Strategy::LoopUnroll(Some(k)),
                None => return Err(format!("unknown strategy `{s}`")),
            },
        })
    }
}

impl Serialize for Strategy {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Strategy {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HotBlockPolicy {
    TopK(usize),
    /// Blocks whose share of the total exceeds the fraction.
    Share(f64),
}

impl Default for HotBlockPolicy {
    fn default() -> Self {
        HotBlockPolicy::Share(0.10)
    }
}

impl fmt::Display for HotBlockPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HotBlockPolicy::TopK(k) => write!(f, "top:{k}"),
            HotBlockPolicy::Share(x) => write!(f, "share:{x}"),
        }
    }
}

impl FromStr for HotBlockPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("bad policy `{s}` (expected top:<k> with k >= 1 or share:<f> with 0 < f < 1)");
        match s.split_once(':') {
            Some(("top", k)) => match k.parse::<usize>() {
                Ok(k) if k >= 1 => Ok(HotBlockPolicy::TopK(k)),
                _ => Err(bad()),
            },
            Some(("share", x)) => match x.parse::<f64>() {
                Ok(x) if x > 0.0 && x < 1.0 => Ok(HotBlockPolicy::Share(x)),
                _ => Err(bad()),
            },
            _ => Err(bad()),
        }
    }
}

impl Serialize for HotBlockPolicy {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for HotBlockPolicy {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Thresholds for hot-spot selection, the strategy rule table and the
/// equivalence corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizeConfig {
    pub policy: HotBlockPolicy,
    pub strategies: Vec<Strategy>,
    pub inline_max_statements: usize,
    /// Control share of a block's cost above which unrolling is considered.
    pub control_share: f64,
    pub max_rounds: usize,
    pub equivalence_cases: usize,
    pub seed: u64,
    pub interp: InterpConfig,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            policy: HotBlockPolicy::default(),
            strategies: Strategy::DEFAULT.to_vec(),
            inline_max_statements: 30,
            control_share: 0.25,
            max_rounds: 12,
            equivalence_cases: 100,
            seed: 42,
            interp: InterpConfig::default(),
        }
    }
}

impl OptimizeConfig {
    fn inline(&self) -> InlineConfig {
        InlineConfig { max_statements: self.inline_max_statements }
    }
}

// ---------------------------------------------------------------- hot spots

/// Costly blocks of a profile, most expensive first (ties by id).
pub fn find_costly_blocks(profile: &EnergyProfile, policy: HotBlockPolicy) -> Vec<String> {
    let ranked = profile.ranked();
    match policy {
        HotBlockPolicy::TopK(k) => ranked.into_iter().take(k).map(|b| b.id.clone()).collect(),
        HotBlockPolicy::Share(x) => {
            if profile.total_j <= 0.0 {
                return vec![];
            }
            ranked.into_iter().filter(|b| b.cost_j / profile.total_j > x).map(|b| b.id.clone()).collect()
        }
    }
}

// ---------------------------------------------------------------- measuring

/// Operation counts and modeled energy of one program on one case.
#[derive(Clone, Debug)]
pub struct Measurement {
    pub counts: BTreeMap<OpKind, u64>,
    pub energy_j: f64,
    /// Loop-level profile (headers folded into loop bodies).
    pub profile: EnergyProfile,
    pub map: BlockMap,
}

fn modeled_j(counts: &BTreeMap<OpKind, u64>, model: &EnergyModel) -> Result<f64, OptimizeError> {
    let mut missing = vec![];
    let mut uj = 0.0;
    for (op, n) in counts.iter().filter(|(_, n)| **n > 0) {
        match model.cost(*op) {
            Some(c) => uj += c * *n as f64,
            None => missing.push(*op),
        }
    }
    if missing.is_empty() {
        Ok(uj * 1e-6)
    } else {
        Err(OptimizeError::Unpriced(missing))
    }
}

pub fn measure(cp: &CheckedProgram, case: &ExecutionCase, model: &EnergyModel, icfg: &InterpConfig) -> Result<Measurement, OptimizeError> {
    let interp = Interpreter::new(cp).with_config(icfg.clone());
    let mut plain = case.clone();
    plain.ablated_blocks.clear();
    let log = interp.run(&plain)?;
    if let Some(f) = &log.failed {
        return Err(OptimizeError::Failed { case: case.case_id.clone(), message: format!("{} in {}", f.message, f.block) });
    }
    let dict = build_dictionary(cp, &interp.map);
    let counts = total_op_counts(&log.block_counts, &dict).expect("log blocks come from the same map").as_map();
    let energy_j = modeled_j(&counts, model)?;
    let profile = block_profiles(&log, &dict, model)?.folded(&interp.map);
    Ok(Measurement { counts, energy_j, profile, map: interp.map })
}

/// Per-operation count change from `before` to `after`.
pub fn op_deltas(before: &BTreeMap<OpKind, u64>, after: &BTreeMap<OpKind, u64>) -> BTreeMap<OpKind, i64> {
    let keys: BTreeSet<OpKind> = before.keys().chain(after.keys()).copied().collect();
    keys.into_iter()
        .filter_map(|k| {
            let d = *after.get(&k).unwrap_or(&0) as i64 - *before.get(&k).unwrap_or(&0) as i64;
            (d != 0).then_some((k, d))
        })
        .collect()
}

// ---------------------------------------------------------------- applying

/// Applies one strategy at `block`. Method-level strategies act on the
/// method that contains the block.
pub fn apply(strategy: Strategy, cp: &CheckedProgram, map: &BlockMap, block: &str, model: &EnergyModel, cfg: &OptimizeConfig) -> Rewrite {
    let method = map.get(block).map(|b| b.method.clone()).ok_or_else(|| NotApplicable(format!("no block `{block}`")))?;
    match strategy {
        Strategy::IfCombination => transform::if_combination(cp, &method),
        Strategy::MethodInline => transform::inline_in_block(cp, map, block, &cfg.inline()),
        Strategy::LoopInvariantMotion => transform::loop_invariant_motion(cp, map, block),
        Strategy::LoopUnroll(f) => transform::loop_unroll(cp, map, block, f),
        Strategy::LibraryReplacement => transform::library_replacement(cp, map, block),
        Strategy::ConstantFoldPropagate => transform::constant_fold(cp, &method),
        Strategy::CommonSubexprElim => transform::common_subexpression(cp, map, block, &|op| model.cost(op)),
        Strategy::LoopUnswitching => transform::loop_unswitching(cp, map, block),
        Strategy::InductionVariableElimination => transform::induction_variable_elimination(cp, map, block),
    }
}

fn has_duplicate_predicates(cp: &CheckedProgram, method: &str) -> bool {
    let Some(m) = cp.method(method) else { return false };
    let mut conds = Vec::new();
    crate::lang::ast::walk_stmts(&m.body, &mut |s| {
        if let StmtKind::If { cond, .. } = &s.kind {
            conds.push(cond);
        }
    });
    conds.iter().enumerate().any(|(i, a)| conds[i + 1..].contains(a))
}

/// Whether a strategy's rule fires for `block`, before trying the rewrite.
fn rule_matches(strategy: Strategy, cp: &CheckedProgram, map: &BlockMap, block: &str, profile: &EnergyProfile, cfg: &OptimizeConfig) -> Result<(), String> {
    let method = map.get(block).map(|b| b.method.as_str()).unwrap_or_default();
    let shares = profile.block(block).map(|b| b.group_shares()).unwrap_or_default();
    let share = |g: Group| shares.get(&g).copied().unwrap_or(0.0) / 100.0;
    let in_loop = transform::find_loop(cp, map, block);
    match strategy {
        Strategy::LoopUnroll(_) => {
            let is_for = in_loop.as_ref().is_some_and(|(m, p)| {
                matches!(analysis::stmt_at(&cp.method(m).expect("exists").body, p).map(|s| &s.kind), Some(StmtKind::For { .. }))
            });
            if !is_for {
                return Err("block is not part of a for-loop".into());
            }
            if share(Group::Control) <= cfg.control_share {
                return Err(format!("control share {:.1}% is not dominant", 100.0 * share(Group::Control)));
            }
            Ok(())
        }
        Strategy::IfCombination => {
            if has_duplicate_predicates(cp, method) {
                Ok(())
            } else {
                Err("method has no repeated predicate".into())
            }
        }
        Strategy::LoopInvariantMotion | Strategy::LibraryReplacement | Strategy::LoopUnswitching | Strategy::InductionVariableElimination => {
            in_loop.map(|_| ()).ok_or_else(|| "block is not part of a loop".into())
        }
        Strategy::ConstantFoldPropagate | Strategy::CommonSubexprElim => {
            let a = share(Group::Arithmetic);
            if a > 0.0 && Group::ALL.iter().all(|g| share(*g) <= a) {
                Ok(())
            } else {
                Err("arithmetic is not the dominant category".into())
            }
        }
        Strategy::MethodInline => Ok(()),
    }
}

#[derive(Clone, Debug)]
pub struct Candidate {
    pub strategy: Strategy,
    pub saving_j: f64,
    pub program: Program,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Refusal {
    pub strategy: Strategy,
    pub reason: String,
}

#[derive(Clone, Debug, Default)]
pub struct Selection {
    /// Applicable strategies by descending estimated saving.
    pub candidates: Vec<Candidate>,
    pub refused: Vec<Refusal>,
}

/// Rule table plus trial rewrites: every strategy whose rule fires and whose
/// rewrite succeeds is a candidate, scored by the modeled energy change on
/// the profiling case.
pub fn select_strategies(
    cp: &CheckedProgram,
    block: &str,
    profile: &EnergyProfile,
    strategies: &[Strategy],
    model: &EnergyModel,
    case: &ExecutionCase,
    cfg: &OptimizeConfig,
) -> Result<Selection, OptimizeError> {
    let map = crate::blocks::divide_blocks(cp);
    let base = measure(cp, case, model, &cfg.interp)?;
    let trials: Vec<Result<Candidate, Refusal>> = strategies
        .par_iter()
        .map(|&s| {
            let refuse = |reason: String| Refusal { strategy: s, reason };
            rule_matches(s, cp, &map, block, profile, cfg).map_err(refuse)?;
            let p = apply(s, cp, &map, block, model, cfg).map_err(|e| refuse(e.0))?;
            let checked = transform::reload(&p).map_err(|e| refuse(e.0))?;
            let m = measure(&checked, case, model, &cfg.interp).map_err(|e| refuse(e.to_string()))?;
            let strategy = match s {
                Strategy::LoopUnroll(None) => {
                    let trips = transform::unroll_trip_count(cp, &map, block).map(|t| t.0).unwrap_or(0);
                    Strategy::LoopUnroll(transform::choose_unroll_factor(trips))
                }
                other => other,
            };
            Ok(Candidate { strategy, saving_j: base.energy_j - m.energy_j, program: p })
        })
        .collect();
    let mut sel = Selection::default();
    for t in trials {
        match t {
            Ok(c) => sel.candidates.push(c),
            Err(r) => sel.refused.push(r),
        }
    }
    sel.candidates.sort_by(|a, b| b.saving_j.total_cmp(&a.saving_j).then_with(|| a.strategy.cmp(&b.strategy)));
    Ok(sel)
}

// ---------------------------------------------------------------- equivalence

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub case_id: String,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    pub cases: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence: Option<Divergence>,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.divergence {
            None => write!(f, "PASS on {} cases", self.cases),
            Some(d) => write!(f, "FAIL on case `{}`: {}", d.case_id, d.detail),
        }
    }
}

/// Runs both programs on every case with nothing ablated and compares
/// observable outputs and final state.
pub fn check_equivalence(original: &CheckedProgram, refactored: &CheckedProgram, cases: &[ExecutionCase], icfg: &InterpConfig) -> Verdict {
    let a = Interpreter::new(original).with_config(icfg.clone());
    let b = Interpreter::new(refactored).with_config(icfg.clone());
    let outcomes: Vec<Option<Divergence>> = cases
        .par_iter()
        .map(|c| {
            let mut c = c.clone();
            c.ablated_blocks.clear();
            let diverge = |detail: String| Some(Divergence { case_id: c.case_id.clone(), detail });
            let (la, lb) = match (a.run(&c), b.run(&c)) {
                (Ok(la), Ok(lb)) => (la, lb),
                (Err(e), _) => return diverge(format!("original cannot run: {e}")),
                (_, Err(e)) => return diverge(format!("refactored cannot run: {e}")),
            };
            if let Some(f) = &la.failed {
                return diverge(format!("original failed in {}: {}", f.block, f.message));
            }
            if let Some(f) = &lb.failed {
                return diverge(format!("refactored failed in {}: {}", f.block, f.message));
            }
            (la.output_digest != lb.output_digest).then(|| Divergence {
                case_id: c.case_id.clone(),
                detail: format!("digest {} != {}", la.output_digest, lb.output_digest),
            })
        })
        .collect();
    let divergence = outcomes.into_iter().flatten().next();
    Verdict { pass: divergence.is_none(), cases: cases.len(), divergence }
}

// ---------------------------------------------------------------- evaluation and reports

fn named(d: &BTreeMap<OpKind, i64>) -> BTreeMap<String, i64> {
    d.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn pct(part: f64, whole: f64) -> f64 {
    if whole > 0.0 { 100.0 * part / whole } else { 0.0 }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub cases: usize,
    #[serde(rename = "energy_before_J")]
    pub energy_before_j: f64,
    #[serde(rename = "energy_after_J")]
    pub energy_after_j: f64,
    pub saving_pct: f64,
    pub op_deltas: BTreeMap<String, i64>,
    pub equivalence: Verdict,
}

/// Modeled energy of both programs summed over `cases`. Requires the
/// programs to be equivalent on those cases.
pub fn evaluate(original: &CheckedProgram, refactored: &CheckedProgram, model: &EnergyModel, cases: &[ExecutionCase], icfg: &InterpConfig) -> Result<Evaluation, OptimizeError> {
    let equivalence = check_equivalence(original, refactored, cases, icfg);
    if !equivalence.pass {
        return Err(OptimizeError::NotEquivalent(equivalence));
    }
    let totals = |cp: &CheckedProgram| -> Result<BTreeMap<OpKind, u64>, OptimizeError> {
        let ms: Vec<Measurement> = cases.par_iter().map(|c| measure(cp, c, model, icfg)).collect::<Result<_, _>>()?;
        let mut sum = BTreeMap::new();
        for m in ms {
            for (k, v) in m.counts {
                *sum.entry(k).or_insert(0) += v;
            }
        }
        Ok(sum)
    };
    let (before, after) = (totals(original)?, totals(refactored)?);
    let (eb, ea) = (modeled_j(&before, model)?, modeled_j(&after, model)?);
    Ok(Evaluation {
        cases: cases.len(),
        energy_before_j: eb,
        energy_after_j: ea,
        saving_pct: pct(eb - ea, eb),
        op_deltas: named(&op_deltas(&before, &after)),
        equivalence,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateReport {
    pub strategy: Strategy,
    #[serde(rename = "estimated_saving_J")]
    pub estimated_saving_j: f64,
    pub estimated_saving_pct: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HotBlockReport {
    pub block: String,
    #[serde(rename = "cost_J")]
    pub cost_j: f64,
    pub share_pct: f64,
    pub candidates: Vec<CandidateReport>,
    pub refused: Vec<Refusal>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub block: String,
    pub strategy: Strategy,
    #[serde(rename = "energy_before_J")]
    pub energy_before_j: f64,
    #[serde(rename = "energy_after_J")]
    pub energy_after_j: f64,
    /// Saving of this step relative to the original program.
    pub saving_pct: f64,
    pub cumulative_saving_pct: f64,
    pub op_deltas: BTreeMap<String, i64>,
    pub equivalence: Verdict,
    pub applied: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub policy: HotBlockPolicy,
    pub case_id: String,
    #[serde(rename = "energy_before_J")]
    pub energy_before_j: f64,
    #[serde(rename = "energy_after_J")]
    pub energy_after_j: f64,
    pub saving_pct: f64,
    pub hot_blocks: Vec<HotBlockReport>,
    pub steps: Vec<StepReport>,
    pub all_equivalent: bool,
}

impl OptimizationReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, serde_json::Error> {
        OptimizationReport::deserialize(v)
    }

    pub fn to_markdown(&self) -> String {
        let mut s = format!(
            "# Optimization report\n\nProfiling case `{}`, policy `{}`.\n\nModeled energy {:.6} J -> {:.6} J ({:.2}% saved).\n\n",
            self.case_id, self.policy, self.energy_before_j, self.energy_after_j, self.saving_pct
        );
        s.push_str("## Hot blocks\n\n| block | cost (J) | share | candidates (estimated saving) |\n|---|---:|---:|---|\n");
        for h in &self.hot_blocks {
            let c: Vec<String> = h.candidates.iter().map(|c| format!("{} ({:.2}%)", c.strategy, c.estimated_saving_pct)).collect();
            s.push_str(&format!("| `{}` | {:.6} | {:.1}% | {} |\n", h.block, h.cost_j, h.share_pct, if c.is_empty() { "none".into() } else { c.join(", ") }));
        }
        s.push_str("\n## Applied changes (cumulative)\n\n| # | block | strategy | energy (J) | step saving | cumulative | equivalence |\n|---:|---|---|---:|---:|---:|---|\n");
        s.push_str(&format!("| 0 | | original | {:.6} | | | |\n", self.energy_before_j));
        for (i, st) in self.steps.iter().enumerate() {
            let bar = "#".repeat((st.cumulative_saving_pct / 2.0).round().clamp(0.0, 50.0) as usize);
            s.push_str(&format!(
                "| {} | `{}` | {}{} | {:.6} | {:.2}% | {:.2}% {} | {} |\n",
                i + 1,
                st.block,
                st.strategy,
                if st.applied { "" } else { " (rejected)" },
                st.energy_after_j,
                st.saving_pct,
                st.cumulative_saving_pct,
                bar,
                st.equivalence
            ));
        }
        s
    }
}

/// Result of the optimization loop.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub program: Program,
    pub report: OptimizationReport,
}

/// The optimization loop: profile, pick the next hot block not yet handled,
/// apply its strategies in order of estimated saving (each one checked for
/// equivalence against the previous version), then profile again.
pub fn optimize(
    cp: &CheckedProgram,
    model: &EnergyModel,
    profile_case: &ExecutionCase,
    equivalence_cases: &[ExecutionCase],
    cfg: &OptimizeConfig,
) -> Result<Outcome, OptimizeError> {
    let first = measure(cp, profile_case, model, &cfg.interp)?;
    let e0 = first.energy_j;
    let mut current = cp.clone();
    let mut current_m = first;
    let mut processed: BTreeSet<String> = BTreeSet::new();
    let mut hot_blocks = Vec::new();
    let mut steps = Vec::new();
    for _ in 0..cfg.max_rounds {
        let hot = find_costly_blocks(&current_m.profile, cfg.policy);
        let Some(block) = hot.into_iter().find(|b| !processed.contains(b)) else { break };
        processed.insert(block.clone());
        let cost = current_m.profile.block(&block).map_or(0.0, |b| b.cost_j);
        let sel = select_strategies(&current, &block, &current_m.profile, &cfg.strategies, model, profile_case, cfg)?;
        hot_blocks.push(HotBlockReport {
            block: block.clone(),
            cost_j: cost,
            share_pct: pct(cost, current_m.profile.total_j),
            candidates: sel
                .candidates
                .iter()
                .map(|c| CandidateReport { strategy: c.strategy, estimated_saving_j: c.saving_j, estimated_saving_pct: pct(c.saving_j, current_m.energy_j) })
                .collect(),
            refused: sel.refused.clone(),
        });
        let mut changed = false;
        for cand in sel.candidates.iter().filter(|c| c.saving_j > 0.0) {
            let program = if changed {
                let map = crate::blocks::divide_blocks(&current);
                match apply(cand.strategy, &current, &map, &block, model, cfg) {
                    Ok(p) => p,
                    Err(_) => continue,
                }
            } else {
                cand.program.clone()
            };
            let Ok(next) = transform::reload(&program) else { continue };
            let verdict = check_equivalence(&current, &next, equivalence_cases, &cfg.interp);
            let m = if verdict.pass { Some(measure(&next, profile_case, model, &cfg.interp)?) } else { None };
            let after = m.as_ref().map_or(current_m.energy_j, |m| m.energy_j);
            let improves = m.is_some() && after < current_m.energy_j;
            steps.push(StepReport {
                block: block.clone(),
                strategy: cand.strategy,
                energy_before_j: current_m.energy_j,
                energy_after_j: after,
                saving_pct: pct(current_m.energy_j - after, e0),
                cumulative_saving_pct: pct(e0 - if improves { after } else { current_m.energy_j }, e0),
                op_deltas: m.as_ref().map(|m| named(&op_deltas(&current_m.counts, &m.counts))).unwrap_or_default(),
                equivalence: verdict,
                applied: improves,
            });
            if improves {
                current = next;
                current_m = m.expect("measured");
                changed = true;
            }
        }
    }
    let report = OptimizationReport {
        policy: cfg.policy,
        case_id: profile_case.case_id.clone(),
        energy_before_j: e0,
        energy_after_j: current_m.energy_j,
        saving_pct: pct(e0 - current_m.energy_j, e0),
        all_equivalent: steps.iter().all(|s| s.equivalence.pass),
        hot_blocks,
        steps,
    };
    Ok(Outcome { program: current.into_program(), report })
}

/// Source text of an optimized program.
pub fn emit(p: &Program) -> String {
    pretty_print(p)
}
