//! Execution cases: inputs per frame plus a set of ablated blocks.

use std::collections::BTreeSet;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::value::Value;
use crate::blocks::BlockMap;
use crate::lang::Ty;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Int(i64),
    Float(f64),
    Bool(bool),
}

impl Scalar {
    pub fn to_value(self, ty: Ty) -> Value {
        let f = match self {
            Scalar::Int(v) => v as f64,
            Scalar::Float(v) => v,
            Scalar::Bool(b) => b as i64 as f64,
        };
        match ty {
            Ty::Int => Value::Int(match self {
                Scalar::Int(v) => v,
                _ => f as i64,
            }),
            Ty::Float => Value::Float(f),
            _ => Value::Bool(f != 0.0),
        }
    }
}

/// Arguments passed to `frame` on one frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputEvent {
    pub frame: u32,
    pub args: Vec<Scalar>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecutionCase {
    pub case_id: String,
    pub inputs: Vec<InputEvent>,
    pub ablated_blocks: BTreeSet<String>,
    pub replicate_count: u32,
    pub frame_budget: u32,
}

impl ExecutionCase {
    /// A case with no inputs and nothing ablated.
    pub fn plain(case_id: impl Into<String>, frame_budget: u32) -> Self {
        ExecutionCase { case_id: case_id.into(), inputs: vec![], ablated_blocks: BTreeSet::new(), replicate_count: 1, frame_budget }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AblationPolicy {
    /// One baseline case, then one case per ablatable block ablating just
    /// that block; remaining cases ablate nothing.
    CoverOnce,
    /// Every case but the first ablates `k` blocks; block `j` is forced into
    /// case `1 + j mod (n-1)` so that each block is covered.
    RandomK(usize),
}

impl FromStr for AblationPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cover-once" => Ok(AblationPolicy::CoverOnce),
            "random-k" => Ok(AblationPolicy::RandomK(3)),
            _ => match s.strip_prefix("random-").and_then(|k| k.parse().ok()) {
                Some(k) => Ok(AblationPolicy::RandomK(k)),
                None => Err(format!("unknown ablation policy `{s}` (expected cover-once, random-k or random-<k>)")),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaseDesign {
    pub n_cases: usize,
    pub seed: u64,
    pub policy: AblationPolicy,
    pub frame_budget: u32,
    pub replicate_count: u32,
    /// Probability that a frame carries an input event.
    pub event_probability: f64,
    /// Inclusive range for int inputs.
    pub int_range: (i64, i64),
    pub float_range: (f64, f64),
}

impl Default for CaseDesign {
    fn default() -> Self {
        CaseDesign {
            n_cases: 200,
            seed: 42,
            policy: AblationPolicy::RandomK(3),
            frame_budget: 20,
            replicate_count: 10,
            event_probability: 0.5,
            int_range: (0, 15),
            float_range: (0.0, 1.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum CaseError {
    #[error("{n_cases} case(s) cannot cover every ablatable block; uncovered: {}", uncovered.join(", "))]
    Uncovered { n_cases: usize, uncovered: Vec<String> },
}

/// Random inputs for `frame` with the given parameter types.
pub fn random_inputs(rng: &mut ChaCha8Rng, params: &[Ty], design: &CaseDesign) -> Vec<InputEvent> {
    let mut events = Vec::new();
    for frame in 0..design.frame_budget {
        if !rng.gen_bool(design.event_probability.clamp(0.0, 1.0)) {
            continue;
        }
        let args = params
            .iter()
            .map(|t| match t {
                Ty::Float => Scalar::Float(rng.gen_range(design.float_range.0..=design.float_range.1)),
                Ty::Bool => Scalar::Bool(rng.gen_bool(0.5)),
                _ => Scalar::Int(rng.gen_range(design.int_range.0..=design.int_range.1)),
            })
            .collect();
        events.push(InputEvent { frame, args });
    }
    events
}

/// Design a deterministic list of cases that ablates every ablatable block
/// in at least one case and leaves it intact in at least one other.
pub fn generate_cases(map: &BlockMap, frame_params: &[Ty], design: &CaseDesign) -> Result<Vec<ExecutionCase>, CaseError> {
    let ablatable: Vec<String> = map.ablatable().into_iter().map(String::from).collect();
    let n = design.n_cases;
    let mut sets: Vec<BTreeSet<String>> = vec![BTreeSet::new(); n];
    let mut rng = ChaCha8Rng::seed_from_u64(design.seed);
    if !ablatable.is_empty() {
        match design.policy {
            AblationPolicy::CoverOnce => {
                if n < ablatable.len() + 1 {
                    return Err(CaseError::Uncovered { n_cases: n, uncovered: ablatable[n.saturating_sub(1)..].to_vec() });
                }
                for (j, b) in ablatable.iter().enumerate() {
                    sets[j + 1].insert(b.clone());
                }
            }
            AblationPolicy::RandomK(k) => {
                if n < 2 {
                    return Err(CaseError::Uncovered { n_cases: n, uncovered: ablatable.clone() });
                }
                for (j, b) in ablatable.iter().enumerate() {
                    sets[1 + j % (n - 1)].insert(b.clone());
                }
                let k = k.min(ablatable.len());
                for set in sets.iter_mut().skip(1) {
                    let extra = k.saturating_sub(set.len());
                    for b in ablatable.choose_multiple(&mut rng, extra) {
                        set.insert(b.clone());
                    }
                }
            }
        }
    }
    Ok(sets
        .into_iter()
        .enumerate()
        .map(|(i, ablated_blocks)| ExecutionCase {
            case_id: format!("case_{i:04}"),
            inputs: random_inputs(&mut rng, frame_params, design),
            ablated_blocks,
            replicate_count: design.replicate_count,
            frame_budget: design.frame_budget,
        })
        .collect())
}

/// Fresh cases with no ablation, for equivalence checks.
pub fn fresh_cases(frame_params: &[Ty], design: &CaseDesign, prefix: &str) -> Vec<ExecutionCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(design.seed);
    (0..design.n_cases)
        .map(|i| ExecutionCase {
            case_id: format!("{prefix}_{i:04}"),
            inputs: random_inputs(&mut rng, frame_params, design),
            ablated_blocks: BTreeSet::new(),
            replicate_count: design.replicate_count,
            frame_budget: design.frame_budget,
        })
        .collect()
}

pub fn logs_to_jsonl(logs: &[super::ExecutionLog]) -> String {
    let mut s = String::new();
    for l in logs {
        s.push_str(&serde_json::to_string(l).expect("serializable"));
        s.push('\n');
    }
    s
}

pub fn logs_from_jsonl(text: &str) -> Result<Vec<super::ExecutionLog>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::divide_blocks;
    use crate::lang::load;

    fn eight_blocks() -> BlockMap {
        let src = "void frame(int k){ if (k > 1) { emit_int(1); } if (k > 2) { emit_int(2); } if (k > 3) { emit_int(3); }
            if (k > 4) { emit_int(4); } else { emit_int(5); } for (int i = 0; i < k; i++) { emit_int(i); }
            while (k > 0) { k = k - 1; } switch (k) { case 0: emit_int(0); } }";
        divide_blocks(&load(src).unwrap())
    }

    #[test]
    fn every_block_is_ablated_and_kept_somewhere() {
        let map = eight_blocks();
        assert_eq!(map.ablatable().len(), 8);
        for policy in [AblationPolicy::CoverOnce, AblationPolicy::RandomK(3)] {
            let design = CaseDesign { n_cases: 16, policy, ..CaseDesign::default() };
            let cases = generate_cases(&map, &[Ty::Int], &design).unwrap();
            for b in map.ablatable() {
                assert!(cases.iter().any(|c| c.ablated_blocks.contains(b)));
                assert!(cases.iter().any(|c| !c.ablated_blocks.contains(b)));
            }
        }
    }

    #[test]
    fn one_case_cannot_cover() {
        let map = eight_blocks();
        let design = CaseDesign { n_cases: 1, policy: AblationPolicy::CoverOnce, ..CaseDesign::default() };
        let err = generate_cases(&map, &[Ty::Int], &design).unwrap_err();
        let CaseError::Uncovered { uncovered, .. } = err;
        assert_eq!(uncovered.len(), 8);
    }

    #[test]
    fn generation_is_deterministic() {
        let map = eight_blocks();
        let design = CaseDesign::default();
        assert_eq!(generate_cases(&map, &[Ty::Int], &design), generate_cases(&map, &[Ty::Int], &design));
        let other = CaseDesign { seed: 7, ..design.clone() };
        assert_ne!(generate_cases(&map, &[Ty::Int], &design), generate_cases(&map, &[Ty::Int], &other));
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("cover-once".parse(), Ok(AblationPolicy::CoverOnce));
        assert_eq!("random-5".parse(), Ok(AblationPolicy::RandomK(5)));
        assert!("sometimes".parse::<AblationPolicy>().is_err());
    }
}
