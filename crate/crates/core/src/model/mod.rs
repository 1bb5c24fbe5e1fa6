//! Operation-cost regression, identifiability analysis and k-fold validation.

mod metrics;
mod solve;

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocks::{total_op_counts, CountError, OpCountVector, OpKind, OperationDictionary};
use crate::energy::CaseEnergy;
use crate::interp::ExecutionLog;

pub use metrics::{nmae, pearson_r, MetricError};
pub use solve::{nnls, Solution, SolverConfig};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("dataset is empty")]
    Empty,
    #[error("row `{0}` has a different operation universe")]
    Universe(String),
    #[error("need at least {k} rows for {k}-fold validation, have {m}")]
    TooFewRows { m: usize, k: usize },
    #[error("no energy for case `{0}`")]
    MissingEnergy(String),
    #[error("net energy of case `{0}` is not finite")]
    NonFinite(String),
    #[error(transparent)]
    Count(#[from] CountError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataRow {
    pub case_id: String,
    pub counts: OpCountVector,
    #[serde(rename = "net_J")]
    pub net_j: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub op_universe: Vec<OpKind>,
    pub rows: Vec<DataRow>,
}

impl Dataset {
    pub fn new(rows: Vec<DataRow>) -> Result<Self, ModelError> {
        let first = rows.first().ok_or(ModelError::Empty)?;
        let op_universe = first.counts.universe.clone();
        for r in &rows {
            if r.counts.universe != op_universe || r.counts.counts.len() != op_universe.len() {
                return Err(ModelError::Universe(r.case_id.clone()));
            }
            if !r.net_j.is_finite() {
                return Err(ModelError::NonFinite(r.case_id.clone()));
            }
        }
        Ok(Dataset { op_universe, rows })
    }

    /// One row per successful log, joined with its measured energy by case id.
    pub fn from_runs(dict: &OperationDictionary, logs: &[ExecutionLog], energies: &[CaseEnergy]) -> Result<Self, ModelError> {
        let by_id: BTreeMap<&str, &CaseEnergy> = energies.iter().map(|e| (e.case_id.as_str(), e)).collect();
        let mut rows = Vec::new();
        for log in logs.iter().filter(|l| !l.is_failed()) {
            let e = by_id.get(log.case_id.as_str()).ok_or_else(|| ModelError::MissingEnergy(log.case_id.clone()))?;
            rows.push(DataRow { case_id: log.case_id.clone(), counts: total_op_counts(&log.block_counts, dict)?, net_j: e.net_j });
        }
        Dataset::new(rows)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Stacks datasets over the union of their universes; operations a
    /// source never saw count zero there. Case ids get `prefix[k]/`.
    pub fn pooled(parts: &[(&str, &Dataset)]) -> Result<Self, ModelError> {
        let universe: Vec<OpKind> =
            parts.iter().flat_map(|(_, d)| d.op_universe.iter().copied()).collect::<BTreeSet<_>>().into_iter().collect();
        let mut rows = Vec::new();
        for (prefix, d) in parts {
            for r in &d.rows {
                let counts = universe.iter().map(|op| r.counts.get(*op)).collect();
                rows.push(DataRow {
                    case_id: if prefix.is_empty() { r.case_id.clone() } else { format!("{prefix}/{}", r.case_id) },
                    counts: OpCountVector { universe: universe.clone(), counts },
                    net_j: r.net_j,
                });
            }
        }
        Dataset::new(rows)
    }

    fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset { op_universe: self.op_universe.clone(), rows: idx.iter().map(|&i| self.rows[i].clone()).collect() }
    }
}

/// Design matrix of operation counts and target vector of net energies in µJ.
pub fn assemble(ds: &Dataset) -> (DMatrix<f64>, DVector<f64>) {
    let m = ds.rows.len();
    let l = ds.op_universe.len();
    let n = DMatrix::from_fn(m, l, |i, j| ds.rows[i].counts.counts[j] as f64);
    let e = DVector::from_fn(m, |i, _| ds.rows[i].net_j * 1e6);
    (n, e)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ColumnAnalysis {
    /// Operations never executed in the data.
    pub never_executed: Vec<OpKind>,
    /// Operations whose cost is not determined by the data on its own.
    pub unidentifiable: Vec<OpKind>,
    /// Sets of operations that are collinear or nearly so. Only their combined
    /// contribution is reliable.
    pub groups: Vec<Vec<OpKind>>,
}

impl ColumnAnalysis {
    pub fn group_of(&self, op: OpKind) -> Option<&[OpKind]> {
        self.groups.iter().find(|g| g.contains(&op)).map(Vec::as_slice)
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, i: usize) -> usize {
        if self.0[i] != i {
            let r = self.find(self.0[i]);
            self.0[i] = r;
        }
        self.0[i]
    }
    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.0[a.max(b)] = a.min(b);
        }
    }
}

/// Finds never-executed and unidentifiable columns, and groups columns that
/// are correlated above `corr` or linked through the null space of `n`.
pub fn analyze_columns(n: &DMatrix<f64>, universe: &[OpKind], corr: f64) -> ColumnAnalysis {
    let (m, l) = n.shape();
    let live: Vec<usize> = (0..l).filter(|&j| n.column(j).iter().any(|v| *v != 0.0)).collect();
    let never_executed = (0..l).filter(|j| !live.contains(j)).map(|j| universe[j]).collect();
    let mut uf = UnionFind((0..l).collect());
    let mut unidentifiable = BTreeSet::new();

    if !live.is_empty() {
        let rows = m.max(live.len());
        let mut a = DMatrix::zeros(rows, live.len());
        for (k, &j) in live.iter().enumerate() {
            let c = n.column(j);
            let s = c.norm();
            for i in 0..m {
                a[(i, k)] = c[i] / s;
            }
        }
        let svd = a.svd(false, true);
        let vt = svd.v_t.expect("requested V");
        let smax = svd.singular_values.max();
        for (r, s) in svd.singular_values.iter().enumerate() {
            if *s > 1e-9 * smax {
                continue;
            }
            let touched: Vec<usize> = (0..live.len()).filter(|&k| vt[(r, k)].abs() > 1e-6).collect();
            for &k in &touched {
                unidentifiable.insert(live[k]);
                uf.union(live[touched[0]], live[k]);
            }
        }
        for (x, &i) in live.iter().enumerate() {
            for &j in &live[x + 1..] {
                if let Ok(r) = pearson_r(n.column(i).as_slice(), n.column(j).as_slice()) {
                    if r > corr {
                        uf.union(i, j);
                    }
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<OpKind>> = BTreeMap::new();
    for &j in &live {
        let r = uf.find(j);
        groups.entry(r).or_default().push(universe[j]);
    }
    ColumnAnalysis {
        never_executed,
        unidentifiable: unidentifiable.into_iter().map(|j| universe[j]).collect(),
        groups: groups.into_values().filter(|g| g.len() > 1).collect(),
    }
}

/// Non-negative least squares fit of per-operation costs (µJ).
pub fn fit(ds: &Dataset, cfg: &SolverConfig) -> Result<Solution, ModelError> {
    if ds.is_empty() {
        return Err(ModelError::Empty);
    }
    let (n, e) = assemble(ds);
    Ok(nnls(&n, &e, cfg))
}

fn predict_rows(ds: &Dataset, costs_uj: &[f64]) -> Vec<f64> {
    ds.rows
        .iter()
        .map(|r| r.counts.counts.iter().zip(costs_uj).map(|(n, c)| *n as f64 * c).sum::<f64>() * 1e-6)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold_index: usize,
    pub r_train: f64,
    pub r_valid: f64,
    pub nmae_train: f64,
    pub nmae_valid: f64,
}

impl FoldMetrics {
    /// Worst of training and validation accuracy, where accuracy = 1 − NMAE.
    pub fn min_accuracy(&self) -> f64 {
        1.0 - self.nmae_train.max(self.nmae_valid)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub metrics: FoldMetrics,
    pub validation_ids: Vec<String>,
    pub solution: Solution,
}

/// Seeded even partition of `m` indices into `k` folds.
pub fn partition(m: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..m).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = m / k + usize::from(f < m % k);
        let mut part = idx[start..start + size].to_vec();
        part.sort_unstable();
        out.push(part);
        start += size;
    }
    out
}

pub fn cross_validate(ds: &Dataset, k: usize, seed: u64, solver: &SolverConfig) -> Result<Vec<Fold>, ModelError> {
    let m = ds.len();
    if k < 2 || m < k {
        return Err(ModelError::TooFewRows { m, k: k.max(2) });
    }
    let parts = partition(m, k, seed);
    parts
        .par_iter()
        .enumerate()
        .map(|(f, valid)| {
            let train: Vec<usize> = (0..m).filter(|i| valid.binary_search(i).is_err()).collect();
            let (tr, va) = (ds.subset(&train), ds.subset(valid));
            let sol = fit(&tr, solver)?;
            let meas = |d: &Dataset| d.rows.iter().map(|r| r.net_j).collect::<Vec<_>>();
            let (ptr, pva) = (predict_rows(&tr, &sol.x), predict_rows(&va, &sol.x));
            let (mtr, mva) = (meas(&tr), meas(&va));
            let metrics = FoldMetrics {
                fold_index: f,
                r_train: pearson_r(&ptr, &mtr)?,
                r_valid: pearson_r(&pva, &mva)?,
                nmae_train: nmae(&ptr, &mtr)?,
                nmae_valid: nmae(&pva, &mva)?,
            };
            Ok(Fold { metrics, validation_ids: va.rows.iter().map(|r| r.case_id.clone()).collect(), solution: sol })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub accepted: bool,
    /// Round with the best validation accuracy (among accepting rounds when accepted).
    pub fold_index: usize,
    pub min_accuracy: f64,
}

/// Accepted iff every round's training and validation accuracy reaches `threshold`.
pub fn select_model(folds: &[FoldMetrics], threshold: f64) -> Option<Selection> {
    let min_accuracy = folds.iter().map(FoldMetrics::min_accuracy).fold(f64::INFINITY, f64::min);
    let best = folds.iter().min_by(|a, b| a.nmae_valid.total_cmp(&b.nmae_valid).then(a.fold_index.cmp(&b.fold_index)))?;
    Some(Selection { accepted: min_accuracy >= threshold, fold_index: best.fold_index, min_accuracy })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub k: usize,
    pub threshold: f64,
    pub group_correlation: f64,
    pub seed: u64,
    pub solver: SolverConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { k: 4, threshold: 0.85, group_correlation: 0.97, seed: 42, solver: SolverConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitMeta {
    pub solver: String,
    pub iterations: usize,
    pub residual_uj: f64,
    pub converged: bool,
    pub rows: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    #[serde(rename = "cost_uJ")]
    pub cost_uj: BTreeMap<OpKind, f64>,
    pub analysis: ColumnAnalysis,
    pub fit_meta: FitMeta,
    pub folds: Vec<FoldMetrics>,
    pub selected_fold: usize,
    pub accepted: bool,
    pub threshold: f64,
    pub seed: u64,
    pub config: FitConfig,
}

impl EnergyModel {
    /// A model holding the given costs, with no validation attached.
    pub fn from_costs(cost_uj: BTreeMap<OpKind, f64>) -> Self {
        EnergyModel {
            cost_uj,
            analysis: ColumnAnalysis::default(),
            fit_meta: FitMeta { solver: "given".into(), iterations: 0, residual_uj: 0.0, converged: true, rows: 0 },
            folds: vec![],
            selected_fold: 0,
            accepted: true,
            threshold: 0.0,
            seed: 0,
            config: FitConfig::default(),
        }
    }

    pub fn cost(&self, op: OpKind) -> Option<f64> {
        self.cost_uj.get(&op).copied()
    }

    /// Predicted energy in joules; errors list operations without a cost.
    pub fn predict_j(&self, counts: &OpCountVector) -> Result<f64, Vec<OpKind>> {
        let mut missing = vec![];
        let mut uj = 0.0;
        for (op, n) in counts.universe.iter().zip(&counts.counts) {
            match self.cost(*op) {
                Some(c) => uj += c * *n as f64,
                None if *n > 0 => missing.push(*op),
                None => {}
            }
        }
        if missing.is_empty() {
            Ok(uj * 1e-6)
        } else {
            Err(missing)
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("model serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, serde_json::Error> {
        EnergyModel::deserialize(v)
    }
}

/// Cross-validates, selects a round and packages its costs as a model.
pub fn build_model(ds: &Dataset, cfg: &FitConfig) -> Result<EnergyModel, ModelError> {
    let folds = cross_validate(ds, cfg.k, cfg.seed, &cfg.solver)?;
    let metrics: Vec<FoldMetrics> = folds.iter().map(|f| f.metrics.clone()).collect();
    let sel = select_model(&metrics, cfg.threshold).ok_or(ModelError::Empty)?;
    let chosen = &folds[sel.fold_index].solution;
    let (n, _) = assemble(ds);
    let analysis = analyze_columns(&n, &ds.op_universe, cfg.group_correlation);
    Ok(EnergyModel {
        cost_uj: ds.op_universe.iter().copied().zip(chosen.x.iter().copied()).collect(),
        analysis,
        fit_meta: FitMeta {
            solver: "projected-gradient-nnls".into(),
            iterations: chosen.iterations,
            residual_uj: chosen.residual,
            converged: chosen.converged,
            rows: ds.len() - folds[sel.fold_index].validation_ids.len(),
        },
        folds: metrics,
        selected_fold: sel.fold_index,
        accepted: sel.accepted,
        threshold: cfg.threshold,
        seed: cfg.seed,
        config: cfg.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::ops::GotoKind;

    fn ops(n: usize) -> Vec<OpKind> {
        [OpKind::BlockGoto(GotoKind::If), OpKind::BlockGoto(GotoKind::For), OpKind::MethodInvocation, OpKind::Not][..n].to_vec()
    }

    fn ds(counts: &[&[u64]], net: &[f64]) -> Dataset {
        let u = ops(counts[0].len());
        Dataset::new(
            counts
                .iter()
                .zip(net)
                .enumerate()
                .map(|(i, (c, e))| DataRow { case_id: format!("c{i}"), counts: OpCountVector { universe: u.clone(), counts: c.to_vec() }, net_j: *e })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn assemble_keeps_counts() {
        let d = ds(&[&[1, 0], &[0, 2]], &[1.0, 2.0]);
        let (n, e) = assemble(&d);
        assert_eq!(n, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]));
        assert_eq!(e[1], 2e6);
    }

    #[test]
    fn never_executed_column_flagged() {
        let d = ds(&[&[1, 0], &[2, 0], &[3, 0]], &[1.0, 2.0, 3.0]);
        let (n, _) = assemble(&d);
        let a = analyze_columns(&n, &d.op_universe, 0.97);
        assert_eq!(a.never_executed, vec![ops(2)[1]]);
    }

    #[test]
    fn collinear_columns_grouped() {
        let d = ds(&[&[1, 2, 5], &[2, 4, 1], &[3, 6, 2], &[1, 2, 7]], &[1.0, 2.0, 3.0, 4.0]);
        let (n, _) = assemble(&d);
        let a = analyze_columns(&n, &d.op_universe, 0.97);
        assert_eq!(a.groups, vec![ops(2)]);
        assert_eq!(a.unidentifiable, ops(2));
    }

    #[test]
    fn partition_covers_every_row_once() {
        let parts = partition(8, 4, 7);
        assert!(parts.iter().all(|p| p.len() == 2));
        let mut all: Vec<usize> = parts.concat();
        all.sort();
        assert_eq!(all, (0..8).collect::<Vec<_>>());
        assert_eq!(partition(10, 4, 1).iter().map(Vec::len).collect::<Vec<_>>(), vec![3, 3, 2, 2]);
    }

    #[test]
    fn perfect_linear_data_validates_perfectly() {
        let counts: Vec<Vec<u64>> = (0..12u64).map(|i| vec![i % 5 + 1, (i * 7) % 4 + 1, i % 3]).collect();
        let refs: Vec<&[u64]> = counts.iter().map(Vec::as_slice).collect();
        let net: Vec<f64> = counts.iter().map(|c| (c[0] as f64 * 6.7 + c[1] as f64 * 4.1 + c[2] as f64 * 14.0) * 1e-6).collect();
        let folds = cross_validate(&ds(&refs, &net), 4, 3, &SolverConfig::default()).unwrap();
        for f in &folds {
            assert!(f.metrics.nmae_valid < 1e-9 && f.metrics.r_valid > 1.0 - 1e-9, "{:?}", f.metrics);
        }
    }

    #[test]
    fn selection_threshold() {
        let m = |i, t, v| FoldMetrics { fold_index: i, r_train: 0.9, r_valid: 0.9, nmae_train: t, nmae_valid: v };
        let all_ten: Vec<_> = (0..4).map(|i| m(i, 0.10, 0.10)).collect();
        assert!(select_model(&all_ten, 0.85).unwrap().accepted);
        let mut one_bad = all_ten.clone();
        one_bad[2].nmae_valid = 0.20;
        assert!(!select_model(&one_bad, 0.85).unwrap().accepted);
        let reported = vec![m(0, 0.141, 0.093), m(1, 0.163, 0.157), m(2, 0.150, 0.120), m(3, 0.145, 0.110)];
        assert!(!select_model(&reported, 0.85).unwrap().accepted);
        let s = select_model(&reported, 0.83).unwrap();
        assert!(s.accepted);
        assert_eq!(s.fold_index, 0);
    }
}
