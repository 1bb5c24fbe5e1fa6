mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::{random_program, some_cases};
use enerlyze::accounting::{block_profiles, BlockCost, EnergyProfile};
use enerlyze::bench::Benchmark;
use enerlyze::blocks::{build_dictionary, divide_blocks, total_op_counts, OpKind};
use enerlyze::blocks::ops::GotoKind;
use enerlyze::energy::replicate_stats;
use enerlyze::interp::{ExecutionCase, Interpreter};
use enerlyze::lang::{load, pretty_print};
use enerlyze::model::{build_model, nnls, DataRow, Dataset, EnergyModel, FitConfig, SolverConfig};
use enerlyze::optimize::transform::{loop_unroll, reload};
use enerlyze::optimize::{apply, evaluate, find_costly_blocks, select_strategies, HotBlockPolicy, OptimizeConfig, Strategy};
use enerlyze::blocks::OpCountVector;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(100))]

    #[test]
    fn printed_programs_parse_back_to_the_same_tree(seed in any::<u64>()) {
        let text = random_program(seed);
        let cp = load(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        let printed = pretty_print(&cp);
        let again = load(&printed).map_err(|e| TestCaseError::fail(format!("{e}\n{printed}")))?;
        prop_assert_eq!(again.program(), cp.program());
        prop_assert_eq!(pretty_print(&again), printed);
    }

    #[test]
    fn block_counts_times_dictionary_equal_the_step_trace(seed in any::<u64>()) {
        let cp = load(&random_program(seed)).unwrap();
        let interp = Interpreter::new(&cp);
        let dict = build_dictionary(&cp, &interp.map);
        for case in some_cases(&cp, 3, seed) {
            let log = interp.run(&case).unwrap();
            prop_assert!(log.failed.is_none(), "{:?}", log.failed);
            let counted = total_op_counts(&log.block_counts, &dict).unwrap().as_map();
            prop_assert_eq!(counted, interp.step_trace(&case).unwrap());
        }
    }

    #[test]
    fn block_costs_sum_to_the_modeled_total(seed in any::<u64>(), salt in any::<u64>()) {
        let cp = load(&random_program(seed)).unwrap();
        let interp = Interpreter::new(&cp);
        let dict = build_dictionary(&cp, &interp.map);
        let costs: BTreeMap<OpKind, f64> = dict
            .op_universe
            .iter()
            .enumerate()
            .map(|(i, op)| (*op, 0.1 + ((salt.rotate_left(i as u32 * 7) % 1000) as f64) / 37.0))
            .collect();
        let model = EnergyModel::from_costs(costs);
        let case = &some_cases(&cp, 1, seed)[0];
        let log = interp.run(case).unwrap();
        let profile = block_profiles(&log, &dict, &model).unwrap();
        let total = model.predict_j(&total_op_counts(&log.block_counts, &dict).unwrap()).unwrap();
        let sum: f64 = profile.blocks.iter().map(|b| b.cost_j).sum();
        prop_assert!((sum - total).abs() <= 1e-9 * total.abs().max(1e-300), "{sum} vs {total}");
        prop_assert!((profile.total_j - total).abs() <= 1e-9 * total.abs().max(1e-300));
        let folded = profile.folded(&interp.map);
        let fsum: f64 = folded.blocks.iter().map(|b| b.cost_j).sum();
        prop_assert!((fsum - total).abs() <= 1e-9 * total.abs().max(1e-300));
    }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn fitted_costs_are_never_negative(
        rows in prop::collection::vec(prop::collection::vec(0u32..50, 4), 8..24),
        targets in prop::collection::vec(-500.0f64..2000.0, 24),
    ) {
        let m = rows.len();
        let n = DMatrix::from_fn(m, 4, |i, j| rows[i][j] as f64);
        let e = DVector::from_fn(m, |i, _| targets[i]);
        let sol = nnls(&n, &e, &SolverConfig::default());
        prop_assert!(sol.x.iter().all(|v| *v >= 0.0), "{:?}", sol.x);

        let universe = vec![
            OpKind::MethodInvocation,
            OpKind::BlockGoto(GotoKind::If),
            OpKind::BlockGoto(GotoKind::For),
            OpKind::Not,
        ];
        let data = Dataset::new(
            (0..m)
                .map(|i| DataRow {
                    case_id: format!("c{i}"),
                    counts: OpCountVector { universe: universe.clone(), counts: rows[i].iter().map(|c| *c as u64).collect() },
                    net_j: targets[i] * 1e-6,
                })
                .collect(),
        )
        .unwrap();
        let model = build_model(&data, &FitConfig::default()).unwrap();
        prop_assert!(model.cost_uj.values().all(|c| *c >= 0.0));
    }

    #[test]
    fn cv_does_not_depend_on_scale(
        energies in prop::collection::vec(0.01f64..10.0, 2..12),
        k in 1e-3f64..1e3,
    ) {
        let a = replicate_stats(&energies).unwrap().cv;
        let scaled: Vec<f64> = energies.iter().map(|e| e * k).collect();
        let b = replicate_stats(&scaled).unwrap().cv;
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1e-12), "{a} vs {b}");
    }

    #[test]
    fn share_policy_returns_exactly_the_blocks_above_threshold(
        costs in prop::collection::vec(0.0f64..5.0, 1..30),
        theta in 0.0f64..0.5,
    ) {
        let blocks: Vec<BlockCost> = costs
            .iter()
            .enumerate()
            .map(|(i, c)| BlockCost { id: format!("b{i}"), executions: 1, cost_j: *c, op_costs: BTreeMap::new() })
            .collect();
        let profile = EnergyProfile::from_blocks("p", blocks);
        prop_assume!(profile.total_j > 0.0);
        let got: BTreeSet<String> = find_costly_blocks(&profile, HotBlockPolicy::Share(theta)).into_iter().collect();
        let want: BTreeSet<String> =
            profile.blocks.iter().filter(|b| b.cost_j / profile.total_j > theta).map(|b| b.id.clone()).collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn unrolling_divides_loop_overhead_by_the_factor(
        trips in 1usize..40,
        f in prop::sample::select(vec![2usize, 4, 8]),
        stride in 1i64..4,
    ) {
        let n = trips * f;
        let src = format!(
            "global int acc;
            void frame() {{ for (int i = 0; i < {bound}; i = i + {stride}) {{ acc = acc + i * 3; emit_int(acc); }} }}",
            bound = n as i64 * stride
        );
        let cp = load(&src).unwrap();
        let map = divide_blocks(&cp);
        let unrolled = reload(&loop_unroll(&cp, &map, "frame().for_1", Some(f)).unwrap()).unwrap();
        let case = ExecutionCase::plain("u", 1);
        let before = Interpreter::new(&cp).run(&case).unwrap();
        let after = Interpreter::new(&unrolled).run(&case).unwrap();
        prop_assert_eq!(&before.output_digest, &after.output_digest);
        let count = |log: &enerlyze::interp::ExecutionLog, id: &str| log.block_counts.get(id).copied().unwrap_or(0);
        prop_assert_eq!(count(&before, "frame().for_1"), n as u64);
        prop_assert_eq!(count(&after, "frame().for_1"), (n / f) as u64);
        prop_assert_eq!(count(&after, "frame().for_1.update"), count(&before, "frame().for_1.update") / f as u64);
        prop_assert_eq!(count(&after, "frame().for_1.bool") - 1, (count(&before, "frame().for_1.bool") - 1) / f as u64);
        let goto = |cp: &enerlyze::lang::CheckedProgram, log: &enerlyze::interp::ExecutionLog| {
            let dict = build_dictionary(cp, &divide_blocks(cp));
            total_op_counts(&log.block_counts, &dict).unwrap().get(OpKind::BlockGoto(GotoKind::For))
        };
        prop_assert_eq!(goto(&unrolled, &after) * f as u64, goto(&cp, &before));
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn modeled_saving_equals_count_deltas_times_costs(
        salt in any::<u64>(),
        pick in 0usize..3,
    ) {
        let cp = Benchmark::Orbit.program();
        let map = divide_blocks(&cp);
        let strategy = [Strategy::LibraryReplacement, Strategy::LoopUnroll(Some(8)), Strategy::LoopInvariantMotion][pick];
        let cfg = OptimizeConfig::default();
        let seeded = EnergyModel::from_costs(enerlyze::sim::CostTable::seeded(&build_dictionary(&cp, &map).op_universe).cost_uj);
        let refactored = reload(&apply(strategy, &cp, &map, "blit().for_1", &seeded, &cfg).unwrap()).unwrap();
        let mut universe: BTreeSet<OpKind> = build_dictionary(&cp, &map).op_universe.into_iter().collect();
        universe.extend(build_dictionary(&refactored, &divide_blocks(&refactored)).op_universe);
        let costs: BTreeMap<OpKind, f64> = universe
            .into_iter()
            .enumerate()
            .map(|(i, op)| (op, 0.05 + ((salt.rotate_left(i as u32 % 64) % 997) as f64) / 61.0))
            .collect();
        let model = EnergyModel::from_costs(costs);
        let cases: Vec<ExecutionCase> = (0..3).map(|i| ExecutionCase::plain(format!("s{i}"), 4 + i)).collect();
        let ev = evaluate(&cp, &refactored, &model, &cases, &cfg.interp).unwrap();
        let from_deltas: f64 = ev
            .op_deltas
            .iter()
            .map(|(op, d)| *d as f64 * model.cost(op.parse().unwrap()).unwrap())
            .sum::<f64>()
            * 1e-6;
        let delta = ev.energy_after_j - ev.energy_before_j;
        prop_assert!((delta - from_deltas).abs() <= 1e-9 * ev.energy_before_j, "{delta} vs {from_deltas}");
    }
}

#[test]
fn strategy_selection_is_deterministic() {
    let cp = Benchmark::ClickMove.program();
    let map = divide_blocks(&cp);
    let model = EnergyModel::from_costs(enerlyze::sim::CostTable::seeded(&build_dictionary(&cp, &map).op_universe).cost_uj);
    let cfg = OptimizeConfig::default();
    let case = ExecutionCase::plain("profile", 8);
    let m = enerlyze::optimize::measure(&cp, &case, &model, &cfg.interp).unwrap();
    let blocks = find_costly_blocks(&m.profile, HotBlockPolicy::TopK(5));
    let run = || {
        blocks
            .iter()
            .map(|block| {
                let s = select_strategies(&cp, block, &m.profile, &Strategy::DEFAULT, &model, &case, &cfg).unwrap();
                let c: Vec<_> = s.candidates.iter().map(|c| (c.strategy, c.saving_j.to_bits(), pretty_print(&c.program))).collect();
                (c, format!("{:?}", s.refused))
            })
            .collect::<Vec<_>>()
    };
    let first = run();
    assert!(first.iter().any(|(c, _)| !c.is_empty()));
    for _ in 0..3 {
        assert_eq!(run(), first);
    }
}
