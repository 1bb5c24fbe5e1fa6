//! Apply individual refactoring strategies to the buffer-copy loop of the
//! Orbit benchmark, check each against the original and compare savings.

use enerlyze::bench::Benchmark;
use enerlyze::blocks::{build_dictionary, divide_blocks};
use enerlyze::interp::ExecutionCase;
use enerlyze::lang::pretty_print;
use enerlyze::model::EnergyModel;
use enerlyze::optimize::{apply, check_equivalence, measure, transform::reload, OptimizeConfig, Strategy};
use enerlyze::sim::CostTable;

fn main() {
    let cp = Benchmark::Orbit.program();
    let map = divide_blocks(&cp);
    let model = EnergyModel::from_costs(CostTable::seeded(&build_dictionary(&cp, &map).op_universe).cost_uj);
    let cfg = OptimizeConfig::default();
    let case = ExecutionCase::plain("profile", 20);
    let before = measure(&cp, &case, &model, &cfg.interp).expect("measure").energy_j;
    let cases: Vec<ExecutionCase> = (0..5).map(|i| ExecutionCase::plain(format!("eq{i}"), 10 + i)).collect();

    for s in [Strategy::LibraryReplacement, Strategy::LoopUnroll(Some(8)), Strategy::LoopInvariantMotion] {
        let p = match apply(s, &cp, &map, "blit().for_1", &model, &cfg) {
            Ok(p) => reload(&p).expect("valid rewrite"),
            Err(e) => {
                println!("{s}: not applicable ({})", e.0);
                continue;
            }
        };
        let after = measure(&p, &case, &model, &cfg.interp).expect("measure").energy_j;
        let verdict = check_equivalence(&cp, &p, &cases, &cfg.interp);
        println!("{s:<22} saves {:>5.1}%  equivalent: {}", 100.0 * (before - after) / before, verdict.pass);
        if s == Strategy::LibraryReplacement {
            let text = pretty_print(&p);
            let blit = text.split("void blit()").nth(1).and_then(|t| t.split("\n}\n").next()).unwrap_or_default();
            println!("  void blit(){blit}\n  }}");
        }
    }
}
