//! Rank operations by cost and attribute a run's energy to blocks, then pick
//! hot blocks under both selection policies.

use enerlyze::accounting::{blocks_markdown, block_profiles};
use enerlyze::bench::Benchmark;
use enerlyze::blocks::{build_dictionary, divide_blocks};
use enerlyze::interp::{ExecutionCase, Interpreter};
use enerlyze::model::EnergyModel;
use enerlyze::optimize::{find_costly_blocks, HotBlockPolicy};
use enerlyze::sim::CostTable;

fn main() {
    let cp = Benchmark::Waves.program();
    let map = divide_blocks(&cp);
    let dict = build_dictionary(&cp, &map);
    let model = EnergyModel::from_costs(CostTable::seeded(&dict.op_universe).cost_uj);

    println!("most expensive operations:");
    for (op, c) in enerlyze::accounting::rank_operations(&model).iter().take(5) {
        println!("  {:<24} {c:>6.2} µJ", op.to_string());
    }

    let log = Interpreter::new(&cp).run(&ExecutionCase::plain("profile", 20)).expect("run");
    let profile = block_profiles(&log, &dict, &model).expect("profile").folded(&map);
    println!("\n{}", blocks_markdown(&profile, 5));
    println!("top 3:       {:?}", find_costly_blocks(&profile, HotBlockPolicy::TopK(3)));
    println!("share > 10%: {:?}", find_costly_blocks(&profile, HotBlockPolicy::Share(0.10)));
}
