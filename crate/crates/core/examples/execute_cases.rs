//! Generate execution cases with block ablation, run them, and check that
//! block counts times the dictionary equal a per-step operation trace.

use enerlyze::bench::Benchmark;
use enerlyze::blocks::{build_dictionary, divide_blocks, total_op_counts};
use enerlyze::interp::{generate_cases, CaseDesign, Interpreter};

fn main() {
    let cp = Benchmark::ClickMove.program();
    let map = divide_blocks(&cp);
    let dict = build_dictionary(&cp, &map);
    let interp = Interpreter::with_map(&cp, map.clone());
    let params = interp.frame_params().expect("frame entry").to_vec();
    let design = CaseDesign { n_cases: 8, ..CaseDesign::default() };
    let cases = generate_cases(&map, &params, &design).expect("cases");

    for case in &cases {
        let log = interp.run(case).expect("run");
        if let Some(f) = &log.failed {
            // Ablating a guard can make a run trap; such runs are dropped from training.
            println!("{}: {} ablated, trapped: {} in {}", case.case_id, case.ablated_blocks.len(), f.message, f.block);
            continue;
        }
        let totals = total_op_counts(&log.block_counts, &dict).expect("counts").as_map();
        let traced = interp.step_trace(case).expect("trace");
        println!(
            "{}: {} ablated, {} steps, {:.3} ms, digest {}..., dictionary == trace: {}",
            case.case_id,
            case.ablated_blocks.len(),
            log.step_count,
            log.duration_s * 1e3,
            &log.output_digest[..12],
            totals == traced
        );
    }
}
