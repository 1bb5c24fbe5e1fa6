//! Divide a program into logged blocks and count the energy operations in
//! each one.

use enerlyze::blocks::{build_dictionary, divide_blocks};
use enerlyze::lang::load;

const SOURCE: &str = "
global Object data;
void init() { data = buffer_new(8); }
int sum() {
    int s = 0;
    for (int i = 0; i < buffer_limit(data); i++) {
        if (i > 2) { s = s + 1; } else { s = s + 2; }
    }
    return s;
}
void frame(int k) { emit_int(sum() + k); }";

fn main() {
    let cp = load(SOURCE).expect("valid program");
    let map = divide_blocks(&cp);
    let dict = build_dictionary(&cp, &map);
    for i in 0..map.len() {
        let id = map.id(i);
        let row = dict.row(id).cloned().unwrap_or_default();
        let ops: Vec<String> = row.iter().map(|(op, n)| format!("{op}x{n}")).collect();
        let ablatable = if map.get(id).is_some_and(|b| b.kind.is_ablatable()) { " (ablatable)" } else { "" };
        println!("{id:<22}{ablatable:<13} {}", ops.join(" "));
    }
    println!("\n{}", dict.to_csv().lines().next().unwrap_or_default());
}
