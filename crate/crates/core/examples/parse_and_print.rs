//! Parse a program, type-check it, print it back in canonical form and show
//! how errors carry a line and column.

use enerlyze::lang::{dump::program_to_json, load, pretty_print};

const SOURCE: &str = "
record Ball { float x; float vx; }
global Object ball;
void init() { ball = new Ball(); ball.vx = 0.5; }
void frame(float dt) {
    ball.x = ball.x + ball.vx * dt;
    if (ball.x > 10.0) { ball.vx = -ball.vx; }
    emit_float(ball.x);
}";

fn main() {
    let program = load(SOURCE).expect("valid program");
    println!("{}", pretty_print(&program));

    let ast = program_to_json(&program);
    println!("AST has {} methods", ast["methods"].as_array().map_or(0, |m| m.len()));

    // Printing is a fixed point: reparsing the output gives the same program.
    let again = load(&pretty_print(&program)).expect("printed source parses");
    assert_eq!(pretty_print(&again), pretty_print(&program));

    let err = load("void frame() { int x = 1 + ; }").unwrap_err();
    println!("error at {:?}: {err}", err.span());
}
