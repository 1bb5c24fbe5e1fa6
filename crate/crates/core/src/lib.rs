//! Source-level energy accounting for a small imperative language.

pub mod accounting;
pub mod bench;
pub mod blocks;
pub mod cli;
pub mod energy;
pub mod interp;
pub mod lang;
pub mod model;
pub mod optimize;
pub mod pipeline;
pub mod sim;
