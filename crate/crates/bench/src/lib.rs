//! Shared inputs for the benchmarks.

use hoare2ri::whilelang::{parse_program, WhileAst};

/// The summation tableau shipped in `fixtures/`.
pub const SUM_TABLEAU: &str = include_str!("../../../fixtures/sum.whl");

/// The nested-loop tableau shipped in `fixtures/`.
pub const NESTED_TABLEAU: &str = include_str!("../../../fixtures/nested.whl");

pub fn load(src: &str) -> WhileAst {
    parse_program(src).expect("fixture parses")
}
