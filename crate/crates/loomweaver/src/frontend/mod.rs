//! Frontend: DSL parsing, the program model, validation, and printing.
//!
//! The surface language keeps the algorithm (iterators, arrays, computes)
//! separate from the schedule (a block of primitive directives), so the
//! same algorithm can be re-optimized by editing the schedule alone.

pub mod ast;
mod lexer;
pub mod parser;
pub mod print;
pub mod validate;

pub use ast::*;
pub use parser::parse_program;
pub use print::print_function;
pub use validate::validate;
