//! Parsing and lowering of the supported Solidity subset.

pub mod ast;
pub mod lexer;
pub mod model;
pub mod parser;
pub mod ssa;
