//! Incremental semantic validation and constrained decoding for sLua.
//!
//! sLua is a strongly typed, semicolon-terminated Lua dialect with fixed-shape
//! tables and no nil or recursion. This crate parses sLua programs with full
//! semantic context through a dynamic tree of parsers, where each node owns an
//! incremental LR parser for one modular grammar enriched from the environment
//! (scopes, types, registered effects). From any program prefix the tree emits
//! a non-extensible regex describing every valid continuation, which drives:
//!
//! - `top::parse_program`: incremental validation of complete or partial programs
//! - `decode::generate`: constrained decoding against a logit oracle, with
//!   adaptive rejection sampling and token healing at regex boundaries
//! - `translate`: lowering validated programs to plain Lua with runtime guards
//!
//! The `cli` companion crate exposes these as `validate`, `generate`, `trace`
//! and `translate` subcommands.

pub mod decode;
pub mod env;
pub mod grammar;
pub mod nodes;
pub mod regex;
pub mod top;
pub mod translate;

pub use env::{Environment, TypeDescriptor};
pub use regex::{Dfa, RegexPattern};
pub use top::{parse_program, ParseOutcome, RootKind, TopRoot};
