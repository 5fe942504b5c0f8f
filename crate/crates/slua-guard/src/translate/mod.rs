//! Program AST, canonical rendering, and translation to executable Lua.

mod ast;
mod lua;
mod render;
mod safety;

pub use ast::{AstNode, Link};
pub use lua::{translate_to_lua, LOOP_CAP};
pub use render::render_slua;
pub use safety::{verify_safety_shape, SafetyReport, Violation};

#[cfg(test)]
mod tests;
