//! The concrete node-kind library: one parser-node kind per modular grammar,
//! with the spawn, filter and merge logic that wires semantic context into
//! each instantiation.

mod expr;
mod field;
mod node;
mod templates;

pub use expr::Part;
pub use field::{FieldCandidate, FieldLeaf, Follow};
pub use node::{make_block, make_effect_root, make_talent_root, make_typed_exp, sanitize_effect_id, NodeCtx, ParserNode, PrefixState, RoleSpec};
pub use templates::*;

use crate::env::{Environment, ScopeKind, TypeDescriptor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Block,
    DoBlock,
    IfBlock,
    WhileBlock,
    ForBlock,
    Assignment,
    LocalVarDef,
    ReturnStat,
    TypeSpec,
    PrefixExp,
    ArgList,
    NumExp,
    StrExp,
    BoolExp,
    FuncExp,
    TableExp,
    EffectRoot,
    TalentRoot,
    Field,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrefixVariant {
    Expression,
    MutableLvalue,
    CallStatement,
    /// One child tracking several candidate result types at once, resolved
    /// by its end symbol.
    Union,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExprRole {
    Num,
    Str,
    Bool,
}

/// Stack of lexical scopes carried by each parser node. Nodes clone the
/// stack when spawning children, so speculative tree branches see their own
/// view and pruning can never corrupt a sibling's bindings. The session
/// environment contributes the root bindings (API globals).
#[derive(Debug, Clone, Default)]
pub struct ScopeStack {
    frames: Vec<(ScopeKind, Vec<(String, TypeDescriptor)>)>,
}

impl ScopeStack {
    pub fn from_env(env: &Environment) -> ScopeStack {
        ScopeStack {
            frames: vec![(ScopeKind::Root, env.visible_symbols())],
        }
    }

    pub fn push(&mut self, kind: ScopeKind) {
        self.frames.push((kind, Vec::new()));
    }

    pub fn declare(&mut self, name: &str, ty: TypeDescriptor) {
        let frame = self.frames.last_mut().expect("scope stack never empty");
        if let Some(slot) = frame.1.iter_mut().find(|(n, _)| n == name) {
            slot.1 = ty;
        } else {
            frame.1.push((name.to_string(), ty));
        }
    }

    /// Visible bindings after shadowing, sorted by name.
    pub fn visible(&self) -> Vec<(String, TypeDescriptor)> {
        self.visible_with_mutability()
            .into_iter()
            .map(|(n, t, _)| (n, t))
            .collect()
    }

    /// Visible bindings with their assignability: locals are mutable, the
    /// root bindings (API globals) are not.
    pub fn visible_with_mutability(&self) -> Vec<(String, TypeDescriptor, bool)> {
        let mut merged: std::collections::BTreeMap<String, (TypeDescriptor, bool)> =
            std::collections::BTreeMap::new();
        for (kind, symbols) in &self.frames {
            let mutable = !matches!(kind, ScopeKind::Root);
            for (name, ty) in symbols {
                merged.insert(name.clone(), (ty.clone(), mutable));
            }
        }
        merged
            .into_iter()
            .map(|(n, (t, m))| (n, t, m))
            .collect()
    }

    pub fn current_fn_ret(&self) -> Option<&TypeDescriptor> {
        self.frames.iter().rev().find_map(|(kind, _)| match kind {
            ScopeKind::Function(ret) => Some(ret),
            _ => None,
        })
    }

    pub fn break_allowed(&self) -> bool {
        for (kind, _) in self.frames.iter().rev() {
            match kind {
                ScopeKind::Loop => return true,
                ScopeKind::Function(_) => return false,
                _ => {}
            }
        }
        false
    }
}

/// Keywords that receive a trailing whitespace in emitted regexes so a
/// keyword can never fuse with an identifier that has it as a prefix.
pub fn keyword_spacing(keyword: &str) -> Option<String> {
    match keyword {
        "do" | "if" | "for" | "while" | "local" | "not" => Some(format!("{keyword}\\s")),
        _ => None,
    }
}

/// Pick the placeholder a finished union-type prefix expression stands for,
/// from its resolved type and the end symbol it consumed.
pub fn resolve_finish_placeholder(
    resolved: &TypeDescriptor,
    end_lexeme: &str,
    roles: &[(ExprRole, Vec<String>)],
) -> Option<&'static str> {
    let ends_of = |role: ExprRole| -> Option<&Vec<String>> {
        roles.iter().find(|(r, _)| *r == role).map(|(_, e)| e)
    };
    if *resolved == TypeDescriptor::Number {
        if let Some(ends) = ends_of(ExprRole::Num) {
            if ends.iter().any(|e| e == end_lexeme) {
                return Some("<NUM_PREFIX_EXP>");
            }
        }
    }
    if *resolved == TypeDescriptor::Str {
        if let Some(ends) = ends_of(ExprRole::Str) {
            if ends.iter().any(|e| e == end_lexeme) {
                return Some("<STR_PREFIX_EXP>");
            }
        }
    }
    // truthiness: any type can close as a boolean atom
    if let Some(ends) = ends_of(ExprRole::Bool) {
        if ends.iter().any(|e| e == end_lexeme) {
            return Some("<BOOL_PREFIX_EXP>");
        }
    }
    None
}
