//! Semantic context: scope stack, type registry and effect registry.
//!
//! The environment is the single source of semantic truth while parsing. It
//! tracks scopes and the symbols in each scope, the registered table types
//! (API types plus per-effect specializations), and which effects exist. It
//! is session-local and single-owner; parser nodes receive it by reference.

mod api;
mod signature;
pub(crate) mod trace;
mod types;

pub use api::{load_api_spec, parse_api_spec, ApiError, ApiSpec};
pub use signature::{parse_type_ref, parse_type_signature};
pub use trace::{enumerate_candidate_symbols, trace_types, TraceVariant};
pub use types::{FieldInfo, FunctionType, TableType, TypeDescriptor};

use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("cannot exit the root scope")]
    PopRoot,
    #[error("invalid symbol name '{0}'")]
    BadName(String),
    #[error("duplicate effect id '{0}'")]
    DuplicateEffect(String),
    #[error("unknown type '{0}'")]
    UnknownType(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScopeKind {
    Root,
    Block,
    Loop,
    /// Function body scope; carries the declared return type (possibly Void).
    Function(TypeDescriptor),
}

#[derive(Debug, Clone)]
struct Scope {
    kind: ScopeKind,
    symbols: BTreeMap<String, TypeDescriptor>,
}

#[derive(Debug, Clone)]
pub struct Environment {
    scopes: Vec<Scope>,
    types: BTreeMap<String, TableType>,
    /// effect id -> name of its specialized ParamData table type
    effects: BTreeMap<String, String>,
    /// set while parsing a talent definition; gates `GetTalentLevel`
    pub in_talent: bool,
    /// bumped on every type-registry change; keys reachability memos
    types_version: u64,
}

impl Default for Environment {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment {
    pub fn new() -> Environment {
        Environment {
            scopes: vec![Scope {
                kind: ScopeKind::Root,
                symbols: BTreeMap::new(),
            }],
            types: BTreeMap::new(),
            effects: BTreeMap::new(),
            in_talent: false,
            types_version: 0,
        }
    }

    pub fn enter_scope(&mut self, kind: ScopeKind) {
        self.scopes.push(Scope {
            kind,
            symbols: BTreeMap::new(),
        });
    }

    pub fn exit_scope(&mut self) -> Result<(), EnvError> {
        if self.scopes.len() <= 1 {
            return Err(EnvError::PopRoot);
        }
        self.scopes.pop();
        Ok(())
    }

    pub fn scope_depth(&self) -> usize {
        self.scopes.len()
    }

    pub fn declare_symbol(&mut self, name: &str, ty: TypeDescriptor) -> Result<(), EnvError> {
        if !valid_symbol_name(name) {
            return Err(EnvError::BadName(name.to_string()));
        }
        self.scopes
            .last_mut()
            .unwrap()
            .symbols
            .insert(name.to_string(), ty);
        Ok(())
    }

    /// Innermost-first resolution.
    pub fn lookup(&self, name: &str) -> Option<&TypeDescriptor> {
        self.scopes
            .iter()
            .rev()
            .find_map(|scope| scope.symbols.get(name))
    }

    /// Visible symbols after shadowing, sorted by name.
    pub fn visible_symbols(&self) -> Vec<(String, TypeDescriptor)> {
        let mut merged: BTreeMap<String, TypeDescriptor> = BTreeMap::new();
        for scope in &self.scopes {
            for (name, ty) in &scope.symbols {
                merged.insert(name.clone(), ty.clone());
            }
        }
        merged.into_iter().collect()
    }

    /// Return type of the innermost enclosing function scope.
    pub fn current_function_ret(&self) -> Option<&TypeDescriptor> {
        self.scopes.iter().rev().find_map(|s| match &s.kind {
            ScopeKind::Function(ret) => Some(ret),
            _ => None,
        })
    }

    /// `break` is legal iff a loop scope encloses us with no function
    /// definition in between.
    pub fn break_allowed(&self) -> bool {
        for scope in self.scopes.iter().rev() {
            match scope.kind {
                ScopeKind::Loop => return true,
                ScopeKind::Function(_) => return false,
                _ => {}
            }
        }
        false
    }

    pub fn register_type(&mut self, table: TableType) {
        self.types.insert(table.name.clone(), table);
        self.types_version = next_types_version();
    }

    pub fn remove_type(&mut self, name: &str) {
        self.types.remove(name);
        self.types_version = next_types_version();
    }

    pub fn types_version(&self) -> u64 {
        self.types_version
    }

    pub fn table(&self, name: &str) -> Option<&TableType> {
        self.types.get(name)
    }

    pub fn table_mut(&mut self, name: &str) -> Option<&mut TableType> {
        self.types.get_mut(name)
    }

    pub fn has_type(&self, name: &str) -> bool {
        self.types.contains_key(name)
    }

    /// Non-template table types, sorted by name.
    pub fn named_tables(&self) -> impl Iterator<Item = &TableType> {
        self.types.values().filter(|t| !t.template)
    }

    /// Every registered table type, templates included.
    pub fn all_tables(&self) -> impl Iterator<Item = (&String, &TableType)> {
        self.types.iter()
    }

    pub fn effect_ids(&self) -> Vec<String> {
        self.effects.keys().cloned().collect()
    }

    pub fn effect_param_data(&self, id: &str) -> Option<&str> {
        self.effects.get(id).map(String::as_str)
    }

    /// Register a parsed effect: specialize the parameter types and expose
    /// `g_effects.<id>` with `Apply`, `WhenExists` and `Remove`.
    pub fn register_effect(
        &mut self,
        id: &str,
        param_fields: Vec<(String, TypeDescriptor)>,
    ) -> Result<(), EnvError> {
        if !valid_symbol_name(id) {
            return Err(EnvError::BadName(id.to_string()));
        }
        if self.effects.contains_key(id) {
            return Err(EnvError::DuplicateEffect(id.to_string()));
        }
        let param_data_name = format!("ParamData_{id}");
        let param_name = format!("Param_{id}");

        let mut param_data = TableType::new(&param_data_name);
        for (name, ty) in param_fields {
            param_data.push_field(
                &name,
                FieldInfo {
                    ty,
                    mutable: true,
                    required: true,
                    doc: String::new(),
                },
            );
        }

        let mut param = TableType::new(&param_name);
        param.push_field(
            "duration",
            FieldInfo {
                ty: TypeDescriptor::Number,
                mutable: true,
                required: true,
                doc: "duration of the effect".to_string(),
            },
        );
        param.push_field(
            "owner",
            FieldInfo {
                ty: TypeDescriptor::table("Actor"),
                mutable: false,
                required: true,
                doc: "the actor that receives the effect".to_string(),
            },
        );
        param.push_field(
            "data",
            FieldInfo {
                ty: TypeDescriptor::table(&param_data_name),
                mutable: false,
                required: true,
                doc: "effect state".to_string(),
            },
        );

        let entry_name = format!("Effect_{id}");
        let mut entry = TableType::new(&entry_name);
        entry.push_field(
            "Apply",
            FieldInfo {
                ty: TypeDescriptor::Function(FunctionType::new(
                    vec![
                        ("target".to_string(), TypeDescriptor::table("Actor")),
                        ("data".to_string(), TypeDescriptor::table(&param_data_name)),
                        ("duration".to_string(), TypeDescriptor::Number),
                    ],
                    TypeDescriptor::Void,
                )),
                mutable: false,
                required: false,
                doc: "apply the effect to the target".to_string(),
            },
        );
        entry.push_field(
            "WhenExists",
            FieldInfo {
                ty: TypeDescriptor::Function(FunctionType::new(
                    vec![
                        ("target".to_string(), TypeDescriptor::table("Actor")),
                        (
                            "fn".to_string(),
                            TypeDescriptor::Function(FunctionType::new(
                                vec![("param".to_string(), TypeDescriptor::table(&param_name))],
                                TypeDescriptor::Void,
                            )),
                        ),
                    ],
                    TypeDescriptor::Boolean,
                )),
                mutable: false,
                required: false,
                doc: "apply fn to the effect param if present".to_string(),
            },
        );
        entry.push_field(
            "Remove",
            FieldInfo {
                ty: TypeDescriptor::Function(FunctionType::new(
                    vec![("target".to_string(), TypeDescriptor::table("Actor"))],
                    TypeDescriptor::Boolean,
                )),
                mutable: false,
                required: false,
                doc: "remove the effect from the target".to_string(),
            },
        );

        self.register_type(param_data);
        self.register_type(param);
        self.register_type(entry);

        if let Some(table) = self.types.get_mut("GlobalEffectTable") {
            table.push_field(
                id,
                FieldInfo {
                    ty: TypeDescriptor::table(&entry_name),
                    mutable: false,
                    required: false,
                    doc: String::new(),
                },
            );
        }
        self.effects.insert(id.to_string(), param_data_name);
        Ok(())
    }
}

/// Registry versions are globally unique so memo entries from one session
/// can never alias another session's registry state.
fn next_types_version() -> u64 {
    use std::sync::atomic::{AtomicU64, Ordering};
    static COUNTER: AtomicU64 = AtomicU64::new(1);
    COUNTER.fetch_add(1, Ordering::Relaxed)
}

pub fn valid_symbol_name(name: &str) -> bool {
    let bytes = name.as_bytes();
    if bytes.is_empty() || bytes.len() > 50 {
        return false;
    }
    (bytes[0].is_ascii_alphabetic() || bytes[0] == b'_')
        && bytes[1..]
            .iter()
            .all(|&b| b.is_ascii_alphanumeric() || b == b'_')
}

#[cfg(test)]
mod tests;
