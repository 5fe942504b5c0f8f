//! The sLua type model: base types, fixed-shape tables, functions.

use std::sync::Arc;

/// Resolved type of a symbol, field or expression. Tables are referenced by
/// name so the registry stays cycle-free (the API types are self-referential:
/// `Actor` methods take `Actor` callbacks).
#[derive(Debug, Clone)]
pub enum TypeDescriptor {
    Number,
    Boolean,
    Str,
    Void,
    Table(String),
    Function(Arc<FunctionType>),
}

impl TypeDescriptor {
    pub fn table(name: &str) -> TypeDescriptor {
        TypeDescriptor::Table(name.to_string())
    }

    pub fn is_table(&self) -> bool {
        matches!(self, TypeDescriptor::Table(_))
    }

    pub fn is_function(&self) -> bool {
        matches!(self, TypeDescriptor::Function(_))
    }

    /// The type name as written in sLua type annotations. Functions render in
    /// the unnamed `(T,U)->R` form.
    pub fn display_name(&self) -> String {
        match self {
            TypeDescriptor::Number => "number".to_string(),
            TypeDescriptor::Boolean => "boolean".to_string(),
            TypeDescriptor::Str => "string".to_string(),
            TypeDescriptor::Void => "void".to_string(),
            TypeDescriptor::Table(name) => name.clone(),
            TypeDescriptor::Function(f) => f.display(),
        }
    }
}

impl PartialEq for TypeDescriptor {
    fn eq(&self, other: &Self) -> bool {
        use TypeDescriptor::*;
        match (self, other) {
            (Number, Number) | (Boolean, Boolean) | (Str, Str) | (Void, Void) => true,
            (Table(a), Table(b)) => a == b,
            (Function(a), Function(b)) => a.same_signature(b),
            _ => false,
        }
    }
}

impl Eq for TypeDescriptor {}

impl std::fmt::Display for TypeDescriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.display_name())
    }
}

/// Function signature. Parameter names are informational (used to bind
/// arguments in inline definitions); equality ignores them.
#[derive(Debug, Clone)]
pub struct FunctionType {
    pub params: Vec<(String, TypeDescriptor)>,
    pub ret: TypeDescriptor,
}

impl PartialEq for FunctionType {
    fn eq(&self, other: &Self) -> bool {
        self.same_signature(other)
    }
}

impl Eq for FunctionType {}

impl FunctionType {
    pub fn new(params: Vec<(String, TypeDescriptor)>, ret: TypeDescriptor) -> Arc<FunctionType> {
        Arc::new(FunctionType { params, ret })
    }

    pub fn param_types(&self) -> impl Iterator<Item = &TypeDescriptor> {
        self.params.iter().map(|(_, t)| t)
    }

    pub fn same_signature(&self, other: &FunctionType) -> bool {
        self.ret == other.ret
            && self.params.len() == other.params.len()
            && self
                .param_types()
                .zip(other.param_types())
                .all(|(a, b)| a == b)
    }

    pub fn display(&self) -> String {
        let params: Vec<String> = self.param_types().map(|t| t.display_name()).collect();
        format!("({}) -> {}", params.join(","), self.ret.display_name())
    }
}

#[derive(Debug, Clone)]
pub struct FieldInfo {
    pub ty: TypeDescriptor,
    pub mutable: bool,
    /// Meaningful only for table-initialization contexts.
    pub required: bool,
    pub doc: String,
}

/// A user-visible fixed-shape table type. Field order is declaration order.
#[derive(Debug, Clone)]
pub struct TableType {
    pub name: String,
    pub fields: Vec<(String, FieldInfo)>,
    /// Template types (the generic `Param`/`ParamData`) are specialized per
    /// effect and never appear in type annotations or symbol searches.
    pub template: bool,
}

impl TableType {
    pub fn new(name: &str) -> TableType {
        TableType {
            name: name.to_string(),
            fields: Vec::new(),
            template: false,
        }
    }

    pub fn field(&self, name: &str) -> Option<&FieldInfo> {
        self.fields.iter().find(|(n, _)| n == name).map(|(_, f)| f)
    }

    pub fn push_field(&mut self, name: &str, info: FieldInfo) {
        if let Some(slot) = self.fields.iter_mut().find(|(n, _)| n == name) {
            slot.1 = info;
        } else {
            self.fields.push((name.to_string(), info));
        }
    }
}
