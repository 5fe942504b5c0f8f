//! Declarative scripting-API documents.
//!
//! The loader accepts a restricted, indentation-based key/value format that
//! mirrors the API documentation layout:
//!
//! ```text
//! Actor:
//!   doc: "A game actor."
//!   fields:
//!     health: |
//!       number
//!       Current health.
//!     UpdateHealth: |
//!       (delta: number) -> void
//!       Update the health by `delta`.
//!   mutable: some_field, other_field
//!   required: name
//!
//! globals:
//!   g_math: GlobalMath
//! ```
//!
//! Each field value is a block whose first line is the type: either a bare
//! type name or a named-parameter function signature. Remaining lines are
//! documentation. `template: "true"` marks generic types (`Param`,
//! `ParamData`) that are specialized per effect and hidden from symbol
//! searches.

use super::signature::{parse_type_ref, parse_type_signature};
use super::types::{FieldInfo, TableType, TypeDescriptor};
use super::Environment;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("api spec parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown type '{0}'")]
    UnknownType(String),
    #[error("bad signature: {0}")]
    Signature(String),
    #[error("field '{field}' of '{ty}': {source}")]
    Field {
        ty: String,
        field: String,
        #[source]
        source: Box<ApiError>,
    },
    #[error("duplicate type '{0}'")]
    DuplicateType(String),
    #[error("global '{0}' references unknown type '{1}'")]
    DanglingGlobal(String, String),
}

#[derive(Debug, Clone)]
pub struct ApiField {
    pub name: String,
    /// First line of the field block: a type name or a function signature.
    pub signature: String,
    pub doc: String,
}

#[derive(Debug, Clone)]
pub struct ApiType {
    pub name: String,
    pub doc: String,
    pub template: bool,
    pub fields: Vec<ApiField>,
    pub mutable: Vec<String>,
    pub required: Vec<String>,
}

/// Machine-readable API description: table types plus global bindings.
#[derive(Debug, Clone, Default)]
pub struct ApiSpec {
    pub types: Vec<ApiType>,
    pub globals: Vec<(String, String)>,
}

pub fn parse_api_spec(text: &str) -> Result<ApiSpec, ApiError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut spec = ApiSpec::default();
    let mut i = 0usize;

    let err = |line: usize, message: &str| ApiError::Parse {
        line: line + 1,
        message: message.to_string(),
    };

    while i < lines.len() {
        let line = lines[i];
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            i += 1;
            continue;
        }
        if indent_of(line) != 0 {
            return Err(err(i, "expected a top-level name"));
        }
        let (name, rest) = split_key(line).ok_or_else(|| err(i, "expected 'name:'"))?;
        i += 1;
        if name == "globals" {
            if !rest.is_empty() {
                return Err(err(i - 1, "globals takes a block"));
            }
            while i < lines.len() && (lines[i].trim().is_empty() || indent_of(lines[i]) > 0) {
                if lines[i].trim().is_empty() {
                    i += 1;
                    continue;
                }
                let (gname, gty) =
                    split_key(lines[i]).ok_or_else(|| err(i, "expected 'global: Type'"))?;
                if gty.is_empty() {
                    return Err(err(i, "global needs a type name"));
                }
                spec.globals.push((gname, unquote(&gty)));
                i += 1;
            }
        } else {
            let mut ty = ApiType {
                name,
                doc: String::new(),
                template: false,
                fields: Vec::new(),
                mutable: Vec::new(),
                required: Vec::new(),
            };
            while i < lines.len() && (lines[i].trim().is_empty() || indent_of(lines[i]) > 0) {
                if lines[i].trim().is_empty() {
                    i += 1;
                    continue;
                }
                let indent = indent_of(lines[i]);
                let (key, value) = split_key(lines[i]).ok_or_else(|| err(i, "expected 'key:'"))?;
                match key.as_str() {
                    "doc" => {
                        if value == "|" {
                            let (block, next) = read_block(&lines, i + 1, indent)?;
                            ty.doc = block.join("\n");
                            i = next;
                        } else {
                            ty.doc = unquote(&value);
                            i += 1;
                        }
                    }
                    "template" => {
                        ty.template = unquote(&value) == "true";
                        i += 1;
                    }
                    "mutable" => {
                        ty.mutable = name_list(&value);
                        i += 1;
                    }
                    "required" => {
                        ty.required = name_list(&value);
                        i += 1;
                    }
                    "fields" => {
                        i += 1;
                        while i < lines.len()
                            && (lines[i].trim().is_empty() || indent_of(lines[i]) > indent)
                        {
                            if lines[i].trim().is_empty() {
                                i += 1;
                                continue;
                            }
                            let findent = indent_of(lines[i]);
                            let (fname, fvalue) =
                                split_key(lines[i]).ok_or_else(|| err(i, "expected a field"))?;
                            if fvalue == "|" {
                                let (block, next) = read_block(&lines, i + 1, findent)?;
                                if block.is_empty() {
                                    return Err(err(i, "field block is empty"));
                                }
                                ty.fields.push(ApiField {
                                    name: fname,
                                    signature: block[0].trim().to_string(),
                                    doc: block[1..].join("\n"),
                                });
                                i = next;
                            } else if !fvalue.is_empty() && !fvalue.starts_with('"') {
                                ty.fields.push(ApiField {
                                    name: fname,
                                    signature: fvalue,
                                    doc: String::new(),
                                });
                                i += 1;
                            } else {
                                return Err(err(
                                    i,
                                    "field value must be a type line or a '|' block starting with one",
                                ));
                            }
                        }
                    }
                    other => return Err(err(i, &format!("unknown key '{other}'"))),
                }
            }
            spec.types.push(ty);
        }
    }
    Ok(spec)
}

fn indent_of(line: &str) -> usize {
    line.len() - line.trim_start().len()
}

fn split_key(line: &str) -> Option<(String, String)> {
    let t = line.trim();
    let colon = t.find(':')?;
    let name = t[..colon].trim();
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return None;
    }
    Some((name.to_string(), t[colon + 1..].trim().to_string()))
}

fn unquote(s: &str) -> String {
    let t = s.trim();
    if t.len() >= 2 && t.starts_with('"') && t.ends_with('"') {
        t[1..t.len() - 1].to_string()
    } else {
        t.to_string()
    }
}

fn name_list(s: &str) -> Vec<String> {
    s.split([',', ' '])
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(String::from)
        .collect()
}

fn read_block(
    lines: &[&str],
    start: usize,
    key_indent: usize,
) -> Result<(Vec<String>, usize), ApiError> {
    let mut out = Vec::new();
    let mut i = start;
    let mut block_indent = None;
    while i < lines.len() {
        let line = lines[i];
        if line.trim().is_empty() {
            if block_indent.is_some() {
                out.push(String::new());
            }
            i += 1;
            continue;
        }
        let ind = indent_of(line);
        if ind <= key_indent {
            break;
        }
        let bi = *block_indent.get_or_insert(ind);
        out.push(line[bi.min(ind)..].to_string());
        i += 1;
    }
    while matches!(out.last(), Some(l) if l.is_empty()) {
        out.pop();
    }
    Ok((out, i))
}

/// Register every type and global from `spec` into the environment.
///
/// Types are installed in two passes so fields may reference any type in the
/// document, including their own.
pub fn load_api_spec(env: &mut Environment, spec: &ApiSpec) -> Result<(), ApiError> {
    for ty in &spec.types {
        if env.has_type(&ty.name) {
            return Err(ApiError::DuplicateType(ty.name.clone()));
        }
        let mut table = TableType::new(&ty.name);
        table.template = ty.template;
        env.register_type(table);
    }

    for ty in &spec.types {
        for field in &ty.fields {
            let parsed = if field.signature.trim_start().starts_with('(') {
                parse_type_signature(env, &field.signature).map(TypeDescriptor::Function)
            } else {
                parse_type_ref(env, &field.signature)
            };
            let field_ty = parsed.map_err(|e| ApiError::Field {
                ty: ty.name.clone(),
                field: field.name.clone(),
                source: Box::new(e),
            })?;
            let info = FieldInfo {
                ty: field_ty,
                mutable: ty.mutable.iter().any(|m| m == &field.name),
                required: ty.required.iter().any(|r| r == &field.name),
                doc: field.doc.clone(),
            };
            env.table_mut(&ty.name).unwrap().push_field(&field.name, info);
        }
    }

    for (name, ty_name) in &spec.globals {
        if !env.has_type(ty_name) {
            return Err(ApiError::DanglingGlobal(name.clone(), ty_name.clone()));
        }
        env.declare_symbol(name, TypeDescriptor::table(ty_name))
            .map_err(|_| ApiError::Signature(format!("bad global name '{name}'")))?;
    }
    Ok(())
}
