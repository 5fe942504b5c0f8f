//! Parse API signature lines like `(target: Actor, damage: number) -> void`.

use super::types::{FunctionType, TypeDescriptor};
use super::{ApiError, Environment};
use std::sync::Arc;

/// Parse a named-parameter function signature. Callback parameters may
/// themselves be function-typed, but their own parameters must be base or
/// table types (one level of nesting, matching the API style).
pub fn parse_type_signature(env: &Environment, s: &str) -> Result<Arc<FunctionType>, ApiError> {
    let mut p = Cursor { rest: s.trim() };
    let f = parse_function(env, &mut p, true)?;
    if !p.rest.trim().is_empty() {
        return Err(ApiError::Signature(format!(
            "trailing input '{}' in signature '{s}'",
            p.rest.trim()
        )));
    }
    Ok(f)
}

/// Parse a bare type reference: a base-type name, a registered table name,
/// or a function signature.
pub fn parse_type_ref(env: &Environment, s: &str) -> Result<TypeDescriptor, ApiError> {
    let t = s.trim();
    if t.starts_with('(') {
        return Ok(TypeDescriptor::Function(parse_type_signature(env, t)?));
    }
    named_type(env, t)
}

struct Cursor<'a> {
    rest: &'a str,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        self.rest = self.rest.trim_start();
    }

    fn eat(&mut self, prefix: &str) -> bool {
        self.skip_ws();
        if let Some(rest) = self.rest.strip_prefix(prefix) {
            self.rest = rest;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Option<&'a str> {
        self.skip_ws();
        let len = self
            .rest
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(self.rest.len());
        if len == 0 {
            None
        } else {
            let (id, rest) = self.rest.split_at(len);
            self.rest = rest;
            Some(id)
        }
    }
}

fn named_type(env: &Environment, name: &str) -> Result<TypeDescriptor, ApiError> {
    match name {
        "number" => Ok(TypeDescriptor::Number),
        "boolean" => Ok(TypeDescriptor::Boolean),
        "string" => Ok(TypeDescriptor::Str),
        _ if env.has_type(name) => Ok(TypeDescriptor::table(name)),
        _ => Err(ApiError::UnknownType(name.to_string())),
    }
}

fn parse_function(
    env: &Environment,
    p: &mut Cursor,
    allow_function_params: bool,
) -> Result<Arc<FunctionType>, ApiError> {
    if !p.eat("(") {
        return Err(ApiError::Signature("expected '('".to_string()));
    }
    let mut params: Vec<(String, TypeDescriptor)> = Vec::new();
    p.skip_ws();
    if !p.eat(")") {
        loop {
            let (name, ty) = parse_param(env, p, allow_function_params)?;
            params.push((name, ty));
            if p.eat(")") {
                break;
            }
            if !p.eat(",") {
                return Err(ApiError::Signature("expected ',' or ')'".to_string()));
            }
        }
    }
    if !p.eat("->") {
        return Err(ApiError::Signature("expected '->'".to_string()));
    }
    p.skip_ws();
    let ret = if p.rest.starts_with('(') {
        TypeDescriptor::Function(parse_function(env, p, false)?)
    } else {
        let id = p
            .ident()
            .ok_or_else(|| ApiError::Signature("expected a return type".to_string()))?;
        if id == "void" {
            TypeDescriptor::Void
        } else {
            named_type(env, id)?
        }
    };
    Ok(FunctionType::new(params, ret))
}

fn parse_param(
    env: &Environment,
    p: &mut Cursor,
    allow_function_params: bool,
) -> Result<(String, TypeDescriptor), ApiError> {
    p.skip_ws();
    // optional `name:` prefix
    let mut name = String::new();
    let checkpoint = p.rest;
    if let Some(id) = p.ident() {
        if p.eat(":") {
            name = id.to_string();
        } else {
            p.rest = checkpoint;
        }
    }
    p.skip_ws();
    let ty = if p.rest.starts_with('(') {
        if !allow_function_params {
            return Err(ApiError::Signature(
                "nested function parameter is not allowed".to_string(),
            ));
        }
        TypeDescriptor::Function(parse_function(env, p, false)?)
    } else {
        let id = p
            .ident()
            .ok_or_else(|| ApiError::Signature("expected a parameter type".to_string()))?;
        if id == "void" {
            return Err(ApiError::Signature(
                "void cannot be a parameter type".to_string(),
            ));
        }
        named_type(env, id)?
    };
    Ok((name, ty))
}
