//! Static checks backing the runtime-safety argument: lexically ordered
//! function references, capped while loops, and no function-typed parameters
//! on locally defined functions. Parser-produced ASTs satisfy all three; the
//! report exists to catch hand-built or future regressions.

use super::ast::{AstNode, Link};
use super::lua::translate_to_lua;

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// An identifier is used before its (lexical) declaration.
    ForwardReference(String),
    /// A locally defined function takes a function-typed parameter.
    FunctionTypedParam(String),
    /// A translated while loop is missing its iteration cap.
    UncappedWhile,
}

#[derive(Debug, Default)]
pub struct SafetyReport {
    pub violations: Vec<Violation>,
}

impl SafetyReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Verify the static shape that guarantees termination: the function call
/// graph is a DAG via lexical ordering, while loops are capped after
/// translation, and local functions cannot receive functions.
pub fn verify_safety_shape(ast: &AstNode) -> SafetyReport {
    let mut report = SafetyReport::default();

    let mut scopes: Vec<Vec<String>> = vec![builtin_globals()];
    walk(ast, &mut scopes, &mut report);

    let lua = translate_to_lua(ast);
    let whiles = lua.matches("while ").count();
    let caps = lua.matches("then break end").count();
    if caps < whiles {
        report.violations.push(Violation::UncappedWhile);
    }
    report
}

fn builtin_globals() -> Vec<String> {
    ["g_effects", "g_game", "g_math", "g_str", "NewEffect", "NewTalent"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn declared(scopes: &[Vec<String>], name: &str) -> bool {
    scopes.iter().any(|s| s.iter().any(|n| n == name))
}

fn walk(node: &AstNode, scopes: &mut Vec<Vec<String>>, report: &mut SafetyReport) {
    match node {
        AstNode::Block(stmts) | AstNode::DoBlock(stmts) => {
            scopes.push(Vec::new());
            for stmt in stmts {
                walk(stmt, scopes, report);
            }
            scopes.pop();
        }
        AstNode::If {
            cond,
            then,
            elifs,
            els,
        } => {
            walk(cond, scopes, report);
            scopes.push(Vec::new());
            then.iter().for_each(|s| walk(s, scopes, report));
            scopes.pop();
            for (c, body) in elifs {
                walk(c, scopes, report);
                scopes.push(Vec::new());
                body.iter().for_each(|s| walk(s, scopes, report));
                scopes.pop();
            }
            if let Some(body) = els {
                scopes.push(Vec::new());
                body.iter().for_each(|s| walk(s, scopes, report));
                scopes.pop();
            }
        }
        AstNode::While { cond, body } => {
            walk(cond, scopes, report);
            scopes.push(Vec::new());
            body.iter().for_each(|s| walk(s, scopes, report));
            scopes.pop();
        }
        AstNode::For {
            var,
            from,
            to,
            step,
            body,
        } => {
            walk(from, scopes, report);
            walk(to, scopes, report);
            if let Some(s) = step {
                walk(s, scopes, report);
            }
            scopes.push(vec![var.clone()]);
            body.iter().for_each(|s| walk(s, scopes, report));
            scopes.pop();
        }
        AstNode::Assign { target, value } => {
            walk(target, scopes, report);
            walk(value, scopes, report);
        }
        AstNode::VarDef { name, init, .. } => {
            // the initializer sees everything declared before, not the
            // variable itself (no recursion)
            walk(init, scopes, report);
            scopes.last_mut().unwrap().push(name.clone());
        }
        AstNode::Return(Some(v)) => walk(v, scopes, report),
        AstNode::Call(chain) => walk(chain, scopes, report),
        AstNode::Prefix { head, links, .. } => {
            if !declared(scopes, head) {
                report
                    .violations
                    .push(Violation::ForwardReference(head.clone()));
            }
            for link in links {
                if let Link::Call(args) = link {
                    args.iter().for_each(|a| walk(a, scopes, report));
                }
            }
        }
        AstNode::BinOp { lhs, rhs, .. } => {
            walk(lhs, scopes, report);
            walk(rhs, scopes, report);
        }
        AstNode::Unary { operand, .. } => walk(operand, scopes, report),
        AstNode::Paren(inner) => walk(inner, scopes, report),
        AstNode::FuncDef {
            params, ty, body, ..
        } => {
            for (name, pty) in &ty.params {
                if pty.is_function() {
                    report
                        .violations
                        .push(Violation::FunctionTypedParam(name.clone()));
                }
            }
            scopes.push(params.clone());
            body.iter().for_each(|s| walk(s, scopes, report));
            scopes.pop();
        }
        AstNode::TableInit { pairs, .. } => {
            pairs.iter().for_each(|(_, v)| walk(v, scopes, report));
        }
        AstNode::NewEffect { block, def, .. } => {
            scopes.push(Vec::new());
            block.iter().for_each(|s| walk(s, scopes, report));
            walk(def, scopes, report);
            scopes.pop();
        }
        AstNode::NewTalent { block, def } => {
            scopes.push(Vec::new());
            block.iter().for_each(|s| walk(s, scopes, report));
            walk(def, scopes, report);
            scopes.pop();
        }
        _ => {}
    }
}

