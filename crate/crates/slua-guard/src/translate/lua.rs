//! Lowering sLua to executable Lua.
//!
//! Type annotations and the `interface ParamData` header are dropped, `< ` /
//! `> ` comparators normalize to `<` / `>`, and every while loop gains a
//! fresh counter capping it at 100 iterations so generated scripts cannot
//! loop forever.

use super::ast::{AstNode, Link};

pub const LOOP_CAP: u32 = 100;
const COUNTER_PREFIX: &str = "__slua_loop_";

struct Translator {
    used_names: Vec<String>,
    counter: u32,
}

impl Translator {
    fn fresh_counter(&mut self) -> String {
        loop {
            self.counter += 1;
            let name = format!("{COUNTER_PREFIX}{}", self.counter);
            if !self.used_names.contains(&name) {
                return name;
            }
        }
    }
}

/// Translate a finished program AST to Lua source. Loop-counter locals use
/// the `__slua_loop_` prefix; if the source legitimately declares such a
/// name, the counter keeps suffixing until fresh.
pub fn translate_to_lua(ast: &AstNode) -> String {
    let mut names = Vec::new();
    collect_identifiers(ast, &mut names);
    let mut tr = Translator {
        used_names: names,
        counter: 0,
    };
    let mut out = String::new();
    emit(ast, 0, &mut tr, &mut out);
    out
}

fn collect_identifiers(node: &AstNode, out: &mut Vec<String>) {
    match node {
        AstNode::Block(s) | AstNode::DoBlock(s) => s.iter().for_each(|n| collect_identifiers(n, out)),
        AstNode::If {
            cond,
            then,
            elifs,
            els,
        } => {
            collect_identifiers(cond, out);
            then.iter().for_each(|n| collect_identifiers(n, out));
            for (c, b) in elifs {
                collect_identifiers(c, out);
                b.iter().for_each(|n| collect_identifiers(n, out));
            }
            if let Some(b) = els {
                b.iter().for_each(|n| collect_identifiers(n, out));
            }
        }
        AstNode::While { cond, body } => {
            collect_identifiers(cond, out);
            body.iter().for_each(|n| collect_identifiers(n, out));
        }
        AstNode::For {
            var,
            from,
            to,
            step,
            body,
        } => {
            out.push(var.clone());
            collect_identifiers(from, out);
            collect_identifiers(to, out);
            if let Some(s) = step {
                collect_identifiers(s, out);
            }
            body.iter().for_each(|n| collect_identifiers(n, out));
        }
        AstNode::Assign { target, value } => {
            collect_identifiers(target, out);
            collect_identifiers(value, out);
        }
        AstNode::VarDef { name, init, .. } => {
            out.push(name.clone());
            collect_identifiers(init, out);
        }
        AstNode::Return(Some(v)) => collect_identifiers(v, out),
        AstNode::Call(c) => collect_identifiers(c, out),
        AstNode::Prefix { head, links, .. } => {
            out.push(head.clone());
            for link in links {
                if let Link::Call(args) = link {
                    args.iter().for_each(|a| collect_identifiers(a, out));
                }
            }
        }
        AstNode::BinOp { lhs, rhs, .. } => {
            collect_identifiers(lhs, out);
            collect_identifiers(rhs, out);
        }
        AstNode::Unary { operand, .. } => collect_identifiers(operand, out),
        AstNode::Paren(inner) => collect_identifiers(inner, out),
        AstNode::FuncDef { params, body, .. } => {
            out.extend(params.iter().cloned());
            body.iter().for_each(|n| collect_identifiers(n, out));
        }
        AstNode::TableInit { pairs, .. } => {
            pairs.iter().for_each(|(_, v)| collect_identifiers(v, out));
        }
        AstNode::NewEffect { block, def, .. } => {
            block.iter().for_each(|n| collect_identifiers(n, out));
            collect_identifiers(def, out);
        }
        AstNode::NewTalent { block, def } => {
            block.iter().for_each(|n| collect_identifiers(n, out));
            collect_identifiers(def, out);
        }
        _ => {}
    }
}

fn indent(level: usize, out: &mut String) {
    for _ in 0..level {
        out.push_str("    ");
    }
}

fn emit_stmts(stmts: &[AstNode], level: usize, tr: &mut Translator, out: &mut String) {
    for stmt in stmts {
        indent(level, out);
        emit(stmt, level, tr, out);
        out.push('\n');
    }
}

fn emit(node: &AstNode, level: usize, tr: &mut Translator, out: &mut String) {
    match node {
        AstNode::Block(stmts) => emit_stmts(stmts, level, tr, out),
        AstNode::DoBlock(stmts) => {
            out.push_str("do\n");
            emit_stmts(stmts, level + 1, tr, out);
            indent(level, out);
            out.push_str("end");
        }
        AstNode::If {
            cond,
            then,
            elifs,
            els,
        } => {
            out.push_str("if ");
            emit(cond, level, tr, out);
            out.push_str(" then\n");
            emit_stmts(then, level + 1, tr, out);
            for (c, body) in elifs {
                indent(level, out);
                out.push_str("elseif ");
                emit(c, level, tr, out);
                out.push_str(" then\n");
                emit_stmts(body, level + 1, tr, out);
            }
            if let Some(body) = els {
                indent(level, out);
                out.push_str("else\n");
                emit_stmts(body, level + 1, tr, out);
            }
            indent(level, out);
            out.push_str("end");
        }
        AstNode::While { cond, body } => {
            let counter = tr.fresh_counter();
            out.push_str(&format!("local {counter} = 0\n"));
            indent(level, out);
            out.push_str("while ");
            emit(cond, level, tr, out);
            out.push_str(" do\n");
            indent(level + 1, out);
            out.push_str(&format!("{counter} = {counter} + 1\n"));
            indent(level + 1, out);
            out.push_str(&format!("if {counter} > {LOOP_CAP} then break end\n"));
            emit_stmts(body, level + 1, tr, out);
            indent(level, out);
            out.push_str("end");
        }
        AstNode::For {
            var,
            from,
            to,
            step,
            body,
        } => {
            out.push_str("for ");
            out.push_str(var);
            out.push_str(" = ");
            emit(from, level, tr, out);
            out.push_str(", ");
            emit(to, level, tr, out);
            if let Some(step) = step {
                out.push_str(", ");
                emit(step, level, tr, out);
            }
            out.push_str(" do\n");
            emit_stmts(body, level + 1, tr, out);
            indent(level, out);
            out.push_str("end");
        }
        AstNode::Assign { target, value } => {
            emit(target, level, tr, out);
            out.push_str(" = ");
            emit(value, level, tr, out);
            out.push(';');
        }
        AstNode::VarDef { name, init, .. } => {
            out.push_str("local ");
            out.push_str(name);
            out.push_str(" = ");
            emit(init, level, tr, out);
            out.push(';');
        }
        AstNode::Return(value) => {
            out.push_str("return");
            if let Some(v) = value {
                out.push(' ');
                emit(v, level, tr, out);
            }
            out.push(';');
        }
        AstNode::Break => out.push_str("break;"),
        AstNode::Call(chain) => {
            emit(chain, level, tr, out);
            out.push(';');
        }
        AstNode::Prefix { head, links, .. } => {
            out.push_str(head);
            for link in links {
                match link {
                    Link::Field(name) => {
                        out.push('.');
                        out.push_str(name);
                    }
                    Link::Call(args) => {
                        out.push('(');
                        for (i, arg) in args.iter().enumerate() {
                            if i > 0 {
                                out.push_str(", ");
                            }
                            emit(arg, level, tr, out);
                        }
                        out.push(')');
                    }
                }
            }
        }
        AstNode::Num(lexeme) => out.push_str(lexeme),
        AstNode::Str(lexeme) => out.push_str(lexeme),
        AstNode::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        AstNode::BinOp { op, lhs, rhs } => {
            emit(lhs, level, tr, out);
            out.push(' ');
            out.push_str(op.trim_end());
            out.push(' ');
            emit(rhs, level, tr, out);
        }
        AstNode::Unary { op, operand } => {
            match op.as_str() {
                "not" => out.push_str("not "),
                // Lua has no unary plus
                "+" => {}
                other => out.push_str(other),
            }
            emit(operand, level, tr, out);
        }
        AstNode::Paren(inner) => {
            out.push('(');
            emit(inner, level, tr, out);
            out.push(')');
        }
        AstNode::FuncDef { params, body, .. } => {
            out.push_str("function(");
            out.push_str(&params.join(", "));
            out.push_str(")\n");
            emit_stmts(body, level + 1, tr, out);
            indent(level, out);
            out.push_str("end");
        }
        AstNode::TableInit { pairs, .. } => {
            if pairs.is_empty() {
                out.push_str("{ }");
            } else {
                out.push_str("{\n");
                for (key, value) in pairs {
                    indent(level + 1, out);
                    out.push_str(key);
                    out.push_str(" = ");
                    emit(value, level + 1, tr, out);
                    out.push_str(",\n");
                }
                indent(level, out);
                out.push('}');
            }
        }
        // consumed by environment registration; nothing to execute
        AstNode::InterfaceDef { .. } => {}
        AstNode::NewEffect { block, def, .. } => {
            out.push_str("do\n");
            emit_stmts(block, level + 1, tr, out);
            indent(level + 1, out);
            out.push_str("NewEffect(");
            emit(def, level + 1, tr, out);
            out.push_str(");\n");
            indent(level, out);
            out.push_str("end\n");
        }
        AstNode::NewTalent { block, def } => {
            out.push_str("do\n");
            emit_stmts(block, level + 1, tr, out);
            indent(level + 1, out);
            out.push_str("NewTalent(");
            emit(def, level + 1, tr, out);
            out.push_str(");\n");
            indent(level, out);
            out.push_str("end\n");
        }
    }
}
