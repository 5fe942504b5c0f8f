//! Canonical sLua rendering. `render_slua(parse(text)) == text` on canonical
//! text, and rendered output reparses to an equal AST.

use super::ast::{AstNode, Link};

pub fn render_slua(ast: &AstNode) -> String {
    let mut out = String::new();
    render_node(ast, 0, &mut out);
    out
}

fn indent(level: usize, out: &mut String) {
    for _ in 0..level {
        out.push_str("    ");
    }
}

fn render_stmts(stmts: &[AstNode], level: usize, out: &mut String) {
    for stmt in stmts {
        indent(level, out);
        render_node(stmt, level, out);
        out.push('\n');
    }
}

fn render_node(node: &AstNode, level: usize, out: &mut String) {
    match node {
        AstNode::Block(stmts) => render_stmts(stmts, level, out),
        AstNode::DoBlock(stmts) => {
            out.push_str("do\n");
            render_stmts(stmts, level + 1, out);
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
            render_node(cond, level, out);
            out.push_str(" then\n");
            render_stmts(then, level + 1, out);
            for (c, body) in elifs {
                indent(level, out);
                out.push_str("elseif ");
                render_node(c, level, out);
                out.push_str(" then\n");
                render_stmts(body, level + 1, out);
            }
            if let Some(body) = els {
                indent(level, out);
                out.push_str("else\n");
                render_stmts(body, level + 1, out);
            }
            indent(level, out);
            out.push_str("end");
        }
        AstNode::While { cond, body } => {
            out.push_str("while ");
            render_node(cond, level, out);
            out.push_str(" do\n");
            render_stmts(body, level + 1, out);
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
            render_node(from, level, out);
            out.push_str(", ");
            render_node(to, level, out);
            if let Some(step) = step {
                out.push_str(", ");
                render_node(step, level, out);
            }
            out.push_str(" do\n");
            render_stmts(body, level + 1, out);
            indent(level, out);
            out.push_str("end");
        }
        AstNode::Assign { target, value } => {
            render_node(target, level, out);
            out.push_str(" = ");
            render_node(value, level, out);
            out.push(';');
        }
        AstNode::VarDef { name, ty, init } => {
            out.push_str("local ");
            out.push_str(name);
            out.push_str(": ");
            out.push_str(&ty.display_name());
            out.push_str(" = ");
            render_node(init, level, out);
            out.push(';');
        }
        AstNode::Return(value) => {
            out.push_str("return");
            if let Some(v) = value {
                out.push(' ');
                render_node(v, level, out);
            }
            out.push(';');
        }
        AstNode::Break => out.push_str("break;"),
        AstNode::Call(chain) => {
            render_node(chain, level, out);
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
                            render_node(arg, level, out);
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
            render_node(lhs, level, out);
            // "< " and "> " carry their trailing space as part of the lexeme
            let op_text = op.trim_end();
            out.push(' ');
            out.push_str(op_text);
            out.push(' ');
            render_node(rhs, level, out);
        }
        AstNode::Unary { op, operand } => {
            if op == "not" {
                out.push_str("not ");
            } else {
                out.push_str(op);
            }
            render_node(operand, level, out);
        }
        AstNode::Paren(inner) => {
            out.push('(');
            render_node(inner, level, out);
            out.push(')');
        }
        AstNode::FuncDef { params, body, .. } => {
            out.push_str("function(");
            out.push_str(&params.join(", "));
            out.push_str(")\n");
            render_stmts(body, level + 1, out);
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
                    render_node(value, level + 1, out);
                    out.push_str(",\n");
                }
                indent(level, out);
                out.push('}');
            }
        }
        AstNode::InterfaceDef { fields } => {
            if fields.is_empty() {
                out.push_str("interface ParamData { };");
            } else {
                out.push_str("interface ParamData {\n");
                for (name, ty) in fields {
                    indent(level + 1, out);
                    out.push_str(name);
                    out.push_str(": ");
                    out.push_str(&ty.display_name());
                    out.push_str(",\n");
                }
                indent(level, out);
                out.push_str("};");
            }
        }
        AstNode::NewEffect {
            interface,
            block,
            def,
        } => {
            render_node(interface, level, out);
            out.push_str("\n\ndo\n");
            render_stmts(block, level + 1, out);
            indent(level + 1, out);
            out.push_str("NewEffect(");
            render_node(def, level + 1, out);
            out.push_str(");\n");
            indent(level, out);
            out.push_str("end\n");
        }
        AstNode::NewTalent { block, def } => {
            out.push_str("do\n");
            render_stmts(block, level + 1, out);
            indent(level + 1, out);
            out.push_str("NewTalent(");
            render_node(def, level + 1, out);
            out.push_str(");\n");
            indent(level, out);
            out.push_str("end\n");
        }
    }
}
