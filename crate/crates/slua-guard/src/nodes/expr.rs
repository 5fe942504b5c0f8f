//! Build expression ASTs from the flat fragment streams the expression
//! parsers accumulate (lexemes interleaved with finished child fragments).

use crate::translate::AstNode;

#[derive(Debug, Clone)]
pub enum Part {
    /// (terminal name, lexeme)
    Lex(String, String),
    Child(AstNode),
}

/// Precedence-climbing build over the fragment stream. One builder covers
/// every expression kind; the grammars guarantee only sensible mixes occur.
pub fn build_expression(parts: &[Part]) -> AstNode {
    let mut p = Builder { parts, pos: 0 };
    let ast = p.expr(0);
    debug_assert!(p.pos >= p.parts.len(), "unconsumed expression parts");
    ast
}

fn binding_power(op: &str) -> Option<u8> {
    match op {
        "or" => Some(1),
        "and" => Some(2),
        "==" | "~=" | "< " | "> " | "<=" | ">=" => Some(3),
        ".." => Some(4),
        "+" | "-" => Some(5),
        "*" | "/" => Some(6),
        _ => None,
    }
}

struct Builder<'a> {
    parts: &'a [Part],
    pos: usize,
}

impl<'a> Builder<'a> {
    fn peek_lexeme(&self) -> Option<&str> {
        match self.parts.get(self.pos) {
            Some(Part::Lex(_, lexeme)) => Some(lexeme.as_str()),
            _ => None,
        }
    }

    fn expr(&mut self, min_bp: u8) -> AstNode {
        let mut lhs = self.unary();
        while let Some(op) = self.peek_lexeme() {
            let Some(bp) = binding_power(op) else { break };
            if bp < min_bp {
                break;
            }
            let op = op.to_string();
            self.pos += 1;
            let rhs = self.expr(bp + 1);
            lhs = AstNode::BinOp {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        lhs
    }

    fn unary(&mut self) -> AstNode {
        match self.parts.get(self.pos) {
            Some(Part::Lex(_, lexeme)) if lexeme == "not" => {
                self.pos += 1;
                AstNode::Unary {
                    op: "not".to_string(),
                    operand: Box::new(self.unary()),
                }
            }
            Some(Part::Lex(_, lexeme)) if lexeme == "-" || lexeme == "+" => {
                let op = lexeme.clone();
                self.pos += 1;
                AstNode::Unary {
                    op,
                    operand: Box::new(self.unary()),
                }
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> AstNode {
        match self.parts.get(self.pos) {
            Some(Part::Child(ast)) => {
                self.pos += 1;
                ast.clone()
            }
            Some(Part::Lex(term, lexeme)) => {
                let term = term.clone();
                let lexeme = lexeme.clone();
                self.pos += 1;
                match (term.as_str(), lexeme.as_str()) {
                    ("NUMBER", _) => AstNode::Num(lexeme),
                    ("STRING", _) => AstNode::Str(lexeme),
                    ("BOOLEAN", b) => AstNode::Bool(b == "true"),
                    ("(", _) => {
                        let inner = self.expr(0);
                        // consume the matching ")"
                        if matches!(self.peek_lexeme(), Some(")")) {
                            self.pos += 1;
                        }
                        AstNode::Paren(Box::new(inner))
                    }
                    _ => AstNode::Num(lexeme), // unreachable for grammar-fed streams
                }
            }
            None => AstNode::Num("0".to_string()),
        }
    }
}
