//! Program AST assembled from parser-node fragments.

use crate::env::{FunctionType, TypeDescriptor};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
pub enum Link {
    Field(String),
    Call(Vec<AstNode>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum AstNode {
    Block(Vec<AstNode>),
    DoBlock(Vec<AstNode>),
    If {
        cond: Box<AstNode>,
        then: Vec<AstNode>,
        elifs: Vec<(AstNode, Vec<AstNode>)>,
        els: Option<Vec<AstNode>>,
    },
    While {
        cond: Box<AstNode>,
        body: Vec<AstNode>,
    },
    For {
        var: String,
        from: Box<AstNode>,
        to: Box<AstNode>,
        step: Option<Box<AstNode>>,
        body: Vec<AstNode>,
    },
    Assign {
        target: Box<AstNode>,
        value: Box<AstNode>,
    },
    VarDef {
        name: String,
        ty: TypeDescriptor,
        init: Box<AstNode>,
    },
    Return(Option<Box<AstNode>>),
    Break,
    /// A prefix expression used as a statement (necessarily a call).
    Call(Box<AstNode>),
    /// A typed chain of field accesses and calls, e.g. `a.b(c).d`.
    Prefix {
        head: String,
        links: Vec<Link>,
        ty: TypeDescriptor,
    },
    /// Numeric literal, kept as its source lexeme.
    Num(String),
    /// String literal including the surrounding quotes.
    Str(String),
    Bool(bool),
    BinOp {
        op: String,
        lhs: Box<AstNode>,
        rhs: Box<AstNode>,
    },
    /// `not x` and unary minus.
    Unary {
        op: String,
        operand: Box<AstNode>,
    },
    Paren(Box<AstNode>),
    FuncDef {
        params: Vec<String>,
        ty: Arc<FunctionType>,
        body: Vec<AstNode>,
    },
    TableInit {
        type_name: String,
        pairs: Vec<(String, AstNode)>,
    },
    InterfaceDef {
        fields: Vec<(String, TypeDescriptor)>,
    },
    NewEffect {
        interface: Box<AstNode>,
        block: Vec<AstNode>,
        def: Box<AstNode>,
    },
    NewTalent {
        block: Vec<AstNode>,
        def: Box<AstNode>,
    },
}

impl AstNode {
    /// Conservative all-paths-return analysis: an `if` returns only when it
    /// has an else branch and every branch returns; loops never count.
    pub fn guarantees_return(&self) -> bool {
        match self {
            AstNode::Return(_) => true,
            AstNode::Block(stmts) | AstNode::DoBlock(stmts) => {
                stmts.iter().any(|s| s.guarantees_return())
            }
            AstNode::If {
                then, elifs, els, ..
            } => {
                let else_returns = match els {
                    Some(stmts) => stmts.iter().any(|s| s.guarantees_return()),
                    None => false,
                };
                else_returns
                    && then.iter().any(|s| s.guarantees_return())
                    && elifs
                        .iter()
                        .all(|(_, body)| body.iter().any(|s| s.guarantees_return()))
            }
            _ => false,
        }
    }
}
