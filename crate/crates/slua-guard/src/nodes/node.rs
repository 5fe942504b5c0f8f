//! The tree-of-parsers node: one incremental parser per modular grammar,
//! children spawned at placeholders, pruned on conflicts, merged on finish.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use crate::env::{
    Environment, FieldInfo, FunctionType, ScopeKind, TableType, TraceVariant, TypeDescriptor,
};
use crate::grammar::{
    build_interactive_parser, instantiate_template, GrammarTemplate, InteractiveParser,
    ParserCache, TermId, Terminal,
};
use crate::regex::{compile_regex, is_nonextensible, Dfa, RegexPattern};
use crate::top::TopError;
use crate::translate::{AstNode, Link};

use super::expr::{build_expression, Part};
use super::field::{join_alts, FieldCandidate, FieldLeaf, Follow};
use super::templates;
use super::{keyword_spacing, resolve_finish_placeholder, ExprRole, NodeKind, PrefixVariant, ScopeStack};

pub const SELF_KEY: &str = "<SELF>";
pub const UNION_KEY: &str = "<UNION_PREFIX_EXP>";

const PENDING_PARAM: &str = "Param__pending";
const PENDING_PARAM_DATA: &str = "ParamData__pending";
const PENDING_EFFECT_DEF: &str = "EffectDef__pending";

/// Shared mutable session context threaded through the tree.
pub struct NodeCtx<'a> {
    pub env: &'a mut Environment,
    pub cache: &'a ParserCache,
    pub dfas: &'a mut HashMap<String, Arc<Dfa>>,
}

/// Compiled DFAs are immutable; share them process-wide. Regexes repeat
/// heavily across segments and sessions.
fn global_dfa(pattern: &str) -> Result<Arc<Dfa>, TopError> {
    use std::sync::{Mutex, OnceLock};
    static MEMO: OnceLock<Mutex<HashMap<String, Arc<Dfa>>>> = OnceLock::new();
    let memo = MEMO.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(d) = memo.lock().unwrap().get(pattern) {
        return Ok(d.clone());
    }
    let d = Arc::new(compile_regex(&RegexPattern::new(pattern))?);
    let mut guard = memo.lock().unwrap();
    let entry = guard.entry(pattern.to_string()).or_insert(d);
    Ok(entry.clone())
}

impl<'a> NodeCtx<'a> {
    pub fn dfa(&mut self, pattern: &str) -> Result<Arc<Dfa>, TopError> {
        if let Some(d) = self.dfas.get(pattern) {
            return Ok(d.clone());
        }
        let d = global_dfa(pattern)?;
        self.dfas.insert(pattern.to_string(), d.clone());
        Ok(d)
    }
}

#[derive(Debug, Clone)]
pub struct RoleSpec {
    pub role: Option<ExprRole>,
    pub targets: Vec<TypeDescriptor>,
    pub tvariant: TraceVariant,
    pub ends: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct PrefixState {
    pub variant: PrefixVariant,
    pub specs: Vec<RoleSpec>,
    pub cur: Option<TypeDescriptor>,
    pub pending_call: Option<Arc<FunctionType>>,
    pub made_call: bool,
    pub resolved: Option<TypeDescriptor>,
}

#[derive(Debug, Clone)]
pub(crate) enum KindState {
    Plain,
    Block {
        is_function_body: bool,
        returned: bool,
    },
    Assignment {
        lvalue: Option<TypeDescriptor>,
    },
    LocalVarDef {
        ty: Option<TypeDescriptor>,
    },
    Return {
        ret: TypeDescriptor,
    },
    TypeSpec {
        base_names: Vec<String>,
        allow_function: bool,
        after_arrow: bool,
        resolved: Option<TypeDescriptor>,
    },
    Prefix(PrefixState),
    ArgList {
        params: Vec<TypeDescriptor>,
        pos: usize,
    },
    Func {
        sig: Arc<FunctionType>,
        names: Vec<String>,
        params_closed: bool,
    },
    Table {
        type_name: String,
        used: Vec<String>,
        required: Vec<String>,
        pending_key: Option<String>,
    },
    Effect {
        effect_id: Option<String>,
        fields: Vec<(String, TypeDescriptor)>,
        registered: bool,
        pending_field: Option<String>,
    },
    Talent,
    Field(FieldLeaf),
}

#[derive(Debug, Clone)]
pub struct ParserNode {
    pub kind: NodeKind,
    ip: Option<InteractiveParser>,
    children: Vec<(String, ParserNode)>,
    is_continuation: bool,
    pub(crate) scopes: ScopeStack,
    pub(crate) state: KindState,
    parts: Vec<Part>,
    has_end_slot: bool,
    end_lexemes: Vec<String>,
    /// per end lexeme, the single-literal parent follow absorbed into its
    /// regex (the Fig.-2 style `NewTalent(` boundary)
    end_exts: Vec<(String, String)>,
    end_lexeme: Option<String>,
    /// text consumed by this node's segment that belongs to an ancestor
    residue: Option<String>,
    ast: Option<AstNode>,
}

fn end_fill(end_lexemes: &[String]) -> String {
    let mut quoted: Vec<String> = end_lexemes.iter().map(|l| format!("\"{l}\"")).collect();
    quoted.sort_unstable();
    quoted.dedup();
    // multiple alternatives must stay grouped inside the rule they land in
    if quoted.len() == 1 {
        quoted.pop().unwrap()
    } else {
        format!("({})", quoted.join(" | "))
    }
}

/// Instantiation parses grammar text; identical (template, fills) pairs recur
/// on every node spawn, so the parsed grammar is memoized process-wide.
fn build_ip(
    template: &GrammarTemplate,
    fills: &BTreeMap<String, String>,
    cache: &ParserCache,
) -> Result<InteractiveParser, TopError> {
    use std::sync::{Mutex, OnceLock};
    static MEMO: OnceLock<Mutex<HashMap<String, Arc<crate::grammar::Grammar>>>> = OnceLock::new();
    let mut key = template.source.clone();
    for (slot, fill) in fills {
        key.push('\u{1}');
        key.push_str(slot);
        key.push('\u{2}');
        key.push_str(fill);
    }
    for extra in &template.extra_terminals {
        key.push('\u{3}');
        key.push_str(&extra.name);
    }
    let memo = MEMO.get_or_init(|| Mutex::new(HashMap::new()));
    let grammar = {
        let hit = memo.lock().unwrap().get(&key).cloned();
        match hit {
            Some(g) => g,
            None => {
                let g = Arc::new(instantiate_template(template, fills)?);
                memo.lock().unwrap().insert(key, g.clone());
                g
            }
        }
    };
    Ok(build_interactive_parser(&grammar, cache)?)
}

impl ParserNode {
    fn with_ip(
        kind: NodeKind,
        ip: InteractiveParser,
        scopes: ScopeStack,
        state: KindState,
        end_lexemes: Vec<String>,
        has_end_slot: bool,
    ) -> ParserNode {
        ParserNode {
            kind,
            ip: Some(ip),
            children: Vec::new(),
            is_continuation: false,
            scopes,
            state,
            parts: Vec::new(),
            has_end_slot,
            end_lexemes,
            end_exts: Vec::new(),
            end_lexeme: None,
            residue: None,
            ast: None,
        }
    }

    pub fn field_leaf(leaf: FieldLeaf, scopes: ScopeStack) -> ParserNode {
        ParserNode {
            kind: NodeKind::Field,
            ip: None,
            children: Vec::new(),
            is_continuation: false,
            scopes,
            state: KindState::Field(leaf),
            parts: Vec::new(),
            has_end_slot: false,
            end_lexemes: Vec::new(),
            end_exts: Vec::new(),
            end_lexeme: None,
            residue: None,
            ast: None,
        }
    }

    pub fn ast(&self) -> Option<&AstNode> {
        self.ast.as_ref()
    }

    pub fn resolved_type(&self) -> Option<&TypeDescriptor> {
        match &self.state {
            KindState::Prefix(p) => p.resolved.as_ref(),
            KindState::TypeSpec { resolved, .. } => resolved.as_ref(),
            _ => None,
        }
    }

    pub fn end_lexeme(&self) -> Option<&str> {
        self.end_lexeme.as_deref()
    }

    pub fn children(&self) -> &[(String, ParserNode)] {
        &self.children
    }

    pub fn node_count(&self) -> usize {
        1 + self
            .children
            .iter()
            .map(|(_, c)| c.node_count())
            .sum::<usize>()
    }

    pub fn tree_depth(&self) -> usize {
        1 + self
            .children
            .iter()
            .map(|(_, c)| c.tree_depth())
            .max()
            .unwrap_or(0)
    }

    /// Broom shape: if any node has more than one child, all its ancestors
    /// must have exactly one. Returns false on a violation.
    pub fn broom_ok(&self) -> bool {
        fn walk(node: &ParserNode, ancestor_branched: bool) -> bool {
            let branched = node.children.len() > 1;
            if branched && ancestor_branched {
                return false;
            }
            node.children
                .iter()
                .all(|(_, c)| walk(c, ancestor_branched || branched))
        }
        walk(self, false)
    }

    pub fn has_finished(&self) -> bool {
        if !self.children.is_empty() {
            return false;
        }
        match (&self.ip, &self.state) {
            (Some(ip), _) => ip.only_end_accepted(),
            (None, KindState::Field(leaf)) => leaf.finished(),
            _ => false,
        }
    }

    fn accepts_filtered(&self) -> Vec<TermId> {
        let ip = match &self.ip {
            Some(ip) => ip,
            None => return Vec::new(),
        };
        let mut out = Vec::new();
        'terms: for tid in ip.accepts() {
            let term = ip.tables().terminal(tid);
            let name = term.name.as_str();
            match (&self.kind, &self.state) {
                (NodeKind::Block, KindState::Block {
                    is_function_body,
                    returned,
                }) => {
                    let forced = *is_function_body
                        && !returned
                        && !matches!(self.scopes.current_fn_ret(), Some(TypeDescriptor::Void) | None);
                    if forced && (self.end_lexemes.iter().any(|e| e == name) || term.is_end()) {
                        continue 'terms;
                    }
                    if name == "break" && !self.scopes.break_allowed() {
                        continue 'terms;
                    }
                }
                (NodeKind::ReturnStat, KindState::Return { ret }) => {
                    if name == "<EXP>" && *ret == TypeDescriptor::Void {
                        continue 'terms;
                    }
                    if name == ";"
                        && *ret != TypeDescriptor::Void
                        && ip
                            .accepts_terminals()
                            .iter()
                            .any(|t| t.name == "<EXP>")
                    {
                        continue 'terms;
                    }
                }
                (NodeKind::ArgList, KindState::ArgList { params, pos }) => {
                    if name == ")" && *pos < params.len() {
                        continue 'terms;
                    }
                    if name == "<EXP>" && *pos >= params.len() {
                        continue 'terms;
                    }
                }
                (NodeKind::FuncExp, KindState::Func {
                    sig,
                    names,
                    params_closed,
                }) if !params_closed => {
                    // parameter-list states only: "," and ")" reappear later
                    // as possible end symbols of the whole expression
                    let arity = sig.params.len();
                    if name == "NEW_VAR_NAME" && names.len() >= arity {
                        continue 'terms;
                    }
                    if name == ")" && names.len() < arity {
                        continue 'terms;
                    }
                    if name == "," && names.len() >= arity {
                        continue 'terms;
                    }
                }
                (NodeKind::TableExp, KindState::Table { used, required, .. }) => {
                    if name == "}" && required.iter().any(|r| !used.contains(r)) {
                        continue 'terms;
                    }
                }
                (NodeKind::TypeSpec, KindState::TypeSpec { allow_function, .. })
                    if name == "(" && !allow_function => {
                        continue 'terms;
                    }
                _ => {}
            }
            out.push(tid);
        }
        out
    }

    /// Non-placeholder lookahead lexemes after virtually shifting `tid`.
    fn follow_after(&self, tid: TermId) -> Result<Vec<Terminal>, TopError> {
        let ip = self.ip.as_ref().expect("follow_after needs an ip");
        let mut probe = ip.clone();
        probe
            .feed_terminal(tid)
            .map_err(|e| TopError::Internal(format!("virtual feed failed: {e}")))?;
        Ok(probe
            .accepts_terminals()
            .into_iter()
            .cloned()
            .collect())
    }

    /// For each end lexeme, the parent's unique follow literal after it, if
    /// there is exactly one (and it is a literal).
    fn end_extensions(&self, placeholder: TermId, ends: &[String]) -> Vec<(String, String)> {
        let ip = match &self.ip {
            Some(ip) => ip,
            None => return Vec::new(),
        };
        let mut out = Vec::new();
        for end in ends {
            let mut probe = ip.clone();
            if probe.feed_terminal(placeholder).is_err() {
                continue;
            }
            if probe.feed_terminal_by_name(end).is_err() {
                continue;
            }
            let follows = probe.accepts_terminals();
            if follows.len() == 1 {
                if let Some(crate::grammar::Matcher::Literal(lit)) = &follows[0].matcher {
                    out.push((
                        end.clone(),
                        crate::regex::escape_grammar_literal(lit),
                    ));
                }
            }
        }
        out
    }

    fn follow_lexemes(&self, tid: TermId, context: &str) -> Result<Vec<String>, TopError> {
        let mut out = Vec::new();
        for t in self.follow_after(tid)? {
            if t.is_end() {
                continue;
            }
            if t.is_placeholder() {
                return Err(TopError::GrammarDesign(format!(
                    "placeholder '{}' follows {context}; a non-placeholder terminal is required",
                    t.name
                )));
            }
            match &t.matcher {
                Some(crate::grammar::Matcher::Literal(s)) => out.push(s.clone()),
                _ => {
                    return Err(TopError::GrammarDesign(format!(
                        "pattern terminal '{}' cannot fill an end-symbols slot ({context})",
                        t.name
                    )))
                }
            }
        }
        if out.is_empty() {
            return Err(TopError::GrammarDesign(format!(
                "no follow terminals after {context}"
            )));
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    // ------------------------------------------------------------------
    // regex emission
    // ------------------------------------------------------------------

    /// Alternative patterns describing every valid continuation of this node.
    pub fn next_regex_items(&mut self, ctx: &mut NodeCtx) -> Result<Vec<String>, TopError> {
        if let KindState::Field(leaf) = &self.state {
            let items = leaf.regex_items();
            if items.is_empty() {
                return Err(TopError::DeadEnd {
                    expected: Vec::new(),
                    detail: "field leaf has no viable candidates".to_string(),
                });
            }
            return Ok(items);
        }

        if !self.is_continuation {
            self.ensure_children(ctx)?;
        }

        if self.children.is_empty() {
            let items = self.leaf_items(ctx)?;
            if items.is_empty() {
                return Err(TopError::DeadEnd {
                    expected: Vec::new(),
                    detail: format!("{:?} node has no accepting continuation", self.kind),
                });
            }
            return Ok(items);
        }

        let mut items = Vec::new();
        let mut dead_keys = Vec::new();
        for (key, child) in self.children.iter_mut() {
            match child.next_regex_items(ctx) {
                Ok(child_items) => {
                    if key == SELF_KEY {
                        items.extend(child_items);
                    } else {
                        let mut sorted = child_items;
                        sorted.sort_unstable();
                        sorted.dedup();
                        items.push(join_alts(&sorted));
                    }
                }
                Err(TopError::DeadEnd { .. }) => dead_keys.push(key.clone()),
                Err(e) => return Err(e),
            }
        }
        self.children.retain(|(k, _)| !dead_keys.contains(k));
        if items.is_empty() {
            return Err(TopError::DeadEnd {
                expected: Vec::new(),
                detail: format!("every child of {:?} is a dead end", self.kind),
            });
        }
        Ok(items)
    }

    fn ensure_children(&mut self, ctx: &mut NodeCtx) -> Result<(), TopError> {
        if !self.children.is_empty() || self.ip.is_none() {
            return Ok(());
        }
        let accepts = self.accepts_filtered();
        let ip = self.ip.as_ref().unwrap();
        let mut placeholder_names: Vec<(TermId, String)> = Vec::new();
        let mut exist_nonplaceholder = false;
        for tid in accepts {
            let term = ip.tables().terminal(tid);
            if term.is_placeholder() {
                placeholder_names.push((tid, term.name.clone()));
            } else if !term.is_end() {
                exist_nonplaceholder = true;
            }
        }
        if placeholder_names.is_empty() {
            return Ok(());
        }

        // union-type prefix: several prefix placeholders collapse into one child
        let prefix_kind = |n: &str| {
            matches!(
                n,
                "<NUM_PREFIX_EXP>" | "<STR_PREFIX_EXP>" | "<BOOL_PREFIX_EXP>"
            )
        };
        let prefix_count = placeholder_names
            .iter()
            .filter(|(_, n)| prefix_kind(n))
            .count();

        if prefix_count >= 2 {
            let mut specs = Vec::new();
            let mut rest = Vec::new();
            for (tid, name) in &placeholder_names {
                if prefix_kind(name) {
                    let ends = self.follow_lexemes(*tid, name)?;
                    let (role, targets, tvariant) = match name.as_str() {
                        "<NUM_PREFIX_EXP>" => (
                            ExprRole::Num,
                            vec![TypeDescriptor::Number],
                            TraceVariant::Expression,
                        ),
                        "<STR_PREFIX_EXP>" => (
                            ExprRole::Str,
                            vec![TypeDescriptor::Str],
                            TraceVariant::Expression,
                        ),
                        _ => (ExprRole::Bool, vec![], TraceVariant::BooleanCoerce),
                    };
                    specs.push(RoleSpec {
                        role: Some(role),
                        targets,
                        tvariant,
                        ends,
                    });
                } else {
                    rest.push((*tid, name.clone()));
                }
            }
            let child = self.spawn_prefix(PrefixVariant::Union, specs, ctx)?;
            if let Some(child) = child {
                self.children.push((UNION_KEY.to_string(), child));
            }
            for (tid, name) in rest {
                if let Some(child) = self.spawn_child(tid, &name, ctx)? {
                    self.children.push((name, child));
                }
            }
        } else {
            for (tid, name) in placeholder_names {
                if let Some(child) = self.spawn_child(tid, &name, ctx)? {
                    self.children.push((name, child));
                }
            }
        }

        if self.children.is_empty() {
            // every prospective child was unviable; fall back to leaf terminals
            return Ok(());
        }
        if exist_nonplaceholder {
            let mut cont = self.clone();
            cont.children.clear();
            cont.is_continuation = true;
            self.children.push((SELF_KEY.to_string(), cont));
        }
        Ok(())
    }

    fn leaf_items(&mut self, ctx: &mut NodeCtx) -> Result<Vec<String>, TopError> {
        let accepts = self.accepts_filtered();
        let mut items = Vec::new();
        for tid in accepts {
            let term = self
                .ip
                .as_ref()
                .unwrap()
                .tables()
                .terminal(tid)
                .clone();
            if term.is_end() || term.is_placeholder() {
                continue;
            }
            if let Some(item) = self.terminal_item(tid, &term, ctx)? {
                items.push(item);
            }
        }
        items.sort_unstable();
        items.dedup();
        Ok(items)
    }

    fn terminal_item(
        &mut self,
        tid: TermId,
        term: &Terminal,
        ctx: &mut NodeCtx,
    ) -> Result<Option<String>, TopError> {
        let name = term.name.as_str();

        // keyword spacing: statement and expression keywords that could fuse
        // with an identifier (root-grammar keywords stay bare)
        let spacing_site = matches!(
            (self.kind, name),
            (NodeKind::DoBlock, "do")
                | (NodeKind::IfBlock, "if")
                | (NodeKind::WhileBlock, "while")
                | (NodeKind::ForBlock, "for")
                | (NodeKind::LocalVarDef, "local")
                | (NodeKind::BoolExp, "not")
        );
        if spacing_site {
            if let Some(spaced) = keyword_spacing(name) {
                return Ok(Some(spaced));
            }
        }
        if name == "return" {
            let void = matches!(&self.state, KindState::Return { ret } if *ret == TypeDescriptor::Void);
            return Ok(Some(if void {
                "return(;|\\s)".to_string()
            } else {
                "return\\s".to_string()
            }));
        }

        // end symbols whose parent continues with a single literal absorb it,
        // so token healing sees one boundary (the `NewTalent(` shape)
        if self.end_lexemes.iter().any(|e| e == name) {
            if let Some((_, ext)) = self.end_exts.iter().find(|(l, _)| l == name) {
                let base = term.pattern_text().unwrap();
                return Ok(Some(format!("{base}\\s*{ext}")));
            }
            // an end symbol that prefixes a sibling end symbol (else/elseif)
            // requires following whitespace to stay non-extensible
            if self
                .end_lexemes
                .iter()
                .any(|other| other != name && other.starts_with(name))
            {
                let base = term.pattern_text().unwrap();
                return Ok(Some(format!("{base}\\s")));
            }
        }

        // prefix-expression leaf states: "." and end symbols are gated by the
        // current chain type
        if let KindState::Prefix(p) = &self.state {
            let cur = p.cur.clone();
            if name == "." {
                let viable = match &cur {
                    Some(TypeDescriptor::Table(t)) => {
                        let table = t.clone();
                        p.specs.iter().any(|spec| {
                            let mut w = crate::env::trace::TypeWalker::new(
                                ctx.env,
                                &spec.targets,
                                spec.tvariant,
                            );
                            w.deeper(&table)
                        })
                    }
                    _ => false,
                };
                return Ok(viable.then(|| "\\.".to_string()));
            }
            if self.end_lexemes.iter().any(|e| e == name) {
                let ok = match p.variant {
                    PrefixVariant::CallStatement => p.made_call,
                    _ => match &cur {
                        Some(ty) => p.specs.iter().any(|spec| {
                            if !spec.ends.iter().any(|e| e == name) {
                                return false;
                            }
                            let w = crate::env::trace::TypeWalker::new(
                                ctx.env,
                                &spec.targets,
                                spec.tvariant,
                            );
                            w.leaf_ok(ty, false)
                        }),
                        None => false,
                    },
                };
                if !ok {
                    return Ok(None);
                }
                return Ok(Some(term.pattern_text().unwrap()));
            }
        }

        // type names: void is a valid base type only right after "->"
        if name == "BASE_TYPE" {
            if let KindState::TypeSpec {
                base_names,
                after_arrow,
                ..
            } = &self.state
            {
                let names: Vec<String> = base_names
                    .iter()
                    .filter(|n| *after_arrow || n.as_str() != "void")
                    .cloned()
                    .collect();
                if names.is_empty() {
                    return Ok(None);
                }
                let pattern = names.join("|");
                return self.extend_if_needed(tid, &pattern, ctx).map(Some);
            }
        }

        // function-expression parameter names carry their exact follow
        if name == "NEW_VAR_NAME" {
            if let KindState::Func { sig, names, .. } = &self.state {
                let follow = if names.len() + 1 < sig.params.len() {
                    ","
                } else {
                    "\\)"
                };
                return Ok(Some(format!("{}\\s*{}", templates::NAME_PATTERN, follow)));
            }
        }

        let pattern = term.pattern_text().unwrap();
        self.extend_if_needed(tid, &pattern, ctx).map(Some)
    }

    /// Look-ahead extension: append the union of the next terminals when the
    /// pattern alone is extensible.
    fn extend_if_needed(
        &self,
        tid: TermId,
        pattern: &str,
        ctx: &mut NodeCtx,
    ) -> Result<String, TopError> {
        let dfa = ctx.dfa(pattern)?;
        if is_nonextensible(&dfa) {
            return Ok(RegexPattern::new(pattern).grouped_text());
        }
        let mut follows: Vec<String> = Vec::new();
        for t in self.follow_after(tid)? {
            if t.is_end() {
                continue;
            }
            if t.is_placeholder() {
                return Err(TopError::GrammarDesign(format!(
                    "extensible terminal '{}' is followed by placeholder '{}'",
                    pattern, t.name
                )));
            }
            if let Some(p) = t.pattern_text() {
                follows.push(p);
            }
        }
        if follows.is_empty() {
            return Err(TopError::GrammarDesign(format!(
                "extensible terminal '{pattern}' has no follow terminals"
            )));
        }
        follows.sort_unstable();
        follows.dedup();
        Ok(format!(
            "{}\\s*{}",
            RegexPattern::new(pattern).grouped_text(),
            join_alts(&follows)
        ))
    }

    // ------------------------------------------------------------------
    // child spawning
    // ------------------------------------------------------------------

    fn spawn_child(
        &mut self,
        tid: TermId,
        name: &str,
        ctx: &mut NodeCtx,
    ) -> Result<Option<ParserNode>, TopError> {
        match name {
            "<DO_BLOCK>" => Ok(Some(make_simple(
                NodeKind::DoBlock,
                templates::do_block_template(),
                self.scopes.clone(),
                ctx,
            )?)),
            "<IF_BLOCK>" => Ok(Some(make_simple(
                NodeKind::IfBlock,
                templates::if_block_template(),
                self.scopes.clone(),
                ctx,
            )?)),
            "<WHILE_BLOCK>" => Ok(Some(make_simple(
                NodeKind::WhileBlock,
                templates::while_block_template(),
                self.scopes.clone(),
                ctx,
            )?)),
            "<FOR_BLOCK>" => Ok(Some(make_simple(
                NodeKind::ForBlock,
                templates::for_block_template(),
                self.scopes.clone(),
                ctx,
            )?)),
            "<ASSIGNMENT_STAT>" => {
                let ip = build_ip(&templates::assignment_template(), &BTreeMap::new(), ctx.cache)?;
                Ok(Some(ParserNode::with_ip(
                    NodeKind::Assignment,
                    ip,
                    self.scopes.clone(),
                    KindState::Assignment { lvalue: None },
                    Vec::new(),
                    false,
                )))
            }
            "<LOCALVARDEF_STAT>" => {
                let ip = build_ip(&templates::localvardef_template(), &BTreeMap::new(), ctx.cache)?;
                Ok(Some(ParserNode::with_ip(
                    NodeKind::LocalVarDef,
                    ip,
                    self.scopes.clone(),
                    KindState::LocalVarDef { ty: None },
                    Vec::new(),
                    false,
                )))
            }
            "<RETURN_STAT>" => {
                let ret = self
                    .scopes
                    .current_fn_ret()
                    .cloned()
                    .unwrap_or(TypeDescriptor::Void);
                let ip = build_ip(&templates::return_template(), &BTreeMap::new(), ctx.cache)?;
                Ok(Some(ParserNode::with_ip(
                    NodeKind::ReturnStat,
                    ip,
                    self.scopes.clone(),
                    KindState::Return { ret },
                    Vec::new(),
                    false,
                )))
            }
            "<PREFIX_EXP>" => {
                let ends = self.follow_lexemes(tid, name)?;
                let (variant, tvariant, targets) = match self.kind {
                    NodeKind::Assignment => (
                        PrefixVariant::MutableLvalue,
                        TraceVariant::MutableLvalue,
                        vec![],
                    ),
                    _ => (
                        PrefixVariant::CallStatement,
                        TraceVariant::CallStatement,
                        vec![],
                    ),
                };
                let specs = vec![RoleSpec {
                    role: None,
                    targets,
                    tvariant,
                    ends,
                }];
                self.spawn_prefix(variant, specs, ctx)
            }
            "<NUM_PREFIX_EXP>" | "<STR_PREFIX_EXP>" | "<BOOL_PREFIX_EXP>" => {
                let ends = self.follow_lexemes(tid, name)?;
                let (role, targets, tvariant) = match name {
                    "<NUM_PREFIX_EXP>" => (
                        ExprRole::Num,
                        vec![TypeDescriptor::Number],
                        TraceVariant::Expression,
                    ),
                    "<STR_PREFIX_EXP>" => (
                        ExprRole::Str,
                        vec![TypeDescriptor::Str],
                        TraceVariant::Expression,
                    ),
                    _ => (ExprRole::Bool, vec![], TraceVariant::BooleanCoerce),
                };
                let specs = vec![RoleSpec {
                    role: Some(role),
                    targets,
                    tvariant,
                    ends,
                }];
                self.spawn_prefix(PrefixVariant::Expression, specs, ctx)
            }
            "<FUNC_PREFIX_EXP>" => {
                let ends = self.follow_lexemes(tid, name)?;
                let sig = match &self.state {
                    KindState::Func { sig, .. } => sig.clone(),
                    _ => return Err(TopError::Internal("func prefix outside func".into())),
                };
                let specs = vec![RoleSpec {
                    role: None,
                    targets: vec![TypeDescriptor::Function(sig)],
                    tvariant: TraceVariant::Expression,
                    ends,
                }];
                self.spawn_prefix(PrefixVariant::Expression, specs, ctx)
            }
            "<TABLE_PREFIX_EXP>" => {
                let ends = self.follow_lexemes(tid, name)?;
                let target = match &self.state {
                    KindState::Table { type_name, .. } => TypeDescriptor::table(type_name),
                    _ => return Err(TopError::Internal("table prefix outside table".into())),
                };
                let specs = vec![RoleSpec {
                    role: None,
                    targets: vec![target],
                    tvariant: TraceVariant::Expression,
                    ends,
                }];
                self.spawn_prefix(PrefixVariant::Expression, specs, ctx)
            }
            "<BLOCK>" => {
                let ends = self.follow_lexemes(tid, name)?;
                let end_exts = self.end_extensions(tid, &ends);
                let mut scopes = self.scopes.clone();
                let mut is_function_body = false;
                match (&self.kind, &self.state) {
                    (NodeKind::WhileBlock, _) => scopes.push(ScopeKind::Loop),
                    (NodeKind::ForBlock, _) => {
                        scopes.push(ScopeKind::Loop);
                        if let Some(var) = self.first_lexeme_of("NEW_VAR_NAME") {
                            scopes.declare(&var, TypeDescriptor::Number);
                        }
                    }
                    (NodeKind::FuncExp, KindState::Func { sig, names, .. }) => {
                        scopes.push(ScopeKind::Function(sig.ret.clone()));
                        for (i, pname) in names.iter().enumerate() {
                            if let Some((_, ty)) = sig.params.get(i) {
                                scopes.declare(pname, ty.clone());
                            }
                        }
                        is_function_body = true;
                    }
                    _ => scopes.push(ScopeKind::Block),
                }
                let mut block = make_block(scopes, &ends, is_function_body, ctx)?;
                block.end_exts = end_exts;
                Ok(Some(block))
            }
            "<BOOL_EXP>" => {
                let ends = self.follow_lexemes(tid, name)?;
                Ok(Some(make_expr(
                    NodeKind::BoolExp,
                    self.scopes.clone(),
                    &ends,
                    ctx,
                )?))
            }
            "<NUM_EXP>" => {
                let ends = self.follow_lexemes(tid, name)?;
                Ok(Some(make_expr(
                    NodeKind::NumExp,
                    self.scopes.clone(),
                    &ends,
                    ctx,
                )?))
            }
            "<EXP>" => {
                // the argument list's follow set is another placeholder; its
                // delimiters come from the arity position instead
                let mut ends = match &self.state {
                    KindState::ArgList { params, pos } => {
                        if pos + 1 < params.len() {
                            vec![",".to_string()]
                        } else {
                            vec![")".to_string()]
                        }
                    }
                    _ => self.follow_lexemes(tid, name)?,
                };
                if let KindState::Table { used, required, .. } = &self.state {
                    if required.iter().any(|r| !used.contains(r)) {
                        ends.retain(|e| e != "}");
                    }
                }
                let target = match (&self.kind, &self.state) {
                    (NodeKind::IfBlock, _) => TypeDescriptor::Boolean,
                    (NodeKind::LocalVarDef, KindState::LocalVarDef { ty }) => ty
                        .clone()
                        .ok_or_else(|| TopError::Internal("exp before type spec".into()))?,
                    (NodeKind::Assignment, KindState::Assignment { lvalue }) => lvalue
                        .clone()
                        .ok_or_else(|| TopError::Internal("exp before lvalue".into()))?,
                    (NodeKind::ReturnStat, KindState::Return { ret }) => ret.clone(),
                    (NodeKind::ArgList, KindState::ArgList { params, pos }) => params
                        .get(*pos)
                        .cloned()
                        .ok_or_else(|| TopError::Internal("arg position out of range".into()))?,
                    (NodeKind::TableExp, KindState::Table {
                        type_name,
                        pending_key,
                        ..
                    }) => {
                        let key = pending_key
                            .clone()
                            .ok_or_else(|| TopError::Internal("exp before key".into()))?;
                        ctx.env
                            .table(type_name)
                            .and_then(|t| t.field(&key))
                            .map(|f| f.ty.clone())
                            .ok_or_else(|| {
                                TopError::Internal(format!("unknown table key {key}"))
                            })?
                    }
                    (NodeKind::TableExp, _) => {
                        return Err(TopError::Internal("table state mismatch".into()))
                    }
                    _ => {
                        return Err(TopError::Internal(format!(
                            "<EXP> spawned by unexpected kind {:?}",
                            self.kind
                        )))
                    }
                };
                Ok(Some(make_typed_exp(&target, self.scopes.clone(), &ends, ctx)?))
            }
            "<TYPE_SPEC>" => {
                let ends = self.follow_lexemes(tid, name)?;
                let restricted = matches!(self.kind, NodeKind::EffectRoot);
                Ok(Some(make_type_spec(
                    self.scopes.clone(),
                    &ends,
                    !restricted,
                    ctx,
                )?))
            }
            "<ARGLIST>" => {
                let params = match &self.state {
                    KindState::Prefix(p) => match &p.pending_call {
                        Some(f) => f.param_types().cloned().collect::<Vec<_>>(),
                        None => return Err(TopError::Internal("arglist without call".into())),
                    },
                    _ => return Err(TopError::Internal("arglist outside prefix".into())),
                };
                let ip = build_ip(&templates::arg_list_template(), &BTreeMap::new(), ctx.cache)?;
                Ok(Some(ParserNode::with_ip(
                    NodeKind::ArgList,
                    ip,
                    self.scopes.clone(),
                    KindState::ArgList { params, pos: 0 },
                    Vec::new(),
                    false,
                )))
            }
            "<FIELD>" => {
                let leaf = self.build_field_leaf(ctx)?;
                if leaf.is_empty() {
                    return Ok(None);
                }
                Ok(Some(ParserNode::field_leaf(leaf, self.scopes.clone())))
            }
            "<KEY>" => {
                let leaf = self.build_key_leaf(ctx)?;
                if leaf.is_empty() {
                    return Ok(None);
                }
                Ok(Some(ParserNode::field_leaf(leaf, self.scopes.clone())))
            }
            "<TABLE_EXP>" => {
                let ends = self.follow_lexemes(tid, name)?;
                let type_name = match self.kind {
                    NodeKind::EffectRoot => PENDING_EFFECT_DEF.to_string(),
                    NodeKind::TalentRoot => "TalentDef".to_string(),
                    _ => return Err(TopError::Internal("<TABLE_EXP> outside a root".into())),
                };
                Ok(Some(make_table_exp(
                    &type_name,
                    self.scopes.clone(),
                    &ends,
                    ctx,
                )?))
            }
            other => Err(TopError::Internal(format!(
                "no spawn rule for placeholder {other}"
            ))),
        }
    }

    fn spawn_prefix(
        &self,
        variant: PrefixVariant,
        specs: Vec<RoleSpec>,
        ctx: &mut NodeCtx,
    ) -> Result<Option<ParserNode>, TopError> {
        let mut all_ends: Vec<String> = specs.iter().flat_map(|s| s.ends.clone()).collect();
        all_ends.sort_unstable();
        all_ends.dedup();
        let mut fills = BTreeMap::new();
        fills.insert("end_symbols".to_string(), end_fill(&all_ends));
        let ip = build_ip(&templates::prefix_exp_template(), &fills, ctx.cache)?;
        let state = KindState::Prefix(PrefixState {
            variant,
            specs,
            cur: None,
            pending_call: None,
            made_call: false,
            resolved: None,
        });
        let node = ParserNode::with_ip(
            NodeKind::PrefixExp,
            ip,
            self.scopes.clone(),
            state,
            all_ends,
            true,
        );
        Ok(Some(node))
    }

    /// Candidate set for the next `<FIELD>`: scope variables at the chain
    /// head, fields of the current prefix type afterwards.
    fn build_field_leaf(&self, ctx: &mut NodeCtx) -> Result<FieldLeaf, TopError> {
        let p = match &self.state {
            KindState::Prefix(p) => p,
            _ => return Err(TopError::Internal("<FIELD> outside prefix".into())),
        };
        // (name, type, binding mutability)
        let pool: Vec<(String, TypeDescriptor, bool)> = match &p.cur {
            None => self.scopes.visible_with_mutability(),
            Some(TypeDescriptor::Table(tname)) => match ctx.env.table(tname) {
                Some(table) => table
                    .fields
                    .iter()
                    .filter(|(n, _)| !(n == "GetTalentLevel" && !ctx.env.in_talent))
                    .map(|(n, f)| (n.clone(), f.ty.clone(), f.mutable))
                    .collect(),
                None => Vec::new(),
            },
            Some(_) => Vec::new(),
        };

        let mut walkers: Vec<(crate::env::trace::TypeWalker, &RoleSpec)> = p
            .specs
            .iter()
            .map(|spec| {
                (
                    crate::env::trace::TypeWalker::new(ctx.env, &spec.targets, spec.tvariant),
                    spec,
                )
            })
            .collect();

        let mut candidates = Vec::new();
        for (name, ty, binding_mutable) in pool {
            let mut follows: BTreeSet<String> = BTreeSet::new();
            for (walker, spec) in walkers.iter_mut() {
                if walker.leaf_ok(&ty, binding_mutable) {
                    follows.extend(spec.ends.iter().cloned());
                }
                match &ty {
                    TypeDescriptor::Table(tname) => {
                        if walker.deeper(tname) {
                            follows.insert(".".to_string());
                        }
                    }
                    TypeDescriptor::Function(f)
                        if walker.call_ok(f) => {
                            follows.insert("(".to_string());
                        }
                    _ => {}
                }
            }
            if follows.is_empty() {
                continue;
            }
            candidates.push(FieldCandidate {
                name,
                ty,
                follows: follows.iter().map(|l| Follow::new(l)).collect(),
            });
        }
        Ok(FieldLeaf::new(candidates))
    }

    fn build_key_leaf(&self, ctx: &mut NodeCtx) -> Result<FieldLeaf, TopError> {
        let (type_name, used) = match &self.state {
            KindState::Table {
                type_name, used, ..
            } => (type_name.clone(), used.clone()),
            _ => return Err(TopError::Internal("<KEY> outside table".into())),
        };
        let table = ctx
            .env
            .table(&type_name)
            .ok_or_else(|| TopError::Internal(format!("unknown table type {type_name}")))?;
        let candidates = table
            .fields
            .iter()
            .filter(|(n, _)| !used.contains(n))
            .map(|(n, f)| FieldCandidate {
                name: n.clone(),
                ty: f.ty.clone(),
                follows: vec![Follow::new("=")],
            })
            .collect();
        Ok(FieldLeaf::new(candidates))
    }

    // ------------------------------------------------------------------
    // feeding
    // ------------------------------------------------------------------

    pub fn feed_text(&mut self, text: &str, ctx: &mut NodeCtx) -> Result<(), TopError> {
        if self.children.is_empty() {
            return self.leaf_feed(text, ctx);
        }

        let mut survivors: Vec<(String, ParserNode)> = Vec::new();
        let mut errors: Vec<String> = Vec::new();
        for (key, mut child) in std::mem::take(&mut self.children) {
            match child.feed_text(text, ctx) {
                Ok(()) => survivors.push((key, child)),
                Err(e) => errors.push(format!("{key}: {e}")),
            }
        }
        self.children = survivors;

        if self.children.is_empty() {
            return Err(TopError::DeadEnd {
                expected: Vec::new(),
                detail: format!("all children pruned on segment {text:?}: {}", errors.join("; ")),
            });
        }
        if self.children.len() == 1 && self.children[0].0 == SELF_KEY {
            // every speculative child failed; continue as the plain parser
            let (_, cont) = self.children.pop().unwrap();
            *self = cont;
            self.is_continuation = false;
            return Ok(());
        }

        let finished: Vec<usize> = self
            .children
            .iter()
            .enumerate()
            .filter(|(_, (key, c))| key != SELF_KEY && c.has_finished())
            .map(|(i, _)| i)
            .collect();
        match finished.len() {
            0 => Ok(()),
            1 => {
                let (key, child) = self.children.remove(finished[0]);
                self.children.clear();
                self.finish_child(&key, child, ctx)
            }
            _ => Err(TopError::Internal(
                "two children finished on the same segment".to_string(),
            )),
        }
    }

    fn leaf_feed(&mut self, text: &str, ctx: &mut NodeCtx) -> Result<(), TopError> {
        if let KindState::Field(leaf) = &mut self.state {
            return leaf
                .feed(text)
                .map_err(|detail| TopError::DeadEnd {
                    expected: Vec::new(),
                    detail,
                });
        }
        let ip = self
            .ip
            .as_mut()
            .ok_or_else(|| TopError::Internal("leaf without parser".into()))?;
        let (lexed, leftover) = ip.feed_text_partial(text).map_err(|e| TopError::DeadEnd {
            expected: Vec::new(),
            detail: e.to_string(),
        })?;
        for (tid, lexeme) in lexed {
            let term_name = self.ip.as_ref().unwrap().tables().terminal(tid).name.clone();
            self.note_lexed(&term_name, &lexeme, ctx)?;
        }
        if let Some(offset) = leftover {
            // an unlexable tail is legal only when this node just finished:
            // it is the parent's续 text absorbed by a look-ahead extension
            if self.has_finished() {
                self.residue = Some(text[offset..].to_string());
            } else {
                let expected = self
                    .ip
                    .as_ref()
                    .map(|ip| ip.accept_names())
                    .unwrap_or_default();
                return Err(TopError::DeadEnd {
                    expected: expected.clone(),
                    detail: format!(
                        "no terminal matches {:?}; expected one of {expected:?}",
                        &text[offset..]
                    ),
                });
            }
        }
        Ok(())
    }

    fn note_lexed(&mut self, term: &str, lexeme: &str, ctx: &mut NodeCtx) -> Result<(), TopError> {
        self.parts.push(Part::Lex(term.to_string(), lexeme.to_string()));
        if self.has_end_slot && self.end_lexemes.iter().any(|e| e == lexeme) {
            // remember the latest end-symbol lexeme; if the node is finished
            // after this feed, this is the lexeme the parent replays
            if self.ip.as_ref().map(|ip| ip.only_end_accepted()).unwrap_or(false) {
                self.end_lexeme = Some(lexeme.to_string());
            }
        }
        match (&mut self.state, term) {
            (KindState::TypeSpec { after_arrow, .. }, _) => {
                *after_arrow = lexeme == "->";
            }
            (KindState::Func { names, .. }, "NEW_VAR_NAME") => {
                names.push(lexeme.to_string());
            }
            (KindState::Func { params_closed, .. }, ")") => {
                *params_closed = true;
            }
            (KindState::Effect {
                fields,
                registered,
                pending_field,
                ..
            }, t) => {
                if t == "FIELD_NAME" {
                    *pending_field = Some(lexeme.to_string());
                }
                if t == ";" && !*registered {
                    let collected = std::mem::take(fields);
                    *registered = true;
                    let restored = register_provisional_effect_types(ctx.env, &collected)?;
                    *fields = restored;
                }
            }
            _ => {}
        }
        Ok(())
    }

    // ------------------------------------------------------------------
    // merging
    // ------------------------------------------------------------------

    fn finish_child(
        &mut self,
        key: &str,
        mut child: ParserNode,
        ctx: &mut NodeCtx,
    ) -> Result<(), TopError> {
        child.finalize(ctx)?;

        // the placeholder terminal to shift
        let placeholder = if key == UNION_KEY {
            let (resolved, end, roles) = match &child.state {
                KindState::Prefix(p) => (
                    p.resolved.clone().unwrap_or(TypeDescriptor::Void),
                    child.end_lexeme.clone().unwrap_or_default(),
                    p.specs
                        .iter()
                        .filter_map(|s| s.role.map(|r| (r, s.ends.clone())))
                        .collect::<Vec<_>>(),
                ),
                _ => return Err(TopError::Internal("union child is not a prefix".into())),
            };
            resolve_finish_placeholder(&resolved, &end, &roles)
                .ok_or_else(|| {
                    TopError::Internal(format!(
                        "no placeholder for union prefix of type {resolved} ending {end:?}"
                    ))
                })?
                .to_string()
        } else {
            key.to_string()
        };

        match (self.kind, &child.kind) {
            (NodeKind::PrefixExp, NodeKind::Field) => {
                return self.finish_field_child(child, ctx);
            }
            (NodeKind::TableExp, NodeKind::Field) => {
                return self.finish_key_child(child, ctx);
            }
            (NodeKind::PrefixExp, NodeKind::ArgList) => {
                let ip = self.ip.as_mut().unwrap();
                ip.feed_terminal_by_name(&placeholder)
                    .map_err(|e| TopError::Internal(format!("placeholder shift failed: {e}")))?;
                if let Some(AstNode::Block(args)) = child.ast.clone() {
                    self.parts.push(Part::Child(AstNode::Block(args)));
                }
                if let KindState::Prefix(p) = &mut self.state {
                    let ret = p
                        .pending_call
                        .take()
                        .map(|f| f.ret.clone())
                        .ok_or_else(|| TopError::Internal("arglist without pending call".into()))?;
                    p.cur = Some(ret);
                    p.made_call = true;
                }
                return Ok(());
            }
            _ => {}
        }

        let ip = self
            .ip
            .as_mut()
            .ok_or_else(|| TopError::Internal("finish on a leaf".into()))?;
        ip.feed_terminal_by_name(&placeholder)
            .map_err(|e| TopError::Internal(format!("placeholder shift failed: {e}")))?;

        // fragment lands at the placeholder position (type specs resolve to a
        // descriptor instead of a fragment)
        if child.kind != NodeKind::TypeSpec {
            if let Some(ast) = child.ast.clone() {
                self.parts.push(Part::Child(ast));
            }
        }

        // special-case the argument list's comma bookkeeping
        if self.kind == NodeKind::ArgList {
            if let KindState::ArgList { pos, .. } = &mut self.state {
                *pos += 1;
            }
            match child.end_lexeme.as_deref() {
                Some(",") => { /* argument separator, swallowed */ }
                Some(")") => {
                    let lexed = self
                        .ip
                        .as_mut()
                        .unwrap()
                        .feed_text(")")
                        .map_err(|e| TopError::Internal(format!("replay failed: {e}")))?;
                    for (tid, lexeme) in lexed {
                        let name = self.ip.as_ref().unwrap().tables().terminal(tid).name.clone();
                        self.parts.push(Part::Lex(name, lexeme));
                    }
                }
                other => {
                    return Err(TopError::Internal(format!(
                        "argument expression ended with {other:?}"
                    )))
                }
            }
        } else if child.has_end_slot {
            if let Some(end) = child.end_lexeme.clone() {
                let lexed = self
                    .ip
                    .as_mut()
                    .unwrap()
                    .feed_text(&end)
                    .map_err(|e| TopError::Internal(format!("end replay failed: {e}")))?;
                for (tid, lexeme) in lexed {
                    let name = self.ip.as_ref().unwrap().tables().terminal(tid).name.clone();
                    self.note_lexed(&name, &lexeme, ctx)?;
                }
            }
        }
        if let Some(residue) = child.residue.clone() {
            let (lexed, leftover) = self
                .ip
                .as_mut()
                .unwrap()
                .feed_text_partial(&residue)
                .map_err(|e| TopError::Internal(format!("residue replay failed: {e}")))?;
            for (tid, lexeme) in lexed {
                let name = self.ip.as_ref().unwrap().tables().terminal(tid).name.clone();
                self.note_lexed(&name, &lexeme, ctx)?;
            }
            if let Some(offset) = leftover {
                if self.has_finished() {
                    self.residue = Some(residue[offset..].to_string());
                } else {
                    return Err(TopError::Internal(format!(
                        "residue {:?} not consumable",
                        &residue[offset..]
                    )));
                }
            }
        }

        // the definition call of a root is lexically inside the do-block; the
        // block's locals stay visible for the definition table
        if matches!(self.kind, NodeKind::EffectRoot | NodeKind::TalentRoot)
            && child.kind == NodeKind::Block
        {
            self.scopes = child.scopes.clone();
        }

        // kind-specific merges
        match (&mut self.state, &child.kind, &child.state) {
            (KindState::Block { returned, .. }, _, _) => {
                if let Some(ast) = &child.ast {
                    if ast.guarantees_return() {
                        *returned = true;
                    }
                }
                if child.kind == NodeKind::LocalVarDef {
                    if let (Some(AstNode::VarDef { name, ty, .. }), _) = (&child.ast, ()) {
                        self.scopes.declare(name, ty.clone());
                    }
                }
            }
            (KindState::Assignment { lvalue }, NodeKind::PrefixExp, KindState::Prefix(p)) => {
                *lvalue = p.resolved.clone();
            }
            (KindState::LocalVarDef { ty }, NodeKind::TypeSpec, KindState::TypeSpec { resolved, .. }) => {
                *ty = resolved.clone();
            }
            (KindState::Effect {
                fields,
                pending_field,
                ..
            }, NodeKind::TypeSpec, KindState::TypeSpec { resolved, .. }) => {
                let fname = pending_field
                    .take()
                    .ok_or_else(|| TopError::Internal("type spec without field name".into()))?;
                let fty = resolved
                    .clone()
                    .ok_or_else(|| TopError::Internal("unresolved interface field type".into()))?;
                fields.push((fname, fty));
            }
            (KindState::Table { pending_key, .. }, _, _) => {
                *pending_key = None;
            }
            _ => {}
        }
        Ok(())
    }

    fn finish_field_child(&mut self, child: ParserNode, ctx: &mut NodeCtx) -> Result<(), TopError> {
        let leaf = match &child.state {
            KindState::Field(leaf) => leaf,
            _ => unreachable!(),
        };
        let (name, ty) = leaf
            .chosen()
            .map(|(n, t)| (n.to_string(), t.clone()))
            .ok_or_else(|| TopError::Internal("field leaf finished without a choice".into()))?;
        let trailing = leaf
            .trailing()
            .map(str::to_string)
            .ok_or_else(|| TopError::Internal("field leaf finished without a follow".into()))?;

        let ip = self.ip.as_mut().unwrap();
        ip.feed_terminal_by_name("<FIELD>")
            .map_err(|e| TopError::Internal(format!("field shift failed: {e}")))?;
        self.parts.push(Part::Lex("FIELD".to_string(), name.clone()));

        if let KindState::Prefix(p) = &mut self.state {
            p.cur = Some(ty.clone());
            if trailing == "(" {
                match &ty {
                    TypeDescriptor::Function(f) => p.pending_call = Some(f.clone()),
                    _ => {
                        return Err(TopError::Internal(format!(
                            "call on non-function field {name}"
                        )))
                    }
                }
            }
        }

        let lexed = self
            .ip
            .as_mut()
            .unwrap()
            .feed_text(&trailing)
            .map_err(|e| TopError::Internal(format!("field follow replay failed: {e}")))?;
        for (tid, lexeme) in lexed {
            let tname = self.ip.as_ref().unwrap().tables().terminal(tid).name.clone();
            self.note_lexed(&tname, &lexeme, ctx)?;
        }
        if let KindState::Prefix(p) = &mut self.state {
            if self.end_lexemes.iter().any(|e| e == &trailing) {
                p.resolved = Some(ty);
            }
        }
        Ok(())
    }

    fn finish_key_child(&mut self, child: ParserNode, ctx: &mut NodeCtx) -> Result<(), TopError> {
        let leaf = match &child.state {
            KindState::Field(leaf) => leaf,
            _ => unreachable!(),
        };
        let name = leaf
            .chosen()
            .map(|(n, _)| n.to_string())
            .ok_or_else(|| TopError::Internal("key leaf finished without a choice".into()))?;
        let ip = self.ip.as_mut().unwrap();
        ip.feed_terminal_by_name("<KEY>")
            .map_err(|e| TopError::Internal(format!("key shift failed: {e}")))?;
        self.parts.push(Part::Lex("KEY".to_string(), name.clone()));
        if let KindState::Table {
            used, pending_key, ..
        } = &mut self.state
        {
            used.push(name.clone());
            *pending_key = Some(name);
        }
        let lexed = self
            .ip
            .as_mut()
            .unwrap()
            .feed_text("=")
            .map_err(|e| TopError::Internal(format!("key follow replay failed: {e}")))?;
        for (tid, lexeme) in lexed {
            let tname = self.ip.as_ref().unwrap().tables().terminal(tid).name.clone();
            self.note_lexed(&tname, &lexeme, ctx)?;
        }
        Ok(())
    }

    // ------------------------------------------------------------------
    // finalization
    // ------------------------------------------------------------------

    /// Build the node's AST fragment and resolve its result type. Called by
    /// the parent right before merging, or by the root driver at the end.
    pub fn finalize(&mut self, ctx: &mut NodeCtx) -> Result<(), TopError> {
        if self.ast.is_some() {
            return Ok(());
        }
        // drop the consumed end symbol: syntactically it belongs to the parent
        if self.has_end_slot && self.end_lexeme.is_some() {
            if let Some(Part::Lex(_, lex)) = self.parts.last() {
                if Some(lex.as_str()) == self.end_lexeme.as_deref() {
                    self.parts.pop();
                }
            }
        }
        let ast = match (&mut self.kind, &mut self.state) {
            (NodeKind::Block, _) => AstNode::Block(collect_statements(&self.parts)),
            (NodeKind::DoBlock, _) => AstNode::DoBlock(child_block(&self.parts, 0)),
            (NodeKind::IfBlock, _) => build_if(&self.parts),
            (NodeKind::WhileBlock, _) => {
                let cond = nth_child(&self.parts, 0).unwrap_or(AstNode::Bool(true));
                AstNode::While {
                    cond: Box::new(cond),
                    body: child_block(&self.parts, 1),
                }
            }
            (NodeKind::ForBlock, _) => build_for(&self.parts),
            (NodeKind::Assignment, _) => {
                let target = nth_child(&self.parts, 0)
                    .ok_or_else(|| TopError::Internal("assignment without lvalue".into()))?;
                let value = nth_child(&self.parts, 1)
                    .ok_or_else(|| TopError::Internal("assignment without value".into()))?;
                AstNode::Assign {
                    target: Box::new(target),
                    value: Box::new(value),
                }
            }
            (NodeKind::LocalVarDef, KindState::LocalVarDef { ty }) => {
                let name = first_lexeme(&self.parts, "NEW_VAR_NAME")
                    .ok_or_else(|| TopError::Internal("vardef without a name".into()))?;
                let init = nth_child(&self.parts, 0)
                    .ok_or_else(|| TopError::Internal("vardef without initializer".into()))?;
                AstNode::VarDef {
                    name,
                    ty: ty.clone().unwrap_or(TypeDescriptor::Void),
                    init: Box::new(init),
                }
            }
            (NodeKind::ReturnStat, _) => AstNode::Return(nth_child(&self.parts, 0).map(Box::new)),
            (NodeKind::TypeSpec, KindState::TypeSpec { resolved, .. }) => {
                let text: String = self
                    .parts
                    .iter()
                    .filter_map(|p| match p {
                        Part::Lex(_, l) => Some(l.as_str()),
                        _ => None,
                    })
                    .collect();
                let ty = crate::env::parse_type_ref(ctx.env, &text)
                    .map_err(|e| TopError::Internal(format!("unresolvable type spec: {e}")))?;
                *resolved = Some(ty.clone());
                AstNode::Str(text)
            }
            (NodeKind::NumExp, _) | (NodeKind::StrExp, _) | (NodeKind::BoolExp, _) => {
                build_expression(&self.parts)
            }
            (NodeKind::PrefixExp, KindState::Prefix(p)) => {
                if p.resolved.is_none() {
                    p.resolved = p.cur.clone();
                }
                build_prefix_chain(&self.parts, p.resolved.clone().unwrap_or(TypeDescriptor::Void))
            }
            (NodeKind::ArgList, _) => AstNode::Block(
                self.parts
                    .iter()
                    .filter_map(|p| match p {
                        Part::Child(a) => Some(a.clone()),
                        _ => None,
                    })
                    .collect(),
            ),
            (NodeKind::FuncExp, KindState::Func { sig, names, .. }) => {
                match nth_child(&self.parts, 0) {
                    Some(AstNode::Block(body)) => AstNode::FuncDef {
                        params: names.clone(),
                        ty: sig.clone(),
                        body,
                    },
                    Some(prefix @ AstNode::Prefix { .. }) => prefix,
                    _ => return Err(TopError::Internal("function expression without body".into())),
                }
            }
            (NodeKind::TableExp, KindState::Table { type_name, .. }) => {
                match nth_child(&self.parts, 0) {
                    Some(prefix @ AstNode::Prefix { .. })
                        if !self.parts.iter().any(|p| matches!(p, Part::Lex(_, l) if l == "{")) =>
                    {
                        prefix
                    }
                    _ => build_table_init(&self.parts, type_name),
                }
            }
            (NodeKind::EffectRoot, KindState::Effect {
                effect_id, fields, ..
            }) => {
                let finished = self.children.is_empty()
                    && self
                        .ip
                        .as_ref()
                        .map(|ip| ip.only_end_accepted())
                        .unwrap_or(false);
                let interface = AstNode::InterfaceDef {
                    fields: fields.clone(),
                };
                let (block, def) = root_parts(&self.parts, PENDING_EFFECT_DEF);
                // registration happens once, when the script is complete;
                // partial snapshots must not touch the environment
                if finished {
                    let id = match effect_id.clone() {
                        Some(id) => id,
                        None => derive_effect_id(&def),
                    };
                    cleanup_provisional(ctx.env);
                    ctx.env
                        .register_effect(&id, fields.clone())
                        .map_err(|e| TopError::Env(e.to_string()))?;
                }
                AstNode::NewEffect {
                    interface: Box::new(interface),
                    block,
                    def: Box::new(def),
                }
            }
            (NodeKind::TalentRoot, _) => {
                let (block, def) = root_parts(&self.parts, "TalentDef");
                AstNode::NewTalent {
                    block,
                    def: Box::new(def),
                }
            }
            (NodeKind::Field, _) => AstNode::Str(String::new()),
            (kind, state) => {
                return Err(TopError::Internal(format!(
                    "finalize not implemented for {kind:?} / {state:?}"
                )))
            }
        };
        self.ast = Some(ast);
        Ok(())
    }

    fn first_lexeme_of(&self, term: &str) -> Option<String> {
        first_lexeme(&self.parts, term)
    }
}

// ----------------------------------------------------------------------
// constructors
// ----------------------------------------------------------------------

fn make_simple(
    kind: NodeKind,
    template: GrammarTemplate,
    scopes: ScopeStack,
    ctx: &mut NodeCtx,
) -> Result<ParserNode, TopError> {
    let ip = build_ip(&template, &BTreeMap::new(), ctx.cache)?;
    Ok(ParserNode::with_ip(
        kind,
        ip,
        scopes,
        KindState::Plain,
        Vec::new(),
        false,
    ))
}

pub fn make_block(
    scopes: ScopeStack,
    ends: &[String],
    is_function_body: bool,
    ctx: &mut NodeCtx,
) -> Result<ParserNode, TopError> {
    let mut fills = BTreeMap::new();
    fills.insert("end_symbols".to_string(), end_fill(ends));
    let ip = build_ip(&templates::block_template(), &fills, ctx.cache)?;
    Ok(ParserNode::with_ip(
        NodeKind::Block,
        ip,
        scopes,
        KindState::Block {
            is_function_body,
            returned: false,
        },
        ends.to_vec(),
        !ends.is_empty(),
    ))
}

fn make_expr(
    kind: NodeKind,
    scopes: ScopeStack,
    ends: &[String],
    ctx: &mut NodeCtx,
) -> Result<ParserNode, TopError> {
    let template = match kind {
        NodeKind::NumExp => templates::num_exp_template(),
        NodeKind::StrExp => templates::str_exp_template(),
        NodeKind::BoolExp => templates::bool_exp_template(),
        _ => unreachable!(),
    };
    let mut fills = BTreeMap::new();
    fills.insert("end_symbols".to_string(), end_fill(ends));
    let ip = build_ip(&template, &fills, ctx.cache)?;
    Ok(ParserNode::with_ip(
        kind,
        ip,
        scopes,
        KindState::Plain,
        ends.to_vec(),
        true,
    ))
}

pub fn make_typed_exp(
    target: &TypeDescriptor,
    scopes: ScopeStack,
    ends: &[String],
    ctx: &mut NodeCtx,
) -> Result<ParserNode, TopError> {
    match target {
        TypeDescriptor::Number => make_expr(NodeKind::NumExp, scopes, ends, ctx),
        TypeDescriptor::Str => make_expr(NodeKind::StrExp, scopes, ends, ctx),
        TypeDescriptor::Boolean => make_expr(NodeKind::BoolExp, scopes, ends, ctx),
        TypeDescriptor::Function(sig) => make_func_exp(sig.clone(), scopes, ends, ctx),
        TypeDescriptor::Table(name) => make_table_exp(name, scopes, ends, ctx),
        TypeDescriptor::Void => Err(TopError::GrammarDesign(
            "an expression cannot have type void".into(),
        )),
    }
}

fn make_func_exp(
    sig: Arc<FunctionType>,
    scopes: ScopeStack,
    ends: &[String],
    ctx: &mut NodeCtx,
) -> Result<ParserNode, TopError> {
    let mut fills = BTreeMap::new();
    fills.insert("end_symbols".to_string(), end_fill(ends));
    let ip = build_ip(&templates::func_exp_template(), &fills, ctx.cache)?;
    Ok(ParserNode::with_ip(
        NodeKind::FuncExp,
        ip,
        scopes,
        KindState::Func {
            sig,
            names: Vec::new(),
            params_closed: false,
        },
        ends.to_vec(),
        true,
    ))
}

fn make_table_exp(
    type_name: &str,
    scopes: ScopeStack,
    ends: &[String],
    ctx: &mut NodeCtx,
) -> Result<ParserNode, TopError> {
    let mut fills = BTreeMap::new();
    fills.insert("end_symbols".to_string(), end_fill(ends));
    let ip = build_ip(&templates::table_exp_template(), &fills, ctx.cache)?;
    let required: Vec<String> = ctx
        .env
        .table(type_name)
        .map(|t| {
            t.fields
                .iter()
                .filter(|(_, f)| f.required)
                .map(|(n, _)| n.clone())
                .collect()
        })
        .unwrap_or_default();
    Ok(ParserNode::with_ip(
        NodeKind::TableExp,
        ip,
        scopes,
        KindState::Table {
            type_name: type_name.to_string(),
            used: Vec::new(),
            required,
            pending_key: None,
        },
        ends.to_vec(),
        true,
    ))
}

fn make_type_spec(
    scopes: ScopeStack,
    ends: &[String],
    allow_function: bool,
    ctx: &mut NodeCtx,
) -> Result<ParserNode, TopError> {
    let mut base_names: Vec<String> = vec![
        "number".to_string(),
        "boolean".to_string(),
        "string".to_string(),
        "void".to_string(),
    ];
    let mut tables: Vec<String> = ctx.env.named_tables().map(|t| t.name.clone()).collect();
    tables.sort_unstable();
    base_names.extend(tables);
    let mut fills = BTreeMap::new();
    fills.insert("end_symbols".to_string(), end_fill(ends));
    fills.insert("base_type".to_string(), base_names.join("|"));
    let ip = build_ip(&templates::type_spec_template(), &fills, ctx.cache)?;
    Ok(ParserNode::with_ip(
        NodeKind::TypeSpec,
        ip,
        scopes,
        KindState::TypeSpec {
            base_names,
            allow_function,
            after_arrow: false,
            resolved: None,
        },
        ends.to_vec(),
        true,
    ))
}

pub fn make_effect_root(
    scopes: ScopeStack,
    effect_id: Option<String>,
    ctx: &mut NodeCtx,
) -> Result<ParserNode, TopError> {
    let ip = build_ip(&templates::effect_template(), &BTreeMap::new(), ctx.cache)?;
    Ok(ParserNode::with_ip(
        NodeKind::EffectRoot,
        ip,
        scopes,
        KindState::Effect {
            effect_id,
            fields: Vec::new(),
            registered: false,
            pending_field: None,
        },
        Vec::new(),
        false,
    ))
}

pub fn make_talent_root(scopes: ScopeStack, ctx: &mut NodeCtx) -> Result<ParserNode, TopError> {
    let ip = build_ip(&templates::talent_template(), &BTreeMap::new(), ctx.cache)?;
    Ok(ParserNode::with_ip(
        NodeKind::TalentRoot,
        ip,
        scopes,
        KindState::Talent,
        Vec::new(),
        false,
    ))
}

// ----------------------------------------------------------------------
// effect type specialization
// ----------------------------------------------------------------------

fn register_provisional_effect_types(
    env: &mut Environment,
    fields: &[(String, TypeDescriptor)],
) -> Result<Vec<(String, TypeDescriptor)>, TopError> {
    cleanup_provisional(env);

    let mut param_data = TableType::new(PENDING_PARAM_DATA);
    param_data.template = true;
    for (name, ty) in fields {
        param_data.push_field(
            name,
            FieldInfo {
                ty: ty.clone(),
                mutable: true,
                required: true,
                doc: String::new(),
            },
        );
    }

    let mut param = TableType::new(PENDING_PARAM);
    param.template = true;
    param.push_field(
        "duration",
        FieldInfo {
            ty: TypeDescriptor::Number,
            mutable: true,
            required: true,
            doc: String::new(),
        },
    );
    param.push_field(
        "owner",
        FieldInfo {
            ty: TypeDescriptor::table("Actor"),
            mutable: false,
            required: true,
            doc: String::new(),
        },
    );
    param.push_field(
        "data",
        FieldInfo {
            ty: TypeDescriptor::table(PENDING_PARAM_DATA),
            mutable: false,
            required: true,
            doc: String::new(),
        },
    );

    // specialize EffectDef: hook signatures reference the pending Param types
    let mut def = TableType::new(PENDING_EFFECT_DEF);
    def.template = true;
    if let Some(base) = env.table("EffectDef") {
        for (fname, info) in base.fields.clone() {
            def.push_field(
                &fname,
                FieldInfo {
                    ty: specialize(&info.ty),
                    mutable: info.mutable,
                    required: info.required,
                    doc: info.doc,
                },
            );
        }
    }

    env.register_type(param_data);
    env.register_type(param);
    env.register_type(def);
    Ok(fields.to_vec())
}

fn specialize(ty: &TypeDescriptor) -> TypeDescriptor {
    match ty {
        TypeDescriptor::Table(n) if n == "Param" => TypeDescriptor::table(PENDING_PARAM),
        TypeDescriptor::Table(n) if n == "ParamData" => TypeDescriptor::table(PENDING_PARAM_DATA),
        TypeDescriptor::Function(f) => TypeDescriptor::Function(FunctionType::new(
            f.params
                .iter()
                .map(|(n, t)| (n.clone(), specialize(t)))
                .collect(),
            specialize(&f.ret),
        )),
        other => other.clone(),
    }
}

fn cleanup_provisional(env: &mut Environment) {
    env.remove_type(PENDING_PARAM);
    env.remove_type(PENDING_PARAM_DATA);
    env.remove_type(PENDING_EFFECT_DEF);
}

fn derive_effect_id(def: &AstNode) -> String {
    let name = match def {
        AstNode::TableInit { pairs, .. } => pairs.iter().find_map(|(k, v)| {
            if k == "name" {
                match v {
                    AstNode::Str(s) => Some(s.trim_matches('"').to_string()),
                    _ => None,
                }
            } else {
                None
            }
        }),
        _ => None,
    };
    sanitize_effect_id(name.as_deref().unwrap_or("effect"))
}

pub fn sanitize_effect_id(name: &str) -> String {
    let mut id: String = name
        .to_ascii_lowercase()
        .chars()
        .map(|c| if c == ' ' { '_' } else { c })
        .filter(|c| c.is_ascii_alphanumeric() || *c == '_')
        .collect();
    while id.starts_with('_') {
        id.remove(0);
    }
    id.truncate(50);
    if id.is_empty() || !id.chars().next().unwrap().is_ascii_alphabetic() {
        id = format!("effect_{id}");
        id.truncate(50);
    }
    id
}

// ----------------------------------------------------------------------
// AST assembly helpers
// ----------------------------------------------------------------------

/// Block statements and the definition table of a root, tolerating scripts
/// cut off before the definition call.
fn root_parts(parts: &[Part], def_type: &str) -> (Vec<AstNode>, AstNode) {
    let block = child_block(parts, 0);
    let def = nth_child(parts, 1).unwrap_or(AstNode::TableInit {
        type_name: def_type.to_string(),
        pairs: Vec::new(),
    });
    (block, def)
}

fn first_lexeme(parts: &[Part], term: &str) -> Option<String> {
    parts.iter().find_map(|p| match p {
        Part::Lex(t, l) if t == term => Some(l.clone()),
        _ => None,
    })
}

fn nth_child(parts: &[Part], n: usize) -> Option<AstNode> {
    parts
        .iter()
        .filter_map(|p| match p {
            Part::Child(a) => Some(a.clone()),
            _ => None,
        })
        .nth(n)
}

fn child_block(parts: &[Part], n: usize) -> Vec<AstNode> {
    match nth_child(parts, n) {
        Some(AstNode::Block(stmts)) => stmts,
        Some(other) => vec![other],
        None => Vec::new(),
    }
}

fn collect_statements(parts: &[Part]) -> Vec<AstNode> {
    let mut out = Vec::new();
    for p in parts {
        match p {
            Part::Child(ast @ AstNode::Prefix { .. }) => {
                out.push(AstNode::Call(Box::new(ast.clone())))
            }
            Part::Child(ast) => out.push(ast.clone()),
            Part::Lex(_, l) if l == "break" => out.push(AstNode::Break),
            _ => {}
        }
    }
    out
}

fn build_if(parts: &[Part]) -> AstNode {
    // stream: if, cond, then, block, (elseif, cond, then, block)*, (else, block)?, end
    let mut cond: Option<AstNode> = None;
    let mut then: Vec<AstNode> = Vec::new();
    let mut elifs: Vec<(AstNode, Vec<AstNode>)> = Vec::new();
    let mut els: Option<Vec<AstNode>> = None;
    let mut section = 0; // 0 if-cond, 1 then-block, 2 elseif-cond, 3 elseif-block, 4 else-block
    let mut pending_cond: Option<AstNode> = None;
    for p in parts {
        match p {
            Part::Lex(_, l) => match l.as_str() {
                "elseif" => section = 2,
                "else" => section = 4,
                "then" => section = if section == 2 { 3 } else { 1 },
                _ => {}
            },
            Part::Child(ast) => match section {
                0 => cond = Some(ast.clone()),
                1 => then = unwrap_block(ast),
                2 => pending_cond = Some(ast.clone()),
                3 => {
                    if let Some(c) = pending_cond.take() {
                        elifs.push((c, unwrap_block(ast)));
                    }
                }
                _ => els = Some(unwrap_block(ast)),
            },
        }
    }
    AstNode::If {
        cond: Box::new(cond.unwrap_or(AstNode::Bool(true))),
        then,
        elifs,
        els,
    }
}

fn build_for(parts: &[Part]) -> AstNode {
    let var = first_lexeme(parts, "NEW_VAR_NAME").unwrap_or_default();
    let children: Vec<AstNode> = parts
        .iter()
        .filter_map(|p| match p {
            Part::Child(a) => Some(a.clone()),
            _ => None,
        })
        .collect();
    // last child is the body block; 2 or 3 expressions precede it
    let body = match children.last() {
        Some(AstNode::Block(stmts)) => stmts.clone(),
        _ => Vec::new(),
    };
    let exprs = &children[..children.len().saturating_sub(1)];
    AstNode::For {
        var,
        from: Box::new(exprs.first().cloned().unwrap_or(AstNode::Num("0".into()))),
        to: Box::new(exprs.get(1).cloned().unwrap_or(AstNode::Num("0".into()))),
        step: exprs.get(2).cloned().map(Box::new),
        body,
    }
}

fn unwrap_block(ast: &AstNode) -> Vec<AstNode> {
    match ast {
        AstNode::Block(stmts) => stmts.clone(),
        other => vec![other.clone()],
    }
}

fn build_prefix_chain(parts: &[Part], ty: TypeDescriptor) -> AstNode {
    let mut head = String::new();
    let mut links: Vec<Link> = Vec::new();
    let mut first = true;
    let mut iter = parts.iter().peekable();
    while let Some(p) = iter.next() {
        match p {
            Part::Lex(t, l) if t == "FIELD" => {
                if first {
                    head = l.clone();
                    first = false;
                } else {
                    links.push(Link::Field(l.clone()));
                }
            }
            Part::Lex(_, l) if l == "(" => {
                // arguments follow as an arg-list child
                if let Some(Part::Child(AstNode::Block(args))) = iter.peek() {
                    links.push(Link::Call(args.clone()));
                    iter.next();
                } else {
                    links.push(Link::Call(Vec::new()));
                }
            }
            Part::Child(AstNode::Block(args)) => {
                // arg list without a recorded "(" lexeme
                links.push(Link::Call(args.clone()));
            }
            _ => {}
        }
    }
    AstNode::Prefix { head, links, ty }
}

fn build_table_init(parts: &[Part], type_name: &str) -> AstNode {
    let mut pairs = Vec::new();
    let mut pending: Option<String> = None;
    for p in parts {
        match p {
            Part::Lex(t, l) if t == "KEY" => pending = Some(l.clone()),
            Part::Child(ast) => {
                if let Some(key) = pending.take() {
                    pairs.push((key, ast.clone()));
                }
            }
            _ => {}
        }
    }
    AstNode::TableInit {
        type_name: type_name.to_string(),
        pairs,
    }
}
