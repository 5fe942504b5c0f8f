//! Type-graph tracing: which symbols can eventually produce a target type.
//!
//! A depth-first walk over the type graph (table fields and function return
//! types) decides, per variant, whether a chain of accesses starting from a
//! type can reach one of the target types. The prefix-expression parser uses
//! this to form field regexes; `trace_types` exposes the same reachability at
//! the type level.

use std::collections::HashSet;

use super::types::{FunctionType, TypeDescriptor};
use super::Environment;

/// Whether calling something that returns `ret` can complete a chain, given
/// the set of already-known-viable table names.
fn result_viable(w: &TypeWalker, set: &HashSet<String>, ret: &TypeDescriptor) -> bool {
    if w.leaf_ok(ret, false) {
        return true;
    }
    match ret {
        TypeDescriptor::Function(f) => match w.variant {
            TraceVariant::MutableLvalue => false,
            TraceVariant::CallStatement => true,
            _ => result_viable(w, set, &f.ret),
        },
        TypeDescriptor::Table(n) => set.contains(n),
        _ => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceVariant {
    /// Chains producing a value of a target type.
    Expression,
    /// Chains ending at a mutable field (or local) of a target type; no calls.
    MutableLvalue,
    /// Chains containing at least one function call, usable as a statement.
    CallStatement,
    /// Boolean coercion: every non-void, non-function value is truthy.
    BooleanCoerce,
}

pub(crate) struct TypeWalker<'e> {
    env: &'e Environment,
    targets: Vec<TypeDescriptor>,
    variant: TraceVariant,
    viable_tables: Option<HashSet<String>>,
}

impl<'e> TypeWalker<'e> {
    pub fn new(env: &'e Environment, targets: &[TypeDescriptor], variant: TraceVariant) -> Self {
        TypeWalker {
            env,
            targets: targets.to_vec(),
            variant,
            viable_tables: None,
        }
    }

    /// Can a value of this type complete a chain right here? An empty target
    /// set on the lvalue variant means any assignable type.
    pub fn leaf_ok(&self, ty: &TypeDescriptor, binding_mutable: bool) -> bool {
        match self.variant {
            TraceVariant::Expression => self.targets.contains(ty),
            TraceVariant::MutableLvalue => {
                binding_mutable
                    && !matches!(ty, TypeDescriptor::Void)
                    && (self.targets.is_empty() || self.targets.contains(ty))
            }
            TraceVariant::CallStatement => false,
            TraceVariant::BooleanCoerce => matches!(
                ty,
                TypeDescriptor::Number
                    | TypeDescriptor::Boolean
                    | TypeDescriptor::Str
                    | TypeDescriptor::Table(_)
            ),
        }
    }

    /// Can calling a function of this signature lead somewhere viable?
    pub fn call_ok(&mut self, f: &FunctionType) -> bool {
        match self.variant {
            TraceVariant::MutableLvalue => false,
            TraceVariant::CallStatement => true,
            _ => {
                self.ensure_tables();
                let set = self.viable_tables.as_ref().unwrap();
                result_viable(self, set, &f.ret)
            }
        }
    }

    /// Does some field of the table lead to a viable chain?
    pub fn deeper(&mut self, table_name: &str) -> bool {
        self.ensure_tables();
        self.viable_tables.as_ref().unwrap().contains(table_name)
    }

    /// Least fixpoint of table-viability over the whole registry; viability
    /// is monotone, so iterating until no table flips is exact even through
    /// cyclic field references. Results are memoized per registry version.
    fn ensure_tables(&mut self) {
        if self.viable_tables.is_some() {
            return;
        }
        use std::sync::{Mutex, OnceLock};
        type MemoKey = (u64, bool, u8, String);
        static MEMO: OnceLock<Mutex<std::collections::HashMap<MemoKey, HashSet<String>>>> =
            OnceLock::new();
        let variant_tag = match self.variant {
            TraceVariant::Expression => 0u8,
            TraceVariant::MutableLvalue => 1,
            TraceVariant::CallStatement => 2,
            TraceVariant::BooleanCoerce => 3,
        };
        let targets_key: String = self
            .targets
            .iter()
            .map(|t| t.display_name())
            .collect::<Vec<_>>()
            .join(";");
        let key = (
            self.env.types_version(),
            self.env.in_talent,
            variant_tag,
            targets_key,
        );
        let memo = MEMO.get_or_init(|| Mutex::new(std::collections::HashMap::new()));
        if let Some(hit) = memo.lock().unwrap().get(&key) {
            self.viable_tables = Some(hit.clone());
            return;
        }
        let env = self.env;
        let mut set: HashSet<String> = HashSet::new();
        loop {
            let mut changed = false;
            let mut additions: Vec<String> = Vec::new();
            for (name, table) in env.all_tables() {
                if set.contains(name) {
                    continue;
                }
                let hit = table.fields.iter().any(|(fname, f)| {
                    if self.field_gated(fname) {
                        return false;
                    }
                    self.leaf_ok(&f.ty, f.mutable)
                        || match &f.ty {
                            TypeDescriptor::Function(func) => match self.variant {
                                TraceVariant::MutableLvalue => false,
                                TraceVariant::CallStatement => true,
                                _ => result_viable(self, &set, &func.ret),
                            },
                            TypeDescriptor::Table(n) => set.contains(n),
                            _ => false,
                        }
                });
                if hit {
                    additions.push(name.clone());
                    changed = true;
                }
            }
            set.extend(additions);
            if !changed {
                break;
            }
        }
        memo.lock().unwrap().insert(key, set.clone());
        self.viable_tables = Some(set);
    }

    /// `GetTalentLevel` is visible only inside a talent definition.
    pub fn field_gated(&self, field_name: &str) -> bool {
        field_name == "GetTalentLevel" && !self.env.in_talent
    }


    /// Full viability: usable as a leaf, callable toward a target, or a table
    /// with a viable deeper chain.
    pub fn viable(&mut self, ty: &TypeDescriptor, binding_mutable: bool) -> bool {
        if self.leaf_ok(ty, binding_mutable) {
            return true;
        }
        match ty {
            TypeDescriptor::Function(f) => {
                let f = f.clone();
                self.call_ok(&f)
            }
            TypeDescriptor::Table(name) => {
                let name = name.clone();
                self.deeper(&name)
            }
            _ => false,
        }
    }
}

/// All types from which some chain of field accesses and calls reaches a
/// target. The result is sorted by display name and always includes any
/// target that exists in the environment's universe.
pub fn trace_types(
    env: &Environment,
    targets: &[TypeDescriptor],
    variant: TraceVariant,
) -> Vec<TypeDescriptor> {
    let mut universe: Vec<TypeDescriptor> = vec![
        TypeDescriptor::Number,
        TypeDescriptor::Boolean,
        TypeDescriptor::Str,
    ];
    for table in env.named_tables() {
        universe.push(TypeDescriptor::table(&table.name));
        for (_, f) in &table.fields {
            if f.ty.is_function() && !universe.contains(&f.ty) {
                universe.push(f.ty.clone());
            }
        }
    }
    for (_, ty) in env.visible_symbols() {
        if !universe.contains(&ty) {
            universe.push(ty);
        }
    }

    let mut walker = TypeWalker::new(env, targets, variant);
    let mut out: Vec<TypeDescriptor> = universe
        .into_iter()
        .filter(|ty| walker.viable(ty, false))
        .collect();
    out.sort_by_key(|t| t.display_name());
    out.dedup();
    out
}

/// Names usable as the next field or variable in a prefix chain.
///
/// With no prefix type, scope variables are searched (locals are always
/// mutable bindings); with a table prefix, its fields are searched with their
/// declared mutability.
pub fn enumerate_candidate_symbols(
    env: &Environment,
    prefix_type: Option<&TypeDescriptor>,
    targets: &[TypeDescriptor],
    variant: TraceVariant,
) -> Vec<(String, TypeDescriptor)> {
    let mut walker = TypeWalker::new(env, targets, variant);
    let mut out = Vec::new();
    match prefix_type {
        None => {
            for (name, ty) in env.visible_symbols() {
                if walker.viable(&ty, true) {
                    out.push((name, ty));
                }
            }
        }
        Some(TypeDescriptor::Table(table_name)) => {
            if let Some(table) = env.table(table_name) {
                let fields: Vec<(String, TypeDescriptor, bool)> = table
                    .fields
                    .iter()
                    .map(|(n, f)| (n.clone(), f.ty.clone(), f.mutable))
                    .collect();
                for (name, ty, mutable) in fields {
                    if walker.field_gated(&name) {
                        continue;
                    }
                    if walker.viable(&ty, mutable) {
                        out.push((name, ty));
                    }
                }
            }
        }
        Some(_) => {}
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}
