//! Canonical LR(1) table construction.
//!
//! Canonical (rather than merged LALR) states keep the error-detection
//! property exact: an action exists for (state, terminal) iff the terminal is
//! a valid continuation, so `accepts()` is a plain row lookup.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use super::{Grammar, GrammarError, Matcher, Sym, Terminal};
use crate::regex::{compile_regex, Dfa};

pub type TermId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Shift(u32),
    Reduce(u32),
    Accept,
}

#[derive(Debug)]
pub struct Tables {
    pub key: String,
    pub terminals: Vec<Terminal>,
    pub term_ids: HashMap<String, TermId>,
    pub nonterminals: Vec<String>,
    pub productions: Vec<(usize, Vec<Sym>)>,
    /// per state: lookahead terminal -> action, sorted by terminal id
    pub actions: Vec<Vec<(TermId, Action)>>,
    pub gotos: Vec<HashMap<usize, u32>>,
    /// compiled matchers for pattern terminals, indexed by terminal id
    pub term_dfas: Vec<Option<Arc<Dfa>>>,
    pub start_state: u32,
}

impl Tables {
    pub fn action(&self, state: u32, term: TermId) -> Option<Action> {
        let row = &self.actions[state as usize];
        row.binary_search_by_key(&term, |&(t, _)| t)
            .ok()
            .map(|i| row[i].1)
    }

    pub fn term_id(&self, name: &str) -> Option<TermId> {
        self.term_ids.get(name).copied()
    }

    pub fn terminal(&self, id: TermId) -> &Terminal {
        &self.terminals[id]
    }
}

/// Item: production, dot position, lookahead terminal.
type ItemRec = (u32, u32, u32);

pub fn build_tables(grammar: &Grammar) -> Result<Tables, GrammarError> {
    // augment with a fresh start production so acceptance is unambiguous
    let aug_nt = grammar.nonterminals.len();
    let mut prods: Vec<(usize, Vec<Sym>)> = grammar.productions.clone();
    prods.push((aug_nt, vec![Sym::N(grammar.start)]));
    let aug_prod = prods.len() - 1;
    let prods = &prods;
    let num_nts = aug_nt + 1;

    // productions grouped by lhs
    let mut by_lhs: Vec<Vec<usize>> = vec![Vec::new(); num_nts];
    for (i, (lhs, _)) in prods.iter().enumerate() {
        by_lhs[*lhs].push(i);
    }

    // nullable + FIRST sets
    let mut nullable = vec![false; num_nts];
    let mut first: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); num_nts];
    loop {
        let mut changed = false;
        for (lhs, rhs) in prods {
            let mut all_nullable = true;
            for sym in rhs {
                match sym {
                    Sym::T(t) => {
                        changed |= first[*lhs].insert(*t);
                        all_nullable = false;
                        break;
                    }
                    Sym::N(n) => {
                        let add: Vec<usize> = first[*n].iter().copied().collect();
                        for t in add {
                            changed |= first[*lhs].insert(t);
                        }
                        if !nullable[*n] {
                            all_nullable = false;
                            break;
                        }
                    }
                }
            }
            if all_nullable && !nullable[*lhs] {
                nullable[*lhs] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    // FIRST of a symbol string followed by a lookahead
    let first_of = |syms: &[Sym], la: usize| -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for sym in syms {
            match sym {
                Sym::T(t) => {
                    out.insert(*t);
                    return out;
                }
                Sym::N(n) => {
                    out.extend(first[*n].iter().copied());
                    if !nullable[*n] {
                        return out;
                    }
                }
            }
        }
        out.insert(la);
        out
    };

    let closure = |kernel: &BTreeSet<ItemRec>| -> BTreeSet<ItemRec> {
        let mut items = kernel.clone();
        let mut stack: Vec<ItemRec> = items.iter().copied().collect();
        while let Some((p, dot, la)) = stack.pop() {
            let (_, rhs) = &prods[p as usize];
            if let Some(Sym::N(n)) = rhs.get(dot as usize) {
                let rest = &rhs[dot as usize + 1..];
                for t in first_of(rest, la as usize) {
                    for &q in &by_lhs[*n] {
                        let item = (q as u32, 0, t as u32);
                        if items.insert(item) {
                            stack.push(item);
                        }
                    }
                }
            }
        }
        items
    };

    let start_kernel: BTreeSet<ItemRec> = [(aug_prod as u32, 0u32, 0u32)].into_iter().collect();
    let initial = closure(&start_kernel);

    let mut states: Vec<BTreeSet<ItemRec>> = vec![initial.clone()];
    let mut state_ids: HashMap<BTreeSet<ItemRec>, u32> = HashMap::from([(initial, 0)]);
    let mut actions: Vec<HashMap<usize, Action>> = Vec::new();
    let mut gotos: Vec<HashMap<usize, u32>> = Vec::new();

    let nt_name = |n: usize| -> &str {
        grammar
            .nonterminals
            .get(n)
            .map(String::as_str)
            .unwrap_or("__accept")
    };
    let describe = |p: usize, dot: usize| -> String {
        let (lhs, rhs) = &prods[p];
        let mut s = format!("{} ->", nt_name(*lhs));
        for (i, sym) in rhs.iter().enumerate() {
            if i == dot {
                s.push_str(" .");
            }
            match sym {
                Sym::T(t) => s.push_str(&format!(" '{}'", grammar.terminals[*t].name)),
                Sym::N(n) => s.push_str(&format!(" {}", nt_name(*n))),
            }
        }
        if dot == rhs.len() {
            s.push_str(" .");
        }
        s
    };

    let mut idx = 0;
    while idx < states.len() {
        let items = states[idx].clone();
        let mut row: HashMap<usize, Action> = HashMap::new();
        let mut goto_row: HashMap<usize, u32> = HashMap::new();

        // group shifts by symbol
        let mut by_sym: HashMap<Sym, BTreeSet<ItemRec>> = HashMap::new();
        for &(p, dot, la) in &items {
            let (_, rhs) = &prods[p as usize];
            if let Some(sym) = rhs.get(dot as usize) {
                by_sym
                    .entry(*sym)
                    .or_default()
                    .insert((p, dot + 1, la));
            }
        }
        let mut ordered: Vec<(Sym, BTreeSet<ItemRec>)> = by_sym.into_iter().collect();
        ordered.sort_by_key(|(sym, _)| match sym {
            Sym::T(t) => (0, *t),
            Sym::N(n) => (1, *n),
        });
        for (sym, kernel) in ordered {
            let next = closure(&kernel);
            let id = match state_ids.get(&next) {
                Some(&id) => id,
                None => {
                    let id = states.len() as u32;
                    state_ids.insert(next.clone(), id);
                    states.push(next);
                    id
                }
            };
            match sym {
                Sym::T(t) => {
                    row.insert(t, Action::Shift(id));
                }
                Sym::N(n) => {
                    goto_row.insert(n, id);
                }
            }
        }

        // reduces and accept
        for &(p, dot, la) in &items {
            let (lhs, rhs) = &prods[p as usize];
            if dot as usize != rhs.len() {
                continue;
            }
            let action = if *lhs == aug_nt {
                Action::Accept
            } else {
                Action::Reduce(p)
            };
            match row.get(&(la as usize)) {
                None => {
                    row.insert(la as usize, action);
                }
                Some(existing) if *existing == action => {}
                Some(existing) => {
                    let kind = match existing {
                        Action::Shift(_) => "shift/reduce",
                        _ => "reduce/reduce",
                    };
                    return Err(GrammarError::Conflict {
                        lookahead: grammar.terminals[la as usize].name.clone(),
                        items: format!("{kind} between [{}] and existing action", describe(p as usize, dot as usize)),
                    });
                }
            }
        }

        actions.push(row);
        gotos.push(goto_row);
        idx += 1;
    }

    let mut term_dfas: Vec<Option<Arc<Dfa>>> = Vec::new();
    for t in &grammar.terminals {
        match &t.matcher {
            Some(Matcher::Pattern(p)) => term_dfas.push(Some(Arc::new(compile_regex(p)?))),
            _ => term_dfas.push(None),
        }
    }

    let term_ids: HashMap<String, TermId> = grammar
        .terminals
        .iter()
        .enumerate()
        .map(|(i, t)| (t.name.clone(), i))
        .collect();

    let sorted_actions: Vec<Vec<(TermId, Action)>> = actions
        .into_iter()
        .map(|row| {
            let mut v: Vec<(TermId, Action)> = row.into_iter().collect();
            v.sort_by_key(|&(t, _)| t);
            v
        })
        .collect();

    Ok(Tables {
        key: grammar.key.clone(),
        terminals: grammar.terminals.clone(),
        term_ids,
        nonterminals: grammar.nonterminals.clone(),
        productions: grammar.productions.clone(),
        actions: sorted_actions,
        gotos,
        term_dfas,
        start_state: 0,
    })
}
