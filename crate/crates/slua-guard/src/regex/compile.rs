//! Thompson construction and subset construction.

use std::collections::HashMap;

use super::dfa::{Dfa, StateId};
use super::syntax::{parse, Ast, CharSet};
use super::{RegexError, RegexPattern};

struct Nfa {
    /// per state: (character set, target)
    trans: Vec<Vec<(CharSet, usize)>>,
    eps: Vec<Vec<usize>>,
}

impl Nfa {
    fn new() -> Self {
        Nfa {
            trans: Vec::new(),
            eps: Vec::new(),
        }
    }

    fn state(&mut self) -> usize {
        self.trans.push(Vec::new());
        self.eps.push(Vec::new());
        self.trans.len() - 1
    }

    fn add(&mut self, from: usize, set: CharSet, to: usize) {
        self.trans[from].push((set, to));
    }

    fn add_eps(&mut self, from: usize, to: usize) {
        self.eps[from].push(to);
    }

    /// Thompson fragment for `ast`, returning (start, end).
    fn build(&mut self, ast: &Ast) -> (usize, usize) {
        match ast {
            Ast::Empty => {
                let s = self.state();
                (s, s)
            }
            Ast::Class(set) => {
                let s = self.state();
                let e = self.state();
                self.add(s, *set, e);
                (s, e)
            }
            Ast::Concat(items) => {
                let mut start = None;
                let mut prev_end = None;
                for item in items {
                    let (s, e) = self.build(item);
                    if let Some(pe) = prev_end {
                        self.add_eps(pe, s);
                    } else {
                        start = Some(s);
                    }
                    prev_end = Some(e);
                }
                (start.unwrap(), prev_end.unwrap())
            }
            Ast::Alt(alts) => {
                let s = self.state();
                let e = self.state();
                for alt in alts {
                    let (as_, ae) = self.build(alt);
                    self.add_eps(s, as_);
                    self.add_eps(ae, e);
                }
                (s, e)
            }
            Ast::Star(inner) => {
                let s = self.state();
                let e = self.state();
                let (is, ie) = self.build(inner);
                self.add_eps(s, is);
                self.add_eps(s, e);
                self.add_eps(ie, is);
                self.add_eps(ie, e);
                (s, e)
            }
            Ast::Plus(inner) => {
                let (is, ie) = self.build(inner);
                let e = self.state();
                self.add_eps(ie, e);
                self.add_eps(ie, is);
                (is, e)
            }
            Ast::Opt(inner) => {
                let s = self.state();
                let e = self.state();
                let (is, ie) = self.build(inner);
                self.add_eps(s, is);
                self.add_eps(s, e);
                self.add_eps(ie, e);
                (s, e)
            }
            Ast::Repeat(inner, lo, hi) => {
                // expand {m,n} into m copies plus (n-m) optional copies
                let s = self.state();
                let mut cur = s;
                for _ in 0..*lo {
                    let (is, ie) = self.build(inner);
                    self.add_eps(cur, is);
                    cur = ie;
                }
                let e = self.state();
                for _ in *lo..*hi {
                    let (is, ie) = self.build(inner);
                    self.add_eps(cur, is);
                    self.add_eps(cur, e);
                    cur = ie;
                }
                self.add_eps(cur, e);
                (s, e)
            }
        }
    }

    fn eps_closure(&self, states: &mut Vec<usize>) {
        let mut stack: Vec<usize> = states.clone();
        while let Some(s) = stack.pop() {
            for &t in &self.eps[s] {
                if !states.contains(&t) {
                    states.push(t);
                    stack.push(t);
                }
            }
        }
        states.sort_unstable();
        states.dedup();
    }
}

/// Build a DFA accepting exactly the pattern's language over the restricted
/// alphabet.
pub fn compile_regex(pattern: &RegexPattern) -> Result<Dfa, RegexError> {
    let ast = parse(pattern.text())?;
    let mut nfa = Nfa::new();
    let (start, end) = nfa.build(&ast);

    // Partition the alphabet into classes with identical NFA behaviour.
    let mut masks: Vec<u128> = nfa
        .trans
        .iter()
        .flat_map(|row| row.iter().map(|(set, _)| set.0))
        .collect();
    masks.sort_unstable();
    masks.dedup();

    let mut class_of = [u16::MAX; 128];
    let mut signatures: HashMap<Vec<bool>, u16> = HashMap::new();
    let mut class_reps: Vec<u8> = Vec::new();
    for b in 0u8..0x80 {
        if !super::in_alphabet(b) {
            continue;
        }
        let sig: Vec<bool> = masks.iter().map(|m| m & (1 << b) != 0).collect();
        let next_id = signatures.len() as u16;
        let id = *signatures.entry(sig).or_insert(next_id);
        if id as usize == class_reps.len() {
            class_reps.push(b);
        }
        class_of[b as usize] = id;
    }
    let num_classes = class_reps.len().max(1);

    // Subset construction over alphabet classes.
    let mut initial_set = vec![start];
    nfa.eps_closure(&mut initial_set);

    let mut dfa_sets: Vec<Vec<usize>> = vec![initial_set.clone()];
    let mut index: HashMap<Vec<usize>, StateId> = HashMap::new();
    index.insert(initial_set, 0);
    let mut trans: Vec<StateId> = Vec::new();
    let mut finals: Vec<bool> = Vec::new();

    let mut i = 0;
    while i < dfa_sets.len() {
        let set = dfa_sets[i].clone();
        finals.push(set.contains(&end));
        for class in 0..num_classes {
            let rep = match class_reps.get(class) {
                Some(&r) => r,
                None => {
                    trans.push(0);
                    continue;
                }
            };
            let mut next: Vec<usize> = Vec::new();
            for &s in &set {
                for &(cs, t) in &nfa.trans[s] {
                    if cs.contains(rep) && !next.contains(&t) {
                        next.push(t);
                    }
                }
            }
            nfa.eps_closure(&mut next);
            let id = match index.get(&next) {
                Some(&id) => id,
                None => {
                    let id = dfa_sets.len() as StateId;
                    index.insert(next.clone(), id);
                    dfa_sets.push(next);
                    id
                }
            };
            trans.push(id);
        }
        i += 1;
    }

    // Identify live states (those that can reach a final state) and collapse
    // everything else onto a single dead state.
    let n = dfa_sets.len();
    let mut live = vec![false; n];
    let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n];
    for s in 0..n {
        for c in 0..num_classes {
            let t = trans[s * num_classes + c] as usize;
            reverse[t].push(s);
        }
    }
    let mut stack: Vec<usize> = (0..n).filter(|&s| finals[s]).collect();
    for &s in &stack {
        live[s] = true;
    }
    while let Some(s) = stack.pop() {
        for &p in &reverse[s] {
            if !live[p] {
                live[p] = true;
                stack.push(p);
            }
        }
    }

    // Renumber: live states keep compact ids, all dead states merge into one.
    let mut remap = vec![0 as StateId; n];
    let mut next_id: StateId = 0;
    for s in 0..n {
        if live[s] {
            remap[s] = next_id;
            next_id += 1;
        }
    }
    let dead = next_id;
    for s in 0..n {
        if !live[s] {
            remap[s] = dead;
        }
    }
    let total = next_id as usize + 1;
    let mut out_trans = vec![dead; total * num_classes];
    let mut out_finals = vec![false; total];
    for s in 0..n {
        if !live[s] {
            continue;
        }
        let ns = remap[s] as usize;
        out_finals[ns] = finals[s];
        for c in 0..num_classes {
            out_trans[ns * num_classes + c] = remap[trans[s * num_classes + c] as usize];
        }
    }

    Ok(Dfa {
        class_of,
        num_classes,
        trans: out_trans,
        initial: remap[0],
        dead,
        finals: out_finals,
        pattern: pattern.text().to_string(),
    })
}
