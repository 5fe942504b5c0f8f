//! Dense DFA representation with an explicit dead state.

pub type StateId = u32;

/// Compiled character-level automaton.
///
/// Transitions are total: every (state, byte) pair maps to a state, with the
/// dead state absorbing everything outside the pattern's language. The dead
/// state is the unique state from which no final state is reachable.
#[derive(Debug, Clone)]
pub struct Dfa {
    /// byte value -> alphabet class, `u16::MAX` for bytes outside the alphabet
    pub(super) class_of: [u16; 128],
    pub(super) num_classes: usize,
    /// state * num_classes + class -> state
    pub(super) trans: Vec<StateId>,
    pub(super) initial: StateId,
    pub(super) dead: StateId,
    pub(super) finals: Vec<bool>,
    pub(super) pattern: String,
}

impl Dfa {
    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn num_states(&self) -> usize {
        self.finals.len()
    }

    pub fn is_final(&self, s: StateId) -> bool {
        self.finals[s as usize]
    }

    pub fn is_dead(&self, s: StateId) -> bool {
        s == self.dead
    }

    /// The pattern this DFA was compiled from.
    pub fn pattern(&self) -> &str {
        &self.pattern
    }

    pub fn step(&self, s: StateId, byte: u8) -> StateId {
        if byte >= 0x80 {
            return self.dead;
        }
        let class = self.class_of[byte as usize];
        if class == u16::MAX {
            return self.dead;
        }
        self.trans[s as usize * self.num_classes + class as usize]
    }

    pub fn final_states(&self) -> impl Iterator<Item = StateId> + '_ {
        self.finals
            .iter()
            .enumerate()
            .filter(|(_, &f)| f)
            .map(|(i, _)| i as StateId)
    }

    /// Distinct successor states over all characters (excluding self-loops on
    /// the dead state only in the sense that dead has no live successors).
    pub fn successors(&self, s: StateId) -> impl Iterator<Item = StateId> + '_ {
        let row = &self.trans[s as usize * self.num_classes..(s as usize + 1) * self.num_classes];
        let mut seen: Vec<StateId> = row.to_vec();
        seen.sort_unstable();
        seen.dedup();
        seen.into_iter()
    }

    /// Longest prefix of `text` (in bytes, from `start`) ending in a final
    /// state. Used for longest-match lexing.
    pub fn longest_match(&self, start: StateId, text: &str) -> Option<usize> {
        let mut state = start;
        let mut best = if self.is_final(state) { Some(0) } else { None };
        for (i, &b) in text.as_bytes().iter().enumerate() {
            state = self.step(state, b);
            if self.is_dead(state) {
                break;
            }
            if self.is_final(state) {
                best = Some(i + 1);
            }
        }
        best
    }
}
