use std::collections::BTreeMap;

use super::*;

/// Earley recognizer over the same lowered productions, used as an
/// independent oracle for the LR accepting sets.
pub(crate) mod earley {
    use crate::grammar::{Grammar, Sym};
    use std::collections::HashSet;

    #[derive(Clone, Copy, PartialEq, Eq, Hash)]
    struct Item {
        prod: usize,
        dot: usize,
        origin: usize,
    }

    pub struct Chart<'g> {
        grammar: &'g Grammar,
        aug: Vec<(usize, Vec<Sym>)>,
        sets: Vec<HashSet<Item>>,
    }

    impl<'g> Chart<'g> {
        pub fn new(grammar: &'g Grammar) -> Self {
            let mut aug: Vec<(usize, Vec<Sym>)> = grammar.productions.clone();
            let aug_nt = grammar.nonterminals.len();
            aug.push((aug_nt, vec![Sym::N(grammar.start)]));
            let mut chart = Chart {
                grammar,
                aug,
                sets: vec![HashSet::new()],
            };
            let start_item = Item {
                prod: chart.aug.len() - 1,
                dot: 0,
                origin: 0,
            };
            chart.sets[0].insert(start_item);
            chart.close(0);
            chart
        }

        fn close(&mut self, i: usize) {
            loop {
                let mut added = Vec::new();
                let items: Vec<Item> = self.sets[i].iter().copied().collect();
                for item in items {
                    let (_, rhs) = &self.aug[item.prod];
                    match rhs.get(item.dot) {
                        Some(Sym::N(n)) => {
                            for (p, (lhs, _)) in self.aug.iter().enumerate() {
                                if lhs == n {
                                    added.push(Item {
                                        prod: p,
                                        dot: 0,
                                        origin: i,
                                    });
                                }
                            }
                        }
                        None => {
                            // completion
                            let lhs = self.aug[item.prod].0;
                            let parents: Vec<Item> =
                                self.sets[item.origin].iter().copied().collect();
                            for parent in parents {
                                let (_, prhs) = &self.aug[parent.prod];
                                if prhs.get(parent.dot) == Some(&Sym::N(lhs)) {
                                    added.push(Item {
                                        prod: parent.prod,
                                        dot: parent.dot + 1,
                                        origin: parent.origin,
                                    });
                                }
                            }
                        }
                        Some(Sym::T(_)) => {}
                    }
                }
                let before = self.sets[i].len();
                self.sets[i].extend(added);
                if self.sets[i].len() == before {
                    break;
                }
            }
        }

        /// Feed one terminal; returns false if the terminal is not viable.
        pub fn feed(&mut self, term: usize) -> bool {
            let i = self.sets.len() - 1;
            let mut next = HashSet::new();
            for item in &self.sets[i] {
                let (_, rhs) = &self.aug[item.prod];
                if rhs.get(item.dot) == Some(&Sym::T(term)) {
                    next.insert(Item {
                        prod: item.prod,
                        dot: item.dot + 1,
                        origin: item.origin,
                    });
                }
            }
            if next.is_empty() {
                return false;
            }
            self.sets.push(next);
            self.close(i + 1);
            true
        }

        /// Terminal ids viable as the next input, with 0 standing for $END.
        pub fn next_terminals(&self) -> Vec<usize> {
            let i = self.sets.len() - 1;
            let mut out: Vec<usize> = Vec::new();
            for item in &self.sets[i] {
                let (lhs, rhs) = &self.aug[item.prod];
                match rhs.get(item.dot) {
                    Some(Sym::T(t)) => out.push(*t),
                    None if *lhs == self.grammar.nonterminals.len() => out.push(0),
                    _ => {}
                }
            }
            out.sort_unstable();
            out.dedup();
            out
        }
    }
}

fn number_terminal() -> Terminal {
    Terminal::pattern("NUMBER", r"\d+(\.\d+)?")
}

fn string_terminal() -> Terminal {
    Terminal::pattern("STRING", r#""([^"\\]|\\.)*""#)
}

fn instantiate(source: &str, extra: Vec<Terminal>) -> Grammar {
    let t = GrammarTemplate::new("test", source, &[], extra);
    instantiate_template(&t, &BTreeMap::new()).expect("grammar must parse")
}

fn parser(g: &Grammar, cache: &ParserCache) -> InteractiveParser {
    build_interactive_parser(g, cache).expect("grammar must build")
}

const STR_EXP_SOURCE: &str = r#"
start: str_exp ";"
str_exp: str_sum
str_sum: str_atom (".." str_atom)*
str_atom: STRING | "(" str_exp ")" | "<STR_PREFIX_EXP>"
"#;

#[test]
fn str_exp_initial_accepts() {
    let g = instantiate(STR_EXP_SOURCE, vec![string_terminal()]);
    let cache = ParserCache::default();
    let p = parser(&g, &cache);
    let mut names = p.accept_names();
    names.sort();
    assert_eq!(names, vec!["(", "<STR_PREFIX_EXP>", "STRING"]);
}

#[test]
fn trivial_grammar_accepts_then_end() {
    let g = instantiate("start: \"a\"", vec![]);
    let cache = ParserCache::default();
    let mut p = parser(&g, &cache);
    assert_eq!(p.accept_names(), vec!["a"]);
    p.feed_text("a").unwrap();
    assert_eq!(p.accept_names(), vec![END_TERMINAL]);
    assert!(p.only_end_accepted());
}

#[test]
fn template_instantiation_fills_slots() {
    let t = GrammarTemplate::new(
        "type_spec",
        "start: type_spec \";\"\ntype_spec: base_type | function_type\nfunction_type: \"(\" (BASE_TYPE (\",\" BASE_TYPE)*)? \")\" \"->\" type_spec\nBASE_TYPE: {base_type}",
        &["base_type"],
        vec![],
    );
    let mut fills = BTreeMap::new();
    fills.insert(
        "base_type".to_string(),
        "number|boolean|string|void|Actor|Coord".to_string(),
    );
    let g = instantiate_template(&t, &fills).unwrap();
    let base = g
        .terminals
        .iter()
        .find(|t| t.name == "BASE_TYPE")
        .expect("BASE_TYPE terminal");
    assert_eq!(
        base.matcher,
        Some(Matcher::Pattern(crate::regex::RegexPattern::new(
            "number|boolean|string|void|Actor|Coord"
        )))
    );

    // missing slot is an error
    assert!(matches!(
        instantiate_template(&t, &BTreeMap::new()),
        Err(GrammarError::MissingSlot(s)) if s == "base_type"
    ));
}

#[test]
fn zero_slot_template_is_identity() {
    let g1 = instantiate("start: \"x\" \"y\"", vec![]);
    let g2 = instantiate("start: \"x\" \"y\"", vec![]);
    assert_eq!(g1.key, g2.key);
}

#[test]
fn typespec_accepts_function_types() {
    let source = "start: type_spec \";\"\ntype_spec: base_type | function_type\nfunction_type: \"(\" (BASE_TYPE (\",\" BASE_TYPE)*)? \")\" \"->\" type_spec\nBASE_TYPE: number|boolean|string|void|Actor|Coord";
    let g = instantiate(source, vec![]);
    let cache = ParserCache::default();

    let mut p = parser(&g, &cache);
    p.feed_text("number;").unwrap();
    assert!(p.only_end_accepted());

    let mut p = parser(&g, &cache);
    p.feed_text("(string,boolean)->string;").unwrap();
    assert!(p.only_end_accepted());

    let mut p = parser(&g, &cache);
    assert!(p.feed_text("((number)->number)->void;").is_err());
}

#[test]
fn cache_hit_returns_identical_tables() {
    let g = instantiate("start: \"a\" NUMBER", vec![number_terminal()]);
    let cache = ParserCache::default();
    let p1 = parser(&g, &cache);
    let p2 = parser(&g, &cache);
    assert!(std::sync::Arc::ptr_eq(p1.tables(), p2.tables()));
    let stats = cache.stats();
    assert_eq!(stats.misses, 1);
    assert_eq!(stats.hits, 1);
}

#[test]
fn lru_evicts_oldest() {
    let cache = ParserCache::with_capacity(2);
    for src in ["start: \"a\"", "start: \"b\"", "start: \"c\""] {
        let g = instantiate(src, vec![]);
        parser(&g, &cache);
    }
    assert_eq!(cache.len(), 2);
    // "a" was evicted: building it again is a miss
    let g = instantiate("start: \"a\"", vec![]);
    parser(&g, &cache);
    assert_eq!(cache.stats().misses, 4);
}

#[test]
fn feed_text_lexes_number_then_delimiter() {
    let g = instantiate("start: NUMBER \";\"", vec![number_terminal()]);
    let cache = ParserCache::default();
    let mut p = parser(&g, &cache);
    let lexed = p.feed_text("42;").unwrap();
    let names: Vec<&str> = lexed
        .iter()
        .map(|(t, _)| p.tables().terminal(*t).name.as_str())
        .collect();
    assert_eq!(names, vec!["NUMBER", ";"]);
    assert_eq!(lexed[0].1, "42");
    assert!(p.only_end_accepted());
}

#[test]
fn feed_text_empty_is_noop() {
    let g = instantiate("start: \"a\"", vec![]);
    let cache = ParserCache::default();
    let mut p = parser(&g, &cache);
    let before = p.accept_names();
    assert!(p.feed_text("").unwrap().is_empty());
    assert_eq!(p.accept_names(), before);
}

#[test]
fn feed_text_error_carries_offset_and_expected() {
    let g = instantiate("start: NUMBER \";\"", vec![number_terminal()]);
    let cache = ParserCache::default();
    let mut p = parser(&g, &cache);
    match p.feed_text("4 2") {
        Err(FeedError::Lex { offset, expected }) => {
            assert_eq!(offset, 2);
            assert_eq!(expected, vec![";".to_string()]);
        }
        other => panic!("expected lex error, got {other:?}"),
    }
    // poisoned afterwards
    assert!(matches!(p.feed_text(";"), Err(FeedError::Poisoned)));
}

#[test]
fn feed_terminal_rejects_unacceptable() {
    let g = instantiate(
        "start: stat\nstat: \"<RETURN_STAT>\" | \"<IF_BLOCK>\"",
        vec![],
    );
    let cache = ParserCache::default();
    let mut p = parser(&g, &cache);
    p.feed_terminal_by_name("<RETURN_STAT>").unwrap();
    assert!(p.only_end_accepted());

    let mut p2 = parser(&g, &cache);
    // construct a forced-return-like state by only accepting RETURN_STAT
    let g3 = instantiate("start: \"<RETURN_STAT>\"", vec![]);
    let mut p3 = parser(&g3, &cache);
    assert!(p3.feed_terminal_by_name("<IF_BLOCK>").is_err());
    let _ = &mut p2;
}

#[test]
fn feed_end_terminal_finishes() {
    let g = instantiate("start: \"a\"", vec![]);
    let cache = ParserCache::default();
    let mut p = parser(&g, &cache);
    p.feed_text("a").unwrap();
    p.feed_terminal_by_name(END_TERMINAL).unwrap();
    assert!(p.accepts().is_empty());
}

#[test]
fn clone_diverges_independently() {
    let g = instantiate("start: \"do\" \"end\"", vec![]);
    let cache = ParserCache::default();
    let mut p = parser(&g, &cache);
    p.feed_text("do").unwrap();
    let before = p.accept_names();
    let mut c = p.clone();
    c.feed_text("end").unwrap();
    assert_eq!(p.accept_names(), before);
    assert!(c.only_end_accepted());
}

#[test]
fn clone_cost_stays_linear() {
    let g = instantiate(
        "start: exp \";\"\nexp: NUMBER | \"(\" exp \")\"",
        vec![number_terminal()],
    );
    let cache = ParserCache::default();
    let mut p = parser(&g, &cache);
    for _ in 0..100 {
        p.feed_text("(").unwrap();
    }
    let start = std::time::Instant::now();
    let mut clones = Vec::with_capacity(1000);
    for _ in 0..1000 {
        clones.push(p.clone());
    }
    // 1000 clones of a ~100-deep stack must be effectively instant
    assert!(start.elapsed() < std::time::Duration::from_millis(500));
    assert_eq!(clones.len(), 1000);
}

#[test]
fn longest_match_prefers_two_char_operator() {
    // "<=" must never lex as "< " followed by "="
    let g = instantiate(
        "start: NUMBER op NUMBER \";\"\nop: \"==\" | \"~=\" | \"< \" | \"> \" | \"<=\" | \">=\"",
        vec![number_terminal()],
    );
    let cache = ParserCache::default();
    let mut p = parser(&g, &cache);
    let lexed = p.feed_text("1 <= 2;").unwrap();
    let lexemes: Vec<&str> = lexed.iter().map(|(_, l)| l.as_str()).collect();
    assert_eq!(lexemes, vec!["1", "<=", "2", ";"]);

    let mut p = parser(&g, &cache);
    let lexed = p.feed_text("1 < 2;").unwrap();
    let lexemes: Vec<&str> = lexed.iter().map(|(_, l)| l.as_str()).collect();
    assert_eq!(lexemes, vec!["1", "< ", "2", ";"]);
}

#[test]
fn literal_wins_tie_against_pattern() {
    // contextual lexing: keyword "do" vs NAME pattern at equal length
    let g = instantiate(
        "start: \"do\" NAME \";\"\nNAME: [a-zA-Z_]\\w{0,49}",
        vec![],
    );
    let cache = ParserCache::default();
    let mut p = parser(&g, &cache);
    let lexed = p.feed_text("do do_it;").unwrap();
    let names: Vec<&str> = lexed
        .iter()
        .map(|(t, _)| p.tables().terminal(*t).name.as_str())
        .collect();
    assert_eq!(names, vec!["do", "NAME", ";"]);
}

#[test]
fn conflict_reports_items() {
    // classic reduce/reduce: two rules deriving the same terminal
    let g = instantiate("start: a | b\na: \"x\"\nb: \"x\"", vec![]);
    let cache = ParserCache::default();
    match build_interactive_parser(&g, &cache) {
        Err(GrammarError::Conflict { lookahead, items }) => {
            assert_eq!(lookahead, END_TERMINAL);
            assert!(items.contains("reduce/reduce"));
        }
        other => panic!("expected conflict, got {other:?}"),
    }
}

#[test]
fn accepts_matches_earley_oracle_on_short_feeds() {
    let sources: Vec<(&str, Vec<Terminal>)> = vec![
        (STR_EXP_SOURCE, vec![string_terminal()]),
        (
            "start: type_spec \"=\"\ntype_spec: base_type | function_type\nfunction_type: \"(\" (BASE_TYPE (\",\" BASE_TYPE)*)? \")\" \"->\" type_spec\nBASE_TYPE: number|boolean",
            vec![],
        ),
    ];
    let cache = ParserCache::default();
    for (source, extra) in sources {
        let g = instantiate(source, extra);

        // breadth-first over feedable terminal-id sequences up to length 12,
        // comparing the LR accepting set with the Earley follow set at every
        // prefix; the Earley chart is rebuilt by replaying each sequence
        let mut frontier: Vec<Vec<usize>> = vec![vec![]];
        let mut checked = 0usize;
        for _depth in 0..12 {
            let mut next_frontier = Vec::new();
            for seq in &frontier {
                let mut p = parser(&g, &cache);
                let mut chart = earley::Chart::new(&g);
                for &t in seq {
                    p.feed_terminal(t).unwrap();
                    assert!(chart.feed(t));
                }
                let mut lr_next = p.accepts();
                lr_next.sort_unstable();
                assert_eq!(
                    lr_next,
                    chart.next_terminals(),
                    "accepting-set mismatch after {seq:?}"
                );
                checked += 1;
                for t in lr_next {
                    if g.terminals[t].is_end() {
                        continue;
                    }
                    let mut s = seq.clone();
                    s.push(t);
                    next_frontier.push(s);
                }
            }
            next_frontier.truncate(200);
            if next_frontier.is_empty() {
                break;
            }
            frontier = next_frontier;
        }
        assert!(checked > 100, "oracle sweep covered too little");
    }
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        /// Feeding a valid input in arbitrary whitespace-boundary chunks
        /// leaves the parser in the same accepting state as one shot.
        #[test]
        fn chunking_invariance(split_seed in 0usize..1000) {
            let source = "start: stmt*\nstmt: \"local\" NAME \"=\" NUMBER \";\"\nNAME: [a-zA-Z_]\\w{0,49}";
            let g = instantiate(source, vec![number_terminal()]);
            let cache = ParserCache::default();
            let text = "local alpha = 1; local beta = 22; local gamma = 3.5;";

            let mut whole = parser(&g, &cache);
            whole.feed_text(text).unwrap();

            // split at whitespace positions chosen by the seed
            let positions: Vec<usize> = text
                .char_indices()
                .filter(|(_, c)| *c == ' ')
                .map(|(i, _)| i)
                .collect();
            let mut chunked = parser(&g, &cache);
            let mut start = 0usize;
            for (n, &pos) in positions.iter().enumerate() {
                if (split_seed >> (n % 10)) & 1 == 1 {
                    chunked.feed_text(&text[start..pos]).unwrap();
                    start = pos;
                }
            }
            chunked.feed_text(&text[start..]).unwrap();

            prop_assert_eq!(whole.accept_names(), chunked.accept_names());
        }
    }
}
