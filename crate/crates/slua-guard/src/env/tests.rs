use super::*;

pub(crate) fn dci_env() -> Environment {
    let text = include_str!("../../fixtures/dci_api.spec");
    let spec = parse_api_spec(text).expect("fixture must parse");
    let mut env = Environment::new();
    load_api_spec(&mut env, &spec).expect("fixture must load");
    env
}

#[test]
fn scope_enter_exit_drops_symbols() {
    let mut env = Environment::new();
    env.enter_scope(ScopeKind::Block);
    env.declare_symbol("x", TypeDescriptor::Number).unwrap();
    assert!(env.lookup("x").is_some());
    env.exit_scope().unwrap();
    assert!(env.lookup("x").is_none());
    assert!(env.exit_scope().is_err());
}

#[test]
fn shadowing_matches_flat_reference_map() {
    let mut env = Environment::new();
    let mut reference: Vec<(String, TypeDescriptor)> = Vec::new();

    env.declare_symbol("x", TypeDescriptor::Number).unwrap();
    reference.push(("x".into(), TypeDescriptor::Number));
    env.enter_scope(ScopeKind::Block);
    env.declare_symbol("x", TypeDescriptor::Str).unwrap();
    reference.push(("x".into(), TypeDescriptor::Str));
    env.enter_scope(ScopeKind::Block);
    env.declare_symbol("y", TypeDescriptor::Boolean).unwrap();
    reference.push(("y".into(), TypeDescriptor::Boolean));
    env.enter_scope(ScopeKind::Block);

    // innermost wins: last declaration in the reference list
    for name in ["x", "y"] {
        let expected = reference
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t.clone());
        assert_eq!(env.lookup(name).cloned(), expected, "symbol {name}");
    }
    assert_eq!(env.lookup("x"), Some(&TypeDescriptor::Str));
}

#[test]
fn declare_rejects_bad_names() {
    let mut env = Environment::new();
    let too_long = "a".repeat(51);
    assert!(env.declare_symbol(&too_long, TypeDescriptor::Number).is_err());
    let at_cap = "a".repeat(50);
    assert!(env.declare_symbol(&at_cap, TypeDescriptor::Number).is_ok());
    assert!(env.declare_symbol("1abc", TypeDescriptor::Number).is_err());
    assert!(env.declare_symbol("", TypeDescriptor::Number).is_err());
    assert!(env.declare_symbol("_ok", TypeDescriptor::Number).is_ok());
}

#[test]
fn redeclare_in_same_scope_overwrites() {
    let mut env = Environment::new();
    env.declare_symbol("v", TypeDescriptor::Number).unwrap();
    env.declare_symbol("v", TypeDescriptor::Str).unwrap();
    assert_eq!(env.lookup("v"), Some(&TypeDescriptor::Str));
}

#[test]
fn signature_parsing() {
    let env = dci_env();
    let f = parse_type_signature(&env, "(num: number) -> string").unwrap();
    assert_eq!(f.params.len(), 1);
    assert_eq!(f.params[0].0, "num");
    assert_eq!(f.params[0].1, TypeDescriptor::Number);
    assert_eq!(f.ret, TypeDescriptor::Str);

    let f = parse_type_signature(&env, "() -> number").unwrap();
    assert!(f.params.is_empty());
    assert_eq!(f.ret, TypeDescriptor::Number);

    // callback parameter of function type with base-type args
    let f = parse_type_signature(&env, "(fn: (Actor) -> void) -> boolean").unwrap();
    assert!(f.params[0].1.is_function());
    assert_eq!(f.ret, TypeDescriptor::Boolean);

    // round trip through the printer
    let printed = f.display();
    let reparsed = parse_type_signature(&env, &printed).unwrap();
    assert!(f.same_signature(&reparsed));

    assert!(parse_type_signature(&env, "(x: Unknown) -> void").is_err());
    assert!(parse_type_signature(&env, "(f: ((Actor) -> void) -> void) -> void").is_err());
    assert!(parse_type_signature(&env, "(x: void) -> void").is_err());
}

#[test]
fn api_spec_loads_dci() {
    let env = dci_env();
    let g_math = env.lookup("g_math").expect("g_math bound");
    assert_eq!(g_math, &TypeDescriptor::table("GlobalMath"));
    let table = env.table("GlobalMath").unwrap();
    assert!(table.field("Random").is_some());
    assert!(table.field("RandomInt").is_some());
    assert!(table.field("Max").is_some());

    let actor = env.table("Actor").unwrap();
    assert_eq!(actor.field("health").unwrap().ty, TypeDescriptor::Number);
    assert!(!actor.field("health").unwrap().mutable);

    // templates are hidden from the named-table listing
    assert!(env.named_tables().all(|t| t.name != "Param"));
    assert!(env.has_type("Param"));
}

#[test]
fn empty_spec_leaves_only_builtins() {
    let mut env = Environment::new();
    load_api_spec(&mut env, &ApiSpec::default()).unwrap();
    assert!(env.visible_symbols().is_empty());
    assert_eq!(env.named_tables().count(), 0);
}

#[test]
fn dangling_type_reference_is_an_error() {
    let text = "Foo:\n  fields:\n    bar: |\n      Baz\n      Dangling.\n";
    let spec = parse_api_spec(text).unwrap();
    let mut env = Environment::new();
    match load_api_spec(&mut env, &spec) {
        Err(ApiError::Field { ty, field, .. }) => {
            assert_eq!(ty, "Foo");
            assert_eq!(field, "bar");
        }
        other => panic!("expected field error, got {other:?}"),
    }
}

#[test]
fn mutated_specs_fail_loudly() {
    use rand::{Rng, SeedableRng};
    let base = include_str!("../../fixtures/dci_api.spec");
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
    let mutations: Vec<fn(&str) -> String> = vec![
        // first occurrence of Actor is a reference, not the definition
        |s| s.replacen("Actor", "Actar", 1),
        |s| s.replace("-> void", "-> voided"),
        |s| s.replace("g_math: GlobalMath", "g_math: GlobalMoth"),
        |s| s.replacen("level: |", "level: \"doc only\"", 1),
        |s| s.replacen("Coord:", "Koord:", 1),
    ];
    let mut failures = 0;
    for _ in 0..50 {
        let m = mutations[rng.gen_range(0..mutations.len())];
        let text = m(base);
        if text == base {
            continue;
        }
        let mut env = Environment::new();
        let outcome =
            parse_api_spec(&text).and_then(|spec| load_api_spec(&mut env, &spec));
        if outcome.is_err() {
            failures += 1;
        }
    }
    assert!(failures >= 40, "mutations should fail to load: {failures}");
}

#[test]
fn register_effect_builds_param_types() {
    let mut env = dci_env();
    env.register_effect("poisoned", vec![("poison".into(), TypeDescriptor::Number)])
        .unwrap();

    let g_effects = env.table("GlobalEffectTable").unwrap();
    let entry = g_effects.field("poisoned").expect("effect registered");
    assert_eq!(entry.ty, TypeDescriptor::table("Effect_poisoned"));

    let effect = env.table("Effect_poisoned").unwrap();
    let apply = effect.field("Apply").unwrap();
    match &apply.ty {
        TypeDescriptor::Function(f) => {
            assert_eq!(f.params.len(), 3);
            assert_eq!(f.params[1].1, TypeDescriptor::table("ParamData_poisoned"));
            assert_eq!(f.ret, TypeDescriptor::Void);
        }
        other => panic!("Apply should be a function, got {other:?}"),
    }

    let param = env.table("Param_poisoned").unwrap();
    assert!(param.field("duration").unwrap().mutable);
    assert!(!param.field("owner").unwrap().mutable);
    assert_eq!(
        param.field("data").unwrap().ty,
        TypeDescriptor::table("ParamData_poisoned")
    );

    // duplicate id
    assert!(matches!(
        env.register_effect("poisoned", vec![]),
        Err(EnvError::DuplicateEffect(_))
    ));

    // empty ParamData still yields a working Apply
    env.register_effect("stunned", vec![]).unwrap();
    assert!(env.table("ParamData_stunned").unwrap().fields.is_empty());
}

#[test]
fn nine_effects_match_failure_regex_id_set() {
    let mut env = dci_env();
    for id in [
        "poisoned",
        "stunned",
        "blinded",
        "combo_points",
        "confusion",
        "damage_shield",
        "enraged",
        "vulnerable",
        "wounded",
    ] {
        env.register_effect(id, vec![]).unwrap();
    }
    assert_eq!(
        env.effect_ids(),
        vec![
            "blinded",
            "combo_points",
            "confusion",
            "damage_shield",
            "enraged",
            "poisoned",
            "stunned",
            "vulnerable",
            "wounded"
        ]
    );
}

#[test]
fn trace_types_reaches_number_through_dci() {
    let env = dci_env();
    let targets = [TypeDescriptor::Number];
    let reached = trace_types(&env, &targets, TraceVariant::Expression);
    let names: Vec<String> = reached.iter().map(|t| t.display_name()).collect();
    assert!(names.contains(&"Actor".to_string()), "Actor.health reaches number");
    assert!(names.contains(&"Coord".to_string()), "Coord.x reaches number");
    assert!(
        names.contains(&"GlobalMath".to_string()),
        "GlobalMath.Random() reaches number"
    );
    assert!(names.contains(&"number".to_string()), "targets are included");
    assert!(!names.contains(&"GlobalEffectTable".to_string()));
}

#[test]
fn trace_types_identity_when_only_target_exists() {
    let mut env = Environment::new();
    env.register_type(TableType::new("T"));
    let targets = [TypeDescriptor::table("T")];
    let reached = trace_types(&env, &targets, TraceVariant::Expression);
    assert_eq!(reached, vec![TypeDescriptor::table("T")]);
}

#[test]
fn trace_types_matches_matrix_closure_oracle() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(23);

    for round in 0..20 {
        // random field graph over n table types plus the number base type
        let n = rng.gen_range(3..9);
        let mut env = Environment::new();
        let mut adj = vec![vec![false; n + 1]; n + 1]; // node n is `number`
        for i in 0..n {
            let mut t = TableType::new(&format!("T{i}"));
            for j in 0..n {
                if rng.gen_bool(0.25) {
                    adj[i][j] = true;
                    t.push_field(
                        &format!("f{j}"),
                        FieldInfo {
                            ty: TypeDescriptor::table(&format!("T{j}")),
                            mutable: false,
                            required: false,
                            doc: String::new(),
                        },
                    );
                }
            }
            if rng.gen_bool(0.3) {
                adj[i][n] = true;
                t.push_field(
                    "num",
                    FieldInfo {
                        ty: TypeDescriptor::Number,
                        mutable: false,
                        required: false,
                        doc: String::new(),
                    },
                );
            }
            env.register_type(t);
        }

        // boolean matrix transitive closure
        let mut closure = adj.clone();
        for k in 0..=n {
            for i in 0..=n {
                for j in 0..=n {
                    closure[i][j] |= closure[i][k] && closure[k][j];
                }
            }
        }

        let reached = trace_types(&env, &[TypeDescriptor::Number], TraceVariant::Expression);
        for i in 0..n {
            let expected = closure[i][n];
            let actual = reached.contains(&TypeDescriptor::table(&format!("T{i}")));
            assert_eq!(actual, expected, "round {round}, T{i}");
        }
    }
}

#[test]
fn trace_types_is_monotone_in_targets() {
    let env = dci_env();
    let small = [TypeDescriptor::Number];
    let large = [TypeDescriptor::Number, TypeDescriptor::Str];
    let a = trace_types(&env, &small, TraceVariant::Expression);
    let b = trace_types(&env, &large, TraceVariant::Expression);
    for t in &a {
        assert!(b.contains(t), "{t} lost when targets grew");
    }
}

#[test]
fn enumerate_scope_candidates() {
    let mut env = dci_env();
    env.enter_scope(ScopeKind::Block);
    env.declare_symbol("user", TypeDescriptor::table("Actor"))
        .unwrap();
    env.declare_symbol("range", TypeDescriptor::Number).unwrap();
    env.declare_symbol("label", TypeDescriptor::Str).unwrap();

    let cands = enumerate_candidate_symbols(
        &env,
        None,
        &[TypeDescriptor::Number],
        TraceVariant::Expression,
    );
    let names: Vec<&str> = cands.iter().map(|(n, _)| n.as_str()).collect();
    assert!(names.contains(&"user"));
    assert!(names.contains(&"range"));
    assert!(!names.contains(&"label"));

    // oracle: enumerate all access chains of depth <= 3 from each symbol and
    // check whether any chain produces a number
    for (name, ty) in env.visible_symbols() {
        let mut reaches = false;
        let mut frontier = vec![ty.clone()];
        for _ in 0..3 {
            let mut next = Vec::new();
            for t in &frontier {
                if *t == TypeDescriptor::Number {
                    reaches = true;
                }
                match t {
                    TypeDescriptor::Table(tn) => {
                        if let Some(table) = env.table(tn) {
                            for (fname, f) in &table.fields {
                                if fname == "GetTalentLevel" && !env.in_talent {
                                    continue;
                                }
                                next.push(f.ty.clone());
                            }
                        }
                    }
                    TypeDescriptor::Function(f) => next.push(f.ret.clone()),
                    _ => {}
                }
            }
            frontier = next;
        }
        if reaches {
            assert!(names.contains(&name.as_str()), "oracle says {name} reaches");
        }
    }
}

#[test]
fn enumerate_mutable_lvalue_candidates() {
    let mut env = dci_env();
    env.register_effect("poisoned", vec![("poison".into(), TypeDescriptor::Number)])
        .unwrap();
    let all_targets = [
        TypeDescriptor::Number,
        TypeDescriptor::Boolean,
        TypeDescriptor::Str,
    ];
    let cands = enumerate_candidate_symbols(
        &env,
        Some(&TypeDescriptor::table("Param_poisoned")),
        &all_targets,
        TraceVariant::MutableLvalue,
    );
    let names: Vec<&str> = cands.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, vec!["data", "duration"]);
}

#[test]
fn expression_candidates_superset_of_lvalue() {
    let mut env = dci_env();
    env.register_effect("poisoned", vec![("poison".into(), TypeDescriptor::Number)])
        .unwrap();
    let targets = [TypeDescriptor::Number];
    let prefix = TypeDescriptor::table("Param_poisoned");
    let exprs = enumerate_candidate_symbols(&env, Some(&prefix), &targets, TraceVariant::Expression);
    let lvals =
        enumerate_candidate_symbols(&env, Some(&prefix), &targets, TraceVariant::MutableLvalue);
    for (name, _) in &lvals {
        assert!(exprs.iter().any(|(n, _)| n == name));
    }
}

#[test]
fn get_talent_level_gated_by_flag() {
    let mut env = dci_env();
    env.enter_scope(ScopeKind::Block);
    env.declare_symbol("user", TypeDescriptor::table("Actor"))
        .unwrap();
    let targets = [TypeDescriptor::Number];
    let without = enumerate_candidate_symbols(
        &env,
        Some(&TypeDescriptor::table("Actor")),
        &targets,
        TraceVariant::Expression,
    );
    assert!(!without.iter().any(|(n, _)| n == "GetTalentLevel"));
    env.in_talent = true;
    let with = enumerate_candidate_symbols(
        &env,
        Some(&TypeDescriptor::table("Actor")),
        &targets,
        TraceVariant::Expression,
    );
    assert!(with.iter().any(|(n, _)| n == "GetTalentLevel"));
}

#[test]
fn call_statement_candidates_require_functions() {
    let mut env = dci_env();
    env.enter_scope(ScopeKind::Block);
    env.declare_symbol("user", TypeDescriptor::table("Actor"))
        .unwrap();
    env.declare_symbol("count", TypeDescriptor::Number).unwrap();
    let cands = enumerate_candidate_symbols(&env, None, &[], TraceVariant::CallStatement);
    let names: Vec<&str> = cands.iter().map(|(n, _)| n.as_str()).collect();
    assert!(names.contains(&"user"), "Actor has callable fields");
    assert!(names.contains(&"g_math"));
    assert!(!names.contains(&"count"), "a bare number cannot be called");
}

#[test]
fn break_allowed_tracks_loops_and_functions() {
    let mut env = Environment::new();
    assert!(!env.break_allowed());
    env.enter_scope(ScopeKind::Loop);
    assert!(env.break_allowed());
    env.enter_scope(ScopeKind::Function(TypeDescriptor::Void));
    assert!(!env.break_allowed());
    env.enter_scope(ScopeKind::Loop);
    assert!(env.break_allowed());
}
