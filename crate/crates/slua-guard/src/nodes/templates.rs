//! Grammar templates for every node kind, transcribed from the language
//! reference listings, plus the builtin terminal matchers the listings leave
//! to prose.

use crate::grammar::{GrammarTemplate, Terminal};

pub const NUMBER_PATTERN: &str = r"\d+(\.\d+)?";
pub const BOOLEAN_PATTERN: &str = "true|false";
pub const NAME_PATTERN: &str = r"[a-zA-Z_]\w{0,49}";
pub const STRING_PATTERN: &str = r#""([^"\\]|\\.)*""#;

pub fn builtin_number() -> Terminal {
    Terminal::pattern("NUMBER", NUMBER_PATTERN)
}

pub fn builtin_boolean() -> Terminal {
    Terminal::pattern("BOOLEAN", BOOLEAN_PATTERN)
}

pub fn builtin_new_var_name() -> Terminal {
    Terminal::pattern("NEW_VAR_NAME", NAME_PATTERN)
}

pub fn builtin_field_name() -> Terminal {
    Terminal::pattern("FIELD_NAME", NAME_PATTERN)
}

pub fn builtin_string() -> Terminal {
    Terminal::pattern("STRING", STRING_PATTERN)
}

pub const BLOCK_SOURCE: &str = r#"start: block {end_symbols}
block: (stat)*
stat: "<DO_BLOCK>" | "<IF_BLOCK>" | "<FOR_BLOCK>" | "<WHILE_BLOCK>" | "<ASSIGNMENT_STAT>" | "<LOCALVARDEF_STAT>" | "<RETURN_STAT>" | ("<PREFIX_EXP>" ";") | "break" ";""#;

pub const DO_BLOCK_SOURCE: &str = r#"do_block: "do" "<BLOCK>" "end""#;

pub const IF_BLOCK_SOURCE: &str = r#"if_block: "if" "<BOOL_EXP>" "then" "<BLOCK>" ("elseif" "<EXP>" "then" "<BLOCK>")* ("else" "<BLOCK>")? "end""#;

pub const WHILE_BLOCK_SOURCE: &str = r#"while_block: "while" "<BOOL_EXP>" "do" "<BLOCK>" "end""#;

pub const FOR_BLOCK_SOURCE: &str = r#"for_block: "for" NEW_VAR_NAME "=" "<NUM_EXP>" "," "<NUM_EXP>" ("," "<NUM_EXP>")? "do" "<BLOCK>" "end""#;

pub const ASSIGNMENT_SOURCE: &str = r#"start: assignment_stat ";"
assignment_stat: "<PREFIX_EXP>" "=" "<EXP>""#;

pub const LOCALVARDEF_SOURCE: &str = r#"start: localvardef_stat ";"
localvardef_stat: "local" NEW_VAR_NAME ":" "<TYPE_SPEC>" "=" "<EXP>""#;

pub const RETURN_SOURCE: &str = r#"start: "return" ("<EXP>")? ";""#;

pub const TYPE_SPEC_SOURCE: &str = r#"start: type_spec {end_symbols}
type_spec: base_type | function_type
function_type: "(" (BASE_TYPE ("," BASE_TYPE)*)? ")" "->" type_spec
BASE_TYPE: {base_type}"#;

pub const PREFIX_EXP_SOURCE: &str = r#"start: prefixexp {end_symbols}
prefixexp: ("<FIELD>" ("(" "<ARGLIST>" )? ".")* "<FIELD>" ("(" "<ARGLIST>")?"#;

pub const ARG_LIST_SOURCE: &str = r#"start: ("<EXP>")* ")""#;

pub const NUM_EXP_SOURCE: &str = r#"start: num_exp {end_symbols}
num_exp: num_sum
num_sum: num_product | num_sum add_op num_product
add_op: "+" | "-"
num_product: num_atom_signed | num_product mul_op num_atom_signed
mul_op: "*" | "/"
num_atom_signed: add_op? num_atom
num_atom: NUMBER | "(" num_exp ")" | "<NUM_PREFIX_EXP>""#;

pub const STR_EXP_SOURCE: &str = r#"start: str_exp {end_symbols}
str_exp: str_sum
str_sum: str_atom (".." str_atom)*
str_atom: STRING | "(" str_exp ")" | "<STR_PREFIX_EXP>""#;

/// The listing for the boolean grammar states that `num_exp` and `str_exp`
/// are the same rules as in the number and string grammars; they are appended
/// here so the template is self-contained.
pub const BOOL_EXP_SOURCE: &str = r#"start: bool_exp {end_symbols}
bool_exp: or_exp
or_exp: and_exp ("or" and_exp)*
and_exp: comparison ("and" comparison)*
comparison: bool_comparison | num_comparison | str_comparison
bool_comparison: not_exp (bool_cmp_op not_exp)*
bool_cmp_op: "==" | "~="
not_exp: "not" not_exp | bool_atom
bool_atom: BOOLEAN | "(" bool_exp ")" | "<BOOL_PREFIX_EXP>"
num_comparison: num_exp num_cmp_op num_exp
num_cmp_op: "==" | "~=" | "< " | "> " | "<=" | ">="
str_comparison: str_exp bool_cmp_op str_exp
num_exp: num_sum
num_sum: num_product | num_sum add_op num_product
add_op: "+" | "-"
num_product: num_atom_signed | num_product mul_op num_atom_signed
mul_op: "*" | "/"
num_atom_signed: add_op? num_atom
num_atom: NUMBER | "(" num_exp ")" | "<NUM_PREFIX_EXP>"
str_exp: str_sum
str_sum: str_atom (".." str_atom)*
str_atom: STRING | "(" str_exp ")" | "<STR_PREFIX_EXP>""#;

pub const FUNC_EXP_SOURCE: &str = r#"start: func_exp {end_symbols}
func_exp: func_def | "<FUNC_PREFIX_EXP>"
func_def: "function" "(" (NEW_VAR_NAME ("," NEW_VAR_NAME)*)? ")" "<BLOCK>" "end""#;

pub const TABLE_EXP_SOURCE: &str = r#"start: table_exp {end_symbols}
table_exp: "<TABLE_PREFIX_EXP>" | table_initialization
table_initialization: "{" table_init "}"
table_init: (key_eq_value ("," key_eq_value)* ","?)?
key_eq_value: "<KEY>" "=" "<EXP>""#;

pub const EFFECT_SOURCE: &str = r#"effect_def: data_fields_def effect_def_block
data_fields_def: "interface ParamData" "{" (key_colon_value ("," key_colon_value)* ","?)? "}" ";"
key_colon_value: FIELD_NAME ":" "<TYPE_SPEC>"
effect_def_block: "do" "<BLOCK>" new_effect "end"
new_effect: "NewEffect" "(" "<TABLE_EXP>" ")" ";""#;

pub const TALENT_SOURCE: &str = r#"talent_def: "do" "<BLOCK>" new_talent "end"
new_talent : "NewTalent" "(" "<TABLE_EXP>" ")" ";""#;

pub fn block_template() -> GrammarTemplate {
    GrammarTemplate::new("block", BLOCK_SOURCE, &["end_symbols"], vec![])
}

pub fn do_block_template() -> GrammarTemplate {
    GrammarTemplate::new("do_block", DO_BLOCK_SOURCE, &[], vec![])
}

pub fn if_block_template() -> GrammarTemplate {
    GrammarTemplate::new("if_block", IF_BLOCK_SOURCE, &[], vec![])
}

pub fn while_block_template() -> GrammarTemplate {
    GrammarTemplate::new("while_block", WHILE_BLOCK_SOURCE, &[], vec![])
}

pub fn for_block_template() -> GrammarTemplate {
    GrammarTemplate::new(
        "for_block",
        FOR_BLOCK_SOURCE,
        &[],
        vec![builtin_new_var_name()],
    )
}

pub fn assignment_template() -> GrammarTemplate {
    GrammarTemplate::new("assignment", ASSIGNMENT_SOURCE, &[], vec![])
}

pub fn localvardef_template() -> GrammarTemplate {
    GrammarTemplate::new(
        "localvardef",
        LOCALVARDEF_SOURCE,
        &[],
        vec![builtin_new_var_name()],
    )
}

pub fn return_template() -> GrammarTemplate {
    GrammarTemplate::new("return_stat", RETURN_SOURCE, &[], vec![])
}

pub fn type_spec_template() -> GrammarTemplate {
    GrammarTemplate::new(
        "type_spec",
        TYPE_SPEC_SOURCE,
        &["end_symbols", "base_type"],
        vec![],
    )
}

pub fn prefix_exp_template() -> GrammarTemplate {
    GrammarTemplate::new("prefixexp", PREFIX_EXP_SOURCE, &["end_symbols"], vec![])
}

pub fn arg_list_template() -> GrammarTemplate {
    GrammarTemplate::new("arglist", ARG_LIST_SOURCE, &[], vec![])
}

pub fn num_exp_template() -> GrammarTemplate {
    GrammarTemplate::new(
        "num_exp",
        NUM_EXP_SOURCE,
        &["end_symbols"],
        vec![builtin_number()],
    )
}

pub fn str_exp_template() -> GrammarTemplate {
    GrammarTemplate::new(
        "str_exp",
        STR_EXP_SOURCE,
        &["end_symbols"],
        vec![builtin_string()],
    )
}

pub fn bool_exp_template() -> GrammarTemplate {
    GrammarTemplate::new(
        "bool_exp",
        BOOL_EXP_SOURCE,
        &["end_symbols"],
        vec![builtin_boolean(), builtin_number(), builtin_string()],
    )
}

pub fn func_exp_template() -> GrammarTemplate {
    GrammarTemplate::new(
        "func_exp",
        FUNC_EXP_SOURCE,
        &["end_symbols"],
        vec![builtin_new_var_name()],
    )
}

pub fn table_exp_template() -> GrammarTemplate {
    GrammarTemplate::new("table_exp", TABLE_EXP_SOURCE, &["end_symbols"], vec![])
}

pub fn effect_template() -> GrammarTemplate {
    GrammarTemplate::new("effect_def", EFFECT_SOURCE, &[], vec![builtin_field_name()])
}

pub fn talent_template() -> GrammarTemplate {
    GrammarTemplate::new("talent_def", TALENT_SOURCE, &[], vec![])
}
