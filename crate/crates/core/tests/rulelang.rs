mod common;

use boxlab::env::Layout;
use boxlab::hypothesis::NamedRule;
use boxlab::rulelang::{parse_rule, Expr, RuleProgram};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn print_parse_roundtrip(e in common::arb_expr()) {
        let p = RuleProgram::new(e);
        let text = p.print();
        let back = parse_rule(&text).unwrap_or_else(|err| panic!("`{text}`: {err}"));
        prop_assert_eq!(&back, &p);
        prop_assert_eq!(back.print(), text);
    }

    #[test]
    fn evaluator_is_total_and_boolean(e in common::arb_expr()) {
        let layout = Layout::standard();
        let (keys, views) = common::all_pairs(&layout);
        let negated = Expr::not(e.clone());
        for k in &keys {
            for v in &views {
                prop_assert_eq!(negated.eval(k, v), !e.eval(k, v));
            }
        }
    }

    #[test]
    fn whitespace_and_case_do_not_matter(e in common::arb_expr()) {
        let text = RuleProgram::new(e).print();
        let noisy = text
            .replace(" AND ", "\n and\t")
            .replace(" OR ", "  or ")
            .replace("NOT ", "not ")
            .replace("IF ", "if ")
            .replace(" THEN ", " then ")
            .replace(" ELSE ", " else ");
        prop_assert_eq!(parse_rule(&noisy).unwrap(), parse_rule(&text).unwrap());
    }
}

#[test]
fn run_log_programs_parse_and_check() {
    let layout = Layout::standard();
    for text in [
        "color_match",
        "IF box_color_is(red) THEN color_match ELSE shape_match",
        "(box_color_is(red) AND key_number_is(1)) OR (box_color_is(pink) AND key_number_is(2)) OR \
         (box_color_is(purple) AND key_number_is(3)) OR (box_color_is(white) AND key_number_is(4)) OR \
         (box_color_is(blue) AND key_number_is(5))",
        "key_has_number AND number_match",
    ] {
        let p = parse_rule(text).unwrap();
        p.check_constants(&layout).unwrap();
    }
    assert!(parse_rule("key_color_is(mauve)").unwrap().check_constants(&layout).is_err());
}

#[test]
fn named_rules_print_as_parseable_programs() {
    let layout = Layout::standard();
    for r in NamedRule::ALL {
        let p = r.program(&layout);
        assert_eq!(parse_rule(&p.print()).unwrap(), p);
    }
}
