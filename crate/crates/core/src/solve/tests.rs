use std::collections::BTreeSet;

use proptest::prelude::*;

use super::*;
use crate::fixtures::episode;
use crate::ground::ground;
use crate::syntax::{parse_program, Program};

fn gp(text: &str) -> GroundProgram {
    ground(&parse_program(text).unwrap()).unwrap()
}

fn atoms(list: &[&str]) -> BTreeSet<GroundAtom> {
    list.iter().map(|a| a.parse().unwrap()).collect()
}

fn model_sets(report: &SolveReport) -> Vec<BTreeSet<GroundAtom>> {
    report.models.iter().map(|m| m.atoms.clone()).collect()
}

fn stage(n: usize) -> GroundProgram {
    ground(&episode::stage_program(n)).unwrap()
}

fn with_fact(mut program: Program, fact: &str) -> Program {
    program.extend(parse_program(fact).unwrap());
    program
}

#[test]
fn even_loop_is_undecided() {
    let g = gp("a :- not b. b :- not a.");
    let wf = well_founded(&g).unwrap();
    assert_eq!(wf.unknown_set.len(), 2);
    let report = answer_sets(&g, 0).unwrap();
    assert_eq!(model_sets(&report), vec![atoms(&["b"]), atoms(&["a"])]);
}

#[test]
fn self_support_is_unfounded() {
    let g = gp("p :- p.");
    assert!(well_founded(&g).unwrap().true_set.is_empty());
    assert!(well_founded(&g).unwrap().unknown_set.is_empty());
    assert_eq!(model_sets(&answer_sets(&g, 0).unwrap()), vec![BTreeSet::new()]);
    let oracle: Vec<_> = brute_force_answer_sets(&g)
        .unwrap()
        .into_iter()
        .map(|m| m.atoms)
        .collect();
    assert_eq!(oracle, vec![BTreeSet::new()]);
}

#[test]
fn constraint_removes_candidate() {
    let g = gp("a :- not b. b :- not a. :- a.");
    assert_eq!(model_sets(&answer_sets(&g, 0).unwrap()), vec![atoms(&["b"])]);
    let oracle: Vec<_> = brute_force_answer_sets(&g)
        .unwrap()
        .into_iter()
        .map(|m| m.atoms)
        .collect();
    assert_eq!(oracle, vec![atoms(&["b"])]);
}

#[test]
fn unsatisfiable_report_names_constraint() {
    let g = gp("a. :- a.");
    let report = answer_sets(&g, 1).unwrap();
    assert!(!report.satisfiable);
    assert_eq!(report.conflicts.len(), 1);
    assert_eq!(report.conflicts[0].rule, ":- a.");
    let text = report.render_text();
    assert!(text.starts_with("UNSATISFIABLE\nViolated constraint: :- a.\n"));
    assert!(text.contains("Models       : 0\n"));
}

#[test]
fn odd_loop_has_no_model() {
    let g = gp("a :- not a.");
    assert!(!answer_sets(&g, 0).unwrap().satisfiable);
    assert!(brute_force_answer_sets(&g).unwrap().is_empty());
}

#[test]
fn model_limit() {
    let g = gp("a :- not b. b :- not a. c :- not d. d :- not c.");
    assert_eq!(answer_sets(&g, 0).unwrap().models.len(), 4);
    assert_eq!(answer_sets(&g, 1).unwrap().models.len(), 1);
    assert_eq!(answer_sets(&g, 3).unwrap().models.len(), 3);
}

#[test]
fn stage_one_matches_the_expected_answer() {
    let g = stage(1);
    let wf = well_founded(&g).unwrap();
    assert!(wf.is_total());
    let report = answer_sets(&g, 0).unwrap();
    assert_eq!(report.models.len(), 1);
    assert_eq!(report.models[0].shown, episode::expected(1));
    assert!(!report.models[0].shown.contains(&"trigger_query".parse().unwrap()));
    assert!(report.models[0].atoms.contains(&"trigger_query".parse().unwrap()));
}

#[test]
fn later_stages_are_decided_by_the_fixpoint() {
    for n in 2..=3 {
        let g = stage(n);
        assert!(well_founded(&g).unwrap().is_total(), "stage {n}");
        let report = answer_sets(&g, 0).unwrap();
        assert_eq!(report.models.len(), 1);
        assert_eq!(report.stats.branches, 0);
    }
}

#[test]
fn coverage_count_is_five() {
    let g = stage(1);
    let wf = well_founded(&g).unwrap();
    let rule = g
        .rules
        .iter()
        .find(|r| r.head.map(|h| g.atom(h).predicate == "covered") == Some(true))
        .unwrap();
    assert_eq!(eval_aggregate(&rule.aggregates[0], &wf, &g).unwrap(), 5);
    assert!(aggregate_holds(&rule.aggregates[0], &wf, &g).unwrap());
}

#[test]
fn empty_aggregate_counts_zero() {
    let g = gp("n(N) :- N = #count{X: p(X)}.");
    let report = answer_sets(&g, 0).unwrap();
    assert_eq!(model_sets(&report), vec![atoms(&["n(0)"])]);
}

#[test]
fn heading_count_in_stage_three() {
    let report = answer_sets(&stage(3), 1).unwrap();
    let counts: Vec<_> = report.models[0]
        .atoms
        .iter()
        .filter(|a| a.predicate == "vp6_heading_agent_number")
        .collect();
    assert_eq!(
        counts,
        vec![&"vp6_heading_agent_number(6)".parse::<GroundAtom>().unwrap()]
    );
}

#[test]
fn undecided_aggregate_dependency() {
    let g = gp("p :- not q. q :- not p. c(N) :- N = #count{1: p}.");
    let wf = well_founded(&g).unwrap();
    let rule = g.rules.iter().find(|r| !r.aggregates.is_empty()).unwrap();
    assert_eq!(
        eval_aggregate(&rule.aggregates[0], &wf, &g),
        Err(SolveError::UndecidedDependency {
            atom: "p".parse().unwrap()
        })
    );
    let report = answer_sets(&g, 0).unwrap();
    assert_eq!(model_sets(&report), vec![atoms(&["c(1)", "p"]), atoms(&["c(0)", "q"])]);
}

#[test]
fn recursion_through_aggregate_is_rejected() {
    let g = gp("p(1). p(2) :- 1 <= #count{X: p(X)}.");
    assert!(matches!(
        well_founded(&g),
        Err(SolveError::UnstratifiedAggregate { .. })
    ));
    assert!(matches!(
        answer_sets(&g, 1),
        Err(SolveError::UnstratifiedAggregate { .. })
    ));
}

#[test]
fn projection_cases() {
    let set = atoms(&["a(1)", "b", "c(1,2)"]);
    assert_eq!(project_shown(&set, &[]), set);
    assert_eq!(
        project_shown(&BTreeSet::new(), &[Signature::new("a", 1)]),
        BTreeSet::new()
    );
    assert_eq!(
        project_shown(&set, &[Signature::new("a", 1), Signature::new("c", 1)]),
        atoms(&["a(1)"])
    );
}

#[test]
fn explanation_of_target_change() {
    let g = stage(2);
    let model = solve_one(&g).unwrap().unwrap();
    let tree = explain(&"target_change(1,2)".parse().unwrap(), &model, &g).unwrap();
    assert_eq!(
        tree.rule.source,
        "target_change(A, T) :- plan(A, T, U, V), new_plan(A, T, U, V), target_change_request(A, T)."
    );
    let children: Vec<String> = tree.children.iter().map(|c| c.atom.to_string()).collect();
    assert_eq!(
        children,
        vec!["plan(1,2,6,5)", "new_plan(1,2,6,5)", "target_change_request(1,2)"]
    );

    // leaves are facts of the environment and agent programs
    let inputs =
        parse_program(episode::ENV_INFO).unwrap().rules.len() + parse_program(episode::AGENT_INFO).unwrap().rules.len();
    tree.walk(&mut |node| {
        if node.is_fact() {
            assert!(node.rule.origin < inputs, "{} is not an input fact", node.atom);
        }
    });
    // every node's rule body holds in the model
    tree.walk(&mut |node| {
        for c in &node.children {
            assert!(model.contains(&c.atom));
        }
    });
}

#[test]
fn explanation_of_fact() {
    let g = stage(1);
    let model = solve_one(&g).unwrap().unwrap();
    let tree = explain(&"candidate_vp(6,5)".parse().unwrap(), &model, &g).unwrap();
    assert!(tree.is_fact());
    assert_eq!(tree.depth(), 1);
    assert_eq!(
        explain(&"target_change(1,2)".parse().unwrap(), &model, &g),
        Err(SolveError::NotInModel {
            atom: "target_change(1,2)".parse().unwrap()
        })
    );
}

#[test]
fn explanation_shows_absence_and_witness() {
    let g = stage(3);
    let model = solve_one(&g).unwrap().unwrap();
    let tree = explain(&"landing_request(4,2,6)".parse().unwrap(), &model, &g).unwrap();
    assert_eq!(tree.neg_leaves, vec!["not target(4,2,_)"]);
    let tree = explain(&"vp6_heading_agent_number(6)".parse().unwrap(), &model, &g).unwrap();
    assert_eq!(tree.agg_leaves[0].count, 6);
    assert!(tree.to_string().contains("[count 6: 1 2 3 4 5 6]"));
}

#[test]
fn plan_persists_between_steps() {
    let model = solve_one(&stage(2)).unwrap().unwrap();
    let plans: Vec<&GroundAtom> = model.atoms.iter().filter(|a| a.predicate == "plan").collect();
    for p in &plans {
        let args = p.int_args().unwrap();
        let next = GroundAtom::ints("plan", &[args[0], args[1] + 1, args[2], args[3]]);
        let has_next_step = model.contains(&GroundAtom::ints("step", &[args[1] + 1]));
        assert!(
            !has_next_step || model.contains(&next),
            "{p} not carried to the next step"
        );
    }
}

#[test]
fn added_fact_retracts_landing_request() {
    let landing: GroundAtom = "landing_request(4,2,6)".parse().unwrap();
    let before = solve_one(&stage(3)).unwrap().unwrap();
    assert!(before.contains(&landing));
    let program = with_fact(episode::stage_program(3), "target(4,2,5).");
    let after = solve_one(&ground(&program).unwrap()).unwrap().unwrap();
    assert!(!after.contains(&landing));
}

#[test]
fn golden_models_pass_the_independent_check() {
    for n in 1..=3 {
        let g = stage(n);
        let model = solve_one(&g).unwrap().unwrap();
        assert_eq!(is_answer_set(&g, &model.atoms), Ok(()), "stage {n}");
    }
}

#[test]
fn independent_check_rejects_non_models() {
    let g = gp("a :- not b. b :- not a. c :- a.");
    assert_eq!(is_answer_set(&g, &atoms(&["a", "c"])), Ok(()));
    assert!(is_answer_set(&g, &atoms(&["a"])).is_err());
    assert!(is_answer_set(&g, &atoms(&["a", "b"])).is_err());
    assert!(is_answer_set(&g, &atoms(&["c"])).is_err());
}

#[test]
fn brute_force_size_limit() {
    let g = gp("p(1..21).");
    assert_eq!(
        brute_force_answer_sets(&g),
        Err(SolveError::TooLarge {
            atoms: 21,
            limit: BRUTE_FORCE_LIMIT
        })
    );
}

#[test]
fn report_text_layout() {
    let report = answer_sets(&stage(1), 1).unwrap();
    let text = report.render_text();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "Answer: 1");
    assert_eq!(lines[2], "SATISFIABLE");
    assert_eq!(lines[4], "Models       : 1");
    assert_eq!(lines[5], "Calls        : 1");
    assert!(lines[6].starts_with("Time         : "));
    assert!(lines[7].starts_with("CPU Time     : "));
    let json = report.to_json(false);
    assert_eq!(json["result"], "SATISFIABLE");
    assert_eq!(json["models"][0].as_array().unwrap().len(), 11);
    assert!(json["stats"].get("wall_seconds").is_none());
}

#[test]
fn deterministic_reports() {
    let a = answer_sets(&gp("a :- not b. b :- not a. c :- not d, a. d :- not c."), 0).unwrap();
    let b = answer_sets(&gp("a :- not b. b :- not a. c :- not d, a. d :- not c."), 0).unwrap();
    assert_eq!(a.models, b.models);
    assert_eq!(a.stats.branches, b.stats.branches);
    assert!(a.stats.branches > 0);
}

/// Small propositional programs: rules over atoms `p0..p{n-1}`.
fn program_text(rules: &[(Option<usize>, Vec<usize>, Vec<usize>)]) -> String {
    let mut out = String::new();
    for (head, pos, neg) in rules {
        let mut body: Vec<String> = pos.iter().map(|a| format!("p{a}")).collect();
        body.extend(neg.iter().map(|a| format!("not p{a}")));
        match (head, body.is_empty()) {
            (Some(h), true) => out.push_str(&format!("p{h}.\n")),
            (Some(h), false) => out.push_str(&format!("p{h} :- {}.\n", body.join(", "))),
            (None, true) => {}
            (None, false) => out.push_str(&format!(":- {}.\n", body.join(", "))),
        }
    }
    out
}

fn rule_strategy(n: usize) -> impl Strategy<Value = (Option<usize>, Vec<usize>, Vec<usize>)> {
    (
        prop::option::weighted(0.85, 0..n),
        prop::collection::vec(0..n, 0..3),
        prop::collection::vec(0..n, 0..3),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn engine_agrees_with_brute_force(
        rules in (1usize..=8).prop_flat_map(|n| prop::collection::vec(rule_strategy(n), 0..14))
    ) {
        let g = gp(&program_text(&rules));
        let mut engine: Vec<_> = answer_sets(&g, 0).unwrap().models.into_iter().map(|m| m.atoms).collect();
        engine.sort();
        let oracle: Vec<_> = brute_force_answer_sets(&g).unwrap().into_iter().map(|m| m.atoms).collect();
        prop_assert_eq!(engine, oracle);
    }

    #[test]
    fn well_founded_bounds_every_model(
        rules in (1usize..=8).prop_flat_map(|n| prop::collection::vec(rule_strategy(n), 0..14))
    ) {
        let g = gp(&program_text(&rules));
        let wf = well_founded(&g).unwrap();
        for m in brute_force_answer_sets(&g).unwrap() {
            for id in &wf.true_set {
                prop_assert!(m.atoms.contains(g.atom(*id)));
            }
            for id in &wf.false_set {
                prop_assert!(!m.atoms.contains(g.atom(*id)));
            }
        }
    }

    #[test]
    fn models_are_supported(
        rules in (1usize..=8).prop_flat_map(|n| prop::collection::vec(rule_strategy(n), 0..14))
    ) {
        let g = gp(&program_text(&rules));
        for m in answer_sets(&g, 0).unwrap().models {
            prop_assert_eq!(is_answer_set(&g, &m.atoms), Ok(()));
        }
    }
}
