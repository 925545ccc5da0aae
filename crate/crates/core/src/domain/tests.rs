use std::collections::BTreeSet;

use super::*;
use crate::fixtures::episode;
use crate::ground::{ground, GroundAtom};
use crate::solve::solve_one;
use crate::syntax::parse_program;

fn fixture() -> (Network, Vec<AgentState>) {
    load_network(episode::NETWORK).unwrap()
}

fn episode_environment() -> crate::syntax::Program {
    let mut p = parse_program(episode::ENV_INFO).unwrap();
    p.extend(parse_program(episode::AGENT_INFO).unwrap());
    p
}

fn without(text: &str, needle: &str) -> String {
    text.lines()
        .filter(|l| !l.contains(needle))
        .collect::<Vec<_>>()
        .join("\n")
}

fn problems(text: &str) -> Vec<String> {
    match load_network(text) {
        Err(ConfigError::Invalid(e)) => e.problems,
        other => panic!("expected validation failure, got {other:?}"),
    }
}

#[test]
fn fixture_census() {
    let (n, agents) = fixture();
    assert_eq!(n.vertiports, (1..=7).map(VertiportId).collect());
    assert_eq!(n.uatms.len(), 3);
    assert_eq!(n.corridors.len(), 12);
    assert_eq!(n.coverage.len(), 20);
    assert_eq!(n.candidates.len(), 5);
    assert_eq!(n.step_horizon, 3);
    assert_eq!(n.agent_ids.len(), 20);
    assert_eq!(agents.len(), 6);
}

#[test]
fn empty_document_is_invalid() {
    let p = problems("");
    assert!(p.contains(&"network has no vertiports".to_string()), "{p:?}");
}

#[test]
fn unpaired_corridor() {
    let p = problems(&without(episode::NETWORK, "{ from = 7, to = 6, length = 22 }"));
    assert!(
        p.iter().any(|m| m == "corridor (6,7): no reverse corridor (7,6)"),
        "{p:?}"
    );
    // the coverage and agents on (7,6) fail too: every problem is reported
    assert!(p.len() > 1);
}

#[test]
fn unchained_plan_is_rejected() {
    let text = episode::NETWORK.replace(
        "plan = [[4, 3], [3, 7], [7, 6]] },\n    { agent = 5",
        "plan = [[4, 3], [7, 6]] },\n    { agent = 5",
    );
    let p = problems(&text);
    assert_eq!(p, vec!["agent 4: plan legs (4,3) and (7,6) do not chain"]);
}

#[test]
fn other_violations() {
    let bad = episode::NETWORK
        .replace("{ vertiport = 4, fallback = 3 }", "{ vertiport = 4, fallback = 4 }")
        .replace("uatm = 2, bound = \"at-most 5\"", "uatm = 9, bound = \"at-most 50\"")
        .replace("waypoint = 3, plan", "waypoint = 23, plan");
    let p = problems(&bad);
    assert_eq!(
        p,
        vec![
            "coverage of (6,7): unknown UATM 9",
            "coverage of (6,7): waypoint 50 outside 1..22",
            "candidate (4,4): fallback equals the vertiport",
            "agent 6: waypoint 23 outside 1..22 of corridor (7,6)",
        ]
    );
}

#[test]
fn config_syntax_errors() {
    assert!(matches!(
        load_network("schema = 2"),
        Err(ConfigError::Schema { found: 2 })
    ));
    assert!(matches!(
        load_network("vertiports = \"1-7\""),
        Err(ConfigError::IdSet(_))
    ));
    assert!(matches!(load_network("nonsense = 1"), Err(ConfigError::Syntax(_))));
    assert!(matches!(
        load_network(&episode::NETWORK.replace("\"at-most 12\"", "\"below 12\"")),
        Err(ConfigError::Syntax(_))
    ));
}

#[test]
fn config_round_trip() {
    let (n, agents) = fixture();
    let text = NetworkConfig::from_network(&n, &agents).to_toml();
    assert_eq!(load_network(&text).unwrap(), (n, agents));
}

#[test]
fn emitted_facts_contain_bundled_statements() {
    let (n, agents) = fixture();
    let text = emit_text(&n, &agents);
    for line in [
        "candidate_vp(6, 5).",
        "loc(6, 1, 7, 6, 3).",
        "plan(6, 1, 7, 6).",
        "edge_range(7, 6, 1..22).",
        "uatm(1..3). agent(1..20). vp(1..7).",
    ] {
        assert!(text.contains(line), "missing {line}");
    }
    assert!(text.contains("covered_wp(7, 6, 3, P) :- edge_range(7, 6, P), P <= 12."));
    assert!(text.contains("covered_wp(7, 5, 3, P) :- edge_range(7, 5, P)."));
}

#[test]
fn emitted_program_equals_the_bundled_statements() {
    let (n, agents) = fixture();
    let emitted: BTreeSet<String> = emit_facts(&n, &agents).rules.iter().map(|r| r.to_string()).collect();
    let episode: BTreeSet<String> = episode_environment().rules.iter().map(|r| r.to_string()).collect();
    assert_eq!(emitted, episode);
}

#[test]
fn environment_statement_census() {
    let (n, _) = fixture();
    let env = emit_facts(&n, &[]);
    let expected =
        3 + n.corridors.len() + n.vertiport_cover.len() + n.corridors.len() + n.coverage.len() + n.candidates.len() + 1;
    assert_eq!(env.statement_count(), expected);
    assert_eq!(
        env.statement_count(),
        parse_program(episode::ENV_INFO).unwrap().statement_count()
    );
}

#[test]
fn no_agents_emits_environment_only() {
    let (n, _) = fixture();
    let env = emit_facts(&n, &[]);
    assert!(env.rules.iter().all(|r| r
        .head
        .as_ref()
        .is_some_and(|h| !["loc", "plan", "source", "target"].contains(&h.predicate.as_str()))));
}

#[test]
fn extraction_round_trip() {
    let (n, agents) = fixture();
    assert_eq!(extract(&emit_facts(&n, &agents)).unwrap(), (n.clone(), agents.clone()));
    assert_eq!(extract(&episode_environment()).unwrap(), (n, agents));
}

#[test]
fn extraction_rejects_other_rules() {
    let p = parse_program("vp(1). q(X) :- vp(X).").unwrap();
    assert!(matches!(extract(&p), Err(ExtractError::Unrecognized(_))));
}

#[test]
fn typed_source_and_target_match_the_logic() {
    let (n, agents) = fixture();
    let model = solve_one(&ground(&emit_facts(&n, &agents)).unwrap()).unwrap().unwrap();
    for a in &agents {
        let source = GroundAtom::ints("source", &[a.agent.0, 1, a.source().unwrap().0]);
        let target = GroundAtom::ints("target", &[a.agent.0, 1, a.target().unwrap().0]);
        assert!(model.contains(&source), "{source}");
        assert!(model.contains(&target), "{target}");
    }
    let derived = model.atoms.iter().filter(|a| a.predicate == "target").count();
    assert_eq!(derived, agents.len());
}

#[test]
fn coverage_gaps_of_the_fixture() {
    let (n, _) = fixture();
    let gaps: Vec<(Leg, i64, i64)> = coverage_gaps(&n)
        .iter()
        .map(|g| (g.corridor, g.first, g.last))
        .collect();
    assert_eq!(
        gaps,
        vec![
            (Leg::new(7, 6), 13, 16),
            (Leg::new(6, 7), 6, 9),
            (Leg::new(6, 5), 8, 9),
            (Leg::new(5, 6), 7, 8),
        ]
    );
}

#[test]
fn gaps_agree_with_the_logic_program() {
    // uncovered waypoints according to the solver's covered_wp atoms
    let (n, agents) = fixture();
    let model = solve_one(&ground(&emit_facts(&n, &agents)).unwrap()).unwrap().unwrap();
    let mut uncovered = BTreeSet::new();
    for c in &n.corridors {
        for wp in 1..=c.length {
            let covered = n
                .uatms
                .iter()
                .any(|u| model.contains(&GroundAtom::ints("covered_wp", &[c.from.0, c.to.0, u.0, wp])));
            if !covered {
                uncovered.insert((c.leg(), wp));
            }
        }
    }
    let from_gaps: BTreeSet<(Leg, i64)> = coverage_gaps(&n)
        .iter()
        .flat_map(|g| (g.first..=g.last).map(move |wp| (g.corridor, wp)))
        .collect();
    assert_eq!(uncovered, from_gaps);
}

#[test]
fn full_coverage_has_no_gap() {
    let (n, _) = fixture();
    let gaps = coverage_gaps(&n);
    assert!(!gaps.iter().any(|g| g.corridor == Leg::new(7, 5)));
    let mut all = n.clone();
    all.coverage.push(CoverageSegment {
        from: VertiportId(7),
        to: VertiportId(6),
        uatm: UatmId(1),
        bound: Bound::All,
    });
    assert!(!coverage_gaps(&all).iter().any(|g| g.corridor == Leg::new(7, 6)));
}

#[test]
fn only_agent_four_sits_in_a_gap() {
    let (n, agents) = fixture();
    let gaps = coverage_gaps(&n);
    let in_gap: Vec<AgentId> = agents
        .iter()
        .filter(|a| {
            gaps.iter()
                .any(|g| g.corridor == a.corridor && (g.first..=g.last).contains(&a.waypoint))
        })
        .map(|a| a.agent)
        .collect();
    assert_eq!(in_gap, vec![AgentId(4)]);
}

#[test]
fn notices_from_stage_two() {
    let r = read_notices(&episode::expected(2)).unwrap();
    assert_eq!(r.notices.len(), 5);
    assert!(r
        .notices
        .iter()
        .all(|n| n.new_target == VertiportId(5) && n.appended_leg == Leg::new(6, 5) && n.step == 2));
    let agents: Vec<i64> = r.notices.iter().map(|n| n.agent.0).collect();
    assert_eq!(agents, vec![1, 2, 3, 5, 6]);
    // relayed and target_change_request are not lifted
    assert_eq!(r.residual.len(), 10);
}

#[test]
fn notices_from_stage_three() {
    let r = read_notices(&episode::expected(3)).unwrap();
    assert_eq!(r.notices.len(), 6);
    assert!(r.notices.contains(&TargetChangeNotice {
        agent: AgentId(4),
        step: 3,
        new_target: VertiportId(5),
        appended_leg: Leg::new(6, 5),
    }));
    assert_eq!(
        r.landing_requests,
        vec![LandingRequest {
            agent: AgentId(4),
            step: 2,
            vertiport: VertiportId(6)
        }]
    );
}

#[test]
fn coverage_from_stage_one() {
    let r = read_notices(&episode::expected(1)).unwrap();
    assert_eq!(r.covered.len(), 5);
    assert!(r.covered.contains(&Coverage {
        agent: AgentId(1),
        by: CoveredBy::Uatm(UatmId(2))
    }));
    assert!(r.covered.contains(&Coverage {
        agent: AgentId(3),
        by: CoveredBy::Other
    }));
    assert_eq!(r.residual.len(), 6);
}

#[test]
fn empty_readback() {
    assert_eq!(read_notices(&BTreeSet::new()).unwrap(), Readback::default());
}

#[test]
fn readback_shape_error() {
    let atoms: BTreeSet<GroundAtom> = ["target_change(a,2)".parse().unwrap()].into();
    assert_eq!(
        read_notices(&atoms),
        Err(ShapeError {
            atom: "target_change(a,2)".parse().unwrap(),
            expected: 2
        })
    );
}

#[test]
fn bound_text() {
    for b in [Bound::All, Bound::AtMost(12), Bound::AtLeast(17)] {
        assert_eq!(b.to_string().parse::<Bound>(), Ok(b));
    }
    assert!("at-most x".parse::<Bound>().is_err());
}
