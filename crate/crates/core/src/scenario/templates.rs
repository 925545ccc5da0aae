//! Query programs for one closure episode, parameterized by the closed
//! vertiport, its owning UATM and an episode suffix on episode-local
//! predicates. With vertiport 6, UATM 2 and no suffix they are the bundled
//! query programs statement for statement.

use crate::domain::{AgentId, Leg, UatmId, VertiportId};

const SURVEY: &str = "\
covered_agent$S(A, TM) :- loc(A, T, U, V, WP), covered_wp(U, V, TM, WP), target(A, T, V1), V1 == $VP.
covered_by_uatm$U$S(A) :- covered_agent$S(A, $U).
covered_by_other$S(A) :- loc(A, T, U, V, _), covered_agent$S(A, TM), TM != $U.

trigger_query$S :- covered_agent$S(A, TM).
covered$S :- 1 <= #count{A: covered_by_uatm$U$S(A); A:covered_by_other$S(A)}.
:- trigger_query$S, not covered$S.

#show loc/5.
#show covered_by_uatm$U$S/1.
#show covered_by_other$S/1.
";

const REROUTE: &str = "\
relayed$S(A) :- covered_by_uatm$U$S(A).
relayed$S(A) :- covered_by_other$S(A).

new_plan(A, T+1, V, V1) :- plan(A, T, U, V), target(A, T, V), V == $VP, relayed$S(A), candidate_vp(V, V1), step(T+1), not new_plan(A, T, V, V1).
target_change_request(A, T) :- relayed$S(A), new_plan(A, T, V, V1).

plan(A, T+1, V, V1) :- plan(A, T, U, V), target(A, T, V), new_plan(A, T+1, V, V1), step(T+1).
plan(A, T+1, U, V) :- plan(A, T, U, V), step(T+1).

target_change(A, T) :- plan(A, T, U, V), new_plan(A, T, U, V), target_change_request(A, T).
:- not target_change(A, T), new_plan(A, T, U, V), target_change_request(A, T).

#show relayed$S/1.
#show new_plan/4.
#show target_change_request/2.
#show target_change/2.
";

const LANDING: &str = "\
vp$VP_heading_agent_number(N) :- N = #count{A:target(A, T, V), V==$VP}.

loc($A, $T, $F, $TO, $WP).
landing_request(A, T+1, V) :- not target(A, T+1, _), target(A, T, V), loc(A, T+1, U, V, WP), V == $VP, covered_wp(U, V, TM, WP).

new_plan(A, T+1, V, V1) :- plan(A, T, U, V), landing_request(A, T, V), candidate_vp(V, V1), step(T+1), not new_plan(A, T, V, V1).
plan(A, T+1, V, V1) :- plan(A, T, U, V), landing_request(A, T, V), new_plan(A, T+1, V, V1), step(T+1).

target_change_request(A, T+1) :- landing_request(A, T, V), new_plan(A, T+1, V, V1).
plan(A, T+1, V, V1) :- plan(A, T, U, V), landing_request(A, T, V), new_plan(A, T+1, V, V1), target_change_request(A, T+1), step(T+1).
:- not target_change(A, T+1), landing_request(A, T, V), step(T+1).

#show vp$VP_heading_agent_number/1.
#show target_change_request/2.
#show target_change/2.
#show landing_request/3.
";

/// Suffix for episode-local predicates. The first episode has none.
pub fn episode_suffix(episode: usize) -> String {
    if episode <= 1 {
        String::new()
    } else {
        format!("_e{episode}")
    }
}

/// Finds heading agents the closing vertiport's owner covers and those
/// other UATMs cover.
pub fn survey(vp: VertiportId, owner: UatmId, episode: usize) -> String {
    SURVEY
        .replace("$VP", &vp.to_string())
        .replace("$U", &owner.to_string())
        .replace("$S", &episode_suffix(episode))
}

/// Retargets relayed agents to the candidate vertiport.
pub fn reroute(vp: VertiportId, owner: UatmId, episode: usize) -> String {
    REROUTE
        .replace("$VP", &vp.to_string())
        .replace("$U", &owner.to_string())
        .replace("$S", &episode_suffix(episode))
}

/// Handles a landing request by an agent now at `waypoint` of `corridor`
/// at `step`, heading to the closed `corridor.to`.
pub fn landing(agent: AgentId, step: i64, corridor: Leg, waypoint: i64) -> String {
    LANDING
        .replace("$VP", &corridor.to.to_string())
        .replace("$A", &agent.to_string())
        .replace("$TO", &corridor.to.to_string())
        .replace("$T", &step.to_string())
        .replace("$F", &corridor.from.to_string())
        .replace("$WP", &waypoint.to_string())
}

/// Feedback fact recording an applied retarget.
pub fn retarget_fact(agent: AgentId, step: i64, vertiport: VertiportId) -> String {
    format!("target({agent}, {step}, {vertiport}).")
}
