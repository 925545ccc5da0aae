use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::{Command, Output};

use uatm_core::fixtures::episode;
use uatm_core::GroundAtom;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures/episode")
        .join(name)
}

fn codes(n: usize) -> Vec<PathBuf> {
    ["env_info.lp", "agent_info.lp", "query01.lp", "query02.lp", "query03.lp"][..n]
        .iter()
        .map(|f| fixture(f))
        .collect()
}

fn uatm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uatm"))
        .args(args)
        .env_remove("UATM_CONFIG")
        .output()
        .unwrap()
}

fn uatm_paths(pre: &[&str], paths: &[PathBuf], post: &[&str]) -> Output {
    let mut args: Vec<String> = pre.iter().map(|s| s.to_string()).collect();
    args.extend(paths.iter().map(|p| p.display().to_string()));
    args.extend(post.iter().map(|s| s.to_string()));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    uatm(&refs)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn answer(o: &Output) -> BTreeSet<GroundAtom> {
    let text = stdout(o);
    let line = text.lines().skip_while(|l| !l.starts_with("Answer:")).nth(1).unwrap();
    line.split_whitespace().map(|a| a.parse().unwrap()).collect()
}

#[test]
fn solve_first_stage() {
    let o = uatm_paths(&["solve"], &codes(3), &[]);
    assert_eq!(o.status.code(), Some(10));
    assert_eq!(answer(&o), episode::expected(1));
    let text = stdout(&o);
    assert!(text.contains("Models       : 1"));
    let order: Vec<usize> = ["Answer: 1", "SATISFIABLE", "Models", "Time"]
        .iter()
        .map(|s| text.find(s).unwrap())
        .collect();
    assert!(order.windows(2).all(|w| w[0] < w[1]), "{text}");
}

#[test]
fn solve_all_codes() {
    let o = uatm_paths(
        &["solve"],
        &codes(5),
        &[
            "--project-shows",
            &fixture("query02.lp").display().to_string(),
            "--project-shows",
            &fixture("query03.lp").display().to_string(),
        ],
    );
    assert_eq!(o.status.code(), Some(10));
    assert_eq!(answer(&o), episode::expected(3));
    // without projection every shown predicate accumulates
    let all = answer(&uatm_paths(&["solve"], &codes(5), &[]));
    assert!(all.is_superset(&episode::expected(3)));
    assert!(all.is_superset(&episode::expected(1)));
}

#[test]
fn solve_json() {
    let o = uatm_paths(&["solve", "--json"], &codes(3), &[]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["result"], "SATISFIABLE");
    assert_eq!(v["models"][0].as_array().unwrap().len(), 11);
}

#[test]
fn solve_empty_and_unsatisfiable() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.lp");
    std::fs::write(&empty, "").unwrap();
    let o = uatm_paths(&["solve"], &[empty], &[]);
    assert_eq!(o.status.code(), Some(10));
    assert!(stdout(&o).starts_with("Answer: 1\n\nSATISFIABLE\n"));

    let unsat = dir.path().join("unsat.lp");
    std::fs::write(&unsat, "a.\n:- a.\n").unwrap();
    let o = uatm_paths(&["solve"], &[unsat], &[]);
    assert_eq!(o.status.code(), Some(20));
    assert!(stdout(&o).contains("UNSATISFIABLE\nViolated constraint: :- a."));
}

#[test]
fn input_errors_name_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.lp");
    std::fs::write(&bad, "a.\nb :- .\n").unwrap();
    let o = uatm_paths(&["solve"], std::slice::from_ref(&bad), &[]);
    assert_eq!(o.status.code(), Some(65));
    assert!(stderr(&o).contains(&format!("{}:2:", bad.display())), "{}", stderr(&o));

    let unsafe_rule = dir.path().join("unsafe.lp");
    std::fs::write(&unsafe_rule, "p(X) :- not q(X).\n").unwrap();
    let o = uatm_paths(&["solve"], &[fixture("env_info.lp"), unsafe_rule.clone()], &[]);
    assert_eq!(o.status.code(), Some(65));
    assert!(
        stderr(&o).contains(&format!("{}:line 1: unsafe variables X", unsafe_rule.display())),
        "{}",
        stderr(&o)
    );

    let o = uatm(&["solve", "/no/such/file.lp"]);
    assert_eq!(o.status.code(), Some(74));
}

#[test]
fn explain_reaches_plan_facts() {
    let o = uatm_paths(&["explain"], &codes(4), &["target_change(2,2)"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("target_change(2,2)  <- target_change(A, T) :-"));
    assert!(text.contains("plan(2,1,7,6)  [fact]"));

    let o = uatm_paths(&["explain", "--json"], &codes(4), &["target_change(2,2)"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["atom"], "target_change(2,2)");
}

#[test]
fn explain_errors() {
    let o = uatm_paths(&["explain"], &codes(4), &["target_change(2,"]);
    assert_eq!(o.status.code(), Some(65));
    let o = uatm_paths(&["explain"], &codes(4), &["target_change(4,2)"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("target_change(4,2)"));
}

#[test]
fn golden_passes() {
    let o = uatm(&["golden"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o),
        "stage 1: pass\nstage 2: pass\nstage 3: pass\n3/3 stages match\n"
    );
}

#[test]
fn golden_without_candidate_fails_at_stage_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("network.toml");
    std::fs::write(
        &config,
        episode::NETWORK.replace("{ vertiport = 6, fallback = 5 },", ""),
    )
    .unwrap();
    let o = uatm(&["golden", "--config", config.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.contains("stage 1: pass"));
    assert!(text.contains("stage 2: FAIL"));
    assert!(text.contains("  - new_plan(1,2,6,5)"));
    // deterministic
    assert_eq!(stdout(&uatm(&["golden", "--config", config.to_str().unwrap()])), text);
}

#[test]
fn scenario_transcripts() {
    let o = uatm(&["scenario"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), uatm_core::golden_scenario().session.transcript_jsonl());

    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.script");
    std::fs::write(&empty, "# nothing\n").unwrap();
    let o = uatm(&["scenario", "--script", empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "");

    let bad = dir.path().join("bad.script");
    std::fs::write(&bad, "close 99\n").unwrap();
    let o = uatm(&["scenario", "--script", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(65));
    assert!(stderr(&o).contains("event 1 (close): unknown vertiport 99"));

    let out = dir.path().join("t.jsonl");
    let o = uatm(&["scenario", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(out).unwrap().lines().count(), 3);
}

#[test]
fn config_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("network.toml");
    std::fs::write(
        &config,
        episode::NETWORK.replace("step_horizon = 3", "step_horizon = 0"),
    )
    .unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_uatm"))
        .arg("emit")
        .env("UATM_CONFIG", &config)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(65));
    assert!(stderr(&o).contains("network.toml"));

    let o = uatm(&["emit"]);
    assert_eq!(o.status.code(), Some(0));
    let (n, a) = uatm_core::load_network(episode::NETWORK).unwrap();
    assert_eq!(stdout(&o), uatm_core::domain::emit_text(&n, &a));
}
