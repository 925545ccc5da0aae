//! Bundled reference data: the closure episode's five programs, the printed
//! answer sets they are expected to produce, and the equivalent network
//! configuration document.

pub mod episode {
    pub const ENV_INFO: &str = include_str!("../fixtures/episode/env_info.lp");
    pub const AGENT_INFO: &str = include_str!("../fixtures/episode/agent_info.lp");
    pub const QUERY_01: &str = include_str!("../fixtures/episode/query01.lp");
    pub const QUERY_02: &str = include_str!("../fixtures/episode/query02.lp");
    pub const QUERY_03: &str = include_str!("../fixtures/episode/query03.lp");

    /// Expected shown atoms, one answer line per stage.
    pub const RESULT_1: &str = include_str!("../fixtures/episode/result1.txt");
    pub const RESULT_2: &str = include_str!("../fixtures/episode/result2.txt");
    pub const RESULT_3: &str = include_str!("../fixtures/episode/result3.txt");

    pub const NETWORK: &str = include_str!("../fixtures/episode/network.toml");
    pub const SCRIPT: &str = include_str!("../fixtures/episode/golden.script");

    pub const ALL: [&str; 5] = [ENV_INFO, AGENT_INFO, QUERY_01, QUERY_02, QUERY_03];

    use crate::ground::GroundAtom;
    use crate::syntax::{parse_program, Program};

    /// The program solved at `stage` (1 to 3): environment, agents and the
    /// queries up to that stage. Shown predicates are those of the stage's
    /// own query, plus the earlier follow-up query for stage 3.
    pub fn stage_program(stage: usize) -> Program {
        assert!((1..=3).contains(&stage), "stages are 1 to 3");
        let mut program = Program::default();
        for text in &ALL[..stage + 2] {
            let mut p = parse_program(text).expect("bundled program parses");
            p.shows.clear();
            program.extend(p);
        }
        for text in &ALL[if stage == 1 { 2 } else { 3 }..stage + 2] {
            let shows = parse_program(text).expect("bundled program parses").shows;
            program.extend(Program {
                rules: Vec::new(),
                shows,
            });
        }
        program
    }

    /// Expected shown atoms of `stage`.
    pub fn expected(stage: usize) -> std::collections::BTreeSet<GroundAtom> {
        let text = [RESULT_1, RESULT_2, RESULT_3][stage - 1];
        text.split_whitespace()
            .map(|a| a.parse().expect("bundled result parses"))
            .collect()
    }
}
