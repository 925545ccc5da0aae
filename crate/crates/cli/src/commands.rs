use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use uatm_core::domain::{emit_text, load_network};
use uatm_core::fixtures::episode;
use uatm_core::scenario::{golden_diff, parse_script, run_script};
use uatm_core::syntax::Program;
use uatm_core::{answer_sets, explain, ground, parse_program, AgentState, GroundAtom, GroundError, Network};

use crate::exit;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("writing output: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => exit::INPUT,
            CliError::Io { .. } | CliError::Output(_) => exit::IO,
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Network and agents from `path`, or the bundled fixture.
pub fn load_config(path: Option<&Path>) -> Result<(Network, Vec<AgentState>), CliError> {
    let (name, text) = match path {
        Some(p) => (p.display().to_string(), read(p)?),
        None => ("bundled network".to_string(), episode::NETWORK.to_string()),
    };
    load_network(&text).map_err(|e| CliError::Input(format!("{name}: {e}")))
}

struct Loaded {
    program: Program,
    /// `(file, first rule index)` in load order.
    files: Vec<(String, usize)>,
}

fn load_programs(files: &[PathBuf]) -> Result<Loaded, CliError> {
    let mut loaded = Loaded {
        program: Program::default(),
        files: Vec::new(),
    };
    for f in files {
        let name = f.display().to_string();
        let p = parse_program(&read(f)?).map_err(|e| CliError::Input(format!("{name}:{e}")))?;
        loaded.files.push((name, loaded.program.rules.len()));
        loaded.program.extend(p);
    }
    Ok(loaded)
}

impl Loaded {
    fn file_of(&self, rule: usize) -> &str {
        self.files
            .iter()
            .rev()
            .find(|(_, start)| *start <= rule)
            .map_or("<input>", |(f, _)| f.as_str())
    }

    fn ground_error(&self, e: GroundError) -> CliError {
        let rule = match &e {
            GroundError::Unsafe { rule, .. } => Some(*rule),
            other => self.program.rules.iter().position(|r| r.span.line == other.line()),
        };
        match rule {
            Some(r) => CliError::Input(format!("{}:{e}", self.file_of(r))),
            None => CliError::Input(e.to_string()),
        }
    }
}

pub struct SolveArgs<'a> {
    pub files: &'a [PathBuf],
    pub models: usize,
    pub json: bool,
    /// Files whose `#show` statements replace the accumulated ones.
    pub project_shows: &'a [PathBuf],
}

/// Prints the answer sets of the given files. Returns the exit code.
pub fn solve(args: &SolveArgs<'_>, out: &mut dyn Write) -> Result<i32, CliError> {
    let mut loaded = load_programs(args.files)?;
    if !args.project_shows.is_empty() {
        loaded.program.shows = load_programs(args.project_shows)?.program.shows;
    }
    let gp = ground(&loaded.program).map_err(|e| loaded.ground_error(e))?;
    let report = answer_sets(&gp, args.models).map_err(|e| CliError::Input(e.to_string()))?;
    if args.json {
        writeln!(
            out,
            "{}",
            serde_json::to_string_pretty(&report.to_json(true)).expect("json")
        )?;
    } else {
        write!(out, "{}", report.render_text())?;
    }
    Ok(if report.satisfiable {
        exit::SATISFIABLE
    } else {
        exit::UNSATISFIABLE
    })
}

/// Prints the derivation of `atom` in the first answer set.
pub fn explain_atom(files: &[PathBuf], atom: &str, json: bool, out: &mut dyn Write) -> Result<i32, CliError> {
    let target: GroundAtom = atom
        .trim()
        .parse()
        .map_err(|e| CliError::Input(format!("cannot parse atom `{atom}`: {e}")))?;
    let loaded = load_programs(files)?;
    let gp = ground(&loaded.program).map_err(|e| loaded.ground_error(e))?;
    let report = answer_sets(&gp, 1).map_err(|e| CliError::Input(e.to_string()))?;
    let Some(model) = report.models.first() else {
        writeln!(out, "UNSATISFIABLE: nothing to explain")?;
        return Ok(exit::UNSATISFIABLE);
    };
    match explain(&target, model, &gp) {
        Ok(tree) if json => writeln!(out, "{}", serde_json::to_string_pretty(&tree).expect("json"))?,
        Ok(tree) => write!(out, "{tree}")?,
        Err(e) => {
            writeln!(out, "{e}")?;
            return Ok(exit::CHECK_FAILED);
        }
    }
    Ok(exit::OK)
}

/// Runs a script against a network and writes the transcript.
pub fn scenario(config: Option<&Path>, script: Option<&Path>, out: &mut dyn Write) -> Result<i32, CliError> {
    let (network, agents) = load_config(config)?;
    let (name, text) = match script {
        Some(p) => (p.display().to_string(), read(p)?),
        None => ("bundled script".to_string(), episode::SCRIPT.to_string()),
    };
    let events = parse_script(&text).map_err(|e| CliError::Input(format!("{name}: {e}")))?;
    let run = run_script(network, agents, events).map_err(|e| CliError::Input(e.to_string()))?;
    out.write_all(run.session.transcript_jsonl().as_bytes())?;
    Ok(exit::OK)
}

/// Replays the bundled script on a network and compares the three stage
/// answer sets with the expected ones.
pub fn golden(config: Option<&Path>, out: &mut dyn Write) -> Result<i32, CliError> {
    let (network, agents) = load_config(config)?;
    let events = parse_script(episode::SCRIPT).expect("bundled script parses");
    let run = run_script(network, agents, events).map_err(|e| CliError::Input(e.to_string()))?;
    let diffs = golden_diff(&run.stages);
    for (d, stage) in diffs
        .iter()
        .zip(run.stages.iter().map(Some).chain(std::iter::repeat(None)))
    {
        if d.passed() {
            writeln!(out, "stage {}: pass", d.stage)?;
            continue;
        }
        let verdict = match stage {
            None => "not run",
            Some(s) if s.satisfiable => "SATISFIABLE",
            Some(_) => "UNSATISFIABLE",
        };
        writeln!(out, "stage {}: FAIL ({verdict})", d.stage)?;
        for c in stage.map(|s| s.conflicts.as_slice()).unwrap_or_default() {
            writeln!(out, "  violated: {}", c.rule)?;
        }
        for a in &d.missing {
            writeln!(out, "  - {a}")?;
        }
        for a in &d.unexpected {
            writeln!(out, "  + {a}")?;
        }
    }
    let passed = diffs.iter().filter(|d| d.passed()).count();
    writeln!(out, "{passed}/{} stages match", diffs.len())?;
    Ok(if passed == diffs.len() {
        exit::OK
    } else {
        exit::CHECK_FAILED
    })
}

/// Prints the logic program generated from a network config.
pub fn emit(config: Option<&Path>, out: &mut dyn Write) -> Result<i32, CliError> {
    let (network, agents) = load_config(config)?;
    out.write_all(emit_text(&network, &agents).as_bytes())?;
    Ok(exit::OK)
}
