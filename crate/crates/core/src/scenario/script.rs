use crate::domain::{AgentId, Leg, VertiportId};

use super::ScenarioEvent;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("script line {line}: {message}")]
pub struct ScriptError {
    pub line: usize,
    pub message: String,
}

/// Parses a scenario script, one event per line:
///
/// ```text
/// close 6 [manager name]
/// advance
/// land 4 7 6 17      # agent, corridor from, corridor to, waypoint
/// reopen 6
/// ```
pub fn parse_script(text: &str) -> Result<Vec<ScenarioEvent>, ScriptError> {
    let mut events = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| ScriptError { line: i + 1, message };
        let words: Vec<&str> = line.split_whitespace().collect();
        let int = |w: &str| w.parse::<i64>().map_err(|_| err(format!("`{w}` is not an integer")));
        let event = match words.as_slice() {
            ["advance"] => ScenarioEvent::Advance,
            ["close", v] => ScenarioEvent::close(int(v)?),
            ["close", v, manager @ ..] => ScenarioEvent::Close {
                vertiport: VertiportId(int(v)?),
                manager: manager.join(" "),
            },
            ["reopen", v] => ScenarioEvent::Reopen {
                vertiport: VertiportId(int(v)?),
            },
            ["land", a, f, t, wp] => ScenarioEvent::Landing {
                agent: AgentId(int(a)?),
                corridor: Leg::new(int(f)?, int(t)?),
                waypoint: int(wp)?,
            },
            [cmd, ..] if ["advance", "close", "reopen", "land"].contains(cmd) => {
                return Err(err(format!("wrong number of arguments to `{cmd}`")))
            }
            [cmd, ..] => return Err(err(format!("unknown command `{cmd}`"))),
            [] => unreachable!("blank lines skipped"),
        };
        events.push(event);
    }
    Ok(events)
}
