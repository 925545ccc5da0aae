use std::fmt::Write;
use std::time::Duration;

use serde_json::json;

use super::SolveReport;

/// Process CPU time; zero where the platform offers no clock for it.
pub fn cpu_time() -> Duration {
    #[cfg(unix)]
    {
        let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
        // SAFETY: `ts` is a valid, writable timespec.
        let rc = unsafe { libc::clock_gettime(libc::CLOCK_PROCESS_CPUTIME_ID, &mut ts) };
        if rc == 0 {
            return Duration::new(ts.tv_sec as u64, ts.tv_nsec as u32);
        }
    }
    Duration::ZERO
}

impl SolveReport {
    /// Text in the usual `Answer: / SATISFIABLE / Models` layout.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for (i, m) in self.models.iter().enumerate() {
            let atoms: Vec<String> = m.shown.iter().map(|a| a.to_string()).collect();
            let _ = writeln!(out, "Answer: {}", i + 1);
            let _ = writeln!(out, "{}", atoms.join(" "));
        }
        if self.satisfiable {
            out.push_str("SATISFIABLE\n");
        } else {
            out.push_str("UNSATISFIABLE\n");
            for c in &self.conflicts {
                let _ = writeln!(out, "Violated constraint: {}", c.rule);
                let _ = writeln!(out, "  instance: {}", c.instance);
            }
        }
        out.push('\n');
        let _ = writeln!(out, "Models       : {}", self.models.len());
        let _ = writeln!(out, "Calls        : 1");
        let _ = writeln!(out, "Time         : {:.3}s", self.stats.wall.as_secs_f64());
        let _ = writeln!(out, "CPU Time     : {:.3}s", self.stats.cpu.as_secs_f64());
        out
    }

    /// Machine-readable form. Timings are left out when `timings` is false
    /// so that the output is reproducible.
    pub fn to_json(&self, timings: bool) -> serde_json::Value {
        let mut v = json!({
            "result": if self.satisfiable { "SATISFIABLE" } else { "UNSATISFIABLE" },
            "models": self.models.iter().map(|m| &m.shown).collect::<Vec<_>>(),
            "stats": self.stats,
            "conflicts": self.conflicts,
        });
        if timings {
            v["stats"]["wall_seconds"] = json!(self.stats.wall.as_secs_f64());
            v["stats"]["cpu_seconds"] = json!(self.stats.cpu.as_secs_f64());
        }
        v
    }
}
