//! The `uatm` command: batch solving, scenario runs, golden checks and the
//! operator HTTP service.

pub mod commands;
pub mod http;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// A golden comparison failed or an explained atom is not in the model.
    pub const CHECK_FAILED: i32 = 1;
    pub const SATISFIABLE: i32 = 10;
    pub const UNSATISFIABLE: i32 = 20;
    /// Unparseable or invalid input.
    pub const INPUT: i32 = 65;
    pub const IO: i32 = 74;
}
