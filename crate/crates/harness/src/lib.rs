//! Scenario runner, verification suite and sweeps behind the `pdmosc` binary.

pub mod commands;
pub mod csv;
pub mod scenario;
pub mod suite;
pub mod sweep;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const CHECK_FAILED: i32 = 1;
    pub const DOMAIN_EXIT: i32 = 2;
    pub const CONFIG: i32 = 3;
    pub const VALIDITY: i32 = 4;
}
