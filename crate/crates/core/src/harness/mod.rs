//! Scenario configuration, deterministic session execution, parameter
//! sweeps, and metrics reporting.

pub mod scenario;
pub mod session;
pub mod sweep;

pub use scenario::{clavis2_baseline, Scenario};
pub use session::{attack_free_click_rate, run_session, run_session_full, SessionOutput, SessionReport};
pub use sweep::{sweep, write_csv, SweepRow};
