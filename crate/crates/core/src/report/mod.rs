//! Configuration, file output, curve comparison and the verification
//! battery used by the command-line front end.

pub mod compare;
pub mod config;
pub mod export;
pub mod plot;
pub mod run;
pub mod verify;

pub use compare::{compare_curves, compare_halved, GapStats};
pub use config::{NonConvergencePolicy, RunConfig, Schedule, SourceSpec};
pub use plot::{emit_plot_data, read_plot_data, PlotRow, PlotSummary};
pub use run::{
    run_curves, run_dal, run_plot_data, run_rd_curve, run_rdp_curve, run_two_stage, RunOutputs,
};
pub use verify::{
    run_verify, run_verify_with_hooks, write_verify_json, Check, Status, VerificationReport,
    VerifyHooks,
};
