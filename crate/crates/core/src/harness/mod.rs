//! Seeded experiment runner: policy-on-instance simulation, CSV export and
//! regret-scaling fits.

mod config;
mod csv_io;
mod fit;
mod run;

pub use config::{
    run_experiment, ExperimentConfig, InstanceSource, OracleKind, PolicyConfig, PolicyKind,
};
pub use csv_io::{
    format_g17, read_summary, write_summary, write_trajectory, SummaryRow, SUMMARY_HEADER,
    TRAJECTORY_HEADER,
};
pub use fit::{fit_scaling, ScalingFit, ScalingModel};
pub use run::{production_at, simulate, RunRecord, SimOptions, TrajectoryRow};
