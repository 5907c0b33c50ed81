//! Run configuration, the training loop, sweeps, ablation output and
//! reports.

mod ablate;
mod config;
mod record;
mod report;
mod sweep;
mod train;

pub use ablate::{ablate, AblationResult};
pub use config::{Perturbation, PerturbationKind, RunConfig};
pub use record::{final_window_mean, EpisodeReturn, EvalPoint, RunRecord};
pub use report::{report, CrossingRow, CurvePoint, Report, ReportRow, CROSSING_ENA_LEVELS};
pub use sweep::{sweep, CellError, SweepConfig, SweepOutcome};
pub use train::{train_run, train_seed, RunContext, RNG_PROVENANCE};
