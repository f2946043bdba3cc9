//! Evaluation harness: baselines, identification test, data profiles and
//! experiment artifacts.

mod baseline;
pub mod config;
mod experiment;
mod plot;
mod profile;

pub use baseline::{random_search_baseline, random_search_events};
pub use config::{ExperimentConfig, MethodConfig, ProblemConfig};
pub use experiment::{
    check_against_problem, compute_outcome, events_path, profile_artifacts, report, reported_solution, run_experiment,
    run_instance, ExperimentOutcome, HitRow, Problem, ProfileCurve, SummaryRow, PROFILE_GRID_POINTS,
};
pub use plot::profile_svg;
pub use profile::{ball_volume, data_profile, first_hit_time, identification_radius, log_grid, DataProfile, EvaluationSet};
