//! Scenario files, planner runs, benchmark tables and SVG/PGM rendering on
//! top of `aspt-core`.

pub mod bench;
pub mod random;
pub mod render;
pub mod report;
pub mod runner;
pub mod scenario;

pub use bench::{run_bench, BenchItem};
pub use report::{to_json, write_csv, CsvRow, CSV_HEADER, FAILURE_MARKER};
pub use runner::{run, AgentReport, PlannerKind, RunReport, RunStatus};
pub use scenario::{load_scenario, LoadedScenario, Overrides, Scenario, ScenarioError};
