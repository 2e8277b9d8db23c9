//! Scenario × planner × repetition tables.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use crate::report::CsvRow;
use crate::runner::{run, PlannerKind};
use crate::scenario::{load_scenario, LoadedScenario, Overrides};

/// A bench input: either a file to load or an already resolved scenario.
#[derive(Debug, Clone)]
pub enum BenchItem {
    File(PathBuf),
    Loaded(Box<LoadedScenario>),
}

impl BenchItem {
    fn label(&self) -> String {
        match self {
            BenchItem::File(p) => p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
            BenchItem::Loaded(s) => s.name.clone(),
        }
    }
}

/// One row per (scenario, planner, repetition), in that nesting order. A
/// scenario that fails to load or a planner that errors or panics yields
/// failed rows; the rest of the table is unaffected.
pub fn run_bench(
    items: &[BenchItem],
    planners: &[PlannerKind],
    reps: usize,
    overrides: &Overrides,
    mut progress: impl FnMut(&CsvRow),
) -> Vec<CsvRow> {
    let mut rows = Vec::with_capacity(items.len() * planners.len() * reps);
    for item in items {
        let loaded = match item {
            BenchItem::File(p) => load_scenario(p, overrides).map_err(|e| e.to_string()),
            BenchItem::Loaded(s) => Ok((**s).clone()),
        };
        for &planner in planners {
            for rep in 0..reps {
                let row = match &loaded {
                    Err(e) => CsvRow::failed(&item.label(), planner.name(), rep, 0, e),
                    Ok(s) => match catch_unwind(AssertUnwindSafe(|| run(s, planner))) {
                        Ok(Ok(report)) => CsvRow::from_report(&report, rep),
                        Ok(Err(e)) => CsvRow::failed(&s.name, planner.name(), rep, s.agents.len(), &e.to_string()),
                        Err(_) => CsvRow::failed(&s.name, planner.name(), rep, s.agents.len(), "planner panicked"),
                    },
                };
                progress(&row);
                rows.push(row);
            }
        }
    }
    rows
}
