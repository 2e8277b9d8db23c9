//! Multi-agent path finding baselines on the plain grid: conflict-based
//! search, its bounded-suboptimal variant and prioritized safe-interval
//! planning. All of them use unit step costs (diagonals cost sqrt 2, waits
//! cost 1) and agents rest at their goals after arrival.

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Connectivity, GridIndex, GridMap};
use crate::path::{TimedPath, Timestep};

pub mod cbs;
pub mod ecbs;
pub mod reservation;
pub mod sipp;
pub mod st_astar;

pub use cbs::cbs;
pub use ecbs::ecbs;
pub use reservation::ReservationTable;
pub use sipp::{prioritized_sipp, safe_intervals, sipp_plan, SafeInterval};
pub use st_astar::{space_time_astar, Constraint, ConstraintSet, Constraints, DistanceTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Agent {
    pub start: GridIndex,
    pub goal: GridIndex,
}

impl Agent {
    pub fn new(start: GridIndex, goal: GridIndex) -> Self {
        Self { start, goal }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapfConfig {
    pub connectivity: Connectivity,
    /// Latest timestep a path may use. `None` picks a bound from the map size.
    pub horizon: Option<Timestep>,
    /// High-level node budget for the search-based solvers.
    pub node_budget: usize,
    pub time_limit_s: f64,
}

impl Default for MapfConfig {
    fn default() -> Self {
        Self {
            connectivity: Connectivity::Eight,
            horizon: None,
            node_budget: 100_000,
            time_limit_s: 60.0,
        }
    }
}

impl MapfConfig {
    pub fn horizon_for(&self, map: &GridMap) -> Timestep {
        self.horizon.unwrap_or_else(|| (2 * map.len()).max(32) as Timestep)
    }

    pub(crate) fn time_limit(&self) -> Duration {
        Duration::from_secs_f64(self.time_limit_s.max(0.0))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapfStats {
    pub high_level_nodes: usize,
    pub low_level_expansions: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapfSolution {
    pub paths: Vec<TimedPath>,
    pub stats: MapfStats,
}

impl MapfSolution {
    pub fn sum_of_costs(&self) -> f64 {
        self.paths.iter().map(path_cost).sum()
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MapfError {
    #[error("no conflict-free solution within the horizon")]
    NoSolution,
    #[error("high-level node budget of {0} exhausted")]
    BudgetExceeded(usize),
    #[error("time limit exceeded")]
    Timeout,
    #[error("agent {index}: {reason}")]
    InvalidAgent { index: usize, reason: String },
}

/// Unit cost of a path: moves cost their length, waits cost 1, trailing
/// waits at the goal are free.
pub fn path_cost(path: &TimedPath) -> f64 {
    let cells = path.cells();
    let mut end = cells.len();
    while end > 1 && cells[end - 1] == cells[end - 2] {
        end -= 1;
    }
    cells[..end]
        .windows(2)
        .map(|w| if w[0] == w[1] { 1.0 } else { w[0].distance(w[1]) })
        .fold(0.0, |a, c| a + c)
}

pub(crate) fn validate_agents(map: &GridMap, agents: &[Agent]) -> Result<(), MapfError> {
    let bad = |index: usize, reason: String| Err(MapfError::InvalidAgent { index, reason });
    for (i, a) in agents.iter().enumerate() {
        for (what, v) in [("start", a.start), ("goal", a.goal)] {
            if !map.in_bounds(v) {
                return bad(i, format!("{what} {v} out of bounds"));
            }
            if !map.is_traversable(v) {
                return bad(i, format!("{what} {v} is occupied"));
            }
        }
        for (j, b) in agents.iter().enumerate().take(i) {
            if a.start == b.start {
                return bad(i, format!("shares its start with agent {j}"));
            }
            if a.goal == b.goal {
                return bad(i, format!("shares its goal with agent {j}"));
            }
        }
    }
    Ok(())
}

/// Total order wrapper for costs used as heap and tree keys.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Cost(pub f64);

impl Eq for Cost {}

impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cost {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}
