//! Risk-aware multi-agent path finding on 2D occupancy grids.
//!
//! The central planner is a time-expanded A* whose edge cost sums occupancy,
//! wall-proximity, dynamic-obstacle, time and distance terms, with explicit
//! wait actions. Classical MAPF baselines (space-time A*, CBS, ECBS and
//! prioritized SIPP) and a discrete-time path-sharing simulation live
//! alongside it.

pub mod baselines;
pub mod conflict;
pub mod coordination;
pub mod dynamics;
pub mod grid;
pub mod path;
pub mod planner;
pub mod risk;

pub use baselines::{Agent, MapfConfig, MapfError, MapfSolution};
pub use conflict::{Conflict, ConflictKind};
pub use coordination::{run_simulation, AgentSpec, Blackboard, Footprint, PlanningMode, SimConfig, SimError, SimReport};
pub use dynamics::{DynamicObstacle, DynamicRiskModel, Ellipse, ObstacleSet, PathEnd, SharedPath};
pub use grid::{CellState, Connectivity, GridIndex, GridMap, MapError, WorldPoint};
pub use path::{TimedPath, Timestep};
pub use planner::{PlanError, Planner, PlannerConfig, SearchStats};
pub use risk::{RiskConfig, StaticRiskField};
