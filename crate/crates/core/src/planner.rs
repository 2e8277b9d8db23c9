//! Time-expanded, risk-weighted A* with wait actions.
//!
//! Every edge pays a distance term (step length, or the wait cost), the
//! occupancy and proximity risk of the target cell, the dynamic-obstacle
//! risk at the arrival step and a time term proportional to that step.
//! Search states are `(cell, timestep)` whenever anything in the cost
//! depends on time, and plain cells otherwise.

use std::cmp::Ordering;
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{DynamicRiskModel, ObstacleSet};
use crate::grid::{CellState, Connectivity, GridIndex, GridMap};
use crate::path::{TimedPath, Timestep};
use crate::risk::{RiskConfig, StaticRiskField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub connectivity: Connectivity,
    pub risk: RiskConfig,
    /// Multiplies the per-edge `n + 1` time term.
    pub time_cost_weight: f64,
    /// Distance term charged for a wait instead of the step length.
    pub wait_cost: f64,
    pub watchdog_max_expansions: u64,
    pub watchdog_max_seconds: f64,
    /// Seconds per timestep.
    pub dt: f64,
    /// Heuristic multiplier for unknown cells.
    pub unknown_heuristic_factor: f64,
    /// Steps a goal must stay free of infinite dynamic risk after arrival
    /// when the obstacles never come to rest.
    pub goal_hold_steps: u32,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            connectivity: Connectivity::Eight,
            risk: RiskConfig::default(),
            time_cost_weight: 1.0,
            wait_cost: 1.0,
            watchdog_max_expansions: 200_000,
            watchdog_max_seconds: 5.0,
            dt: 1.0,
            unknown_heuristic_factor: 50.0,
            goal_hold_steps: 20,
        }
    }
}

impl PlannerConfig {
    /// Plain shortest-path A*: no time term, unit heuristic, no proximity layer.
    pub fn plain() -> Self {
        Self {
            risk: RiskConfig::without_proximity(),
            time_cost_weight: 0.0,
            unknown_heuristic_factor: 1.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        self.risk.validate().map_err(|e| PlanError::Config(e.to_string()))?;
        let weights = [self.time_cost_weight, self.wait_cost, self.unknown_heuristic_factor];
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(PlanError::Config("weights must be finite and non-negative".into()));
        }
        if !(self.watchdog_max_seconds > 0.0) {
            return Err(PlanError::Config("watchdog_max_seconds must be positive".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(PlanError::Config("dt must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PlanError {
    #[error("no valid path exists")]
    NoPath,
    #[error("watchdog timeout after {expansions} expansions ({seconds:.3} s)")]
    WatchdogTimeout { expansions: u64, seconds: f64 },
    #[error("invalid endpoint: {0}")]
    InvalidEndpoint(String),
    #[error("invalid planner configuration: {0}")]
    Config(String),
}

/// One entry of the search tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchNode {
    pub v: GridIndex,
    /// Accumulated cost from the start.
    pub g: f64,
    /// Heuristic estimate to the goal.
    pub h: f64,
    pub f: f64,
    /// Timestep since planning started.
    pub n: Timestep,
    /// Consecutive waits at `v` ending in this node.
    pub w: u32,
    pub predecessor: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub expansions: u64,
    pub generated: u64,
}

/// Euclidean cell distance to the goal, inflated on unknown cells.
pub fn heuristic(v: GridIndex, goal: GridIndex, state: CellState, config: &PlannerConfig) -> f64 {
    let d = v.distance(goal);
    if state == CellState::Unknown {
        config.unknown_heuristic_factor * d
    } else {
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct StateKey {
    v: GridIndex,
    n: Timestep,
}

struct OpenEntry {
    f: f64,
    g: f64,
    n: Timestep,
    v: GridIndex,
    node: usize,
}

impl PartialEq for OpenEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for OpenEntry {}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OpenEntry {
    // BinaryHeap pops the greatest: lowest f, then highest g, then smallest (n, y, x).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then(self.g.total_cmp(&other.g))
            .then(other.n.cmp(&self.n))
            .then(other.v.y.cmp(&self.v.y))
            .then(other.v.x.cmp(&self.v.x))
            .then(other.node.cmp(&self.node))
    }
}

/// Planner over one map, static field and obstacle snapshot. Obstacle
/// prediction step 0 is the moment the plan starts.
#[derive(Debug, Clone)]
pub struct Planner<'a> {
    map: &'a GridMap,
    field: &'a StaticRiskField,
    obstacles: &'a ObstacleSet,
    config: PlannerConfig,
    model: DynamicRiskModel,
}

impl<'a> Planner<'a> {
    pub fn new(
        map: &'a GridMap,
        field: &'a StaticRiskField,
        obstacles: &'a ObstacleSet,
        config: PlannerConfig,
    ) -> Self {
        assert_eq!(
            (map.width(), map.height()),
            (field.width(), field.height()),
            "risk field does not match map"
        );
        let model = DynamicRiskModel::from_config(&config.risk, map.resolution(), config.dt);
        Self { map, field, obstacles, config, model }
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.config
    }

    pub fn risk_model(&self) -> &DynamicRiskModel {
        &self.model
    }

    /// Dynamic risk at the center of `cell` at (fractional) step `t`.
    pub fn dynamic_risk(&self, cell: GridIndex, t: f64) -> f64 {
        if self.obstacles.is_empty() {
            return 0.0;
        }
        self.model.risk_at(self.obstacles, self.map.grid_to_world(cell), t)
    }

    /// Cost of moving (or waiting, when `to == from.v`) from `from` to `to`.
    ///
    /// Besides the arrival cell at `n + 1`, the dynamic term also samples the
    /// midpoint of the move at `n + 1/2` so that two agents exchanging cells
    /// see each other.
    pub fn edge_cost(&self, from: &SearchNode, to: GridIndex, step_length: f64) -> f64 {
        let distance = if to == from.v { self.config.wait_cost } else { step_length };
        let static_risk = self.field.combined(to);
        if static_risk.is_infinite() {
            return f64::INFINITY;
        }
        let arrival = from.n + 1;
        let mut dynamic = 0.0;
        if !self.obstacles.is_empty() {
            dynamic = self.dynamic_risk(to, arrival as f64);
            if dynamic.is_finite() {
                let mid = self.map.grid_to_world(from.v).lerp(self.map.grid_to_world(to), 0.5);
                let half = self.model.risk_at(self.obstacles, mid, from.n as f64 + 0.5);
                dynamic = dynamic.max(half);
            }
            if dynamic.is_infinite() {
                return f64::INFINITY;
            }
        }
        distance + static_risk + dynamic + self.config.time_cost_weight * arrival as f64
    }

    fn time_keyed(&self) -> bool {
        !self.obstacles.is_empty() || self.config.time_cost_weight > 0.0
    }

    /// Timestep after which nothing in the world changes any more.
    fn settle_step(&self) -> Option<Timestep> {
        self.obstacles.settles_after()
    }

    fn key(&self, v: GridIndex, n: Timestep, settle: Option<Timestep>) -> StateKey {
        if !self.time_keyed() {
            return StateKey { v, n: 0 };
        }
        match settle {
            Some(s) => StateKey { v, n: n.min(s + 1) },
            None => StateKey { v, n },
        }
    }

    /// The goal can be held from step `n` on without infinite obstacle risk.
    fn goal_holdable(&self, goal: GridIndex, n: Timestep, settle: Option<Timestep>) -> bool {
        if self.obstacles.is_empty() {
            return true;
        }
        let last = match settle {
            Some(s) => s.max(n) + 1,
            None => n + self.config.goal_hold_steps,
        };
        (n..=last).all(|t| self.dynamic_risk(goal, t as f64).is_finite())
    }

    fn check_endpoint(&self, v: GridIndex, what: &str) -> Result<(), PlanError> {
        match self.map.get(v) {
            None => Err(PlanError::InvalidEndpoint(format!("{what} {v} is out of bounds"))),
            Some(CellState::Occupied) => {
                Err(PlanError::InvalidEndpoint(format!("{what} {v} is occupied")))
            }
            Some(_) => Ok(()),
        }
    }

    pub fn plan(&self, start: GridIndex, goal: GridIndex) -> Result<TimedPath, PlanError> {
        self.search(start, goal).map(|(p, _)| p)
    }

    /// Fresh plan from the agent's current cell; the returned path is stamped
    /// with absolute timesteps starting at `current_time`. The obstacle
    /// snapshot must already be aligned so that its step 0 is `current_time`.
    pub fn replan_from(
        &self,
        current: GridIndex,
        current_time: Timestep,
        goal: GridIndex,
    ) -> Result<TimedPath, PlanError> {
        let (path, _) = self.search(current, goal)?;
        Ok(TimedPath::new(current_time, path.cells().to_vec(), path.cost()))
    }

    /// Run the search and report expansion counts.
    pub fn search(
        &self,
        start: GridIndex,
        goal: GridIndex,
    ) -> Result<(TimedPath, SearchStats), PlanError> {
        self.config.validate()?;
        self.check_endpoint(start, "start")?;
        self.check_endpoint(goal, "goal")?;

        let started = Instant::now();
        let budget = Duration::from_secs_f64(self.config.watchdog_max_seconds);
        let settle = self.settle_step();
        let mut stats = SearchStats::default();

        let h0 = heuristic(start, goal, self.map.state(start), &self.config);
        let mut nodes = vec![SearchNode {
            v: start,
            g: 0.0,
            h: h0,
            f: h0,
            n: 0,
            w: 0,
            predecessor: None,
        }];
        let mut open = BinaryHeap::new();
        open.push(OpenEntry { f: h0, g: 0.0, n: 0, v: start, node: 0 });
        let mut best_g: HashMap<StateKey, f64> = HashMap::new();
        best_g.insert(self.key(start, 0, settle), 0.0);
        let mut closed: HashMap<StateKey, ()> = HashMap::new();
        let mut successors: Vec<(GridIndex, f64)> = Vec::with_capacity(9);

        while let Some(entry) = open.pop() {
            let current = nodes[entry.node];
            let key = self.key(current.v, current.n, settle);
            if closed.contains_key(&key) {
                continue;
            }
            if current.v == goal && self.goal_holdable(goal, current.n, settle) {
                return Ok((self.reconstruct(&nodes, entry.node), stats));
            }
            if stats.expansions >= self.config.watchdog_max_expansions
                || (stats.expansions % 256 == 0 && started.elapsed() > budget)
            {
                return Err(PlanError::WatchdogTimeout {
                    expansions: stats.expansions,
                    seconds: started.elapsed().as_secs_f64(),
                });
            }
            closed.insert(key, ());
            stats.expansions += 1;

            successors.clear();
            self.map.for_each_neighbor(current.v, self.config.connectivity, |n, s| {
                successors.push((n, s))
            });
            if self.time_keyed() {
                successors.push((current.v, 0.0));
            }
            for &(v, step) in &successors {
                let n = current.n + 1;
                let succ_key = self.key(v, n, settle);
                if closed.contains_key(&succ_key) {
                    continue;
                }
                let cost = self.edge_cost(&current, v, step);
                if cost.is_infinite() {
                    continue;
                }
                let g = current.g + cost;
                match best_g.entry(succ_key) {
                    Entry::Occupied(mut e) => {
                        if g >= *e.get() {
                            continue;
                        }
                        e.insert(g);
                    }
                    Entry::Vacant(e) => {
                        e.insert(g);
                    }
                }
                let h = heuristic(v, goal, self.map.state(v), &self.config);
                let w = if v == current.v { current.w + 1 } else { 0 };
                nodes.push(SearchNode {
                    v,
                    g,
                    h,
                    f: g + h,
                    n,
                    w,
                    predecessor: Some(entry.node),
                });
                stats.generated += 1;
                open.push(OpenEntry { f: g + h, g, n, v, node: nodes.len() - 1 });
            }
        }
        Err(PlanError::NoPath)
    }

    fn reconstruct(&self, nodes: &[SearchNode], goal_node: usize) -> TimedPath {
        let mut cells = Vec::new();
        let mut at = Some(goal_node);
        while let Some(i) = at {
            cells.push(nodes[i].v);
            at = nodes[i].predecessor;
        }
        cells.reverse();
        TimedPath::new(0, cells, nodes[goal_node].g)
    }
}

/// Convenience wrapper around [`Planner::plan`].
pub fn plan(
    start: GridIndex,
    goal: GridIndex,
    map: &GridMap,
    field: &StaticRiskField,
    obstacles: &ObstacleSet,
    config: PlannerConfig,
) -> Result<TimedPath, PlanError> {
    Planner::new(map, field, obstacles, config).plan(start, goal)
}
