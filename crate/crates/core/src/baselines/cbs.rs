//! Conflict-based search with vertex and edge constraints.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::time::Instant;

use crate::conflict::{first_collision, Conflict, ConflictKind};
use crate::grid::GridMap;
use crate::path::TimedPath;

use super::st_astar::{space_time_astar, Constraint, ConstraintSet, DistanceTable};
use super::{path_cost, validate_agents, Agent, MapfConfig, MapfError, MapfSolution, MapfStats};

/// The two constraints that split a node on `conflict`.
pub(crate) fn split(conflict: &Conflict) -> [(usize, Constraint); 2] {
    let (a, b) = (conflict.agents[0], conflict.agents[1]);
    let t = conflict.time;
    match conflict.kind {
        ConflictKind::Vertex => {
            let cell = conflict.cells[0];
            [(a, Constraint::Vertex { cell, t }), (b, Constraint::Vertex { cell, t })]
        }
        _ => {
            let c = &conflict.cells;
            [
                (a, Constraint::Edge { from: c[0], to: c[1], t }),
                (b, Constraint::Edge { from: c[2], to: c[3], t }),
            ]
        }
    }
}

pub(crate) type ConstraintKey = Vec<(usize, Constraint)>;

struct HighNode {
    constraints: Vec<ConstraintSet>,
    key: ConstraintKey,
    paths: Vec<TimedPath>,
}

struct Open {
    cost: f64,
    conflicts: usize,
    id: usize,
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Open {}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then(other.conflicts.cmp(&self.conflicts))
            .then(other.id.cmp(&self.id))
    }
}

/// Optimal sum-of-costs solution, or an error once the horizon, the node
/// budget or the time limit rules one out.
pub fn cbs(map: &GridMap, agents: &[Agent], config: &MapfConfig) -> Result<MapfSolution, MapfError> {
    validate_agents(map, agents)?;
    let started = Instant::now();
    let horizon = config.horizon_for(map);
    let conn = config.connectivity;
    let heuristics: Vec<DistanceTable> =
        agents.iter().map(|a| DistanceTable::new(map, a.goal, conn)).collect();
    let mut stats = MapfStats::default();

    let empty = ConstraintSet::new();
    let mut paths = Vec::with_capacity(agents.len());
    for (i, &a) in agents.iter().enumerate() {
        let (p, e) = space_time_astar(map, conn, a, &heuristics[i], &empty, horizon);
        stats.low_level_expansions += e;
        paths.push(p.ok_or(MapfError::NoSolution)?);
    }
    let cost = paths.iter().map(path_cost).sum();
    let mut nodes = vec![HighNode {
        constraints: vec![ConstraintSet::new(); agents.len()],
        key: Vec::new(),
        paths,
    }];
    let mut open = BinaryHeap::new();
    open.push(Open { cost, conflicts: 0, id: 0 });
    let mut seen: HashSet<ConstraintKey> = HashSet::new();
    seen.insert(Vec::new());

    while let Some(top) = open.pop() {
        stats.high_level_nodes += 1;
        if stats.high_level_nodes > config.node_budget {
            return Err(MapfError::BudgetExceeded(config.node_budget));
        }
        if started.elapsed() > config.time_limit() {
            return Err(MapfError::Timeout);
        }
        let node = std::mem::replace(
            &mut nodes[top.id],
            HighNode { constraints: Vec::new(), key: Vec::new(), paths: Vec::new() },
        );
        let Some(conflict) = first_collision(&node.paths) else {
            let paths = node.paths.into_iter().map(|p| { let c = path_cost(&p); p.with_cost(c) }).collect();
            return Ok(MapfSolution { paths, stats });
        };
        for (agent, constraint) in split(&conflict) {
            let mut key = node.key.clone();
            let at = key.binary_search(&(agent, constraint)).unwrap_or_else(|e| e);
            key.insert(at, (agent, constraint));
            if !seen.insert(key.clone()) {
                continue;
            }
            let mut constraints = node.constraints.clone();
            constraints[agent].add(constraint);
            let (p, e) =
                space_time_astar(map, conn, agents[agent], &heuristics[agent], &constraints[agent], horizon);
            stats.low_level_expansions += e;
            let Some(p) = p else { continue };
            let mut paths = node.paths.clone();
            paths[agent] = p;
            let cost = paths.iter().map(path_cost).sum();
            let conflicts = crate::conflict::count_collisions(&paths);
            nodes.push(HighNode { constraints, key, paths });
            open.push(Open { cost, conflicts, id: nodes.len() - 1 });
        }
    }
    Err(MapfError::NoSolution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{CellState, Connectivity, GridIndex};

    fn g(x: usize, y: usize) -> GridIndex {
        GridIndex::new(x, y)
    }

    fn four() -> MapfConfig {
        MapfConfig { connectivity: Connectivity::Four, ..MapfConfig::default() }
    }

    #[test]
    fn swap_with_a_side_pocket() {
        let map = GridMap::load_ascii("...\n#.#").unwrap();
        let agents = [Agent::new(g(0, 0), g(2, 0)), Agent::new(g(2, 0), g(0, 0))];
        let sol = cbs(&map, &agents, &four()).unwrap();
        assert!(first_collision(&sol.paths).is_none());
        // one agent ducks into the pocket (4), the other waits once (3)
        assert_eq!(sol.sum_of_costs(), 7.0);
    }

    #[test]
    fn impossible_swap_in_a_corridor() {
        let map = GridMap::filled(2, 1, CellState::Free);
        let agents = [Agent::new(g(0, 0), g(1, 0)), Agent::new(g(1, 0), g(0, 0))];
        let cfg = MapfConfig { horizon: Some(4), ..four() };
        assert_eq!(cbs(&map, &agents, &cfg).unwrap_err(), MapfError::NoSolution);
    }

    #[test]
    fn budget_is_enforced() {
        let map = GridMap::filled(2, 1, CellState::Free);
        let agents = [Agent::new(g(0, 0), g(1, 0)), Agent::new(g(1, 0), g(0, 0))];
        let cfg = MapfConfig { horizon: Some(60), node_budget: 50, ..four() };
        assert_eq!(cbs(&map, &agents, &cfg).unwrap_err(), MapfError::BudgetExceeded(50));
    }

    #[test]
    fn independent_agents_keep_shortest_paths() {
        let map = GridMap::filled(4, 4, CellState::Free);
        let agents = [Agent::new(g(0, 0), g(3, 0)), Agent::new(g(0, 3), g(3, 3))];
        let sol = cbs(&map, &agents, &MapfConfig::default()).unwrap();
        assert_eq!(sol.sum_of_costs(), 6.0);
        assert_eq!(sol.stats.high_level_nodes, 1);
    }
}
