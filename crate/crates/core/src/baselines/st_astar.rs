//! Single-agent A* in space-time under vertex and edge constraints.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::grid::{Connectivity, GridIndex, GridMap};
use crate::path::{TimedPath, Timestep};

use super::Agent;

/// What a low-level search must respect.
pub trait Constraints {
    fn vertex_blocked(&self, cell: GridIndex, t: Timestep) -> bool;
    /// Moving `from -> to` and arriving at `t`.
    fn edge_blocked(&self, from: GridIndex, to: GridIndex, t: Timestep) -> bool;
    /// Earliest time from which `cell` can be held forever, if ever.
    fn rest_from(&self, cell: GridIndex) -> Option<Timestep>;
    /// Nothing is blocked differently after this timestep.
    fn last_change(&self) -> Timestep;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Constraint {
    Vertex { cell: GridIndex, t: Timestep },
    Edge { from: GridIndex, to: GridIndex, t: Timestep },
}

impl Constraint {
    pub fn time(&self) -> Timestep {
        match *self {
            Constraint::Vertex { t, .. } | Constraint::Edge { t, .. } => t,
        }
    }
}

/// Constraints on one agent, as accumulated along a branch of the
/// high-level tree.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConstraintSet {
    vertex: HashSet<(GridIndex, Timestep)>,
    edge: HashSet<(GridIndex, GridIndex, Timestep)>,
    rest: HashMap<GridIndex, Timestep>,
    last: Timestep,
}

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false when the constraint was already present.
    pub fn add(&mut self, c: Constraint) -> bool {
        let fresh = match c {
            Constraint::Vertex { cell, t } => {
                let fresh = self.vertex.insert((cell, t));
                let r = self.rest.entry(cell).or_insert(0);
                *r = (*r).max(t + 1);
                fresh
            }
            Constraint::Edge { from, to, t } => self.edge.insert((from, to, t)),
        };
        self.last = self.last.max(c.time());
        fresh
    }

    pub fn len(&self) -> usize {
        self.vertex.len() + self.edge.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Constraints for ConstraintSet {
    fn vertex_blocked(&self, cell: GridIndex, t: Timestep) -> bool {
        self.vertex.contains(&(cell, t))
    }

    fn edge_blocked(&self, from: GridIndex, to: GridIndex, t: Timestep) -> bool {
        self.edge.contains(&(from, to, t))
    }

    fn rest_from(&self, cell: GridIndex) -> Option<Timestep> {
        Some(self.rest.get(&cell).copied().unwrap_or(0))
    }

    fn last_change(&self) -> Timestep {
        self.last
    }
}

/// Exact static distances to one goal, computed by a backward Dijkstra.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceTable {
    width: usize,
    dist: Vec<f64>,
}

impl DistanceTable {
    /// Geometric distance (diagonals cost sqrt 2).
    pub fn new(map: &GridMap, goal: GridIndex, connectivity: Connectivity) -> Self {
        Self::build(map, goal, connectivity, false)
    }

    /// Number of moves, ignoring their length.
    pub fn hops(map: &GridMap, goal: GridIndex, connectivity: Connectivity) -> Self {
        Self::build(map, goal, connectivity, true)
    }

    fn build(map: &GridMap, goal: GridIndex, connectivity: Connectivity, unit: bool) -> Self {
        let mut dist = vec![f64::INFINITY; map.len()];
        let mut heap = BinaryHeap::new();
        if map.is_traversable(goal) {
            dist[map.offset(goal)] = 0.0;
            heap.push((std::cmp::Reverse(super::Cost(0.0)), goal));
        }
        while let Some((std::cmp::Reverse(super::Cost(d)), v)) = heap.pop() {
            if d > dist[map.offset(v)] {
                continue;
            }
            map.for_each_neighbor(v, connectivity, |n, step| {
                let nd = d + if unit { 1.0 } else { step };
                let slot = &mut dist[map.offset(n)];
                if nd < *slot {
                    *slot = nd;
                    heap.push((std::cmp::Reverse(super::Cost(nd)), n));
                }
            });
        }
        Self { width: map.width(), dist }
    }

    pub fn get(&self, v: GridIndex) -> f64 {
        self.dist[v.y * self.width + v.x]
    }
}

#[derive(Clone, Copy)]
struct Node {
    v: GridIndex,
    t: Timestep,
    g: f64,
    parent: Option<usize>,
}

struct Open {
    f: f64,
    g: f64,
    t: Timestep,
    v: GridIndex,
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
            .f
            .total_cmp(&self.f)
            .then(self.g.total_cmp(&other.g))
            .then(other.t.cmp(&self.t))
            .then(other.v.cmp(&self.v))
            .then(other.id.cmp(&self.id))
    }
}

pub(crate) fn rebuild(nodes: &[(GridIndex, Option<usize>)], last: usize, start_time: Timestep, cost: f64) -> TimedPath {
    let mut cells = Vec::new();
    let mut at = Some(last);
    while let Some(i) = at {
        cells.push(nodes[i].0);
        at = nodes[i].1;
    }
    cells.reverse();
    TimedPath::new(start_time, cells, cost)
}

/// Cheapest constraint-respecting path for `agent`, starting at time 0 and
/// never exceeding `horizon`. Returns the path (if any) and the number of
/// expansions.
pub fn space_time_astar(
    map: &GridMap,
    connectivity: Connectivity,
    agent: Agent,
    h: &DistanceTable,
    constraints: &impl Constraints,
    horizon: Timestep,
) -> (Option<TimedPath>, u64) {
    let mut expansions = 0;
    if !h.get(agent.start).is_finite() || constraints.vertex_blocked(agent.start, 0) {
        return (None, expansions);
    }
    let Some(rest) = constraints.rest_from(agent.goal) else {
        return (None, expansions);
    };
    let cap = constraints.last_change().saturating_add(1);
    let key = |v: GridIndex, t: Timestep| (v, t.min(cap));

    let mut nodes = vec![Node { v: agent.start, t: 0, g: 0.0, parent: None }];
    let mut open = BinaryHeap::new();
    open.push(Open { f: h.get(agent.start), g: 0.0, t: 0, v: agent.start, id: 0 });
    let mut best: HashMap<(GridIndex, Timestep), f64> = HashMap::new();
    best.insert(key(agent.start, 0), 0.0);
    let mut closed: HashSet<(GridIndex, Timestep)> = HashSet::new();

    while let Some(top) = open.pop() {
        let cur = nodes[top.id];
        if !closed.insert(key(cur.v, cur.t)) {
            continue;
        }
        if cur.v == agent.goal && cur.t >= rest {
            let chain: Vec<(GridIndex, Option<usize>)> = nodes.iter().map(|n| (n.v, n.parent)).collect();
            return (Some(rebuild(&chain, top.id, 0, cur.g)), expansions);
        }
        expansions += 1;
        if cur.t >= horizon {
            continue;
        }
        let t = cur.t + 1;
        let mut push = |v: GridIndex, step: f64| {
            if constraints.vertex_blocked(v, t) || constraints.edge_blocked(cur.v, v, t) {
                return;
            }
            let hv = h.get(v);
            if !hv.is_finite() {
                return;
            }
            let g = cur.g + step;
            let k = key(v, t);
            if closed.contains(&k) || best.get(&k).is_some_and(|&b| b <= g) {
                return;
            }
            best.insert(k, g);
            nodes.push(Node { v, t, g, parent: Some(top.id) });
            open.push(Open { f: g + hv, g, t, v, id: nodes.len() - 1 });
        };
        push(cur.v, 1.0);
        map.for_each_neighbor(cur.v, connectivity, &mut push);
    }
    (None, expansions)
}
