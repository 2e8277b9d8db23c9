//! Safe-interval path planning and its prioritized multi-agent wrapper.
//!
//! Search states are `(cell, safe interval)` pairs and `g` is the earliest
//! arrival time, so the planner minimises arrival time. Ties are broken by
//! travelled length, which keeps 8-connected paths from zig-zagging. On
//! 4-connected grids arrival time equals the unit path cost.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::time::Instant;

use crate::grid::{Connectivity, GridIndex, GridMap};
use crate::path::{TimedPath, Timestep};

use super::reservation::ReservationTable;
use super::st_astar::DistanceTable;
use super::{path_cost, validate_agents, Agent, MapfConfig, MapfError, MapfSolution, MapfStats};

/// Maximal run of timesteps in which a cell is free; `end` is inclusive and
/// `None` means the interval never closes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SafeInterval {
    pub start: Timestep,
    pub end: Option<Timestep>,
}

impl SafeInterval {
    pub fn contains(&self, t: Timestep) -> bool {
        t >= self.start && self.end.is_none_or(|e| t <= e)
    }
}

pub fn safe_intervals(table: &ReservationTable, cell: GridIndex) -> Vec<SafeInterval> {
    let (times, forever) = table.blocked_times(cell);
    let mut out = Vec::new();
    let mut start: Timestep = 0;
    for t in times {
        if t > start {
            out.push(SafeInterval { start, end: Some(t - 1) });
        }
        start = t + 1;
    }
    match forever {
        Some(f) if f > start => out.push(SafeInterval { start, end: Some(f - 1) }),
        Some(_) => {}
        None => out.push(SafeInterval { start, end: None }),
    }
    out
}

#[derive(Clone, Copy)]
struct Node {
    v: GridIndex,
    interval: usize,
    arrival: Timestep,
    dist: f64,
    parent: Option<usize>,
}

struct Open {
    f: f64,
    /// Travelled length plus the geometric distance to go.
    f_len: f64,
    arrival: Timestep,
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
            .then(other.f_len.total_cmp(&self.f_len))
            .then(self.arrival.cmp(&other.arrival))
            .then(other.v.cmp(&self.v))
            .then(other.id.cmp(&self.id))
    }
}

struct IntervalCache<'a> {
    table: &'a ReservationTable,
    cache: HashMap<GridIndex, Vec<SafeInterval>>,
}

impl IntervalCache<'_> {
    fn get(&mut self, v: GridIndex) -> &[SafeInterval] {
        let table = self.table;
        self.cache.entry(v).or_insert_with(|| safe_intervals(table, v))
    }
}

/// Earliest-arrival path for `agent` that avoids every reservation and can
/// rest at the goal forever. Returns the path (if any) and the number of
/// expansions.
pub fn sipp_plan(
    map: &GridMap,
    connectivity: Connectivity,
    agent: Agent,
    table: &ReservationTable,
    horizon: Timestep,
) -> (Option<TimedPath>, u64) {
    let h = DistanceTable::hops(map, agent.goal, connectivity);
    let h_len = DistanceTable::new(map, agent.goal, connectivity);
    let mut intervals = IntervalCache { table, cache: HashMap::new() };
    let mut expansions = 0;
    let Some(first) = intervals.get(agent.start).iter().position(|i| i.contains(0)) else {
        return (None, expansions);
    };
    if !h.get(agent.start).is_finite() {
        return (None, expansions);
    }
    let last_move = table.last_time() + 1;

    let mut nodes = vec![Node { v: agent.start, interval: first, arrival: 0, dist: 0.0, parent: None }];
    let mut open = BinaryHeap::new();
    open.push(Open { f: h.get(agent.start), f_len: h_len.get(agent.start), arrival: 0, v: agent.start, id: 0 });
    let mut best: HashMap<(GridIndex, usize), (Timestep, f64)> = HashMap::new();
    best.insert((agent.start, first), (0, 0.0));
    let mut closed: HashSet<(GridIndex, usize)> = HashSet::new();
    let mut neighbors = Vec::with_capacity(8);

    while let Some(top) = open.pop() {
        let cur = nodes[top.id];
        if !closed.insert((cur.v, cur.interval)) {
            continue;
        }
        let cur_end = intervals.get(cur.v)[cur.interval].end;
        if cur.v == agent.goal && cur_end.is_none() {
            return (Some(unfold(&nodes, top.id)), expansions);
        }
        expansions += 1;

        neighbors.clear();
        map.for_each_neighbor(cur.v, connectivity, |n, step| neighbors.push((n, step)));
        for &(m, step) in &neighbors {
            let hm = h.get(m);
            if !hm.is_finite() {
                continue;
            }
            // latest arrival allowed by waiting in the current interval
            let latest = cur_end.map_or(horizon, |e| e.saturating_add(1).min(horizon));
            let count = intervals.get(m).len();
            for k in 0..count {
                let iv = intervals.get(m)[k];
                let mut a = (cur.arrival + 1).max(iv.start);
                let hi = iv.end.map_or(latest, |e| e.min(latest));
                if a > hi {
                    if iv.start > latest {
                        break;
                    }
                    continue;
                }
                while a <= hi && a <= last_move && table.move_blocked(cur.v, m, a) {
                    a += 1;
                }
                if a > hi || closed.contains(&(m, k)) {
                    continue;
                }
                let d = cur.dist + step;
                if best.get(&(m, k)).is_some_and(|&(ba, bd)| (ba, bd) <= (a, d)) {
                    continue;
                }
                best.insert((m, k), (a, d));
                nodes.push(Node { v: m, interval: k, arrival: a, dist: d, parent: Some(top.id) });
                open.push(Open { f: a as f64 + hm, f_len: d + h_len.get(m), arrival: a, v: m, id: nodes.len() - 1 });
            }
        }
    }
    (None, expansions)
}

/// Expand interval hops back into one cell per timestep.
fn unfold(nodes: &[Node], last: usize) -> TimedPath {
    let mut chain = Vec::new();
    let mut at = Some(last);
    while let Some(i) = at {
        chain.push(nodes[i]);
        at = nodes[i].parent;
    }
    chain.reverse();
    let mut cells = vec![chain[0].v];
    for w in chain.windows(2) {
        for _ in w[0].arrival + 1..w[1].arrival {
            cells.push(w[0].v);
        }
        cells.push(w[1].v);
    }
    let path = TimedPath::new(0, cells, 0.0);
    let cost = path_cost(&path);
    path.with_cost(cost)
}

/// Plan agents one by one in list order. Each successful path is reserved
/// (its goal forever); an agent that finds no path stays at its start, which
/// is then reserved forever, and is listed in `failed`.
pub fn prioritized_sipp(
    map: &GridMap,
    agents: &[Agent],
    config: &MapfConfig,
) -> Result<(MapfSolution, Vec<usize>), MapfError> {
    validate_agents(map, agents)?;
    let started = Instant::now();
    let horizon = config.horizon_for(map);
    let mut table = ReservationTable::new();
    let mut paths = Vec::with_capacity(agents.len());
    let mut failed = Vec::new();
    let mut stats = MapfStats { high_level_nodes: 1, low_level_expansions: 0 };
    for (i, &agent) in agents.iter().enumerate() {
        if started.elapsed() > config.time_limit() {
            return Err(MapfError::Timeout);
        }
        let (path, expanded) = sipp_plan(map, config.connectivity, agent, &table, horizon);
        stats.low_level_expansions += expanded;
        match path {
            Some(p) => {
                table.reserve_path(&p);
                paths.push(p);
            }
            None => {
                table.reserve_forever(agent.start, 0);
                paths.push(TimedPath::stationary(0, agent.start));
                failed.push(i);
            }
        }
    }
    Ok((MapfSolution { paths, stats }, failed))
}
