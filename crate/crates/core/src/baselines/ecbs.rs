//! Bounded-suboptimal conflict-based search with focal lists at both levels.
//! The returned sum of costs is at most `omega` times the optimum.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::time::Instant;

use crate::conflict::{count_collisions, first_collision};
use crate::grid::{Connectivity, GridIndex, GridMap};
use crate::path::{TimedPath, Timestep};

use super::cbs::{split, ConstraintKey};
use super::st_astar::{rebuild, ConstraintSet, Constraints, DistanceTable};
use super::{path_cost, validate_agents, Agent, Cost, MapfConfig, MapfError, MapfSolution, MapfStats};

/// Where the other agents are, for counting conflicts of a candidate move.
struct Occupancy {
    at: HashMap<(GridIndex, Timestep), u32>,
    /// Agents resting at a cell from some time on.
    resting: HashMap<GridIndex, Vec<Timestep>>,
    moves: HashMap<(GridIndex, GridIndex, Timestep), u32>,
}

impl Occupancy {
    fn new(paths: &[TimedPath], skip: usize) -> Self {
        let mut at = HashMap::new();
        let mut resting: HashMap<GridIndex, Vec<Timestep>> = HashMap::new();
        let mut moves = HashMap::new();
        for (i, p) in paths.iter().enumerate() {
            if i == skip {
                continue;
            }
            let mut prev: Option<GridIndex> = None;
            for (c, t) in p.steps() {
                *at.entry((c, t)).or_insert(0) += 1;
                if let Some(q) = prev.filter(|&q| q != c) {
                    *moves.entry((q, c, t)).or_insert(0) += 1;
                }
                prev = Some(c);
            }
            resting.entry(p.last()).or_default().push(p.end_time() + 1);
        }
        Self { at, resting, moves }
    }

    fn conflicts(&self, from: GridIndex, to: GridIndex, t: Timestep) -> u32 {
        let mut n = self.at.get(&(to, t)).copied().unwrap_or(0);
        if let Some(r) = self.resting.get(&to) {
            n += r.iter().filter(|&&s| s <= t).count() as u32;
        }
        if from != to {
            n += self.moves.get(&(to, from, t)).copied().unwrap_or(0);
        }
        n
    }
}

#[derive(Clone, Copy)]
struct Node {
    v: GridIndex,
    t: Timestep,
    g: f64,
    f: f64,
    conflicts: u32,
    parent: Option<usize>,
}

type FocalKey = (u32, Cost, std::cmp::Reverse<Cost>, usize);

fn focal_key(n: &Node, id: usize) -> FocalKey {
    (n.conflicts, Cost(n.f), std::cmp::Reverse(Cost(n.g)), id)
}

/// Focal search for one agent. Returns the path with the lower bound on its
/// optimal cost (the minimum f of OPEN when the goal was selected).
#[allow(clippy::too_many_arguments)]
fn focal_search(
    map: &GridMap,
    connectivity: Connectivity,
    agent: Agent,
    h: &DistanceTable,
    constraints: &ConstraintSet,
    others: &Occupancy,
    omega: f64,
    horizon: Timestep,
    expansions: &mut u64,
) -> Option<(TimedPath, f64)> {
    if !h.get(agent.start).is_finite() || constraints.vertex_blocked(agent.start, 0) {
        return None;
    }
    let rest = constraints.rest_from(agent.goal)?;
    let cap = constraints.last_change().saturating_add(1);
    let key = |v: GridIndex, t: Timestep| (v, t.min(cap));

    let h0 = h.get(agent.start);
    let mut nodes = vec![Node { v: agent.start, t: 0, g: 0.0, f: h0, conflicts: 0, parent: None }];
    let mut open: BTreeSet<(Cost, usize)> = BTreeSet::new();
    let mut focal: BTreeSet<FocalKey> = BTreeSet::new();
    open.insert((Cost(h0), 0));
    focal.insert(focal_key(&nodes[0], 0));
    // state -> (best g, node id currently in OPEN, if any)
    let mut best: HashMap<(GridIndex, Timestep), (f64, Option<usize>)> = HashMap::new();
    best.insert(key(agent.start, 0), (0.0, Some(0)));
    let mut bound = omega * h0;

    while let Some(&(Cost(f_min), _)) = open.first() {
        let new_bound = omega * f_min;
        if new_bound > bound {
            for &(Cost(f), id) in open.range((Cost(bound), usize::MAX)..) {
                if f > new_bound {
                    break;
                }
                if f > bound {
                    focal.insert(focal_key(&nodes[id], id));
                }
            }
        }
        bound = bound.max(new_bound);
        let (_, _, _, id) = focal.pop_first()?;
        let cur = nodes[id];
        open.remove(&(Cost(cur.f), id));
        if let Some(entry) = best.get_mut(&key(cur.v, cur.t)) {
            if entry.1 == Some(id) {
                entry.1 = None;
            }
        }
        if cur.v == agent.goal && cur.t >= rest {
            let chain: Vec<(GridIndex, Option<usize>)> = nodes.iter().map(|n| (n.v, n.parent)).collect();
            return Some((rebuild(&chain, id, 0, cur.g), f_min));
        }
        *expansions += 1;
        if cur.t >= horizon {
            continue;
        }
        let t = cur.t + 1;
        let mut succ = Vec::with_capacity(9);
        succ.push((cur.v, 1.0));
        map.for_each_neighbor(cur.v, connectivity, |n, s| succ.push((n, s)));
        for (v, step) in succ {
            if constraints.vertex_blocked(v, t) || constraints.edge_blocked(cur.v, v, t) {
                continue;
            }
            let hv = h.get(v);
            if !hv.is_finite() {
                continue;
            }
            let g = cur.g + step;
            let k = key(v, t);
            if let Some(&(bg, in_open)) = best.get(&k) {
                if bg <= g {
                    continue;
                }
                if let Some(old) = in_open {
                    let o = nodes[old];
                    open.remove(&(Cost(o.f), old));
                    focal.remove(&focal_key(&o, old));
                }
            }
            let node = Node {
                v,
                t,
                g,
                f: g + hv,
                conflicts: cur.conflicts + others.conflicts(cur.v, v, t),
                parent: Some(id),
            };
            let nid = nodes.len();
            nodes.push(node);
            open.insert((Cost(node.f), nid));
            if node.f <= bound {
                focal.insert(focal_key(&node, nid));
            }
            best.insert(k, (g, Some(nid)));
        }
    }
    None
}

struct HighNode {
    constraints: Vec<ConstraintSet>,
    key: ConstraintKey,
    paths: Vec<TimedPath>,
    bounds: Vec<f64>,
    cost: f64,
    lb: f64,
    conflicts: usize,
}

/// Bounded-suboptimal multi-agent search with suboptimality factor `omega >= 1`.
pub fn ecbs(
    map: &GridMap,
    agents: &[Agent],
    omega: f64,
    config: &MapfConfig,
) -> Result<MapfSolution, MapfError> {
    assert!(omega >= 1.0, "omega must be at least 1");
    validate_agents(map, agents)?;
    let started = Instant::now();
    let horizon = config.horizon_for(map);
    let conn = config.connectivity;
    let heuristics: Vec<DistanceTable> =
        agents.iter().map(|a| DistanceTable::new(map, a.goal, conn)).collect();
    let mut stats = MapfStats::default();

    let empty = ConstraintSet::new();
    let mut paths: Vec<TimedPath> = agents.iter().map(|a| TimedPath::stationary(0, a.start)).collect();
    let mut bounds = vec![0.0; agents.len()];
    for (i, &a) in agents.iter().enumerate() {
        let occ = Occupancy::new(&paths[..i], usize::MAX);
        let (p, lb) = focal_search(
            map,
            conn,
            a,
            &heuristics[i],
            &empty,
            &occ,
            omega,
            horizon,
            &mut stats.low_level_expansions,
        )
        .ok_or(MapfError::NoSolution)?;
        paths[i] = p;
        bounds[i] = lb;
    }
    let root = HighNode {
        constraints: vec![ConstraintSet::new(); agents.len()],
        key: Vec::new(),
        cost: paths.iter().map(path_cost).sum(),
        lb: bounds.iter().sum(),
        conflicts: count_collisions(&paths),
        paths,
        bounds,
    };
    let mut nodes: Vec<Option<HighNode>> = vec![Some(root)];
    let mut by_lb: BTreeSet<(Cost, usize)> = BTreeSet::new();
    let mut by_cost: BTreeSet<(Cost, usize)> = BTreeSet::new();
    {
        let r = nodes[0].as_ref().expect("root");
        by_lb.insert((Cost(r.lb), 0));
        by_cost.insert((Cost(r.cost), 0));
    }
    let mut seen: HashSet<ConstraintKey> = HashSet::new();
    seen.insert(Vec::new());

    while let Some(&(Cost(lb_min), _)) = by_lb.first() {
        stats.high_level_nodes += 1;
        if stats.high_level_nodes > config.node_budget {
            return Err(MapfError::BudgetExceeded(config.node_budget));
        }
        if started.elapsed() > config.time_limit() {
            return Err(MapfError::Timeout);
        }
        let bound = omega * lb_min;
        let pick = by_cost
            .range(..=(Cost(bound), usize::MAX))
            .map(|&(_, id)| {
                let n = nodes[id].as_ref().expect("open node");
                (n.conflicts, Cost(n.cost), id)
            })
            .min()
            .map(|(_, _, id)| id)
            .unwrap_or_else(|| by_lb.first().expect("non-empty").1);
        let node = nodes[pick].take().expect("open node");
        by_lb.remove(&(Cost(node.lb), pick));
        by_cost.remove(&(Cost(node.cost), pick));

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
            let occ = Occupancy::new(&node.paths, agent);
            let Some((p, lb)) = focal_search(
                map,
                conn,
                agents[agent],
                &heuristics[agent],
                &constraints[agent],
                &occ,
                omega,
                horizon,
                &mut stats.low_level_expansions,
            ) else {
                continue;
            };
            let mut paths = node.paths.clone();
            paths[agent] = p;
            let mut bounds = node.bounds.clone();
            bounds[agent] = lb;
            let child = HighNode {
                cost: paths.iter().map(path_cost).sum(),
                lb: bounds.iter().sum(),
                conflicts: count_collisions(&paths),
                constraints,
                key,
                paths,
                bounds,
            };
            let id = nodes.len();
            by_lb.insert((Cost(child.lb), id));
            by_cost.insert((Cost(child.cost), id));
            nodes.push(Some(child));
        }
    }
    Err(MapfError::NoSolution)
}
