//! Pairwise and group conflicts between timed paths.
//!
//! Agents hold their first cell before their path starts and rest at the
//! last cell after it ends.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::grid::GridIndex;
use crate::path::{TimedPath, Timestep};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConflictKind {
    /// Two agents in one cell at the same tick.
    Vertex,
    /// Two moves over the same edge in opposite directions, or two crossing diagonals.
    Edge,
    /// Two agents exchange cells.
    Swap,
    /// One agent enters the cell another just left, for two or more ticks in a row.
    Follow,
    /// Three or more agents rotate through each other's cells.
    Cyclic,
}

impl fmt::Display for ConflictKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConflictKind::Vertex => "vertex",
            ConflictKind::Edge => "edge",
            ConflictKind::Swap => "swap",
            ConflictKind::Follow => "follow",
            ConflictKind::Cyclic => "cyclic",
        };
        f.write_str(s)
    }
}

/// A conflict record. For moves, `time` is the arrival tick.
///
/// `cells` holds the shared cell for vertex conflicts, `[a_from, a_to,
/// b_from, b_to]` for edge and swap conflicts, `[leader_from, follower_from]`
/// for follow conflicts and the departure cells of a rotation otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conflict {
    pub kind: ConflictKind,
    pub time: Timestep,
    pub agents: Vec<usize>,
    pub cells: Vec<GridIndex>,
}

impl Conflict {
    /// Vertex, edge and swap conflicts are physical collisions.
    pub fn is_collision(&self) -> bool {
        matches!(self.kind, ConflictKind::Vertex | ConflictKind::Edge | ConflictKind::Swap)
    }
}

fn time_range(paths: &[TimedPath]) -> Option<(Timestep, Timestep)> {
    let lo = paths.iter().map(|p| p.start_time()).min()?;
    let hi = paths.iter().map(|p| p.end_time()).max()?;
    Some((lo, hi))
}

fn crossing(a_from: GridIndex, a_to: GridIndex, b_from: GridIndex, b_to: GridIndex) -> bool {
    let diag = |u: GridIndex, v: GridIndex| u.x != v.x && u.y != v.y;
    diag(a_from, a_to)
        && diag(b_from, b_to)
        && a_from.x + a_to.x == b_from.x + b_to.x
        && a_from.y + a_to.y == b_from.y + b_to.y
        && a_from != b_from
        && a_from != b_to
}

fn vertex_conflicts(t: Timestep, pos: &[GridIndex], out: &mut Vec<Conflict>) {
    let mut by_cell: HashMap<GridIndex, Vec<usize>> = HashMap::new();
    for (i, &c) in pos.iter().enumerate() {
        by_cell.entry(c).or_default().push(i);
    }
    for (cell, agents) in by_cell {
        if agents.len() > 1 {
            out.push(Conflict { kind: ConflictKind::Vertex, time: t, agents, cells: vec![cell] });
        }
    }
}

fn edge_conflicts(t: Timestep, from: &[GridIndex], to: &[GridIndex], out: &mut Vec<Conflict>) {
    for a in 0..from.len() {
        if from[a] == to[a] {
            continue;
        }
        for b in a + 1..from.len() {
            if from[b] == to[b] {
                continue;
            }
            let cells = vec![from[a], to[a], from[b], to[b]];
            if from[a] == to[b] && to[a] == from[b] {
                out.push(Conflict { kind: ConflictKind::Edge, time: t + 1, agents: vec![a, b], cells: cells.clone() });
                out.push(Conflict { kind: ConflictKind::Swap, time: t + 1, agents: vec![a, b], cells });
            } else if crossing(from[a], to[a], from[b], to[b]) {
                out.push(Conflict { kind: ConflictKind::Edge, time: t + 1, agents: vec![a, b], cells });
            }
        }
    }
}

/// `succ[i] = Some(j)` when agent `i` moves into the cell agent `j` leaves.
fn follow_map(from: &[GridIndex], to: &[GridIndex]) -> Vec<Option<usize>> {
    let mut leaving: HashMap<GridIndex, usize> = HashMap::new();
    for j in 0..from.len() {
        if from[j] != to[j] {
            leaving.insert(from[j], j);
        }
    }
    (0..from.len())
        .map(|i| {
            if from[i] == to[i] {
                return None;
            }
            leaving.get(&to[i]).copied().filter(|&j| j != i)
        })
        .collect()
}

/// Agents that are part of a rotation of any length, and the rotations of length >= 3.
fn rotations(succ: &[Option<usize>]) -> (Vec<bool>, Vec<Vec<usize>>) {
    let n = succ.len();
    let mut in_cycle = vec![false; n];
    let mut cycles = Vec::new();
    let mut state = vec![0u8; n];
    for s in 0..n {
        if state[s] != 0 {
            continue;
        }
        let mut trail = Vec::new();
        let mut cur = Some(s);
        while let Some(i) = cur {
            if state[i] == 2 {
                break;
            }
            if state[i] == 1 {
                let pos = trail.iter().position(|&x| x == i).expect("on trail");
                let cyc: Vec<usize> = trail[pos..].to_vec();
                for &c in &cyc {
                    in_cycle[c] = true;
                }
                if cyc.len() >= 3 {
                    cycles.push(cyc);
                }
                break;
            }
            state[i] = 1;
            trail.push(i);
            cur = succ[i];
        }
        for i in trail {
            state[i] = 2;
        }
    }
    (in_cycle, cycles)
}

/// Every conflict among `paths`, ordered by time and then by kind.
pub fn detect_conflicts(paths: &[TimedPath]) -> Vec<Conflict> {
    let mut out = Vec::new();
    let Some((lo, hi)) = time_range(paths) else {
        return out;
    };
    let n = paths.len();
    // (follower, leader) -> length of the current follow streak
    let mut streak: HashMap<(usize, usize), u32> = HashMap::new();
    let mut pos: Vec<GridIndex> = paths.iter().map(|p| p.position_at(lo)).collect();
    vertex_conflicts(lo, &pos, &mut out);
    for t in lo..hi {
        let next: Vec<GridIndex> = paths.iter().map(|p| p.position_at(t + 1)).collect();
        vertex_conflicts(t + 1, &next, &mut out);
        edge_conflicts(t, &pos, &next, &mut out);

        let succ = follow_map(&pos, &next);
        let (in_cycle, cycles) = rotations(&succ);
        for mut cyc in cycles {
            let cells = cyc.iter().map(|&i| pos[i]).collect();
            cyc.sort_unstable();
            out.push(Conflict { kind: ConflictKind::Cyclic, time: t + 1, agents: cyc, cells });
        }
        let mut alive = HashMap::new();
        for i in 0..n {
            let Some(j) = succ[i] else { continue };
            if in_cycle[i] {
                continue;
            }
            let len = streak.get(&(i, j)).copied().unwrap_or(0) + 1;
            if len == 2 {
                out.push(Conflict {
                    kind: ConflictKind::Follow,
                    time: t,
                    agents: vec![j, i],
                    cells: vec![pos[j], pos[i]],
                });
            }
            alive.insert((i, j), len);
        }
        streak = alive;
        pos = next;
    }
    for c in &mut out {
        if matches!(c.kind, ConflictKind::Vertex) {
            c.agents.sort_unstable();
        }
    }
    out.sort_by(|a, b| (a.time, a.kind, &a.agents).cmp(&(b.time, b.kind, &b.agents)));
    out
}

/// Earliest vertex or edge conflict, the kind a search-based solver resolves.
pub fn first_collision(paths: &[TimedPath]) -> Option<Conflict> {
    let (lo, hi) = time_range(paths)?;
    let mut pos: Vec<GridIndex> = paths.iter().map(|p| p.position_at(lo)).collect();
    let mut found = Vec::new();
    vertex_conflicts(lo, &pos, &mut found);
    if let Some(c) = earliest(found) {
        return Some(c);
    }
    for t in lo..hi {
        let next: Vec<GridIndex> = paths.iter().map(|p| p.position_at(t + 1)).collect();
        let mut found = Vec::new();
        vertex_conflicts(t + 1, &next, &mut found);
        edge_conflicts(t, &pos, &next, &mut found);
        found.retain(|c| c.kind != ConflictKind::Swap);
        if let Some(c) = earliest(found) {
            return Some(c);
        }
        pos = next;
    }
    None
}

fn earliest(mut found: Vec<Conflict>) -> Option<Conflict> {
    for c in &mut found {
        if c.kind == ConflictKind::Vertex {
            c.agents.sort_unstable();
        }
    }
    found.into_iter().min_by(|a, b| (a.kind, &a.agents).cmp(&(b.kind, &b.agents)))
}

/// Number of vertex and edge conflicts, counting a swap once.
pub fn count_collisions(paths: &[TimedPath]) -> usize {
    detect_conflicts(paths)
        .iter()
        .filter(|c| matches!(c.kind, ConflictKind::Vertex | ConflictKind::Edge))
        .count()
}
