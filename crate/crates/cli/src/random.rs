//! Seeded random scenarios: cluttered square maps with a few agents whose
//! endpoints share one connected region.

use std::collections::VecDeque;

use aspt_core::{CellState, Connectivity, GridIndex, GridMap, RiskConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scenario::{AgentEntry, MapSource, PlannerSection, Scenario, SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomParams {
    pub size: usize,
    pub rectangles: usize,
    pub max_rect: usize,
    pub min_agents: usize,
    pub max_agents: usize,
}

impl Default for RandomParams {
    fn default() -> Self {
        Self { size: 40, rectangles: 12, max_rect: 4, min_agents: 3, max_agents: 4 }
    }
}

/// Largest 8-connected set of free cells.
fn largest_region(map: &GridMap) -> Vec<GridIndex> {
    let mut seen = vec![false; map.len()];
    let mut best = Vec::new();
    for v in map.indices() {
        if seen[map.offset(v)] || !map.is_traversable(v) {
            continue;
        }
        seen[map.offset(v)] = true;
        let mut region = vec![v];
        let mut queue = VecDeque::from([v]);
        while let Some(u) = queue.pop_front() {
            map.for_each_neighbor(u, Connectivity::Eight, |w, _| {
                if !seen[map.offset(w)] {
                    seen[map.offset(w)] = true;
                    region.push(w);
                    queue.push_back(w);
                }
            });
        }
        if region.len() > best.len() {
            best = region;
        }
    }
    best
}

pub fn random_scenario(seed: u64, params: &RandomParams) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = params.size;
    let mut map = GridMap::filled(n, n, CellState::Free);
    for _ in 0..params.rectangles {
        let (w, h) = (rng.gen_range(1..=params.max_rect), rng.gen_range(1..=params.max_rect));
        let (x, y) = (rng.gen_range(0..=n - w), rng.gen_range(0..=n - h));
        for yy in y..y + h {
            for xx in x..x + w {
                map.set(GridIndex::new(xx, yy), CellState::Occupied);
            }
        }
    }
    let agents = rng.gen_range(params.min_agents..=params.max_agents);
    let mut region = largest_region(&map);
    region.sort();
    let picks: Vec<GridIndex> = region.choose_multiple(&mut rng, 2 * agents).copied().collect();
    let agents = (0..agents)
        .map(|i| AgentEntry {
            id: format!("r{i}"),
            start: [picks[2 * i].x, picks[2 * i].y],
            goal: [picks[2 * i + 1].x, picks[2 * i + 1].y],
            footprint: Default::default(),
        })
        .collect();
    Scenario {
        schema_version: SCHEMA_VERSION,
        name: format!("random_{seed}"),
        horizon: 400,
        seed,
        omega: 2.0,
        inflation_radius: 0.0,
        map: MapSource { ascii: Some(map.to_ascii()), ..MapSource::default() },
        agents,
        obstacles: Vec::new(),
        risk: RiskConfig { roi: 3.0, roi_crit: 0.5, ..RiskConfig::default() },
        planner: PlannerSection::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    #[test]
    fn same_seed_same_scenario() {
        let p = RandomParams::default();
        assert_eq!(random_scenario(3, &p), random_scenario(3, &p));
        assert_ne!(random_scenario(3, &p), random_scenario(4, &p));
    }

    #[test]
    fn scenarios_resolve() {
        let p = RandomParams::default();
        for seed in 0..20 {
            let s = random_scenario(seed, &p).resolve(Path::new(".")).unwrap();
            assert!((3..=4).contains(&s.agents.len()));
            assert_eq!(s.map.width(), 40);
        }
    }

    #[test]
    fn region_is_connected_component() {
        let map = GridMap::load_ascii("..#..\n..#..\n..#..\n").unwrap();
        let r = largest_region(&map);
        assert_eq!(r.len(), 6);
    }
}
