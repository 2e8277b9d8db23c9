//! Decentralized coordination through a shared blackboard of planned paths.
//!
//! Each agent plans with the time-expanded planner, treating every other
//! agent's published path as a dynamic obstacle with a known trajectory,
//! and publishes its own result. Agents replan every few ticks.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conflict::{detect_conflicts, Conflict};
use crate::dynamics::{DynamicObstacle, ObstacleSet, PathEnd, SharedPath};
use crate::grid::{GridIndex, GridMap};
use crate::path::{TimedPath, Timestep};
use crate::planner::{PlanError, Planner, PlannerConfig};
use crate::risk::StaticRiskField;

/// Elliptical body of an agent, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub major: f64,
    pub minor: f64,
    #[serde(default)]
    pub theta: f64,
}

impl Footprint {
    pub fn circle(radius: f64) -> Self {
        Self { major: radius, minor: radius, theta: 0.0 }
    }
}

impl Default for Footprint {
    fn default() -> Self {
        Self::circle(0.3)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub id: String,
    pub start: GridIndex,
    pub goal: GridIndex,
    #[serde(default)]
    pub footprint: Footprint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PublishedPath {
    pub agent: String,
    pub path: TimedPath,
    pub footprint: Footprint,
    pub published_at: Timestep,
}

/// Latest published path per agent. Readers get a consistent snapshot;
/// a publish replaces one entry atomically.
#[derive(Debug, Default)]
pub struct Blackboard {
    entries: RwLock<HashMap<String, Arc<PublishedPath>>>,
}

impl Blackboard {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn publish(&self, entry: PublishedPath) {
        let mut map = self.entries.write().expect("blackboard lock poisoned");
        map.insert(entry.agent.clone(), Arc::new(entry));
    }

    pub fn snapshot(&self) -> HashMap<String, Arc<PublishedPath>> {
        self.entries.read().expect("blackboard lock poisoned").clone()
    }

    pub fn get(&self, agent: &str) -> Option<Arc<PublishedPath>> {
        self.entries.read().expect("blackboard lock poisoned").get(agent).cloned()
    }

    /// Replace the whole board, e.g. with an earlier snapshot.
    pub fn restore(&self, entries: HashMap<String, Arc<PublishedPath>>) {
        *self.entries.write().expect("blackboard lock poisoned") = entries;
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("blackboard lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Other agents' paths as obstacles whose step 0 is `current_time`.
pub fn paths_to_obstacles<'a>(
    published: impl IntoIterator<Item = &'a PublishedPath>,
    map: &GridMap,
    exclude: &str,
    current_time: Timestep,
) -> ObstacleSet {
    let mut entries: Vec<&PublishedPath> = published.into_iter().filter(|p| p.agent != exclude).collect();
    entries.sort_by(|a, b| a.agent.cmp(&b.agent));
    entries
        .into_iter()
        .map(|p| {
            let end = p.path.end_time().max(current_time);
            let points = (current_time..=end).map(|t| map.grid_to_world(p.path.position_at(t))).collect();
            let shared = SharedPath::new(points, PathEnd::Hold).expect("at least one point");
            let f = p.footprint;
            DynamicObstacle::new(format!("agent:{}", p.agent), shared.point(0), f.major, f.minor, f.theta, (0.0, 0.0))
                .expect("validated footprint")
                .with_shared_path(shared)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanningMode {
    /// Agents plan one after another, each seeing the paths published so far.
    #[default]
    Sequential,
    /// Agents plan in parallel from one shared snapshot, then publish.
    Concurrent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub planner: PlannerConfig,
    pub mode: PlanningMode,
    /// Ticks between replans.
    pub replan_interval: u32,
    /// Simulation stops after this many ticks.
    pub max_steps: u32,
    /// When freshly published plans are predicted to collide, one agent of
    /// each pair replans against the updated board before the tick executes.
    pub repair_races: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            planner: PlannerConfig::default(),
            mode: PlanningMode::Sequential,
            replan_interval: 5,
            max_steps: 500,
            repair_races: true,
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SimError {
    #[error("agent {0}: {1}")]
    Agent(String, String),
    #[error("duplicate agent id {0}")]
    DuplicateId(String),
    #[error("agents {0} and {1} share a {2}")]
    SharedCell(String, String, &'static str),
    #[error("invalid simulation settings: {0}")]
    Config(String),
}

/// Setup checks run before the first tick.
pub fn validate_setup(map: &GridMap, agents: &[AgentSpec], config: &SimConfig) -> Result<(), SimError> {
    if config.replan_interval == 0 {
        return Err(SimError::Config("replan_interval must be at least 1".into()));
    }
    if config.max_steps == 0 {
        return Err(SimError::Config("horizon must be positive".into()));
    }
    config.planner.validate().map_err(|e| SimError::Config(e.to_string()))?;
    for (i, a) in agents.iter().enumerate() {
        for (what, v) in [("start", a.start), ("goal", a.goal)] {
            if !map.in_bounds(v) {
                return Err(SimError::Agent(a.id.clone(), format!("{what} {v} is out of bounds")));
            }
            if map.is_occupied(v) {
                return Err(SimError::Agent(a.id.clone(), format!("{what} {v} is occupied")));
            }
        }
        let f = a.footprint;
        if !(f.minor > 0.0 && f.major >= f.minor && f.major.is_finite()) {
            return Err(SimError::Agent(a.id.clone(), "footprint needs major >= minor > 0".into()));
        }
        for b in &agents[..i] {
            if a.id == b.id {
                return Err(SimError::DuplicateId(a.id.clone()));
            }
            if a.start == b.start {
                return Err(SimError::SharedCell(b.id.clone(), a.id.clone(), "start"));
            }
            if a.goal == b.goal {
                return Err(SimError::SharedCell(b.id.clone(), a.id.clone(), "goal"));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    /// Executed trajectory of every agent from tick 0, trailing waits removed.
    pub trajectories: Vec<TimedPath>,
    pub arrived: Vec<bool>,
    pub arrival_times: Vec<Option<Timestep>>,
    /// Wall-clock time of every replan, per agent, seconds.
    pub replan_times: Vec<Vec<f64>>,
    /// Meters per cell, for path lengths.
    pub resolution: f64,
    pub plan_calls: usize,
    pub failed_plans: usize,
    pub watchdog_timeouts: usize,
    /// Predicted collisions among plans published in the same concurrent round.
    pub race_conflicts: usize,
    pub steps: Timestep,
    pub conflicts: Vec<Conflict>,
}

impl SimReport {
    pub fn successes(&self) -> usize {
        self.arrived.iter().filter(|&&a| a).count()
    }

    pub fn all_arrived(&self) -> bool {
        self.arrived.iter().all(|&a| a)
    }

    pub fn collision_count(&self) -> usize {
        self.conflicts.iter().filter(|c| c.is_collision()).count()
    }

    pub fn total_plan_time_s(&self) -> f64 {
        self.replan_times.iter().flatten().sum()
    }

    pub fn max_plan_time_s(&self) -> f64 {
        self.replan_times.iter().flatten().copied().fold(0.0, f64::max)
    }

    pub fn mean_plan_time_s(&self) -> f64 {
        let n = self.replan_times.iter().map(Vec::len).sum::<usize>();
        if n == 0 {
            0.0
        } else {
            self.total_plan_time_s() / n as f64
        }
    }

    pub fn path_lengths_m(&self) -> Vec<f64> {
        self.trajectories.iter().map(|p| p.length_m(self.resolution)).collect()
    }

    pub fn total_length_m(&self) -> f64 {
        self.path_lengths_m().iter().sum()
    }
}

struct Tally {
    replan_times: Vec<Vec<f64>>,
    calls: usize,
    failures: usize,
    timeouts: usize,
}

struct Outcome {
    path: Result<TimedPath, PlanError>,
    seconds: f64,
}

fn plan_one(
    map: &GridMap,
    field: &StaticRiskField,
    scripted: &ObstacleSet,
    snapshot: &HashMap<String, Arc<PublishedPath>>,
    agent: &AgentSpec,
    position: GridIndex,
    t: Timestep,
    config: &SimConfig,
) -> Outcome {
    let started = Instant::now();
    let mut obstacles: Vec<DynamicObstacle> = scripted.advanced(t, config.planner.dt).iter().cloned().collect();
    obstacles.extend(paths_to_obstacles(snapshot.values().map(|p| p.as_ref()), map, &agent.id, t).iter().cloned());
    let set = ObstacleSet::new(obstacles).expect("agent and obstacle ids are unique");
    let planner = Planner::new(map, field, &set, config.planner);
    let path = planner.replan_from(position, t, agent.goal);
    Outcome { path, seconds: started.elapsed().as_secs_f64() }
}

/// Run the replanning loop until every agent has arrived or `max_steps`
/// ticks have passed. `scripted` obstacles are given at tick 0.
pub fn run_simulation(
    map: &GridMap,
    field: &StaticRiskField,
    agents: &[AgentSpec],
    scripted: &ObstacleSet,
    config: &SimConfig,
) -> Result<SimReport, SimError> {
    validate_setup(map, agents, config)?;
    let board = Blackboard::new();
    let n = agents.len();
    let mut positions: Vec<GridIndex> = agents.iter().map(|a| a.start).collect();
    let mut trails: Vec<Vec<GridIndex>> = positions.iter().map(|&p| vec![p]).collect();
    let mut plans: Vec<TimedPath> = positions.iter().map(|&p| TimedPath::stationary(0, p)).collect();
    let mut tally = Tally { replan_times: vec![Vec::new(); n], calls: 0, failures: 0, timeouts: 0 };
    let mut arrival: Vec<Option<Timestep>> = agents.iter().map(|a| (a.start == a.goal).then_some(0)).collect();
    let mut holding = vec![false; n];
    let mut order: Vec<usize> = (0..n).collect();
    let mut races = 0;
    // Nothing is published before the first round: a stationary start held
    // forever would make every goal that is another agent's start unreachable.
    // Agents that start on their goal stay there, so they are published now.
    for (a, p) in agents.iter().zip(&plans).filter(|(a, _)| a.start == a.goal) {
        board.publish(PublishedPath { agent: a.id.clone(), path: p.clone(), footprint: a.footprint, published_at: 0 });
    }
    let interval = config.replan_interval.max(1);

    let mut t: Timestep = 0;
    while t < config.max_steps && arrival.iter().any(Option::is_none) {
        if t.is_multiple_of(interval) {
            let pending: Vec<usize> = (0..n).filter(|&i| arrival[i].is_none()).collect();
            let mut promotions = 0;
            let record = |tally: &mut Tally, i: usize, out: Outcome, plans: &mut Vec<TimedPath>, holding: &mut Vec<bool>| {
                tally.calls += 1;
                tally.replan_times[i].push(out.seconds);
                let path = match out.path {
                    Ok(p) => {
                        holding[i] = false;
                        p
                    }
                    Err(e) => {
                        tally.failures += 1;
                        if matches!(e, PlanError::WatchdogTimeout { .. }) {
                            tally.timeouts += 1;
                        }
                        holding[i] = true;
                        TimedPath::stationary(t, positions[i])
                    }
                };
                board.publish(PublishedPath {
                    agent: agents[i].id.clone(),
                    path: path.clone(),
                    footprint: agents[i].footprint,
                    published_at: t,
                });
                plans[i] = path;
            };
            match config.mode {
                PlanningMode::Sequential => {
                    // Agents plan in priority order. When one fails, the round
                    // starts over from the previous board with that agent
                    // promoted to the front, unless it already planned first.
                    let before = board.snapshot();
                    let mut discarded = vec![0.0; n];
                    loop {
                        let mut outs = Vec::with_capacity(pending.len());
                        for &i in order.iter().filter(|i| pending.contains(i)) {
                            let out = plan_one(map, field, scripted, &board.snapshot(), &agents[i], positions[i], t, config);
                            let path = out.path.clone().unwrap_or_else(|_| TimedPath::stationary(t, positions[i]));
                            board.publish(PublishedPath {
                                agent: agents[i].id.clone(),
                                path,
                                footprint: agents[i].footprint,
                                published_at: t,
                            });
                            outs.push((i, out));
                        }
                        let failed = outs.iter().find(|(_, o)| o.path.is_err()).map(|&(i, _)| i);
                        match failed {
                            Some(i) if outs[0].0 != i && promotions < n * n => {
                                promotions += 1;
                                for (j, out) in outs {
                                    discarded[j] += out.seconds;
                                }
                                board.restore(before.clone());
                                order.retain(|&j| j != i);
                                order.insert(0, i);
                            }
                            _ => {
                                for (i, mut out) in outs {
                                    out.seconds += discarded[i];
                                    record(&mut tally, i, out, &mut plans, &mut holding);
                                }
                                break;
                            }
                        }
                    }
                }
                PlanningMode::Concurrent => {
                    let snap = board.snapshot();
                    let outs: Vec<(usize, Outcome)> = std::thread::scope(|s| {
                        let handles: Vec<_> = pending
                            .iter()
                            .map(|&i| {
                                let snap = &snap;
                                let pos = positions[i];
                                s.spawn(move || (i, plan_one(map, field, scripted, snap, &agents[i], pos, t, config)))
                            })
                            .collect();
                        handles.into_iter().map(|h| h.join().expect("planner thread panicked")).collect()
                    });
                    for (i, out) in outs {
                        record(&mut tally, i, out, &mut plans, &mut holding);
                    }
                    races += predicted_collisions(&plans, t).len();
                }
            }
            // Plans published this round may still collide: racing plans in
            // concurrent mode, or an earlier plan running into an agent that
            // failed and now holds its cell. The yielding agent replans
            // against the current board. An agent holding after a failure
            // never yields, and arrived agents stay put.
            if config.repair_races {
                for _ in 0..4 * n {
                    let free = |i: usize| arrival[i].is_none() && !holding[i];
                    let Some((first, second)) = predicted_collisions(&plans, t).into_iter().find_map(|(a, b)| {
                        match (free(a), free(b)) {
                            (true, true) => Some((b, Some(a))),
                            (true, false) => Some((a, None)),
                            (false, true) => Some((b, None)),
                            (false, false) => None,
                        }
                    }) else {
                        break;
                    };
                    let out = plan_one(map, field, scripted, &board.snapshot(), &agents[first], positions[first], t, config);
                    if out.path.is_err() {
                        // The partner gets a chance to yield before `first` gives up.
                        if let Some(other) = second {
                            let alt = plan_one(map, field, scripted, &board.snapshot(), &agents[other], positions[other], t, config);
                            if alt.path.is_ok() {
                                tally.replan_times[first].push(out.seconds);
                                tally.calls += 1;
                                record(&mut tally, other, alt, &mut plans, &mut holding);
                                continue;
                            }
                        }
                    }
                    record(&mut tally, first, out, &mut plans, &mut holding);
                }
            }
        }
        t += 1;
        for i in 0..n {
            positions[i] = plans[i].position_at(t);
            trails[i].push(positions[i]);
            if arrival[i].is_none() && positions[i] == agents[i].goal && plans[i].end_time() <= t {
                arrival[i] = Some(t);
            }
        }
    }

    let trajectories: Vec<TimedPath> = trails
        .into_iter()
        .map(|cells| {
            let p = TimedPath::new(0, cells, 0.0).trimmed();
            let len = p.length_cells();
            p.with_cost(len)
        })
        .collect();
    let conflicts = detect_conflicts(&trajectories);
    Ok(SimReport {
        arrived: arrival.iter().map(Option::is_some).collect(),
        arrival_times: arrival,
        trajectories,
        replan_times: tally.replan_times,
        resolution: map.resolution(),
        plan_calls: tally.calls,
        failed_plans: tally.failures,
        watchdog_timeouts: tally.timeouts,
        race_conflicts: races,
        steps: t,
        conflicts,
    })
}

/// Pairs of agents whose plans from `t` on collide (vertex or edge).
fn predicted_collisions(plans: &[TimedPath], t: Timestep) -> Vec<(usize, usize)> {
    let tails: Vec<TimedPath> = plans.iter().map(|p| p.tail_from(t)).collect();
    let mut pairs = Vec::new();
    for c in detect_conflicts(&tails).into_iter().filter(Conflict::is_collision) {
        for (k, &a) in c.agents.iter().enumerate() {
            for &b in &c.agents[k + 1..] {
                pairs.push((a.min(b), a.max(b)));
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

/// Audit executed trajectories: every conflict of every kind, earliest first.
pub fn validate(trajectories: &[TimedPath]) -> Vec<Conflict> {
    detect_conflicts(trajectories)
}
