//! Run one planner on a loaded scenario and collect a uniform report.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use aspt_core::baselines::{cbs, ecbs, path_cost, prioritized_sipp};
use aspt_core::conflict::detect_conflicts;
use aspt_core::{run_simulation, Agent, Conflict, MapfError, StaticRiskField, TimedPath, Timestep};
use serde::{Deserialize, Serialize};

use crate::scenario::LoadedScenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerKind {
    Aspt,
    Cbs,
    Ecbs,
    Sipp,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 4] = [PlannerKind::Aspt, PlannerKind::Cbs, PlannerKind::Ecbs, PlannerKind::Sipp];

    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::Aspt => "aspt",
            PlannerKind::Cbs => "cbs",
            PlannerKind::Ecbs => "ecbs",
            PlannerKind::Sipp => "sipp",
        }
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlannerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PlannerKind::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown planner {s:?} (expected aspt, cbs, ecbs or sipp)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentReport {
    pub id: String,
    pub success: bool,
    pub arrival_tick: Option<Timestep>,
    pub length_m: f64,
    /// Wall time of every planning call made for this agent, seconds.
    pub plan_times_s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", content = "reason", rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed(String),
}

impl RunStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, RunStatus::Ok)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub planner: PlannerKind,
    pub status: RunStatus,
    pub resolution: f64,
    pub agents: Vec<AgentReport>,
    pub total_length_m: f64,
    /// Total planning wall time, seconds.
    pub plan_time_s: f64,
    pub max_plan_time_s: f64,
    pub mean_plan_time_s: f64,
    /// Sum of costs: moves by length in cells, waits 1, trailing waits free.
    /// For aspt it is taken over the executed trajectories.
    pub cost: f64,
    pub conflicts: Vec<Conflict>,
    /// Executed (aspt) or planned (baselines) trajectories, from tick 0.
    pub trajectories: Vec<TimedPath>,
}

impl RunReport {
    pub fn successes(&self) -> usize {
        self.agents.iter().filter(|a| a.success).count()
    }

    pub fn collision_count(&self) -> usize {
        self.conflicts.iter().filter(|c| c.is_collision()).count()
    }
}

/// Run `planner` on `scenario`. Planner failures end up in the report; only
/// setup problems are returned as errors.
pub fn run(scenario: &LoadedScenario, planner: PlannerKind) -> anyhow::Result<RunReport> {
    match planner {
        PlannerKind::Aspt => run_aspt(scenario),
        _ => Ok(run_baseline(scenario, planner)),
    }
}

fn run_aspt(s: &LoadedScenario) -> anyhow::Result<RunReport> {
    let field = StaticRiskField::build(&s.map, s.sim.planner.risk);
    let sim = run_simulation(&s.map, &field, &s.agents, &s.obstacles, &s.sim)?;
    let lengths = sim.path_lengths_m();
    let agents = s
        .agents
        .iter()
        .enumerate()
        .map(|(i, a)| AgentReport {
            id: a.id.clone(),
            success: sim.arrived[i],
            arrival_tick: sim.arrival_times[i],
            length_m: lengths[i],
            plan_times_s: sim.replan_times[i].clone(),
        })
        .collect();
    Ok(RunReport {
        scenario: s.name.clone(),
        planner: PlannerKind::Aspt,
        status: RunStatus::Ok,
        resolution: s.map.resolution(),
        agents,
        total_length_m: sim.total_length_m(),
        plan_time_s: sim.total_plan_time_s(),
        max_plan_time_s: sim.max_plan_time_s(),
        mean_plan_time_s: sim.mean_plan_time_s(),
        cost: sim.trajectories.iter().map(path_cost).sum(),
        conflicts: sim.conflicts,
        trajectories: sim.trajectories,
    })
}

fn run_baseline(s: &LoadedScenario, planner: PlannerKind) -> RunReport {
    let agents: Vec<Agent> = s.agents.iter().map(|a| Agent::new(a.start, a.goal)).collect();
    let started = Instant::now();
    let result: Result<(Vec<TimedPath>, Vec<usize>, f64), MapfError> = match planner {
        PlannerKind::Cbs => cbs(&s.baseline_map, &agents, &s.mapf).map(|sol| {
            let c = sol.sum_of_costs();
            (sol.paths, Vec::new(), c)
        }),
        PlannerKind::Ecbs => ecbs(&s.baseline_map, &agents, s.omega, &s.mapf).map(|sol| {
            let c = sol.sum_of_costs();
            (sol.paths, Vec::new(), c)
        }),
        PlannerKind::Sipp => prioritized_sipp(&s.baseline_map, &agents, &s.mapf).map(|(sol, failed)| {
            let c = sol.sum_of_costs();
            (sol.paths, failed, c)
        }),
        PlannerKind::Aspt => unreachable!("aspt runs the simulation"),
    };
    let seconds = started.elapsed().as_secs_f64();
    let resolution = s.map.resolution();
    match result {
        Ok((paths, failed, cost)) => {
            let trajectories: Vec<TimedPath> = paths.into_iter().map(TimedPath::trimmed).collect();
            let agents: Vec<AgentReport> = s
                .agents
                .iter()
                .zip(&trajectories)
                .enumerate()
                .map(|(i, (a, p))| {
                    let success = !failed.contains(&i) && p.last() == a.goal;
                    AgentReport {
                        id: a.id.clone(),
                        success,
                        arrival_tick: success.then(|| p.end_time()),
                        length_m: p.length_m(resolution),
                        plan_times_s: Vec::new(),
                    }
                })
                .collect();
            let total_length_m = agents.iter().map(|a| a.length_m).sum();
            RunReport {
                scenario: s.name.clone(),
                planner,
                status: RunStatus::Ok,
                resolution,
                agents,
                total_length_m,
                plan_time_s: seconds,
                max_plan_time_s: seconds,
                mean_plan_time_s: seconds,
                cost,
                conflicts: detect_conflicts(&trajectories),
                trajectories,
            }
        }
        Err(e) => RunReport {
            scenario: s.name.clone(),
            planner,
            status: RunStatus::Failed(e.to_string()),
            resolution,
            agents: s
                .agents
                .iter()
                .map(|a| AgentReport {
                    id: a.id.clone(),
                    success: false,
                    arrival_tick: None,
                    length_m: 0.0,
                    plan_times_s: Vec::new(),
                })
                .collect(),
            total_length_m: 0.0,
            plan_time_s: seconds,
            max_plan_time_s: seconds,
            mean_plan_time_s: seconds,
            cost: 0.0,
            conflicts: Vec::new(),
            trajectories: s.agents.iter().map(|a| TimedPath::stationary(0, a.start)).collect(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Scenario;
    use std::path::Path;

    fn pocket() -> LoadedScenario {
        corridor(".....\n#.###", 4)
    }

    fn corridor(ascii: &str, end: usize) -> LoadedScenario {
        let doc = r#"
schema_version = 1
name = "pocket"
horizon = 60
[map]
ascii = """
MAP
"""
[risk]
roi = 2.0
roi_crit = 0.5
[planner]
connectivity = "4"
[[agents]]
id = "a"
start = [0, 0]
goal = [END, 0]
[[agents]]
id = "b"
start = [END, 0]
goal = [0, 0]
"#;
        let doc = doc.replace("MAP", ascii).replace("END", &end.to_string());
        Scenario::from_toml(&doc, "corridor").unwrap().resolve(Path::new(".")).unwrap()
    }

    #[test]
    fn planner_names_round_trip() {
        for p in PlannerKind::ALL {
            assert_eq!(p.name().parse::<PlannerKind>().unwrap(), p);
        }
        assert!("dijkstra".parse::<PlannerKind>().is_err());
    }

    #[test]
    fn baselines_solve_the_pocket_swap() {
        let s = pocket();
        for p in [PlannerKind::Cbs, PlannerKind::Ecbs] {
            let r = run(&s, p).unwrap();
            assert!(r.status.is_ok(), "{p}: {:?}", r.status);
            assert_eq!(r.successes(), 2, "{p}: {:?} {:?}", r.trajectories, r.agents);
            assert_eq!(r.collision_count(), 0, "{p}: {:?}", r.conflicts);
            let sum: f64 = r.agents.iter().map(|a| a.length_m).sum();
            assert!((sum - r.total_length_m).abs() < 1e-9);
        }
    }

    #[test]
    fn aspt_swaps_through_a_middle_alcove() {
        let r = run(&corridor("............\n####.#######", 11), PlannerKind::Aspt).unwrap();
        assert_eq!(r.successes(), 2, "{:?}", r.trajectories);
        assert_eq!(r.collision_count(), 0);
        let sum: f64 = r.agents.iter().map(|a| a.length_m).sum();
        assert!((sum - r.total_length_m).abs() < 1e-9);
    }

    #[test]
    fn aspt_promotes_the_blocked_agent() {
        // Planning "a" first sends it straight at "b", which cannot reach the
        // pocket in time. "b" gets promoted and "a" ducks into the pocket.
        let r = run(&pocket(), PlannerKind::Aspt).unwrap();
        assert_eq!(r.successes(), 2, "{:?}", r.trajectories);
        assert_eq!(r.collision_count(), 0);
    }

    #[test]
    fn aspt_deadlock_is_safe() {
        let mut s = corridor("..", 1);
        s.sim.max_steps = 20;
        let r = run(&s, PlannerKind::Aspt).unwrap();
        assert_eq!(r.collision_count(), 0, "{:?}", r.trajectories);
        assert_eq!(r.successes(), 0);
    }

    #[test]
    fn baseline_failure_is_reported() {
        let mut s = pocket();
        s.mapf.node_budget = 0;
        let r = run(&s, PlannerKind::Cbs).unwrap();
        assert!(matches!(r.status, RunStatus::Failed(_)));
        assert_eq!(r.successes(), 0);
    }
}
