//! Scenario files: TOML documents describing a map, agents, scripted
//! obstacles and planner settings.
//!
//! ```toml
//! schema_version = 1
//! name = "swap_corridor"
//! horizon = 200          # simulation ticks / baseline time bound
//! seed = 7
//! omega = 2.0            # ECBS suboptimality bound
//! inflation_radius = 0.0 # cells, applied to the baselines' map
//!
//! [map]
//! ascii = """
//! .......
//! ##...##
//! """
//! # or: file = "maps/room.txt"   (ASCII, relative to the scenario)
//! # or: yaml = "maps/house.yaml" (map-server YAML + PGM)
//!
//! [[agents]]
//! id = "a"
//! start = [0, 0]
//! goal = [6, 0]
//! footprint = { major = 0.3, minor = 0.3 }
//!
//! [[obstacles]]
//! id = "cart"
//! path = [[3, 1], [3, 0]]  # one cell per tick
//! end = "hold"             # or "loop"
//! major = 0.3
//! minor = 0.3
//!
//! [risk]
//! roi = 3.0
//! roi_crit = 0.5
//!
//! [planner]
//! connectivity = "8"
//! replan_interval = 5
//! mode = "sequential"
//! ```

use std::path::{Path, PathBuf};

use aspt_core::grid::inflate;
use aspt_core::{
    AgentSpec, Connectivity, DynamicObstacle, Footprint, GridIndex, GridMap, MapfConfig, ObstacleSet, PathEnd,
    PlannerConfig, PlanningMode, RiskConfig, SharedPath, SimConfig, WorldPoint,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: unsupported schema_version {found} (expected {SCHEMA_VERSION})")]
    Version { path: String, found: u32 },
    #[error("{path}: map: {source}")]
    Map {
        path: String,
        #[source]
        source: aspt_core::MapError,
    },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ascii: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yaml: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentEntry {
    pub id: String,
    pub start: [usize; 2],
    pub goal: [usize; 2],
    #[serde(default)]
    pub footprint: Footprint,
}

fn default_axis() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EndMode {
    Hold,
    Loop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleEntry {
    pub id: String,
    /// Starting cell when no path is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<[usize; 2]>,
    /// Scripted cells, one per tick.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub path: Vec<[usize; 2]>,
    #[serde(default = "default_end")]
    pub end: EndMode,
    #[serde(default = "default_axis")]
    pub major: f64,
    #[serde(default = "default_axis")]
    pub minor: f64,
    #[serde(default)]
    pub theta: f64,
    /// Meters per second, for obstacles without a path.
    #[serde(default)]
    pub velocity: [f64; 2],
}

fn default_end() -> EndMode {
    EndMode::Hold
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerSection {
    pub connectivity: Connectivity,
    pub time_cost_weight: f64,
    pub wait_cost: f64,
    pub watchdog_max_expansions: u64,
    pub watchdog_max_seconds: f64,
    pub replan_interval: u32,
    pub mode: PlanningMode,
    pub repair_races: bool,
}

impl Default for PlannerSection {
    fn default() -> Self {
        let p = PlannerConfig::default();
        let s = SimConfig::default();
        Self {
            connectivity: p.connectivity,
            time_cost_weight: p.time_cost_weight,
            wait_cost: p.wait_cost,
            watchdog_max_expansions: p.watchdog_max_expansions,
            watchdog_max_seconds: p.watchdog_max_seconds,
            replan_interval: s.replan_interval,
            mode: s.mode,
            repair_races: s.repair_races,
        }
    }
}

fn default_horizon() -> u32 {
    300
}

fn default_omega() -> f64 {
    2.0
}

/// The document as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default = "default_horizon")]
    pub horizon: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_omega")]
    pub omega: f64,
    #[serde(default)]
    pub inflation_radius: f64,
    pub map: MapSource,
    pub agents: Vec<AgentEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub obstacles: Vec<ObstacleEntry>,
    #[serde(default)]
    pub risk: RiskConfig,
    #[serde(default)]
    pub planner: PlannerSection,
}

/// Command-line overrides applied on top of a scenario.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub connectivity: Option<Connectivity>,
    pub roi: Option<f64>,
    pub roi_crit: Option<f64>,
    pub omega: Option<f64>,
    pub replan_interval: Option<u32>,
    pub horizon: Option<u32>,
    pub seed: Option<u64>,
    pub mode: Option<PlanningMode>,
}

impl Scenario {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario =
            toml::from_str(text).map_err(|e| ScenarioError::Parse { path: origin.into(), message: e.to_string() })?;
        if scenario.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::Version { path: origin.into(), found: scenario.schema_version });
        }
        Ok(scenario)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(c) = o.connectivity {
            self.planner.connectivity = c;
        }
        if let Some(r) = o.roi {
            self.risk.roi = r;
        }
        if let Some(r) = o.roi_crit {
            self.risk.roi_crit = r;
        }
        if let Some(w) = o.omega {
            self.omega = w;
        }
        if let Some(k) = o.replan_interval {
            self.planner.replan_interval = k;
        }
        if let Some(h) = o.horizon {
            self.horizon = h;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(m) = o.mode {
            self.planner.mode = m;
        }
    }

    /// Resolve the map, check every reference and build runtime objects.
    /// Relative map paths are taken from `base`.
    pub fn resolve(&self, base: &Path) -> Result<LoadedScenario, ScenarioError> {
        let origin = self.name.clone();
        let invalid = |message: String| ScenarioError::Invalid { path: origin.clone(), message };
        let map = self.load_map(base)?;

        self.risk.validate().map_err(|e| invalid(format!("risk: {e}")))?;
        if !(self.omega >= 1.0) {
            return Err(invalid(format!("omega must be >= 1, got {}", self.omega)));
        }
        if self.horizon == 0 {
            return Err(invalid("horizon must be positive".into()));
        }
        if self.planner.replan_interval == 0 {
            return Err(invalid("planner.replan_interval must be at least 1".into()));
        }

        let cell = |what: &str, c: [usize; 2]| -> Result<GridIndex, ScenarioError> {
            let v = GridIndex::new(c[0], c[1]);
            if !map.in_bounds(v) {
                return Err(invalid(format!("{what} {v} is outside the {}x{} map", map.width(), map.height())));
            }
            Ok(v)
        };
        let mut ids: Vec<&str> = Vec::new();
        let mut agents = Vec::with_capacity(self.agents.len());
        for a in &self.agents {
            if ids.contains(&a.id.as_str()) {
                return Err(invalid(format!("duplicate id {}", a.id)));
            }
            ids.push(&a.id);
            let start = cell(&format!("agent {} start", a.id), a.start)?;
            let goal = cell(&format!("agent {} goal", a.id), a.goal)?;
            for (what, v) in [("start", start), ("goal", goal)] {
                if map.is_occupied(v) {
                    return Err(invalid(format!("agent {} {what} {v} is occupied", a.id)));
                }
            }
            let f = a.footprint;
            if !(f.minor > 0.0 && f.major >= f.minor) {
                return Err(invalid(format!("agent {} footprint needs major >= minor > 0", a.id)));
            }
            agents.push(AgentSpec { id: a.id.clone(), start, goal, footprint: f });
        }
        for (i, a) in agents.iter().enumerate() {
            for b in &agents[..i] {
                if a.start == b.start {
                    return Err(invalid(format!("agents {} and {} share start {}", b.id, a.id, a.start)));
                }
                if a.goal == b.goal {
                    return Err(invalid(format!("agents {} and {} share goal {}", b.id, a.id, a.goal)));
                }
            }
        }

        let mut obstacles = Vec::with_capacity(self.obstacles.len());
        for o in &self.obstacles {
            if ids.contains(&o.id.as_str()) {
                return Err(invalid(format!("duplicate id {}", o.id)));
            }
            ids.push(&o.id);
            let what = format!("obstacle {}", o.id);
            let ob = if o.path.is_empty() {
                let start = o.start.ok_or_else(|| invalid(format!("{what} needs a start or a path")))?;
                let p = map.grid_to_world(cell(&what, start)?);
                DynamicObstacle::new(o.id.clone(), p, o.major, o.minor, o.theta, (o.velocity[0], o.velocity[1]))
            } else {
                let mut points = Vec::with_capacity(o.path.len());
                for &c in &o.path {
                    points.push(map.grid_to_world(cell(&what, c)?));
                }
                let end = match o.end {
                    EndMode::Hold => PathEnd::Hold,
                    EndMode::Loop => PathEnd::Loop,
                };
                let shared = SharedPath::new(points, end).expect("non-empty path");
                DynamicObstacle::new(o.id.clone(), WorldPoint::new(0.0, 0.0), o.major, o.minor, o.theta, (0.0, 0.0))
                    .map(|d| d.with_shared_path(shared))
            }
            .map_err(|e| invalid(e.to_string()))?;
            obstacles.push(ob);
        }
        let obstacles = ObstacleSet::new(obstacles).map_err(|e| invalid(e.to_string()))?;

        let planner = PlannerConfig {
            connectivity: self.planner.connectivity,
            risk: self.risk,
            time_cost_weight: self.planner.time_cost_weight,
            wait_cost: self.planner.wait_cost,
            watchdog_max_expansions: self.planner.watchdog_max_expansions,
            watchdog_max_seconds: self.planner.watchdog_max_seconds,
            ..PlannerConfig::default()
        };
        planner.validate().map_err(|e| invalid(e.to_string()))?;
        let sim = SimConfig {
            planner,
            mode: self.planner.mode,
            replan_interval: self.planner.replan_interval,
            max_steps: self.horizon,
            repair_races: self.planner.repair_races,
        };
        let mapf = MapfConfig {
            connectivity: self.planner.connectivity,
            horizon: Some(self.horizon),
            ..MapfConfig::default()
        };
        let baseline_map = inflate(&map, self.inflation_radius);
        for a in &agents {
            for v in [a.start, a.goal] {
                if baseline_map.is_occupied(v) {
                    return Err(invalid(format!("agent {} endpoint {v} lies inside the inflated walls", a.id)));
                }
            }
        }
        Ok(LoadedScenario {
            name: self.name.clone(),
            seed: self.seed,
            omega: self.omega,
            map,
            baseline_map,
            agents,
            obstacles,
            sim,
            mapf,
        })
    }

    fn load_map(&self, base: &Path) -> Result<GridMap, ScenarioError> {
        let origin = self.name.clone();
        let map_err = |source| ScenarioError::Map { path: origin.clone(), source };
        let read = |p: &Path| std::fs::read(p).map_err(|source| ScenarioError::Io { path: p.to_path_buf(), source });
        let m = &self.map;
        match (&m.ascii, &m.file, &m.yaml) {
            (Some(text), None, None) => GridMap::load_ascii(text).map_err(map_err),
            (None, Some(file), None) => {
                let path = base.join(file);
                let bytes = read(&path)?;
                GridMap::load_ascii(&String::from_utf8_lossy(&bytes)).map_err(map_err)
            }
            (None, None, Some(yaml)) => {
                let yaml_path = base.join(yaml);
                let text = String::from_utf8_lossy(&read(&yaml_path)?).into_owned();
                let meta = aspt_core::grid::MapMetadata::parse(&text).map_err(map_err)?;
                let image = meta.image.clone().ok_or_else(|| ScenarioError::Invalid {
                    path: yaml_path.display().to_string(),
                    message: "map metadata has no image".into(),
                })?;
                let dir = yaml_path.parent().unwrap_or(base);
                let pgm = read(&dir.join(image))?;
                GridMap::load_pgm_yaml(&pgm, &text).map_err(map_err)
            }
            _ => Err(ScenarioError::Invalid {
                path: origin.clone(),
                message: "map needs exactly one of ascii, file or yaml".into(),
            }),
        }
    }
}

/// A validated scenario ready to run.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub name: String,
    pub seed: u64,
    pub omega: f64,
    pub map: GridMap,
    /// `map` with walls inflated, used by the classical planners.
    pub baseline_map: GridMap,
    pub agents: Vec<AgentSpec>,
    pub obstacles: ObstacleSet,
    pub sim: SimConfig,
    pub mapf: MapfConfig,
}

/// Read, parse, override and resolve a scenario file.
pub fn load_scenario(path: &Path, overrides: &Overrides) -> Result<LoadedScenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })?;
    let mut scenario = Scenario::from_toml(&text, &path.display().to_string())?;
    scenario.apply(overrides);
    let base = path.parent().unwrap_or(Path::new("."));
    scenario.resolve(base)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"
schema_version = 1
name = "t"
[map]
ascii = """
.....
.#...
"""
[[agents]]
id = "a"
start = [0, 0]
goal = [4, 1]
[[obstacles]]
id = "o"
path = [[2, 0], [3, 0]]
end = "loop"
"#;

    #[test]
    fn parses_and_resolves() {
        let s = Scenario::from_toml(DOC, "t.toml").unwrap();
        let l = s.resolve(Path::new(".")).unwrap();
        assert_eq!(l.agents[0].goal, GridIndex::new(4, 1));
        assert_eq!(l.obstacles.len(), 1);
        assert_eq!(l.obstacles.settles_after(), None);
        assert_eq!(l.sim.replan_interval, 5);
        assert_eq!(l.map.width(), 5);
    }

    #[test]
    fn round_trips_through_toml() {
        let s = Scenario::from_toml(DOC, "t.toml").unwrap();
        let again = Scenario::from_toml(&s.to_toml(), "again").unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn rejects_bad_references() {
        let occupied = DOC.replace("goal = [4, 1]", "goal = [1, 1]");
        let err = Scenario::from_toml(&occupied, "t").unwrap().resolve(Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("occupied"), "{err}");
        let outside = DOC.replace("goal = [4, 1]", "goal = [9, 1]");
        let err = Scenario::from_toml(&outside, "t").unwrap().resolve(Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("outside"), "{err}");
        let dup = DOC.replace("id = \"o\"", "id = \"a\"");
        let err = Scenario::from_toml(&dup, "t").unwrap().resolve(Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("duplicate id a"), "{err}");
    }

    #[test]
    fn parse_errors_carry_location() {
        let err = Scenario::from_toml("schema_version = 1\nname = \n", "bad.toml").unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("bad.toml"), "{msg}");
        assert!(msg.contains("line 2"), "{msg}");
        let err = Scenario::from_toml(&DOC.replace("schema_version = 1", "schema_version = 9"), "v").unwrap_err();
        assert!(matches!(err, ScenarioError::Version { found: 9, .. }));
    }

    #[test]
    fn missing_map_file_names_the_path() {
        let doc = DOC.replace("ascii = \"\"\"\n.....\n.#...\n\"\"\"", "file = \"nowhere/map.txt\"");
        let err = Scenario::from_toml(&doc, "t").unwrap().resolve(Path::new("/tmp")).unwrap_err();
        assert!(err.to_string().contains("nowhere/map.txt"), "{err}");
    }

    #[test]
    fn overrides_apply() {
        let mut s = Scenario::from_toml(DOC, "t").unwrap();
        s.apply(&Overrides { roi: Some(7.0), connectivity: Some(Connectivity::Four), ..Overrides::default() });
        let l = s.resolve(Path::new(".")).unwrap();
        assert_eq!(l.sim.planner.risk.roi, 7.0);
        assert_eq!(l.mapf.connectivity, Connectivity::Four);
    }
}
