//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Oracles are written independently of the library code.

use std::collections::{BinaryHeap, HashMap};
use std::cmp::Reverse;
use std::f64::consts::{PI, SQRT_2};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use aspt_cli::random::{random_scenario, RandomParams};
use aspt_cli::{load_scenario, run, LoadedScenario, Overrides, PlannerKind};
use aspt_core::baselines::{cbs, ecbs, path_cost, sipp_plan, space_time_astar, DistanceTable, ReservationTable};
use aspt_core::conflict::detect_conflicts;
use aspt_core::dynamics::{circle_clearance, dynamic_risk, ellipse_clearance};
use aspt_core::risk::proximity_risk;
use aspt_core::{
    Agent, CellState, ConflictKind, Connectivity, DynamicObstacle, DynamicRiskModel, GridIndex, GridMap, MapfConfig,
    ObstacleSet, PlanError, Planner, PlannerConfig, RiskConfig, StaticRiskField, TimedPath, WorldPoint,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Tolerances and budgets.
const POINT_TOL: f64 = 1e-9;
const STATIC_FIELD_BUDGET: Duration = Duration::from_secs(1);
const DEGENERATE_BUDGET: Duration = Duration::from_secs(2);
const CBS_BUDGET: Duration = Duration::from_secs(60);
const ECBS_OMEGA: f64 = 2.0;
const LAMBDA_STEP: f64 = 0.1;
const HOUSE_RATIO_MAX: f64 = 1.10;
/// Scheduling slack allowed on top of the configured watchdog seconds.
const WATCHDOG_SLACK: Duration = Duration::from_millis(500);

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn g(x: usize, y: usize) -> GridIndex {
    GridIndex::new(x, y)
}

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.toml"))
}

fn load(name: &str) -> LoadedScenario {
    load_scenario(&scenario_path(name), &Overrides::default()).expect("bundled scenario loads")
}

fn random_map(rng: &mut ChaCha8Rng, w: usize, h: usize, density: f64) -> GridMap {
    let mut map = GridMap::filled(w, h, CellState::Free);
    for y in 0..h {
        for x in 0..w {
            if rng.gen_bool(density) {
                map.set(g(x, y), CellState::Occupied);
            }
        }
    }
    map
}

fn free_cells(map: &GridMap) -> Vec<GridIndex> {
    map.indices().filter(|&v| !map.is_occupied(v)).collect()
}

// ---------------------------------------------------------------- criteria

fn risk_point_checks() -> Outcome {
    let cfg = RiskConfig { roi: 98.0, roi_crit: 0.5, ..RiskConfig::default() };
    let static_risk = proximity_risk(1.0, &cfg);
    let model = DynamicRiskModel::from_config(&RiskConfig { roi: 10.0, roi_crit: 0.0, ..RiskConfig::default() }, 1.0, 1.0);
    let still = DynamicObstacle::circle("o", WorldPoint::new(0.0, 0.0), 1.0, (0.0, 0.0)).unwrap();
    let set = ObstacleSet::new(vec![still]).unwrap();
    // a point on the footprint boundary has zero clearance
    let touching = dynamic_risk(&set, WorldPoint::new(1.0, 0.0), 0, &model);
    check(
        (static_risk - 99.0).abs() <= POINT_TOL && (touching - 99.0).abs() <= POINT_TOL,
        format!("proximity_risk(1, roi 98) = {static_risk}, dynamic risk at d=0 = {touching}"),
    )
}

fn static_field_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = RiskConfig { roi: 6.0, roi_crit: 1.5, ..RiskConfig::default() };
    let mut build_time = Duration::ZERO;
    let mut mismatches = 0;
    for _ in 0..50 {
        let (w, h) = (rng.gen_range(1..=32), rng.gen_range(1..=32));
        let density = rng.gen_range(0.0..0.3);
        let map = random_map(&mut rng, w, h, density);
        let started = Instant::now();
        let field = StaticRiskField::build(&map, cfg);
        build_time += started.elapsed();
        let occupied: Vec<GridIndex> = map.indices().filter(|&v| map.is_occupied(v)).collect();
        for v in map.indices() {
            let d = occupied
                .iter()
                .map(|o| {
                    let (dx, dy) = (o.x as f64 - v.x as f64, o.y as f64 - v.y as f64);
                    (dx * dx + dy * dy).sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            let expected = if map.is_occupied(v) { f64::INFINITY } else { proximity_risk(d, &cfg) };
            if field.nearest_occupied(v) != d || field.proximity(v) != expected {
                mismatches += 1;
            }
        }
    }
    check(
        mismatches == 0 && build_time < STATIC_FIELD_BUDGET,
        format!("50 maps, {mismatches} mismatching cells, build time {:.3} s", build_time.as_secs_f64()),
    )
}

/// Straight and diagonal move counts of a path.
fn move_counts(path: &TimedPath) -> (u32, u32) {
    let mut counts = (0, 0);
    for w in path.cells().windows(2) {
        match (w[0].x.abs_diff(w[1].x), w[0].y.abs_diff(w[1].y)) {
            (0, 0) => {}
            (1, 1) => counts.1 += 1,
            _ => counts.0 += 1,
        }
    }
    counts
}

/// Geodesic distance as (straight, diagonal) move counts. Diagonals may not
/// cut past an occupied orthogonal cell.
fn dijkstra_oracle(map: &GridMap, s: GridIndex, goal: GridIndex) -> Option<(u32, u32)> {
    let key = |c: (u32, u32)| c.0 as f64 + c.1 as f64 * SQRT_2;
    let mut best: HashMap<GridIndex, (u32, u32)> = HashMap::from([(s, (0, 0))]);
    let mut heap = BinaryHeap::from([Reverse((0u64, s.x, s.y, 0u32, 0u32))]);
    let free = |x: isize, y: isize| {
        x >= 0 && y >= 0 && (x as usize) < map.width() && (y as usize) < map.height() && !map.is_occupied(g(x as usize, y as usize))
    };
    while let Some(Reverse((_, x, y, a, b))) = heap.pop() {
        let v = g(x, y);
        if best[&v] != (a, b) {
            continue;
        }
        if v == goal {
            return Some((a, b));
        }
        for dx in -1isize..=1 {
            for dy in -1isize..=1 {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if (dx, dy) == (0, 0) || !free(nx, ny) {
                    continue;
                }
                let diagonal = dx != 0 && dy != 0;
                if diagonal && (!free(x as isize + dx, y as isize) || !free(x as isize, y as isize + dy)) {
                    continue;
                }
                let c = if diagonal { (a, b + 1) } else { (a + 1, b) };
                let n = g(nx as usize, ny as usize);
                if best.get(&n).is_none_or(|&old| key(c) < key(old)) {
                    best.insert(n, c);
                    heap.push(Reverse(((key(c) * 1e9) as u64, n.x, n.y, c.0, c.1)));
                }
            }
        }
    }
    None
}

fn degenerate_astar_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let cfg = PlannerConfig::plain();
    let none = ObstacleSet::empty();
    let mut plan_time = Duration::ZERO;
    let (mut compared, mut mismatches) = (0, 0);
    while compared < 100 {
        let map = random_map(&mut rng, 20, 20, 0.25);
        let free = free_cells(&map);
        if free.len() < 2 {
            continue;
        }
        let s = *free.choose(&mut rng).unwrap();
        let goal = *free.choose(&mut rng).unwrap();
        let field = StaticRiskField::build(&map, cfg.risk);
        let started = Instant::now();
        let result = Planner::new(&map, &field, &none, cfg).plan(s, goal);
        plan_time += started.elapsed();
        let oracle = dijkstra_oracle(&map, s, goal);
        compared += 1;
        match (result, oracle) {
            (Ok(p), Some(o)) if move_counts(&p) == o && p.waits() == 0 => {}
            (Err(PlanError::NoPath), None) => {}
            _ => mismatches += 1,
        }
    }
    check(
        mismatches == 0 && plan_time < DEGENERATE_BUDGET,
        format!("{compared} maps, {mismatches} mismatches, planning time {:.3} s", plan_time.as_secs_f64()),
    )
}

/// Optimal sum of costs by Dijkstra over joint states on a 4-connected grid.
/// An agent may declare itself finished while on its goal; from then on it
/// stays there and stops paying.
fn joint_state_oracle(map: &GridMap, agents: &[Agent]) -> Option<u32> {
    let n = agents.len();
    let w = map.width();
    let id = |v: GridIndex| v.y * w + v.x;
    let encode = |pos: &[GridIndex], done: u32| -> u64 {
        pos.iter().fold(done as u64, |k, &v| k * map.len() as u64 + id(v) as u64)
    };
    let all_done = (1u32 << n) - 1;
    let start: Vec<GridIndex> = agents.iter().map(|a| a.start).collect();
    let mut dist: HashMap<u64, u32> = HashMap::from([(encode(&start, 0), 0)]);
    let mut heap = BinaryHeap::from([Reverse((0u32, start, 0u32))]);
    let moves = |v: GridIndex| -> Vec<GridIndex> {
        let mut out = vec![v];
        let (x, y) = (v.x as isize, v.y as isize);
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let (nx, ny) = (x + dx, y + dy);
            if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < map.height() {
                let c = g(nx as usize, ny as usize);
                if !map.is_occupied(c) {
                    out.push(c);
                }
            }
        }
        out
    };
    while let Some(Reverse((d, pos, done))) = heap.pop() {
        if dist[&encode(&pos, done)] < d {
            continue;
        }
        if done == all_done {
            return Some(d);
        }
        let mut relax = |pos: Vec<GridIndex>, done: u32, cost: u32, heap: &mut BinaryHeap<_>| {
            let k = encode(&pos, done);
            if dist.get(&k).is_none_or(|&old| cost < old) {
                dist.insert(k, cost);
                heap.push(Reverse((cost, pos, done)));
            }
        };
        for i in 0..n {
            if done & (1 << i) == 0 && pos[i] == agents[i].goal {
                relax(pos.clone(), done | (1 << i), d, &mut heap);
            }
        }
        let options: Vec<Vec<GridIndex>> =
            (0..n).map(|i| if done & (1 << i) != 0 { vec![pos[i]] } else { moves(pos[i]) }).collect();
        let active = (0..n).filter(|&i| done & (1 << i) == 0).count() as u32;
        let mut choice = vec![0usize; n];
        'joint: loop {
            let next: Vec<GridIndex> = (0..n).map(|i| options[i][choice[i]]).collect();
            let mut ok = true;
            for a in 0..n {
                for b in a + 1..n {
                    let vertex = next[a] == next[b];
                    let swap = next[a] == pos[b] && next[b] == pos[a] && pos[a] != pos[b];
                    if vertex || swap {
                        ok = false;
                    }
                }
            }
            if ok {
                relax(next, done, d + active, &mut heap);
            }
            for i in 0..n {
                choice[i] += 1;
                if choice[i] < options[i].len() {
                    continue 'joint;
                }
                choice[i] = 0;
            }
            break;
        }
    }
    None
}

struct MapfInstance {
    map: GridMap,
    agents: Vec<Agent>,
    optimum: u32,
}

fn mapf_suite() -> Vec<MapfInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut suite = Vec::new();
    while suite.len() < 36 {
        let (w, h) = (rng.gen_range(3..=6), rng.gen_range(3..=6));
        let map = random_map(&mut rng, w, h, 0.15);
        let mut free = free_cells(&map);
        let k = rng.gen_range(2..=3);
        if free.len() < 2 * k + 1 {
            continue;
        }
        free.shuffle(&mut rng);
        let agents: Vec<Agent> = (0..k).map(|i| Agent::new(free[2 * i], free[2 * i + 1])).collect();
        if let Some(optimum) = joint_state_oracle(&map, &agents) {
            suite.push(MapfInstance { map, agents, optimum });
        }
    }
    suite
}

fn mapf_config() -> MapfConfig {
    MapfConfig { connectivity: Connectivity::Four, horizon: Some(20), ..MapfConfig::default() }
}

fn cbs_optimality(suite: &[MapfInstance]) -> Outcome {
    let cfg = mapf_config();
    let mut time = Duration::ZERO;
    let mut wrong = Vec::new();
    for (k, inst) in suite.iter().enumerate() {
        let started = Instant::now();
        let result = cbs(&inst.map, &inst.agents, &cfg);
        time += started.elapsed();
        match result {
            Ok(sol) if sol.sum_of_costs() == inst.optimum as f64 => {}
            Ok(sol) => wrong.push(format!("#{k}: {} vs {}", sol.sum_of_costs(), inst.optimum)),
            Err(e) => wrong.push(format!("#{k}: {e}")),
        }
    }
    check(
        wrong.is_empty() && time < CBS_BUDGET,
        format!("{} instances, mismatches {wrong:?}, CBS time {:.3} s", suite.len(), time.as_secs_f64()),
    )
}

fn ecbs_bound(suite: &[MapfInstance]) -> Outcome {
    let cfg = mapf_config();
    let mut violations = Vec::new();
    for (k, inst) in suite.iter().enumerate() {
        match ecbs(&inst.map, &inst.agents, ECBS_OMEGA, &cfg) {
            Ok(sol) => {
                let collisions = detect_conflicts(&sol.paths).iter().filter(|c| c.is_collision()).count();
                if sol.sum_of_costs() > ECBS_OMEGA * inst.optimum as f64 || collisions > 0 {
                    violations.push(format!("#{k}: cost {} collisions {collisions}", sol.sum_of_costs()));
                }
            }
            Err(e) => violations.push(format!("#{k}: {e}")),
        }
    }
    check(violations.is_empty(), format!("{} instances, omega {ECBS_OMEGA}, violations {violations:?}", suite.len()))
}

fn sipp_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let conn = Connectivity::Four;
    let (mut fixtures, mut cost_mismatch, mut more_expansions) = (0, 0, 0);
    let (mut sipp_total, mut astar_total) = (0u64, 0u64);
    while fixtures < 30 {
        let map = random_map(&mut rng, 8, 8, 0.1);
        let free = free_cells(&map);
        if free.len() < 10 {
            continue;
        }
        // a few obstacles random-walk through the map, then vanish
        let mut table = ReservationTable::new();
        for _ in 0..3 {
            let mut v = *free.choose(&mut rng).unwrap();
            for t in 0..rng.gen_range(8..16) {
                table.reserve(v, t);
                let next: Vec<GridIndex> = map.neighbors(v, conn).unwrap().into_iter().map(|(n, _)| n).collect();
                if let Some(&n) = next.choose(&mut rng) {
                    v = n;
                }
            }
        }
        let s = *free.choose(&mut rng).unwrap();
        let goal = *free.choose(&mut rng).unwrap();
        if table.is_reserved(s, 0) {
            continue;
        }
        let agent = Agent::new(s, goal);
        let (p, sipp_exp) = sipp_plan(&map, conn, agent, &table, 60);
        let h = DistanceTable::new(&map, goal, conn);
        let (q, astar_exp) = space_time_astar(&map, conn, agent, &h, &table, 60);
        let (Some(p), Some(q)) = (p, q) else {
            continue;
        };
        fixtures += 1;
        sipp_total += sipp_exp;
        astar_total += astar_exp;
        if path_cost(&p) != path_cost(&q) {
            cost_mismatch += 1;
        }
        if sipp_exp > astar_exp {
            more_expansions += 1;
        }
    }
    check(
        cost_mismatch == 0 && more_expansions == 0,
        format!(
            "{fixtures} fixtures, {cost_mismatch} cost mismatches, {more_expansions} with more SIPP expansions \
             (total {sipp_total} vs {astar_total})"
        ),
    )
}

fn ellipse_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let roi = 5.0;
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let r = rng.gen_range(0.1..2.0);
        let c = WorldPoint::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let theta = rng.gen_range(-PI..PI);
        let o = DynamicObstacle::new(format!("e{i}"), c, r, r, theta, (0.0, 0.0)).unwrap();
        let angle: f64 = rng.gen_range(-PI..PI);
        let dist = rng.gen_range(0.0..r + roi);
        let p = WorldPoint::new(c.x + dist * angle.cos(), c.y + dist * angle.sin());
        let diff = (ellipse_clearance(&o, p, roi, LAMBDA_STEP) - circle_clearance(&o, p).max(0.0)).abs();
        worst = worst.max(diff);
    }
    check(worst <= LAMBDA_STEP + 1e-12, format!("1000 points, max deviation {worst:.4} (limit {LAMBDA_STEP})"))
}

fn waiting_corridor() -> Outcome {
    let s = load("corridor_wait");
    let agent = &s.agents[0];
    let field = StaticRiskField::build(&s.map, s.sim.planner.risk);
    let planned = Planner::new(&s.map, &field, &s.obstacles, s.sim.planner)
        .plan(agent.start, agent.goal)
        .map_err(|e| format!("plan failed: {e}"))?;
    let report = run(&s, PlannerKind::Aspt).map_err(|e| e.to_string())?;
    let executed = &report.trajectories[0];
    let cart = s.obstacles.as_slice()[0].clone();
    let end = executed.end_time().max(20);
    let mut shared = Vec::new();
    for t in 0..=end {
        let p = cart.position_at(t as f64, s.sim.planner.dt);
        let cell = s.map.world_to_grid(p).expect("cart stays on the map");
        if cell == executed.position_at(t) {
            shared.push(t);
        }
    }
    check(
        planned.waits() >= 1 && shared.is_empty() && report.agents[0].success,
        format!("planned waits {}, shared cell-ticks {shared:?}, arrived {}", planned.waits(), report.agents[0].success),
    )
}

fn gap_selection() -> Outcome {
    let s = load("gap");
    let agent = &s.agents[0];
    let field = StaticRiskField::build(&s.map, s.sim.planner.risk);
    let path = Planner::new(&s.map, &field, &s.obstacles, s.sim.planner)
        .plan(agent.start, agent.goal)
        .map_err(|e| format!("plan failed: {e}"))?;
    // the wall row and its two openings
    let wall_y = 10;
    let crossing: Vec<usize> = path.cells().iter().filter(|c| c.y == wall_y).map(|c| c.x).collect();
    let wide = crossing.iter().all(|x| (4..=8).contains(x)) && !crossing.is_empty();
    let shortest = dijkstra_oracle(&s.map, agent.start, agent.goal).map(|(a, b)| a as f64 + b as f64 * SQRT_2);
    let length = path.length_cells();
    check(
        wide && shortest.is_some_and(|d| length > d),
        format!("crosses the wall at x = {crossing:?}, length {length:.2} vs shortest {:.2}", shortest.unwrap_or(f64::NAN)),
    )
}

fn random_conflict_freedom() -> Outcome {
    let params = RandomParams::default();
    let mut bad = Vec::new();
    let mut arrived = 0;
    let mut agents = 0;
    for seed in 0..100 {
        let s = random_scenario(seed, &params).resolve(Path::new(".")).map_err(|e| e.to_string())?;
        let report = run(&s, PlannerKind::Aspt).map_err(|e| e.to_string())?;
        let collisions = report
            .conflicts
            .iter()
            .filter(|c| matches!(c.kind, ConflictKind::Vertex | ConflictKind::Edge | ConflictKind::Swap))
            .count();
        if collisions > 0 {
            bad.push(seed);
        }
        arrived += report.successes();
        agents += report.agents.len();
    }
    check(bad.is_empty(), format!("100 scenarios, seeds with conflicts {bad:?}, {arrived}/{agents} agents arrived"))
}

fn house_trend() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for name in ["house_cw", "house_ccw"] {
        let s = load(name);
        let aspt = run(&s, PlannerKind::Aspt).map_err(|e| e.to_string())?;
        ok &= aspt.successes() == s.agents.len() && aspt.collision_count() == 0;
        let mut ratios = Vec::new();
        for p in [PlannerKind::Cbs, PlannerKind::Ecbs, PlannerKind::Sipp] {
            let r = run(&s, p).map_err(|e| e.to_string())?;
            let ratio = aspt.total_length_m / r.total_length_m;
            ok &= r.status.is_ok() && r.successes() == s.agents.len() && (1.0..=HOUSE_RATIO_MAX).contains(&ratio);
            ratios.push(format!("{p} {:.2} m ratio {ratio:.3}", r.total_length_m));
        }
        lines.push(format!("{name}: aspt {:.2} m, {}", aspt.total_length_m, ratios.join(", ")));
    }
    check(ok, lines.join("; "))
}

fn watchdog() -> Outcome {
    let s = load("watchdog_loop");
    let agent = &s.agents[0];
    let cfg = s.sim.planner;
    let field = StaticRiskField::build(&s.map, cfg.risk);
    let started = Instant::now();
    let result = Planner::new(&s.map, &field, &s.obstacles, cfg).plan(agent.start, agent.goal);
    let elapsed = started.elapsed();
    let budget = Duration::from_secs_f64(cfg.watchdog_max_seconds) + WATCHDOG_SLACK;
    match result {
        Err(PlanError::WatchdogTimeout { expansions, seconds }) => check(
            expansions <= cfg.watchdog_max_expansions && elapsed <= budget,
            format!(
                "timed out after {expansions} expansions / {seconds:.3} s (budget {} expansions, {} s)",
                cfg.watchdog_max_expansions, cfg.watchdog_max_seconds
            ),
        ),
        other => Err(format!("expected a watchdog timeout, got {other:?}")),
    }
}

fn main() {
    let suite = mapf_suite();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("risk formula point checks", Box::new(risk_point_checks)),
        ("static field vs brute-force scan", Box::new(static_field_oracle)),
        ("degenerate A*+T vs Dijkstra", Box::new(degenerate_astar_oracle)),
        ("CBS vs joint-state optimum", Box::new(|| cbs_optimality(&suite))),
        ("ECBS omega=2 bound", Box::new(|| ecbs_bound(&suite))),
        ("SIPP vs space-time A*", Box::new(sipp_equivalence)),
        ("ellipse vs circle clearance", Box::new(ellipse_consistency)),
        ("waiting in a crossed corridor", Box::new(waiting_corridor)),
        ("wide gap over narrow gap", Box::new(gap_selection)),
        ("random multi-agent conflict freedom", Box::new(random_conflict_freedom)),
        ("house path-length trend", Box::new(house_trend)),
        ("watchdog on a looping obstacle", Box::new(watchdog)),
    ];
    let mut failed = 0;
    for (name, criterion) in &criteria {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(criterion)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{secs:.2} s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} [{secs:.2} s]");
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
