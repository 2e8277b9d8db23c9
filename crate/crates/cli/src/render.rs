//! SVG snapshots of a scenario: risk field, obstacles, agent paths.

use std::fmt::Write;

use aspt_core::{GridIndex, StaticRiskField, Timestep, WorldPoint};

use crate::runner::RunReport;
use crate::scenario::LoadedScenario;

/// Pixels per cell.
const CELL_PX: f64 = 16.0;

const AGENT_COLORS: [&str; 8] = ["#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Shortest decimal form with at most four fractional digits. Keeps output
/// byte-stable and readable.
fn num(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn ellipse(out: &mut String, c: WorldPoint, major: f64, minor: f64, theta: f64, attrs: &str) {
    let (cx, cy) = (num(c.x), num(c.y));
    let deg = num(theta.to_degrees());
    let _ = writeln!(
        out,
        r#"    <ellipse cx="{cx}" cy="{cy}" rx="{}" ry="{}" transform="rotate({deg} {cx} {cy})" {attrs}/>"#,
        num(major),
        num(minor)
    );
}

/// Render the scenario at `tick`. Paths and agent poses come from `report`
/// when one is given. Coordinates inside the drawing are world meters with
/// y pointing up.
pub fn render_svg(scenario: &LoadedScenario, report: Option<&RunReport>, tick: Timestep) -> String {
    let map = &scenario.map;
    let res = map.resolution();
    let o = map.origin();
    let k = CELL_PX / res;
    let top = o.y + map.height() as f64 * res;
    let (w_px, h_px) = (map.width() as f64 * CELL_PX, map.height() as f64 * CELL_PX);
    let stroke = num(res * 0.15);

    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = num(w_px),
        h = num(h_px)
    );
    let _ = writeln!(out, "  <title>{} at tick {tick}</title>", escape(&scenario.name));
    let _ = writeln!(out, r#"  <g transform="translate({} {}) scale({} {})">"#, num(-k * o.x), num(k * top), num(k), num(-k));

    let field = StaticRiskField::build(map, scenario.sim.planner.risk);
    out.push_str("   <g id=\"risk\" shape-rendering=\"crispEdges\">\n");
    for v in map.indices() {
        let g = StaticRiskField::gray_level(field.combined(v));
        let _ = writeln!(
            out,
            r#"    <rect x="{}" y="{}" width="{r}" height="{r}" fill="rgb({g},{g},{g})"/>"#,
            num(o.x + v.x as f64 * res),
            num(o.y + v.y as f64 * res),
            r = num(res)
        );
    }
    out.push_str("   </g>\n");

    out.push_str("   <g id=\"obstacles\" fill=\"#7f7f7f\" fill-opacity=\"0.6\" stroke=\"#000000\">\n");
    let dt = scenario.sim.planner.dt;
    for ob in scenario.obstacles.iter() {
        let p = ob.position_at(tick as f64, dt);
        ellipse(&mut out, p, ob.major, ob.minor, ob.theta, &format!(r#"stroke-width="{stroke}""#));
    }
    out.push_str("   </g>\n");

    out.push_str("   <g id=\"agents\" fill=\"none\">\n");
    for (i, agent) in scenario.agents.iter().enumerate() {
        let color = AGENT_COLORS[i % AGENT_COLORS.len()];
        let center = |v: GridIndex| map.grid_to_world(v);
        if let Some(path) = report.and_then(|r| r.trajectories.get(i)) {
            let mut points = String::new();
            let mut last = None;
            for &c in path.cells() {
                if last == Some(c) {
                    continue;
                }
                last = Some(c);
                let p = center(c);
                if !points.is_empty() {
                    points.push(' ');
                }
                let _ = write!(points, "{},{}", num(p.x), num(p.y));
            }
            let _ = writeln!(
                out,
                r#"    <polyline id="path-{}" points="{points}" stroke="{color}" stroke-width="{stroke}" stroke-linejoin="round"/>"#,
                escape(&agent.id)
            );
            let f = agent.footprint;
            let pose = center(path.position_at(tick));
            ellipse(&mut out, pose, f.major, f.minor, f.theta, &format!(r#"fill="{color}" fill-opacity="0.5""#));
        }
        let s = center(agent.start);
        let _ = writeln!(
            out,
            r#"    <circle cx="{}" cy="{}" r="{}" stroke="{color}" stroke-width="{stroke}"/>"#,
            num(s.x),
            num(s.y),
            num(res * 0.3)
        );
        let g = center(agent.goal);
        let half = res * 0.3;
        let _ = writeln!(
            out,
            r#"    <rect x="{}" y="{}" width="{w}" height="{w}" stroke="{color}" stroke-width="{stroke}"/>"#,
            num(g.x - half),
            num(g.y - half),
            w = num(2.0 * half)
        );
    }
    out.push_str("   </g>\n  </g>\n</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
