use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use aspt_cli::random::{random_scenario, RandomParams};
use aspt_cli::render::render_svg;
use aspt_cli::{load_scenario, run, run_bench, to_json, write_csv, BenchItem, CsvRow, Overrides, PlannerKind};
use aspt_core::{Connectivity, PlanningMode, StaticRiskField};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "aspt", version, about = "Risk-aware multi-agent path planning on occupancy grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one planner on a scenario and write its report.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = "aspt")]
        planner: PlannerKind,
        /// Directory for report.csv and report.json.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for one SVG per executed tick.
        #[arg(long)]
        frames: Option<PathBuf>,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Run every (scenario, planner, repetition) and emit a CSV table.
    Bench {
        scenarios: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "aspt,cbs,ecbs,sipp")]
        planners: Vec<PlannerKind>,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        /// Also include this many generated scenarios, seeded from --seed.
        #[arg(long, default_value_t = 0)]
        random: usize,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Draw a scenario as SVG, with the planner's paths.
    Render {
        scenario: PathBuf,
        #[arg(long, default_value = "aspt")]
        planner: PlannerKind,
        #[arg(long, default_value_t = 0)]
        tick: u32,
        #[arg(long)]
        out: PathBuf,
        /// Draw only the map, obstacles and endpoints.
        #[arg(long)]
        no_paths: bool,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Export the static risk field as a PGM image.
    Riskmap {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ConnArg {
    #[value(name = "4")]
    Four,
    #[value(name = "8")]
    Eight,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Sequential,
    Concurrent,
}

#[derive(Args, Clone)]
struct OverrideArgs {
    #[arg(long)]
    connectivity: Option<ConnArg>,
    /// Region of interest, cells.
    #[arg(long)]
    roi: Option<f64>,
    /// Critical band, cells.
    #[arg(long = "roi-crit")]
    roi_crit: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long = "replan-interval")]
    replan_interval: Option<u32>,
    #[arg(long)]
    horizon: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mode: Option<ModeArg>,
}

impl OverrideArgs {
    fn to_overrides(&self) -> Overrides {
        Overrides {
            connectivity: self.connectivity.map(|c| match c {
                ConnArg::Four => Connectivity::Four,
                ConnArg::Eight => Connectivity::Eight,
            }),
            roi: self.roi,
            roi_crit: self.roi_crit,
            omega: self.omega,
            replan_interval: self.replan_interval,
            horizon: self.horizon,
            seed: self.seed,
            mode: self.mode.map(|m| match m {
                ModeArg::Sequential => PlanningMode::Sequential,
                ModeArg::Concurrent => PlanningMode::Concurrent,
            }),
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario, planner, out, frames, overrides } => {
            let s = load_scenario(&scenario, &overrides.to_overrides())?;
            let report = run(&s, planner)?;
            let row = CsvRow::from_report(&report, 0);
            let mut csv = Vec::new();
            write_csv(&mut csv, std::slice::from_ref(&row))?;
            if let Some(dir) = out {
                write_file(&dir.join("report.csv"), &csv)?;
                write_file(&dir.join("report.json"), to_json(&report).as_bytes())?;
            }
            if let Some(dir) = frames {
                let last = report.trajectories.iter().map(|p| p.end_time()).max().unwrap_or(0);
                for tick in 0..=last {
                    let svg = render_svg(&s, Some(&report), tick);
                    write_file(&dir.join(format!("frame_{tick:05}.svg")), svg.as_bytes())?;
                }
            }
            io::stdout().write_all(&csv)?;
        }
        Command::Bench { scenarios, planners, reps, random, out, overrides } => {
            let o = overrides.to_overrides();
            let mut items: Vec<BenchItem> = scenarios.into_iter().map(BenchItem::File).collect();
            let base = o.seed.unwrap_or(0);
            for k in 0..random as u64 {
                let mut doc = random_scenario(base + k, &RandomParams::default());
                doc.apply(&o);
                items.push(BenchItem::Loaded(Box::new(doc.resolve(Path::new("."))?)));
            }
            let rows = run_bench(&items, &planners, reps, &o, |r| {
                eprintln!("{} {} rep {}: {}", r.scenario, r.planner, r.rep, r.status);
            });
            let mut csv = Vec::new();
            write_csv(&mut csv, &rows)?;
            match out {
                Some(path) => write_file(&path, &csv)?,
                None => io::stdout().write_all(&csv)?,
            }
        }
        Command::Render { scenario, planner, tick, out, no_paths, overrides } => {
            let s = load_scenario(&scenario, &overrides.to_overrides())?;
            let report = if no_paths { None } else { Some(run(&s, planner)?) };
            write_file(&out, render_svg(&s, report.as_ref(), tick).as_bytes())?;
        }
        Command::Riskmap { scenario, out, overrides } => {
            let s = load_scenario(&scenario, &overrides.to_overrides())?;
            let field = StaticRiskField::build(&s.map, s.sim.planner.risk);
            write_file(&out, &field.to_pgm())?;
        }
    }
    Ok(())
}
