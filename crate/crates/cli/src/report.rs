//! CSV and JSON output.

use std::io::Write;

use serde::Serialize;

use crate::runner::{RunReport, RunStatus};

/// Written in numeric columns of rows whose planner failed.
pub const FAILURE_MARKER: &str = "NA";

pub const CSV_HEADER: [&str; 9] =
    ["scenario", "planner", "rep", "status", "agents", "successes", "total_length_m", "plan_time_s", "conflicts"];

/// One line of a results table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsvRow {
    pub scenario: String,
    pub planner: String,
    pub rep: usize,
    pub status: String,
    pub agents: usize,
    pub successes: String,
    pub total_length_m: String,
    pub plan_time_s: String,
    pub conflicts: String,
}

impl CsvRow {
    pub fn from_report(report: &RunReport, rep: usize) -> Self {
        match &report.status {
            RunStatus::Ok => Self {
                scenario: report.scenario.clone(),
                planner: report.planner.to_string(),
                rep,
                status: "ok".into(),
                agents: report.agents.len(),
                successes: report.successes().to_string(),
                total_length_m: format!("{:.6}", report.total_length_m),
                plan_time_s: format!("{:.6}", report.plan_time_s),
                conflicts: report.collision_count().to_string(),
            },
            RunStatus::Failed(reason) => Self::failed(&report.scenario, &report.planner.to_string(), rep, report.agents.len(), reason),
        }
    }

    pub fn failed(scenario: &str, planner: &str, rep: usize, agents: usize, reason: &str) -> Self {
        let na = || FAILURE_MARKER.to_string();
        Self {
            scenario: scenario.into(),
            planner: planner.into(),
            rep,
            status: format!("failed: {reason}"),
            agents,
            successes: na(),
            total_length_m: na(),
            plan_time_s: na(),
            conflicts: na(),
        }
    }

    pub fn is_failed(&self) -> bool {
        self.status != "ok"
    }
}

/// Write `rows` with the fixed header. Quoting follows RFC 4180.
pub fn write_csv<W: Write>(out: W, rows: &[CsvRow]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Structured report: per-agent results, totals and conflicts.
pub fn to_json(report: &RunReport) -> String {
    #[derive(Serialize)]
    struct Doc<'a> {
        #[serde(flatten)]
        report: &'a RunReport,
        successes: usize,
        collisions: usize,
    }
    let doc = Doc { report, successes: report.successes(), collisions: report.collision_count() };
    serde_json::to_string_pretty(&doc).expect("report serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runner::{AgentReport, PlannerKind};

    fn report(status: RunStatus) -> RunReport {
        RunReport {
            scenario: "has,comma".into(),
            planner: PlannerKind::Sipp,
            status,
            resolution: 0.5,
            agents: vec![AgentReport {
                id: "a".into(),
                success: true,
                arrival_tick: Some(3),
                length_m: 1.5,
                plan_times_s: vec![],
            }],
            total_length_m: 1.5,
            plan_time_s: 0.25,
            max_plan_time_s: 0.25,
            mean_plan_time_s: 0.25,
            cost: 3.0,
            conflicts: vec![],
            trajectories: vec![],
        }
    }

    #[test]
    fn csv_quotes_and_marks_failures() {
        let rows = vec![
            CsvRow::from_report(&report(RunStatus::Ok), 0),
            CsvRow::from_report(&report(RunStatus::Failed("budget".into())), 1),
        ];
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER.join(","));
        assert_eq!(lines[1], "\"has,comma\",sipp,0,ok,1,1,1.500000,0.250000,0");
        assert_eq!(lines[2], "\"has,comma\",sipp,1,failed: budget,1,NA,NA,NA,NA");
    }

    #[test]
    fn json_carries_totals() {
        let v: serde_json::Value = serde_json::from_str(&to_json(&report(RunStatus::Ok))).unwrap();
        assert_eq!(v["planner"], "sipp");
        assert_eq!(v["successes"], 1);
        assert_eq!(v["agents"][0]["arrival_tick"], 3);
        assert_eq!(v["status"]["state"], "ok");
    }
}
