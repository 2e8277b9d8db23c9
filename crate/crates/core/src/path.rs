use serde::{Deserialize, Serialize};

use crate::grid::{Connectivity, GridIndex};

/// Discrete simulation / planning time.
pub type Timestep = u32;

/// A path with one cell per timestep. Repeated consecutive cells are waits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedPath {
    start_time: Timestep,
    cells: Vec<GridIndex>,
    cost: f64,
}

impl TimedPath {
    /// Panics on an empty cell list.
    pub fn new(start_time: Timestep, cells: Vec<GridIndex>, cost: f64) -> Self {
        assert!(!cells.is_empty(), "a timed path holds at least one cell");
        Self { start_time, cells, cost }
    }

    /// A path that stays at `cell`.
    pub fn stationary(start_time: Timestep, cell: GridIndex) -> Self {
        Self::new(start_time, vec![cell], 0.0)
    }

    pub fn start_time(&self) -> Timestep {
        self.start_time
    }

    /// Timestep of the final element.
    pub fn end_time(&self) -> Timestep {
        self.start_time + self.cells.len() as Timestep - 1
    }

    pub fn cells(&self) -> &[GridIndex] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn first(&self) -> GridIndex {
        self.cells[0]
    }

    pub fn last(&self) -> GridIndex {
        *self.cells.last().expect("non-empty")
    }

    /// `(cell, timestep)` pairs.
    pub fn steps(&self) -> impl Iterator<Item = (GridIndex, Timestep)> + '_ {
        self.cells.iter().enumerate().map(|(i, &c)| (c, self.start_time + i as Timestep))
    }

    /// Position at `t`, holding the first cell before the path starts and
    /// the last cell after it ends.
    pub fn position_at(&self, t: Timestep) -> GridIndex {
        let i = t.saturating_sub(self.start_time) as usize;
        self.cells[i.min(self.cells.len() - 1)]
    }

    /// Number of wait steps.
    pub fn waits(&self) -> usize {
        self.cells.windows(2).filter(|w| w[0] == w[1]).count()
    }

    /// Collapse waits: `(cell, arrival time, number of waits at that cell)`.
    pub fn vertices(&self) -> Vec<(GridIndex, Timestep, u32)> {
        let mut out: Vec<(GridIndex, Timestep, u32)> = Vec::new();
        for (c, t) in self.steps() {
            match out.last_mut() {
                Some(last) if last.0 == c => last.2 += 1,
                _ => out.push((c, t, 0)),
            }
        }
        out
    }

    /// Geometric length in cells.
    pub fn length_cells(&self) -> f64 {
        self.cells.windows(2).map(|w| w[0].distance(w[1])).fold(0.0, |a, d| a + d)
    }

    pub fn length_m(&self, resolution: f64) -> f64 {
        self.length_cells() * resolution
    }

    /// Every step is a wait or a single move under `connectivity`.
    pub fn is_continuous(&self, connectivity: Connectivity) -> bool {
        self.cells.windows(2).all(|w| w[0] == w[1] || w[0].is_adjacent(w[1], connectivity))
    }

    /// The part of the path from timestep `t` on (at least the final cell).
    pub fn tail_from(&self, t: Timestep) -> TimedPath {
        let i = (t.saturating_sub(self.start_time) as usize).min(self.cells.len() - 1);
        TimedPath::new(self.start_time + i as Timestep, self.cells[i..].to_vec(), f64::NAN)
    }

    /// Drop trailing waits at the final cell.
    pub fn trimmed(mut self) -> Self {
        while self.cells.len() > 1 && self.cells[self.cells.len() - 1] == self.cells[self.cells.len() - 2] {
            self.cells.pop();
        }
        self
    }

    pub(crate) fn with_cost(mut self, cost: f64) -> Self {
        self.cost = cost;
        self
    }
}
