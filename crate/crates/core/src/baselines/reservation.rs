//! Space-time reservations left behind by already planned agents.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::grid::GridIndex;
use crate::path::{TimedPath, Timestep};

use super::st_astar::Constraints;

#[derive(Debug, Clone, Default)]
pub struct ReservationTable {
    cells: HashMap<GridIndex, BTreeSet<Timestep>>,
    /// Cell reserved from this time on, forever.
    forever: HashMap<GridIndex, Timestep>,
    /// Moves `(from, to, arrival)`.
    moves: HashSet<(GridIndex, GridIndex, Timestep)>,
    last: Timestep,
}

impl ReservationTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reserve(&mut self, cell: GridIndex, t: Timestep) {
        self.cells.entry(cell).or_default().insert(t);
        self.last = self.last.max(t);
    }

    pub fn reserve_forever(&mut self, cell: GridIndex, from: Timestep) {
        let e = self.forever.entry(cell).or_insert(from);
        *e = (*e).min(from);
        self.last = self.last.max(from);
    }

    /// Reserve every step of `path`, its moves and its final cell forever.
    pub fn reserve_path(&mut self, path: &TimedPath) {
        let mut prev: Option<GridIndex> = None;
        for (c, t) in path.steps() {
            self.reserve(c, t);
            if let Some(p) = prev.filter(|&p| p != c) {
                self.moves.insert((p, c, t));
            }
            prev = Some(c);
        }
        self.reserve_forever(path.last(), path.end_time());
    }

    pub fn is_reserved(&self, cell: GridIndex, t: Timestep) -> bool {
        self.forever.get(&cell).is_some_and(|&f| t >= f)
            || self.cells.get(&cell).is_some_and(|s| s.contains(&t))
    }

    /// Reserved times of `cell` up to the start of any permanent reservation.
    pub(crate) fn blocked_times(&self, cell: GridIndex) -> (Vec<Timestep>, Option<Timestep>) {
        let forever = self.forever.get(&cell).copied();
        let times = self
            .cells
            .get(&cell)
            .map(|s| s.iter().copied().take_while(|&t| forever.is_none_or(|f| t < f)).collect())
            .unwrap_or_default();
        (times, forever)
    }

    /// A reserved move runs against `from -> to` arriving at `t`: an exchange,
    /// or a diagonal crossing this one.
    pub fn move_blocked(&self, from: GridIndex, to: GridIndex, t: Timestep) -> bool {
        if self.moves.contains(&(to, from, t)) {
            return true;
        }
        if from.x != to.x && from.y != to.y {
            let a = GridIndex::new(from.x, to.y);
            let b = GridIndex::new(to.x, from.y);
            return self.moves.contains(&(a, b, t)) || self.moves.contains(&(b, a, t));
        }
        false
    }

    pub fn last_time(&self) -> Timestep {
        self.last
    }
}

impl Constraints for ReservationTable {
    fn vertex_blocked(&self, cell: GridIndex, t: Timestep) -> bool {
        self.is_reserved(cell, t)
    }

    fn edge_blocked(&self, from: GridIndex, to: GridIndex, t: Timestep) -> bool {
        self.move_blocked(from, to, t)
    }

    fn rest_from(&self, cell: GridIndex) -> Option<Timestep> {
        if self.forever.contains_key(&cell) {
            return None;
        }
        Some(self.cells.get(&cell).and_then(|s| s.last()).map_or(0, |&t| t + 1))
    }

    fn last_change(&self) -> Timestep {
        self.last
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_reservations() {
        let g = GridIndex::new;
        let mut rt = ReservationTable::new();
        rt.reserve_path(&TimedPath::new(0, vec![g(0, 0), g(1, 0), g(1, 0), g(1, 1)], 0.0));
        assert!(rt.is_reserved(g(1, 0), 2));
        assert!(!rt.is_reserved(g(1, 0), 3));
        assert!(rt.is_reserved(g(1, 1), 100));
        assert!(rt.move_blocked(g(1, 0), g(0, 0), 1));
        assert!(!rt.move_blocked(g(1, 0), g(0, 0), 2));
        assert_eq!(rt.rest_from(g(1, 0)), Some(3));
        assert_eq!(rt.rest_from(g(1, 1)), None);
        assert_eq!(rt.blocked_times(g(1, 1)), (vec![], Some(3)));
    }

    #[test]
    fn crossing_diagonal_is_blocked() {
        let g = GridIndex::new;
        let mut rt = ReservationTable::new();
        rt.reserve_path(&TimedPath::new(0, vec![g(0, 0), g(1, 1)], 0.0));
        assert!(rt.move_blocked(g(1, 0), g(0, 1), 1));
        assert!(!rt.move_blocked(g(1, 0), g(2, 1), 1));
    }
}
