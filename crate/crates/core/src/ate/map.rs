use serde::{Deserialize, Serialize};

use crate::geom::{Rect, Vec3};
use crate::world::{cast_normalized, HitKind, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellState {
    Unknown,
    Free,
    /// The ground under the cell is hidden by something solid.
    OccupiedBelow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    High,
    Low,
}

/// 2D exploration map over the scene footprint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OccupancyMap2D {
    pub cell: f64,
    pub nx: usize,
    pub ny: usize,
    pub regime: Regime,
    cells: Vec<CellState>,
}

pub type Cell = (usize, usize);

impl OccupancyMap2D {
    pub fn new(extent: &Vec3, cell: f64, regime: Regime) -> Self {
        let nx = ((extent.x / cell).ceil() as usize).max(1);
        let ny = ((extent.y / cell).ceil() as usize).max(1);
        Self { cell, nx, ny, regime, cells: vec![CellState::Unknown; nx * ny] }
    }

    pub fn get(&self, c: Cell) -> CellState {
        self.cells[c.1 * self.nx + c.0]
    }

    /// Free evidence overrides an earlier occluded reading; nothing reverts to unknown.
    pub fn mark(&mut self, c: Cell, state: CellState) {
        let slot = &mut self.cells[c.1 * self.nx + c.0];
        match (*slot, state) {
            (_, CellState::Unknown) | (CellState::Free, _) => {}
            _ => *slot = state,
        }
    }

    /// Forces a cell to occupied, used when a target turns out unreachable.
    pub fn block(&mut self, c: Cell) {
        self.cells[c.1 * self.nx + c.0] = CellState::OccupiedBelow;
    }

    pub fn center(&self, c: Cell) -> (f64, f64) {
        ((c.0 as f64 + 0.5) * self.cell, (c.1 as f64 + 0.5) * self.cell)
    }

    pub fn cell_of(&self, x: f64, y: f64) -> Option<Cell> {
        if !(x >= 0.0 && y >= 0.0) {
            return None;
        }
        let i = (x / self.cell).floor() as usize;
        let j = (y / self.cell).floor() as usize;
        let edge = |v: f64, i: usize, n: usize| if i == n && v <= n as f64 * self.cell { Some(n - 1) } else { (i < n).then_some(i) };
        Some((edge(x, i, self.nx)?, edge(y, j, self.ny)?))
    }

    pub fn known_count(&self) -> usize {
        self.cells.iter().filter(|s| **s != CellState::Unknown).count()
    }

    pub fn count(&self, state: CellState) -> usize {
        self.cells.iter().filter(|s| **s == state).count()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Cells whose centers fall inside `r`.
    pub fn cells_in(&self, r: &Rect) -> impl Iterator<Item = Cell> + '_ {
        let lo_i = ((r.x_min / self.cell - 0.5).ceil().max(0.0)) as usize;
        let lo_j = ((r.y_min / self.cell - 0.5).ceil().max(0.0)) as usize;
        let hi_i = ((r.x_max / self.cell - 0.5).floor()).min(self.nx as f64 - 1.0);
        let hi_j = ((r.y_max / self.cell - 0.5).floor()).min(self.ny as f64 - 1.0);
        let (hi_i, hi_j) = if hi_i < 0.0 || hi_j < 0.0 { (0, 0) } else { (hi_i as usize + 1, hi_j as usize + 1) };
        (lo_j..hi_j).flat_map(move |j| (lo_i..hi_i).map(move |i| (i, j)))
    }

    /// Marks every cell of the ground footprint by testing the sight line
    /// from `eye` to the ground under the cell center. A line stopped by an
    /// obstacle inside the cell's own column marks it occupied; one stopped
    /// elsewhere leaves it unknown. Returns `(cells, occluded)` in the footprint.
    pub fn update(&mut self, world: &World, eye: &Vec3, footprint: &Rect) -> (usize, usize) {
        let mut total = 0;
        let mut occluded = 0;
        let cells: Vec<Cell> = self.cells_in(footprint).collect();
        for c in cells {
            let (x, y) = self.center(c);
            let target = Vec3::new(x, y, 0.0);
            let d = target - eye;
            let len = d.norm();
            total += 1;
            if len == 0.0 {
                self.mark(c, CellState::Free);
                continue;
            }
            let dir = d / len;
            let hit = cast_normalized(world, eye, &dir, len + 1e-6);
            if hit.kind == HitKind::Obstacle && hit.distance < len - 1e-6 {
                occluded += 1;
                let p = eye + dir * hit.distance;
                if self.cell_of(p.x, p.y) == Some(c) {
                    self.mark(c, CellState::OccupiedBelow);
                }
            } else {
                self.mark(c, CellState::Free);
            }
        }
        (total, occluded)
    }

    /// Marks the unknown 4-neighbors of `c` occupied. Used when a visited
    /// frontier still borders cells that cannot be seen from above it.
    pub fn close_around(&mut self, c: Cell) {
        let (i, j) = (c.0 as i64, c.1 as i64);
        for (a, b) in [(i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)] {
            if a >= 0 && b >= 0 && (a as usize) < self.nx && (b as usize) < self.ny {
                let n = (a as usize, b as usize);
                if self.get(n) == CellState::Unknown {
                    self.block(n);
                }
            }
        }
    }

    /// Free cell with an unknown 4-neighbor, the neighbor inside `region` if given.
    pub fn is_frontier(&self, c: Cell, region: Option<&Rect>) -> bool {
        if self.get(c) != CellState::Free {
            return false;
        }
        let (i, j) = (c.0 as i64, c.1 as i64);
        [(i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)].into_iter().any(|(a, b)| {
            if a < 0 || b < 0 || a >= self.nx as i64 || b >= self.ny as i64 {
                return false;
            }
            let n = (a as usize, b as usize);
            if let Some(r) = region {
                let (x, y) = self.center(n);
                if !r.contains(x, y) {
                    return false;
                }
            }
            self.get(n) == CellState::Unknown
        })
    }

    fn nearest_frontier<I: Iterator<Item = Cell>>(&self, cells: I, pose: &Vec3, region: Option<&Rect>) -> Option<Cell> {
        let mut best: Option<(f64, Cell)> = None;
        for c in cells {
            if !self.is_frontier(c, region) {
                continue;
            }
            let (x, y) = self.center(c);
            let d = (x - pose.x).hypot(y - pose.y);
            let better = match best {
                None => true,
                Some((bd, bc)) => d < bd || (d == bd && c < bc),
            };
            if better {
                best = Some((d, c));
            }
        }
        best.map(|b| b.1)
    }
}

/// Nearest frontier to `pose`, or `None` when exploration is done.
/// A frontier is a free cell 4-adjacent to an unknown cell; ties go to
/// the lexicographically smallest cell.
pub fn select_frontier(map: &OccupancyMap2D, pose: &Vec3) -> Option<Cell> {
    let all = (0..map.nx).flat_map(|i| (0..map.ny).map(move |j| (i, j)));
    map.nearest_frontier(all, pose, None)
}

/// Like [`select_frontier`], but both the frontier and its unknown
/// neighbor must lie inside `region`.
pub fn select_frontier_in(map: &OccupancyMap2D, pose: &Vec3, region: &Rect) -> Option<Cell> {
    map.nearest_frontier(map.cells_in(region), pose, Some(region))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map() -> OccupancyMap2D {
        OccupancyMap2D::new(&Vec3::new(10.0, 10.0, 10.0), 1.0, Regime::Low)
    }

    #[test]
    fn seed_cell_is_the_only_frontier() {
        let mut m = map();
        m.mark((4, 4), CellState::Free);
        assert_eq!(select_frontier(&m, &Vec3::new(0.5, 0.5, 0.0)), Some((4, 4)));
    }

    #[test]
    fn explored_map_is_done() {
        let mut m = map();
        for i in 0..10 {
            for j in 0..10 {
                m.mark((i, j), CellState::Free);
            }
        }
        assert_eq!(select_frontier(&m, &Vec3::zeros()), None);
    }

    #[test]
    fn equidistant_frontiers_pick_lexicographic_smallest() {
        let mut m = map();
        m.mark((3, 5), CellState::Free);
        m.mark((5, 3), CellState::Free);
        m.mark((5, 5), CellState::Free);
        // (4.5, 4.5) is sqrt(2) from every seed center
        let pose = Vec3::new(4.5, 4.5, 0.0);
        assert_eq!(select_frontier(&m, &pose), Some((3, 5)));
    }

    #[test]
    fn occupied_never_overrides_free() {
        let mut m = map();
        m.mark((1, 1), CellState::Free);
        m.mark((1, 1), CellState::OccupiedBelow);
        assert_eq!(m.get((1, 1)), CellState::Free);
        m.mark((2, 2), CellState::OccupiedBelow);
        m.mark((2, 2), CellState::Free);
        assert_eq!(m.get((2, 2)), CellState::Free);
    }

    #[test]
    fn region_restricts_frontiers() {
        let mut m = map();
        for i in 0..5 {
            for j in 0..10 {
                m.mark((i, j), CellState::Free);
            }
        }
        let region = Rect::new(0.0, 0.0, 5.0, 10.0);
        assert_eq!(select_frontier_in(&m, &Vec3::zeros(), &region), None);
        assert!(select_frontier(&m, &Vec3::zeros()).is_some());
        assert_eq!(m.cells_in(&region).count(), 50);
    }
}
