//! Grid A* over the walkability grid.
//!
//! Movement is 4-connected with unit cost and a Manhattan heuristic, so the
//! returned cell count always equals the breadth-first shortest length.
//! Neighbors are expanded in the order N, E, S, W (N is increasing `y`,
//! i.e. increasing row) and nodes with equal f-score leave the open set in
//! insertion order.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::spec::{CellIndex, Position, WorldSpec};
use super::WorldError;

/// N, E, S, W as (d_row, d_col).
pub const NEIGHBORS: [(isize, isize); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

/// A route through the grid plus the polyline the avatar follows.
///
/// The polyline starts at the exact start position, passes through the
/// centers of `cells[1..]`, and ends at the requested target (or the center
/// of the snapped cell when the target itself was not walkable).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub cells: Vec<CellIndex>,
    pub waypoints: Vec<Position>,
    pub total_length_m: f64,
    pub progress_m: f64,
}

impl Path {
    pub fn remaining_m(&self) -> f64 {
        (self.total_length_m - self.progress_m).max(0.0)
    }

    pub fn destination(&self) -> Position {
        *self.waypoints.last().expect("path has at least one waypoint")
    }

    /// Point on the polyline at `distance` meters from the start, with the
    /// heading of the segment it falls on.
    pub fn point_at(&self, distance: f64) -> (Position, Option<f64>) {
        let mut left = distance.max(0.0);
        for pair in self.waypoints.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let seg = a.distance(&b);
            if seg == 0.0 {
                continue;
            }
            let heading = (b.y - a.y).atan2(b.x - a.x);
            if left <= seg {
                let t = left / seg;
                return (
                    Position::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t),
                    Some(heading),
                );
            }
            left -= seg;
        }
        (self.destination(), None)
    }
}

fn step(world: &WorldSpec, c: CellIndex, (dr, dc): (isize, isize)) -> Option<CellIndex> {
    let row = c.row.checked_add_signed(dr)?;
    let col = c.col.checked_add_signed(dc)?;
    let next = CellIndex::new(row, col);
    world.is_walkable(next).then_some(next)
}

fn manhattan(a: CellIndex, b: CellIndex) -> usize {
    a.row.abs_diff(b.row) + a.col.abs_diff(b.col)
}

/// Shortest 4-connected cell sequence between two walkable cells.
pub fn find_cells(
    world: &WorldSpec,
    start: CellIndex,
    goal: CellIndex,
) -> Result<Vec<CellIndex>, WorldError> {
    if !world.is_walkable(start) {
        return Err(WorldError::Unwalkable(format!("start cell ({}, {})", start.row, start.col)));
    }
    if !world.is_walkable(goal) {
        return Err(WorldError::NoPath);
    }
    let cols = world.cols();
    let idx = |c: CellIndex| c.row * cols + c.col;
    let n = world.rows() * cols;
    let mut g = vec![usize::MAX; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let mut order = 0u64;

    g[idx(start)] = 0;
    open.push(Reverse((manhattan(start, goal), order, start.row, start.col)));
    while let Some(Reverse((_, _, row, col))) = open.pop() {
        let cur = CellIndex::new(row, col);
        let ci = idx(cur);
        if closed[ci] {
            continue;
        }
        closed[ci] = true;
        if cur == goal {
            let mut cells = vec![cur];
            let mut at = ci;
            while parent[at] != usize::MAX {
                at = parent[at];
                cells.push(CellIndex::new(at / cols, at % cols));
            }
            cells.reverse();
            return Ok(cells);
        }
        for d in NEIGHBORS {
            let Some(next) = step(world, cur, d) else { continue };
            let ni = idx(next);
            let cand = g[ci] + 1;
            if !closed[ni] && cand < g[ni] {
                g[ni] = cand;
                parent[ni] = ci;
                order += 1;
                open.push(Reverse((cand + manhattan(next, goal), order, next.row, next.col)));
            }
        }
    }
    Err(WorldError::NoPath)
}

/// Plans a path from `from` to `to`, snapping an unwalkable destination to
/// the nearest walkable cell.
pub fn find_path(world: &WorldSpec, from: Position, to: Position) -> Result<Path, WorldError> {
    let start = world.pos_to_cell(from)?;
    if !world.is_walkable(start) {
        return Err(WorldError::Unwalkable(format!("({}, {})", from.x, from.y)));
    }
    let requested = world.pos_to_cell(to)?;
    let goal = world.nearest_walkable(requested).ok_or(WorldError::NoPath)?;
    let target = if goal == requested { to } else { world.cell_to_pos(goal)? };

    let cells = find_cells(world, start, goal)?;
    let mut waypoints = Vec::with_capacity(cells.len() + 1);
    waypoints.push(from);
    for c in &cells[1..] {
        waypoints.push(world.cell_to_pos(*c)?);
    }
    waypoints.push(target);
    let total_length_m = waypoints.windows(2).map(|w| w[0].distance(&w[1])).sum();
    Ok(Path {
        cells,
        waypoints,
        total_length_m,
        progress_m: 0.0,
    })
}
