//! Static world description and the JSON world-file format.
//!
//! A world file stores the walkability grid as one string per row, `'#'`
//! for blocked and `'.'` for walkable. Row 0 covers `y ∈ [0, cell_size_m)`,
//! column 0 covers `x ∈ [0, cell_size_m)`.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::WorldError;

/// Continuous world-frame position in meters, origin at the minimum corner.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Grid index, `row` along y and `col` along x.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIndex {
    pub row: usize,
    pub col: usize,
}

impl CellIndex {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// A named location with a semantic description handed to the decision backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavPoint {
    pub id: String,
    pub name: String,
    pub position: Position,
    pub description: String,
}

/// Validated, immutable world description.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldSpec {
    pub name: String,
    pub width_m: f64,
    pub height_m: f64,
    pub cell_size_m: f64,
    rows: usize,
    cols: usize,
    walkable: Vec<bool>,
    pub nav_points: Vec<NavPoint>,
    pub spawn: Position,
    pub fixed_route: Vec<String>,
    pub room_metadata: BTreeMap<String, String>,
}

/// Number of cells needed to cover `extent` meters.
pub(crate) fn cells_for(extent: f64, cell: f64) -> usize {
    // 1e-9 absorbs representation error for exact multiples such as 66.0 / 0.5
    ((extent / cell) - 1e-9).ceil().max(1.0) as usize
}

#[derive(Debug, Serialize, Deserialize)]
struct NavPointDoc {
    id: String,
    name: String,
    x: f64,
    y: f64,
    #[serde(default)]
    description: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct WorldDoc {
    name: String,
    width_m: f64,
    height_m: f64,
    cell_size_m: f64,
    walkable: Vec<String>,
    spawn: Position,
    nav_points: Vec<NavPointDoc>,
    #[serde(default)]
    fixed_route: Vec<String>,
    #[serde(default)]
    room_metadata: BTreeMap<String, String>,
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> WorldError {
    WorldError::Validation {
        path: path.into(),
        message: message.into(),
    }
}

/// Parses and validates a world document.
pub fn load_world(document: &[u8]) -> Result<WorldSpec, WorldError> {
    let doc: WorldDoc =
        serde_json::from_slice(document).map_err(|e| WorldError::Parse(e.to_string()))?;
    WorldSpec::from_doc(doc)
}

impl WorldSpec {
    /// Builds a world directly from a walkability grid. Used by tests and tools;
    /// runs the same validation as [`load_world`].
    pub fn from_rows(
        name: &str,
        cell_size_m: f64,
        rows: &[&str],
        spawn: Position,
        nav_points: Vec<NavPoint>,
        fixed_route: Vec<String>,
    ) -> Result<Self, WorldError> {
        let height = rows.len() as f64 * cell_size_m;
        let width = rows.first().map_or(0, |r| r.chars().count()) as f64 * cell_size_m;
        let doc = WorldDoc {
            name: name.to_string(),
            width_m: width,
            height_m: height,
            cell_size_m,
            walkable: rows.iter().map(|r| r.to_string()).collect(),
            spawn,
            nav_points: nav_points
                .into_iter()
                .map(|p| NavPointDoc {
                    id: p.id,
                    name: p.name,
                    x: p.position.x,
                    y: p.position.y,
                    description: p.description,
                })
                .collect(),
            fixed_route,
            room_metadata: BTreeMap::new(),
        };
        Self::from_doc(doc)
    }

    fn from_doc(doc: WorldDoc) -> Result<Self, WorldError> {
        for (field, v) in [
            ("width_m", doc.width_m),
            ("height_m", doc.height_m),
            ("cell_size_m", doc.cell_size_m),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(field, format!("must be positive, got {v}")));
            }
        }
        let rows = cells_for(doc.height_m, doc.cell_size_m);
        let cols = cells_for(doc.width_m, doc.cell_size_m);
        if doc.walkable.len() != rows {
            return Err(invalid(
                "walkable",
                format!("expected {rows} rows, found {}", doc.walkable.len()),
            ));
        }
        let mut walkable = Vec::with_capacity(rows * cols);
        for (r, line) in doc.walkable.iter().enumerate() {
            if line.chars().count() != cols {
                return Err(invalid(
                    format!("walkable[{r}]"),
                    format!("expected {cols} columns, found {}", line.chars().count()),
                ));
            }
            for (c, ch) in line.chars().enumerate() {
                match ch {
                    '.' => walkable.push(true),
                    '#' => walkable.push(false),
                    other => {
                        return Err(invalid(
                            format!("walkable[{r}][{c}]"),
                            format!("unexpected character {other:?}"),
                        ))
                    }
                }
            }
        }

        let mut world = WorldSpec {
            name: doc.name,
            width_m: doc.width_m,
            height_m: doc.height_m,
            cell_size_m: doc.cell_size_m,
            rows,
            cols,
            walkable,
            nav_points: Vec::new(),
            spawn: doc.spawn,
            fixed_route: doc.fixed_route,
            room_metadata: doc.room_metadata,
        };

        match world.pos_to_cell(world.spawn) {
            Ok(c) if world.is_walkable(c) => {}
            Ok(_) => return Err(invalid("spawn", "spawn lies on an unwalkable cell")),
            Err(_) => return Err(invalid("spawn", "spawn lies outside the world")),
        }

        let mut seen = HashSet::new();
        for (i, p) in doc.nav_points.into_iter().enumerate() {
            let path = format!("nav_points[{i}]({})", p.id);
            if p.id.is_empty() {
                return Err(invalid(path, "id must be non-empty"));
            }
            if !seen.insert(p.id.clone()) {
                return Err(invalid(path, "duplicate nav point id"));
            }
            let position = Position::new(p.x, p.y);
            match world.pos_to_cell(position) {
                Ok(c) if world.is_walkable(c) => {}
                Ok(_) => return Err(invalid(path, "nav point lies on an unwalkable cell")),
                Err(_) => return Err(invalid(path, "nav point lies outside the world")),
            }
            world.nav_points.push(NavPoint {
                id: p.id,
                name: p.name,
                position,
                description: p.description,
            });
        }

        let mut on_route = HashSet::new();
        for (i, id) in world.fixed_route.iter().enumerate() {
            if !seen.contains(id) {
                return Err(invalid(format!("fixed_route[{i}]"), format!("unknown nav point {id:?}")));
            }
            if !on_route.insert(id) {
                return Err(invalid(format!("fixed_route[{i}]"), format!("duplicate nav point {id:?}")));
            }
        }
        Ok(world)
    }

    /// Serializes back into the world-file format.
    pub fn to_json(&self) -> String {
        let walkable = (0..self.rows)
            .map(|r| {
                (0..self.cols)
                    .map(|c| if self.walkable[r * self.cols + c] { '.' } else { '#' })
                    .collect()
            })
            .collect();
        let doc = WorldDoc {
            name: self.name.clone(),
            width_m: self.width_m,
            height_m: self.height_m,
            cell_size_m: self.cell_size_m,
            walkable,
            spawn: self.spawn,
            nav_points: self
                .nav_points
                .iter()
                .map(|p| NavPointDoc {
                    id: p.id.clone(),
                    name: p.name.clone(),
                    x: p.position.x,
                    y: p.position.y,
                    description: p.description.clone(),
                })
                .collect(),
            fixed_route: self.fixed_route.clone(),
            room_metadata: self.room_metadata.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("world document serializes")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn in_grid(&self, c: CellIndex) -> bool {
        c.row < self.rows && c.col < self.cols
    }

    /// False for out-of-grid cells.
    pub fn is_walkable(&self, c: CellIndex) -> bool {
        self.in_grid(c) && self.walkable[c.row * self.cols + c.col]
    }

    pub fn walkable_cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        (0..self.rows)
            .flat_map(move |row| (0..self.cols).map(move |col| CellIndex::new(row, col)))
            .filter(|c| self.is_walkable(*c))
    }

    pub fn contains(&self, p: Position) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= self.width_m && p.y <= self.height_m
    }

    /// Maps a position to the cell that contains it. Points on the far
    /// boundary belong to the last row/column.
    pub fn pos_to_cell(&self, p: Position) -> Result<CellIndex, WorldError> {
        if !self.contains(p) {
            return Err(WorldError::OutOfBounds(format!("({}, {})", p.x, p.y)));
        }
        let col = ((p.x / self.cell_size_m).floor() as usize).min(self.cols - 1);
        let row = ((p.y / self.cell_size_m).floor() as usize).min(self.rows - 1);
        Ok(CellIndex::new(row, col))
    }

    /// Center of a cell: `((col + 0.5) * cell, (row + 0.5) * cell)`.
    pub fn cell_to_pos(&self, c: CellIndex) -> Result<Position, WorldError> {
        if !self.in_grid(c) {
            return Err(WorldError::OutOfBounds(format!("cell ({}, {})", c.row, c.col)));
        }
        Ok(Position::new(
            (c.col as f64 + 0.5) * self.cell_size_m,
            (c.row as f64 + 0.5) * self.cell_size_m,
        ))
    }

    pub fn nav_point(&self, id: &str) -> Option<&NavPoint> {
        self.nav_points.iter().find(|p| p.id == id)
    }

    /// Nearest walkable cell by Euclidean distance between cell indices,
    /// ties broken by `(row, col)`.
    pub fn nearest_walkable(&self, target: CellIndex) -> Option<CellIndex> {
        if self.is_walkable(target) {
            return Some(target);
        }
        self.walkable_cells().min_by_key(|c| {
            let dr = c.row as i64 - target.row as i64;
            let dc = c.col as i64 - target.col as i64;
            (dr * dr + dc * dc, c.row, c.col)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open(rows: usize, cols: usize) -> WorldSpec {
        let line = ".".repeat(cols);
        let grid: Vec<&str> = (0..rows).map(|_| line.as_str()).collect();
        WorldSpec::from_rows("open", 1.0, &grid, Position::new(0.5, 0.5), vec![], vec![]).unwrap()
    }

    #[test]
    fn first_cell() {
        let w = open(4, 5);
        assert_eq!(w.pos_to_cell(Position::new(0.4, 0.4)).unwrap(), CellIndex::new(0, 0));
    }

    #[test]
    fn cell_center() {
        let w = open(4, 5);
        assert_eq!(w.cell_to_pos(CellIndex::new(2, 3)).unwrap(), Position::new(3.5, 2.5));
    }

    #[test]
    fn out_of_bounds() {
        let w = open(4, 5);
        assert!(matches!(
            w.pos_to_cell(Position::new(w.width_m + 1.0, 0.0)),
            Err(WorldError::OutOfBounds(_))
        ));
        assert!(matches!(w.cell_to_pos(CellIndex::new(4, 0)), Err(WorldError::OutOfBounds(_))));
        assert!(w.pos_to_cell(Position::new(f64::NAN, 0.0)).is_err());
    }

    #[test]
    fn far_edge_maps_to_last_cell() {
        let w = open(4, 5);
        assert_eq!(w.pos_to_cell(Position::new(5.0, 4.0)).unwrap(), CellIndex::new(3, 4));
    }

    #[test]
    fn round_trip_every_cell() {
        let w = open(7, 9);
        for row in 0..7 {
            for col in 0..9 {
                let c = CellIndex::new(row, col);
                assert_eq!(w.pos_to_cell(w.cell_to_pos(c).unwrap()).unwrap(), c);
            }
        }
    }

    #[test]
    fn rejects_nav_point_on_wall() {
        let doc = r#"{"name":"w","width_m":3,"height_m":1,"cell_size_m":1,
            "walkable":[".#."],"spawn":{"x":0.5,"y":0.5},
            "nav_points":[{"id":"statue","name":"Statue","x":1.5,"y":0.5,"description":""}]}"#;
        match load_world(doc.as_bytes()) {
            Err(WorldError::Validation { path, .. }) => assert!(path.contains("statue"), "{path}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_route_and_dims() {
        let base = |route: &str, rows: &str| {
            format!(
                r#"{{"name":"w","width_m":3,"height_m":1,"cell_size_m":1,"walkable":{rows},
                "spawn":{{"x":0.5,"y":0.5}},"nav_points":[{{"id":"a","name":"A","x":0.5,"y":0.5}}],
                "fixed_route":{route}}}"#
            )
        };
        assert!(load_world(base(r#"["a"]"#, r#"["..."]"#).as_bytes()).is_ok());
        assert!(matches!(
            load_world(base(r#"["b"]"#, r#"["..."]"#).as_bytes()),
            Err(WorldError::Validation { .. })
        ));
        assert!(matches!(
            load_world(base(r#"["a","a"]"#, r#"["..."]"#).as_bytes()),
            Err(WorldError::Validation { .. })
        ));
        assert!(matches!(
            load_world(base(r#"[]"#, r#"[".."]"#).as_bytes()),
            Err(WorldError::Validation { .. })
        ));
        assert!(matches!(load_world(b"{not json"), Err(WorldError::Parse(_))));
    }

    #[test]
    fn json_round_trip() {
        let w = open(3, 4);
        let again = load_world(w.to_json().as_bytes()).unwrap();
        assert_eq!(w, again);
    }

    #[test]
    fn snapping_prefers_lower_row_col_on_ties() {
        let w = WorldSpec::from_rows(
            "snap",
            1.0,
            &["...", ".#.", "..."],
            Position::new(0.5, 0.5),
            vec![],
            vec![],
        )
        .unwrap();
        assert_eq!(w.nearest_walkable(CellIndex::new(1, 1)), Some(CellIndex::new(0, 1)));
    }
}
