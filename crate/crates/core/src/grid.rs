//! Occupancy grids: loading, indexing and neighbourhood queries.
//!
//! Cell `(0, 0)` sits at the map origin and `y` grows with the world `y`
//! axis. PGM images are stored top row first, so the loader flips rows the
//! same way the ROS map server does.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Occupancy classification of a single cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellState {
    Free,
    Occupied,
    Unknown,
}

impl CellState {
    pub fn to_char(self) -> char {
        match self {
            CellState::Free => '.',
            CellState::Occupied => '#',
            CellState::Unknown => '?',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            '.' => Some(CellState::Free),
            '#' => Some(CellState::Occupied),
            '?' => Some(CellState::Unknown),
            _ => None,
        }
    }
}

/// Column/row address of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridIndex {
    pub x: usize,
    pub y: usize,
}

impl GridIndex {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    /// Euclidean distance in cells.
    pub fn distance(self, other: GridIndex) -> f64 {
        let dx = self.x as f64 - other.x as f64;
        let dy = self.y as f64 - other.y as f64;
        (dx * dx + dy * dy).sqrt()
    }

    /// True when `other` is reachable in one move (orthogonal, or diagonal
    /// when `connectivity` is 8). A cell is not adjacent to itself.
    pub fn is_adjacent(self, other: GridIndex, connectivity: Connectivity) -> bool {
        let dx = self.x.abs_diff(other.x);
        let dy = self.y.abs_diff(other.y);
        match connectivity {
            Connectivity::Four => dx + dy == 1,
            Connectivity::Eight => dx.max(dy) == 1,
        }
    }
}

impl fmt::Display for GridIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// A position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
}

impl WorldPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: WorldPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(self, other: WorldPoint, s: f64) -> WorldPoint {
        WorldPoint::new(self.x + (other.x - self.x) * s, self.y + (other.y - self.y) * s)
    }
}

/// Move set used when expanding a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Connectivity {
    #[serde(rename = "4")]
    Four,
    #[default]
    #[serde(rename = "8")]
    Eight,
}

impl Connectivity {
    pub fn from_count(n: u32) -> Option<Self> {
        match n {
            4 => Some(Connectivity::Four),
            8 => Some(Connectivity::Eight),
            _ => None,
        }
    }

    pub fn count(self) -> u32 {
        match self {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("malformed PGM header: {0}")]
    Header(String),
    #[error("pixel count mismatch: expected {expected}, found {found}")]
    PixelCount { expected: usize, found: usize },
    #[error("map metadata: missing or invalid field `{0}`")]
    Metadata(String),
    #[error("ragged row at line {line}: expected {expected} cells, found {found}")]
    RaggedRow { line: usize, expected: usize, found: usize },
    #[error("unknown cell character {ch:?} at line {line}, column {column}")]
    UnknownChar { ch: char, line: usize, column: usize },
    #[error("empty map")]
    Empty,
    #[error("invalid resolution {0}; must be positive and finite")]
    Resolution(f64),
    #[error("cell {0} is outside the {1}x{2} map")]
    OutOfBounds(GridIndex, usize, usize),
    #[error("world point ({0}, {1}) lies outside the map extents")]
    OutOfExtent(f64, f64),
}

/// Immutable 2D occupancy grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMap {
    width: usize,
    height: usize,
    resolution: f64,
    origin: WorldPoint,
    cells: Vec<CellState>,
}

impl GridMap {
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        origin: WorldPoint,
        cells: Vec<CellState>,
    ) -> Result<Self, MapError> {
        if width == 0 || height == 0 {
            return Err(MapError::Empty);
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(MapError::Resolution(resolution));
        }
        if cells.len() != width * height {
            return Err(MapError::PixelCount { expected: width * height, found: cells.len() });
        }
        Ok(Self { width, height, resolution, origin, cells })
    }

    /// Map of the given size with every cell set to `state`, unit resolution.
    pub fn filled(width: usize, height: usize, state: CellState) -> Self {
        Self::new(width, height, 1.0, WorldPoint::new(0.0, 0.0), vec![state; width * height])
            .expect("non-empty map")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> WorldPoint {
        self.origin
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn in_bounds(&self, v: GridIndex) -> bool {
        v.x < self.width && v.y < self.height
    }

    /// Row-major offset of `v`. Panics when out of bounds.
    pub fn offset(&self, v: GridIndex) -> usize {
        assert!(self.in_bounds(v), "cell {v} out of bounds");
        v.y * self.width + v.x
    }

    pub fn index_of(&self, offset: usize) -> GridIndex {
        GridIndex::new(offset % self.width, offset / self.width)
    }

    pub fn get(&self, v: GridIndex) -> Option<CellState> {
        self.in_bounds(v).then(|| self.cells[v.y * self.width + v.x])
    }

    /// State of an in-bounds cell. Panics when out of bounds.
    pub fn state(&self, v: GridIndex) -> CellState {
        self.cells[self.offset(v)]
    }

    pub fn set(&mut self, v: GridIndex, state: CellState) {
        let o = self.offset(v);
        self.cells[o] = state;
    }

    pub fn is_occupied(&self, v: GridIndex) -> bool {
        matches!(self.get(v), Some(CellState::Occupied))
    }

    pub fn is_traversable(&self, v: GridIndex) -> bool {
        matches!(self.get(v), Some(CellState::Free | CellState::Unknown))
    }

    pub fn indices(&self) -> impl Iterator<Item = GridIndex> + '_ {
        (0..self.height).flat_map(move |y| (0..self.width).map(move |x| GridIndex::new(x, y)))
    }

    /// Traversable neighbours of `v` with their step length in cells.
    ///
    /// Occupied cells are never returned. A diagonal move is dropped when
    /// either orthogonal cell it sweeps past is occupied.
    pub fn neighbors(
        &self,
        v: GridIndex,
        connectivity: Connectivity,
    ) -> Result<Vec<(GridIndex, f64)>, MapError> {
        if !self.in_bounds(v) {
            return Err(MapError::OutOfBounds(v, self.width, self.height));
        }
        let mut out = Vec::with_capacity(8);
        self.for_each_neighbor(v, connectivity, |n, step| out.push((n, step)));
        Ok(out)
    }

    /// Allocation-free variant of [`GridMap::neighbors`] for hot loops.
    /// Order: east, north, west, south, then NE, NW, SW, SE.
    pub fn for_each_neighbor(
        &self,
        v: GridIndex,
        connectivity: Connectivity,
        mut f: impl FnMut(GridIndex, f64),
    ) {
        const ORTHO: [(isize, isize); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];
        const DIAG: [(isize, isize); 4] = [(1, 1), (-1, 1), (-1, -1), (1, -1)];
        let shifted = |dx: isize, dy: isize| -> Option<GridIndex> {
            let x = v.x.checked_add_signed(dx)?;
            let y = v.y.checked_add_signed(dy)?;
            let n = GridIndex::new(x, y);
            self.in_bounds(n).then_some(n)
        };
        for (dx, dy) in ORTHO {
            if let Some(n) = shifted(dx, dy) {
                if self.is_traversable(n) {
                    f(n, 1.0);
                }
            }
        }
        if connectivity == Connectivity::Eight {
            for (dx, dy) in DIAG {
                let Some(n) = shifted(dx, dy) else { continue };
                if !self.is_traversable(n) {
                    continue;
                }
                let side_a = shifted(dx, 0).expect("diagonal implies orthogonal in bounds");
                let side_b = shifted(0, dy).expect("diagonal implies orthogonal in bounds");
                if self.is_occupied(side_a) || self.is_occupied(side_b) {
                    continue;
                }
                f(n, std::f64::consts::SQRT_2);
            }
        }
    }

    /// Cell containing `p`; half-open on the upper edges.
    pub fn world_to_grid(&self, p: WorldPoint) -> Result<GridIndex, MapError> {
        let fx = (p.x - self.origin.x) / self.resolution;
        let fy = (p.y - self.origin.y) / self.resolution;
        if !(fx.is_finite() && fy.is_finite())
            || fx < 0.0
            || fy < 0.0
            || fx >= self.width as f64
            || fy >= self.height as f64
        {
            return Err(MapError::OutOfExtent(p.x, p.y));
        }
        Ok(GridIndex::new(fx.floor() as usize, fy.floor() as usize))
    }

    /// Center of cell `v` in world coordinates.
    pub fn grid_to_world(&self, v: GridIndex) -> WorldPoint {
        WorldPoint::new(
            self.origin.x + (v.x as f64 + 0.5) * self.resolution,
            self.origin.y + (v.y as f64 + 0.5) * self.resolution,
        )
    }

    /// Parse the ASCII fixture format: `.` free, `#` occupied, `?` unknown,
    /// with an optional leading `resolution <r>` line. The first grid line is
    /// row `y = 0`.
    pub fn load_ascii(text: &str) -> Result<Self, MapError> {
        let mut resolution = 1.0;
        let mut rows: Vec<(usize, &str)> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.trim_end_matches('\r');
            if rows.is_empty() {
                if let Some(rest) = line.trim().strip_prefix("resolution") {
                    resolution = rest
                        .trim()
                        .parse::<f64>()
                        .map_err(|_| MapError::Metadata("resolution".into()))?;
                    continue;
                }
            }
            if line.is_empty() {
                continue;
            }
            rows.push((line_no, line));
        }
        let Some(&(_, first)) = rows.first() else {
            return Err(MapError::Empty);
        };
        let width = first.chars().count();
        let mut cells = Vec::with_capacity(width * rows.len());
        for &(line, row) in &rows {
            let found = row.chars().count();
            if found != width {
                return Err(MapError::RaggedRow { line, expected: width, found });
            }
            for (col, ch) in row.chars().enumerate() {
                let state = CellState::from_char(ch)
                    .ok_or(MapError::UnknownChar { ch, line, column: col + 1 })?;
                cells.push(state);
            }
        }
        Self::new(width, rows.len(), resolution, WorldPoint::new(0.0, 0.0), cells)
    }

    /// Inverse of [`GridMap::load_ascii`]. The resolution line is written
    /// only when it differs from 1.
    pub fn to_ascii(&self) -> String {
        let mut s = String::with_capacity((self.width + 1) * self.height + 24);
        if self.resolution != 1.0 {
            s.push_str(&format!("resolution {}\n", self.resolution));
        }
        for y in 0..self.height {
            for x in 0..self.width {
                s.push(self.cells[y * self.width + x].to_char());
            }
            s.push('\n');
        }
        s
    }

    /// Load a map-server style PGM image with its YAML metadata.
    pub fn load_pgm_yaml(pgm: &[u8], yaml: &str) -> Result<Self, MapError> {
        let meta = MapMetadata::parse(yaml)?;
        let image = PgmImage::parse(pgm)?;
        let (w, h) = (image.width, image.height);
        let mut cells = vec![CellState::Unknown; w * h];
        let maxval = image.maxval as f64;
        for row in 0..h {
            for col in 0..w {
                let v = image.pixels[row * w + col] as f64;
                let p = if meta.negate { v / maxval } else { (maxval - v) / maxval };
                let state = if p >= meta.occupied_thresh {
                    CellState::Occupied
                } else if p <= meta.free_thresh {
                    CellState::Free
                } else {
                    CellState::Unknown
                };
                cells[(h - 1 - row) * w + col] = state;
            }
        }
        Self::new(w, h, meta.resolution, WorldPoint::new(meta.origin[0], meta.origin[1]), cells)
    }
}

/// Contents of a map-server YAML file.
#[derive(Debug, Clone, PartialEq)]
pub struct MapMetadata {
    pub image: Option<String>,
    pub resolution: f64,
    pub origin: [f64; 3],
    pub occupied_thresh: f64,
    pub free_thresh: f64,
    pub negate: bool,
}

impl MapMetadata {
    pub fn parse(yaml: &str) -> Result<Self, MapError> {
        let doc: serde_yaml::Value =
            serde_yaml::from_str(yaml).map_err(|e| MapError::Metadata(format!("yaml: {e}")))?;
        let field = |name: &str| -> Result<&serde_yaml::Value, MapError> {
            doc.get(name).ok_or_else(|| MapError::Metadata(name.into()))
        };
        let number = |name: &str| -> Result<f64, MapError> {
            field(name)?.as_f64().ok_or_else(|| MapError::Metadata(name.into()))
        };
        let resolution = number("resolution")?;
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(MapError::Metadata("resolution".into()));
        }
        let origin_seq = field("origin")?
            .as_sequence()
            .filter(|s| s.len() == 2 || s.len() == 3)
            .ok_or_else(|| MapError::Metadata("origin".into()))?;
        let mut origin = [0.0; 3];
        for (slot, v) in origin.iter_mut().zip(origin_seq) {
            *slot = v.as_f64().ok_or_else(|| MapError::Metadata("origin".into()))?;
        }
        let occupied_thresh = number("occupied_thresh")?;
        let free_thresh = number("free_thresh")?;
        let negate = match field("negate")? {
            serde_yaml::Value::Bool(b) => *b,
            v => v.as_i64().map(|i| i != 0).ok_or_else(|| MapError::Metadata("negate".into()))?,
        };
        let image = doc.get("image").and_then(|v| v.as_str()).map(str::to_owned);
        Ok(Self { image, resolution, origin, occupied_thresh, free_thresh, negate })
    }
}

/// Decoded 8-bit PGM (P5 binary or P2 ASCII).
#[derive(Debug, Clone, PartialEq)]
pub struct PgmImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub pixels: Vec<u16>,
}

impl PgmImage {
    pub fn parse(bytes: &[u8]) -> Result<Self, MapError> {
        let mut pos = 0usize;
        let magic = next_token(bytes, &mut pos).ok_or_else(|| MapError::Header("magic".into()))?;
        let binary = match magic {
            b"P5" => true,
            b"P2" => false,
            other => {
                return Err(MapError::Header(format!(
                    "unsupported magic {:?}",
                    String::from_utf8_lossy(other)
                )))
            }
        };
        let mut header_num = |name: &str| -> Result<usize, MapError> {
            let tok = next_token(bytes, &mut pos).ok_or_else(|| MapError::Header(name.into()))?;
            std::str::from_utf8(tok)
                .ok()
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| MapError::Header(name.into()))
        };
        let width = header_num("width")?;
        let height = header_num("height")?;
        let maxval = header_num("maxval")?;
        if width == 0 || height == 0 {
            return Err(MapError::Header("zero dimension".into()));
        }
        if maxval == 0 || maxval > u16::MAX as usize {
            return Err(MapError::Header("maxval".into()));
        }
        let expected = width * height;
        let pixels: Vec<u16> = if binary {
            // exactly one whitespace byte separates the header from the raster
            let start = (pos + 1).min(bytes.len());
            let raster = &bytes[start..];
            if maxval < 256 {
                raster.iter().map(|&b| b as u16).collect()
            } else {
                raster.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
            }
        } else {
            let mut px = Vec::with_capacity(expected);
            while let Some(tok) = next_token(bytes, &mut pos) {
                let v = std::str::from_utf8(tok)
                    .ok()
                    .and_then(|s| s.parse::<u16>().ok())
                    .ok_or_else(|| MapError::Header("pixel value".into()))?;
                px.push(v);
            }
            px
        };
        if pixels.len() != expected {
            return Err(MapError::PixelCount { expected, found: pixels.len() });
        }
        Ok(Self { width, height, maxval: maxval as u16, pixels })
    }
}

/// Next whitespace-delimited header token, skipping `#` comments.
fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    if *pos >= bytes.len() {
        return None;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    Some(&bytes[start..*pos])
}

/// Encode an 8-bit binary PGM. `rows` yields rows top to bottom.
pub fn encode_pgm(width: usize, height: usize, pixels_top_down: &[u8]) -> Vec<u8> {
    assert_eq!(pixels_top_down.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels_top_down);
    out
}

/// Mark every cell within `radius` cells (Euclidean, center to center) of an
/// occupied cell as occupied. Used to give the classical planners a safety
/// margin around walls.
pub fn inflate(map: &GridMap, radius: f64) -> GridMap {
    let mut out = map.clone();
    if radius <= 0.0 {
        return out;
    }
    let r = radius.floor() as isize;
    let r2 = radius * radius;
    for v in map.indices().filter(|&v| map.is_occupied(v)) {
        for dy in -r..=r {
            for dx in -r..=r {
                if ((dx * dx + dy * dy) as f64) > r2 {
                    continue;
                }
                let (Some(x), Some(y)) = (v.x.checked_add_signed(dx), v.y.checked_add_signed(dy))
                else {
                    continue;
                };
                let n = GridIndex::new(x, y);
                if map.in_bounds(n) {
                    out.set(n, CellState::Occupied);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const META: &str = "image: map.pgm\nresolution: 0.05\norigin: [-1.0, -2.0, 0.0]\n\
                        occupied_thresh: 0.65\nfree_thresh: 0.196\nnegate: 0\n";

    #[test]
    fn pgm_thresholds_follow_map_server_convention() {
        let mut pgm = b"P5\n2 2\n255\n".to_vec();
        pgm.extend_from_slice(&[0, 254, 205, 0]);
        let map = GridMap::load_pgm_yaml(&pgm, META).unwrap();
        // image row 0 becomes grid row 1
        assert_eq!(map.state(GridIndex::new(0, 1)), CellState::Occupied);
        assert_eq!(map.state(GridIndex::new(1, 1)), CellState::Free);
        assert_eq!(map.state(GridIndex::new(0, 0)), CellState::Unknown);
        assert_eq!(map.state(GridIndex::new(1, 0)), CellState::Occupied);
        assert_eq!(map.resolution(), 0.05);
        assert_eq!(map.origin(), WorldPoint::new(-1.0, -2.0));
    }

    #[test]
    fn pgm_ascii_variant_and_single_free_pixel() {
        let map = GridMap::load_pgm_yaml(b"P2\n# comment\n1 1\n255\n254\n", META).unwrap();
        assert_eq!(map.cells(), &[CellState::Free]);
    }

    #[test]
    fn pgm_negate_flips_probability() {
        let yaml = META.replace("negate: 0", "negate: 1");
        let mut pgm = b"P5\n2 1\n255\n".to_vec();
        pgm.extend_from_slice(&[0, 255]);
        let map = GridMap::load_pgm_yaml(&pgm, &yaml).unwrap();
        assert_eq!(map.cells(), &[CellState::Free, CellState::Occupied]);
    }

    #[test]
    fn pgm_errors() {
        let err = GridMap::load_pgm_yaml(b"P5\n2 2\n255\n", META).unwrap_err();
        assert!(err.to_string().contains("pixel count mismatch"), "{err}");
        assert!(matches!(
            GridMap::load_pgm_yaml(b"P7\n1 1\n255\n\0", META),
            Err(MapError::Header(_))
        ));
        assert!(matches!(GridMap::load_pgm_yaml(b"P5\n1", META), Err(MapError::Header(_))));
        let no_res = META.replace("resolution: 0.05\n", "");
        let err = GridMap::load_pgm_yaml(b"P5\n1 1\n255\n\0", &no_res).unwrap_err();
        assert_eq!(err, MapError::Metadata("resolution".into()));
        assert!(err.to_string().contains("resolution"));
        let no_free = META.replace("free_thresh: 0.196\n", "");
        assert_eq!(
            GridMap::load_pgm_yaml(b"P5\n1 1\n255\n\0", &no_free).unwrap_err(),
            MapError::Metadata("free_thresh".into())
        );
    }

    #[test]
    fn ascii_fixture_parsing() {
        let map = GridMap::load_ascii(".#\n..").unwrap();
        assert_eq!((map.width(), map.height()), (2, 2));
        assert_eq!(map.state(GridIndex::new(1, 0)), CellState::Occupied);
        assert_eq!(map.cells().iter().filter(|c| **c == CellState::Occupied).count(), 1);
        assert_eq!(map.resolution(), 1.0);

        let err = GridMap::load_ascii(".#\n...").unwrap_err();
        assert_eq!(err.to_string(), "ragged row at line 2: expected 2 cells, found 3");

        let map = GridMap::load_ascii("?").unwrap();
        assert_eq!(map.cells(), &[CellState::Unknown]);

        let err = GridMap::load_ascii("..\n.x").unwrap_err();
        assert_eq!(err, MapError::UnknownChar { ch: 'x', line: 2, column: 2 });

        let map = GridMap::load_ascii("resolution 0.25\n..\n#.\n").unwrap();
        assert_eq!(map.resolution(), 0.25);
        assert_eq!(map.to_ascii(), "resolution 0.25\n..\n#.\n");
    }

    #[test]
    fn neighbor_enumeration() {
        let map = GridMap::filled(3, 3, CellState::Free);
        let n = map.neighbors(GridIndex::new(1, 1), Connectivity::Four).unwrap();
        assert_eq!(n.len(), 4);
        assert!(n.iter().all(|&(_, s)| s == 1.0));

        let mut n = map.neighbors(GridIndex::new(0, 0), Connectivity::Eight).unwrap();
        n.sort_by(|a, b| a.1.total_cmp(&b.1));
        let steps: Vec<f64> = n.iter().map(|p| p.1).collect();
        assert_eq!(steps, vec![1.0, 1.0, std::f64::consts::SQRT_2]);

        let mut blocked = GridMap::filled(3, 3, CellState::Free);
        blocked.set(GridIndex::new(1, 0), CellState::Occupied);
        blocked.set(GridIndex::new(0, 1), CellState::Occupied);
        assert!(blocked.neighbors(GridIndex::new(0, 0), Connectivity::Eight).unwrap().is_empty());

        // one side blocked is enough to forbid the diagonal
        let mut half = GridMap::filled(3, 3, CellState::Free);
        half.set(GridIndex::new(1, 0), CellState::Occupied);
        let n = half.neighbors(GridIndex::new(0, 0), Connectivity::Eight).unwrap();
        assert_eq!(n, vec![(GridIndex::new(0, 1), 1.0)]);

        assert!(matches!(
            map.neighbors(GridIndex::new(3, 0), Connectivity::Four),
            Err(MapError::OutOfBounds(..))
        ));
    }

    #[test]
    fn world_grid_conversion() {
        let map = GridMap::new(4, 2, 0.5, WorldPoint::new(0.0, 0.0), vec![CellState::Free; 8])
            .unwrap();
        assert_eq!(map.world_to_grid(WorldPoint::new(1.25, 0.25)).unwrap(), GridIndex::new(2, 0));
        assert_eq!(map.grid_to_world(GridIndex::new(2, 0)), WorldPoint::new(1.25, 0.25));
        assert_eq!(
            map.world_to_grid(WorldPoint::new(-0.1, 0.0)).unwrap_err(),
            MapError::OutOfExtent(-0.1, 0.0)
        );
        assert!(map.world_to_grid(WorldPoint::new(2.0, 0.1)).is_err());
    }

    #[test]
    fn inflation_marks_ring() {
        let map = GridMap::load_ascii(".....\n.....\n..#..\n.....\n.....").unwrap();
        let inflated = inflate(&map, 1.0);
        let occupied = inflated.cells().iter().filter(|c| **c == CellState::Occupied).count();
        assert_eq!(occupied, 5);
        let inflated = inflate(&map, 1.5);
        let occupied = inflated.cells().iter().filter(|c| **c == CellState::Occupied).count();
        assert_eq!(occupied, 9);
    }

    fn arb_map() -> impl Strategy<Value = GridMap> {
        (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
            proptest::collection::vec(
                prop_oneof![
                    Just(CellState::Free),
                    Just(CellState::Occupied),
                    Just(CellState::Unknown)
                ],
                w * h,
            )
            .prop_map(move |cells| {
                GridMap::new(w, h, 0.3, WorldPoint::new(-1.5, 2.0), cells).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn cell_center_round_trip(map in arb_map()) {
            for v in map.indices() {
                prop_assert_eq!(map.world_to_grid(map.grid_to_world(v)).unwrap(), v);
            }
        }

        #[test]
        fn four_neighbors_subset_of_eight(map in arb_map()) {
            for v in map.indices() {
                let four = map.neighbors(v, Connectivity::Four).unwrap();
                let eight = map.neighbors(v, Connectivity::Eight).unwrap();
                for n in &four {
                    prop_assert!(map.in_bounds(n.0));
                    prop_assert!(eight.contains(n));
                }
                for n in &eight {
                    prop_assert!(map.in_bounds(n.0));
                    prop_assert!(!map.is_occupied(n.0));
                }
            }
        }

        #[test]
        fn ascii_round_trip(map in arb_map()) {
            let unit = GridMap::new(map.width(), map.height(), 1.0, WorldPoint::new(0.0, 0.0),
                map.cells().to_vec()).unwrap();
            let text = unit.to_ascii();
            let back = GridMap::load_ascii(&text).unwrap();
            prop_assert_eq!(&back, &unit);
            prop_assert_eq!(back.to_ascii(), text);
        }
    }
}
