//! Static risk layers: occupancy risk and wall-proximity risk.
//!
//! Distances here are measured in cells between cell centers, so a cell next
//! to a wall sits at `d = 1` and receives the maximum finite proximity risk.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{encode_pgm, CellState, GridIndex, GridMap};

/// Smallest finite risk; finite risks live in the open interval (0, 100).
pub const RISK_EPSILON: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum RiskConfigError {
    #[error("roi must be finite and >= 0, got {0}")]
    Roi(f64),
    #[error("roi_crit must satisfy 0 <= roi_crit < roi, got roi_crit={roi_crit} roi={roi}")]
    RoiCrit { roi: f64, roi_crit: f64 },
    #[error("unknown_risk must be positive, got {0}")]
    UnknownRisk(f64),
}

/// Parameters shared by the proximity and dynamic-obstacle risk layers.
///
/// `roi == 0` (with `roi_crit == 0`) switches the proximity layer off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskConfig {
    /// Region of interest, cells.
    pub roi: f64,
    /// Critical band, cells. Anything strictly closer is impassable.
    pub roi_crit: f64,
    /// Occupancy risk charged for unknown cells.
    pub unknown_risk: f64,
}

impl Default for RiskConfig {
    fn default() -> Self {
        Self { roi: 10.0, roi_crit: 1.0, unknown_risk: 50.0 }
    }
}

impl RiskConfig {
    pub fn new(roi: f64, roi_crit: f64) -> Result<Self, RiskConfigError> {
        let cfg = Self { roi, roi_crit, ..Self::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Proximity layer disabled: only occupied cells carry risk.
    pub fn without_proximity() -> Self {
        Self { roi: 0.0, roi_crit: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), RiskConfigError> {
        if !(self.roi.is_finite() && self.roi >= 0.0) {
            return Err(RiskConfigError::Roi(self.roi));
        }
        let disabled = self.roi == 0.0 && self.roi_crit == 0.0;
        if !disabled && !(self.roi_crit >= 0.0 && self.roi_crit < self.roi) {
            return Err(RiskConfigError::RoiCrit { roi: self.roi, roi_crit: self.roi_crit });
        }
        if !(self.unknown_risk > 0.0) {
            return Err(RiskConfigError::UnknownRisk(self.unknown_risk));
        }
        Ok(())
    }
}

/// Occupancy risk of a single cell.
pub fn occupancy_risk(state: CellState, config: &RiskConfig) -> f64 {
    match state {
        CellState::Occupied => f64::INFINITY,
        CellState::Free => 0.0,
        CellState::Unknown => config.unknown_risk,
    }
}

/// The raw linear decay `99 - (d - 1) * 98 / roi`, without banding or clamping.
pub fn proximity_formula(d: f64, roi: f64) -> f64 {
    99.0 - (d - 1.0) * (98.0 / roi)
}

/// Keep a finite risk inside (0, 100).
pub(crate) fn clamp_risk(r: f64) -> f64 {
    r.clamp(RISK_EPSILON, 100.0 - RISK_EPSILON)
}

/// Proximity risk at distance `d` (cells) from the nearest occupied cell.
pub fn proximity_risk(d: f64, config: &RiskConfig) -> f64 {
    if d < config.roi_crit {
        f64::INFINITY
    } else if config.roi == 0.0 || d > config.roi {
        0.0
    } else {
        clamp_risk(proximity_formula(d, config.roi))
    }
}

/// Precomputed occupancy and proximity risk for every cell of a map.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticRiskField {
    width: usize,
    height: usize,
    occupancy: Vec<f64>,
    proximity: Vec<f64>,
    nearest: Vec<f64>,
    config: RiskConfig,
}

impl StaticRiskField {
    /// Build both layers. Nearest-occupied distances come from an exact
    /// Euclidean distance transform; `R_p` of an occupied cell is infinite.
    pub fn build(map: &GridMap, config: RiskConfig) -> Self {
        let nearest = distance_transform(map);
        Self::from_distances(map, config, nearest)
    }

    pub(crate) fn from_distances(map: &GridMap, config: RiskConfig, nearest: Vec<f64>) -> Self {
        let occupancy: Vec<f64> = map.cells().iter().map(|&s| occupancy_risk(s, &config)).collect();
        let proximity = map
            .cells()
            .iter()
            .zip(&nearest)
            .map(|(&s, &d)| {
                if s == CellState::Occupied {
                    f64::INFINITY
                } else {
                    proximity_risk(d, &config)
                }
            })
            .collect();
        Self {
            width: map.width(),
            height: map.height(),
            occupancy,
            proximity,
            nearest,
            config,
        }
    }

    /// Flat field for maps with no risk beyond occupancy, handy in tests.
    pub fn zero(map: &GridMap) -> Self {
        Self::build(map, RiskConfig::without_proximity())
    }

    fn at(&self, v: GridIndex) -> usize {
        assert!(v.x < self.width && v.y < self.height, "cell {v} outside risk field");
        v.y * self.width + v.x
    }

    pub fn config(&self) -> &RiskConfig {
        &self.config
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn occupancy(&self, v: GridIndex) -> f64 {
        self.occupancy[self.at(v)]
    }

    pub fn proximity(&self, v: GridIndex) -> f64 {
        self.proximity[self.at(v)]
    }

    /// Distance in cells to the nearest occupied cell (infinite if none).
    pub fn nearest_occupied(&self, v: GridIndex) -> f64 {
        self.nearest[self.at(v)]
    }

    /// `R_c + R_p`.
    pub fn combined(&self, v: GridIndex) -> f64 {
        let i = self.at(v);
        self.occupancy[i] + self.proximity[i]
    }

    pub fn proximity_layer(&self) -> &[f64] {
        &self.proximity
    }

    pub fn occupancy_layer(&self) -> &[f64] {
        &self.occupancy
    }

    /// Grayscale of the combined field: infinite risk is black, zero is white,
    /// linear in between over [0, 100].
    pub fn gray_level(risk: f64) -> u8 {
        if !risk.is_finite() {
            return 0;
        }
        let s = (risk / 100.0).clamp(0.0, 1.0);
        (255.0 * (1.0 - s)).round() as u8
    }

    /// Binary PGM of the combined field, top image row = highest `y`.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut px = Vec::with_capacity(self.width * self.height);
        for y in (0..self.height).rev() {
            for x in 0..self.width {
                px.push(Self::gray_level(self.combined(GridIndex::new(x, y))));
            }
        }
        encode_pgm(self.width, self.height, &px)
    }
}

/// Exact Euclidean distance (cells) from every cell to its nearest occupied
/// cell, via the separable lower-envelope transform. Cells in maps without
/// any occupied cell get `f64::INFINITY`.
pub fn distance_transform(map: &GridMap) -> Vec<f64> {
    let (w, h) = (map.width(), map.height());
    let mut sq: Vec<f64> = map
        .cells()
        .iter()
        .map(|&s| if s == CellState::Occupied { 0.0 } else { f64::INFINITY })
        .collect();

    let mut buf_f = vec![0.0; w.max(h)];
    let mut buf_d = vec![0.0; w.max(h)];
    let mut env = Envelope::with_capacity(w.max(h));

    for x in 0..w {
        for y in 0..h {
            buf_f[y] = sq[y * w + x];
        }
        env.transform(&buf_f[..h], &mut buf_d[..h]);
        for y in 0..h {
            sq[y * w + x] = buf_d[y];
        }
    }
    for y in 0..h {
        let row = &mut sq[y * w..(y + 1) * w];
        buf_f[..w].copy_from_slice(row);
        env.transform(&buf_f[..w], &mut buf_d[..w]);
        row.copy_from_slice(&buf_d[..w]);
    }
    sq.into_iter().map(f64::sqrt).collect()
}

/// Scratch space for the 1D squared-distance transform.
struct Envelope {
    v: Vec<usize>,
    z: Vec<f64>,
}

impl Envelope {
    fn with_capacity(n: usize) -> Self {
        Self { v: vec![0; n], z: vec![0.0; n + 1] }
    }

    fn transform(&mut self, f: &[f64], out: &mut [f64]) {
        let n = f.len();
        let sites: Vec<usize> = (0..n).filter(|&q| f[q].is_finite()).collect();
        if sites.is_empty() {
            out.fill(f64::INFINITY);
            return;
        }
        let parabola_meet = |p: usize, q: usize| -> f64 {
            let (pf, qf) = (p as f64, q as f64);
            ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * qf - 2.0 * pf)
        };
        let mut k = 0usize;
        self.v[0] = sites[0];
        self.z[0] = f64::NEG_INFINITY;
        self.z[1] = f64::INFINITY;
        for &q in &sites[1..] {
            let mut s = parabola_meet(self.v[k], q);
            while s <= self.z[k] {
                k -= 1;
                s = parabola_meet(self.v[k], q);
            }
            k += 1;
            self.v[k] = q;
            self.z[k] = s;
            self.z[k + 1] = f64::INFINITY;
        }
        k = 0;
        for (q, slot) in out.iter_mut().enumerate() {
            while self.z[k + 1] < q as f64 {
                k += 1;
            }
            let d = q as f64 - self.v[k] as f64;
            *slot = d * d + f[self.v[k]];
        }
    }
}
