//! Dynamic obstacles: pose prediction, clearance queries and the
//! time-indexed obstacle risk.
//!
//! Obstacle geometry is in meters. The planner evaluates risk at cell
//! centers, and timesteps convert to seconds through `dt`.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::WorldPoint;
use crate::risk::{clamp_risk, RiskConfig};

/// Half-angle of the prediction cone, radians (about 25 degrees).
pub const DEFAULT_CONE_ANGLE: f64 = 0.44;
/// Inflation step of the ellipse clearance search, meters.
pub const DEFAULT_LAMBDA_STEP: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum ObstacleError {
    #[error("obstacle {id}: axes must satisfy major >= minor > 0 (major={major}, minor={minor})")]
    Axes { id: String, major: f64, minor: f64 },
    #[error("obstacle {0}: scripted path is empty")]
    EmptyPath(String),
    #[error("duplicate obstacle id {0}")]
    DuplicateId(String),
}

/// A rotated ellipse; a circle when `major == minor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: WorldPoint,
    pub major: f64,
    pub minor: f64,
    pub theta: f64,
}

impl Ellipse {
    pub fn new(center: WorldPoint, major: f64, minor: f64, theta: f64) -> Self {
        Self { center, major, minor, theta }
    }

    pub fn is_circle(&self) -> bool {
        self.major == self.minor
    }

    /// `p` expressed in the ellipse frame (major axis along +x).
    fn local(&self, p: WorldPoint) -> (f64, f64) {
        let (dx, dy) = (p.x - self.center.x, p.y - self.center.y);
        let (s, c) = self.theta.sin_cos();
        (c * dx + s * dy, -s * dx + c * dy)
    }

    fn contains_with(&self, p: WorldPoint, major: f64, minor: f64) -> bool {
        let (u, v) = self.local(p);
        (u / major).powi(2) + (v / minor).powi(2) <= 1.0
    }

    /// Inside or on the boundary.
    pub fn contains(&self, p: WorldPoint) -> bool {
        self.contains_with(p, self.major, self.minor)
    }

    /// Signed distance from `p` to a circle of radius `major`.
    pub fn circle_clearance(&self, p: WorldPoint) -> f64 {
        self.center.distance(p) - self.major
    }

    /// Smallest `k * step <= limit` such that the ellipse with both axes grown
    /// by `k * step` contains `p`.
    pub fn inflated_clearance(&self, p: WorldPoint, limit: f64, step: f64) -> Option<f64> {
        assert!(step > 0.0, "lambda step must be positive");
        // the inflated ellipse sits inside a circle of radius major + lambda
        let lower = self.center.distance(p) - self.major;
        let mut k = if lower > 0.0 { (lower / step).floor() as u64 } else { 0 };
        loop {
            let lambda = k as f64 * step;
            if lambda > limit {
                return None;
            }
            if self.contains_with(p, self.major + lambda, self.minor + lambda) {
                return Some(lambda);
            }
            k += 1;
        }
    }
}

/// What a scripted trajectory does after its last waypoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathEnd {
    /// Stay at the final waypoint.
    #[default]
    Hold,
    /// Start over from the first waypoint.
    Loop,
}

/// Known future positions, one per timestep starting at prediction step 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedPath {
    points: Vec<WorldPoint>,
    end: PathEnd,
}

impl SharedPath {
    pub fn new(points: Vec<WorldPoint>, end: PathEnd) -> Option<Self> {
        (!points.is_empty()).then_some(Self { points, end })
    }

    pub fn points(&self) -> &[WorldPoint] {
        &self.points
    }

    pub fn end(&self) -> PathEnd {
        self.end
    }

    pub fn point(&self, n: u64) -> WorldPoint {
        let len = self.points.len() as u64;
        let i = match self.end {
            PathEnd::Hold => n.min(len - 1),
            PathEnd::Loop => n % len,
        };
        self.points[i as usize]
    }

    /// Position at fractional step `t >= 0`, linear between waypoints.
    pub fn position(&self, t: f64) -> WorldPoint {
        let base = t.floor();
        let frac = t - base;
        let a = self.point(base as u64);
        if frac == 0.0 {
            return a;
        }
        a.lerp(self.point(base as u64 + 1), frac)
    }

    /// The same path viewed `k` steps later.
    pub fn shifted(&self, k: u64) -> SharedPath {
        let len = self.points.len() as u64;
        match self.end {
            PathEnd::Hold => {
                let start = k.min(len - 1) as usize;
                SharedPath { points: self.points[start..].to_vec(), end: PathEnd::Hold }
            }
            PathEnd::Loop => {
                let r = (k % len) as usize;
                let mut pts = self.points[r..].to_vec();
                pts.extend_from_slice(&self.points[..r]);
                SharedPath { points: pts, end: PathEnd::Loop }
            }
        }
    }
}

/// Pose of an obstacle at prediction step `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictedPose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub n: u32,
}

/// A moving obstacle with an elliptical footprint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicObstacle {
    pub id: String,
    pub x: f64,
    pub y: f64,
    /// Semi-axes, meters.
    pub major: f64,
    pub minor: f64,
    /// Orientation of the major axis, radians.
    pub theta: f64,
    /// Meters per second.
    pub velocity: (f64, f64),
    pub shared_path: Option<SharedPath>,
}

impl DynamicObstacle {
    pub fn new(
        id: impl Into<String>,
        position: WorldPoint,
        major: f64,
        minor: f64,
        theta: f64,
        velocity: (f64, f64),
    ) -> Result<Self, ObstacleError> {
        let id = id.into();
        if !(minor > 0.0 && major >= minor) {
            return Err(ObstacleError::Axes { id, major, minor });
        }
        Ok(Self { id, x: position.x, y: position.y, major, minor, theta, velocity, shared_path: None })
    }

    pub fn circle(
        id: impl Into<String>,
        position: WorldPoint,
        radius: f64,
        velocity: (f64, f64),
    ) -> Result<Self, ObstacleError> {
        Self::new(id, position, radius, radius, 0.0, velocity)
    }

    /// Attach a known trajectory; the current position becomes its first point.
    pub fn with_shared_path(mut self, path: SharedPath) -> Self {
        let p0 = path.point(0);
        self.x = p0.x;
        self.y = p0.y;
        self.shared_path = Some(path);
        self
    }

    pub fn position(&self) -> WorldPoint {
        WorldPoint::new(self.x, self.y)
    }

    pub fn is_circle(&self) -> bool {
        self.major == self.minor
    }

    /// Magnitude of the velocity, m/s.
    pub fn speed(&self) -> f64 {
        self.velocity.0.hypot(self.velocity.1)
    }

    /// Speed that widens the prediction cone. Obstacles that publish their
    /// path are read off that path rather than extrapolated, so no cone.
    pub fn prediction_speed(&self) -> f64 {
        if self.shared_path.is_some() {
            0.0
        } else {
            self.speed()
        }
    }

    /// Position after `t` (fractional) steps of `dt` seconds.
    pub fn position_at(&self, t: f64, dt: f64) -> WorldPoint {
        match &self.shared_path {
            Some(path) => path.position(t),
            None => WorldPoint::new(
                self.x + self.velocity.0 * t * dt,
                self.y + self.velocity.1 * t * dt,
            ),
        }
    }

    pub fn predict_pose(&self, n: u32, dt: f64) -> PredictedPose {
        let p = self.position_at(n as f64, dt);
        PredictedPose { x: p.x, y: p.y, theta: self.theta, n }
    }

    pub fn footprint_at(&self, center: WorldPoint) -> Ellipse {
        Ellipse::new(center, self.major, self.minor, self.theta)
    }

    pub fn footprint(&self) -> Ellipse {
        self.footprint_at(self.position())
    }

    /// The obstacle as it will be `k` steps from now.
    pub fn advanced(&self, k: u32, dt: f64) -> DynamicObstacle {
        let mut out = self.clone();
        let p = self.position_at(k as f64, dt);
        out.x = p.x;
        out.y = p.y;
        if let Some(path) = &self.shared_path {
            out.shared_path = Some(path.shifted(k as u64));
        }
        out
    }

    /// Last step after which this obstacle never moves again, if any.
    pub fn settles_after(&self) -> Option<u32> {
        match &self.shared_path {
            Some(p) if p.end() == PathEnd::Hold => Some(p.points().len() as u32 - 1),
            Some(_) => None,
            None if self.speed() == 0.0 => Some(0),
            None => None,
        }
    }
}

/// Signed distance to a circular obstacle's boundary, negative inside.
pub fn circle_clearance(obstacle: &DynamicObstacle, p: WorldPoint) -> f64 {
    obstacle.footprint().circle_clearance(p)
}

pub fn ellipse_contains(obstacle: &DynamicObstacle, p: WorldPoint) -> bool {
    obstacle.footprint().contains(p)
}

/// Additive axis inflation needed to swallow `p`, in `lambda_step`
/// increments; `roi` when `p` stays outside up to `roi`.
pub fn ellipse_clearance(obstacle: &DynamicObstacle, p: WorldPoint, roi: f64, lambda_step: f64) -> f64 {
    obstacle.footprint().inflated_clearance(p, roi, lambda_step).unwrap_or(roi)
}

/// Obstacles visible to one planner call.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObstacleSet(Vec<DynamicObstacle>);

impl ObstacleSet {
    pub fn new(obstacles: Vec<DynamicObstacle>) -> Result<Self, ObstacleError> {
        let mut seen = HashSet::new();
        for o in &obstacles {
            if !seen.insert(o.id.as_str()) {
                return Err(ObstacleError::DuplicateId(o.id.clone()));
            }
        }
        Ok(Self(obstacles))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn iter(&self) -> std::slice::Iter<'_, DynamicObstacle> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[DynamicObstacle] {
        &self.0
    }

    /// Step after which every obstacle is stationary, or `None` if some
    /// obstacle keeps moving.
    pub fn settles_after(&self) -> Option<u32> {
        self.0.iter().try_fold(0u32, |acc, o| o.settles_after().map(|s| acc.max(s)))
    }

    pub fn advanced(&self, k: u32, dt: f64) -> ObstacleSet {
        ObstacleSet(self.0.iter().map(|o| o.advanced(k, dt)).collect())
    }
}

impl FromIterator<DynamicObstacle> for ObstacleSet {
    fn from_iter<I: IntoIterator<Item = DynamicObstacle>>(iter: I) -> Self {
        ObstacleSet(iter.into_iter().collect())
    }
}

/// Dynamic risk parameters in world units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicRiskModel {
    /// Region of interest, meters.
    pub roi: f64,
    /// Critical clearance, meters.
    pub roi_crit: f64,
    pub cone_angle: f64,
    pub lambda_step: f64,
    /// Seconds per timestep.
    pub dt: f64,
}

impl DynamicRiskModel {
    /// Convert cell-based risk settings using the map resolution.
    pub fn from_config(config: &RiskConfig, resolution: f64, dt: f64) -> Self {
        Self {
            roi: config.roi * resolution,
            roi_crit: config.roi_crit * resolution,
            cone_angle: DEFAULT_CONE_ANGLE,
            lambda_step: DEFAULT_LAMBDA_STEP,
            dt,
        }
    }

    /// ROI widened by the prediction cone after `t` steps at `speed` m/s.
    pub fn effective_roi(&self, speed: f64, t: f64) -> f64 {
        self.roi + speed * self.cone_angle.tan() * t * self.dt
    }

    /// Risk of a clearance `d` (meters) to an obstacle moving at `speed`.
    pub fn risk_from_clearance(&self, d: f64, speed: f64, t: f64) -> f64 {
        if d < self.roi_crit {
            return f64::INFINITY;
        }
        let roi = self.effective_roi(speed, t);
        if d > roi {
            return 0.0;
        }
        if roi == 0.0 {
            return 99.0;
        }
        clamp_risk(99.0 - 98.0 * d / roi)
    }

    /// Risk contributed by one obstacle at step `t`.
    pub fn obstacle_risk(&self, obstacle: &DynamicObstacle, p: WorldPoint, t: f64) -> f64 {
        let speed = obstacle.prediction_speed();
        let roi = self.effective_roi(speed, t);
        let footprint = obstacle.footprint_at(obstacle.position_at(t, self.dt));
        let d = if footprint.is_circle() {
            footprint.circle_clearance(p)
        } else {
            if footprint.circle_clearance(p) > roi {
                return 0.0;
            }
            match footprint.inflated_clearance(p, roi, self.lambda_step) {
                Some(d) => d,
                None => return 0.0,
            }
        };
        self.risk_from_clearance(d, speed, t)
    }

    /// Largest risk over all obstacles at step `t` (may be fractional).
    pub fn risk_at(&self, obstacles: &ObstacleSet, p: WorldPoint, t: f64) -> f64 {
        let mut worst = 0.0f64;
        for o in obstacles.iter() {
            worst = worst.max(self.obstacle_risk(o, p, t));
            if worst.is_infinite() {
                break;
            }
        }
        worst
    }
}

/// Obstacle risk at `p` for prediction step `n`.
pub fn dynamic_risk(obstacles: &ObstacleSet, p: WorldPoint, n: u32, model: &DynamicRiskModel) -> f64 {
    model.risk_at(obstacles, p, n as f64)
}
