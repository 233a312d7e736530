//! Scene substrate: poses, trajectories, the route centerline with its
//! station/lateral frame, obstacle tracks, and the JSON scene format.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::SubScores;
use crate::geometry::{wrap_angle, Polygon, Vec2};

pub const DEFAULT_HORIZON: usize = 8;
pub const DEFAULT_DT: f64 = 0.5;
pub const DEFAULT_XY_LIMIT: f64 = 100.0;

/// Ego pose; `heading` is kept wrapped into `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    heading: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading: wrap_angle(heading),
        }
    }

    pub fn heading(&self) -> f64 {
        self.heading
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.heading.is_finite()
    }
}

impl From<[f64; 3]> for Pose2D {
    fn from(v: [f64; 3]) -> Self {
        Pose2D::new(v[0], v[1], v[2])
    }
}

impl From<Pose2D> for [f64; 3] {
    fn from(p: Pose2D) -> Self {
        [p.x, p.y, p.heading]
    }
}

/// Future ego poses at a fixed interval, step 1 first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    poses: Vec<Pose2D>,
    dt: f64,
}

impl Trajectory {
    pub fn new(poses: Vec<Pose2D>, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("trajectory dt must be positive, got {dt}")));
        }
        if poses.is_empty() {
            return Err(Error::invalid("trajectory has no poses"));
        }
        if let Some(i) = poses.iter().position(|p| !p.is_finite()) {
            return Err(Error::invalid(format!("trajectory pose {i} is not finite")));
        }
        Ok(Self { poses, dt })
    }

    pub fn from_triples(triples: &[[f64; 3]], dt: f64) -> Result<Self> {
        Self::new(triples.iter().map(|&t| Pose2D::from(t)).collect(), dt)
    }

    pub fn poses(&self) -> &[Pose2D] {
        &self.poses
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn last(&self) -> Pose2D {
        *self.poses.last().expect("trajectory is non-empty")
    }

    pub fn to_triples(&self) -> Vec<[f64; 3]> {
        self.poses.iter().map(|&p| p.into()).collect()
    }

    pub fn within_xy_limit(&self, limit: f64) -> bool {
        self.poses.iter().all(|p| p.x.abs() <= limit && p.y.abs() <= limit)
    }

    /// Clamps coordinates into `[-limit, limit]`.
    pub fn sanitized(&self, limit: f64) -> Trajectory {
        Trajectory {
            poses: self
                .poses
                .iter()
                .map(|p| Pose2D::new(p.x.clamp(-limit, limit), p.y.clamp(-limit, limit), p.heading))
                .collect(),
            dt: self.dt,
        }
    }

    /// Summed L1 distance over all steps: `|Δx| + |Δy| + w·|wrap(Δθ)|`.
    pub fn l1_distance(&self, other: &Trajectory, heading_weight: f64) -> f64 {
        self.poses
            .iter()
            .zip(&other.poses)
            .map(|(a, b)| {
                (a.x - b.x).abs()
                    + (a.y - b.y).abs()
                    + heading_weight * wrap_angle(a.heading - b.heading).abs()
            })
            .sum()
    }

    /// [`Self::l1_distance`] averaged per pose.
    pub fn mean_l1_distance(&self, other: &Trajectory, heading_weight: f64) -> f64 {
        self.l1_distance(other, heading_weight) / self.poses.len().min(other.poses.len()).max(1) as f64
    }

    /// Content hash over the exact bit patterns of `dt` and every pose.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(self.dt.to_bits().to_le_bytes());
        for p in &self.poses {
            h.update(p.x.to_bits().to_le_bytes());
            h.update(p.y.to_bits().to_le_bytes());
            h.update(p.heading.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Route centerline as a polyline with cumulative station.
///
/// Position is piecewise linear. Heading is constant per segment except in a
/// window of `blend_window` meters centered on each interior vertex, where it
/// blends linearly between the adjacent segment headings. Stations beyond
/// the end extrapolate along the final segment; negative stations clamp
/// to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Centerline {
    points: Vec<Vec2>,
    stations: Vec<f64>,
    seg_headings: Vec<f64>,
    blend_half: Vec<f64>,
}

pub const DEFAULT_BLEND_WINDOW: f64 = 0.5;

impl Centerline {
    pub fn new(points: Vec<Vec2>) -> Result<Self> {
        Self::with_blend_window(points, DEFAULT_BLEND_WINDOW)
    }

    pub fn with_blend_window(points: Vec<Vec2>, window: f64) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid(format!(
                "centerline needs at least 2 vertices, got {}",
                points.len()
            )));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("centerline has non-finite vertex"));
        }
        if !(window >= 0.0) {
            return Err(Error::invalid("blend window must be non-negative"));
        }
        let mut stations = Vec::with_capacity(points.len());
        let mut seg_headings = Vec::with_capacity(points.len() - 1);
        stations.push(0.0);
        for (i, w) in points.windows(2).enumerate() {
            let d = w[1] - w[0];
            let len = d.norm();
            if len <= 1e-9 {
                return Err(Error::invalid(format!(
                    "centerline vertices {i} and {} coincide",
                    i + 1
                )));
            }
            stations.push(stations[i] + len);
            seg_headings.push(d.y.atan2(d.x));
        }
        let n = points.len();
        let mut blend_half = vec![0.0; n];
        for j in 1..n - 1 {
            let prev = stations[j] - stations[j - 1];
            let next = stations[j + 1] - stations[j];
            blend_half[j] = (0.5 * window).min(0.5 * prev).min(0.5 * next);
        }
        Ok(Self {
            points,
            stations,
            seg_headings,
            blend_half,
        })
    }

    pub fn from_points(points: &[[f64; 2]]) -> Result<Self> {
        Self::new(points.iter().map(|&p| Vec2::from(p)).collect())
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.points
    }

    pub fn stations(&self) -> &[f64] {
        &self.stations
    }

    /// Heading of the outgoing segment at each vertex (incoming at the last).
    pub fn vertex_headings(&self) -> Vec<f64> {
        let mut h = self.seg_headings.clone();
        h.push(*self.seg_headings.last().expect("at least one segment"));
        h
    }

    pub fn length(&self) -> f64 {
        *self.stations.last().expect("non-empty")
    }

    fn segment_index(&self, s: f64) -> usize {
        let nseg = self.seg_headings.len();
        match self.stations.partition_point(|&st| st <= s) {
            0 => 0,
            k => (k - 1).min(nseg - 1),
        }
    }

    fn segment_dir(&self, k: usize) -> Vec2 {
        Vec2::from_angle(self.seg_headings[k])
    }

    pub fn position_at(&self, station: f64) -> Vec2 {
        let s = station.max(0.0);
        let k = self.segment_index(s);
        self.points[k] + self.segment_dir(k) * (s - self.stations[k])
    }

    /// Returns the blended heading and its derivative with respect to
    /// station.
    fn heading_and_rate(&self, station: f64) -> (f64, f64) {
        let s = station.clamp(0.0, self.length());
        let k = self.segment_index(s);
        for j in [k, k + 1] {
            if j == 0 || j >= self.points.len() - 1 {
                continue;
            }
            let half = self.blend_half[j];
            let sj = self.stations[j];
            if half > 0.0 && s >= sj - half && s <= sj + half {
                let from = self.seg_headings[j - 1];
                let delta = wrap_angle(self.seg_headings[j] - from);
                let u = (s - (sj - half)) / (2.0 * half);
                return (wrap_angle(from + delta * u), delta / (2.0 * half));
            }
        }
        (self.seg_headings[k], 0.0)
    }

    pub fn heading_at(&self, station: f64) -> f64 {
        self.heading_and_rate(station).0
    }

    /// Maps `(station, lateral)` to a Cartesian pose; positive lateral is
    /// left of the driving direction.
    pub fn to_cartesian(&self, station: f64, lateral: f64) -> Pose2D {
        let c = self.position_at(station);
        let h = self.heading_at(station);
        Pose2D::new(c.x - lateral * h.sin(), c.y + lateral * h.cos(), h)
    }

    /// Inverse of [`Self::to_cartesian`]. Starts from the nearest segment
    /// and refines with Newton steps where the heading is blended. Points
    /// before the start clamp to station 0 with the signed perpendicular
    /// distance to the first segment's line.
    pub fn project(&self, p: Vec2) -> (f64, f64) {
        let nseg = self.seg_headings.len();
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for k in 0..nseg {
            let a = self.points[k];
            let d = self.segment_dir(k);
            let len = self.stations[k + 1] - self.stations[k];
            let t_raw = (p - a).dot(d);
            let mut t = t_raw.max(0.0);
            if k + 1 < nseg {
                t = t.min(len);
            }
            let foot = a + d * t;
            let dist = p.distance(foot);
            if dist < best.0 - 1e-12 {
                let lateral = if k == 0 && t_raw < 0.0 {
                    d.cross(p - a)
                } else {
                    d.cross(p - foot)
                };
                best = (dist, self.stations[k] + t, lateral);
            }
        }
        let (_, mut s, mut l) = best;
        if s <= 0.0 || s >= self.length() {
            return (s, l);
        }
        for _ in 0..50 {
            let q = self.to_cartesian(s, l);
            let r = Vec2::new(q.x - p.x, q.y - p.y);
            if r.norm() < 1e-13 {
                break;
            }
            let (h, rate) = self.heading_and_rate(s);
            let tseg = self.segment_dir(self.segment_index(s));
            let th = Vec2::from_angle(h);
            let ds = tseg - th * (l * rate);
            let dl = Vec2::new(-h.sin(), h.cos());
            let det = ds.cross(dl);
            if det.abs() < 1e-12 {
                break;
            }
            let step_s = r.cross(dl) / det;
            let step_l = ds.cross(r) / det;
            s = (s - step_s).clamp(0.0, self.length());
            l -= step_l;
        }
        (s, l)
    }
}

/// Free-function form of [`Centerline::to_cartesian`].
pub fn station_lateral_to_cartesian(centerline: &Centerline, station: f64, lateral: f64) -> Pose2D {
    centerline.to_cartesian(station, lateral)
}

/// Free-function form of [`Centerline::project`].
pub fn project_to_centerline(centerline: &Centerline, point: Vec2) -> (f64, f64) {
    centerline.project(point)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleDims {
    pub length: f64,
    pub width: f64,
}

impl Default for VehicleDims {
    fn default() -> Self {
        Self {
            length: 4.6,
            width: 1.9,
        }
    }
}

impl VehicleDims {
    pub fn new(length: f64, width: f64) -> Result<Self> {
        let d = Self { length, width };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.width > 0.0 && self.length.is_finite() && self.width.is_finite()) {
            return Err(Error::invalid(format!(
                "vehicle dims must be positive, got {}×{}",
                self.length, self.width
            )));
        }
        Ok(())
    }
}

/// Rectangle centered on the pose and rotated by its heading. Corners are
/// counter-clockwise starting rear-right.
pub fn ego_footprint(pose: &Pose2D, dims: &VehicleDims) -> Polygon {
    let (s, c) = pose.heading().sin_cos();
    let hl = 0.5 * dims.length;
    let hw = 0.5 * dims.width;
    let corner = |lx: f64, ly: f64| Vec2::new(pose.x + lx * c - ly * s, pose.y + lx * s + ly * c);
    Polygon::new(vec![
        corner(-hl, -hw),
        corner(hl, -hw),
        corner(hl, hw),
        corner(-hl, hw),
    ])
    .expect("positive dims give a non-degenerate rectangle")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleTrack {
    pub footprints: Vec<Polygon>,
    pub is_static: bool,
}

impl ObstacleTrack {
    /// Footprint at future step `t` (0-based), holding the last one beyond
    /// the horizon.
    pub fn at(&self, t: usize) -> &Polygon {
        &self.footprints[t.min(self.footprints.len() - 1)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgoState {
    pub pose: Pose2D,
    pub speed: f64,
    /// Station of the ego position on the centerline.
    pub station: f64,
    /// Signed lateral offset of the ego position.
    pub lateral: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub id: String,
    pub dt: f64,
    pub horizon_steps: usize,
    pub ego: EgoState,
    pub centerline: Centerline,
    pub drivable: Vec<Polygon>,
    pub obstacles: Vec<ObstacleTrack>,
    pub human_trajectory: Trajectory,
    pub traffic_light_zone: Option<Polygon>,
    pub human_subscores: Option<SubScores>,
}

impl Scene {
    pub fn point_in_drivable(&self, p: Vec2) -> bool {
        point_in_drivable(self, p)
    }

    pub fn from_json_str(s: &str) -> Result<Scene> {
        let file: SceneFile = serde_json::from_str(s)?;
        Scene::try_from(file)
    }

    pub fn load(path: &std::path::Path) -> Result<Scene> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::File {
            path: path.display().to_string(),
            source: e,
        })?;
        let file: SceneFile = serde_json::from_str(&text).map_err(|e| {
            Error::scene(
                path.file_stem().and_then(|s| s.to_str()).unwrap_or("?"),
                "<document>",
                e.to_string(),
            )
        })?;
        Scene::try_from(file)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&SceneFile::from(self))?)
    }
}

/// True if the point lies in any drivable polygon.
pub fn point_in_drivable(scene: &Scene, p: Vec2) -> bool {
    scene.drivable.iter().any(|poly| poly.contains(p))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EgoFile {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObstacleFile {
    #[serde(rename = "static")]
    pub is_static: bool,
    pub footprints: Vec<Vec<[f64; 2]>>,
}

/// On-disk scene document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneFile {
    pub id: String,
    pub dt: f64,
    pub horizon_steps: usize,
    pub ego: EgoFile,
    pub centerline: Vec<[f64; 2]>,
    pub drivable: Vec<Vec<[f64; 2]>>,
    #[serde(default)]
    pub obstacles: Vec<ObstacleFile>,
    pub human_trajectory: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traffic_light_zone: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_subscores: Option<SubScores>,
}

fn polygon_field(id: &str, field: &str, pts: &[[f64; 2]]) -> Result<Polygon> {
    Polygon::from_points(pts).map_err(|e| Error::scene(id, field, e.to_string()))
}

impl TryFrom<SceneFile> for Scene {
    type Error = Error;

    fn try_from(f: SceneFile) -> Result<Scene> {
        let id = f.id.as_str();
        if id.is_empty() {
            return Err(Error::scene("<unnamed>", "id", "must be non-empty"));
        }
        if !(f.dt > 0.0 && f.dt.is_finite()) {
            return Err(Error::scene(id, "dt", format!("must be positive, got {}", f.dt)));
        }
        if f.horizon_steps == 0 {
            return Err(Error::scene(id, "horizon_steps", "must be positive"));
        }
        let t = f.horizon_steps;
        let centerline = Centerline::from_points(&f.centerline)
            .map_err(|e| Error::scene(id, "centerline", e.to_string()))?;
        if f.drivable.is_empty() {
            return Err(Error::scene(id, "drivable", "needs at least one polygon"));
        }
        let drivable = f
            .drivable
            .iter()
            .enumerate()
            .map(|(i, p)| polygon_field(id, &format!("drivable[{i}]"), p))
            .collect::<Result<Vec<_>>>()?;
        let mut obstacles = Vec::with_capacity(f.obstacles.len());
        for (i, o) in f.obstacles.iter().enumerate() {
            if o.footprints.len() != t {
                return Err(Error::scene(
                    id,
                    format!("obstacles[{i}].footprints"),
                    format!("expected {t} footprints, got {}", o.footprints.len()),
                ));
            }
            let footprints = o
                .footprints
                .iter()
                .enumerate()
                .map(|(k, p)| polygon_field(id, &format!("obstacles[{i}].footprints[{k}]"), p))
                .collect::<Result<Vec<_>>>()?;
            obstacles.push(ObstacleTrack {
                footprints,
                is_static: o.is_static,
            });
        }
        if f.human_trajectory.len() != t {
            return Err(Error::scene(
                id,
                "human_trajectory",
                format!("expected {t} poses, got {}", f.human_trajectory.len()),
            ));
        }
        let human_trajectory = Trajectory::from_triples(&f.human_trajectory, f.dt)
            .map_err(|e| Error::scene(id, "human_trajectory", e.to_string()))?;
        let e = &f.ego;
        if !(e.x.is_finite() && e.y.is_finite() && e.heading.is_finite() && e.speed.is_finite()) {
            return Err(Error::scene(id, "ego", "non-finite value"));
        }
        if e.speed < 0.0 {
            return Err(Error::scene(id, "ego.speed", "must be non-negative"));
        }
        let pose = Pose2D::new(e.x, e.y, e.heading);
        let (station, lateral) = centerline.project(pose.position());
        let raw_along = {
            let a = centerline.vertices()[0];
            let d = Vec2::from_angle(centerline.vertex_headings()[0]);
            (pose.position() - a).dot(d)
        };
        if raw_along < 0.0 || station > centerline.length() {
            return Err(Error::scene(
                id,
                "ego",
                "ego position does not project inside the centerline station range",
            ));
        }
        let traffic_light_zone = f
            .traffic_light_zone
            .as_ref()
            .map(|p| polygon_field(id, "traffic_light_zone", p))
            .transpose()?;
        if let Some(h) = &f.human_subscores {
            h.validate()
                .map_err(|err| Error::scene(id, "human_subscores", err.to_string()))?;
        }
        Ok(Scene {
            id: f.id.clone(),
            dt: f.dt,
            horizon_steps: t,
            ego: EgoState {
                pose,
                speed: e.speed,
                station,
                lateral,
            },
            centerline,
            drivable,
            obstacles,
            human_trajectory,
            traffic_light_zone,
            human_subscores: f.human_subscores,
        })
    }
}

fn ring(p: &Polygon) -> Vec<[f64; 2]> {
    p.vertices().iter().map(|&v| v.into()).collect()
}

impl From<&Scene> for SceneFile {
    fn from(s: &Scene) -> Self {
        SceneFile {
            id: s.id.clone(),
            dt: s.dt,
            horizon_steps: s.horizon_steps,
            ego: EgoFile {
                x: s.ego.pose.x,
                y: s.ego.pose.y,
                heading: s.ego.pose.heading(),
                speed: s.ego.speed,
            },
            centerline: s.centerline.vertices().iter().map(|&v| v.into()).collect(),
            drivable: s.drivable.iter().map(ring).collect(),
            obstacles: s
                .obstacles
                .iter()
                .map(|o| ObstacleFile {
                    is_static: o.is_static,
                    footprints: o.footprints.iter().map(ring).collect(),
                })
                .collect(),
            human_trajectory: s.human_trajectory.to_triples(),
            traffic_light_zone: s.traffic_light_zone.as_ref().map(ring),
            human_subscores: s.human_subscores,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn straight_x() -> Centerline {
        Centerline::from_points(&[[0.0, 0.0], [50.0, 0.0]]).unwrap()
    }

    fn straight_y() -> Centerline {
        Centerline::from_points(&[[0.0, 0.0], [0.0, 50.0]]).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn mapping_examples() {
        let p = station_lateral_to_cartesian(&straight_x(), 5.0, 0.0);
        assert!(close(p.x, 5.0) && close(p.y, 0.0) && close(p.heading(), 0.0));
        let p = station_lateral_to_cartesian(&straight_x(), 5.0, 2.0);
        assert!(close(p.x, 5.0) && close(p.y, 2.0) && close(p.heading(), 0.0));
        let p = station_lateral_to_cartesian(&straight_y(), 3.0, 1.0);
        assert!(close(p.x, -1.0) && close(p.y, 3.0) && close(p.heading(), FRAC_PI_2));
    }

    #[test]
    fn projection_examples() {
        let (s, l) = project_to_centerline(&straight_x(), Vec2::new(5.0, 2.0));
        assert!(close(s, 5.0) && close(l, 2.0));
        let (s, l) = project_to_centerline(&straight_x(), Vec2::new(-3.0, -1.5));
        assert_eq!(s, 0.0);
        assert!(close(l, -1.5));
        let (s, l) = project_to_centerline(&straight_y(), Vec2::new(-1.0, 3.0));
        assert!(close(s, 3.0) && close(l, 1.0));
    }

    #[test]
    fn empty_or_degenerate_centerline_rejected() {
        assert!(matches!(Centerline::new(vec![]), Err(Error::InvalidInput(_))));
        assert!(Centerline::from_points(&[[1.0, 1.0]]).is_err());
        assert!(Centerline::from_points(&[[1.0, 1.0], [1.0, 1.0]]).is_err());
    }

    #[test]
    fn extrapolates_beyond_end() {
        let c = Centerline::from_points(&[[0.0, 0.0], [10.0, 0.0], [10.0, 10.0]]).unwrap();
        let p = c.to_cartesian(25.0, 0.0);
        assert!(close(p.x, 10.0) && close(p.y, 15.0));
        let (s, l) = c.project(Vec2::new(10.5, 15.0));
        assert!(close(s, 25.0) && close(l, -0.5));
    }

    #[test]
    fn blended_heading_at_vertex() {
        let c = Centerline::from_points(&[[0.0, 0.0], [10.0, 0.0], [10.0, 10.0]]).unwrap();
        assert!(close(c.heading_at(10.0), PI / 4.0));
        assert!(close(c.heading_at(9.7), 0.0));
        assert!(close(c.heading_at(10.3), FRAC_PI_2));
        assert_eq!(c.vertex_headings().len(), 3);
    }

    fn random_centerline(rng: &mut ChaCha8Rng) -> Centerline {
        let n = rng.gen_range(4..12);
        let mut h: f64 = rng.gen_range(-PI..PI);
        let mut p = Vec2::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
        let mut pts = vec![p];
        for _ in 1..n {
            let len = rng.gen_range(1.0..4.0);
            h += rng.gen_range(-0.1..0.1);
            p = p + Vec2::from_angle(h) * len;
            pts.push(p);
        }
        Centerline::new(pts).unwrap()
    }

    #[test]
    fn round_trip_on_random_centerlines() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let c = random_centerline(&mut rng);
            let s = rng.gen_range(0.05..c.length() - 0.05);
            let l = rng.gen_range(-3.0..3.0);
            let p = c.to_cartesian(s, l);
            let (s2, l2) = c.project(p.position());
            let q = c.to_cartesian(s2, l2);
            let err = p.position().distance(q.position());
            assert!(err < 1e-6, "err {err} at s={s}, l={l}");
            assert!(p.heading() > -PI && p.heading() <= PI);
        }
    }

    #[test]
    fn footprint_examples() {
        let dims = VehicleDims::default();
        let f = ego_footprint(&Pose2D::new(0.0, 0.0, 0.0), &dims);
        let v = f.vertices();
        assert!(close(v[0].x, -2.3) && close(v[0].y, -0.95));
        assert!(close(v[2].x, 2.3) && close(v[2].y, 0.95));
        assert!(f.signed_area() > 0.0, "counter-clockwise");
        let f = ego_footprint(&Pose2D::new(0.0, 0.0, FRAC_PI_2), &dims);
        for c in f.vertices() {
            assert!(close(c.x.abs(), 0.95) && close(c.y.abs(), 2.3));
        }
        assert!(VehicleDims::new(0.0, 1.9).is_err());
        assert!(VehicleDims::new(4.6, 0.0).is_err());
    }

    #[test]
    fn footprint_area_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let dims = VehicleDims::new(rng.gen_range(0.5..8.0), rng.gen_range(0.5..3.0)).unwrap();
            let pose = Pose2D::new(
                rng.gen_range(-50.0..50.0),
                rng.gen_range(-50.0..50.0),
                rng.gen_range(-10.0..10.0),
            );
            let area = ego_footprint(&pose, &dims).area();
            assert!((area - dims.length * dims.width).abs() < 1e-9);
        }
    }

    #[test]
    fn pose_heading_is_wrapped() {
        let p = Pose2D::new(0.0, 0.0, 3.0 * PI);
        assert_eq!(p.heading(), PI);
        let p: Pose2D = serde_json::from_str("[1.0, 2.0, -4.0]").unwrap();
        assert!(p.heading() > -PI && p.heading() <= PI);
    }

    #[test]
    fn trajectory_validation() {
        assert!(Trajectory::from_triples(&[[0.0, 0.0, 0.0]], 0.0).is_err());
        assert!(Trajectory::from_triples(&[[f64::NAN, 0.0, 0.0]], 0.5).is_err());
        let t = Trajectory::from_triples(&[[150.0, -0.5, 0.0]], 0.5).unwrap();
        assert!(!t.within_xy_limit(DEFAULT_XY_LIMIT));
        assert!(t.sanitized(DEFAULT_XY_LIMIT).within_xy_limit(DEFAULT_XY_LIMIT));
    }
}
