//! Rule-based trajectory evaluator: per-trajectory sub-scores, PDMS and
//! EPDMS composition with human-filtered penalties, two-stage aggregation,
//! the critic loss, and the cross-frame extended-comfort rule.
//!
//! The sub-score geometry is a simplified, documented rule set; thresholds
//! live in [`EvaluatorConfig`].

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Polygon, Vec2};
use crate::scene::{ego_footprint, Scene, Trajectory, VehicleDims};
use crate::util::{par_map, write_atomic};

/// Number of sub-score components.
pub const NUM_COMPONENTS: usize = 10;

/// Component identifiers, in the canonical order used by
/// [`SubScores::to_array`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Nc,
    Dac,
    Ddc,
    Tlc,
    Ep,
    Ttc,
    Lk,
    Hc,
    Ec,
    Comfort,
}

impl Component {
    pub const ALL: [Component; NUM_COMPONENTS] = [
        Component::Nc,
        Component::Dac,
        Component::Ddc,
        Component::Tlc,
        Component::Ep,
        Component::Ttc,
        Component::Lk,
        Component::Hc,
        Component::Ec,
        Component::Comfort,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Component::Nc => "nc",
            Component::Dac => "dac",
            Component::Ddc => "ddc",
            Component::Tlc => "tlc",
            Component::Ep => "ep",
            Component::Ttc => "ttc",
            Component::Lk => "lk",
            Component::Hc => "hc",
            Component::Ec => "ec",
            Component::Comfort => "comfort",
        }
    }

    /// Admissible discrete levels; `None` for the continuous EP.
    pub fn levels(self) -> Option<&'static [f64]> {
        match self {
            Component::Nc | Component::Ddc => Some(&[0.0, 0.5, 1.0]),
            Component::Ep => None,
            _ => Some(&[0.0, 1.0]),
        }
    }

    pub fn admits(self, v: f64) -> bool {
        match self.levels() {
            Some(levels) => levels.contains(&v),
            None => (0.0..=1.0).contains(&v),
        }
    }
}

/// Per-trajectory metric vector. Used both for evaluator truth and for
/// scorer predictions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubScores {
    pub nc: f64,
    pub dac: f64,
    pub ddc: f64,
    pub tlc: f64,
    pub ep: f64,
    pub ttc: f64,
    pub lk: f64,
    pub hc: f64,
    pub ec: f64,
    pub comfort: f64,
}

impl Default for SubScores {
    fn default() -> Self {
        Self::ones()
    }
}

impl SubScores {
    pub const fn ones() -> Self {
        Self {
            nc: 1.0,
            dac: 1.0,
            ddc: 1.0,
            tlc: 1.0,
            ep: 1.0,
            ttc: 1.0,
            lk: 1.0,
            hc: 1.0,
            ec: 1.0,
            comfort: 1.0,
        }
    }

    pub fn to_array(&self) -> [f64; NUM_COMPONENTS] {
        [
            self.nc, self.dac, self.ddc, self.tlc, self.ep, self.ttc, self.lk, self.hc, self.ec,
            self.comfort,
        ]
    }

    pub fn from_array(a: [f64; NUM_COMPONENTS]) -> Self {
        Self {
            nc: a[0],
            dac: a[1],
            ddc: a[2],
            tlc: a[3],
            ep: a[4],
            ttc: a[5],
            lk: a[6],
            hc: a[7],
            ec: a[8],
            comfort: a[9],
        }
    }

    pub fn get(&self, c: Component) -> f64 {
        self.to_array()[c.index()]
    }

    pub fn set(&mut self, c: Component, v: f64) {
        let mut a = self.to_array();
        a[c.index()] = v;
        *self = Self::from_array(a);
    }

    pub fn with(mut self, c: Component, v: f64) -> Self {
        self.set(c, v);
        self
    }

    pub fn validate(&self) -> Result<()> {
        for c in Component::ALL {
            let v = self.get(c);
            if !v.is_finite() || !c.admits(v) {
                return Err(Error::invalid(format!("sub-score {} = {v} outside its range", c.name())));
            }
        }
        Ok(())
    }
}

/// Composition weights. Multiplier components (`nc`, `dac`, `ddc`, `tlc`)
/// enter as `value^weight`, so weight 0 disables a gate. The remaining
/// components form a weighted mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    pub nc: f64,
    pub dac: f64,
    pub ddc: f64,
    pub tlc: f64,
    pub ep: f64,
    pub ttc: f64,
    pub lk: f64,
    pub hc: f64,
    pub ec: f64,
    pub comfort: f64,
}

const MULTIPLIERS: [Component; 4] = [Component::Nc, Component::Dac, Component::Ddc, Component::Tlc];
const WEIGHTED: [Component; 6] = [
    Component::Ep,
    Component::Ttc,
    Component::Lk,
    Component::Hc,
    Component::Ec,
    Component::Comfort,
];

impl ScoreWeights {
    /// PDMS: `NC × DAC × (5·EP + 5·TTC + 2·C) / 12`.
    pub const fn pdms_v1() -> Self {
        Self {
            nc: 1.0,
            dac: 1.0,
            ddc: 0.0,
            tlc: 0.0,
            ep: 5.0,
            ttc: 5.0,
            lk: 0.0,
            hc: 0.0,
            ec: 0.0,
            comfort: 2.0,
        }
    }

    /// EPDMS: gates on NC/DAC/DDC/TLC, weighted TTC/EP/LK/HC/EC = 5/5/2/2/2.
    pub const fn epdms_v2() -> Self {
        Self {
            nc: 1.0,
            dac: 1.0,
            ddc: 1.0,
            tlc: 1.0,
            ep: 5.0,
            ttc: 5.0,
            lk: 2.0,
            hc: 2.0,
            ec: 2.0,
            comfort: 0.0,
        }
    }

    /// Ranking composition NC/DAC/DDC/TTC/EP/Comfort = 1/1/0/5/5/2.
    pub const fn deployment() -> Self {
        Self::pdms_v1()
    }

    pub fn get(&self, c: Component) -> f64 {
        let a = [
            self.nc, self.dac, self.ddc, self.tlc, self.ep, self.ttc, self.lk, self.hc, self.ec,
            self.comfort,
        ];
        a[c.index()]
    }

    pub fn validate(&self) -> Result<()> {
        for c in Component::ALL {
            let w = self.get(c);
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::invalid(format!("weight {} = {w} must be non-negative", c.name())));
            }
        }
        if WEIGHTED.iter().map(|&c| self.get(c)).sum::<f64>() <= 0.0 {
            return Err(Error::invalid("at least one weighted-mean component needs positive weight"));
        }
        Ok(())
    }

    /// Components that influence the composed score.
    pub fn active_components(&self) -> Vec<Component> {
        Component::ALL.into_iter().filter(|&c| self.get(c) > 0.0).collect()
    }
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self::deployment()
    }
}

/// Composes sub-scores into a scalar in `[0, 1]`.
pub fn compose(s: &SubScores, w: &ScoreWeights) -> f64 {
    let mut gate = 1.0;
    for c in MULTIPLIERS {
        let wc = w.get(c);
        if wc == 1.0 {
            gate *= s.get(c);
        } else if wc > 0.0 {
            gate *= s.get(c).powf(wc);
        }
    }
    let (num, den) = WEIGHTED.iter().fold((0.0, 0.0), |(n, d), &c| {
        let wc = w.get(c);
        (n + wc * s.get(c), d + wc)
    });
    if den <= 0.0 {
        return 0.0;
    }
    gate * num / den
}

/// PDMS-style composition with the given weights.
pub fn compose_pdms(s: &SubScores, w: &ScoreWeights) -> f64 {
    compose(s, w)
}

/// Neutralizes a penalty the human reference also incurs.
pub fn filter_subscore(agent_value: f64, human_value: f64) -> f64 {
    if human_value == 0.0 {
        1.0
    } else {
        agent_value
    }
}

pub fn filter_subscores(agent: &SubScores, human: &SubScores) -> SubScores {
    let a = agent.to_array();
    let h = human.to_array();
    let mut out = [0.0; NUM_COMPONENTS];
    for i in 0..NUM_COMPONENTS {
        out[i] = filter_subscore(a[i], h[i]);
    }
    SubScores::from_array(out)
}

/// EPDMS with false-positive filtering against the human sub-scores.
pub fn compose_epdms(agent: &SubScores, human: &SubScores, w: &ScoreWeights) -> f64 {
    compose(&filter_subscores(agent, human), w)
}

/// Second-stage scores weighted by a normalized Gaussian kernel on the
/// start-state distance, multiplied by the first-stage score.
pub fn two_stage_aggregate(stage1_score: f64, followups: &[(f64, f64)], bandwidth: f64) -> Result<f64> {
    if followups.is_empty() {
        return Err(Error::invalid("two-stage aggregation needs at least one follow-up"));
    }
    if !(bandwidth > 0.0) {
        return Err(Error::invalid(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let logw: Vec<f64> = followups
        .iter()
        .map(|&(d, _)| -d * d / (2.0 * bandwidth * bandwidth))
        .collect();
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let agg: f64 = weights
        .iter()
        .zip(followups)
        .map(|(w, &(_, s))| w * s)
        .sum::<f64>()
        / total;
    Ok(stage1_score * agg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticLoss {
    pub per_component: [f64; NUM_COMPONENTS],
    pub total: f64,
}

/// Squared error per component; total is the mean over components.
pub fn critic_loss(predicted: &SubScores, truth: &SubScores) -> CriticLoss {
    let p = predicted.to_array();
    let t = truth.to_array();
    let mut per_component = [0.0; NUM_COMPONENTS];
    for i in 0..NUM_COMPONENTS {
        per_component[i] = (p[i] - t[i]).powi(2);
    }
    CriticLoss {
        per_component,
        total: per_component.iter().sum::<f64>() / NUM_COMPONENTS as f64,
    }
}

/// Mean critic loss over a batch; 0 for an empty batch.
pub fn mean_critic_loss(pairs: &[(SubScores, SubScores)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    pairs.iter().map(|(p, t)| critic_loss(p, t).total).sum::<f64>() / pairs.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtendedComfortThresholds {
    /// Meters.
    pub position_rms: f64,
    /// Radians.
    pub heading_rms: f64,
}

impl Default for ExtendedComfortThresholds {
    fn default() -> Self {
        Self {
            position_rms: 1.0,
            heading_rms: 0.2,
        }
    }
}

/// 1 iff RMS position and heading deviations between index-aligned poses of
/// two consecutive selections stay within the thresholds (inclusive). The
/// caller aligns `prev` to the current frame.
pub fn extended_comfort(
    prev_selected: &Trajectory,
    current_selected: &Trajectory,
    thresholds: &ExtendedComfortThresholds,
) -> Result<f64> {
    extended_comfort_with_offset(prev_selected, current_selected, 0, thresholds)
}

/// As [`extended_comfort`], comparing `prev[i + offset]` with `current[i]`
/// over the overlapping horizon.
pub fn extended_comfort_with_offset(
    prev: &Trajectory,
    current: &Trajectory,
    offset: usize,
    thresholds: &ExtendedComfortThresholds,
) -> Result<f64> {
    if prev.len() != current.len() || (prev.dt() - current.dt()).abs() > 1e-12 {
        return Err(Error::invalid("extended comfort needs trajectories with equal length and dt"));
    }
    if offset >= prev.len() {
        return Err(Error::invalid("frame offset leaves no overlapping horizon"));
    }
    let pairs: Vec<_> = prev.poses()[offset..].iter().zip(current.poses()).collect();
    let n = pairs.len() as f64;
    let pos = (pairs
        .iter()
        .map(|(a, b)| (a.x - b.x).powi(2) + (a.y - b.y).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let head = (pairs
        .iter()
        .map(|(a, b)| wrap_angle(a.heading() - b.heading()).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(if pos <= thresholds.position_rms && head <= thresholds.heading_rms {
        1.0
    } else {
        0.0
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluatorConfig {
    pub vehicle: VehicleDims,
    /// Seconds of constant-velocity look-ahead for TTC.
    pub ttc_horizon: f64,
    /// m/s²
    pub max_accel: f64,
    /// m/s³
    pub max_jerk: f64,
    /// rad/s
    pub max_yaw_rate: f64,
    pub lane_half_width: f64,
    /// Reverse station travel (m) below which DDC is 0.5 instead of 0.
    pub ddc_reverse_limit: f64,
    /// Floor on the human progress denominator (m).
    pub ep_epsilon: f64,
    /// Gaussian bandwidth (m) for two-stage aggregation.
    pub two_stage_bandwidth: f64,
}

impl Default for EvaluatorConfig {
    fn default() -> Self {
        Self {
            vehicle: VehicleDims::default(),
            ttc_horizon: 1.0,
            max_accel: 2.4,
            max_jerk: 4.0,
            max_yaw_rate: 0.5,
            lane_half_width: 1.75,
            ddc_reverse_limit: 2.0,
            ep_epsilon: 1e-3,
            two_stage_bandwidth: 2.0,
        }
    }
}

impl EvaluatorConfig {
    pub fn validate(&self) -> Result<()> {
        self.vehicle.validate()?;
        let positive = [
            ("ttc_horizon", self.ttc_horizon),
            ("max_accel", self.max_accel),
            ("max_jerk", self.max_jerk),
            ("max_yaw_rate", self.max_yaw_rate),
            ("lane_half_width", self.lane_half_width),
            ("ddc_reverse_limit", self.ddc_reverse_limit),
            ("ep_epsilon", self.ep_epsilon),
            ("two_stage_bandwidth", self.two_stage_bandwidth),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("evaluator {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

pub fn trajectory_footprints(traj: &Trajectory, dims: &VehicleDims) -> Vec<Polygon> {
    traj.poses().iter().map(|p| ego_footprint(p, dims)).collect()
}

fn comfortable(positions: &[Vec2], headings: &[f64], initial_velocity: Option<Vec2>, dt: f64, cfg: &EvaluatorConfig) -> bool {
    let mut vel: Vec<Vec2> = Vec::with_capacity(positions.len());
    vel.extend(initial_velocity);
    vel.extend(positions.windows(2).map(|w| (w[1] - w[0]) * (1.0 / dt)));
    let acc: Vec<Vec2> = vel.windows(2).map(|w| (w[1] - w[0]) * (1.0 / dt)).collect();
    let tol = 1e-9;
    if acc.iter().any(|a| a.norm() > cfg.max_accel + tol) {
        return false;
    }
    if acc
        .windows(2)
        .any(|w| ((w[1] - w[0]) * (1.0 / dt)).norm() > cfg.max_jerk + tol)
    {
        return false;
    }
    !headings
        .windows(2)
        .any(|w| (wrap_angle(w[1] - w[0]) / dt).abs() > cfg.max_yaw_rate + tol)
}

/// Evaluates one trajectory against the scene.
///
/// * NC: 0 on contact with a dynamic obstacle footprint at the same step,
///   0.5 when every contact is with static obstacles, else 1.
/// * DAC: 1 iff all footprint corners at every step lie in the drivable
///   union.
/// * DDC: from the station sequence of the trajectory poses; 1 if
///   non-decreasing, 0.5 if the summed reverse travel is below
///   `ddc_reverse_limit`, else 0.
/// * TLC: 0 if any pose lies in the traffic-light zone.
/// * EP: final station gain relative to the human gain, clamped to [0, 1].
/// * TTC: constant-velocity projection of each step's footprint over
///   `ttc_horizon` stays clear of obstacles.
/// * Comfort: acceleration, jerk and yaw-rate limits over the future poses.
///   HC applies the same limits with the current ego state prepended.
/// * LK: |lateral| within the lane half width at every step.
/// * EC: 1 (cross-frame rule lives in [`extended_comfort`]).
pub fn compute_subscores(scene: &Scene, traj: &Trajectory, cfg: &EvaluatorConfig) -> Result<SubScores> {
    if traj.len() != scene.horizon_steps {
        return Err(Error::invalid(format!(
            "trajectory has {} poses, scene `{}` expects {}",
            traj.len(),
            scene.id,
            scene.horizon_steps
        )));
    }
    if (traj.dt() - scene.dt).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "trajectory dt {} does not match scene dt {}",
            traj.dt(),
            scene.dt
        )));
    }
    let dt = scene.dt;
    let poses = traj.poses();
    let footprints = trajectory_footprints(traj, &cfg.vehicle);

    let mut dynamic_hit = false;
    let mut static_hit = false;
    for (t, fp) in footprints.iter().enumerate() {
        for obs in &scene.obstacles {
            if fp.intersects(obs.at(t)) {
                if obs.is_static {
                    static_hit = true;
                } else {
                    dynamic_hit = true;
                }
            }
        }
    }
    let nc = if dynamic_hit {
        0.0
    } else if static_hit {
        0.5
    } else {
        1.0
    };

    let dac = if footprints
        .iter()
        .all(|fp| fp.vertices().iter().all(|&c| scene.point_in_drivable(c)))
    {
        1.0
    } else {
        0.0
    };

    let frenet: Vec<(f64, f64)> = poses.iter().map(|p| scene.centerline.project(p.position())).collect();
    let reverse: f64 = frenet.windows(2).map(|w| (w[0].0 - w[1].0).max(0.0)).sum();
    let ddc = if reverse <= 1e-9 {
        1.0
    } else if reverse < cfg.ddc_reverse_limit {
        0.5
    } else {
        0.0
    };

    let tlc = match &scene.traffic_light_zone {
        Some(zone) if poses.iter().any(|p| zone.contains(p.position())) => 0.0,
        _ => 1.0,
    };

    let gain = frenet.last().map(|f| f.0).unwrap_or(scene.ego.station) - scene.ego.station;
    let human_last = scene.human_trajectory.last();
    let human_gain = scene.centerline.project(human_last.position()).0 - scene.ego.station;
    let ep = (gain / human_gain.max(cfg.ep_epsilon)).clamp(0.0, 1.0);

    let ttc = if ttc_clear(scene, traj, cfg) { 1.0 } else { 0.0 };

    let positions: Vec<Vec2> = poses.iter().map(|p| p.position()).collect();
    let headings: Vec<f64> = poses.iter().map(|p| p.heading()).collect();
    let comfort = if comfortable(&positions, &headings, None, dt, cfg) { 1.0 } else { 0.0 };

    let mut hist_pos = vec![scene.ego.pose.position()];
    hist_pos.extend(&positions);
    let mut hist_head = vec![scene.ego.pose.heading()];
    hist_head.extend(&headings);
    let v0 = Vec2::from_angle(scene.ego.pose.heading()) * scene.ego.speed;
    let hc = if comfortable(&hist_pos, &hist_head, Some(v0), dt, cfg) { 1.0 } else { 0.0 };

    let lk = if frenet.iter().all(|f| f.1.abs() <= cfg.lane_half_width + 1e-12) {
        1.0
    } else {
        0.0
    };

    Ok(SubScores {
        nc,
        dac,
        ddc,
        tlc,
        ep,
        ttc,
        lk,
        hc,
        ec: 1.0,
        comfort,
    })
}

fn ttc_clear(scene: &Scene, traj: &Trajectory, cfg: &EvaluatorConfig) -> bool {
    if scene.obstacles.is_empty() {
        return true;
    }
    let dt = scene.dt;
    let n_proj = ((cfg.ttc_horizon / dt) - 1e-9).ceil().max(1.0) as usize;
    let poses = traj.poses();
    for (t, pose) in poses.iter().enumerate() {
        let prev = if t == 0 {
            scene.ego.pose.position()
        } else {
            poses[t - 1].position()
        };
        let vel = (pose.position() - prev) * (1.0 / dt);
        for j in 1..=n_proj {
            let tau = (j as f64 * dt).min(cfg.ttc_horizon);
            let moved = crate::scene::Pose2D::new(pose.x + vel.x * tau, pose.y + vel.y * tau, pose.heading());
            let fp = ego_footprint(&moved, &cfg.vehicle);
            if scene.obstacles.iter().any(|o| fp.intersects(o.at(t + j))) {
                return false;
            }
        }
    }
    true
}

/// Human sub-scores for EPDMS filtering: the scene's stored values when
/// present, otherwise the evaluator applied to the logged trajectory.
pub fn human_reference(scene: &Scene, cfg: &EvaluatorConfig) -> Result<SubScores> {
    match scene.human_subscores {
        Some(s) => Ok(s),
        None => compute_subscores(scene, &scene.human_trajectory, cfg),
    }
}

/// One scored candidate as emitted in JSONL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRecord {
    pub scene_id: String,
    pub candidate_id: usize,
    #[serde(flatten)]
    pub subscores: SubScores,
    pub pdms: f64,
    pub epdms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_version: Option<u32>,
}

/// Scores a batch in parallel; output order equals input order.
pub fn evaluate_batch(
    scene: &Scene,
    trajectories: &[Trajectory],
    cfg: &EvaluatorConfig,
    weights: &ScoreWeights,
    jobs: usize,
) -> Result<Vec<ScoredRecord>> {
    let human = human_reference(scene, cfg)?;
    let v2 = ScoreWeights::epdms_v2();
    let indexed: Vec<(usize, &Trajectory)> = trajectories.iter().enumerate().collect();
    par_map(jobs, &indexed, |&(i, traj)| {
        let s = compute_subscores(scene, traj, cfg)?;
        Ok(ScoredRecord {
            scene_id: scene.id.clone(),
            candidate_id: i,
            subscores: s,
            pdms: compose_pdms(&s, weights),
            epdms: compose_epdms(&s, &human, &v2),
            hash: None,
            cache_version: None,
        })
    })
    .into_iter()
    .collect()
}

pub const CACHE_VERSION: u32 = 1;

/// Score cache keyed by `(scene_id, trajectory content hash)`. Stored as the
/// scored-record JSONL plus `hash` and `cache_version`; records from another
/// version are dropped on load and recomputed.
#[derive(Debug, Default, Clone)]
pub struct ScoreCache {
    entries: BTreeMap<(String, String), ScoredRecord>,
}

impl ScoreCache {
    pub fn load(path: &Path) -> Result<Self> {
        let mut cache = Self::default();
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(cache),
            Err(e) => {
                return Err(Error::File {
                    path: path.display().to_string(),
                    source: e,
                })
            }
        };
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let Ok(rec) = serde_json::from_str::<ScoredRecord>(line) else {
                // unreadable cache lines are recomputed
                continue;
            };
            if rec.cache_version != Some(CACHE_VERSION) {
                continue;
            }
            if let Some(h) = rec.hash.clone() {
                cache.entries.insert((rec.scene_id.clone(), h), rec);
            }
        }
        Ok(cache)
    }

    pub fn get(&self, scene_id: &str, hash: &str) -> Option<&ScoredRecord> {
        self.entries.get(&(scene_id.to_string(), hash.to_string()))
    }

    pub fn insert(&mut self, mut rec: ScoredRecord, hash: String) {
        rec.hash = Some(hash.clone());
        rec.cache_version = Some(CACHE_VERSION);
        self.entries.insert((rec.scene_id.clone(), hash), rec);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for rec in self.entries.values() {
            out.push_str(&serde_json::to_string(rec)?);
            out.push('\n');
        }
        write_atomic(path, out.as_bytes())
    }
}

/// Scores trajectories through the cache, filling it with misses.
pub fn evaluate_cached(
    scene: &Scene,
    trajectories: &[Trajectory],
    cfg: &EvaluatorConfig,
    weights: &ScoreWeights,
    cache: &mut ScoreCache,
    jobs: usize,
) -> Result<Vec<ScoredRecord>> {
    let hashes: Vec<String> = trajectories.iter().map(|t| t.content_hash()).collect();
    let missing: Vec<usize> = (0..trajectories.len())
        .filter(|&i| cache.get(&scene.id, &hashes[i]).is_none())
        .collect();
    let to_score: Vec<Trajectory> = missing.iter().map(|&i| trajectories[i].clone()).collect();
    let scored = evaluate_batch(scene, &to_score, cfg, weights, jobs)?;
    for (rec, &i) in scored.into_iter().zip(&missing) {
        cache.insert(rec, hashes[i].clone());
    }
    let out = hashes
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let mut rec = cache.get(&scene.id, h).expect("filled above").clone();
            rec.candidate_id = i;
            rec.hash = Some(h.clone());
            rec.cache_version = None;
            rec
        })
        .collect();
    Ok(out)
}
