//! Pseudo-expert generation: structured candidate families in the
//! centerline frame, a geometric pre-check, evaluator scoring,
//! coverage-aware selection, boundary interpolation and the training-time
//! farthest-point sampler.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, FamilyName, Result};
use crate::evaluator::{
    compose_epdms, compose_pdms, compute_subscores, human_reference, trajectory_footprints, EvaluatorConfig,
    ScoreWeights, SubScores,
};
use crate::scene::{Pose2D, Scene, Trajectory};
use crate::util::{derive_seed, par_map};

/// The quintic `6r⁵ − 15r⁴ + 10r³` on the whole real line.
pub fn quintic(r: f64) -> f64 {
    r * r * r * (r * (6.0 * r - 15.0) + 10.0)
}

/// [`quintic`] with `r` clamped to `[0, 1]`.
pub fn smooth_step(r: f64) -> f64 {
    quintic(r.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    LateralTransition,
    OffRoad,
    AccelProfile,
    StopGo,
    ApproachBrake,
    Overshoot,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::LateralTransition,
        Family::OffRoad,
        Family::AccelProfile,
        Family::StopGo,
        Family::ApproachBrake,
        Family::Overshoot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::LateralTransition => "lateral_transition",
            Family::OffRoad => "off_road",
            Family::AccelProfile => "accel_profile",
            Family::StopGo => "stop_go",
            Family::ApproachBrake => "approach_brake",
            Family::Overshoot => "overshoot",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FamilyTargets {
    pub lateral_transition: usize,
    pub off_road: usize,
    pub accel_profile: usize,
    pub stop_go: usize,
    pub approach_brake: usize,
    pub overshoot: usize,
}

impl Default for FamilyTargets {
    fn default() -> Self {
        Self {
            lateral_transition: 200,
            off_road: 12,
            accel_profile: 18,
            stop_go: 9,
            approach_brake: 10,
            overshoot: 12,
        }
    }
}

impl FamilyTargets {
    pub fn get(&self, f: Family) -> usize {
        match f {
            Family::LateralTransition => self.lateral_transition,
            Family::OffRoad => self.off_road,
            Family::AccelProfile => self.accel_profile,
            Family::StopGo => self.stop_go,
            Family::ApproachBrake => self.approach_brake,
            Family::Overshoot => self.overshoot,
        }
    }

    pub fn total(&self) -> usize {
        Family::ALL.iter().map(|&f| self.get(f)).sum()
    }
}

/// Generation, selection and sampling parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FamilyConfig {
    pub speeds: Vec<f64>,
    pub regular_laterals: Vec<f64>,
    pub offroad_laterals: Vec<f64>,
    pub portions: Vec<f64>,
    pub accels: Vec<f64>,
    pub targets: FamilyTargets,
    /// Steps of constant speed before braking, approach-brake family.
    pub brake_steps: Vec<usize>,
    pub brake_decels: Vec<f64>,
    /// Peak lateral excursion as a multiple of the commanded change.
    pub overshoot_ratio: f64,
    /// Fraction of the transition window spent reaching the peak.
    pub overshoot_rise: f64,
    pub max_scored: usize,
    pub pool_keep: usize,
    pub score_bins: Vec<f64>,
    pub progress_bins: Vec<f64>,
    pub boundary_drop: f64,
    pub max_boundaries: usize,
    pub samples_per_boundary: usize,
    /// Obstacle clearance (m) below which a candidate is near-feasible.
    pub precheck_margin: f64,
    /// Off-drivable steps tolerated before a candidate is infeasible.
    pub max_offroad_steps: usize,
    pub train_threshold: f64,
    pub train_top_k: usize,
    pub fps_heading_weight: f64,
    /// Mean-L1 distance (m) beyond which the human trajectory is appended.
    pub human_coverage_radius: f64,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        Self {
            speeds: vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 15.0],
            regular_laterals: vec![-3.5, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 3.5],
            offroad_laterals: vec![-7.0, -5.5, 5.5, 7.0],
            portions: vec![0.35, 0.6, 1.0],
            accels: vec![-2.0, -1.0, -0.5, 0.5, 1.0, 2.0],
            targets: FamilyTargets::default(),
            brake_steps: vec![2, 4],
            brake_decels: vec![-2.0, -1.0, -0.5],
            overshoot_ratio: 1.3,
            overshoot_rise: 0.6,
            max_scored: 180,
            pool_keep: 50,
            score_bins: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.01],
            progress_bins: vec![0.0, 0.2, 0.5, 0.8, 1.01],
            boundary_drop: 0.25,
            max_boundaries: 3,
            samples_per_boundary: 1,
            precheck_margin: 0.5,
            max_offroad_steps: 2,
            train_threshold: 0.8,
            train_top_k: 8,
            fps_heading_weight: 1.0,
            human_coverage_radius: 1.0,
        }
    }
}

fn check_increasing(name: &str, v: &[f64]) -> Result<()> {
    if v.len() < 2 || v.windows(2).any(|w| !(w[0] < w[1])) || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("{name} must be a strictly increasing list of at least two edges")));
    }
    Ok(())
}

impl FamilyConfig {
    pub fn validate(&self) -> Result<()> {
        for f in Family::ALL {
            if self.targets.get(f) == 0 {
                return Err(Error::invalid(format!("target count for {} must be positive", f.name())));
            }
        }
        let lists = [
            ("speeds", &self.speeds),
            ("regular_laterals", &self.regular_laterals),
            ("offroad_laterals", &self.offroad_laterals),
            ("portions", &self.portions),
            ("accels", &self.accels),
            ("brake_decels", &self.brake_decels),
        ];
        for (name, l) in lists {
            if l.is_empty() || l.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("{name} must be a non-empty list of finite values")));
            }
        }
        if self.speeds.iter().any(|&s| s < 0.0) {
            return Err(Error::invalid("speeds must be non-negative"));
        }
        if self.portions.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
            return Err(Error::invalid("portions must lie in (0, 1]"));
        }
        if self.brake_steps.is_empty() {
            return Err(Error::invalid("brake_steps must be non-empty"));
        }
        if !(self.overshoot_rise > 0.0 && self.overshoot_rise < 1.0) {
            return Err(Error::invalid("overshoot_rise must lie in (0, 1)"));
        }
        check_increasing("score_bins", &self.score_bins)?;
        check_increasing("progress_bins", &self.progress_bins)?;
        if self.max_scored == 0 || self.pool_keep == 0 || self.train_top_k == 0 {
            return Err(Error::invalid("max_scored, pool_keep and train_top_k must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feasibility {
    Feasible,
    NearFeasible,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateParams {
    /// Commanded speed; the ego speed for the acceleration family.
    pub speed: f64,
    pub lat_start: f64,
    pub lat_end: f64,
    pub portion: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accel: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brake_step: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub family: Family,
    pub params: CandidateParams,
    pub trajectory: Trajectory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feasibility: Option<Feasibility>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CoverageKey {
    pub dac: u8,
    /// NC on the half-step scale: 0, 1 (static contact) or 2 (clear).
    pub collision: u8,
    pub ttc: u8,
    pub comfort: u8,
    pub progress_bin: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub candidate_id: usize,
    pub candidate: Candidate,
    pub subscores: SubScores,
    pub pdms: f64,
    pub epdms: f64,
    pub coverage_key: CoverageKey,
    pub score_bin: usize,
}

/// Index of the half-open bin containing `v`; values outside the edges are
/// clamped to the first or last bin.
pub fn bin_index(edges: &[f64], v: f64) -> usize {
    let nb = edges.len().saturating_sub(1).max(1);
    let pos = edges.partition_point(|&e| e <= v);
    pos.saturating_sub(1).min(nb - 1)
}

pub fn coverage_key(s: &SubScores, progress_bins: &[f64]) -> CoverageKey {
    CoverageKey {
        dac: s.dac.round() as u8,
        collision: (s.nc * 2.0).round() as u8,
        ttc: s.ttc.round() as u8,
        comfort: s.comfort.round() as u8,
        progress_bin: bin_index(progress_bins, s.ep),
    }
}

fn speeds_to_stations(d0: f64, speeds: &[f64], dt: f64) -> Vec<f64> {
    let mut d = d0;
    speeds
        .iter()
        .map(|v| {
            d += v * dt;
            d
        })
        .collect()
}

fn trajectory_from_frenet(scene: &Scene, stations: &[f64], laterals: &[f64]) -> Result<Trajectory> {
    let poses: Vec<Pose2D> = stations
        .iter()
        .zip(laterals)
        .map(|(&d, &l)| scene.centerline.to_cartesian(d, l))
        .collect();
    Trajectory::new(poses, scene.dt)
}

/// Maps a per-step speed profile and a smooth lateral transition over the
/// first `portion` of the horizon to Cartesian poses.
pub fn build_candidate(scene: &Scene, speed_profile: &[f64], lat_start: f64, lat_end: f64, portion: f64) -> Result<Trajectory> {
    let laterals = transition_laterals(scene.horizon_steps, lat_start, lat_end, portion, None)?;
    build_from_profiles(scene, speed_profile, &laterals)
}

fn build_from_profiles(scene: &Scene, speed_profile: &[f64], laterals: &[f64]) -> Result<Trajectory> {
    if speed_profile.len() != scene.horizon_steps {
        return Err(Error::invalid(format!(
            "speed profile has {} entries, horizon is {}",
            speed_profile.len(),
            scene.horizon_steps
        )));
    }
    let stations = speeds_to_stations(scene.ego.station, speed_profile, scene.dt);
    trajectory_from_frenet(scene, &stations, laterals)
}

/// Lateral offsets for steps `1..=T`. With `overshoot = Some((ratio, rise))`
/// the offset first reaches `ratio·Δ` over the `rise` fraction of the
/// window, then settles to `Δ`.
fn transition_laterals(t_steps: usize, lat_start: f64, lat_end: f64, portion: f64, overshoot: Option<(f64, f64)>) -> Result<Vec<f64>> {
    if !(portion > 0.0 && portion <= 1.0) {
        return Err(Error::invalid(format!("portion must lie in (0, 1], got {portion}")));
    }
    let delta = lat_end - lat_start;
    let window = portion * t_steps as f64;
    Ok((1..=t_steps)
        .map(|t| {
            let r = (t as f64 / window).min(1.0);
            match overshoot {
                None => lat_start + delta * smooth_step(r),
                Some((ratio, rise)) => {
                    if r <= rise {
                        lat_start + ratio * delta * smooth_step(r / rise)
                    } else {
                        lat_start + ratio * delta - (ratio - 1.0) * delta * smooth_step((r - rise) / (1.0 - rise))
                    }
                }
            }
        })
        .collect())
}

struct GridEntry {
    stratum: usize,
    params: CandidateParams,
    speeds: Vec<f64>,
}

fn family_grid(scene: &Scene, family: Family, cfg: &FamilyConfig) -> Vec<GridEntry> {
    let t_steps = scene.horizon_steps;
    let dt = scene.dt;
    let lat0 = scene.ego.lateral;
    let constant = |v: f64| vec![v; t_steps];
    let mut grid = Vec::new();
    let lateral_grid = |laterals: &[f64], grid: &mut Vec<GridEntry>, skip_zero_delta: bool| {
        for (si, &speed) in cfg.speeds.iter().enumerate() {
            for &lat in laterals {
                if skip_zero_delta && (lat - lat0).abs() < 1e-9 {
                    continue;
                }
                for &portion in &cfg.portions {
                    grid.push(GridEntry {
                        stratum: si,
                        params: CandidateParams {
                            speed,
                            lat_start: lat0,
                            lat_end: lat,
                            portion,
                            accel: None,
                            brake_step: None,
                        },
                        speeds: constant(speed),
                    });
                }
            }
        }
    };
    match family {
        Family::LateralTransition => lateral_grid(&cfg.regular_laterals, &mut grid, false),
        Family::OffRoad => lateral_grid(&cfg.offroad_laterals, &mut grid, false),
        Family::Overshoot => lateral_grid(&cfg.regular_laterals, &mut grid, true),
        Family::AccelProfile => {
            let v0 = scene.ego.speed;
            for (ai, &a) in cfg.accels.iter().enumerate() {
                let speeds: Vec<f64> = (1..=t_steps).map(|k| (v0 + a * k as f64 * dt).max(0.0)).collect();
                for &lat in &cfg.regular_laterals {
                    grid.push(GridEntry {
                        stratum: ai,
                        params: CandidateParams {
                            speed: v0,
                            lat_start: lat0,
                            lat_end: lat,
                            portion: 1.0,
                            accel: Some(a),
                            brake_step: None,
                        },
                        speeds: speeds.clone(),
                    });
                }
            }
        }
        Family::StopGo => {
            let half = (t_steps as f64 / 2.0).max(1.0);
            for (si, &speed) in cfg.speeds.iter().enumerate() {
                let speeds: Vec<f64> = (1..=t_steps).map(|k| speed * (1.0 - k as f64 / half).max(0.0)).collect();
                for &lat in &cfg.regular_laterals {
                    grid.push(GridEntry {
                        stratum: si,
                        params: CandidateParams {
                            speed,
                            lat_start: lat0,
                            lat_end: lat,
                            portion: 1.0,
                            accel: None,
                            brake_step: None,
                        },
                        speeds: speeds.clone(),
                    });
                }
            }
        }
        Family::ApproachBrake => {
            for (si, &speed) in cfg.speeds.iter().enumerate() {
                for &k0 in &cfg.brake_steps {
                    for &decel in &cfg.brake_decels {
                        let speeds: Vec<f64> = (1..=t_steps)
                            .map(|k| {
                                if k <= k0 {
                                    speed
                                } else {
                                    (speed + decel * (k - k0) as f64 * dt).max(0.0)
                                }
                            })
                            .collect();
                        grid.push(GridEntry {
                            stratum: si,
                            params: CandidateParams {
                                speed,
                                lat_start: lat0,
                                lat_end: lat0,
                                portion: 1.0,
                                accel: Some(decel),
                                brake_step: Some(k0),
                            },
                            speeds,
                        });
                    }
                }
            }
        }
    }
    grid
}

/// Picks `target` entries by seeded round-robin over strata: each stratum
/// is shuffled, then strata are visited in order taking one entry per visit.
/// The result is returned in grid order.
fn stratified_subsample(strata: &[usize], target: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &s) in strata.iter().enumerate() {
        groups.entry(s).or_default().push(i);
    }
    let mut queues: Vec<Vec<usize>> = groups
        .into_values()
        .map(|mut g| {
            g.shuffle(rng);
            g.reverse();
            g
        })
        .collect();
    let mut picked = Vec::with_capacity(target);
    while picked.len() < target {
        let mut progressed = false;
        for q in queues.iter_mut() {
            if picked.len() == target {
                break;
            }
            if let Some(i) = q.pop() {
                picked.push(i);
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    picked.sort_unstable();
    picked
}

fn build_entry(scene: &Scene, family: Family, cfg: &FamilyConfig, params: &CandidateParams, speeds: &[f64]) -> Result<Trajectory> {
    let overshoot = (family == Family::Overshoot).then_some((cfg.overshoot_ratio, cfg.overshoot_rise));
    let laterals = transition_laterals(scene.horizon_steps, params.lat_start, params.lat_end, params.portion, overshoot)?;
    build_from_profiles(scene, speeds, &laterals)
}

/// Enumerates each family grid, drops entries whose final station runs past
/// the end of the centerline, and subsamples to the configured count.
pub fn generate_families(scene: &Scene, cfg: &FamilyConfig, seed: u64) -> Result<Vec<Candidate>> {
    cfg.validate()?;
    let length = scene.centerline.length();
    let mut out = Vec::with_capacity(cfg.targets.total());
    for family in Family::ALL {
        let target = cfg.targets.get(family);
        let grid: Vec<GridEntry> = family_grid(scene, family, cfg)
            .into_iter()
            .filter(|e| {
                let end = scene.ego.station + e.speeds.iter().sum::<f64>() * scene.dt;
                end <= length + 1e-9
            })
            .collect();
        if grid.len() < target {
            return Err(Error::Generation {
                family: FamilyName(family.name()),
                message: format!(
                    "only {} grid entries fit the {:.1} m centerline, {} requested",
                    grid.len(),
                    length,
                    target
                ),
            });
        }
        let strata: Vec<usize> = grid.iter().map(|e| e.stratum).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, family.name()));
        for i in stratified_subsample(&strata, target, &mut rng) {
            let e = &grid[i];
            let trajectory = build_entry(scene, family, cfg, &e.params, &e.speeds)?;
            out.push(Candidate {
                family,
                params: e.params,
                trajectory,
                feasibility: None,
            });
        }
    }
    Ok(out)
}

/// Coarse geometric label ahead of full scoring.
pub fn precheck(scene: &Scene, trajectory: &Trajectory, eval: &EvaluatorConfig, cfg: &FamilyConfig) -> Feasibility {
    let footprints = trajectory_footprints(trajectory, &eval.vehicle);
    let mut near = false;
    for (t, fp) in footprints.iter().enumerate() {
        for obs in &scene.obstacles {
            let occ = obs.at(t);
            if fp.intersects(occ) {
                return Feasibility::Infeasible;
            }
            if !near && fp.distance(occ) < cfg.precheck_margin {
                near = true;
            }
        }
    }
    let offroad_steps = footprints
        .iter()
        .filter(|fp| fp.vertices().iter().any(|&c| !scene.point_in_drivable(c)))
        .count();
    if offroad_steps > cfg.max_offroad_steps {
        Feasibility::Infeasible
    } else if offroad_steps > 0 || near {
        Feasibility::NearFeasible
    } else {
        Feasibility::Feasible
    }
}

/// Feasible first, then near-feasible, then a seeded sample of infeasible
/// candidates; each class keeps pool order. Returns pool indices.
pub fn select_for_scoring(labels: &[Feasibility], max_scored: usize, seed: u64) -> Vec<usize> {
    let of = |f: Feasibility| -> Vec<usize> { (0..labels.len()).filter(|&i| labels[i] == f).collect() };
    let mut out: Vec<usize> = of(Feasibility::Feasible);
    out.extend(of(Feasibility::NearFeasible));
    out.truncate(max_scored);
    let room = max_scored - out.len();
    if room > 0 {
        let infeasible = of(Feasibility::Infeasible);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "infeasible-fill"));
        let mut sample: Vec<usize> = infeasible
            .choose_multiple(&mut rng, room.min(infeasible.len()))
            .copied()
            .collect();
        sample.sort_unstable();
        out.extend(sample);
    }
    out
}

/// Minimal input of the coverage greedy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageItem {
    pub key: CoverageKey,
    pub score_bin: usize,
    pub pdms: f64,
}

/// Greedy coverage selection. Each step picks the minimal
/// `10·cov_count(key) + bin_count(bin)`; ties go to higher PDMS, then lower
/// index. Returns indices in pick order.
pub fn coverage_select_indices(items: &[CoverageItem], keep: usize) -> Vec<usize> {
    let mut cov: BTreeMap<CoverageKey, usize> = BTreeMap::new();
    let mut bins: BTreeMap<usize, usize> = BTreeMap::new();
    let mut taken = vec![false; items.len()];
    let mut out = Vec::with_capacity(keep.min(items.len()));
    while out.len() < keep.min(items.len()) {
        let mut best: Option<(usize, usize)> = None;
        for (i, it) in items.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let cost = 10 * cov.get(&it.key).copied().unwrap_or(0) + bins.get(&it.score_bin).copied().unwrap_or(0);
            let better = match best {
                None => true,
                Some((bc, bi)) => cost < bc || (cost == bc && it.pdms > items[bi].pdms),
            };
            if better {
                best = Some((cost, i));
            }
        }
        let (_, i) = best.expect("unpicked item remains");
        taken[i] = true;
        *cov.entry(items[i].key).or_default() += 1;
        *bins.entry(items[i].score_bin).or_default() += 1;
        out.push(i);
    }
    out
}

pub fn coverage_select(scored: &[ScoredCandidate], keep: usize) -> Vec<ScoredCandidate> {
    let items: Vec<CoverageItem> = scored
        .iter()
        .map(|s| CoverageItem {
            key: s.coverage_key,
            score_bin: s.score_bin,
            pdms: s.pdms,
        })
        .collect();
    coverage_select_indices(&items, keep)
        .into_iter()
        .map(|i| scored[i].clone())
        .collect()
}

/// Scores candidates in parallel (order preserved).
pub fn score_candidates(
    scene: &Scene,
    candidates: &[(usize, Candidate)],
    eval: &EvaluatorConfig,
    weights: &ScoreWeights,
    cfg: &FamilyConfig,
    jobs: usize,
) -> Result<Vec<ScoredCandidate>> {
    let human = human_reference(scene, eval)?;
    let v2 = ScoreWeights::epdms_v2();
    par_map(jobs, candidates, |(id, c)| {
        let s = compute_subscores(scene, &c.trajectory, eval)?;
        let pdms = compose_pdms(&s, weights);
        Ok(ScoredCandidate {
            candidate_id: *id,
            candidate: c.clone(),
            subscores: s,
            pdms,
            epdms: compose_epdms(&s, &human, &v2),
            coverage_key: coverage_key(&s, &cfg.progress_bins),
            score_bin: bin_index(&cfg.score_bins, pdms),
        })
    })
    .into_iter()
    .collect()
}

type GroupKey = (Family, u64, Option<u64>, u64, Option<usize>);

fn group_key(c: &Candidate) -> GroupKey {
    let p = &c.params;
    (c.family, p.speed.to_bits(), p.accel.map(f64::to_bits), p.portion.to_bits(), p.brake_step)
}

/// A detected score boundary between two adjacent lateral targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Boundary {
    /// Indices into the scored slice, ordered by `lat_end`.
    pub low_lat: usize,
    pub high_lat: usize,
    pub drop: f64,
}

/// Adjacent pairs (by `lat_end` within a family/speed/profile group) whose
/// PDMS differs by more than `threshold`, largest drops first, capped at
/// `max_boundaries`. Ties keep group order.
pub fn find_boundaries(scored: &[ScoredCandidate], threshold: f64, max_boundaries: usize) -> Vec<Boundary> {
    let mut groups: BTreeMap<GroupKey, Vec<usize>> = BTreeMap::new();
    for (i, s) in scored.iter().enumerate() {
        groups.entry(group_key(&s.candidate)).or_default().push(i);
    }
    let mut found = Vec::new();
    for mut members in groups.into_values() {
        members.sort_by(|&a, &b| {
            scored[a]
                .candidate
                .params
                .lat_end
                .total_cmp(&scored[b].candidate.params.lat_end)
                .then(a.cmp(&b))
        });
        for w in members.windows(2) {
            let (a, b) = (&scored[w[0]], &scored[w[1]]);
            if (b.candidate.params.lat_end - a.candidate.params.lat_end).abs() < 1e-9 {
                continue;
            }
            let drop = (a.pdms - b.pdms).abs();
            if drop > threshold {
                found.push(Boundary {
                    low_lat: w[0],
                    high_lat: w[1],
                    drop,
                });
            }
        }
    }
    found.sort_by(|a, b| b.drop.total_cmp(&a.drop));
    found.truncate(max_boundaries);
    found
}

fn profile_speeds(scene: &Scene, c: &Candidate) -> Vec<f64> {
    // recover the per-step speeds from the stored stations
    let stations: Vec<f64> = c
        .trajectory
        .poses()
        .iter()
        .map(|p| scene.centerline.project(p.position()).0)
        .collect();
    let mut prev = scene.ego.station;
    stations
        .iter()
        .map(|&d| {
            let v = (d - prev) / scene.dt;
            prev = d;
            v
        })
        .collect()
}

fn regenerate_speeds(scene: &Scene, c: &Candidate) -> Vec<f64> {
    let t_steps = scene.horizon_steps;
    let dt = scene.dt;
    let p = &c.params;
    match c.family {
        Family::LateralTransition | Family::OffRoad | Family::Overshoot => vec![p.speed; t_steps],
        Family::AccelProfile => {
            let a = p.accel.unwrap_or(0.0);
            (1..=t_steps).map(|k| (p.speed + a * k as f64 * dt).max(0.0)).collect()
        }
        Family::StopGo => {
            let half = (t_steps as f64 / 2.0).max(1.0);
            (1..=t_steps).map(|k| p.speed * (1.0 - k as f64 / half).max(0.0)).collect()
        }
        Family::ApproachBrake => match (p.brake_step, p.accel) {
            (Some(k0), Some(decel)) => (1..=t_steps)
                .map(|k| {
                    if k <= k0 {
                        p.speed
                    } else {
                        (p.speed + decel * (k - k0) as f64 * dt).max(0.0)
                    }
                })
                .collect(),
            _ => profile_speeds(scene, c),
        },
    }
}

/// Interpolates `samples_per_boundary` candidates between the two sides of
/// each boundary and scores them. New ids continue from `next_id`.
#[allow(clippy::too_many_arguments)]
pub fn boundary_interpolate(
    scene: &Scene,
    scored: &[ScoredCandidate],
    cfg: &FamilyConfig,
    eval: &EvaluatorConfig,
    weights: &ScoreWeights,
    next_id: usize,
    jobs: usize,
) -> Result<Vec<ScoredCandidate>> {
    let boundaries = find_boundaries(scored, cfg.boundary_drop, cfg.max_boundaries);
    let mut fresh = Vec::new();
    for b in &boundaries {
        let lo = &scored[b.low_lat].candidate;
        let hi = &scored[b.high_lat].candidate;
        let speeds = regenerate_speeds(scene, lo);
        for j in 1..=cfg.samples_per_boundary {
            let f = j as f64 / (cfg.samples_per_boundary + 1) as f64;
            let mut params = lo.params;
            params.lat_end = lo.params.lat_end + f * (hi.params.lat_end - lo.params.lat_end);
            let trajectory = build_entry(scene, lo.family, cfg, &params, &speeds)?;
            let feasibility = Some(precheck(scene, &trajectory, eval, cfg));
            fresh.push((
                next_id + fresh.len(),
                Candidate {
                    family: lo.family,
                    params,
                    trajectory,
                    feasibility,
                },
            ));
        }
    }
    score_candidates(scene, &fresh, eval, weights, cfg, jobs)
}

/// Greedy farthest-point order over `trajs` seeded at index 0, stopping at
/// `m` picks. Ties go to the lower index.
pub fn farthest_point_indices(trajs: &[Trajectory], m: usize, heading_weight: f64) -> Vec<usize> {
    if trajs.is_empty() || m == 0 {
        return Vec::new();
    }
    let mut picked = vec![0usize];
    let mut min_d: Vec<f64> = trajs
        .iter()
        .map(|t| t.mean_l1_distance(&trajs[0], heading_weight))
        .collect();
    let mut taken = vec![false; trajs.len()];
    taken[0] = true;
    while picked.len() < m.min(trajs.len()) {
        let mut best: Option<usize> = None;
        for i in 0..trajs.len() {
            if !taken[i] && best.is_none_or(|b| min_d[i] > min_d[b]) {
                best = Some(i);
            }
        }
        let b = best.expect("unpicked remains");
        taken[b] = true;
        picked.push(b);
        for i in 0..trajs.len() {
            let d = trajs[i].mean_l1_distance(&trajs[b], heading_weight);
            if d < min_d[i] {
                min_d[i] = d;
            }
        }
    }
    picked
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub trajectories: Vec<Trajectory>,
    /// Candidate id per entry; `None` for the human trajectory.
    pub sources: Vec<Option<usize>>,
    pub mask: Vec<u8>,
}

impl TrainingSample {
    /// Zero-padded `M × T × 3` array plus a length-`M` mask.
    pub fn padded(&self, m: usize) -> (Vec<Vec<[f64; 3]>>, Vec<u8>) {
        let t_steps = self.trajectories.first().map_or(0, Trajectory::len);
        let mut arr: Vec<Vec<[f64; 3]>> = self.trajectories.iter().take(m).map(Trajectory::to_triples).collect();
        let mut mask: Vec<u8> = self.mask.iter().take(m).copied().collect();
        while arr.len() < m {
            arr.push(vec![[0.0; 3]; t_steps]);
            mask.push(0);
        }
        (arr, mask)
    }
}

/// Threshold, sort by PDMS (ties by id), farthest-point sample up to `M`,
/// then append the human trajectory when it is not covered. An empty
/// qualifying pool yields the human trajectory alone.
pub fn training_sample(pool: &[ScoredCandidate], human: &Trajectory, cfg: &FamilyConfig) -> TrainingSample {
    let mut qualifying: Vec<&ScoredCandidate> = pool.iter().filter(|s| s.pdms >= cfg.train_threshold).collect();
    if qualifying.is_empty() {
        return TrainingSample {
            trajectories: vec![human.clone()],
            sources: vec![None],
            mask: vec![1],
        };
    }
    qualifying.sort_by(|a, b| b.pdms.total_cmp(&a.pdms).then(a.candidate_id.cmp(&b.candidate_id)));
    let trajs: Vec<Trajectory> = qualifying.iter().map(|s| s.candidate.trajectory.clone()).collect();
    let order = farthest_point_indices(&trajs, cfg.train_top_k, cfg.fps_heading_weight);
    let mut trajectories: Vec<Trajectory> = order.iter().map(|&i| trajs[i].clone()).collect();
    let mut sources: Vec<Option<usize>> = order.iter().map(|&i| Some(qualifying[i].candidate_id)).collect();
    let human_gap = trajectories
        .iter()
        .map(|t| t.mean_l1_distance(human, cfg.fps_heading_weight))
        .fold(f64::INFINITY, f64::min);
    if human_gap > cfg.human_coverage_radius && trajectories.len() < cfg.train_top_k {
        trajectories.push(human.clone());
        sources.push(None);
    }
    let mask = vec![1; trajectories.len()];
    TrainingSample {
        trajectories,
        sources,
        mask,
    }
}

/// Every stage of the per-scene pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub scene_id: String,
    pub candidates: Vec<Candidate>,
    pub selected_for_scoring: Vec<usize>,
    pub scored: Vec<ScoredCandidate>,
    pub retained: Vec<ScoredCandidate>,
    pub interpolated: Vec<ScoredCandidate>,
    /// Retained plus interpolated candidates with DDC = 1.
    pub pool: Vec<ScoredCandidate>,
    pub training: TrainingSample,
}

pub fn run_pipeline(
    scene: &Scene,
    cfg: &FamilyConfig,
    eval: &EvaluatorConfig,
    weights: &ScoreWeights,
    seed: u64,
    jobs: usize,
) -> Result<PipelineOutput> {
    let scene_seed = derive_seed(seed, &scene.id);
    let mut candidates = generate_families(scene, cfg, scene_seed)?;
    let labels: Vec<Feasibility> = par_map(jobs, &candidates, |c| precheck(scene, &c.trajectory, eval, cfg));
    for (c, l) in candidates.iter_mut().zip(&labels) {
        c.feasibility = Some(*l);
    }
    let selected = select_for_scoring(&labels, cfg.max_scored, scene_seed);
    let to_score: Vec<(usize, Candidate)> = selected.iter().map(|&i| (i, candidates[i].clone())).collect();
    let scored = score_candidates(scene, &to_score, eval, weights, cfg, jobs)?;
    let retained = coverage_select(&scored, cfg.pool_keep);
    let cleaned: Vec<ScoredCandidate> = retained.iter().filter(|s| s.subscores.ddc >= 1.0).cloned().collect();
    let interpolated = boundary_interpolate(scene, &cleaned, cfg, eval, weights, candidates.len(), jobs)?;
    let mut pool = cleaned;
    pool.extend(interpolated.iter().filter(|s| s.subscores.ddc >= 1.0).cloned());
    let training = training_sample(&pool, &scene.human_trajectory, cfg);
    Ok(PipelineOutput {
        scene_id: scene.id.clone(),
        candidates,
        selected_for_scoring: selected,
        scored,
        retained,
        interpolated,
        pool,
        training,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Polygon;
    use crate::scene::{Centerline, EgoState, ObstacleTrack};
    use proptest::prelude::*;
    use rand::Rng;

    fn scene_with(obstacles: Vec<ObstacleTrack>, cl_end: f64) -> Scene {
        let centerline = Centerline::from_points(&[[-10.0, 0.0], [cl_end, 0.0]]).unwrap();
        let human = Trajectory::new((1..=8).map(|t| Pose2D::new(4.0 * t as f64, 0.0, 0.0)).collect(), 0.5).unwrap();
        Scene {
            id: "s".into(),
            dt: 0.5,
            horizon_steps: 8,
            ego: EgoState {
                pose: Pose2D::new(0.0, 0.0, 0.0),
                speed: 8.0,
                station: 10.0,
                lateral: 0.0,
            },
            centerline,
            drivable: vec![Polygon::rect(-10.0, -5.25, cl_end, 5.25).unwrap()],
            obstacles,
            human_trajectory: human,
            traffic_light_zone: None,
            human_subscores: None,
        }
    }

    #[test]
    fn smooth_step_values() {
        assert_eq!(smooth_step(0.0), 0.0);
        assert_eq!(smooth_step(1.0), 1.0);
        assert_eq!(smooth_step(0.5), 0.5);
        assert_eq!(smooth_step(-1.0), 0.0);
        assert_eq!(smooth_step(2.0), 1.0);
    }

    #[test]
    fn build_candidate_examples() {
        let scene = scene_with(vec![], 120.0);
        let still = build_candidate(&scene, &[0.0; 8], 0.0, 0.0, 1.0).unwrap();
        assert!(still.poses().iter().all(|p| p.x.abs() < 1e-12 && p.y.abs() < 1e-12));
        let slow = build_candidate(&scene, &[2.0; 8], 0.0, 0.0, 1.0).unwrap();
        for (t, p) in slow.poses().iter().enumerate() {
            // station d0 + (t+1)·1.0 sits at x = (t+1) since the line starts at −10
            assert!((p.x - (t + 1) as f64).abs() < 1e-9);
        }
        let shift = build_candidate(&scene, &[2.0; 8], 0.0, 2.0, 1.0).unwrap();
        assert!((shift.poses()[3].y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn default_counts_and_offroad_targets() {
        let scene = scene_with(vec![], 120.0);
        let c = generate_families(&scene, &FamilyConfig::default(), 7).unwrap();
        assert_eq!(c.len(), 261);
        let count = |f| c.iter().filter(|x| x.family == f).count();
        assert_eq!(
            Family::ALL.map(count),
            [200, 12, 18, 9, 10, 12]
        );
        for x in c.iter().filter(|x| x.family == Family::OffRoad) {
            assert!([5.5, 7.0].contains(&x.params.lat_end.abs()));
        }
        let again = generate_families(&scene, &FamilyConfig::default(), 7).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn halved_counts() {
        let scene = scene_with(vec![], 120.0);
        let d = FamilyTargets::default();
        let cfg = FamilyConfig {
            targets: FamilyTargets {
                lateral_transition: d.lateral_transition / 2,
                off_road: d.off_road / 2,
                accel_profile: d.accel_profile / 2,
                stop_go: d.stop_go / 2,
                approach_brake: d.approach_brake / 2,
                overshoot: d.overshoot / 2,
            },
            ..FamilyConfig::default()
        };
        let n = generate_families(&scene, &cfg, 1).unwrap().len();
        assert!(n == 130 || n == 131);
    }

    #[test]
    fn short_centerline_names_family() {
        let scene = scene_with(vec![], 15.0);
        match generate_families(&scene, &FamilyConfig::default(), 1) {
            Err(Error::Generation { family, .. }) => assert_eq!(family.0, "lateral_transition"),
            other => panic!("expected generation error, got {other:?}"),
        }
    }

    #[test]
    fn overshoot_peaks_past_target() {
        let scene = scene_with(vec![], 120.0);
        let cfg = FamilyConfig::default();
        let c = generate_families(&scene, &cfg, 3).unwrap();
        for x in c.iter().filter(|x| x.family == Family::Overshoot) {
            let d = x.params.lat_end - x.params.lat_start;
            let peak = x.trajectory.poses().iter().map(|p| p.y * d.signum()).fold(f64::MIN, f64::max);
            assert!(peak > d.abs() + 1e-9);
            assert!((x.trajectory.last().y - x.params.lat_end).abs() < 1e-9);
        }
    }

    #[test]
    fn precheck_labels() {
        let cfg = FamilyConfig::default();
        let eval = EvaluatorConfig::default();
        let scene = scene_with(vec![], 120.0);
        let straight = build_candidate(&scene, &[4.0; 8], 0.0, 0.0, 1.0).unwrap();
        assert_eq!(precheck(&scene, &straight, &eval, &cfg), Feasibility::Feasible);

        let block = Polygon::rect(8.0, -1.0, 12.0, 1.0).unwrap();
        let blocked = scene_with(
            vec![ObstacleTrack {
                footprints: vec![block; 8],
                is_static: true,
            }],
            120.0,
        );
        assert_eq!(precheck(&blocked, &straight, &eval, &cfg), Feasibility::Infeasible);

        // lateral 4.5 only at the final step: one off-drivable step
        let poses: Vec<Pose2D> = (1..=8)
            .map(|t| Pose2D::new(2.0 * t as f64, if t == 8 { 4.5 } else { 0.0 }, 0.0))
            .collect();
        let one = Trajectory::new(poses, 0.5).unwrap();
        assert_eq!(precheck(&scene, &one, &eval, &cfg), Feasibility::NearFeasible);
    }

    #[test]
    fn select_for_scoring_examples() {
        use Feasibility::*;
        let mut labels = vec![Feasible; 100];
        labels.extend(vec![NearFeasible; 50]);
        labels.extend(vec![Infeasible; 200]);
        let s = select_for_scoring(&labels, 180, 1);
        assert_eq!(s.len(), 180);
        assert!(s[..100].iter().all(|&i| labels[i] == Feasible));
        assert!(s[100..150].iter().all(|&i| labels[i] == NearFeasible));
        assert!(s[150..].iter().all(|&i| labels[i] == Infeasible));
        assert_eq!(s, select_for_scoring(&labels, 180, 1));

        let small = vec![Infeasible, Feasible, NearFeasible];
        assert_eq!(select_for_scoring(&small, 180, 1).len(), 3);
        let bad = vec![Infeasible; 300];
        assert_eq!(select_for_scoring(&bad, 180, 9).len(), 180);
    }

    fn key(dac: u8, bin: usize) -> CoverageKey {
        CoverageKey {
            dac,
            collision: 2,
            ttc: 1,
            comfort: 1,
            progress_bin: bin,
        }
    }

    #[test]
    fn coverage_cost_and_ties() {
        let a = CoverageItem {
            key: key(1, 3),
            score_bin: 4,
            pdms: 0.9,
        };
        let b = CoverageItem { pdms: 0.95, ..a };
        // first pick: all costs are 0, max pdms wins
        assert_eq!(coverage_select_indices(&[a, b], 1), vec![1]);
        // distinct keys and bins: pdms-descending
        let items: Vec<CoverageItem> = (0..5)
            .map(|i| CoverageItem {
                key: key(1, i),
                score_bin: i,
                pdms: i as f64 / 10.0,
            })
            .collect();
        assert_eq!(coverage_select_indices(&items, 5), vec![4, 3, 2, 1, 0]);
    }

    #[test]
    fn coverage_cost_formula() {
        // candidate sharing its key with 2 picks and its bin with 3 picks
        let picked = [
            CoverageItem { key: key(1, 0), score_bin: 0, pdms: 1.0 },
            CoverageItem { key: key(1, 0), score_bin: 0, pdms: 1.0 },
            CoverageItem { key: key(0, 0), score_bin: 0, pdms: 1.0 },
        ];
        let probe = CoverageItem { key: key(1, 0), score_bin: 0, pdms: 0.0 };
        let cov = picked.iter().filter(|p| p.key == probe.key).count();
        let bin = picked.iter().filter(|p| p.score_bin == probe.score_bin).count();
        assert_eq!(10 * cov + bin, 23);
    }

    fn line(end_x: f64) -> Trajectory {
        Trajectory::new((1..=8).map(|t| Pose2D::new(end_x * t as f64 / 8.0, 0.0, 0.0)).collect(), 0.5).unwrap()
    }

    fn scored_line(id: usize, end_x: f64, pdms: f64) -> ScoredCandidate {
        ScoredCandidate {
            candidate_id: id,
            candidate: Candidate {
                family: Family::LateralTransition,
                params: CandidateParams {
                    speed: 0.0,
                    lat_start: 0.0,
                    lat_end: 0.0,
                    portion: 1.0,
                    accel: None,
                    brake_step: None,
                },
                trajectory: line(end_x),
                feasibility: None,
            },
            subscores: SubScores::ones(),
            pdms,
            epdms: pdms,
            coverage_key: key(1, 0),
            score_bin: 4,
        }
    }

    #[test]
    fn fps_three_lines() {
        let trajs = [line(0.0), line(5.0), line(10.0)];
        assert_eq!(farthest_point_indices(&trajs, 2, 1.0), vec![0, 2]);
        assert_eq!(farthest_point_indices(&trajs, 5, 1.0), vec![0, 2, 1]);
    }

    #[test]
    fn training_sample_fallback_and_threshold() {
        let human = line(30.0);
        let cfg = FamilyConfig::default();
        let low = vec![scored_line(0, 10.0, 0.5)];
        let s = training_sample(&low, &human, &cfg);
        assert_eq!(s.mask, vec![1]);
        assert_eq!(s.sources, vec![None]);

        let pool = vec![scored_line(0, 0.0, 0.9), scored_line(1, 5.0, 0.9), scored_line(2, 10.0, 0.9), scored_line(3, 1.0, 0.5)];
        let cfg2 = FamilyConfig { train_top_k: 2, ..cfg.clone() };
        let s = training_sample(&pool, &human, &cfg2);
        assert_eq!(s.sources, vec![Some(0), Some(2)]);
        let s = training_sample(&pool, &human, &cfg);
        assert_eq!(s.sources, vec![Some(0), Some(2), Some(1), None]);
        let (arr, mask) = s.padded(8);
        assert_eq!(arr.len(), 8);
        assert_eq!(mask, vec![1, 1, 1, 1, 0, 0, 0, 0]);
    }

    fn lateral_scored(id: usize, lat_end: f64, pdms: f64) -> ScoredCandidate {
        let mut s = scored_line(id, 10.0, pdms);
        s.candidate.params.lat_end = lat_end;
        s
    }

    #[test]
    fn boundary_detection() {
        let flat: Vec<_> = (0..5).map(|i| lateral_scored(i, i as f64, 0.9 - 0.1 * i as f64)).collect();
        assert!(find_boundaries(&flat, 0.25, 3).is_empty());
        let one = vec![lateral_scored(0, 0.0, 0.95), lateral_scored(1, 1.0, 0.40)];
        let b = find_boundaries(&one, 0.25, 3);
        assert_eq!(b.len(), 1);
        assert!((b[0].drop - 0.55).abs() < 1e-12);
        let zig: Vec<_> = (0..6).map(|i| lateral_scored(i, i as f64, if i % 2 == 0 { 1.0 } else { 0.1 + 0.1 * i as f64 })).collect();
        assert_eq!(find_boundaries(&zig, 0.25, 3).len(), 3);
        let drops: Vec<f64> = find_boundaries(&zig, 0.25, 3).iter().map(|b| b.drop).collect();
        assert!(drops.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn boundary_interpolation_scores_midpoint() {
        let block = Polygon::rect(14.0, 1.2, 40.0, 5.0).unwrap();
        let scene = scene_with(
            vec![ObstacleTrack {
                footprints: vec![block; 8],
                is_static: true,
            }],
            120.0,
        );
        let cfg = FamilyConfig::default();
        let eval = EvaluatorConfig::default();
        let w = ScoreWeights::default();
        let mk = |lat: f64| {
            let t = build_candidate(&scene, &[8.0; 8], 0.0, lat, 1.0).unwrap();
            (
                0usize,
                Candidate {
                    family: Family::LateralTransition,
                    params: CandidateParams {
                        speed: 8.0,
                        lat_start: 0.0,
                        lat_end: lat,
                        portion: 1.0,
                        accel: None,
                        brake_step: None,
                    },
                    trajectory: t,
                    feasibility: None,
                },
            )
        };
        let mut a = mk(0.0);
        let b = mk(3.5);
        a.0 = 0;
        let mut b2 = b.clone();
        b2.0 = 1;
        let scored = score_candidates(&scene, &[a, b2], &eval, &w, &cfg, 1).unwrap();
        assert!(scored[0].pdms - scored[1].pdms > 0.25);
        let extra = boundary_interpolate(&scene, &scored, &cfg, &eval, &w, 10, 1).unwrap();
        assert_eq!(extra.len(), 1);
        assert_eq!(extra[0].candidate_id, 10);
        assert!((extra[0].candidate.params.lat_end - 1.75).abs() < 1e-12);
    }

    #[test]
    fn pipeline_caps() {
        let block = Polygon::rect(20.0, -1.0, 24.0, 1.0).unwrap();
        let scene = scene_with(
            vec![ObstacleTrack {
                footprints: vec![block; 8],
                is_static: false,
            }],
            120.0,
        );
        let out = run_pipeline(&scene, &FamilyConfig::default(), &EvaluatorConfig::default(), &ScoreWeights::default(), 3, 1).unwrap();
        assert_eq!(out.candidates.len(), 261);
        assert!(out.scored.len() <= 180);
        assert!(out.retained.len() <= 50);
        assert!(out.interpolated.len() <= 3);
        assert!(out.training.trajectories.len() <= 8);
        assert!(out.pool.iter().all(|s| s.subscores.ddc == 1.0));
    }

    fn brute_coverage(items: &[CoverageItem], keep: usize) -> Vec<usize> {
        let mut chosen: Vec<usize> = Vec::new();
        while chosen.len() < keep.min(items.len()) {
            let costs: Vec<(usize, usize)> = (0..items.len())
                .filter(|i| !chosen.contains(i))
                .map(|i| {
                    let cov = chosen.iter().filter(|&&j| items[j].key == items[i].key).count();
                    let bin = chosen.iter().filter(|&&j| items[j].score_bin == items[i].score_bin).count();
                    (10 * cov + bin, i)
                })
                .collect();
            let min = costs.iter().map(|c| c.0).min().unwrap();
            let mut tied: Vec<usize> = costs.iter().filter(|c| c.0 == min).map(|c| c.1).collect();
            tied.sort_by(|&a, &b| items[b].pdms.total_cmp(&items[a].pdms).then(a.cmp(&b)));
            chosen.push(tied[0]);
        }
        chosen
    }

    #[test]
    fn coverage_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let n = rng.gen_range(1..=60);
            let items: Vec<CoverageItem> = (0..n)
                .map(|_| CoverageItem {
                    key: key(rng.gen_range(0..2), rng.gen_range(0..3)),
                    score_bin: rng.gen_range(0..5),
                    pdms: (rng.gen_range(0..10) as f64) / 10.0,
                })
                .collect();
            let keep = rng.gen_range(1..=n);
            assert_eq!(coverage_select_indices(&items, keep), brute_coverage(&items, keep));
        }
    }

    proptest! {
        #[test]
        fn smooth_step_monotone(a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(smooth_step(lo) <= smooth_step(hi));
            prop_assert!((smooth_step(a) + smooth_step(1.0 - a) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn fps_picks_are_greedy_maxmin(seed in 0u64..500, n in 1usize..20, m in 1usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let trajs: Vec<Trajectory> = (0..n)
                .map(|_| {
                    let ex = rng.gen_range(-10.0..10.0);
                    let ey = rng.gen_range(-3.0..3.0);
                    Trajectory::new((1..=8).map(|t| Pose2D::new(ex * t as f64 / 8.0, ey * t as f64 / 8.0, 0.0)).collect(), 0.5).unwrap()
                })
                .collect();
            let picked = farthest_point_indices(&trajs, m, 1.0);
            prop_assert_eq!(picked.len(), m.min(n));
            for k in 1..picked.len() {
                let prior = &picked[..k];
                let md = |i: usize| prior.iter().map(|&j| trajs[i].mean_l1_distance(&trajs[j], 1.0)).fold(f64::INFINITY, f64::min);
                let chosen = md(picked[k]);
                for i in 0..n {
                    if !picked[..=k].contains(&i) {
                        prop_assert!(chosen >= md(i));
                    }
                }
            }
        }

        #[test]
        fn training_sample_respects_threshold(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pool: Vec<ScoredCandidate> = (0..15).map(|i| scored_line(i, rng.gen_range(0.0..40.0), rng.gen_range(0.0..1.0))).collect();
            let human = line(20.0);
            let s = training_sample(&pool, &human, &FamilyConfig::default());
            prop_assert!(s.trajectories.len() <= 8);
            for src in s.sources.iter().flatten() {
                prop_assert!(pool[*src].pdms >= 0.8);
            }
        }
    }
}
