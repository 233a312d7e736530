//! Scorers, ranking, top-k and vector-Pareto target sets, the set-level
//! trajectory losses, anchor-assisted reranking and selected-vs-oracle
//! accounting.

use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::{compose, compute_subscores, Component, EvaluatorConfig, ScoreWeights, SubScores};
use crate::geometry::wrap_angle;
use crate::scene::{Scene, Trajectory};
use crate::util::{derive_seed, from_jsonl, read_file};

/// One scoring request.
#[derive(Debug, Clone, Copy)]
pub struct ScoreQuery<'a> {
    pub scene_id: &'a str,
    pub index: usize,
    pub trajectory: &'a Trajectory,
    pub scene: Option<&'a Scene>,
    /// Evaluator truth when it is already known (e.g. from a scored pool).
    pub truth: Option<&'a SubScores>,
}

/// Predicts sub-scores for a candidate. Implementations must be pure so
/// per-candidate calls can run concurrently.
pub trait Scorer: Sync {
    fn predict(&self, q: &ScoreQuery<'_>) -> Result<SubScores>;
    fn name(&self) -> String;
}

/// Evaluator truth: computed from the scene when available, otherwise the
/// stored truth.
#[derive(Debug, Clone, Default)]
pub struct OracleScorer {
    pub eval: EvaluatorConfig,
}

impl Scorer for OracleScorer {
    fn predict(&self, q: &ScoreQuery<'_>) -> Result<SubScores> {
        match (q.scene, q.truth) {
            (Some(scene), _) => compute_subscores(scene, q.trajectory, &self.eval),
            (None, Some(t)) => Ok(*t),
            (None, None) => Err(Error::invalid(format!(
                "oracle scorer needs a scene or stored sub-scores for `{}` #{}",
                q.scene_id, q.index
            ))),
        }
    }

    fn name(&self) -> String {
        "oracle".into()
    }
}

/// Truth plus bounded noise: EP moves by a uniform draw in `[−ε, ε]`
/// (clamped), discrete components flip to another level with probability
/// `p_flip`. The draw depends only on `(seed, scene_id, index)`.
#[derive(Debug, Clone)]
pub struct NoisyScorer {
    pub oracle: OracleScorer,
    pub epsilon: f64,
    pub p_flip: f64,
    pub seed: u64,
}

impl NoisyScorer {
    pub fn new(epsilon: f64, p_flip: f64, seed: u64) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid(format!("noise bound must be non-negative, got {epsilon}")));
        }
        if !(0.0..=1.0).contains(&p_flip) {
            return Err(Error::invalid(format!("flip probability must lie in [0, 1], got {p_flip}")));
        }
        Ok(Self {
            oracle: OracleScorer::default(),
            epsilon,
            p_flip,
            seed,
        })
    }

    fn rng(&self, scene_id: &str, index: usize, salt: &str) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(derive_seed(self.seed, &format!("{salt}/{scene_id}/{index}")))
    }

    pub fn perturb(&self, truth: &SubScores, scene_id: &str, index: usize) -> SubScores {
        let mut rng = self.rng(scene_id, index, "sub");
        let mut out = *truth;
        for c in Component::ALL {
            let v = truth.get(c);
            match c.levels() {
                None => {
                    let u = if self.epsilon > 0.0 {
                        rng.gen_range(-self.epsilon..=self.epsilon)
                    } else {
                        0.0
                    };
                    out.set(c, (v + u).clamp(0.0, 1.0));
                }
                Some(levels) => {
                    let flip: f64 = rng.gen();
                    if flip < self.p_flip {
                        let others: Vec<f64> = levels.iter().copied().filter(|&l| l != v).collect();
                        out.set(c, others[rng.gen_range(0..others.len())]);
                    }
                }
            }
        }
        out
    }

    /// Composed-score perturbation: `score + U[−ε, ε]`, clamped to `[0, 1]`.
    pub fn perturb_composed(&self, score: f64, scene_id: &str, index: usize) -> f64 {
        if self.epsilon == 0.0 {
            return score;
        }
        let mut rng = self.rng(scene_id, index, "composed");
        (score + rng.gen_range(-self.epsilon..=self.epsilon)).clamp(0.0, 1.0)
    }
}

impl Scorer for NoisyScorer {
    fn predict(&self, q: &ScoreQuery<'_>) -> Result<SubScores> {
        let truth = self.oracle.predict(q)?;
        Ok(self.perturb(&truth, q.scene_id, q.index))
    }

    fn name(&self) -> String {
        format!("noisy:{}:{}", self.epsilon, self.seed)
    }
}

#[derive(Debug, Deserialize)]
struct TabularRow {
    scene_id: String,
    candidate_id: usize,
    #[serde(flatten)]
    subscores: SubScores,
}

/// Replays precomputed predictions keyed by `(scene_id, candidate_id)`.
#[derive(Debug, Clone, Default)]
pub struct TabularScorer {
    table: HashMap<(String, usize), SubScores>,
    source: String,
}

impl TabularScorer {
    pub fn from_jsonl_str(text: &str, source: &str) -> Result<Self> {
        let rows: Vec<TabularRow> = from_jsonl(text, source)?;
        let mut table = HashMap::with_capacity(rows.len());
        for r in rows {
            r.subscores.validate()?;
            table.insert((r.scene_id, r.candidate_id), r.subscores);
        }
        Ok(Self {
            table,
            source: source.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_jsonl_str(&read_file(path)?, &path.display().to_string())
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl Scorer for TabularScorer {
    fn predict(&self, q: &ScoreQuery<'_>) -> Result<SubScores> {
        self.table
            .get(&(q.scene_id.to_string(), q.index))
            .copied()
            .ok_or_else(|| Error::invalid(format!("{}: no prediction for `{}` #{}", self.source, q.scene_id, q.index)))
    }

    fn name(&self) -> String {
        format!("tabular:{}", self.source)
    }
}

/// Parses `oracle`, `noisy:<eps>:<seed>[:<p_flip>]` or `tabular:<file>`.
pub fn scorer_from_spec(spec: &str) -> Result<Box<dyn Scorer>> {
    let parts: Vec<&str> = spec.splitn(2, ':').collect();
    match parts[0] {
        "oracle" if parts.len() == 1 => Ok(Box::new(OracleScorer::default())),
        "noisy" if parts.len() == 2 => {
            let f: Vec<&str> = parts[1].split(':').collect();
            let bad = || Error::invalid(format!("scorer `{spec}`: expected noisy:<eps>:<seed>[:<p_flip>]"));
            if f.len() < 2 || f.len() > 3 {
                return Err(bad());
            }
            let eps: f64 = f[0].parse().map_err(|_| bad())?;
            let seed: u64 = f[1].parse().map_err(|_| bad())?;
            let p_flip: f64 = match f.get(2) {
                Some(p) => p.parse().map_err(|_| bad())?,
                None => 0.0,
            };
            Ok(Box::new(NoisyScorer::new(eps, p_flip, seed)?))
        }
        "tabular" if parts.len() == 2 => Ok(Box::new(TabularScorer::load(Path::new(parts[1]))?)),
        _ => Err(Error::invalid(format!(
            "unknown scorer `{spec}` (expected oracle, noisy:<eps>:<seed> or tabular:<file>)"
        ))),
    }
}

/// Candidates of one scene, optionally with the scene geometry and the
/// evaluator truth.
#[derive(Debug, Clone)]
pub struct CandidatePool {
    pub scene_id: String,
    pub trajectories: Vec<Trajectory>,
    pub candidate_ids: Vec<usize>,
    pub truth: Option<Vec<SubScores>>,
    pub scene: Option<Scene>,
}

impl CandidatePool {
    pub fn new(scene_id: impl Into<String>, trajectories: Vec<Trajectory>) -> Self {
        let n = trajectories.len();
        Self {
            scene_id: scene_id.into(),
            trajectories,
            candidate_ids: (0..n).collect(),
            truth: None,
            scene: None,
        }
    }

    pub fn with_truth(mut self, truth: Vec<SubScores>) -> Self {
        self.truth = Some(truth);
        self
    }

    pub fn with_scene(mut self, scene: Scene) -> Self {
        self.scene = Some(scene);
        self
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn predict(&self, scorer: &dyn Scorer) -> Result<Vec<SubScores>> {
        (0..self.len())
            .map(|i| {
                scorer.predict(&ScoreQuery {
                    scene_id: &self.scene_id,
                    index: self.candidate_ids[i],
                    trajectory: &self.trajectories[i],
                    scene: self.scene.as_ref(),
                    truth: self.truth.as_ref().map(|t| &t[i]),
                })
            })
            .collect()
    }

    /// True sub-scores from the stored truth or the scene.
    pub fn true_subscores(&self, eval: &EvaluatorConfig) -> Result<Vec<SubScores>> {
        self.predict(&OracleScorer { eval: *eval })
    }
}

/// Line of the candidate-pool JSONL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolRecord {
    pub scene_id: String,
    pub candidate_id: usize,
    pub trajectory: Vec<[f64; 3]>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<SubScores>,
}

fn default_dt() -> f64 {
    crate::scene::DEFAULT_DT
}

/// Groups pool records by scene in order of first appearance. Truth is
/// kept only when every record of the scene carries it.
pub fn pools_from_records(records: &[PoolRecord]) -> Result<Vec<CandidatePool>> {
    let mut order: Vec<String> = Vec::new();
    let mut grouped: HashMap<String, Vec<&PoolRecord>> = HashMap::new();
    for r in records {
        if !grouped.contains_key(&r.scene_id) {
            order.push(r.scene_id.clone());
        }
        grouped.entry(r.scene_id.clone()).or_default().push(r);
    }
    order
        .into_iter()
        .map(|id| {
            let recs = &grouped[&id];
            let trajectories = recs
                .iter()
                .map(|r| Trajectory::from_triples(&r.trajectory, r.dt))
                .collect::<Result<Vec<_>>>()?;
            let truth: Option<Vec<SubScores>> = recs.iter().map(|r| r.truth).collect();
            Ok(CandidatePool {
                scene_id: id,
                trajectories,
                candidate_ids: recs.iter().map(|r| r.candidate_id).collect(),
                truth,
                scene: None,
            })
        })
        .collect()
}

pub fn load_pools(path: &Path) -> Result<Vec<CandidatePool>> {
    let records: Vec<PoolRecord> = from_jsonl(&read_file(path)?, &path.display().to_string())?;
    pools_from_records(&records)
}

/// Indices sorted by score descending, ties to the lower index.
pub fn rank_scores(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub predicted: Vec<SubScores>,
    pub scores: Vec<f64>,
    pub order: Vec<usize>,
    pub top1: usize,
}

pub fn rank(pool: &CandidatePool, scorer: &dyn Scorer, weights: &ScoreWeights) -> Result<Ranking> {
    if pool.is_empty() {
        return Err(Error::invalid(format!("pool for `{}` is empty", pool.scene_id)));
    }
    let predicted = pool.predict(scorer)?;
    let scores: Vec<f64> = predicted.iter().map(|s| compose(s, weights)).collect();
    let order = rank_scores(&scores);
    Ok(Ranking {
        top1: order[0],
        predicted,
        scores,
        order,
    })
}

/// First `k` of the ranking (`k` clamped to the pool size).
pub fn topk_targets(ranking: &Ranking, k: usize) -> Vec<usize> {
    ranking.order.iter().take(k).copied().collect()
}

/// `a` dominates `b`: at least as good everywhere and better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return false;
        }
        if x > y {
            strict = true;
        }
    }
    strict
}

/// Exact non-dominated set (ascending indices). Candidates are visited in
/// lexicographically descending order, so any dominator of a vector is
/// visited first and, by transitivity, some front member dominates it.
pub fn non_dominated(vectors: &[Vec<f64>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..vectors.len()).collect();
    order.sort_by(|&a, &b| {
        let (va, vb) = (&vectors[a], &vectors[b]);
        va.iter()
            .zip(vb)
            .map(|(x, y)| y.total_cmp(x))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut front: Vec<usize> = Vec::new();
    for i in order {
        if !front.iter().any(|&f| dominates(&vectors[f], &vectors[i])) {
            front.push(i);
        }
    }
    front.sort_unstable();
    front
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoTargets {
    /// Exact non-dominated set before clamping, ascending.
    pub front: Vec<usize>,
    /// After clamping/padding, by composed score descending.
    pub selected: Vec<usize>,
}

/// Non-dominated set over the chosen components, clamped to `max_size` by
/// composed score and padded to `min_size` with the best non-members.
pub fn pareto_targets(
    predicted: &[SubScores],
    composed: &[f64],
    components: &[Component],
    max_size: usize,
    min_size: usize,
) -> Result<ParetoTargets> {
    if predicted.is_empty() {
        return Err(Error::invalid("pareto targets need a non-empty pool"));
    }
    if predicted.len() != composed.len() {
        return Err(Error::invalid("predicted and composed scores differ in length"));
    }
    if components.is_empty() {
        return Err(Error::invalid("pareto targets need at least one component"));
    }
    let vectors: Vec<Vec<f64>> = predicted
        .iter()
        .map(|s| components.iter().map(|&c| s.get(c)).collect())
        .collect();
    let front = non_dominated(&vectors);
    let ranked = rank_scores(composed);
    let mut selected: Vec<usize> = ranked.iter().copied().filter(|i| front.contains(i)).collect();
    selected.truncate(max_size);
    if selected.len() < min_size {
        for &i in &ranked {
            if selected.len() >= min_size {
                break;
            }
            if !selected.contains(&i) {
                selected.push(i);
            }
        }
    }
    Ok(ParetoTargets { front, selected })
}

/// Components with positive weight, the default Pareto objectives.
pub fn default_pareto_components(weights: &ScoreWeights) -> Vec<Component> {
    weights.active_components()
}

/// Summed per-step L1 over x, y and wrapped heading.
pub fn trajectory_l1(a: &Trajectory, b: &Trajectory, heading_weight: f64) -> f64 {
    a.l1_distance(b, heading_weight)
}

/// Mean over targets of the distance to the closest student; 0 for an
/// empty target set.
pub fn set_coverage_distance(students: &[Trajectory], targets: &[Trajectory], heading_weight: f64) -> Result<f64> {
    if targets.is_empty() {
        return Ok(0.0);
    }
    if students.is_empty() {
        return Err(Error::invalid("set coverage needs at least one student trajectory"));
    }
    Ok(targets
        .iter()
        .map(|t| {
            students
                .iter()
                .map(|s| trajectory_l1(s, t, heading_weight))
                .fold(f64::INFINITY, f64::min)
        })
        .sum::<f64>()
        / targets.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Stage1Weights {
    pub gt: f64,
    pub pseudo_expert: f64,
    pub heading_weight: f64,
}

impl Default for Stage1Weights {
    fn default() -> Self {
        Self {
            gt: 1.0,
            pseudo_expert: 0.5,
            heading_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage1Terms {
    pub l_gt: f64,
    pub l_pe: f64,
    pub total: f64,
}

pub fn stage1_loss_terms(
    proposals: &[Trajectory],
    gt: &Trajectory,
    pseudo_experts: &[Trajectory],
    w: &Stage1Weights,
) -> Result<Stage1Terms> {
    let l_gt = set_coverage_distance(proposals, std::slice::from_ref(gt), w.heading_weight)?;
    let l_pe = set_coverage_distance(proposals, pseudo_experts, w.heading_weight)?;
    Ok(Stage1Terms {
        l_gt,
        l_pe,
        total: w.gt * l_gt + w.pseudo_expert * l_pe,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Stage2Weights {
    pub traj: f64,
    pub topk: f64,
    pub pareto: f64,
    pub stability: f64,
    pub heading_weight: f64,
}

impl Default for Stage2Weights {
    fn default() -> Self {
        Self {
            traj: 0.1,
            topk: 1.0,
            pareto: 1.0,
            stability: 0.05,
            heading_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage2Terms {
    pub l_gt: f64,
    pub l_topk: f64,
    pub l_pareto: f64,
    pub l_stability: f64,
    pub total: f64,
    /// Set when the Pareto target set was empty and its term defaulted to 0.
    pub pareto_empty: bool,
}

pub fn stage2_gen_loss_terms(
    student: &[Trajectory],
    gt: &Trajectory,
    topk: &[Trajectory],
    pareto: &[Trajectory],
    teacher: &[Trajectory],
    w: &Stage2Weights,
) -> Result<Stage2Terms> {
    if student.len() != teacher.len() {
        return Err(Error::invalid(format!(
            "stability term pairs students with teachers by index: {} vs {}",
            student.len(),
            teacher.len()
        )));
    }
    if student.is_empty() {
        return Err(Error::invalid("stage-2 losses need at least one student trajectory"));
    }
    let h = w.heading_weight;
    let l_gt = set_coverage_distance(student, std::slice::from_ref(gt), h)?;
    let l_topk = set_coverage_distance(student, topk, h)?;
    let l_pareto = set_coverage_distance(student, pareto, h)?;
    let l_stability = student
        .iter()
        .zip(teacher)
        .map(|(s, t)| trajectory_l1(s, t, h))
        .sum::<f64>()
        / student.len() as f64;
    Ok(Stage2Terms {
        l_gt,
        l_topk,
        l_pareto,
        l_stability,
        total: w.traj * l_gt + w.topk * l_topk + w.pareto * l_pareto + w.stability * l_stability,
        pareto_empty: pareto.is_empty(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnchorConfig {
    pub lambda_s: f64,
    pub lambda_xy: f64,
    pub lambda_psi: f64,
    /// Position scale (m).
    pub s_pos: f64,
    /// Heading scale (rad).
    pub s_psi: f64,
}

impl Default for AnchorConfig {
    fn default() -> Self {
        Self {
            lambda_s: 2.0,
            lambda_xy: 0.2,
            lambda_psi: 0.5,
            s_pos: 5.0,
            s_psi: 0.35,
        }
    }
}

impl AnchorConfig {
    pub fn validate(&self) -> Result<()> {
        for (n, v) in [("lambda_s", self.lambda_s), ("lambda_xy", self.lambda_xy), ("lambda_psi", self.lambda_psi)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{n} must be non-negative, got {v}")));
            }
        }
        if !(self.s_pos > 0.0 && self.s_psi > 0.0) {
            return Err(Error::invalid("anchor scales must be positive"));
        }
        Ok(())
    }

    pub fn penalty(&self, xy_rms: f64, head_rms: f64) -> f64 {
        self.lambda_xy * xy_rms / self.s_pos + self.lambda_psi * head_rms / self.s_psi
    }

    pub fn q(&self, score: f64, xy_rms: f64, head_rms: f64) -> f64 {
        self.lambda_s * score - self.penalty(xy_rms, head_rms)
    }
}

/// RMS position and wrapped-heading deviation between aligned poses.
pub fn anchor_deviation(a: &Trajectory, anchor: &Trajectory) -> Result<(f64, f64)> {
    if a.len() != anchor.len() {
        return Err(Error::invalid(format!(
            "anchor has {} poses, candidate has {}",
            anchor.len(),
            a.len()
        )));
    }
    let n = a.len() as f64;
    let (mut xy, mut hd) = (0.0, 0.0);
    for (p, q) in a.poses().iter().zip(anchor.poses()) {
        xy += (p.x - q.x).powi(2) + (p.y - q.y).powi(2);
        hd += wrap_angle(p.heading() - q.heading()).powi(2);
    }
    Ok(((xy / n).sqrt(), (hd / n).sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reranked {
    pub q: Vec<f64>,
    pub xy_rms: Vec<f64>,
    pub head_rms: Vec<f64>,
    pub order: Vec<usize>,
    pub top1: usize,
}

/// Soft rerank by `Q = λ_s·s − penalty`; nothing is discarded.
pub fn anchor_rerank(pool: &[Trajectory], scores: &[f64], anchor: &Trajectory, cfg: &AnchorConfig) -> Result<Reranked> {
    if pool.is_empty() {
        return Err(Error::invalid("anchor rerank needs a non-empty pool"));
    }
    if pool.len() != scores.len() {
        return Err(Error::invalid("pool and scores differ in length"));
    }
    cfg.validate()?;
    let dev: Vec<(f64, f64)> = pool.iter().map(|t| anchor_deviation(t, anchor)).collect::<Result<_>>()?;
    let q: Vec<f64> = scores.iter().zip(&dev).map(|(&s, &(x, h))| cfg.q(s, x, h)).collect();
    let order = rank_scores(&q);
    Ok(Reranked {
        top1: order[0],
        xy_rms: dev.iter().map(|d| d.0).collect(),
        head_rms: dev.iter().map(|d| d.1).collect(),
        q,
        order,
    })
}

/// Number of frame-to-frame changes in a sequence of selections.
pub fn count_switches(selections: &[usize]) -> usize {
    selections.windows(2).filter(|w| w[0] != w[1]).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub selected_index: usize,
    pub selected_true_score: f64,
    pub oracle_true_score: f64,
    pub gap: f64,
    pub k: usize,
    pub topk_oracle: f64,
    pub topk_mean: f64,
}

/// Selected-vs-oracle accounting for a scorer ranking.
pub fn selection_report(true_scores: &[f64], order: &[usize], k: usize) -> Result<SelectionReport> {
    if true_scores.is_empty() || order.is_empty() {
        return Err(Error::invalid("selection report needs a non-empty pool"));
    }
    if order.iter().any(|&i| i >= true_scores.len()) {
        return Err(Error::invalid("ranking refers to a candidate outside the pool"));
    }
    let k = k.clamp(1, order.len());
    let selected = order[0];
    let oracle = true_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let top: Vec<f64> = order[..k].iter().map(|&i| true_scores[i]).collect();
    Ok(SelectionReport {
        selected_index: selected,
        selected_true_score: true_scores[selected],
        oracle_true_score: oracle,
        gap: oracle - true_scores[selected],
        k,
        topk_oracle: top.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        topk_mean: top.iter().sum::<f64>() / k as f64,
    })
}
