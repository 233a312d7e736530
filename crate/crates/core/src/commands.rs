//! File-level operations behind each command: load inputs, run the library
//! operations, write reports. Output content never depends on `jobs`.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analytics::{pool_stats, stats_csv, PoolStats};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evaluator::{compose, evaluate_batch, evaluate_cached, ScoreCache, ScoreWeights, ScoredRecord, SubScores};
use crate::pseudo_expert::{run_pipeline, Family, Feasibility, PipelineOutput, ScoredCandidate};
use crate::refinement::{enrichment_report, run_simulation, Check, EnrichmentReport, EnrichmentThresholds, ScenePool, SimParams, SimulationReport};
use crate::scene::{Scene, Trajectory, DEFAULT_DT};
use crate::selection::{
    anchor_rerank, default_pareto_components, pareto_targets, rank_scores, selection_report, CandidatePool, PoolRecord, Scorer,
    AnchorConfig, SelectionReport,
};
use crate::util::{from_jsonl, par_map, read_file, to_jsonl, write_atomic};

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}

fn files_with_extension(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::File {
        path: dir.display().to_string(),
        source: e,
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == ext))
        .collect();
    files.sort();
    Ok(files)
}

/// Every `*.json` scene in `dir`, by file name.
pub fn load_scenes(dir: &Path) -> Result<Vec<Scene>> {
    let files = files_with_extension(dir, "json")?;
    if files.is_empty() {
        return Err(Error::invalid(format!("no scene files in {}", dir.display())));
    }
    files.iter().map(|p| Scene::load(p)).collect()
}

pub fn write_scenes(dir: &Path, scenes: &[Scene]) -> Result<()> {
    for s in scenes {
        let mut text = s.to_json_string()?;
        text.push('\n');
        write_atomic(&dir.join(format!("{}.json", s.id)), text.as_bytes())?;
    }
    Ok(())
}

fn scene_index(scenes: &[Scene]) -> HashMap<String, Scene> {
    scenes.iter().map(|s| (s.id.clone(), s.clone())).collect()
}

/// Runs the pseudo-expert pipeline per scene, scenes in parallel.
pub fn gen_pseudo_experts(scenes: &[Scene], cfg: &RunConfig, seed: u64, jobs: usize) -> Result<Vec<PipelineOutput>> {
    cfg.validate()?;
    par_map(jobs, scenes, |s| run_pipeline(s, &cfg.families, &cfg.evaluator, &cfg.score_weights, seed, 1))
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSummary {
    pub scene_id: String,
    pub generated: usize,
    pub per_family: BTreeMap<String, usize>,
    pub feasible: usize,
    pub near_feasible: usize,
    pub infeasible: usize,
    pub scored: usize,
    pub retained: usize,
    pub interpolated: usize,
    pub pool: usize,
    pub pseudo_experts: usize,
}

pub fn summarize(out: &PipelineOutput) -> SceneSummary {
    let mut per_family: BTreeMap<String, usize> = Family::ALL.iter().map(|f| (f.name().to_string(), 0)).collect();
    for c in &out.candidates {
        *per_family.entry(c.family.name().to_string()).or_default() += 1;
    }
    let count = |f: Feasibility| out.candidates.iter().filter(|c| c.feasibility == Some(f)).count();
    SceneSummary {
        scene_id: out.scene_id.clone(),
        generated: out.candidates.len(),
        per_family,
        feasible: count(Feasibility::Feasible),
        near_feasible: count(Feasibility::NearFeasible),
        infeasible: count(Feasibility::Infeasible),
        scored: out.scored.len(),
        retained: out.retained.len(),
        interpolated: out.interpolated.len(),
        pool: out.pool.len(),
        pseudo_experts: out.training.trajectories.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoExpertEntry {
    pub scene_id: String,
    /// `M × T × 3`, zero-padded.
    pub pseudo_experts: Vec<Vec<[f64; 3]>>,
    pub pseudo_expert_mask: Vec<u8>,
    /// Candidate id per real entry; `null` marks the human trajectory.
    pub sources: Vec<Option<usize>>,
}

/// Final pools as candidate-pool records carrying their evaluator truth.
pub fn pool_records(outputs: &[PipelineOutput]) -> Vec<PoolRecord> {
    outputs
        .iter()
        .flat_map(|o| {
            o.pool.iter().map(move |c| PoolRecord {
                scene_id: o.scene_id.clone(),
                candidate_id: c.candidate_id,
                trajectory: c.candidate.trajectory.to_triples(),
                dt: c.candidate.trajectory.dt(),
                truth: Some(c.subscores),
            })
        })
        .collect()
}

/// Writes `<scene>.jsonl` (final pool of scored candidates),
/// `pseudo_experts.json`, `pool.jsonl` and `summary.json` under `out`.
pub fn write_gen_outputs(out: &Path, outputs: &[PipelineOutput], cfg: &RunConfig) -> Result<()> {
    let m = cfg.families.train_top_k;
    let mut entries = Vec::with_capacity(outputs.len());
    for o in outputs {
        write_atomic(&out.join(format!("{}.jsonl", o.scene_id)), to_jsonl::<ScoredCandidate>(&o.pool)?.as_bytes())?;
        let (arr, mask) = o.training.padded(m);
        entries.push(PseudoExpertEntry {
            scene_id: o.scene_id.clone(),
            pseudo_experts: arr,
            pseudo_expert_mask: mask,
            sources: o.training.sources.clone(),
        });
    }
    write_json(&out.join("pseudo_experts.json"), &entries)?;
    write_atomic(&out.join("pool.jsonl"), to_jsonl(&pool_records(outputs))?.as_bytes())?;
    let summaries: Vec<SceneSummary> = outputs.iter().map(summarize).collect();
    write_json(&out.join("summary.json"), &summaries)
}

pub fn load_pool_records(path: &Path) -> Result<Vec<PoolRecord>> {
    from_jsonl(&read_file(path)?, &path.display().to_string())
}

/// Groups records into pools, attaching scene geometry when available.
pub fn pools_with_scenes(records: &[PoolRecord], scenes: &[Scene]) -> Result<Vec<CandidatePool>> {
    let index = scene_index(scenes);
    Ok(crate::selection::pools_from_records(records)?
        .into_iter()
        .map(|p| match index.get(&p.scene_id) {
            Some(s) => p.with_scene(s.clone()),
            None => p,
        })
        .collect())
}

/// Scores each record against its scene, through the cache when given.
/// A missing cache file starts empty; a stale one is rebuilt.
pub fn score_records(scenes: &[Scene], records: &[PoolRecord], cfg: &RunConfig, cache: Option<&Path>, jobs: usize) -> Result<Vec<ScoredRecord>> {
    let index = scene_index(scenes);
    let pools = crate::selection::pools_from_records(records)?;
    let mut cache_store = match cache {
        Some(p) => Some(ScoreCache::load(p)?),
        None => None,
    };
    let mut out = Vec::with_capacity(records.len());
    for pool in &pools {
        let scene = index
            .get(&pool.scene_id)
            .ok_or_else(|| Error::invalid(format!("no scene file for scene `{}`", pool.scene_id)))?;
        let mut recs = match cache_store.as_mut() {
            Some(c) => evaluate_cached(scene, &pool.trajectories, &cfg.evaluator, &cfg.score_weights, c, jobs)?,
            None => evaluate_batch(scene, &pool.trajectories, &cfg.evaluator, &cfg.score_weights, jobs)?,
        };
        for (r, &id) in recs.iter_mut().zip(&pool.candidate_ids) {
            r.candidate_id = id;
        }
        out.extend(recs);
    }
    if let (Some(c), Some(p)) = (cache_store, cache) {
        c.save(p)?;
    }
    Ok(out)
}

/// Anchor trajectories: one for every scene, or one per scene id.
#[derive(Debug, Clone)]
pub enum Anchors {
    Shared(Trajectory),
    PerScene(HashMap<String, Trajectory>),
}

impl Anchors {
    /// Reads `[[x, y, heading], …]` or `{"<scene_id>": [[x, y, heading], …]}`.
    pub fn load(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum AnchorFile {
            Shared(Vec<[f64; 3]>),
            PerScene(BTreeMap<String, Vec<[f64; 3]>>),
        }
        let text = read_file(path)?;
        let parsed: AnchorFile = serde_json::from_str(&text)
            .map_err(|e| Error::invalid(format!("anchor file {}: {e}", path.display())))?;
        Ok(match parsed {
            AnchorFile::Shared(t) => Anchors::Shared(Trajectory::from_triples(&t, DEFAULT_DT)?),
            AnchorFile::PerScene(m) => Anchors::PerScene(
                m.into_iter()
                    .map(|(k, t)| Ok((k, Trajectory::from_triples(&t, DEFAULT_DT)?)))
                    .collect::<Result<_>>()?,
            ),
        })
    }

    /// Each scene's human trajectory, standing in for a single-mode planner.
    pub fn from_scenes(scenes: &[Scene]) -> Self {
        Anchors::PerScene(scenes.iter().map(|s| (s.id.clone(), s.human_trajectory.clone())).collect())
    }

    pub fn get(&self, scene_id: &str) -> Result<&Trajectory> {
        match self {
            Anchors::Shared(t) => Ok(t),
            Anchors::PerScene(m) => m
                .get(scene_id)
                .ok_or_else(|| Error::invalid(format!("no anchor for scene `{scene_id}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub scene_id: String,
    pub candidate_id: usize,
    pub predicted: f64,
    pub true_score: f64,
    pub q: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSelection {
    pub scene_id: String,
    pub selected_candidate: usize,
    #[serde(flatten)]
    pub report: SelectionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankOutput {
    pub rows: Vec<RankRow>,
    pub scenes: Vec<SceneSelection>,
}

struct Scored {
    pred: Vec<f64>,
    truth: Vec<f64>,
    true_sub: Vec<SubScores>,
}

fn score_pool(pool: &CandidatePool, scorer: &dyn Scorer, cfg: &RunConfig) -> Result<Scored> {
    if pool.is_empty() {
        return Err(Error::invalid(format!("pool for `{}` is empty", pool.scene_id)));
    }
    let predicted = pool.predict(scorer)?;
    let true_sub = pool.true_subscores(&cfg.evaluator)?;
    Ok(Scored {
        pred: predicted.iter().map(|s| compose(s, &cfg.score_weights)).collect(),
        truth: true_sub.iter().map(|s| compose(s, &cfg.score_weights)).collect(),
        true_sub,
    })
}

/// Ranks every pool by composed prediction, or by `Q` when anchors are
/// given, and reports the selection against the truth.
pub fn rank_pools(
    pools: &[CandidatePool],
    scorer: &dyn Scorer,
    cfg: &RunConfig,
    anchors: Option<(&Anchors, &AnchorConfig)>,
    jobs: usize,
) -> Result<RankOutput> {
    let per_scene: Vec<(Vec<RankRow>, SceneSelection)> = par_map(jobs, pools, |pool| {
        let s = score_pool(pool, scorer, cfg)?;
        let (q, order) = match anchors {
            Some((a, acfg)) => {
                let r = anchor_rerank(&pool.trajectories, &s.pred, a.get(&pool.scene_id)?, acfg)?;
                (r.q, r.order)
            }
            None => (s.pred.clone(), rank_scores(&s.pred)),
        };
        let mut rank_of = vec![0; order.len()];
        for (r, &i) in order.iter().enumerate() {
            rank_of[i] = r + 1;
        }
        let rows = (0..pool.len())
            .map(|i| RankRow {
                scene_id: pool.scene_id.clone(),
                candidate_id: pool.candidate_ids[i],
                predicted: s.pred[i],
                true_score: s.truth[i],
                q: q[i],
                rank: rank_of[i],
            })
            .collect();
        let report = selection_report(&s.truth, &order, cfg.topk)?;
        Ok((
            rows,
            SceneSelection {
                scene_id: pool.scene_id.clone(),
                selected_candidate: pool.candidate_ids[order[0]],
                report,
            },
        ))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let mut out = RankOutput {
        rows: Vec::new(),
        scenes: Vec::new(),
    };
    for (rows, sel) in per_scene {
        out.rows.extend(rows);
        out.scenes.push(sel);
    }
    Ok(out)
}

pub fn write_rank_outputs(csv_path: &Path, json_path: &Path, out: &RankOutput) -> Result<()> {
    write_csv(csv_path, &out.rows)?;
    write_json(json_path, &out.scenes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneTargets {
    pub scene_id: String,
    pub topk: Vec<usize>,
    pub topk_trajectories: Vec<Vec<[f64; 3]>>,
    pub pareto_front: Vec<usize>,
    pub pareto: Vec<usize>,
    pub pareto_trajectories: Vec<Vec<[f64; 3]>>,
    /// Ordered by ranking; ids are candidate ids.
    pub predicted_scores: Vec<f64>,
}

/// Top-k and vector-Pareto target sets per pool, as candidate ids.
pub fn distill_targets(
    pools: &[CandidatePool],
    scorer: &dyn Scorer,
    weights: &ScoreWeights,
    k: usize,
    pareto_max: usize,
    pareto_min: usize,
    jobs: usize,
) -> Result<Vec<SceneTargets>> {
    if k == 0 || pareto_min > pareto_max {
        return Err(Error::invalid("need k ≥ 1 and pareto_min ≤ pareto_max"));
    }
    let components = default_pareto_components(weights);
    par_map(jobs, pools, |pool| {
        let predicted = pool.predict(scorer)?;
        let composed: Vec<f64> = predicted.iter().map(|s| compose(s, weights)).collect();
        let order = rank_scores(&composed);
        let topk: Vec<usize> = order.iter().take(k).copied().collect();
        let pt = pareto_targets(&predicted, &composed, &components, pareto_max, pareto_min)?;
        let ids = |v: &[usize]| v.iter().map(|&i| pool.candidate_ids[i]).collect::<Vec<_>>();
        let trajs = |v: &[usize]| v.iter().map(|&i| pool.trajectories[i].to_triples()).collect::<Vec<_>>();
        Ok(SceneTargets {
            scene_id: pool.scene_id.clone(),
            topk: ids(&topk),
            topk_trajectories: trajs(&topk),
            pareto_front: ids(&pt.front),
            pareto: ids(&pt.selected),
            pareto_trajectories: trajs(&pt.selected),
            predicted_scores: order.iter().map(|&i| composed[i]).collect(),
        })
    })
    .into_iter()
    .collect()
}

pub fn write_targets(path: &Path, targets: &[SceneTargets]) -> Result<()> {
    write_json(path, targets)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// `None` for the no-anchor baseline.
    pub lambda_s: Option<f64>,
    pub lambda_xy: Option<f64>,
    pub lambda_psi: Option<f64>,
    pub score: f64,
    pub ep: f64,
    pub hc: f64,
    pub comfort: f64,
    pub anchor_xy_rms: f64,
    pub anchor_head_rms: f64,
}

pub fn default_sweep_grid() -> Vec<(f64, f64, f64)> {
    let mut grid = Vec::new();
    for &ls in &[1.75, 2.0, 2.25] {
        for &lxy in &[0.2, 0.25, 0.35] {
            for &lpsi in &[0.5, 0.75, 1.0] {
                grid.push((ls, lxy, lpsi));
            }
        }
    }
    grid
}

/// Mean true metrics of the selected candidate across pools for the
/// no-anchor baseline and each `(λ_s, λ_xy, λ_ψ)` in `grid`.
pub fn sweep_anchor(
    pools: &[CandidatePool],
    scorer: &dyn Scorer,
    cfg: &RunConfig,
    anchors: &Anchors,
    grid: &[(f64, f64, f64)],
    jobs: usize,
) -> Result<Vec<SweepRow>> {
    let scored: Vec<Scored> = par_map(jobs, pools, |p| score_pool(p, scorer, cfg))
        .into_iter()
        .collect::<Result<_>>()?;
    let evaluate = |setting: Option<AnchorConfig>| -> Result<SweepRow> {
        let n = pools.len().max(1) as f64;
        let mut row = SweepRow {
            lambda_s: setting.map(|c| c.lambda_s),
            lambda_xy: setting.map(|c| c.lambda_xy),
            lambda_psi: setting.map(|c| c.lambda_psi),
            score: 0.0,
            ep: 0.0,
            hc: 0.0,
            comfort: 0.0,
            anchor_xy_rms: 0.0,
            anchor_head_rms: 0.0,
        };
        for (pool, s) in pools.iter().zip(&scored) {
            let anchor = anchors.get(&pool.scene_id)?;
            // the baseline still reports its deviation from the anchor
            let dev = anchor_rerank(&pool.trajectories, &s.pred, anchor, &AnchorConfig::default())?;
            let top = match setting {
                Some(c) => anchor_rerank(&pool.trajectories, &s.pred, anchor, &c)?.top1,
                None => rank_scores(&s.pred)[0],
            };
            let t = &s.true_sub[top];
            row.score += s.truth[top] / n;
            row.ep += t.ep / n;
            row.hc += t.hc / n;
            row.comfort += t.comfort / n;
            row.anchor_xy_rms += dev.xy_rms[top] / n;
            row.anchor_head_rms += dev.head_rms[top] / n;
        }
        Ok(row)
    };
    let mut rows = vec![evaluate(None)?];
    for &(ls, lxy, lpsi) in grid {
        rows.push(evaluate(Some(AnchorConfig {
            lambda_s: ls,
            lambda_xy: lxy,
            lambda_psi: lpsi,
            ..cfg.anchor
        }))?);
    }
    Ok(rows)
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    write_csv(path, rows)
}

/// Runs a simulation check and writes `<stem>.json` and `<stem>.csv`.
pub fn simulate(check: Check, trials: usize, seed: u64, params: &SimParams, jobs: usize, out_json: &Path) -> Result<SimulationReport> {
    let report = run_simulation(check, trials, seed, params, jobs)?;
    write_json(out_json, &report)?;
    write_csv(&out_json.with_extension("csv"), &report.rows)?;
    Ok(report)
}

/// Per-scene statistics with true scores from the pool truth (or scene)
/// and predictions from `scorer`.
pub fn analyze_pools(pools: &[CandidatePool], scorer: &dyn Scorer, cfg: &RunConfig, jobs: usize) -> Result<Vec<PoolStats>> {
    par_map(jobs, pools, |pool| {
        let s = score_pool(pool, scorer, cfg)?;
        pool_stats(&pool.scene_id, &pool.trajectories, &s.truth, &s.pred)
    })
    .into_iter()
    .collect()
}

/// Pool records from one file. Lines may also be scored candidates as
/// written per scene by `gen-pseudo-experts`, in which case the file stem
/// is the scene id.
fn load_pool_file(path: &Path) -> Result<Vec<PoolRecord>> {
    let text = read_file(path)?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| match serde_json::from_str::<PoolRecord>(l) {
            Ok(r) => Ok(r),
            Err(e) => match serde_json::from_str::<ScoredCandidate>(l) {
                Ok(c) => Ok(PoolRecord {
                    scene_id: stem.to_string(),
                    candidate_id: c.candidate_id,
                    trajectory: c.candidate.trajectory.to_triples(),
                    dt: c.candidate.trajectory.dt(),
                    truth: Some(c.subscores),
                }),
                Err(_) => Err(Error::invalid(format!("{} line {}: {e}", path.display(), i + 1))),
            },
        })
        .collect()
}

/// Every `*.jsonl` pool file in `dir`, in file-name order. A (scene,
/// candidate) pair seen in an earlier file is skipped.
pub fn load_pool_dir(dir: &Path) -> Result<Vec<PoolRecord>> {
    let files = files_with_extension(dir, "jsonl")?;
    if files.is_empty() {
        return Err(Error::invalid(format!("no pool files in {}", dir.display())));
    }
    let mut seen = std::collections::HashSet::new();
    let mut all = Vec::new();
    for f in files {
        for r in load_pool_file(&f)? {
            if seen.insert((r.scene_id.clone(), r.candidate_id)) {
                all.push(r);
            }
        }
    }
    Ok(all)
}

pub fn write_analysis(csv_path: &Path, rows: &[PoolStats]) -> Result<()> {
    write_atomic(csv_path, &stats_csv(rows)?)?;
    write_json(&csv_path.with_extension("json"), rows)
}

/// Scorer-quality report over scored pools.
pub fn pools_enrichment_report(pools: &[CandidatePool], scorer: &dyn Scorer, cfg: &RunConfig, jobs: usize) -> Result<EnrichmentReport> {
    let scene_pools: Vec<ScenePool> = par_map(jobs, pools, |pool| {
        let s = score_pool(pool, scorer, cfg)?;
        Ok(ScenePool {
            scene_id: pool.scene_id.clone(),
            true_scores: s.truth,
            predicted: s.pred,
        })
    })
    .into_iter()
    .collect::<Result<_>>()?;
    enrichment_report(&scene_pools, &EnrichmentThresholds::default())
}

/// End-to-end run on the bundled scenes. Every report lands under `out`.
pub fn run_demo(out: &Path, cfg: &RunConfig, seed: u64, jobs: usize) -> Result<Vec<SceneSummary>> {
    let scenes = crate::demo::demo_scenes()?;
    write_scenes(&out.join("scenes"), &scenes)?;
    let outputs = gen_pseudo_experts(&scenes, cfg, seed, jobs)?;
    write_gen_outputs(&out.join("pseudo_experts"), &outputs, cfg)?;
    let records = pool_records(&outputs);
    let pools = pools_with_scenes(&records, &scenes)?;

    let scorer = crate::selection::NoisyScorer::new(0.05, 0.0, crate::util::derive_seed(seed, "scorer"))?;
    let ranked = rank_pools(&pools, &scorer, cfg, None, jobs)?;
    write_rank_outputs(&out.join("rank.csv"), &out.join("selection.json"), &ranked)?;
    let anchors = Anchors::from_scenes(&scenes);
    let reranked = rank_pools(&pools, &scorer, cfg, Some((&anchors, &cfg.anchor)), jobs)?;
    write_rank_outputs(&out.join("rank_anchor.csv"), &out.join("selection_anchor.json"), &reranked)?;
    write_sweep(&out.join("anchor_sweep.csv"), &sweep_anchor(&pools, &scorer, cfg, &anchors, &default_sweep_grid(), jobs)?)?;
    let targets = distill_targets(&pools, &scorer, &cfg.score_weights, cfg.topk, cfg.pareto_max, cfg.pareto_min, jobs)?;
    write_targets(&out.join("targets.json"), &targets)?;
    write_analysis(&out.join("analytics.csv"), &analyze_pools(&pools, &scorer, cfg, jobs)?)?;
    write_json(&out.join("enrichment_report.json"), &pools_enrichment_report(&pools, &scorer, cfg, jobs)?)?;

    let sim_dir = out.join("simulate");
    for check in [Check::Enrichment, Check::Expected, Check::Multiround, Check::Monotone, Check::Drift, Check::Pareto, Check::Margin] {
        let trials = if check == Check::Drift { 1 } else { 1000 };
        let sim_seed = crate::util::derive_seed(seed, check.name());
        let r = simulate(check, trials, sim_seed, &cfg.simulation, jobs, &sim_dir.join(format!("{}.json", check.name())))?;
        if r.violations > 0 {
            return Err(Error::invalid(format!("{} check reported {} violations", check.name(), r.violations)));
        }
    }
    let summaries: Vec<SceneSummary> = outputs.iter().map(summarize).collect();
    write_json(&out.join("summary.json"), &summaries)?;
    Ok(summaries)
}
