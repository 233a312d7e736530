//! Executable checks of the refinement guarantees: mixture enrichment with
//! a total-variation budget, its expectation and multi-round forms, the
//! Oracle@K link, approximate monotonicity, scorer drift with and without
//! refitting, approximate Pareto consistency, uniform-margin ranking,
//! and the enrichment report over scored pools.

use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::selection::{non_dominated, rank_scores, NoisyScorer};
use crate::util::{derive_seed, par_map};

/// Tolerance used by every bound check.
pub const BOUND_TOL: f64 = 1e-12;

/// Finite distribution over candidate true scores. Items are kept sorted
/// ascending with duplicates merged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteProposalDistribution {
    items: Vec<f64>,
    probs: Vec<f64>,
}

impl DiscreteProposalDistribution {
    pub fn new(items: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if items.is_empty() || items.len() != probs.len() {
            return Err(Error::invalid(format!(
                "distribution needs matching non-empty items and probabilities ({} vs {})",
                items.len(),
                probs.len()
            )));
        }
        if items.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::invalid("item scores must lie in [0, 1]"));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::invalid("probabilities must be finite and non-negative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > BOUND_TOL {
            return Err(Error::invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self::merged(items.into_iter().zip(probs)))
    }

    fn merged(pairs: impl Iterator<Item = (f64, f64)>) -> Self {
        let mut acc: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
        for (r, p) in pairs {
            // scores are non-negative, so bit order matches numeric order
            let e = acc.entry((r + 0.0).to_bits()).or_insert((r, 0.0));
            e.1 += p;
        }
        let (items, probs) = acc.into_values().unzip();
        Self { items, probs }
    }

    pub fn uniform(items: &[f64]) -> Result<Self> {
        let n = items.len().max(1) as f64;
        Self::new(items.to_vec(), vec![1.0 / n; items.len()])
    }

    pub fn point(score: f64) -> Result<Self> {
        Self::new(vec![score], vec![1.0])
    }

    pub fn items(&self) -> &[f64] {
        &self.items
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn high_score_mass(&self, r_high: f64) -> f64 {
        self.items
            .iter()
            .zip(&self.probs)
            .filter(|(r, _)| **r >= r_high)
            .map(|(_, p)| p)
            .sum()
    }

    pub fn expected_score(&self) -> f64 {
        self.items.iter().zip(&self.probs).map(|(r, p)| r * p).sum()
    }

    /// Total variation distance over the union of supports.
    pub fn tv_distance(&self, other: &Self) -> f64 {
        let mut diff: BTreeMap<u64, f64> = BTreeMap::new();
        for (r, p) in self.items.iter().zip(&self.probs) {
            *diff.entry(r.to_bits()).or_default() += p;
        }
        for (r, p) in other.items.iter().zip(&other.probs) {
            *diff.entry(r.to_bits()).or_default() -= p;
        }
        0.5 * diff.values().map(|d| d.abs()).sum::<f64>()
    }

    /// `(1 − α)·self + α·other`, merging identical items.
    pub fn mixture(&self, other: &Self, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid(format!("mixture weight must lie in [0, 1], got {alpha}")));
        }
        let a = self.items.iter().zip(&self.probs).map(|(&r, &p)| (r, (1.0 - alpha) * p));
        let b = other.items.iter().zip(&other.probs).map(|(&r, &p)| (r, alpha * p));
        Ok(Self::merged(a.chain(b)))
    }

    /// Moves up to `eta` mass from the highest items onto the lowest one.
    pub fn perturb_adversarial(&self, eta: f64) -> Self {
        let mut probs = self.probs.clone();
        let mut left = eta.max(0.0);
        let mut moved = 0.0;
        for i in (1..probs.len()).rev() {
            if left <= 0.0 {
                break;
            }
            let take = probs[i].min(left);
            probs[i] -= take;
            left -= take;
            moved += take;
        }
        probs[0] += moved;
        Self {
            items: self.items.clone(),
            probs,
        }
    }

    /// Moves up to `eta` mass from randomly ordered items onto one random
    /// destination item.
    pub fn perturb_random(&self, eta: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut probs = self.probs.clone();
        let dest = rng.gen_range(0..probs.len());
        let mut sources: Vec<usize> = (0..probs.len()).filter(|&i| i != dest).collect();
        sources.shuffle(rng);
        let mut left = eta.max(0.0) * rng.gen::<f64>();
        let mut moved = 0.0;
        for i in sources {
            if left <= 0.0 {
                break;
            }
            let take = probs[i].min(left);
            probs[i] -= take;
            left -= take;
            moved += take;
        }
        probs[dest] += moved;
        Self {
            items: self.items.clone(),
            probs,
        }
    }

    /// Empirical distribution of `k` draws.
    pub fn sample_empirical(&self, k: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("sample size must be positive"));
        }
        let w = WeightedIndex::new(&self.probs).map_err(|e| Error::invalid(e.to_string()))?;
        let pairs: Vec<(f64, f64)> = (0..k).map(|_| (self.items[w.sample(rng)], 1.0 / k as f64)).collect();
        Ok(Self::merged(pairs.into_iter()))
    }

    /// Restriction to the highest items carrying at least `fraction` of the
    /// mass, renormalized.
    pub fn top_fraction(&self, fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::invalid(format!("fraction must lie in (0, 1], got {fraction}")));
        }
        let mut kept = Vec::new();
        let mut mass = 0.0;
        for i in (0..self.items.len()).rev() {
            if self.probs[i] == 0.0 {
                continue;
            }
            kept.push((self.items[i], self.probs[i]));
            mass += self.probs[i];
            if mass >= fraction {
                break;
            }
        }
        Ok(Self::merged(kept.into_iter().map(|(r, p)| (r, p / mass))))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    #[default]
    Adversarial,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnrichmentStepConfig {
    pub alpha: f64,
    pub eta: f64,
    pub r_high: f64,
    pub seed: u64,
    pub perturbation: Perturbation,
}

impl Default for EnrichmentStepConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            eta: 0.0,
            r_high: 0.95,
            seed: 0,
            perturbation: Perturbation::Adversarial,
        }
    }
}

impl EnrichmentStepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::invalid(format!("eta must be non-negative, got {}", self.eta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    HighScoreMass,
    ExpectedScore,
}

/// One bound evaluation. For [`BoundKind::ExpectedScore`] the `p_*`/`q_*`
/// fields hold expectations and `xi` holds the expectation gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub p_before: f64,
    pub q_target: f64,
    pub p_after: f64,
    pub xi: f64,
    pub alpha: f64,
    pub eta: f64,
    pub lower_bound: f64,
    pub satisfied: bool,
    pub slack: f64,
}

fn bound_report(kind: BoundKind, before: f64, target: f64, after: f64, alpha: f64, eta: f64) -> BoundReport {
    let xi = target - before;
    let lower_bound = before + alpha * xi - eta;
    let slack = after - lower_bound;
    BoundReport {
        kind,
        p_before: before,
        q_target: target,
        p_after: after,
        xi,
        alpha,
        eta,
        lower_bound,
        satisfied: slack >= -BOUND_TOL,
        slack,
    }
}

fn conservative_update(
    mu: &DiscreteProposalDistribution,
    nu: &DiscreteProposalDistribution,
    cfg: &EnrichmentStepConfig,
) -> Result<DiscreteProposalDistribution> {
    cfg.validate()?;
    let mix = mu.mixture(nu, cfg.alpha)?;
    Ok(match (cfg.eta > 0.0, cfg.perturbation) {
        (false, _) => mix,
        (true, Perturbation::Adversarial) => mix.perturb_adversarial(cfg.eta),
        (true, Perturbation::Random) => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            mix.perturb_random(cfg.eta, &mut rng)
        }
    })
}

/// Mixture update toward `nu` followed by a TV perturbation of at most
/// `eta`; checks `p_after ≥ p + α·ξ − η` on the high-score mass.
pub fn enrichment_step(
    mu: &DiscreteProposalDistribution,
    nu: &DiscreteProposalDistribution,
    cfg: &EnrichmentStepConfig,
) -> Result<(DiscreteProposalDistribution, BoundReport)> {
    let next = conservative_update(mu, nu, cfg)?;
    let r = bound_report(
        BoundKind::HighScoreMass,
        mu.high_score_mass(cfg.r_high),
        nu.high_score_mass(cfg.r_high),
        next.high_score_mass(cfg.r_high),
        cfg.alpha,
        cfg.eta,
    );
    Ok((next, r))
}

/// Same update, checking `E_after ≥ E_μ + α·β − η`.
pub fn expected_score_step(
    mu: &DiscreteProposalDistribution,
    nu: &DiscreteProposalDistribution,
    cfg: &EnrichmentStepConfig,
) -> Result<(DiscreteProposalDistribution, BoundReport)> {
    let next = conservative_update(mu, nu, cfg)?;
    let r = bound_report(
        BoundKind::ExpectedScore,
        mu.expected_score(),
        nu.expected_score(),
        next.expected_score(),
        cfg.alpha,
        cfg.eta,
    );
    Ok((next, r))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiRoundReport {
    pub rounds: Vec<BoundReport>,
    pub e_initial: f64,
    pub e_final: f64,
    pub cumulative_gain: f64,
    pub cumulative_eta: f64,
    pub cumulative_bound: f64,
    pub satisfied: bool,
    pub slack: f64,
    /// `Σ α·β ≤ Σ η`: the bound promises no improvement.
    pub no_guarantee: bool,
}

/// Repeated expected-score steps with targets chosen by `select` from the
/// current distribution.
pub fn multi_round(
    mu0: &DiscreteProposalDistribution,
    select: &dyn Fn(&DiscreteProposalDistribution, usize) -> Result<DiscreteProposalDistribution>,
    cfg: &EnrichmentStepConfig,
    rounds: usize,
) -> Result<MultiRoundReport> {
    if rounds == 0 {
        return Err(Error::invalid("multi-round check needs at least one round"));
    }
    let mut mu = mu0.clone();
    let mut reports = Vec::with_capacity(rounds);
    for t in 0..rounds {
        let nu = select(&mu, t)?;
        let step_cfg = EnrichmentStepConfig {
            seed: derive_seed(cfg.seed, &format!("round/{t}")),
            ..*cfg
        };
        let (next, r) = expected_score_step(&mu, &nu, &step_cfg)?;
        reports.push(r);
        mu = next;
    }
    let e_initial = mu0.expected_score();
    let e_final = mu.expected_score();
    let cumulative_gain: f64 = reports.iter().map(|r| r.alpha * r.xi).sum();
    let cumulative_eta: f64 = reports.iter().map(|r| r.eta).sum();
    let cumulative_bound = e_initial + cumulative_gain - cumulative_eta;
    let slack = e_final - cumulative_bound;
    Ok(MultiRoundReport {
        rounds: reports,
        e_initial,
        e_final,
        cumulative_gain,
        cumulative_eta,
        cumulative_bound,
        satisfied: slack >= -BOUND_TOL,
        slack,
        no_guarantee: cumulative_gain <= cumulative_eta,
    })
}

/// Probability that at least one of `k` independent draws is high-scoring:
/// `1 − (1 − p)^k`.
pub fn oracle_at_k(p: f64, k: u32) -> f64 {
    let p = p.clamp(0.0, 1.0);
    if p == 1.0 {
        return if k == 0 { 0.0 } else { 1.0 };
    }
    -(k as f64 * (-p).ln_1p()).exp_m1()
}

/// `r_min + (r_high − r_min)·A_K(p)`.
pub fn oracle_lower_bound(p: f64, k: u32, r_min: f64, r_high: f64) -> f64 {
    r_min + (r_high - r_min) * oracle_at_k(p, k)
}

/// A policy with a surrogate score per item, for the monotonicity check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPolicy {
    pub dist: DiscreteProposalDistribution,
    /// Surrogate score for each item of `dist`, same order.
    pub surrogate: Vec<f64>,
}

impl ScoredPolicy {
    pub fn new(dist: DiscreteProposalDistribution, surrogate: Vec<f64>) -> Result<Self> {
        if surrogate.len() != dist.items().len() {
            return Err(Error::invalid("one surrogate score per item is required"));
        }
        Ok(Self { dist, surrogate })
    }

    pub fn j_true(&self) -> f64 {
        self.dist.expected_score()
    }

    pub fn j_surrogate(&self) -> f64 {
        self.surrogate.iter().zip(self.dist.probs()).map(|(s, p)| s * p).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub j_true_before: f64,
    pub j_true_after: f64,
    pub surrogate_gain: f64,
    pub err_before: f64,
    pub err_after: f64,
    /// `J*(π_t) + m − e(π_t) − e(π_{t+1})`.
    pub general_bound: f64,
    pub general_holds: bool,
    /// Premises: both errors ≤ ε and `m ≥ −α`.
    pub premises_hold: bool,
    /// `J*(π_t) − 2ε − α`.
    pub final_bound: f64,
    pub final_holds: bool,
    /// `J*(π_{t+1}) − J*(π_t)`.
    pub true_change: f64,
    /// `J*(π_{t+1}) − final_bound`.
    pub slack: f64,
}

pub fn monotonicity_check(before: &ScoredPolicy, after: &ScoredPolicy, epsilon: f64, alpha: f64) -> MonotonicityReport {
    let (jb, ja) = (before.j_true(), after.j_true());
    let (sb, sa) = (before.j_surrogate(), after.j_surrogate());
    let m = sa - sb;
    let (eb, ea) = ((sb - jb).abs(), (sa - ja).abs());
    let general_bound = jb + m - eb - ea;
    let final_bound = jb - 2.0 * epsilon - alpha;
    let premises_hold = eb <= epsilon + BOUND_TOL && ea <= epsilon + BOUND_TOL && m >= -alpha - BOUND_TOL;
    MonotonicityReport {
        j_true_before: jb,
        j_true_after: ja,
        surrogate_gain: m,
        err_before: eb,
        err_after: ea,
        general_bound,
        general_holds: ja >= general_bound - BOUND_TOL,
        premises_hold,
        final_bound,
        final_holds: !premises_hold || ja >= final_bound - BOUND_TOL,
        true_change: ja - jb,
        slack: ja - final_bound,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DriftSource {
    /// Drain the oldest items first.
    #[default]
    Oldest,
    /// Drain randomly chosen items (seeded).
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub epsilon: f64,
    pub rho: f64,
    pub horizons: Vec<usize>,
    pub refit: Vec<f64>,
    pub fixed: Vec<f64>,
    /// `Tε + Tρ` per horizon.
    pub refit_bound: Vec<f64>,
    /// `Tε + T(T+1)/2·ρ` per horizon.
    pub fixed_bound: Vec<f64>,
    pub refit_within_bound: bool,
    pub fixed_within_bound: bool,
    pub refit_slope: f64,
    pub fixed_slope: f64,
}

/// Cumulative expected scorer error over `t_rounds` steps. Each step moves
/// `rho` mass onto a fresh item, so `TV(π_{t+1}, π_t) = ρ`. A scorer fitted
/// on `π_t` errs by `ε` on the support of `π_t` and by 1 elsewhere. Returns
/// per-horizon cumulative sums `(refit, fixed)`.
pub fn drift_series(t_rounds: usize, epsilon: f64, rho: f64, source: DriftSource, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(0.0..=1.0).contains(&epsilon) || !(0.0..=1.0).contains(&rho) {
        return Err(Error::invalid("epsilon and rho must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // probabilities indexed by item creation order
    let mut probs: Vec<f64> = vec![1.0];
    let err = |support: &[bool], probs: &[f64]| -> f64 {
        probs
            .iter()
            .enumerate()
            .map(|(i, p)| p * if support.get(i).copied().unwrap_or(false) { epsilon } else { 1.0 })
            .sum()
    };
    let initial_support = vec![true];
    let (mut refit_cum, mut fixed_cum) = (0.0, 0.0);
    let (mut refit, mut fixed) = (Vec::with_capacity(t_rounds), Vec::with_capacity(t_rounds));
    for _ in 0..t_rounds {
        let support: Vec<bool> = probs.iter().map(|&p| p > 0.0).collect();
        let mut left = rho;
        let mut order: Vec<usize> = (0..probs.len()).filter(|&i| probs[i] > 0.0).collect();
        if source == DriftSource::Random {
            order.shuffle(&mut rng);
        }
        let mut moved = 0.0;
        for i in order {
            if left <= 0.0 {
                break;
            }
            let take = probs[i].min(left);
            probs[i] -= take;
            left -= take;
            moved += take;
        }
        probs.push(moved);
        refit_cum += err(&support, &probs);
        fixed_cum += err(&initial_support, &probs);
        refit.push(refit_cum);
        fixed.push(fixed_cum);
    }
    Ok((refit, fixed))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.max(f64::MIN_POSITIVE).ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn drift_experiment(horizons: &[usize], epsilon: f64, rho: f64, source: DriftSource, seed: u64) -> Result<DriftReport> {
    if horizons.is_empty() || horizons.contains(&0) {
        return Err(Error::invalid("drift horizons must be positive"));
    }
    let t_max = *horizons.iter().max().expect("non-empty");
    let (refit_all, fixed_all) = drift_series(t_max, epsilon, rho, source, seed)?;
    let refit: Vec<f64> = horizons.iter().map(|&t| refit_all[t - 1]).collect();
    let fixed: Vec<f64> = horizons.iter().map(|&t| fixed_all[t - 1]).collect();
    let refit_bound: Vec<f64> = horizons.iter().map(|&t| t as f64 * (epsilon + rho)).collect();
    let fixed_bound: Vec<f64> = horizons
        .iter()
        .map(|&t| t as f64 * epsilon + (t * (t + 1)) as f64 / 2.0 * rho)
        .collect();
    let xs: Vec<f64> = horizons.iter().map(|&t| t as f64).collect();
    Ok(DriftReport {
        epsilon,
        rho,
        horizons: horizons.to_vec(),
        refit_within_bound: refit.iter().zip(&refit_bound).all(|(r, b)| *r <= b + 1e-9),
        fixed_within_bound: fixed.iter().zip(&fixed_bound).all(|(f, b)| *f <= b + 1e-9),
        refit_slope: log_log_slope(&xs, &refit),
        fixed_slope: log_log_slope(&xs, &fixed),
        refit,
        fixed,
        refit_bound,
        fixed_bound,
    })
}

/// `b` is dominated by `a` with margin `gap` in every component.
pub fn dominated_with_margin(a: &[f64], b: &[f64], gap: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| *x >= y + gap)
}

/// Indices not `gap`-dominated by any pool member.
pub fn approx_pareto_set(vectors: &[Vec<f64>], gap: f64) -> Vec<usize> {
    (0..vectors.len())
        .filter(|&i| !vectors.iter().any(|v| dominated_with_margin(v, &vectors[i], gap)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoConsistencyReport {
    pub delta: f64,
    pub kappa: f64,
    pub scorer_front: Vec<usize>,
    pub approx_true_front: Vec<usize>,
    pub contained: bool,
    /// Coverage extension; `None` when no coverage perturbation was applied.
    pub coverage_contained: Option<bool>,
}

/// Perturbs the true vectors by at most `delta` (sup norm, seeded), takes
/// the scorer Pareto set and checks it lies in the true
/// `(2δ + κ)`-approximate Pareto set. With `coverage = Some((l, eta))` each
/// scorer target is replaced by a covering proposal whose true vector moves
/// by at most `l·eta`, and containment in the `(2δ + κ + l·eta)` set is
/// checked against the original pool.
pub fn pareto_consistency_check(
    true_vectors: &[Vec<f64>],
    delta: f64,
    kappa: f64,
    coverage: Option<(f64, f64)>,
    seed: u64,
) -> Result<ParetoConsistencyReport> {
    if true_vectors.is_empty() {
        return Err(Error::invalid("pareto consistency needs a non-empty pool"));
    }
    if !(delta >= 0.0 && kappa >= 0.0) {
        return Err(Error::invalid("delta and kappa must be non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let predicted: Vec<Vec<f64>> = true_vectors
        .iter()
        .map(|v| {
            v.iter()
                .map(|x| if delta > 0.0 { x + rng.gen_range(-delta..=delta) } else { *x })
                .collect()
        })
        .collect();
    Ok(pareto_consistency_from_predictions(true_vectors, &predicted, delta, kappa, coverage, &mut rng))
}

/// As [`pareto_consistency_check`] with caller-supplied predictions.
pub fn pareto_consistency_from_predictions(
    true_vectors: &[Vec<f64>],
    predicted: &[Vec<f64>],
    delta: f64,
    kappa: f64,
    coverage: Option<(f64, f64)>,
    rng: &mut ChaCha8Rng,
) -> ParetoConsistencyReport {
    let gap = 2.0 * delta + kappa;
    let scorer_front = non_dominated(predicted);
    let approx_true_front = approx_pareto_set(true_vectors, gap);
    let contained = scorer_front.iter().all(|i| approx_true_front.contains(i));
    let coverage_contained = coverage.map(|(l, eta)| {
        let shift = l * eta;
        scorer_front.iter().all(|&i| {
            let covered: Vec<f64> = true_vectors[i]
                .iter()
                .map(|x| if shift > 0.0 { x + rng.gen_range(-shift..=shift) } else { *x })
                .collect();
            !true_vectors.iter().any(|v| dominated_with_margin(v, &covered, gap + shift))
        })
    });
    ParetoConsistencyReport {
        delta,
        kappa,
        scorer_front,
        approx_true_front,
        contained,
        coverage_contained,
    }
}

/// Uniform-margin ranking on one pool: highs (true ≥ `r_high`) and lows
/// (true ≤ `r_low`) with `r_high − r_low > 2ε`, composed scores perturbed by
/// at most ε. Returns the number of (high, low) pairs ranked the wrong way.
pub fn margin_violations(true_scores: &[f64], predicted: &[f64], r_high: f64, r_low: f64) -> usize {
    let order = rank_scores(predicted);
    let mut pos = vec![0usize; order.len()];
    for (rank, &i) in order.iter().enumerate() {
        pos[i] = rank;
    }
    let highs: Vec<usize> = (0..true_scores.len()).filter(|&i| true_scores[i] >= r_high).collect();
    let lows: Vec<usize> = (0..true_scores.len()).filter(|&i| true_scores[i] <= r_low).collect();
    highs
        .iter()
        .map(|&h| lows.iter().filter(|&&l| pos[h] > pos[l]).count())
        .sum()
}

/// Scored pool of one scene: true and predicted composed scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenePool {
    pub scene_id: String,
    pub true_scores: Vec<f64>,
    pub predicted: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnrichmentThresholds {
    pub precision_levels: Vec<f64>,
    pub precision_true: f64,
    /// Elite/reject fraction for the worst-case margin row.
    pub worst_case_fraction: f64,
    /// Elite/reject fraction for the quantile margin rows.
    pub quantile_fraction: f64,
    pub quantiles: Vec<f64>,
    pub pair_high: f64,
    pub pair_low: f64,
    pub top_k: Vec<usize>,
}

impl Default for EnrichmentThresholds {
    fn default() -> Self {
        Self {
            precision_levels: vec![0.90, 0.95],
            precision_true: 0.90,
            worst_case_fraction: 0.05,
            quantile_fraction: 0.01,
            quantiles: vec![75.0, 90.0, 95.0],
            pair_high: 0.95,
            pair_low: 0.50,
            top_k: vec![1, 8, 16],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRow {
    pub threshold: f64,
    pub count: usize,
    pub mean_true: Option<f64>,
    pub frac_true_above: Option<f64>,
    pub frac_full_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginRow {
    /// `"max"` or the percentile, e.g. `"p90"`.
    pub error_statistic: String,
    pub fraction: f64,
    pub scenes_satisfying: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopKRow {
    pub k: usize,
    pub mean_best_true: f64,
    pub oracle_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichmentReport {
    pub scenes: usize,
    pub candidates: usize,
    pub pooled_full_score_rate: f64,
    pub margins: Vec<MarginRow>,
    pub pairwise_accuracy: Option<f64>,
    pub precision: Vec<PrecisionRow>,
    /// Full-score rate among candidates at the highest precision level,
    /// minus the pooled full-score rate.
    pub enrichment_gap: Option<f64>,
    pub top_k: Vec<TopKRow>,
}

/// Linear-interpolation percentile (`q` in `[0, 100]`).
pub fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = (q / 100.0).clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

fn is_full(r: f64) -> bool {
    r >= 1.0 - BOUND_TOL
}

/// Margin `γ = min(elite) − max(reject)` with elite/reject the top/bottom
/// `⌈fraction·n⌉` candidates by true score.
pub fn elite_reject_margin(true_scores: &[f64], fraction: f64) -> f64 {
    let mut v = true_scores.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    let k = ((fraction * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[k - 1] - v[v.len() - k]
}

pub fn enrichment_report(pools: &[ScenePool], th: &EnrichmentThresholds) -> Result<EnrichmentReport> {
    for p in pools {
        if p.true_scores.len() != p.predicted.len() || p.true_scores.is_empty() {
            return Err(Error::invalid(format!(
                "scene `{}`: true and predicted scores must be non-empty and aligned",
                p.scene_id
            )));
        }
    }
    let all: Vec<(f64, f64)> = pools
        .iter()
        .flat_map(|p| p.true_scores.iter().copied().zip(p.predicted.iter().copied()))
        .collect();
    let n = all.len();
    let pooled_full_score_rate = if n == 0 {
        0.0
    } else {
        all.iter().filter(|(r, _)| is_full(*r)).count() as f64 / n as f64
    };

    let scenes = pools.len().max(1) as f64;
    let errors: Vec<Vec<f64>> = pools
        .iter()
        .map(|p| p.true_scores.iter().zip(&p.predicted).map(|(r, s)| (s - r).abs()).collect())
        .collect();
    let mut margins = Vec::new();
    let worst = pools
        .iter()
        .zip(&errors)
        .filter(|(p, e)| {
            let eps = e.iter().copied().fold(0.0, f64::max);
            elite_reject_margin(&p.true_scores, th.worst_case_fraction) > 2.0 * eps
        })
        .count();
    margins.push(MarginRow {
        error_statistic: "max".into(),
        fraction: th.worst_case_fraction,
        scenes_satisfying: worst as f64 / scenes,
    });
    for &q in &th.quantiles {
        let ok = pools
            .iter()
            .zip(&errors)
            .filter(|(p, e)| elite_reject_margin(&p.true_scores, th.quantile_fraction) > 2.0 * percentile(e, q))
            .count();
        margins.push(MarginRow {
            error_statistic: format!("p{q}"),
            fraction: th.quantile_fraction,
            scenes_satisfying: ok as f64 / scenes,
        });
    }

    let (mut pairs, mut correct) = (0usize, 0.0f64);
    for p in pools {
        for (i, &ri) in p.true_scores.iter().enumerate() {
            if ri < th.pair_high {
                continue;
            }
            for (j, &rj) in p.true_scores.iter().enumerate() {
                if rj > th.pair_low {
                    continue;
                }
                pairs += 1;
                correct += match p.predicted[i].total_cmp(&p.predicted[j]) {
                    std::cmp::Ordering::Greater => 1.0,
                    std::cmp::Ordering::Equal => 0.5,
                    std::cmp::Ordering::Less => 0.0,
                };
            }
        }
    }
    let pairwise_accuracy = (pairs > 0).then(|| correct / pairs as f64);

    let precision: Vec<PrecisionRow> = th
        .precision_levels
        .iter()
        .map(|&t| {
            let sel: Vec<f64> = all.iter().filter(|(_, s)| *s >= t).map(|(r, _)| *r).collect();
            let c = sel.len();
            let frac = |f: &dyn Fn(f64) -> bool| (c > 0).then(|| sel.iter().filter(|&&r| f(r)).count() as f64 / c as f64);
            PrecisionRow {
                threshold: t,
                count: c,
                mean_true: (c > 0).then(|| sel.iter().sum::<f64>() / c as f64),
                frac_true_above: frac(&|r| r >= th.precision_true),
                frac_full_score: frac(&|r| is_full(r)),
            }
        })
        .collect();
    let enrichment_gap = precision
        .iter()
        .max_by(|a, b| a.threshold.total_cmp(&b.threshold))
        .and_then(|row| row.frac_full_score)
        .map(|q| q - pooled_full_score_rate);

    let top_k = th
        .top_k
        .iter()
        .map(|&k| {
            let (mut best_sum, mut gap_sum) = (0.0, 0.0);
            for p in pools {
                let order = rank_scores(&p.predicted);
                let best = order
                    .iter()
                    .take(k.max(1))
                    .map(|&i| p.true_scores[i])
                    .fold(f64::NEG_INFINITY, f64::max);
                let oracle = p.true_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                best_sum += best;
                gap_sum += oracle - best;
            }
            TopKRow {
                k,
                mean_best_true: best_sum / scenes,
                oracle_gap: gap_sum / scenes,
            }
        })
        .collect();

    Ok(EnrichmentReport {
        scenes: pools.len(),
        candidates: n,
        pooled_full_score_rate,
        margins,
        pairwise_accuracy,
        precision,
        enrichment_gap,
        top_k,
    })
}

/// Checks runnable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Enrichment,
    Expected,
    Multiround,
    Monotone,
    Drift,
    Pareto,
    Margin,
    Report,
}

impl std::str::FromStr for Check {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "enrichment" => Check::Enrichment,
            "expected" => Check::Expected,
            "multiround" => Check::Multiround,
            "monotone" => Check::Monotone,
            "drift" => Check::Drift,
            "pareto" => Check::Pareto,
            "margin" => Check::Margin,
            "report" => Check::Report,
            other => return Err(Error::invalid(format!("unknown check `{other}`"))),
        })
    }
}

impl Check {
    pub fn name(self) -> &'static str {
        match self {
            Check::Enrichment => "enrichment",
            Check::Expected => "expected",
            Check::Multiround => "multiround",
            Check::Monotone => "monotone",
            Check::Drift => "drift",
            Check::Pareto => "pareto",
            Check::Margin => "margin",
            Check::Report => "report",
        }
    }
}

/// Parameters of the randomized trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    pub max_items: usize,
    pub r_high: f64,
    pub max_eta: f64,
    pub perturbation: Perturbation,
    pub rounds: usize,
    pub epsilon: f64,
    pub rho: f64,
    pub drift_horizons: Vec<usize>,
    pub drift_source: DriftSource,
    pub pareto_n: usize,
    pub pareto_m: usize,
    pub delta: f64,
    pub kappa: f64,
    pub lipschitz: f64,
    pub coverage_eta: f64,
    pub margin_pool: usize,
    pub report_scenes: usize,
    pub report_pool: usize,
    /// Pooled full-score rate of the synthetic report pools.
    pub report_full_rate: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            max_items: 20,
            r_high: 0.95,
            max_eta: 0.2,
            perturbation: Perturbation::Adversarial,
            rounds: 10,
            epsilon: 0.02,
            rho: 0.05,
            drift_horizons: vec![4, 8, 16, 32, 64],
            drift_source: DriftSource::Oldest,
            pareto_n: 50,
            pareto_m: 3,
            delta: 0.05,
            kappa: 1e-6,
            lipschitz: 1.0,
            coverage_eta: 0.1,
            margin_pool: 32,
            report_scenes: 64,
            report_pool: 64,
            report_full_rate: 0.3542,
        }
    }
}

/// One trial row of the CSV log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    pub satisfied: bool,
    pub slack: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub check: Check,
    pub trials: usize,
    pub seed: u64,
    pub violations: usize,
    pub min_slack: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<serde_json::Value>,
    #[serde(skip)]
    pub rows: Vec<TrialRow>,
}

fn random_distribution(rng: &mut ChaCha8Rng, max_items: usize) -> DiscreteProposalDistribution {
    let n = rng.gen_range(1..=max_items.max(1));
    // coarse score grid so supports overlap and merge
    let items: Vec<f64> = (0..n).map(|_| rng.gen_range(0..=20) as f64 / 20.0).collect();
    let w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 1e-3).collect();
    let total: f64 = w.iter().sum();
    let probs: Vec<f64> = w.iter().map(|x| x / total).collect();
    DiscreteProposalDistribution::merged(items.into_iter().zip(probs))
}

fn step_config(rng: &mut ChaCha8Rng, p: &SimParams, seed: u64) -> EnrichmentStepConfig {
    EnrichmentStepConfig {
        alpha: rng.gen_range(0.0..=1.0),
        eta: rng.gen_range(0.0..=p.max_eta),
        r_high: p.r_high,
        seed,
        perturbation: p.perturbation,
    }
}

fn row(trial: usize, seed: u64, lhs: f64, rhs: f64) -> TrialRow {
    let slack = lhs - rhs;
    TrialRow {
        trial,
        seed,
        satisfied: slack >= -BOUND_TOL,
        slack,
        lhs,
        rhs,
    }
}

fn run_trial(check: Check, trial: usize, seed: u64, p: &SimParams) -> Result<TrialRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match check {
        Check::Enrichment | Check::Expected => {
            let mu = random_distribution(&mut rng, p.max_items);
            let nu = random_distribution(&mut rng, p.max_items);
            let cfg = step_config(&mut rng, p, seed);
            let (_, r) = if check == Check::Enrichment {
                enrichment_step(&mu, &nu, &cfg)?
            } else {
                expected_score_step(&mu, &nu, &cfg)?
            };
            Ok(row(trial, seed, r.p_after, r.lower_bound))
        }
        Check::Multiround => {
            let mu = random_distribution(&mut rng, p.max_items);
            let cfg = step_config(&mut rng, p, seed);
            let frac: f64 = rng.gen_range(0.05..=1.0);
            let r = multi_round(&mu, &|d: &DiscreteProposalDistribution, _| d.top_fraction(frac), &cfg, p.rounds)?;
            Ok(row(trial, seed, r.e_final, r.cumulative_bound))
        }
        Check::Monotone => {
            let (before, after) = random_policy_pair(&mut rng, p);
            let alpha = rng.gen_range(0.0..=0.1);
            let (before, after) = if after.j_surrogate() - before.j_surrogate() < -alpha {
                (after, before)
            } else {
                (before, after)
            };
            let r = monotonicity_check(&before, &after, p.epsilon, alpha);
            let mut tr = row(trial, seed, r.j_true_after, r.final_bound);
            tr.satisfied = r.general_holds && r.premises_hold && r.final_holds;
            Ok(tr)
        }
        Check::Drift => {
            let r = drift_experiment(&p.drift_horizons, p.epsilon, p.rho, p.drift_source, seed)?;
            let worst = r
                .refit
                .iter()
                .zip(&r.refit_bound)
                .map(|(a, b)| b + 1e-9 - a)
                .fold(f64::INFINITY, f64::min);
            let mut tr = row(trial, seed, r.fixed_slope - r.refit_slope, 0.5);
            tr.satisfied = r.refit_within_bound && r.fixed_within_bound && worst >= 0.0;
            Ok(tr)
        }
        Check::Pareto => {
            let vectors: Vec<Vec<f64>> = (0..p.pareto_n)
                .map(|_| (0..p.pareto_m).map(|_| rng.gen::<f64>()).collect())
                .collect();
            let r = pareto_consistency_check(&vectors, p.delta, p.kappa, Some((p.lipschitz, p.coverage_eta)), seed)?;
            let missing = r.scorer_front.iter().filter(|i| !r.approx_true_front.contains(i)).count();
            let mut tr = row(trial, seed, -(missing as f64), 0.0);
            tr.satisfied = r.contained && r.coverage_contained.unwrap_or(true);
            Ok(tr)
        }
        Check::Margin => {
            let (truth, pred, r_high, r_low) = margin_pool(&mut rng, p, seed);
            let v = margin_violations(&truth, &pred, r_high, r_low);
            Ok(row(trial, seed, -(v as f64), 0.0))
        }
        Check::Report => Err(Error::invalid("the report check is not a per-trial check")),
    }
}

fn random_policy_pair(rng: &mut ChaCha8Rng, p: &SimParams) -> (ScoredPolicy, ScoredPolicy) {
    let mk = |rng: &mut ChaCha8Rng| {
        let d = random_distribution(rng, p.max_items);
        let s: Vec<f64> = d
            .items()
            .iter()
            .map(|r| r + if p.epsilon > 0.0 { rng.gen_range(-p.epsilon..=p.epsilon) } else { 0.0 })
            .collect();
        ScoredPolicy::new(d, s).expect("aligned")
    };
    let a = mk(rng);
    let b = mk(rng);
    (a, b)
}

/// Pool with a high group above `r_high`, a low group below `r_low`
/// (margin > 2ε) and composed predictions perturbed by at most ε.
pub fn margin_pool(rng: &mut ChaCha8Rng, p: &SimParams, seed: u64) -> (Vec<f64>, Vec<f64>, f64, f64) {
    let eps = p.epsilon;
    let gamma = 2.0 * eps + rng.gen_range(1e-6..0.3);
    let r_low = rng.gen_range(0.0..(1.0 - gamma).max(1e-9));
    let r_high = r_low + gamma;
    let n = p.margin_pool.max(2);
    let truth: Vec<f64> = (0..n)
        .map(|i| match i % 3 {
            0 => rng.gen_range(r_high..=1.0),
            1 => rng.gen_range(0.0..=r_low),
            _ => rng.gen_range(0.0..=1.0),
        })
        .collect();
    let scorer = NoisyScorer::new(eps, 0.0, seed).expect("valid noise");
    let pred: Vec<f64> = truth
        .iter()
        .enumerate()
        .map(|(i, &r)| scorer.perturb_composed(r, "margin", i))
        .collect();
    (truth, pred, r_high, r_low)
}

/// Synthetic scene pools for the report check: true scores with the
/// configured full-score rate, predictions from a noisy scorer.
pub fn synthetic_report_pools(p: &SimParams, scorer: &NoisyScorer, seed: u64) -> Vec<ScenePool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..p.report_scenes)
        .map(|s| {
            let scene_id = format!("scene-{s:04}");
            let true_scores: Vec<f64> = (0..p.report_pool)
                .map(|_| {
                    if rng.gen::<f64>() < p.report_full_rate {
                        1.0
                    } else {
                        (rng.gen_range(0..100) as f64) / 100.0
                    }
                })
                .collect();
            let predicted = true_scores
                .iter()
                .enumerate()
                .map(|(i, &r)| scorer.perturb_composed(r, &scene_id, i))
                .collect();
            ScenePool {
                scene_id,
                true_scores,
                predicted,
            }
        })
        .collect()
}

/// Runs `trials` independent seeded trials of `check`. Results do not
/// depend on `jobs`.
pub fn run_simulation(check: Check, trials: usize, seed: u64, params: &SimParams, jobs: usize) -> Result<SimulationReport> {
    if check == Check::Report {
        let scorer = NoisyScorer::new(params.epsilon, 0.0, seed)?;
        let pools = synthetic_report_pools(params, &scorer, seed);
        let report = enrichment_report(&pools, &EnrichmentThresholds::default())?;
        return Ok(SimulationReport {
            check,
            trials: 1,
            seed,
            violations: 0,
            min_slack: 0.0,
            details: Some(serde_json::to_value(&report)?),
            rows: Vec::new(),
        });
    }
    let seeds: Vec<(usize, u64)> = (0..trials)
        .map(|t| (t, derive_seed(seed, &format!("{}/{t}", check.name()))))
        .collect();
    let rows: Vec<TrialRow> = par_map(jobs, &seeds, |&(t, s)| run_trial(check, t, s, params))
        .into_iter()
        .collect::<Result<_>>()?;
    let violations = rows.iter().filter(|r| !r.satisfied).count();
    let min_slack = rows.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min);
    let details = if check == Check::Drift {
        Some(serde_json::to_value(drift_experiment(
            &params.drift_horizons,
            params.epsilon,
            params.rho,
            params.drift_source,
            seed,
        )?)?)
    } else {
        None
    };
    Ok(SimulationReport {
        check,
        trials,
        seed,
        violations,
        min_slack,
        details,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use crate::selection::dominates;

    fn d(items: &[f64], probs: &[f64]) -> DiscreteProposalDistribution {
        DiscreteProposalDistribution::new(items.to_vec(), probs.to_vec()).unwrap()
    }

    #[test]
    fn validation() {
        assert!(DiscreteProposalDistribution::new(vec![0.5], vec![0.9]).is_err());
        assert!(DiscreteProposalDistribution::new(vec![1.5], vec![1.0]).is_err());
        assert!(DiscreteProposalDistribution::new(vec![], vec![]).is_err());
        let m = d(&[0.5, 0.5, 0.2], &[0.25, 0.25, 0.5]);
        assert_eq!(m.items(), &[0.2, 0.5]);
        assert_eq!(m.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn high_mass_examples() {
        let u = DiscreteProposalDistribution::uniform(&[0.2, 0.96, 1.0]).unwrap();
        assert!((u.high_score_mass(0.95) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(u.high_score_mass(0.0), 1.0);
        assert_eq!(DiscreteProposalDistribution::uniform(&[0.1, 0.2]).unwrap().high_score_mass(0.95), 0.0);
    }

    #[test]
    fn enrichment_examples() {
        let mu = d(&[0.0, 1.0], &[0.8, 0.2]);
        let nu = d(&[0.0, 1.0], &[0.4, 0.6]);
        let cfg = EnrichmentStepConfig { alpha: 0.5, eta: 0.0, ..Default::default() };
        let (_, r) = enrichment_step(&mu, &nu, &cfg).unwrap();
        assert!((r.xi - 0.4).abs() < 1e-15);
        assert!((r.p_after - 0.4).abs() < 1e-15);
        assert!((r.lower_bound - 0.4).abs() < 1e-15);
        assert!(r.satisfied);
        let (next, r) = enrichment_step(&mu, &nu, &EnrichmentStepConfig { alpha: 0.0, ..cfg }).unwrap();
        assert_eq!(next, mu);
        assert!(r.satisfied);
        let pooled = d(&[0.0, 1.0], &[1.0 - 0.3542, 0.3542]);
        let selected = d(&[0.0, 1.0], &[1.0 - 0.6974, 0.6974]);
        let (_, r) = enrichment_step(&pooled, &selected, &cfg).unwrap();
        assert!((r.xi - 0.3432).abs() < 1e-12);
    }

    #[test]
    fn adversarial_tv_is_tight() {
        let mu = d(&[0.0, 1.0], &[0.5, 0.5]);
        let nu = d(&[1.0], &[1.0]);
        let cfg = EnrichmentStepConfig { alpha: 0.5, eta: 0.1, ..Default::default() };
        let (next, r) = enrichment_step(&mu, &nu, &cfg).unwrap();
        assert!(r.slack.abs() < 1e-12);
        let mix = mu.mixture(&nu, 0.5).unwrap();
        assert!((next.tv_distance(&mix) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn expected_examples() {
        let mu = d(&[0.5], &[1.0]);
        let nu = d(&[0.8], &[1.0]);
        let cfg = EnrichmentStepConfig { alpha: 0.5, eta: 0.0, ..Default::default() };
        let (_, r) = expected_score_step(&mu, &nu, &cfg).unwrap();
        assert!((r.p_after - 0.65).abs() < 1e-15);
        assert!((r.lower_bound - 0.65).abs() < 1e-15);
        let (_, r) = expected_score_step(&mu, &mu, &cfg).unwrap();
        assert_eq!(r.xi, 0.0);
        assert_eq!(r.p_after, 0.5);
        let cfg = EnrichmentStepConfig { eta: 0.5 * 0.3, ..cfg };
        let (_, r) = expected_score_step(&mu, &nu, &cfg).unwrap();
        assert!((r.lower_bound - r.p_before).abs() < 1e-15);
    }

    #[test]
    fn multi_round_examples() {
        let mu = d(&[0.0, 0.5], &[0.5, 0.5]);
        let cfg = EnrichmentStepConfig { alpha: 0.5, eta: 0.01, ..Default::default() };
        let plus = |m: &DiscreteProposalDistribution, _| DiscreteProposalDistribution::point((m.expected_score() + 0.1).min(1.0));
        let r = multi_round(&mu, &plus, &cfg, 10).unwrap();
        assert!(r.satisfied);
        assert!((r.cumulative_gain - r.cumulative_eta - 0.4).abs() < 1e-12);
        assert!(r.e_final - r.e_initial >= 0.4 - 1e-12);
        assert!(!r.no_guarantee);

        let one = multi_round(&mu, &plus, &cfg, 1).unwrap();
        let (_, single) = expected_score_step(&mu, &plus(&mu, 0).unwrap(), &cfg).unwrap();
        assert_eq!(one.rounds[0], single);

        let heavy = EnrichmentStepConfig { eta: 0.2, ..cfg };
        let r = multi_round(&mu, &plus, &heavy, 5).unwrap();
        assert!(r.no_guarantee);
        assert!(r.satisfied);
    }

    #[test]
    fn oracle_at_k_examples() {
        assert_eq!(oracle_at_k(0.5, 1), 0.5);
        assert_eq!(oracle_at_k(1.0, 7), 1.0);
        assert_eq!(oracle_at_k(0.0, 7), 0.0);
        let a = oracle_at_k(0.3542, 64);
        assert!((a - (1.0 - 0.6458f64.powi(64))).abs() < 1e-15);
        assert!(a > 1.0 - 1e-11);
        assert!((oracle_lower_bound(0.5, 1, 0.2, 1.0) - 0.6).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn oracle_at_k_monotone(p in 0.0f64..1.0, q in 0.0f64..1.0, k in 1u32..100) {
            let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
            prop_assert!(oracle_at_k(lo, k) <= oracle_at_k(hi, k));
            prop_assert!(oracle_at_k(p, k) <= oracle_at_k(p, k + 1));
        }

        #[test]
        fn exact_mixture_bound(seed in 0u64..2000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mu = random_distribution(&mut rng, 12);
            let nu = random_distribution(&mut rng, 12);
            let cfg = EnrichmentStepConfig { alpha: rng.gen(), eta: 0.0, ..Default::default() };
            let (_, r) = enrichment_step(&mu, &nu, &cfg).unwrap();
            prop_assert!(r.satisfied, "{:?}", r);
        }
    }

    #[test]
    fn monotonicity_examples() {
        let before = ScoredPolicy::new(d(&[0.6], &[1.0]), vec![0.6]).unwrap();
        let after = ScoredPolicy::new(d(&[0.8], &[1.0]), vec![0.8]).unwrap();
        let r = monotonicity_check(&before, &after, 0.0, 0.0);
        assert!(r.true_change >= 0.0 && r.final_holds && r.premises_hold);

        let eps = 0.05;
        let before = ScoredPolicy::new(d(&[0.6], &[1.0]), vec![0.6 - eps]).unwrap();
        let after = ScoredPolicy::new(d(&[0.5], &[1.0]), vec![0.5 + eps]).unwrap();
        let r = monotonicity_check(&before, &after, eps, 0.0);
        assert!(r.premises_hold);
        assert!((r.true_change + 2.0 * eps).abs() < 1e-9);
        assert!(r.slack.abs() < 1e-9);
        assert!(r.final_holds);
    }

    #[test]
    fn drift_examples() {
        let (refit, fixed) = drift_series(10, 0.05, 0.0, DriftSource::Oldest, 0).unwrap();
        for (t, (r, f)) in refit.iter().zip(&fixed).enumerate() {
            assert!((r - (t + 1) as f64 * 0.05).abs() < 1e-12);
            assert!((f - (t + 1) as f64 * 0.05).abs() < 1e-12);
        }
        let r = drift_experiment(&[20], 0.0, 0.1, DriftSource::Oldest, 0).unwrap();
        assert!(r.refit[0] <= 2.0 + 1e-9);
        assert!((r.fixed_bound[0] - 21.0).abs() < 1e-12);
        assert!(r.fixed_within_bound);
        let r = drift_experiment(&[4, 8, 16, 32, 64], 0.02, 0.05, DriftSource::Oldest, 1).unwrap();
        assert!(r.refit_within_bound);
        assert!((r.refit_slope - 1.0).abs() < 1e-9);
        assert!(r.fixed_slope - r.refit_slope >= 0.5, "{r:?}");
    }

    #[test]
    fn pareto_boundary_needs_kappa() {
        let (delta, lo, hi) = (0.25, 0.25, 0.75);
        let truth = vec![vec![lo, lo], vec![hi, hi]];
        // worst-case errors make the pair tie in scorer space
        let pred = vec![vec![lo + delta, lo + delta], vec![hi - delta, hi - delta]];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r0 = pareto_consistency_from_predictions(&truth, &pred, delta, 0.0, None, &mut rng);
        assert_eq!(r0.scorer_front, vec![0, 1]);
        assert!(!r0.contained);
        let r = pareto_consistency_from_predictions(&truth, &pred, delta, 1e-9, None, &mut rng);
        assert!(r.contained);
    }

    #[test]
    fn pareto_zero_delta() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v: Vec<Vec<f64>> = (0..30).map(|_| (0..3).map(|_| rng.gen()).collect()).collect();
        let r = pareto_consistency_check(&v, 0.0, 1e-9, None, 1).unwrap();
        assert_eq!(r.scorer_front, non_dominated(&v));
        assert!(r.contained);
        for &i in &r.scorer_front {
            assert!(!v.iter().any(|w| dominates(w, &v[i])));
        }
    }

    #[test]
    fn percentile_and_margin() {
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0], 50.0), 2.5);
        assert_eq!(percentile(&[5.0], 90.0), 5.0);
        let scores: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        assert!((elite_reject_margin(&scores, 0.05) - (0.95 - 0.04)).abs() < 1e-12);
        assert!((elite_reject_margin(&scores, 0.01) - 0.99).abs() < 1e-12);
    }

    #[test]
    fn report_oracle_and_topk() {
        let p = SimParams { report_scenes: 20, ..SimParams::default() };
        let oracle = NoisyScorer::new(0.0, 0.0, 0).unwrap();
        let pools = synthetic_report_pools(&p, &oracle, 4);
        let r = enrichment_report(&pools, &EnrichmentThresholds::default()).unwrap();
        assert_eq!(r.pairwise_accuracy, Some(1.0));
        let bests: Vec<f64> = r.top_k.iter().map(|t| t.mean_best_true).collect();
        assert!(bests.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(r.top_k[0].oracle_gap, 0.0);
    }

    #[test]
    fn report_gap_vanishes_with_large_noise() {
        let p = SimParams { report_scenes: 160, ..SimParams::default() };
        let noisy = NoisyScorer::new(100.0, 0.0, 9).unwrap();
        let pools = synthetic_report_pools(&p, &noisy, 5);
        let r = enrichment_report(&pools, &EnrichmentThresholds::default()).unwrap();
        assert!(r.enrichment_gap.unwrap().abs() < 0.05, "{:?}", r.enrichment_gap);
        let sharp = NoisyScorer::new(0.01, 0.0, 9).unwrap();
        let r = enrichment_report(&synthetic_report_pools(&p, &sharp, 5), &EnrichmentThresholds::default()).unwrap();
        assert!(r.enrichment_gap.unwrap() > 0.3);
    }

    #[test]
    fn simulation_independent_of_jobs() {
        let p = SimParams::default();
        for check in [Check::Enrichment, Check::Monotone, Check::Pareto, Check::Margin] {
            let a = run_simulation(check, 50, 7, &p, 1).unwrap();
            let b = run_simulation(check, 50, 7, &p, 4).unwrap();
            assert_eq!(a.rows, b.rows);
            assert_eq!(a.violations, 0, "{check:?}");
        }
    }
}
