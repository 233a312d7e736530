//! Proposal-set quality and diversity statistics.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{convex_hull, ring_area, Vec2};
use crate::scene::Trajectory;
use crate::selection::rank_scores;

pub const CLUSTER_RADII: [f64; 4] = [1.0, 2.0, 3.0, 4.0];
pub const TOPK_KS: [usize; 4] = [1, 2, 3, 6];
pub const QUALIFY_THRESHOLD: f64 = 0.8;
pub const TOP_REAL_N: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairwiseDistance {
    pub ade: f64,
    pub fde: f64,
    /// Fewer than two trajectories; both distances are reported as 0.
    pub no_pairs: bool,
}

/// Mean over unordered pairs of the mean per-step and final-step distances.
pub fn pairwise_ade_fde(pool: &[Trajectory]) -> PairwiseDistance {
    if pool.len() < 2 {
        return PairwiseDistance {
            ade: 0.0,
            fde: 0.0,
            no_pairs: true,
        };
    }
    let (mut ade, mut fde, mut pairs) = (0.0, 0.0, 0usize);
    for i in 0..pool.len() {
        for j in i + 1..pool.len() {
            let d: Vec<f64> = pool[i]
                .poses()
                .iter()
                .zip(pool[j].poses())
                .map(|(a, b)| a.position().distance(b.position()))
                .collect();
            ade += d.iter().sum::<f64>() / d.len().max(1) as f64;
            fde += pool[i].last().position().distance(pool[j].last().position());
            pairs += 1;
        }
    }
    PairwiseDistance {
        ade: ade / pairs as f64,
        fde: fde / pairs as f64,
        no_pairs: false,
    }
}

fn endpoints(pool: &[Trajectory]) -> Vec<Vec2> {
    pool.iter().map(|t| t.last().position()).collect()
}

/// Radial RMS of the endpoints about their centroid, and the area of
/// their convex hull.
pub fn endpoint_spread(pool: &[Trajectory]) -> (f64, f64) {
    let pts = endpoints(pool);
    if pts.is_empty() {
        return (0.0, 0.0);
    }
    let n = pts.len() as f64;
    let c = Vec2::new(pts.iter().map(|p| p.x).sum::<f64>() / n, pts.iter().map(|p| p.y).sum::<f64>() / n);
    let rms = (pts.iter().map(|p| p.distance(c).powi(2)).sum::<f64>() / n).sqrt();
    (rms, ring_area(&convex_hull(&pts)))
}

/// `exp` of the entropy of the normalized singular values of the centered,
/// flattened `(x, y)` trajectories. Degenerate pools give 1.
pub fn effective_rank(pool: &[Trajectory]) -> f64 {
    if pool.len() < 2 {
        return 1.0;
    }
    let cols = pool.iter().map(|t| 2 * t.len()).min().unwrap_or(0);
    if cols == 0 {
        return 1.0;
    }
    let mut m = DMatrix::<f64>::from_fn(pool.len(), cols, |r, c| {
        let p = pool[r].poses()[c / 2];
        if c % 2 == 0 {
            p.x
        } else {
            p.y
        }
    });
    for mut col in m.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    let sv = m.singular_values();
    let max = sv.max();
    if max <= 1e-12 {
        return 1.0;
    }
    let kept: Vec<f64> = sv.iter().copied().filter(|s| *s > max * 1e-10).collect();
    let total: f64 = kept.iter().sum();
    let entropy: f64 = kept.iter().map(|s| s / total).map(|p| -p * p.ln()).sum();
    entropy.exp()
}

/// Greedy clustering in pool order: each endpoint joins the first cluster
/// whose seed lies within `radius`, else seeds a new one.
pub fn endpoint_clusters(pool: &[Trajectory], radius: f64) -> usize {
    let mut seeds: Vec<Vec2> = Vec::new();
    for p in endpoints(pool) {
        if !seeds.iter().any(|s| s.distance(p) <= radius) {
            seeds.push(p);
        }
    }
    seeds.len()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityAware {
    pub qualified_count: usize,
    pub qualified_clusters: Vec<usize>,
    pub qualified_ade: f64,
    pub qualified_fde: f64,
    /// Fewer than two qualified proposals.
    pub qualified_empty: bool,
    pub top_real_ade: f64,
    pub top_real_fde: f64,
}

/// Diversity restricted to proposals with true score ≥ `threshold`, and to
/// the `top_n` proposals by true score (ties to the lower index).
pub fn quality_aware(pool: &[Trajectory], true_scores: &[f64], threshold: f64, top_n: usize) -> Result<QualityAware> {
    if pool.len() != true_scores.len() {
        return Err(Error::invalid("one true score per proposal is required"));
    }
    let qualified: Vec<Trajectory> = pool
        .iter()
        .zip(true_scores)
        .filter(|(_, s)| **s >= threshold)
        .map(|(t, _)| t.clone())
        .collect();
    let q = pairwise_ade_fde(&qualified);
    let top: Vec<Trajectory> = rank_scores(true_scores)
        .into_iter()
        .take(top_n)
        .map(|i| pool[i].clone())
        .collect();
    let t = pairwise_ade_fde(&top);
    Ok(QualityAware {
        qualified_count: qualified.len(),
        qualified_clusters: CLUSTER_RADII.iter().map(|&r| endpoint_clusters(&qualified, r)).collect(),
        qualified_ade: q.ade,
        qualified_fde: q.fde,
        qualified_empty: q.no_pairs,
        top_real_ade: t.ade,
        top_real_fde: t.fde,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopKEntry {
    pub k: usize,
    pub oracle: f64,
    pub mean: f64,
}

/// Best and mean true score among the first `k` of `order`.
pub fn topk_tables(true_scores: &[f64], order: &[usize], ks: &[usize]) -> Result<Vec<TopKEntry>> {
    if order.is_empty() || order.iter().any(|&i| i >= true_scores.len()) {
        return Err(Error::invalid("ordering must be non-empty and index the pool"));
    }
    Ok(ks
        .iter()
        .map(|&k| {
            let top: Vec<f64> = order.iter().take(k.max(1)).map(|&i| true_scores[i]).collect();
            TopKEntry {
                k,
                oracle: top.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean: top.iter().sum::<f64>() / top.len() as f64,
            }
        })
        .collect())
}

/// One report row. Counts are stored as floats so the aggregate row can
/// hold their means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolStats {
    pub scene_id: String,
    pub pool_size: f64,
    pub selected_pdms: f64,
    pub oracle_at_64: f64,
    pub gap: f64,
    pub mean_pdms: f64,
    pub std_pdms: f64,
    pub count_above_095: f64,
    pub count_above_090: f64,
    pub count_below_050: f64,
    pub pairwise_ade: f64,
    pub pairwise_fde: f64,
    pub endpoint_std_radius: f64,
    pub endpoint_area: f64,
    pub effective_rank: f64,
    pub clusters_1m: f64,
    pub clusters_2m: f64,
    pub clusters_3m: f64,
    pub clusters_4m: f64,
    pub qualified_count: f64,
    pub qualified_clusters_2m: f64,
    pub qualified_ade: f64,
    pub qualified_fde: f64,
    pub qualified_empty: f64,
    pub top6_real_ade: f64,
    pub top6_real_fde: f64,
    pub topk_oracle_1: f64,
    pub topk_oracle_2: f64,
    pub topk_oracle_3: f64,
    pub topk_oracle_6: f64,
    pub topk_mean_1: f64,
    pub topk_mean_2: f64,
    pub topk_mean_3: f64,
    pub topk_mean_6: f64,
}

/// Statistics of one pool given true scores and scorer predictions.
pub fn pool_stats(scene_id: &str, pool: &[Trajectory], true_scores: &[f64], predicted: &[f64]) -> Result<PoolStats> {
    if pool.is_empty() || pool.len() != true_scores.len() || pool.len() != predicted.len() {
        return Err(Error::invalid(format!(
            "scene `{scene_id}`: pool, true scores and predictions must be non-empty and aligned"
        )));
    }
    let n = pool.len() as f64;
    let order = rank_scores(predicted);
    let selected = true_scores[order[0]];
    let oracle = true_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = true_scores.iter().sum::<f64>() / n;
    let std = (true_scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n).sqrt();
    let count = |f: &dyn Fn(f64) -> bool| true_scores.iter().filter(|&&s| f(s)).count() as f64;
    let pw = pairwise_ade_fde(pool);
    let (radius, area) = endpoint_spread(pool);
    let clusters: Vec<f64> = CLUSTER_RADII.iter().map(|&r| endpoint_clusters(pool, r) as f64).collect();
    let qa = quality_aware(pool, true_scores, QUALIFY_THRESHOLD, TOP_REAL_N)?;
    let tk = topk_tables(true_scores, &order, &TOPK_KS)?;
    Ok(PoolStats {
        scene_id: scene_id.to_string(),
        pool_size: n,
        selected_pdms: selected,
        oracle_at_64: oracle,
        gap: oracle - selected,
        mean_pdms: mean,
        std_pdms: std,
        count_above_095: count(&|s| s > 0.95),
        count_above_090: count(&|s| s > 0.90),
        count_below_050: count(&|s| s < 0.50),
        pairwise_ade: pw.ade,
        pairwise_fde: pw.fde,
        endpoint_std_radius: radius,
        endpoint_area: area,
        effective_rank: effective_rank(pool),
        clusters_1m: clusters[0],
        clusters_2m: clusters[1],
        clusters_3m: clusters[2],
        clusters_4m: clusters[3],
        qualified_count: qa.qualified_count as f64,
        qualified_clusters_2m: qa.qualified_clusters[1] as f64,
        qualified_ade: qa.qualified_ade,
        qualified_fde: qa.qualified_fde,
        qualified_empty: if qa.qualified_empty { 1.0 } else { 0.0 },
        top6_real_ade: qa.top_real_ade,
        top6_real_fde: qa.top_real_fde,
        topk_oracle_1: tk[0].oracle,
        topk_oracle_2: tk[1].oracle,
        topk_oracle_3: tk[2].oracle,
        topk_oracle_6: tk[3].oracle,
        topk_mean_1: tk[0].mean,
        topk_mean_2: tk[1].mean,
        topk_mean_3: tk[2].mean,
        topk_mean_6: tk[3].mean,
    })
}

/// Field-wise mean of the rows, labelled `scene_id`.
pub fn aggregate_stats(rows: &[PoolStats], scene_id: &str) -> Result<PoolStats> {
    if rows.is_empty() {
        return Err(Error::invalid("nothing to aggregate"));
    }
    let mut acc = serde_json::Map::new();
    for r in rows {
        let serde_json::Value::Object(obj) = serde_json::to_value(r)? else {
            unreachable!("PoolStats serializes to an object")
        };
        for (k, v) in obj {
            if let Some(x) = v.as_f64() {
                let e = acc.entry(k).or_insert(serde_json::Value::from(0.0));
                *e = serde_json::Value::from(e.as_f64().unwrap_or(0.0) + x / rows.len() as f64);
            }
        }
    }
    acc.insert("scene_id".into(), serde_json::Value::from(scene_id));
    Ok(serde_json::from_value(serde_json::Value::Object(acc))?)
}

/// CSV with one row per scene followed by the aggregate row.
pub fn stats_csv(rows: &[PoolStats]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    if !rows.is_empty() {
        w.serialize(aggregate_stats(rows, "ALL")?)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn write_stats_csv(path: &Path, rows: &[PoolStats]) -> Result<()> {
    crate::util::write_atomic(path, &stats_csv(rows)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Pose2D;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(dy: f64, speed: f64) -> Trajectory {
        Trajectory::new((1..=8).map(|t| Pose2D::new(speed * t as f64 * 0.5, dy, 0.0)).collect(), 0.5).unwrap()
    }

    fn random_pool(rng: &mut ChaCha8Rng, n: usize) -> Vec<Trajectory> {
        (0..n).map(|_| line(rng.gen_range(-3.0..3.0), rng.gen_range(0.0..15.0))).collect()
    }

    #[test]
    fn pairwise_examples() {
        let a = line(0.0, 8.0);
        assert_eq!(pairwise_ade_fde(&[a.clone(), a.clone()]).ade, 0.0);
        let p = pairwise_ade_fde(&[a.clone(), line(1.0, 8.0)]);
        assert!((p.ade - 1.0).abs() < 1e-12 && (p.fde - 1.0).abs() < 1e-12);
        let s = pairwise_ade_fde(&[a]);
        assert!(s.no_pairs && s.ade == 0.0);
    }

    #[test]
    fn spread_examples() {
        let a = line(0.0, 8.0);
        assert_eq!(endpoint_spread(&[a.clone(), a.clone()]), (0.0, 0.0));
        let corner = |x: f64, y: f64| Trajectory::new(vec![Pose2D::new(0.0, 0.0, 0.0), Pose2D::new(x, y, 0.0)], 0.5).unwrap();
        let sq = [corner(0.0, 0.0), corner(1.0, 0.0), corner(1.0, 1.0), corner(0.0, 1.0)];
        assert!((endpoint_spread(&sq).1 - 1.0).abs() < 1e-12);
        let (r, area) = endpoint_spread(&[line(0.0, 2.0), line(0.0, 4.0), line(0.0, 6.0)]);
        assert!(r > 0.0 && area == 0.0);
    }

    #[test]
    fn effective_rank_examples() {
        let a = line(0.0, 8.0);
        assert_eq!(effective_rank(&[a.clone(), a.clone(), a.clone()]), 1.0);
        let scaled: Vec<Trajectory> = (0..4).map(|k| line(k as f64, 8.0)).collect();
        assert!((effective_rank(&scaled) - 1.0).abs() < 1e-9);
        // ±lateral and ±longitudinal offsets: two equal orthogonal modes
        let base = |dx: f64, dy: f64| {
            Trajectory::new((1..=8).map(|t| Pose2D::new(4.0 * t as f64 + dx, dy, 0.0)).collect(), 0.5).unwrap()
        };
        let pool = [base(1.0, 0.0), base(-1.0, 0.0), base(0.0, 1.0), base(0.0, -1.0)];
        assert!((effective_rank(&pool) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn cluster_examples() {
        let end = |x: f64| Trajectory::new(vec![Pose2D::new(x, 0.0, 0.0)], 0.5).unwrap();
        let pool = [end(0.0), end(5.0), end(10.0)];
        assert_eq!(endpoint_clusters(&pool, 2.0), 3);
        assert_eq!(endpoint_clusters(&pool, f64::INFINITY), 1);
        assert_eq!(endpoint_clusters(&[end(0.0), end(0.5), end(0.9)], 1.0), 1);
    }

    #[test]
    fn quality_aware_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pool = random_pool(&mut rng, 10);
        let none = quality_aware(&pool, &[0.1; 10], 0.8, 6).unwrap();
        assert_eq!(none.qualified_count, 0);
        assert!(none.qualified_empty && none.qualified_ade == 0.0);
        let all = quality_aware(&pool, &[1.0; 10], 0.8, 6).unwrap();
        let full = pairwise_ade_fde(&pool);
        assert_eq!((all.qualified_ade, all.qualified_fde), (full.ade, full.fde));
        let scores = [0.1, 0.9, 0.3, 0.95, 0.7, 0.8, 0.2, 0.85, 0.99, 0.5];
        let qa = quality_aware(&pool, &scores, 0.8, 6).unwrap();
        let hand: Vec<Trajectory> = [8, 3, 1, 7, 5, 4].iter().map(|&i| pool[i].clone()).collect();
        assert_eq!(qa.top_real_ade, pairwise_ade_fde(&hand).ade);
        assert_eq!(qa.qualified_count, 5);
    }

    #[test]
    fn topk_examples() {
        let truth = [0.5, 0.9, 0.7, 1.0];
        let order = [2, 0, 3, 1];
        let t = topk_tables(&truth, &order, &[1, 2, 3]).unwrap();
        assert_eq!((t[0].oracle, t[0].mean), (0.7, 0.7));
        assert_eq!(t[2].oracle, 1.0);
        let oracle = rank_scores(&truth);
        let t = topk_tables(&truth, &oracle, &[2]).unwrap();
        assert_eq!(t[0].oracle, 1.0);
    }

    #[test]
    fn stats_and_csv() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pool = random_pool(&mut rng, 12);
        let truth: Vec<f64> = (0..12).map(|_| rng.gen()).collect();
        let pred: Vec<f64> = (0..12).map(|_| rng.gen()).collect();
        let s = pool_stats("a", &pool, &truth, &pred).unwrap();
        assert!(s.gap >= 0.0);
        assert!(s.effective_rank >= 1.0 && s.effective_rank <= 12.0);
        let csv = String::from_utf8(stats_csv(&[s.clone(), s.clone()]).unwrap()).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("scene_id,pool_size,selected_pdms,oracle_at_64,gap"));
        assert!(lines[3].starts_with("ALL,"));
        let agg = aggregate_stats(std::slice::from_ref(&s), "ALL").unwrap();
        assert_eq!(agg.pairwise_ade, s.pairwise_ade);
    }

    proptest! {
        #[test]
        fn invariants(seed in 0u64..500, n in 1usize..20) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pool = random_pool(&mut rng, n);
            let truth: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
            let pred: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
            let order = rank_scores(&pred);
            let t = topk_tables(&truth, &order, &[1, 2, 3, 6]).unwrap();
            prop_assert!(t.windows(2).all(|w| w[0].oracle <= w[1].oracle));
            prop_assert_eq!(t[0].oracle, t[0].mean);
            let c: Vec<usize> = CLUSTER_RADII.iter().map(|&r| endpoint_clusters(&pool, r)).collect();
            prop_assert!(c.windows(2).all(|w| w[0] >= w[1]));
            let er = effective_rank(&pool);
            prop_assert!(er >= 1.0 - 1e-9 && er <= n.min(16) as f64 + 1e-9);
            let mut rev = pool.clone();
            rev.reverse();
            prop_assert!((effective_rank(&rev) - er).abs() < 1e-8);
            let q0 = quality_aware(&pool, &truth, 0.0, 6).unwrap();
            let full = pairwise_ade_fde(&pool);
            prop_assert_eq!((q0.qualified_ade, q0.qualified_fde), (full.ade, full.fde));
            let s = pool_stats("p", &pool, &truth, &pred).unwrap();
            prop_assert!(s.gap >= 0.0 && s.count_above_090 <= n as f64);
        }
    }
}
