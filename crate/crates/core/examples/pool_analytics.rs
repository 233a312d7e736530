//! Quality and diversity statistics for every bundled scene's pool.

use clover_lab::analytics::pool_stats;
use clover_lab::demo::demo_scenes;
use clover_lab::evaluator::{compose, EvaluatorConfig, ScoreWeights};
use clover_lab::pseudo_expert::{run_pipeline, FamilyConfig};
use clover_lab::selection::NoisyScorer;

fn main() -> clover_lab::Result<()> {
    let weights = ScoreWeights::pdms_v1();
    let scorer = NoisyScorer::new(0.1, 0.0, 11)?;
    println!("{:<14} {:>5} {:>6} {:>6} {:>6} {:>6} {:>5}", "scene", "n", "sel", "gap", "ade", "rank", "cl@2");
    for scene in demo_scenes()? {
        let out = run_pipeline(&scene, &FamilyConfig::default(), &EvaluatorConfig::default(), &weights, 1, 1)?;
        let trajs: Vec<_> = out.pool.iter().map(|c| c.candidate.trajectory.clone()).collect();
        let truth: Vec<f64> = out.pool.iter().map(|c| compose(&c.subscores, &weights)).collect();
        let pred: Vec<f64> = truth.iter().enumerate().map(|(i, &t)| scorer.perturb_composed(t, &scene.id, i)).collect();
        let s = pool_stats(&scene.id, &trajs, &truth, &pred)?;
        println!(
            "{:<14} {:>5} {:>6.3} {:>6.3} {:>6.2} {:>6.2} {:>5}",
            s.scene_id, s.pool_size, s.selected_pdms, s.gap, s.pairwise_ade, s.effective_rank, s.clusters_2m
        );
    }
    Ok(())
}
