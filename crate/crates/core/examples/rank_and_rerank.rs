//! Ranks a generated pool with a noisy scorer, then softly reranks it
//! against the human trajectory as anchor.

use clover_lab::demo;
use clover_lab::evaluator::{compose, EvaluatorConfig, ScoreWeights};
use clover_lab::pseudo_expert::{run_pipeline, FamilyConfig};
use clover_lab::selection::{anchor_rerank, rank, selection_report, AnchorConfig, CandidatePool, NoisyScorer};

fn main() -> clover_lab::Result<()> {
    let scene = demo::off_route_bait("bait-demo", 8.0, 20.0)?;
    let weights = ScoreWeights::pdms_v1();
    let out = run_pipeline(&scene, &FamilyConfig::default(), &EvaluatorConfig::default(), &weights, 3, 1)?;
    let truth: Vec<_> = out.pool.iter().map(|c| c.subscores).collect();
    let true_scores: Vec<f64> = truth.iter().map(|s| compose(s, &weights)).collect();
    let pool = CandidatePool::new(
        scene.id.clone(),
        out.pool.iter().map(|c| c.candidate.trajectory.clone()).collect(),
    )
    .with_truth(truth);

    let scorer = NoisyScorer::new(0.1, 0.05, 7)?;
    let ranking = rank(&pool, &scorer, &weights)?;
    let plain = selection_report(&true_scores, &ranking.order, 8)?;
    println!("scorer top-1 true={:.3} oracle={:.3} gap={:.3}", plain.selected_true_score, plain.oracle_true_score, plain.gap);

    let re = anchor_rerank(&pool.trajectories, &ranking.scores, &scene.human_trajectory, &AnchorConfig::default())?;
    let anchored = selection_report(&true_scores, &re.order, 8)?;
    println!(
        "anchored top-1 true={:.3} Q={:.3} xy_rms={:.2} m",
        anchored.selected_true_score, re.q[re.top1], re.xy_rms[re.top1]
    );
    Ok(())
}
