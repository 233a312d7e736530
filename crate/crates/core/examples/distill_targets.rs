//! Builds top-k and vector-Pareto target sets for a pool and evaluates the
//! generator loss terms for a toy student set.

use clover_lab::demo;
use clover_lab::evaluator::{compose, EvaluatorConfig, ScoreWeights};
use clover_lab::pseudo_expert::{run_pipeline, FamilyConfig};
use clover_lab::scene::Trajectory;
use clover_lab::selection::{default_pareto_components, pareto_targets, rank_scores, stage2_gen_loss_terms, Stage2Weights};

fn main() -> clover_lab::Result<()> {
    let scene = demo::curve("curve-demo", 8.0, 60.0)?;
    let weights = ScoreWeights::pdms_v1();
    let out = run_pipeline(&scene, &FamilyConfig::default(), &EvaluatorConfig::default(), &weights, 5, 1)?;
    let predicted: Vec<_> = out.pool.iter().map(|c| c.subscores).collect();
    let composed: Vec<f64> = predicted.iter().map(|s| compose(s, &weights)).collect();
    let trajs: Vec<Trajectory> = out.pool.iter().map(|c| c.candidate.trajectory.clone()).collect();

    let topk: Vec<usize> = rank_scores(&composed).into_iter().take(8).collect();
    let pareto = pareto_targets(&predicted, &composed, &default_pareto_components(&weights), 8, 2)?;
    println!("top-k  {topk:?}");
    println!("front  {:?}", pareto.front);
    println!("pareto {:?}", pareto.selected);

    let pick = |ix: &[usize]| ix.iter().map(|&i| trajs[i].clone()).collect::<Vec<_>>();
    let student = pick(&topk[..4]);
    let teacher = student.clone();
    let terms = stage2_gen_loss_terms(
        &student,
        &scene.human_trajectory,
        &pick(&topk),
        &pick(&pareto.selected),
        &teacher,
        &Stage2Weights::default(),
    )?;
    println!("{terms:#?}");
    Ok(())
}
