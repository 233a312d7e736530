//! Scores the human trajectory and a hard lane change on a bundled scene.

use clover_lab::demo;
use clover_lab::evaluator::{compose_epdms, compose_pdms, compute_subscores, human_reference, EvaluatorConfig, ScoreWeights};
use clover_lab::pseudo_expert::build_candidate;

fn main() -> clover_lab::Result<()> {
    let scene = demo::squeeze("squeeze-demo", 8.0, 1.6)?;
    let cfg = EvaluatorConfig::default();
    let human = human_reference(&scene, &cfg)?;
    let swerve = build_candidate(&scene, &[8.0; 8], 0.0, 3.5, 0.35)?;

    for (name, traj) in [("human", &scene.human_trajectory), ("swerve", &swerve)] {
        let s = compute_subscores(&scene, traj, &cfg)?;
        println!(
            "{name:>7}: nc={} dac={} ttc={} ep={:.3} comfort={}  pdms={:.4} epdms={:.4}",
            s.nc,
            s.dac,
            s.ttc,
            s.ep,
            s.comfort,
            compose_pdms(&s, &ScoreWeights::pdms_v1()),
            compose_epdms(&s, &human, &ScoreWeights::epdms_v2()),
        );
    }
    Ok(())
}
