//! Runs the pseudo-expert pipeline on one bundled scene and prints each
//! stage's size plus the training sample.

use clover_lab::demo;
use clover_lab::evaluator::{EvaluatorConfig, ScoreWeights};
use clover_lab::pseudo_expert::{run_pipeline, FamilyConfig};

fn main() -> clover_lab::Result<()> {
    let scene = demo::lead_brake("lead-brake-demo", 10.0, 25.0, 4.0)?;
    let out = run_pipeline(&scene, &FamilyConfig::default(), &EvaluatorConfig::default(), &ScoreWeights::pdms_v1(), 1, 1)?;
    println!("generated {}", out.candidates.len());
    println!("scored    {}", out.scored.len());
    println!("retained  {}", out.retained.len());
    println!("boundary  {}", out.interpolated.len());
    println!("pool      {}", out.pool.len());
    for (traj, src) in out.training.trajectories.iter().zip(&out.training.sources) {
        let end = traj.last();
        let label = src.map_or("human".to_string(), |id| format!("#{id}"));
        println!("  {label:>6} ends at ({:6.2}, {:5.2})", end.x, end.y);
    }
    Ok(())
}
