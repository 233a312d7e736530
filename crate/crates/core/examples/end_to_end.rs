//! Full run on the bundled scenes; reports go to the directory given as the
//! first argument (default `demo-out`).

use std::path::PathBuf;

use clover_lab::commands::run_demo;
use clover_lab::config::RunConfig;

fn main() -> clover_lab::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "demo-out".into()));
    for s in run_demo(&out, &RunConfig::default(), 1, 4)? {
        println!("{:<14} generated={} scored={} retained={} pseudo_experts={}", s.scene_id, s.generated, s.scored, s.retained, s.pseudo_experts);
    }
    println!("reports in {}", out.display());
    Ok(())
}
