//! Executes the refinement guarantees on small instances.

use clover_lab::refinement::*;

fn main() -> clover_lab::Result<()> {
    let mu = DiscreteProposalDistribution::new(vec![0.0, 1.0], vec![0.8, 0.2])?;
    let nu = DiscreteProposalDistribution::new(vec![0.0, 1.0], vec![0.4, 0.6])?;
    let cfg = EnrichmentStepConfig { alpha: 0.5, eta: 0.05, ..Default::default() };
    let (_, r) = enrichment_step(&mu, &nu, &cfg)?;
    println!("enrichment: p={} q={} after={:.3} bound={:.3}", r.p_before, r.q_target, r.p_after, r.lower_bound);

    let plus = |m: &DiscreteProposalDistribution, _| DiscreteProposalDistribution::point((m.expected_score() + 0.1).min(1.0));
    let mr = multi_round(&mu, &plus, &EnrichmentStepConfig { eta: 0.01, ..cfg }, 10)?;
    println!("multi-round: E0={:.3} E10={:.3} bound={:.3}", mr.e_initial, mr.e_final, mr.cumulative_bound);

    println!("oracle@64 at p=0.3542: {:.12}", oracle_at_k(0.3542, 64));

    let drift = drift_experiment(&[4, 8, 16, 32, 64], 0.02, 0.05, DriftSource::Oldest, 0)?;
    println!("drift slopes: refit {:.2}, fixed {:.2}", drift.refit_slope, drift.fixed_slope);

    for check in [Check::Enrichment, Check::Monotone, Check::Pareto, Check::Margin] {
        let rep = run_simulation(check, 2000, 1, &SimParams::default(), 4)?;
        println!("{:>10}: {} trials, {} violations", check.name(), rep.trials, rep.violations);
    }
    Ok(())
}
