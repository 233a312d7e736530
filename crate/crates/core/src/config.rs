//! Run configuration. Every field has a default, so a config file only
//! needs the values it overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::{EvaluatorConfig, ScoreWeights};
use crate::pseudo_expert::FamilyConfig;
use crate::refinement::SimParams;
use crate::scene::{DEFAULT_DT, DEFAULT_HORIZON, DEFAULT_XY_LIMIT};
use crate::selection::{AnchorConfig, Stage1Weights, Stage2Weights};

pub const CONFIG_ENV: &str = "CLOVER_LAB_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub horizon_steps: usize,
    pub dt: f64,
    pub xy_limit: f64,
    pub num_proposals: usize,
    pub evaluator: EvaluatorConfig,
    pub families: FamilyConfig,
    /// Composition used for scoring records and ranking.
    pub score_weights: ScoreWeights,
    pub epdms_weights: ScoreWeights,
    pub deployment_weights: ScoreWeights,
    pub stage1: Stage1Weights,
    pub stage2: Stage2Weights,
    pub topk: usize,
    pub pareto_max: usize,
    pub pareto_min: usize,
    pub anchor: AnchorConfig,
    pub simulation: SimParams,
    pub seed: u64,
    pub cache: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            horizon_steps: DEFAULT_HORIZON,
            dt: DEFAULT_DT,
            xy_limit: DEFAULT_XY_LIMIT,
            num_proposals: 64,
            evaluator: EvaluatorConfig::default(),
            families: FamilyConfig::default(),
            score_weights: ScoreWeights::pdms_v1(),
            epdms_weights: ScoreWeights::epdms_v2(),
            deployment_weights: ScoreWeights::deployment(),
            stage1: Stage1Weights::default(),
            stage2: Stage2Weights::default(),
            topk: 8,
            pareto_max: 8,
            pareto_min: 2,
            anchor: AnchorConfig::default(),
            simulation: SimParams::default(),
            seed: 2,
            cache: None,
        }
    }
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::util::read_file(path)?;
        Self::from_json_str(&text).map_err(|e| match e {
            Error::Json(source) => Error::invalid(format!("config {}: {source}", path.display())),
            other => other,
        })
    }

    /// The explicit path, else the file named by `CLOVER_LAB_CONFIG`, else
    /// the defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self> {
        match explicit {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
                _ => Ok(Self::default()),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon_steps == 0 || !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("horizon_steps and dt must be positive"));
        }
        if !(self.xy_limit > 0.0) {
            return Err(Error::invalid("xy_limit must be positive"));
        }
        if self.pareto_min > self.pareto_max {
            return Err(Error::invalid(format!(
                "pareto_min ({}) exceeds pareto_max ({})",
                self.pareto_min, self.pareto_max
            )));
        }
        if self.topk == 0 || self.num_proposals == 0 {
            return Err(Error::invalid("topk and num_proposals must be positive"));
        }
        self.evaluator.validate()?;
        self.families.validate()?;
        self.score_weights.validate()?;
        self.epdms_weights.validate()?;
        self.deployment_weights.validate()?;
        self.anchor.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_hold_table_values() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!((c.horizon_steps, c.dt, c.xy_limit, c.num_proposals), (8, 0.5, 100.0, 64));
        assert_eq!(c.families.speeds, vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 15.0]);
        assert_eq!((c.families.max_scored, c.families.pool_keep), (180, 50));
        assert_eq!((c.stage1.gt, c.stage1.pseudo_expert), (1.0, 0.5));
        assert_eq!((c.stage2.traj, c.stage2.pareto, c.stage2.stability), (0.1, 1.0, 0.05));
        assert_eq!((c.pareto_max, c.pareto_min, c.topk), (8, 2, 8));
        assert_eq!(c.deployment_weights, ScoreWeights::deployment());
    }

    #[test]
    fn partial_override() {
        let c = RunConfig::from_json_str(r#"{"seed": 9, "families": {"pool_keep": 20}}"#).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.families.pool_keep, 20);
        assert_eq!(c.families.max_scored, 180);
        let empty = RunConfig::from_json_str("{}").unwrap();
        assert_eq!(empty, RunConfig::default());
        assert!(RunConfig::from_json_str(r#"{"pareto_min": 9}"#).is_err());
    }

    #[test]
    fn round_trip() {
        let c = RunConfig::default();
        let back = RunConfig::from_json_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
