use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::record::RunRecord;
use super::train::{train_seed, RunContext};
use crate::envs::EnvId;
use crate::integration::{Counters, MethodId};
use crate::stats::{bootstrap_ci_iqm, ena, trimmed_iqm, BOOTSTRAP_RESAMPLES, BOOTSTRAP_SEED};
use crate::{Error, Result};

/// Summary of one ablation variant on one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub env: EnvId,
    pub variant: MethodId,
    pub config_hash: String,
    pub total_steps: usize,
    pub seeds: Vec<u64>,
    pub final_window: Vec<f64>,
    pub iqm: f64,
    pub ci: Option<(f64, f64)>,
    pub ena: Option<f64>,
    pub j_exp: Option<f64>,
    pub j_ref: f64,
    /// Per-seed eval curves: `(step, mean return)`.
    pub curves: Vec<Vec<(usize, f64)>>,
    pub counters: Vec<Counters>,
    /// Largest gate probability seen, for gated variants.
    pub p_max: Option<f64>,
    pub aborted: Vec<Option<String>>,
}

impl AblationResult {
    pub fn from_records(cfg: &RunConfig, records: &[RunRecord]) -> Result<Self> {
        let first = records.first().ok_or_else(|| Error::invalid("no records"))?;
        let finals: Vec<f64> = records.iter().map(|r| r.final_window).collect();
        let iqm = trimmed_iqm(&finals);
        let ci = if finals.len() >= 4 && finals.iter().all(|x| x.is_finite()) {
            Some(bootstrap_ci_iqm(&finals, BOOTSTRAP_RESAMPLES, BOOTSTRAP_SEED, 0.95)?)
        } else {
            None
        };
        Ok(Self {
            env: cfg.env,
            variant: cfg.method.id,
            config_hash: cfg.hash(),
            total_steps: cfg.total_steps,
            seeds: records.iter().map(|r| r.seed).collect(),
            iqm,
            ci,
            ena: first.j_exp.map(|je| ena(iqm, je, first.j_ref).map(|e| e.value)).transpose()?,
            j_exp: first.j_exp,
            j_ref: first.j_ref,
            curves: records.iter().map(|r| r.evals.iter().map(|e| (e.step, e.mean)).collect()).collect(),
            counters: records.iter().map(|r| r.counters).collect(),
            p_max: records
                .iter()
                .filter_map(|r| r.gate.as_ref().map(|g| g.p_max))
                .reduce(f64::max),
            aborted: records.iter().map(|r| r.aborted.clone()).collect(),
            final_window: finals,
        })
    }

    pub fn path(dir: &Path, env: EnvId, variant: MethodId) -> PathBuf {
        dir.join(format!("{env}__{variant}.json"))
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let p = Self::path(dir, self.env, self.variant);
        std::fs::write(&p, serde_json::to_string_pretty(self)? + "\n").map_err(|e| Error::io(&p, e))?;
        Ok(p)
    }
}

/// Run `variant` on `cfg.env` over the config's seeds and write
/// `<dir>/<env>__<variant>.json`.
pub fn ablate(cfg: &RunConfig, variant: MethodId, dir: &Path, ctx: &RunContext) -> Result<(AblationResult, PathBuf)> {
    let mut cfg = cfg.clone();
    cfg.method.id = variant;
    cfg.validate()?;
    let records = cfg.seeds.iter().map(|&s| train_seed(&cfg, s, ctx)).collect::<Result<Vec<_>>>()?;
    let result = AblationResult::from_records(&cfg, &records)?;
    let path = result.save(dir)?;
    Ok((result, path))
}
