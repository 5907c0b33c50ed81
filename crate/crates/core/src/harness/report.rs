use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::record::RunRecord;
use crate::envs::EnvId;
use crate::integration::MethodId;
use crate::stats::{
    bootstrap_ci_iqm, ena, first_permanent_crossing, holm_bonferroni, mann_whitney_two_sided, significance_marker,
    trimmed_iqm, BOOTSTRAP_RESAMPLES, BOOTSTRAP_SEED,
};
use crate::{Error, Result};

/// ENA levels at which sample-efficiency crossings are reported.
pub const CROSSING_ENA_LEVELS: [f64; 3] = [0.0, 0.25, 0.5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub env: EnvId,
    pub perturbation: String,
    pub method: MethodId,
    pub seeds: usize,
    pub iqm: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Two-sided Mann-Whitney against the reference method.
    pub p_raw: Option<f64>,
    pub p_holm: Option<f64>,
    pub marker: String,
    pub ena: Option<f64>,
    pub j_exp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingRow {
    pub env: EnvId,
    pub perturbation: String,
    pub method: MethodId,
    pub ena_level: f64,
    pub threshold: f64,
    pub step: Option<usize>,
    pub censored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub env: EnvId,
    pub perturbation: String,
    pub method: MethodId,
    pub step: usize,
    /// IQM across seeds (plain mean below four seeds).
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub reference: Option<MethodId>,
    pub rows: Vec<ReportRow>,
    pub crossings: Vec<CrossingRow>,
    pub curves: Vec<CurvePoint>,
}

type CellKey = (EnvId, String, MethodId);

fn group(records: &[RunRecord]) -> Result<BTreeMap<CellKey, Vec<&RunRecord>>> {
    let mut cells: BTreeMap<CellKey, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        if !r.j_exp_unperturbed {
            return Err(Error::MixedConfig(format!(
                "record for seed {} does not carry an unperturbed expert return",
                r.seed
            )));
        }
        let key = (r.config.env, r.config.perturbation.label(), r.config.method.id);
        cells.entry(key).or_default().push(r);
    }
    for ((env, pert, method), rs) in &cells {
        if rs.iter().any(|r| r.cell_hash != rs[0].cell_hash) {
            return Err(Error::MixedConfig(format!("{env}/{pert}/{method} has records from different configs")));
        }
        let mut seeds: Vec<u64> = rs.iter().map(|r| r.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != rs.len() {
            return Err(Error::MixedConfig(format!("{env}/{pert}/{method} repeats a seed")));
        }
    }
    Ok(cells)
}

fn j_exp_for_env(records: &[RunRecord], env: EnvId) -> Result<Option<f64>> {
    let mut values = records.iter().filter(|r| r.config.env == env).filter_map(|r| r.j_exp);
    let Some(first) = values.next() else { return Ok(None) };
    if values.any(|v| v != first) {
        return Err(Error::MixedConfig(format!("{env}: records disagree on the expert return")));
    }
    Ok(Some(first))
}

fn center(xs: &[f64]) -> f64 {
    trimmed_iqm(xs)
}

/// Per-cell IQM, bootstrap CI, Holm-corrected Mann-Whitney p against
/// `reference` (within each env and perturbation), ENA and crossings.
pub fn report(records: &[RunRecord], reference: MethodId) -> Result<Report> {
    let cells = group(records)?;
    let mut out = Report {
        reference: Some(reference),
        ..Report::default()
    };
    let mut by_block: BTreeMap<(EnvId, String), Vec<(MethodId, Vec<&RunRecord>)>> = BTreeMap::new();
    for ((env, pert, method), rs) in cells {
        by_block.entry((env, pert)).or_default().push((method, rs));
    }
    for ((env, pert), methods) in by_block {
        let j_exp = j_exp_for_env(records, env)?;
        let j_ref = methods[0].1[0].j_ref;
        let finals = |rs: &[&RunRecord]| -> Vec<f64> { rs.iter().map(|r| r.final_window).collect() };
        let ref_finals = methods.iter().find(|(m, _)| *m == reference).map(|(_, rs)| finals(rs));
        let mut raw = Vec::new();
        for (method, rs) in &methods {
            let xs = finals(rs);
            if xs.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("{env}/{pert}/{method}: non-finite final scalar")));
            }
            let iqm = center(&xs);
            let (ci_lo, ci_hi) = if xs.len() >= 4 {
                bootstrap_ci_iqm(&xs, BOOTSTRAP_RESAMPLES, BOOTSTRAP_SEED, 0.95)?
            } else {
                (f64::NAN, f64::NAN)
            };
            let p_raw = match &ref_finals {
                Some(r) if *method != reference => Some(mann_whitney_two_sided(&xs, r)?.p),
                _ => None,
            };
            if let Some(p) = p_raw {
                raw.push((out.rows.len(), p));
            }
            out.rows.push(ReportRow {
                env,
                perturbation: pert.clone(),
                method: *method,
                seeds: xs.len(),
                iqm,
                ci_lo,
                ci_hi,
                p_raw,
                p_holm: None,
                marker: String::new(),
                ena: j_exp.map(|je| ena(iqm, je, j_ref).map(|e| e.value)).transpose()?,
                j_exp,
            });

            // Curves: IQM across seeds at each shared eval step.
            let steps: Vec<usize> = rs[0].evals.iter().map(|e| e.step).collect();
            let mut curve = Vec::with_capacity(steps.len());
            for (k, &step) in steps.iter().enumerate() {
                let vals: Vec<f64> = rs.iter().filter_map(|r| r.evals.get(k).map(|e| e.mean)).collect();
                let v = center(&vals);
                curve.push(v);
                out.curves.push(CurvePoint {
                    env,
                    perturbation: pert.clone(),
                    method: *method,
                    step,
                    value: v,
                });
            }
            if let Some(je) = j_exp {
                for level in CROSSING_ENA_LEVELS {
                    let threshold = je + level * (j_ref - je);
                    let c = first_permanent_crossing(&steps, &curve, threshold);
                    out.crossings.push(CrossingRow {
                        env,
                        perturbation: pert.clone(),
                        method: *method,
                        ena_level: level,
                        threshold,
                        step: c.step,
                        censored: c.censored,
                    });
                }
            }
        }
        let ps: Vec<f64> = raw.iter().map(|(_, p)| *p).collect();
        for ((row, _), adj) in raw.iter().zip(holm_bonferroni(&ps)?) {
            out.rows[*row].p_holm = Some(adj);
            out.rows[*row].marker = significance_marker(adj).to_string();
        }
    }
    Ok(out)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x}"))
}

impl Report {
    pub fn table_csv(&self) -> String {
        let mut s = String::from("env,perturbation,method,seeds,iqm,ci_lo,ci_hi,p_raw,p_holm,marker,ena,j_exp\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.env,
                r.perturbation,
                r.method,
                r.seeds,
                r.iqm,
                r.ci_lo,
                r.ci_hi,
                opt(r.p_raw),
                opt(r.p_holm),
                r.marker,
                opt(r.ena),
                opt(r.j_exp)
            );
        }
        s
    }

    pub fn crossings_csv(&self) -> String {
        let mut s = String::from("env,perturbation,method,ena_level,threshold,step,censored\n");
        for c in &self.crossings {
            let step = c.step.map_or_else(String::new, |v| v.to_string());
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                c.env, c.perturbation, c.method, c.ena_level, c.threshold, step, c.censored
            );
        }
        s
    }

    pub fn curves_csv(&self) -> String {
        let mut s = String::from("env,perturbation,method,step,value\n");
        for c in &self.curves {
            let _ = writeln!(s, "{},{},{},{},{}", c.env, c.perturbation, c.method, c.step, c.value);
        }
        s
    }

    /// Fixed-width text rendering of the main table.
    pub fn table_text(&self) -> String {
        let mut s = format!(
            "{:<14} {:<16} {:<22} {:>5} {:>10} {:>23} {:>9} {:>4} {:>8}\n",
            "env", "perturbation", "method", "seeds", "IQM", "95% CI", "p (Holm)", "", "ENA"
        );
        for r in &self.rows {
            let ci = format!("[{:.1}, {:.1}]", r.ci_lo, r.ci_hi);
            let p = r.p_holm.map_or_else(|| "-".to_string(), |p| format!("{p:.4}"));
            let e = r.ena.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
            let _ = writeln!(
                s,
                "{:<14} {:<16} {:<22} {:>5} {:>10.2} {:>23} {:>9} {:>4} {:>8}",
                r.env.as_str(),
                r.perturbation,
                r.method.as_str(),
                r.seeds,
                r.iqm,
                ci,
                p,
                r.marker,
                e
            );
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = [
            ("table.csv", self.table_csv()),
            ("table.txt", self.table_text()),
            ("crossings.csv", self.crossings_csv()),
            ("curves.csv", self.curves_csv()),
        ];
        for (name, body) in files {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}
