use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use edgebench::envs::{EnvId, TaskConstants};
use edgebench::experts::{relay_autotune, GainFile};
use edgebench::harness::{ablate, report, sweep, train_seed, RunConfig, RunContext, RunRecord, SweepConfig};
use edgebench::integration::MethodId;

#[derive(Parser)]
#[command(name = "edgebench", version, about = "Expert-guided RL benchmark driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Relay-autotune a task's PID expert and write its gains file.
    TuneExpert {
        env: EnvId,
        #[arg(long, default_value = "gains")]
        out: PathBuf,
        /// Task-constants TOML; compiled-in table by default.
        #[arg(long)]
        constants: Option<PathBuf>,
    },
    /// Train every seed of a run config and write one record per seed.
    Train {
        config: PathBuf,
        #[arg(long, default_value = "records")]
        out: PathBuf,
    },
    /// Run a sweep config (methods x perturbation sigmas x seeds) in parallel.
    Sweep {
        config: PathBuf,
        #[arg(long, default_value = "records")]
        out: PathBuf,
        /// Worker threads; all cores by default.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run one ablation variant and write ablation_results/<env>__<variant>.json.
    Ablate {
        env: EnvId,
        variant: MethodId,
        /// Base run config; defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long, default_value = "ablation_results")]
        out: PathBuf,
    },
    /// Tabulate run records: IQM, CI, corrected p, ENA, crossings.
    Report {
        #[arg(required = true)]
        records: Vec<PathBuf>,
        #[arg(long, default_value = "edge")]
        reference: MethodId,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
}

fn collect_records(paths: &[PathBuf]) -> Result<Vec<RunRecord>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(p)
                .with_context(|| format!("reading {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "json"))
                .collect();
            entries.sort();
            files.extend(entries);
        } else {
            files.push(p.clone());
        }
    }
    files.iter().map(|f| RunRecord::load(f).with_context(|| format!("loading {}", f.display()))).collect()
}

fn save_records(records: &[RunRecord], out: &Path) -> Result<()> {
    for r in records {
        let path = out.join(r.file_name());
        r.save(&path)?;
        println!(
            "{} seed {}: final {:.2}{} -> {}",
            r.config.method.id,
            r.seed,
            r.final_window,
            r.aborted.as_ref().map_or(String::new(), |a| format!(" (aborted: {a})")),
            path.display()
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::TuneExpert { env, out, constants } => {
            let constants = match constants {
                Some(p) => TaskConstants::load(&p)?,
                None => TaskConstants::builtin(),
            };
            let gains = relay_autotune(env, &constants)?;
            let path = GainFile::path_for(&out, env);
            gains.save(&path)?;
            println!("{env}: J_exp = {:.2} +- {:.2} over {} seeds -> {}", gains.j_exp, gains.j_exp_std, gains.j_exp_seeds, path.display());
        }
        Command::Train { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let ctx = RunContext::load(&cfg)?;
            for &seed in &cfg.seeds {
                let rec = train_seed(&cfg, seed, &ctx)?;
                save_records(std::slice::from_ref(&rec), &out)?;
            }
        }
        Command::Sweep { config, out, threads } => {
            let cfg = SweepConfig::load(&config)?;
            if let Some(n) = threads {
                rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
            }
            let outcome = sweep(&cfg);
            save_records(&outcome.records, &out)?;
            for e in &outcome.errors {
                eprintln!("cell {} {} seed {} failed: {}", e.method, e.perturbation.label(), e.seed, e.error);
            }
            std::fs::write(out.join("sweep_errors.json"), serde_json::to_string_pretty(&outcome.errors)?)?;
        }
        Command::Ablate { env, variant, config, steps, seeds, out } => {
            let mut cfg = match config {
                Some(p) => RunConfig::load(&p)?,
                None => RunConfig::default(),
            };
            cfg.env = env;
            if let Some(s) = steps {
                cfg.total_steps = s;
            }
            if let Some(n) = seeds {
                cfg.seeds = (0..n).collect();
            }
            cfg.method.id = variant;
            let ctx = RunContext::load(&cfg)?;
            let (result, path) = ablate(&cfg, variant, &out, &ctx)?;
            println!("{env} {variant}: IQM {:.2} -> {}", result.iqm, path.display());
        }
        Command::Report { records, reference, out } => {
            let recs = collect_records(&records)?;
            if recs.is_empty() {
                bail!("no records found");
            }
            let rep = report(&recs, reference)?;
            rep.write(&out)?;
            print!("{}", rep.table_text());
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        log::error!("{e:#}");
        std::process::exit(1);
    }
}
