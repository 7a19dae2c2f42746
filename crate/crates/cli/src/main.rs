use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use replisel::bounds::{
    replicability_bound, replicability_expression, required_sample_size, stability_bound, strategy_bound,
    BoundInputs,
};
use replisel::harness::{self, DataSource, StudyConfig};
use replisel::{config, data, report, Error, SynthTask};

const OUT_ENV: &str = "REPLISEL_OUT";

#[derive(Parser)]
#[command(name = "replisel", version, about = "Replicability of adaptive data selection under domain shift")]
struct Cli {
    /// Only print errors.
    #[arg(long, short, global = true, conflicts_with = "verbose")]
    quiet: bool,
    /// Debug logging.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML config (a JSON report with an embedded config also works).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config value, e.g. `--set hyper_target.lr=0.1`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Comma-separated seeds, replacing `seeds`.
    #[arg(long, value_delimiter = ',')]
    seed_list: Option<Vec<u64>>,
    /// Output directory. Defaults to `$REPLISEL_OUT/<name>` or `runs/<name>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn overrides(&self) -> Vec<String> {
        let mut o = self.overrides.clone();
        if let Some(seeds) = &self.seed_list {
            let list: Vec<String> = seeds.iter().map(u64::to_string).collect();
            o.push(format!("seeds=[{}]", list.join(",")));
        }
        o
    }

    fn study(&self) -> replisel::Result<StudyConfig> {
        config::load_study(self.config.as_deref(), &self.overrides())
    }

    fn out_dir(&self, name: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| {
            let root = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| "runs".into());
            root.join(name)
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic domain pair as CSV files.
    Generate(Common),
    /// Train one model and write it as JSON.
    Train {
        #[command(flatten)]
        common: Common,
        /// Seed for this run; defaults to the first configured seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one multi-seed replication study.
    Study(Common),
    /// Run every study a sweep file defines.
    Sweep(Common),
    /// Closed-form and empirical selection sensitivity.
    Sensitivity(Common),
    /// Evaluate the replicability bounds.
    Bound(BoundArgs),
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    c: f64,
    #[arg(long = "delta-q")]
    delta_q: f64,
    /// Also print the per-strategy bound for this strategy's defaults.
    #[arg(long)]
    strategy: Option<String>,
    /// Curriculum pacing constant for `--strategy curriculum`.
    #[arg(long, default_value_t = harness::defaults::T_PACE)]
    t_pace: f64,
    /// Also print the sample size that brings the bound to this level.
    #[arg(long)]
    rho: Option<f64>,
}

fn category(e: &Error) -> &'static str {
    match e {
        Error::InvalidConfig(_) | Error::Validation(_) | Error::TomlDe(_) => "config",
        Error::File { .. } | Error::Io(_) => "io",
        Error::Parse { .. } | Error::UnknownLabel { .. } | Error::Csv(_) | Error::Json(_) => "input",
        Error::Seed { source, .. } | Error::Study { source, .. } => category(source),
        _ => "runtime",
    }
}

fn generate(common: &Common) -> replisel::Result<()> {
    let cfg = common.study()?;
    let DataSource::Synthetic(synth) = &cfg.data else {
        return Err(Error::InvalidConfig("generate needs data.kind = \"synthetic\"".into()));
    };
    let pair = SynthTask::new(synth)?.pair();
    let dir = common.out_dir("data");
    report::write_atomically(&dir, |tmp| {
        for (name, ds) in [
            ("source_train", &pair.source_train),
            ("source_eval", &pair.source_eval),
            ("target_train", &pair.target_train),
            ("target_eval", &pair.target_eval),
        ] {
            data::save_csv(ds, tmp.join(format!("{name}.csv")))?;
        }
        Ok(())
    })?;
    log::info!("wrote {}", dir.display());
    Ok(())
}

fn train(common: &Common, seed: Option<u64>) -> replisel::Result<()> {
    let cfg = common.study()?;
    let seed = seed.unwrap_or(cfg.seeds[0]);
    let model = harness::train_single(&cfg, seed)?;
    let dir = common.out_dir(&format!("{}-seed{seed}", cfg.display_name()));
    let json = model.to_json()?;
    report::write_atomically(&dir, |tmp| Ok(std::fs::write(tmp.join("model.json"), &json)?))?;
    if let Some(acc) = model.trace.last().and_then(|r| r.target_accuracy) {
        println!("target_accuracy {acc}");
    }
    log::info!("wrote {}", dir.display());
    Ok(())
}

fn study(common: &Common) -> replisel::Result<()> {
    let cfg = common.study()?;
    let study = harness::run_study(&cfg)?;
    let dir = common.out_dir(&study.name);
    report::write_study(&dir, &study)?;
    println!(
        "{}: accuracy {:.4} ± {:.4}, failure rate {:.4} over {} pairs",
        study.name,
        study.mean_accuracy,
        study.std_accuracy,
        study.failure_rate,
        study.pairs.len()
    );
    log::info!("wrote {}", dir.display());
    Ok(())
}

fn sweep(common: &Common) -> replisel::Result<()> {
    let path: &Path = common
        .config
        .as_deref()
        .ok_or_else(|| Error::InvalidConfig("sweep requires --config".into()))?;
    let cfgs = config::load_sweep(path, &common.overrides())?;
    let report = harness::sweep(&cfgs)?;
    let dir = common.out_dir("sweep");
    report::write_sweep(&dir, &report)?;
    for r in &report.rows {
        println!(
            "{:<40} acc {:.4} ± {:.4}  fail {:.4}  delta {:.4}",
            r.name, r.mean_accuracy, r.std_accuracy, r.failure_rate, r.delta_closed_form
        );
    }
    if let Some(rho) = report.rank_correlation {
        println!("rank correlation (delta vs failure rate) {rho:.4}");
    }
    log::info!("wrote {}", dir.display());
    Ok(())
}

fn sensitivity(common: &Common) -> replisel::Result<()> {
    let cfg = common.study()?;
    let report = harness::sensitivity_report(&cfg)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn bound(a: &BoundArgs) -> replisel::Result<()> {
    let inputs = BoundInputs {
        epsilon: a.epsilon,
        n: a.n,
        c: a.c,
        delta_q: a.delta_q,
    };
    println!("bound {}", replicability_bound(&inputs)?);
    println!("expression {}", replicability_expression(&inputs)?);
    println!("stability {}", stability_bound(a.c, a.delta_q, a.n)?);
    if let Some(tag) = &a.strategy {
        let cfg = replisel::StrategyConfig::default_for(tag)?;
        println!("strategy_bound {}", strategy_bound(&cfg, a.epsilon, a.n, a.c, Some(a.t_pace))?);
    }
    if let Some(rho) = a.rho {
        println!("required_n {}", required_sample_size(rho, a.epsilon, a.c, a.delta_q)?);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet {
        "error"
    } else if cli.verbose {
        "debug"
    } else {
        "info"
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match &cli.command {
        Command::Generate(c) => generate(c),
        Command::Train { common, seed } => train(common, *seed),
        Command::Study(c) => study(c),
        Command::Sweep(c) => sweep(c),
        Command::Sensitivity(c) => sensitivity(c),
        Command::Bound(a) => bound(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let cat = category(&e);
            eprintln!("error [{cat}]: {e}");
            ExitCode::from(match cat {
                "config" => 2,
                "io" => 3,
                "input" => 4,
                _ => 1,
            })
        }
    }
}
