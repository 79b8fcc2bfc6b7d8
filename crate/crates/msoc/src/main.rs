//! `msoc` command line: run the bundled experiments from TOML configs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use msoc::exp::{self, ExperimentConfig, ExperimentTag, Manifest};

#[derive(Parser)]
#[command(
    name = "msoc",
    version,
    about = "Reduce-then-optimize experiments for slow-fast controlled diffusions"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct RunArgs {
    /// TOML config; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: runs/<experiment>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the Monte-Carlo base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the epsilon ladder, comma separated.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Double-well underdamped run: reduced grid solve + sampled costs.
    #[command(name = "langevin_dw")]
    LangevinDw(RunArgs),
    /// Two-scale periodic potential: grid values vs sampled feedback costs.
    #[command(name = "periodic_msp")]
    PeriodicMsp(RunArgs),
    /// Riccati block-convergence sweep.
    #[command(name = "lqr_sweep")]
    LqrSweep(RunArgs),
    /// Cost-gap vs relative-entropy identity.
    #[command(name = "entropy_gap")]
    EntropyGap(RunArgs),
    /// Grid L2 convergence of value function and feedback.
    #[command(name = "l2_convergence")]
    L2Convergence(RunArgs),
    /// Re-run the configuration embedded in a manifest.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the default config for an experiment.
    Config { experiment: String },
}

fn resolve_config(tag: ExperimentTag, args: &RunArgs) -> msoc::Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default_for(tag),
    };
    if cfg.experiment != tag {
        return Err(msoc::Error::Config(format!(
            "config file is for `{}`, but the `{}` subcommand was invoked",
            cfg.experiment.as_str(),
            tag.as_str()
        )));
    }
    if let Some(seed) = args.seed {
        cfg.mc.seed = seed;
    }
    if let Some(eps) = &args.eps {
        cfg.epsilon_list = eps.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig, args_out: &Option<PathBuf>) -> PathBuf {
    args_out
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs").join(cfg.experiment.as_str()))
}

fn run_experiment(tag: ExperimentTag, args: RunArgs) -> msoc::Result<Manifest> {
    let cfg = resolve_config(tag, &args)?;
    let dir = out_dir(&cfg, &args.out);
    let manifest = exp::run(&cfg, &dir)?;
    println!(
        "{}: wrote {} file(s) to {}",
        tag.as_str(),
        manifest.outputs.len(),
        dir.display()
    );
    for (k, v) in &manifest.scalars {
        println!("  {k} = {v}");
    }
    Ok(manifest)
}

fn dispatch(cmd: Cmd) -> msoc::Result<()> {
    match cmd {
        Cmd::LangevinDw(a) => run_experiment(ExperimentTag::LangevinDw, a).map(|_| ()),
        Cmd::PeriodicMsp(a) => run_experiment(ExperimentTag::PeriodicMsp, a).map(|_| ()),
        Cmd::LqrSweep(a) => run_experiment(ExperimentTag::LqrSweep, a).map(|_| ()),
        Cmd::EntropyGap(a) => run_experiment(ExperimentTag::EntropyGap, a).map(|_| ()),
        Cmd::L2Convergence(a) => run_experiment(ExperimentTag::L2Convergence, a).map(|_| ()),
        Cmd::Rerun { manifest, out } => {
            let loaded = Manifest::load(&manifest)?;
            let dir = out.unwrap_or_else(|| {
                PathBuf::from("runs").join(format!("{}-rerun", loaded.experiment.as_str()))
            });
            let m = exp::run(&loaded.config, &dir)?;
            println!(
                "rerun of {}: wrote {} file(s) to {}",
                m.experiment.as_str(),
                m.outputs.len(),
                dir.display()
            );
            Ok(())
        }
        Cmd::Config { experiment } => {
            let tag = ExperimentTag::parse(&experiment)?;
            print!("{}", ExperimentConfig::default_for(tag).to_toml_string()?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    if let Ok(threads) = std::env::var("MSOC_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("warning: could not apply MSOC_THREADS: {e}");
                }
            }
            _ => eprintln!("warning: MSOC_THREADS must be a positive integer, ignoring"),
        }
    }
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
