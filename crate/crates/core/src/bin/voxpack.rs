use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use voxpack::pipeline::{run_from, run_stage, PipelineConfig, PipelineError, RunReport, Stage};

#[derive(Debug, Parser)]
#[command(name = "voxpack", version, about = "Pack volumetric decorations onto a base mesh")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Pipeline config (TOML, or JSON with a .json extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides the config's output_dir.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Directory holding artifacts of earlier stages; takes precedence over --output.
    #[arg(long, global = true)]
    resume: Option<PathBuf>,

    /// With `pipeline`, first stage to run.
    #[arg(long, global = true)]
    stage: Option<String>,

    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Random seed; overrides the config's rng_seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every stage, or `--stage` and the stages after it.
    Pipeline,
    /// Place seeds on the base.
    Seed,
    /// Voxelize, resolve overlaps and recover volume.
    Deform,
    /// Extract, smooth and merge element meshes.
    Mesh,
    /// Split the elements into printable shell patches.
    Shell,
    /// Print the run report of an output directory.
    Report,
    /// Print the default config.
    Defaults {
        /// Print JSON instead of TOML.
        #[arg(long)]
        json: bool,
    },
}

impl Cli {
    fn load_config(&self) -> Result<PipelineConfig, PipelineError> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| PipelineError::Config("--config is required".into()))?;
        let mut config = PipelineConfig::load(path)?;
        if let Some(seed) = self.seed {
            config.rng_seed = Some(seed);
        }
        if let Some(out) = &self.output {
            config.output_dir = out.clone();
        }
        Ok(config)
    }

    fn work_dir(&self, config: &PipelineConfig) -> PathBuf {
        self.resume.clone().unwrap_or_else(|| config.output_dir.clone())
    }
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| PipelineError::Config(format!("cannot configure {n} threads: {e}")))?;
    }
    let single = |stage: Stage| -> Result<RunReport, PipelineError> {
        let config = cli.load_config()?;
        run_stage(&config, stage, &cli.work_dir(&config))
    };
    let report = match &cli.command {
        Command::Defaults { json } => {
            let config = PipelineConfig::default();
            let text = if *json { config.to_json()? } else { config.to_toml()? };
            println!("{}", text.trim_end());
            return Ok(());
        }
        Command::Report => {
            let dir = match (&cli.resume, &cli.output) {
                (Some(d), _) | (None, Some(d)) => d.clone(),
                (None, None) => cli.load_config()?.output_dir,
            };
            RunReport::collect(&dir).map_err(|e| PipelineError::Config(e.to_string()))?
        }
        Command::Pipeline => {
            let config = cli.load_config()?;
            let from = cli.stage.as_deref().map(str::parse).transpose()?.unwrap_or(Stage::Seed);
            run_from(&config, from, &cli.work_dir(&config))?
        }
        Command::Seed => single(Stage::Seed)?,
        Command::Deform => single(Stage::Deform)?,
        Command::Mesh => single(Stage::Mesh)?,
        Command::Shell => single(Stage::Shell)?,
    };
    let text = report.to_json().map_err(|e| PipelineError::Config(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
