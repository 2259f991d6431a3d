use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use commbias::config::RunConfig;
use commbias::pipeline::{Pipeline, Stage};
use commbias::Result;

#[derive(Parser)]
#[command(name = "commbias", version, about = "Representational-bias audits of fine-tuned language models")]
struct Cli {
    /// Run configuration (TOML)
    #[arg(long, short)]
    config: PathBuf,

    /// Stage to run: prepare, prompts, generate, score, aggregate, report or all
    #[arg(long, short, default_value = "all")]
    stage: String,

    /// Rerun stages even if they completed before
    #[arg(long)]
    force: bool,

    /// Continue an interrupted run from the cache (runs always resume; accepted for clarity)
    #[arg(long)]
    resume: bool,

    /// Restrict to these model ids
    #[arg(long, value_delimiter = ',')]
    models: Vec<String>,

    /// Print the normalized config and exit
    #[arg(long)]
    print_config: bool,
}

fn run(cli: Cli) -> Result<()> {
    let mut config = RunConfig::load(&cli.config)?;
    config.select_models(&cli.models)?;
    if cli.print_config {
        print!("{}", config.dump());
        return Ok(());
    }
    let stages: Vec<Stage> = if cli.stage == "all" {
        Stage::ALL.to_vec()
    } else {
        vec![cli.stage.parse().map_err(commbias::Error::Config)?]
    };
    let mut pipeline = Pipeline::new(config);
    pipeline.force = cli.force;
    if cli.resume {
        log::info!("resuming from {}", pipeline.config.cache_dir().display());
    }
    for stage in stages {
        pipeline.run_stage(stage)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
