use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use maxent_debias::commands::{self, EvaluateArgs, REPORT_FILE};
use maxent_debias::formats::write_json;
use maxent_debias::{CliError, PipelineConfig, Result};

#[derive(Parser)]
#[command(name = "maxent-debias", version, about = "Fair max-entropy distributions over discrete domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Turn a raw categorical CSV into the frequency-encoded format.
    Encode {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        skip_bad_rows: bool,
    },
    /// Fit a max-entropy model using the settings in a config file.
    Train(ConfigArgs),
    /// Draw samples from a trained model.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        count: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Report fairness and closeness of a model and/or samples against data.
    Evaluate {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        samples: Option<PathBuf>,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        label_value: Option<String>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        skip_bad_rows: bool,
    },
    /// encode, train, sample and evaluate.
    Pipeline(ConfigArgs),
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        Ok(cfg)
    }
}

fn ensure_dir(dir: &PathBuf) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Encode { schema, input, out, skip_bad_rows } => {
            ensure_dir(&out)?;
            let r = commands::encode(&schema, &input, &out, skip_bad_rows)?;
            println!(
                "encoded {} rows ({} distinct, {} skipped) into {}",
                r.summary.rows,
                r.summary.distinct_points,
                r.summary.skipped_rows,
                r.encoded.display()
            );
        }
        Command::Train(a) => {
            let cfg = a.load()?;
            ensure_dir(&cfg.output_dir)?;
            let r = commands::train(&cfg)?;
            println!(
                "model written to {} ({} iterations, dual value {:.6})",
                r.model_path.display(),
                r.report.iterations,
                r.report.dual_value
            );
        }
        Command::Sample { model, count, seed, out } => {
            ensure_dir(&out)?;
            let r = commands::sample(&model, count, seed, &out)?;
            println!("{} samples written to {}", r.meta.count, r.samples.display());
        }
        Command::Evaluate {
            model,
            samples,
            schema,
            reference,
            label_value,
            tau,
            seed,
            out,
            skip_bad_rows,
        } => {
            ensure_dir(&out)?;
            let mut args = EvaluateArgs::new(reference);
            args.model = model;
            args.samples = samples;
            args.schema = schema;
            args.label_value = label_value;
            args.tau = tau;
            args.seed = seed;
            args.skip_bad_rows = skip_bad_rows;
            let report = commands::evaluate(&args)?;
            write_json(&out.join(REPORT_FILE), &report)?;
            print!("{}", report.table());
        }
        Command::Pipeline(a) => {
            let cfg = a.load()?;
            ensure_dir(&cfg.output_dir)?;
            let r = commands::pipeline(&cfg)?;
            print!("{}", r.report.table());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
