use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lgae::cli::{
    cmd_eval, cmd_generate, cmd_gradcheck, cmd_train, Checkpoint, CliError, DatasetKind,
    TrainConfig, EXIT_USAGE,
};
use lgae::data::DATA_DIR_ENV;
use lgae::models::{ModelVariant, RepresentationKind};

#[derive(Parser)]
#[command(
    name = "lgae",
    version,
    about = "Lie group auto-encoder and VAE baselines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write loss.csv and checkpoint.json to the output directory.
    Train(TrainArgs),
    /// Nearest-centroid test accuracy of a checkpoint's representations.
    Eval(EvalArgs),
    /// Decode random latent codes into a PGM image grid.
    Generate(GenerateArgs),
    /// Finite-difference gradient check of all variants on a toy model.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Flat JSON config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Continue from a checkpoint instead of starting fresh.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long)]
    variant: Option<ModelVariant>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Latent samples per input.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, value_parser = parse_dataset)]
    dataset: Option<DatasetKind>,
    #[arg(long)]
    train_limit: Option<usize>,
    #[arg(long)]
    test_limit: Option<usize>,
    #[arg(long, env = DATA_DIR_ENV)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// After training, also report nearest-centroid accuracy for this representation.
    #[arg(long)]
    repr: Option<RepresentationKind>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value = "mu")]
    repr: RepresentationKind,
    #[arg(long, env = DATA_DIR_ENV)]
    data_dir: Option<PathBuf>,
    /// Report file; defaults to eval_<repr>.json next to the checkpoint.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 64)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "samples.pgm")]
    out: PathBuf,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Perturb the analytic gradient; the check must then fail.
    #[arg(long)]
    corrupt: bool,
}

fn parse_dataset(s: &str) -> Result<DatasetKind, String> {
    match s {
        "mnist" => Ok(DatasetKind::Mnist),
        "blobs" => Ok(DatasetKind::Blobs),
        other => Err(format!("unknown dataset `{other}` (mnist, blobs)")),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn train(args: TrainArgs) -> Result<(), CliError> {
    let mut config = match (&args.resume, &args.config) {
        (Some(ck), _) => Checkpoint::load(ck)?.config,
        (None, Some(path)) => TrainConfig::from_json_file(path)?,
        (None, None) => TrainConfig::default(),
    };
    macro_rules! set {
        ($($field:ident = $value:expr),* $(,)?) => {
            $(if let Some(v) = $value { config.$field = v; })*
        };
    }
    set!(
        variant = args.variant,
        k = args.k,
        hidden = args.hidden,
        lambda = args.lambda,
        lr = args.lr,
        batch_size = args.batch_size,
        epochs = args.epochs,
        seed = args.seed,
        samples_per_input = args.samples,
        dataset = args.dataset,
    );
    if args.train_limit.is_some() {
        config.train_limit = args.train_limit;
    }
    if args.test_limit.is_some() {
        config.test_limit = args.test_limit;
    }
    if args.data_dir.is_some() {
        config.data_dir = args.data_dir;
    }
    if args.out_dir.is_some() {
        config.out_dir = args.out_dir;
    }
    let mut stdout = io::stdout();
    let outcome = cmd_train(&config, args.resume.as_deref(), &mut stdout)?;
    println!(
        "wrote {} and {}",
        outcome.csv_path.display(),
        outcome.checkpoint_path.display()
    );
    if let Some(kind) = args.repr {
        let report = cmd_eval(&outcome.checkpoint_path, kind, config.data_dir.as_deref())?;
        println!("accuracy {} {:.2}", report.kind, report.accuracy);
    }
    Ok(())
}

fn eval(args: EvalArgs) -> Result<(), CliError> {
    let report = cmd_eval(&args.checkpoint, args.repr, args.data_dir.as_deref())?;
    println!(
        "{} {} epoch {}: test accuracy {:.2}% ({} train, {} test)",
        report.variant,
        report.kind,
        report.epoch,
        report.accuracy,
        report.train_examples,
        report.test_examples
    );
    let path = args.report.unwrap_or_else(|| {
        let dir = args.checkpoint.parent().unwrap_or(Path::new("."));
        dir.join(format!("eval_{}.json", report.kind))
    });
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    write_file(&path, json.as_bytes())
}

fn generate(args: GenerateArgs) -> Result<(), CliError> {
    let (_, pgm) = cmd_generate(&args.checkpoint, args.count, args.seed)?;
    write_file(&args.out, &pgm)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn gradcheck(args: GradcheckArgs) -> Result<(), CliError> {
    let report = cmd_gradcheck(args.corrupt)?;
    for e in &report.entries {
        println!(
            "{:<8} max_rel_error {:.3e} at {} of {}  {}",
            e.variant.as_str(),
            e.report.max_rel_error,
            e.report.worst_index,
            e.report.checked,
            if e.report.passed { "ok" } else { "FAIL" }
        );
    }
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Numeric("gradient check failed".into()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            return ExitCode::from(code as u8);
        }
    };
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Generate(a) => generate(a),
        Command::Gradcheck(a) => gradcheck(a),
    };
    let _ = io::stdout().flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
