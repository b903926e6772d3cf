mod commands;
mod config;
mod errors;
mod files;

use clap::{Parser, Subcommand};

use errors::{CliError, EXIT_INTERNAL};

/// Virality scoring and evaluation toolkit for image submission dumps.
#[derive(Parser, Debug)]
#[command(name = "viral", version, about, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Score a submission dump into a per-image virality table.
    Score(commands::ScoreArgs),
    /// Build evaluation datasets from scores or submissions.
    Dataset(commands::DatasetArgs),
    /// Correlate annotated attributes with pair orientations.
    Correlate(commands::CorrelateArgs),
    /// Greedily grow an attribute combination by correlation.
    Greedy(commands::GreedyArgs),
    /// Train a linear max-margin model.
    Train(commands::TrainArgs),
    /// Apply a trained model to features or pairs.
    Predict(commands::PredictArgs),
    /// Cross-validate pairwise, attribute, or attribute-virality models.
    Cv(commands::CvArgs),
    /// Pick proxy images for annotation conditions.
    Proxies(commands::ProxiesArgs),
    /// Generate a synthetic submission corpus with known ground truth.
    Synth(commands::SynthArgs),
    /// Merge accuracy files into a comparison table.
    Report(commands::ReportArgs),
}

fn run() -> Result<(), CliError> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return Ok(());
            }
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            return Err(CliError::usage(
                first.strip_prefix("error: ").unwrap_or(first),
            ));
        }
    };
    match &cli.command {
        Command::Score(args) => commands::score(args),
        Command::Dataset(args) => commands::dataset(args),
        Command::Correlate(args) => commands::correlate(args),
        Command::Greedy(args) => commands::greedy(args),
        Command::Train(args) => commands::train(args),
        Command::Predict(args) => commands::predict_cmd(args),
        Command::Cv(args) => commands::cv(args),
        Command::Proxies(args) => commands::proxies(args),
        Command::Synth(args) => commands::synth(args),
        Command::Report(args) => commands::report(args),
    }
}

fn main() {
    // Panics are reported as a single internal-error line, not a backtrace.
    std::panic::set_hook(Box::new(|_| {}));
    let code = match std::panic::catch_unwind(run) {
        Ok(Ok(())) => 0,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unexpected panic".to_string());
            eprintln!("error: E_INTERNAL: {msg}");
            EXIT_INTERNAL
        }
    };
    std::process::exit(code);
}
