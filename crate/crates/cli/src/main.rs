use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod corpus;
mod eval;
mod net;

#[derive(Parser)]
#[command(
    name = "chunkstream",
    version,
    about = "Local-agreement simultaneous translation toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Training corpus tools.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Offline/online evaluation.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Run the streaming server.
    Serve(ServeArgs),
    /// Stream a stored utterance to a server and print the replies.
    Stream(StreamArgs),
    /// Host a decoder backend over the decoder wire protocol.
    DecoderServe(DecoderServeArgs),
}

#[derive(Subcommand)]
enum CorpusCmd {
    /// Add one truncated copy of every example and shuffle.
    Mix(MixArgs),
}

#[derive(Args)]
pub struct MixArgs {
    /// Full examples, JSON Lines.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.10)]
    pub lo: f64,
    #[arg(long, default_value_t = 0.40)]
    pub hi: f64,
    /// Where to write mix statistics (default: `<out>.stats.json`).
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Subcommand)]
enum EvalCmd {
    /// Decode every utterance of a manifest.
    Run(RunArgs),
    /// Score record files into per-direction rows.
    Report(ReportArgs),
    /// Write a synthetic manifest for the toy backend.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Online,
    Offline,
    Both,
}

#[derive(Args)]
pub struct RunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// `scripted`, `toy` or `remote:<host:port>`; overrides the manifest.
    #[arg(long)]
    pub backend: Option<String>,
    /// Chunk duration in seconds; overrides the manifest.
    #[arg(long)]
    pub chunk: Option<f64>,
    /// Agreement depth; overrides the manifest.
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long, value_enum, default_value_t = ModeArg::Both)]
    pub mode: ModeArg,
    /// Output directory for `online.jsonl` / `offline.jsonl`.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; 0 uses every core, 1 runs sequentially.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Tsv,
    Json,
}

#[derive(Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Tsv)]
    pub format: Format,
    /// System label in the first column.
    #[arg(long, default_value = "system")]
    pub label: String,
    /// Pool tokens across a direction instead of averaging per utterance.
    #[arg(long)]
    pub pooled_latency: bool,
    /// Weight the average row by utterance count.
    #[arg(long)]
    pub weighted: bool,
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:7070")]
    pub bind: String,
    /// `[name=]spec`, repeatable. Specs: nature, scripted:<path>,
    /// toy:<path>, remote:<host:port>. The first is the default.
    #[arg(long, required = true)]
    pub backend: Vec<String>,
    #[arg(long, default_value_t = 64)]
    pub max_sessions: usize,
    /// Largest chunk payload in bytes or tokens.
    #[arg(long, default_value_t = 1 << 20)]
    pub max_chunk: usize,
}

#[derive(Args)]
pub struct StreamArgs {
    #[arg(long)]
    pub connect: String,
    /// WAV file whose samples are sent as raw little-endian frames.
    #[arg(long)]
    pub wav_frames: PathBuf,
    /// Chunk duration in seconds.
    #[arg(long, default_value_t = 0.5)]
    pub chunk: f64,
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long, default_value = "s1")]
    pub session: String,
}

#[derive(Args)]
pub struct DecoderServeArgs {
    #[arg(long, default_value = "127.0.0.1:7071")]
    pub bind: String,
    /// nature, scripted:<path> or toy:<path>.
    #[arg(long)]
    pub backend: String,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Corpus(CorpusCmd::Mix(args)) => corpus::mix(args),
        Command::Eval(EvalCmd::Run(args)) => eval::run(args),
        Command::Eval(EvalCmd::Report(args)) => eval::report(args),
        Command::Eval(EvalCmd::Synth(args)) => eval::synth(args),
        Command::Serve(args) => net::serve(args),
        Command::Stream(args) => net::stream(args),
        Command::DecoderServe(args) => net::decoder_serve(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
