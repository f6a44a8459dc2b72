use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::process::ExitCode;

use anyhow::{Context, Result};
use chunkstream::corpus::{build_mix, read_jsonl, write_jsonl, RatioRange};

use crate::MixArgs;

pub fn mix(args: MixArgs) -> Result<ExitCode> {
    let range = RatioRange::new(args.lo, args.hi)?;
    let file =
        File::open(&args.input).with_context(|| format!("opening {}", args.input.display()))?;
    let corpus = read_jsonl(BufReader::new(file))
        .with_context(|| format!("reading {}", args.input.display()))?;
    let mix = build_mix(&corpus, args.seed, range)?;
    let out =
        File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_jsonl(BufWriter::new(out), &mix.examples)?;

    let stats_path = args.stats.unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".stats.json");
        p.into()
    });
    let stats = serde_json::json!({
        "seed": mix.seed,
        "range": mix.range,
        "stats": mix.stats,
    });
    std::fs::write(&stats_path, serde_json::to_string_pretty(&stats)? + "\n")
        .with_context(|| format!("writing {}", stats_path.display()))?;
    log::info!(
        "{} full + {} partial examples written to {}",
        mix.stats.full,
        mix.stats.partial,
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}
