use std::fs::File;
use std::io::BufWriter;
use std::process::ExitCode;

use anyhow::{Context, Result};
use chunkstream::harness::{
    build_report, load_records, run_eval, synthetic_toy_manifest, write_records, BackendSpec,
    EvalManifest, Mode, Parallelism, ReportOptions,
};
use chunkstream::metrics::{to_json_lines, to_tsv};

use crate::{Format, ModeArg, ReportArgs, RunArgs, SynthArgs};

/// Exit status when some utterances failed but the run completed.
const PARTIAL_FAILURE: u8 = 2;

pub fn run(args: RunArgs) -> Result<ExitCode> {
    let mut manifest = EvalManifest::load(&args.manifest)?;
    if let Some(chunk) = args.chunk {
        manifest.chunk_duration_s = chunk;
    }
    if let Some(depth) = args.depth {
        manifest.agreement_depth = depth;
    }
    let backend: BackendSpec = args
        .backend
        .as_deref()
        .or(manifest.backend.as_deref())
        .unwrap_or("scripted")
        .parse()?;
    let modes: &[Mode] = match args.mode {
        ModeArg::Online => &[Mode::Online],
        ModeArg::Offline => &[Mode::Offline],
        ModeArg::Both => &[Mode::Online, Mode::Offline],
    };
    let parallelism = match args.threads {
        0 => Parallelism::Auto,
        1 => Parallelism::Sequential,
        n => Parallelism::Threads(n),
    };
    let records = run_eval(&manifest, modes, &backend, parallelism)?;

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let mut failed = 0;
    for &mode in modes {
        let subset: Vec<_> = records.iter().filter(|r| r.mode == mode).cloned().collect();
        for r in subset.iter().filter(|r| !r.is_ok()) {
            failed += 1;
            log::warn!(
                "{} ({mode}): {}",
                r.id,
                r.error.as_deref().unwrap_or_default()
            );
        }
        let path = args.out.join(format!("{mode}.jsonl"));
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_records(BufWriter::new(file), &subset)?;
        eprintln!("wrote {} records to {}", subset.len(), path.display());
    }
    if failed > 0 {
        eprintln!("{failed} utterance run(s) failed");
        return Ok(ExitCode::from(PARTIAL_FAILURE));
    }
    Ok(ExitCode::SUCCESS)
}

pub fn report(args: ReportArgs) -> Result<ExitCode> {
    let system =
        load_records(&args.system).with_context(|| format!("reading {}", args.system.display()))?;
    let baseline = match &args.baseline {
        Some(p) => Some(load_records(p).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };
    let opts = ReportOptions {
        label: args.label,
        pooled_latency: args.pooled_latency,
        weighted_average: args.weighted,
        ..ReportOptions::default()
    };
    let rows = build_report(&system, baseline.as_deref(), &opts)?;
    print!(
        "{}",
        match args.format {
            Format::Tsv => to_tsv(&rows),
            Format::Json => to_json_lines(&rows),
        }
    );
    Ok(ExitCode::SUCCESS)
}

pub fn synth(args: SynthArgs) -> Result<ExitCode> {
    let manifest = synthetic_toy_manifest(args.n, args.seed);
    std::fs::write(&args.out, manifest.to_json() + "\n")
        .with_context(|| format!("writing {}", args.out.display()))?;
    Ok(ExitCode::SUCCESS)
}
