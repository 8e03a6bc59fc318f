use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use hypersparse::records::{write_json_line, ReweightingRecord};
use hypersparse::verify::SIZE_HEADROOM;
use hypersparse::{delta_for_eps_sparsifier, parse_stream, run_streaming, write_stream, EdgeError, Error};

use crate::args::{ReplayArgs, SparsifyArgs};
use crate::error::{CliError, CliResult};
use crate::hashing::{sha256_file, HashingWriter};
use crate::manifest::{ConfigEcho, EpsMode, FileRecord, InputRecord, Outputs, RunManifest, RunStats, TOOL_VERSION};

/// Where a run sends its outputs. `None` paths are hashed but discarded.
struct Destinations<'a> {
    sparsifier: Option<&'a Path>,
    telemetry: Option<&'a Path>,
    reweightings: Option<&'a Path>,
    /// Hash telemetry and reweightings even when they are not written.
    hash_all: bool,
}

type Sink = HashingWriter<BufWriter<Box<dyn Write>>>;

fn open_sink(path: Option<&Path>) -> CliResult<Sink> {
    let inner: Box<dyn Write> = match path {
        Some(p) => Box::new(File::create(p).map_err(CliError::file(p))?),
        None => Box::new(io::sink()),
    };
    Ok(HashingWriter::new(BufWriter::new(inner)))
}

fn close_sink(sink: Sink, path: Option<&Path>) -> CliResult<String> {
    let (_, digest) = sink
        .finish()
        .map_err(CliError::file(path.unwrap_or(Path::new("<sink>"))))?;
    Ok(digest)
}

struct Produced {
    input: InputRecord,
    sparsifier_sha: String,
    telemetry_sha: Option<String>,
    reweightings_sha: Option<String>,
    stats: RunStats,
}

/// Resolves δ, using the stream header in eps mode.
fn resolve_delta(args: &SparsifyArgs, n: usize) -> CliResult<(f64, Option<EpsMode>)> {
    if !args.eps_mode {
        return Ok((args.delta.expect("clap requires --delta without --eps-mode"), None));
    }
    let (wmin, wmax) = (args.wmin.unwrap_or(0.0), args.wmax.unwrap_or(0.0));
    if !(wmin > 0.0 && wmin <= wmax && wmax.is_finite()) {
        return Err(CliError::Usage(format!(
            "--eps-mode needs 0 < --wmin <= --wmax, got {wmin} and {wmax}"
        )));
    }
    let choice = delta_for_eps_sparsifier(args.epsilon, wmin, n, args.rank_bound);
    if choice.underflow {
        eprintln!(
            "warning: delta = eps * wmin^2 * n^(-2r) underflows double precision; clamped to {:e}",
            choice.delta
        );
    }
    Ok((
        choice.delta,
        Some(EpsMode {
            wmin,
            wmax,
            underflow: choice.underflow,
        }),
    ))
}

fn execute(input: &Path, echo: &ConfigEcho, dest: &Destinations) -> CliResult<Produced> {
    let start = Instant::now();
    let input_sha = sha256_file(input).map_err(CliError::file(input))?;
    let file = File::open(input).map_err(CliError::file(input))?;
    let (header, edges) = parse_stream(BufReader::new(file)).map_err(CliError::core(input.display().to_string()))?;
    let config = echo.sparsifier_config();

    let range = echo.eps_mode.map(|m| (m.wmin, m.wmax));
    let mut arrival = 0usize;
    let edges = edges.map(|e| {
        arrival += 1;
        let e = e?;
        match range {
            Some((lo, hi)) if !(lo..=hi).contains(&e.weight()) => Err(Error::Edge(EdgeError::BadWeight(format!(
                "edge {arrival} has weight {} outside the declared range [{lo}, {hi}]",
                e.weight()
            )))),
            _ => Ok(e),
        }
    });

    let want_telemetry = dest.telemetry.is_some() || dest.hash_all;
    let want_reweightings = dest.reweightings.is_some() || dest.hash_all;
    let mut telemetry = want_telemetry.then(|| open_sink(dest.telemetry)).transpose()?;
    let mut reweightings = want_reweightings.then(|| open_sink(dest.reweightings)).transpose()?;

    let (kept, summary) = run_streaming(header.n, edges, &config, |out| {
        if let Some(sink) = telemetry.as_mut() {
            write_json_line(sink, &out.record)?;
        }
        if let Some(sink) = reweightings.as_mut() {
            write_json_line(sink, &ReweightingRecord::new(out.record.step, out.weight, &out.reweighting))?;
        }
        Ok(())
    })
    .map_err(CliError::core(input.display().to_string()))?;

    let mut sparsifier = open_sink(dest.sparsifier)?;
    let reweighted: Vec<_> = kept.iter().map(|s| s.reweighted()).collect();
    write_stream(&mut sparsifier, header.n, Some(reweighted.len()), reweighted.iter())
        .map_err(CliError::core("writing sparsifier"))?;
    let sparsifier_sha = close_sink(sparsifier, dest.sparsifier)?;
    let telemetry_sha = telemetry.map(|s| close_sink(s, dest.telemetry)).transpose()?;
    let reweightings_sha = reweightings.map(|s| close_sink(s, dest.reweightings)).transpose()?;

    let core = hypersparse::sampler::size_bound_core(summary.c, summary.n, summary.total_weight, summary.eta);
    Ok(Produced {
        input: InputRecord {
            path: std::fs::canonicalize(input).unwrap_or_else(|_| input.to_path_buf()),
            sha256: input_sha,
            n: header.n,
            m_hint: header.m_hint,
        },
        sparsifier_sha,
        telemetry_sha,
        reweightings_sha,
        stats: RunStats {
            summary,
            size_bound: SIZE_HEADROOM * core,
            elapsed_seconds: start.elapsed().as_secs_f64(),
        },
    })
}

fn read_header(input: &Path) -> CliResult<hypersparse::StreamHeader> {
    let file = File::open(input).map_err(CliError::file(input))?;
    let (header, _) = parse_stream(BufReader::new(file)).map_err(CliError::core(input.display().to_string()))?;
    Ok(header)
}

fn print_summary(stats: &RunStats) {
    let s = &stats.summary;
    println!(
        "kept {} of {} edges; sum p = {:.4}; size bound = {:.4}; expected-size bound = {:.4}; phi_m = {:.6}",
        s.sampled, s.steps, s.sum_p, stats.size_bound, s.expected_size_bound, s.phi_m
    );
    if s.optimizer_warnings > 0 {
        eprintln!(
            "warning: reweighting optimizer hit its iteration cap on {} steps",
            s.optimizer_warnings
        );
    }
}

pub fn run(args: &SparsifyArgs) -> CliResult<()> {
    let header = read_header(&args.input)?;
    let (delta, eps_mode) = resolve_delta(args, header.n)?;
    let echo = ConfigEcho {
        epsilon: args.epsilon,
        delta,
        eps_mode,
        kappa: args.kappa,
        seed: args.seed,
        rank_bound: args.rank_bound,
        gap_tol: args.optimizer.gap_tol,
        max_iters: args.optimizer.max_iters,
        line_search_tol: args.optimizer.line_search_tol,
        refresh_period: args.optimizer.refresh_period,
    };
    echo.sparsifier_config()
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;

    let dest = Destinations {
        sparsifier: Some(&args.output),
        telemetry: args.telemetry.as_deref(),
        reweightings: args.emit_reweightings.as_deref(),
        hash_all: false,
    };
    let produced = execute(&args.input, &echo, &dest)?;
    print_summary(&produced.stats);

    if let Some(path) = &args.manifest {
        let record = |path: &PathBuf, sha: Option<String>| FileRecord {
            path: path.clone(),
            sha256: sha.expect("requested outputs are hashed"),
        };
        let manifest = RunManifest {
            tool_version: TOOL_VERSION.to_string(),
            config: echo,
            input: produced.input,
            outputs: Outputs {
                sparsifier: record(&args.output, Some(produced.sparsifier_sha)),
                telemetry: args.telemetry.as_ref().map(|p| record(p, produced.telemetry_sha.clone())),
                reweightings: args
                    .emit_reweightings
                    .as_ref()
                    .map(|p| record(p, produced.reweightings_sha.clone())),
            },
            stats: produced.stats,
        };
        manifest.write(path)?;
    }
    Ok(())
}

/// Re-runs the manifest's configuration and compares every recorded output hash.
pub fn replay(args: &ReplayArgs) -> CliResult<()> {
    let manifest = RunManifest::read(&args.manifest)?;
    if manifest.tool_version != TOOL_VERSION {
        eprintln!(
            "warning: manifest written by version {}, replaying with {TOOL_VERSION}",
            manifest.tool_version
        );
    }
    let input = &manifest.input.path;
    let sha = sha256_file(input).map_err(CliError::file(input))?;
    if sha != manifest.input.sha256 {
        return Err(CliError::Mismatch(format!(
            "input {} has changed since the manifest was written",
            input.display()
        )));
    }
    let dest = Destinations {
        sparsifier: args.output.as_deref(),
        telemetry: None,
        reweightings: None,
        hash_all: true,
    };
    let produced = execute(input, &manifest.config, &dest)?;

    let mut mismatches = Vec::new();
    let outputs = &manifest.outputs;
    if produced.sparsifier_sha != outputs.sparsifier.sha256 {
        mismatches.push("sparsifier");
    }
    if outputs.telemetry.as_ref().is_some_and(|f| Some(&f.sha256) != produced.telemetry_sha.as_ref()) {
        mismatches.push("telemetry");
    }
    if outputs
        .reweightings
        .as_ref()
        .is_some_and(|f| Some(&f.sha256) != produced.reweightings_sha.as_ref())
    {
        mismatches.push("reweightings");
    }
    if produced.stats.summary != manifest.stats.summary {
        mismatches.push("summary");
    }
    if mismatches.is_empty() {
        println!("replay reproduced {} bit-exactly", outputs.sparsifier.path.display());
        Ok(())
    } else {
        Err(CliError::Mismatch(format!("replay differs in: {}", mismatches.join(", "))))
    }
}
