use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use hypersparse::records::{read_reweighting_records, read_step_records};
use hypersparse::sampler::size_bound_core;
use hypersparse::verify::{
    build_clique_graph, cut_check, energy_comparison_check, kkt_check, potential_check, probe_check,
    size_bound_check, trace_check, unbiasedness_check, EnergyComparisonReport, KktReport, PotentialReport,
    ProbeReport, SizeBoundReport, TraceReport, UnbiasednessReport,
};
use hypersparse::{oversampling_constant, StoredHypergraph, SparsifierConfig, Summary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::args::VerifyArgs;
use crate::error::{CliError, CliResult};

/// Telemetry records within this KKT violation count as optimal.
const KKT_TOLERANCE: f64 = 1e-5;
const KKT_MIN_FRACTION: f64 = 0.99;
const ENERGY_PROBES: usize = 1000;

#[derive(Debug, Default, Serialize)]
pub struct VerifyReport {
    pub n: usize,
    pub original_edges: usize,
    pub sparsifier_edges: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub probe: Option<ProbeReport>,
    pub cut: Option<ProbeReport>,
    pub size: Option<SizeBoundReport>,
    pub potential: Option<PotentialReport>,
    pub kkt: Option<KktReport>,
    pub trace: Option<TraceReport>,
    pub energy_comparison: Option<EnergyComparisonReport>,
    pub unbiasedness: Option<UnbiasednessReport>,
    pub pass: bool,
}

impl VerifyReport {
    fn all_pass(&self) -> bool {
        [
            self.probe.as_ref().map(|r| r.pass),
            self.cut.as_ref().map(|r| r.pass),
            self.size.as_ref().map(|r| r.pass),
            self.potential.as_ref().map(|r| r.pass),
            self.kkt.as_ref().map(|r| r.pass),
            self.trace.as_ref().map(|r| r.pass),
            self.energy_comparison.as_ref().map(|r| r.pass),
            self.unbiasedness.as_ref().map(|r| r.pass),
        ]
        .into_iter()
        .flatten()
        .all(|p| p)
    }
}

fn load(path: &Path) -> CliResult<StoredHypergraph> {
    let file = File::open(path).map_err(CliError::file(path))?;
    StoredHypergraph::read(BufReader::new(file)).map_err(CliError::core(path.display().to_string()))
}

fn need_rank_bound(args: &VerifyArgs, what: &str) -> CliResult<usize> {
    args.rank_bound
        .ok_or_else(|| CliError::Usage(format!("{what} needs --rank-bound")))
}

/// `η = δ / ε`, which must be positive for any check that replays the run.
fn eta(args: &VerifyArgs, what: &str) -> CliResult<f64> {
    if args.delta > 0.0 {
        Ok(args.delta / args.epsilon)
    } else {
        Err(CliError::Usage(format!("{what} needs --delta > 0")))
    }
}

pub fn build_report(args: &VerifyArgs) -> CliResult<VerifyReport> {
    if !(args.epsilon > 0.0 && args.epsilon < 1.0) || args.delta.is_nan() || args.delta < 0.0 {
        return Err(CliError::Usage(format!(
            "need epsilon in (0, 1) and delta >= 0, got {} and {}",
            args.epsilon, args.delta
        )));
    }
    let h = load(&args.original)?;
    let ht = load(&args.sparsifier)?;
    if h.n != ht.n {
        return Err(CliError::Usage(format!(
            "original has {} vertices but sparsifier has {}",
            h.n, ht.n
        )));
    }
    let mut report = VerifyReport {
        n: h.n,
        original_edges: h.edges.len(),
        sparsifier_edges: ht.edges.len(),
        epsilon: args.epsilon,
        delta: args.delta,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let ctx = |what: &str| CliError::core(what.to_string());

    if args.probes > 0 {
        report.probe = Some(probe_check(&h, &ht, args.epsilon, args.delta, args.probes, &mut rng).map_err(ctx("probe check"))?);
    }
    if h.n <= args.max_cut_n {
        report.cut = Some(cut_check(&h, &ht, args.epsilon, args.delta).map_err(ctx("cut check"))?);
    }

    if let Some(path) = &args.telemetry {
        let rank_bound = need_rank_bound(args, "--telemetry")?;
        let eta = eta(args, "--telemetry")?;
        let file = File::open(path).map_err(CliError::file(path))?;
        let records = read_step_records(BufReader::new(file)).map_err(ctx(&path.display().to_string()))?;
        let c = oversampling_constant(h.n, rank_bound, args.epsilon, args.kappa).map_err(|e| CliError::Usage(e.to_string()))?;
        report.potential = Some(potential_check(&records, c));
        report.kkt = Some(kkt_check(&records, KKT_TOLERANCE, KKT_MIN_FRACTION));

        let phi_0 = h.n as f64 * eta.ln();
        let total_weight = h.total_weight();
        let summary = Summary {
            n: h.n,
            steps: records.len(),
            sampled: ht.edges.len(),
            sum_p: records.iter().map(|r| r.p).collect::<hypersparse::numeric::CompensatedSum>().value(),
            phi_0,
            phi_m: records.last().map_or(phi_0, |r| r.phi),
            total_weight,
            eta,
            c,
            rank_bound,
            expected_size_bound: size_bound_core(c, h.n, total_weight, eta) / std::f64::consts::LN_2,
            potential_violations: report.potential.as_ref().map_or(0, |p| p.violations),
            optimizer_warnings: records.iter().filter(|r| r.capped).count(),
            max_kkt: records.iter().map(|r| r.kkt_violation).fold(0.0, f64::max),
            peak_resident_scalars: 0,
        };
        report.size = Some(size_bound_check(&summary));
    }

    if let Some(path) = &args.reweightings {
        let file = File::open(path).map_err(CliError::file(path))?;
        let records = read_reweighting_records(BufReader::new(file)).map_err(ctx(&path.display().to_string()))?;
        let g = build_clique_graph(&records, h.n, h.edges.len()).map_err(ctx("reweightings"))?;
        report.trace = Some(trace_check(&g));
        report.energy_comparison =
            Some(energy_comparison_check(&h, &g, ENERGY_PROBES, &mut rng).map_err(ctx("energy comparison"))?);
    }

    if args.seeds > 0 {
        let rank_bound = need_rank_bound(args, "--seeds")?;
        let config = SparsifierConfig::new(args.epsilon, args.delta, rank_bound)
            .with_kappa(args.kappa)
            .with_seed(args.seed);
        config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let z: Vec<f64> = (0..h.n).map(|_| rng.random_range(-1.0..1.0)).collect();
        report.unbiasedness = Some(unbiasedness_check(&h, &config, args.seeds, &z).map_err(|e| match e {
            hypersparse::Error::InvalidParameter(msg) => CliError::Usage(msg),
            other => CliError::Core {
                context: "monte carlo".into(),
                source: other,
            },
        })?);
    }

    report.pass = report.all_pass();
    Ok(report)
}

pub fn run(args: &VerifyArgs) -> CliResult<bool> {
    let report = build_report(args)?;
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    match &args.report {
        Some(path) => std::fs::write(path, &text).map_err(CliError::file(path))?,
        None => print!("{text}"),
    }
    let status = if report.pass { "PASS" } else { "FAIL" };
    eprintln!(
        "verify: {status} ({} of {} edges kept)",
        report.sparsifier_edges, report.original_edges
    );
    Ok(report.pass)
}
