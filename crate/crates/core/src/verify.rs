//! Independent checks on a finished run.
//!
//! This is the only module that holds a whole hypergraph. The probe and cut
//! checks test the two-sided inequality
//!
//! ```text
//! (1 - ε) Q_H(z) - δ‖z‖² ≤ Q_H̃(z) ≤ (1 + ε) Q_H(z) + δ‖z‖²
//! ```
//!
//! on a finite family of vectors. A failing probe is a certificate that the
//! inequality is violated; passing every probe is only evidence, since the
//! supremum over all `z` is not computed.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::{edge_energy, StoredHypergraph};
use crate::records::ReweightingRecord;
use crate::sampler::{potential_tolerance, run, size_bound_core, SparsifierConfig, StepRecord, Summary};

/// Head-room multiplier on `c n ln(1 + 2W/(ηn))` for the realized sparsifier size.
pub const SIZE_HEADROOM: f64 = 4.0;
/// Relative tolerance on `Σ p_i ≤ (c / ln 2)(Φ_m - Φ_0)`.
pub const POTENTIAL_CHAIN_RTOL: f64 = 1e-6;
/// Relative eigenvalue cutoff for the pseudoinverse.
pub const PINV_THRESHOLD: f64 = 1e-10;
pub const ENERGY_COMPARISON_SLACK: f64 = 1e-8;
pub const MAX_CUT_VERTICES: usize = 22;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub probes_tested: usize,
    pub worst_lower_slack: f64,
    pub worst_upper_slack: f64,
    pub violating_probe: Option<Vec<f64>>,
    pub pass: bool,
}

struct SlackTracker {
    epsilon: f64,
    delta: f64,
    report: ProbeReport,
}

impl SlackTracker {
    fn new(epsilon: f64, delta: f64) -> Self {
        Self {
            epsilon,
            delta,
            report: ProbeReport {
                probes_tested: 0,
                worst_lower_slack: f64::INFINITY,
                worst_upper_slack: f64::INFINITY,
                violating_probe: None,
                pass: true,
            },
        }
    }

    fn record(&mut self, q_h: f64, q_t: f64, norm_sq: f64, z: impl FnOnce() -> Vec<f64>) {
        let additive = self.delta * norm_sq;
        let lower = q_t - ((1.0 - self.epsilon) * q_h - additive);
        let upper = (1.0 + self.epsilon) * q_h + additive - q_t;
        let numeric = 1e-9 * (1.0 + q_h);
        let r = &mut self.report;
        r.probes_tested += 1;
        r.worst_lower_slack = r.worst_lower_slack.min(lower);
        r.worst_upper_slack = r.worst_upper_slack.min(upper);
        if (lower < -numeric || upper < -numeric) && r.pass {
            r.pass = false;
            r.violating_probe = Some(z());
        }
    }
}

fn check_same_n(h: &StoredHypergraph, ht: &StoredHypergraph) -> Result<()> {
    if h.n != ht.n {
        return Err(Error::DimensionMismatch {
            expected: h.n,
            got: ht.n,
        });
    }
    Ok(())
}

/// Draws the `k`-th probe: the first `n` are vertex indicators, after which
/// Gaussians, Gaussians projected orthogonal to the all-ones vector, and pair
/// differences `χ_u - χ_v` alternate.
fn probe<G: Rng>(k: usize, n: usize, rng: &mut G) -> Vec<f64> {
    let mut z = vec![0.0; n];
    if k < n {
        z[k] = 1.0;
        return z;
    }
    match k % 3 {
        0 => z.iter_mut().for_each(|x| *x = rng.sample(StandardNormal)),
        1 => {
            z.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
            let mean = z.iter().sum::<f64>() / n as f64;
            z.iter_mut().for_each(|x| *x -= mean);
        }
        _ => {
            let u = rng.random_range(0..n);
            let v = (u + rng.random_range(1..n)) % n;
            z[u] = 1.0;
            z[v] = -1.0;
        }
    }
    z
}

/// Tests the sparsifier inequality on `num_probes` mixed probe vectors.
pub fn probe_check<G: Rng>(
    h: &StoredHypergraph,
    ht: &StoredHypergraph,
    epsilon: f64,
    delta: f64,
    num_probes: usize,
    rng: &mut G,
) -> Result<ProbeReport> {
    check_same_n(h, ht)?;
    let mut tracker = SlackTracker::new(epsilon, delta);
    for k in 0..num_probes {
        let z = probe(k, h.n, rng);
        let q_h = h.energy(&z)?;
        let q_t = ht.energy(&z)?;
        let norm_sq = z.iter().map(|x| x * x).sum();
        tracker.record(q_h, q_t, norm_sq, || z.clone());
    }
    Ok(tracker.report)
}

fn edge_masks(h: &StoredHypergraph) -> Vec<(u32, f64)> {
    h.edges
        .iter()
        .map(|e| (e.vertices().iter().fold(0u32, |m, &v| m | (1 << v)), e.weight()))
        .collect()
}

fn cut_energy(masks: &[(u32, f64)], cut: u32) -> f64 {
    masks
        .iter()
        .filter(|&&(m, _)| m & cut != 0 && m & !cut != 0)
        .map(|&(_, w)| w)
        .sum()
}

/// Tests the sparsifier inequality on all `2^n` vertex-subset indicators.
pub fn cut_check(h: &StoredHypergraph, ht: &StoredHypergraph, epsilon: f64, delta: f64) -> Result<ProbeReport> {
    check_same_n(h, ht)?;
    if h.n > MAX_CUT_VERTICES {
        return Err(Error::TooManyVertices(h.n));
    }
    let (mh, mt) = (edge_masks(h), edge_masks(ht));
    let mut tracker = SlackTracker::new(epsilon, delta);
    let n = h.n;
    for cut in 0u32..(1u32 << n) {
        let q_h = cut_energy(&mh, cut);
        let q_t = cut_energy(&mt, cut);
        tracker.record(q_h, q_t, cut.count_ones() as f64, || {
            (0..n).map(|v| f64::from((cut >> v) & 1)).collect()
        });
    }
    Ok(tracker.report)
}

/// The reweighted clique graph `G_m` of a run, without ridge.
#[derive(Debug, Clone, PartialEq)]
pub struct CliqueGraph {
    pub n: usize,
    pub laplacian: DMatrix<f64>,
    pub total_weight: f64,
}

impl CliqueGraph {
    pub fn trace(&self) -> f64 {
        self.laplacian.trace()
    }
}

/// Replays reweighting records `1..=steps` into `L_G = Σ_i w_i Σ c_i,uv L_uv`.
pub fn build_clique_graph<'a>(
    records: impl IntoIterator<Item = &'a ReweightingRecord>,
    n: usize,
    steps: usize,
) -> Result<CliqueGraph> {
    let mut lap = DMatrix::zeros(n, n);
    let mut total_weight = 0.0;
    let mut expected = 1;
    for rec in records {
        if rec.step != expected {
            return Err(Error::MissingReweighting(expected));
        }
        expected += 1;
        total_weight += rec.weight;
        for &(u, v, c) in &rec.pairs {
            if u == v || u >= n || v >= n {
                return Err(Error::InvalidPair { u, v, n });
            }
            if c > 0.0 {
                let x = rec.weight * c;
                lap[(u, u)] += x;
                lap[(v, v)] += x;
                lap[(u, v)] -= x;
                lap[(v, u)] -= x;
            }
        }
    }
    if expected != steps + 1 {
        return Err(Error::MissingReweighting(expected));
    }
    Ok(CliqueGraph {
        n,
        laplacian: lap,
        total_weight,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub trace: f64,
    pub twice_weight: f64,
    pub max_row_sum: f64,
    pub pass: bool,
}

/// `tr L_G = 2W` within relative 1e-10, and zero row sums within 1e-10.
pub fn trace_check(g: &CliqueGraph) -> TraceReport {
    let trace = g.trace();
    let twice_weight = 2.0 * g.total_weight;
    let max_row_sum = (0..g.n)
        .map(|i| g.laplacian.row(i).sum().abs())
        .fold(0.0, f64::max);
    let pass = (trace - twice_weight).abs() <= 1e-10 * twice_weight.max(f64::MIN_POSITIVE)
        && max_row_sum <= 1e-10 * (1.0 + twice_weight);
    TraceReport {
        trace,
        twice_weight,
        max_row_sum,
        pass,
    }
}

/// Square root of the pseudoinverse of a PSD matrix, on its numerical range.
pub struct PinvSqrt {
    /// Eigenvectors spanning the range, one per column.
    basis: DMatrix<f64>,
    inv_sqrt: DVector<f64>,
}

impl PinvSqrt {
    pub fn new(laplacian: &DMatrix<f64>) -> Self {
        let eig = laplacian.clone().symmetric_eigen();
        let lambda_max = eig.eigenvalues.max().max(0.0);
        let keep: Vec<usize> = (0..eig.eigenvalues.len())
            .filter(|&i| lambda_max > 0.0 && eig.eigenvalues[i] > PINV_THRESHOLD * lambda_max)
            .collect();
        let basis = DMatrix::from_fn(laplacian.nrows(), keep.len(), |r, c| eig.eigenvectors[(r, keep[c])]);
        let inv_sqrt = DVector::from_iterator(keep.len(), keep.iter().map(|&i| eig.eigenvalues[i].sqrt().recip()));
        Self { basis, inv_sqrt }
    }

    pub fn rank(&self) -> usize {
        self.inv_sqrt.len()
    }

    /// Returns `(L^{†/2} x, x projected onto range(L))`.
    pub fn apply(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let x = DVector::from_column_slice(x);
        let coords = self.basis.tr_mul(&x);
        let projected = &self.basis * &coords;
        let z = &self.basis * coords.component_mul(&self.inv_sqrt);
        (z.as_slice().to_vec(), projected.as_slice().to_vec())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyComparisonReport {
    pub probes: usize,
    /// Smallest `Q_H(L^{†/2} x) / ‖x_proj‖²` over probes with nonzero projection.
    pub worst_ratio: f64,
    /// Smallest `Q_H(x) - xᵀ L_G x` over direct probes.
    pub worst_direct_slack: f64,
    pub pass: bool,
}

/// `Q_H(L_G^{†/2} x) ≥ ‖x_proj‖²` on range-projected Gaussians, plus the
/// underlying `Q_H(z) ≥ zᵀ L_G z` on Gaussians.
pub fn energy_comparison_check<G: Rng>(
    h: &StoredHypergraph,
    g: &CliqueGraph,
    num_probes: usize,
    rng: &mut G,
) -> Result<EnergyComparisonReport> {
    if h.n != g.n {
        return Err(Error::DimensionMismatch {
            expected: h.n,
            got: g.n,
        });
    }
    let pinv = PinvSqrt::new(&g.laplacian);
    let mut report = EnergyComparisonReport {
        probes: num_probes,
        worst_ratio: f64::INFINITY,
        worst_direct_slack: f64::INFINITY,
        pass: true,
    };
    for _ in 0..num_probes {
        let x: Vec<f64> = (0..h.n).map(|_| rng.sample(StandardNormal)).collect();
        let (z, proj) = pinv.apply(&x);
        let norm_sq: f64 = proj.iter().map(|v| v * v).sum();
        let q = h.energy(&z)?;
        if norm_sq > 0.0 {
            report.worst_ratio = report.worst_ratio.min(q / norm_sq);
        }
        if q < norm_sq - ENERGY_COMPARISON_SLACK {
            report.pass = false;
        }

        let y: Vec<f64> = (0..h.n).map(|_| rng.sample(StandardNormal)).collect();
        let yv = DVector::from_column_slice(&y);
        let quad = yv.dot(&(&g.laplacian * &yv));
        let direct = h.energy(&y)? - quad;
        report.worst_direct_slack = report.worst_direct_slack.min(direct);
        if direct < -ENERGY_COMPARISON_SLACK * (1.0 + quad.abs()) {
            report.pass = false;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeBoundReport {
    pub sampled: usize,
    /// `4 c n ln(1 + 2W/(ηn))`.
    pub size_bound: f64,
    pub sum_p: f64,
    /// `(c / ln 2)(Φ_m - Φ_0)`.
    pub potential_cap: f64,
    /// `(c / ln 2) n ln(1 + 2W/(ηn))`.
    pub expected_size_bound: f64,
    pub pass: bool,
}

/// `|H̃| ≤ 4 c n ln(1 + 2W/(ηn))` and `Σ p_i ≤ (c/ln 2)(Φ_m - Φ_0) ≤ (c/ln 2) n ln(1 + 2W/(ηn))`.
pub fn size_bound_check(summary: &Summary) -> SizeBoundReport {
    let core = size_bound_core(summary.c, summary.n, summary.total_weight, summary.eta);
    let size_bound = SIZE_HEADROOM * core;
    let potential_cap = summary.c / std::f64::consts::LN_2 * (summary.phi_m - summary.phi_0);
    let expected_size_bound = core / std::f64::consts::LN_2;
    let sampled_ok = summary.sampled as f64 <= size_bound || summary.steps == 0;
    let chain_ok = summary.sum_p <= potential_cap * (1.0 + POTENTIAL_CHAIN_RTOL) + 1e-12
        && potential_cap <= expected_size_bound * (1.0 + POTENTIAL_CHAIN_RTOL) + 1e-12;
    SizeBoundReport {
        sampled: summary.sampled,
        size_bound,
        sum_p: summary.sum_p,
        potential_cap,
        expected_size_bound,
        pass: sampled_ok && chain_ok,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialReport {
    pub steps: usize,
    pub violations: usize,
    /// Smallest `Φ_i - Φ_{i-1} - ln(1 + p_i / c)`.
    pub worst_slack: f64,
    pub first_violation: Option<usize>,
    pub pass: bool,
}

/// Per-step `Φ_i - Φ_{i-1} ≥ ln(1 + p_i/c) ≥ p_i ln 2 / c` with slack `1e-8 (1 + |Φ_i|)`.
pub fn potential_check(records: &[StepRecord], c: f64) -> PotentialReport {
    let mut report = PotentialReport {
        steps: records.len(),
        violations: 0,
        worst_slack: f64::INFINITY,
        first_violation: None,
        pass: true,
    };
    for rec in records {
        let tol = potential_tolerance(rec.phi);
        let log_bound = (rec.p / c).ln_1p();
        let linear_bound = rec.p * std::f64::consts::LN_2 / c;
        let slack = rec.delta_phi - log_bound;
        report.worst_slack = report.worst_slack.min(slack);
        if slack < -tol || rec.delta_phi < linear_bound - tol {
            report.violations += 1;
            report.first_violation.get_or_insert(rec.step);
            report.pass = false;
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub steps: usize,
    pub within_tolerance: usize,
    pub fraction: f64,
    pub max_violation: f64,
    pub pass: bool,
}

/// At least `min_fraction` of steps have `kkt_violation ≤ tol`.
pub fn kkt_check(records: &[StepRecord], tol: f64, min_fraction: f64) -> KktReport {
    let within = records.iter().filter(|r| r.kkt_violation <= tol).count();
    let fraction = if records.is_empty() {
        1.0
    } else {
        within as f64 / records.len() as f64
    };
    KktReport {
        steps: records.len(),
        within_tolerance: within,
        fraction,
        max_violation: records.iter().map(|r| r.kkt_violation).fold(0.0, f64::max),
        pass: fraction >= min_fraction,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnbiasednessReport {
    pub num_seeds: usize,
    pub target: f64,
    pub mean: f64,
    pub std_err: f64,
    pub pass: bool,
}

/// Runs the sampler with seeds `config.seed, config.seed + 1, ...` and checks
/// that the mean of `Q_H̃(z)` is within four standard errors of `Q_H(z)`.
pub fn unbiasedness_check(
    h: &StoredHypergraph,
    config: &SparsifierConfig,
    num_seeds: usize,
    z: &[f64],
) -> Result<UnbiasednessReport> {
    if num_seeds < 2 {
        return Err(Error::InvalidParameter("need at least 2 seeds".into()));
    }
    let target = h.energy(z)?;
    let energies: Vec<f64> = (0..num_seeds as u64)
        .into_par_iter()
        .map(|k| {
            let cfg = SparsifierConfig {
                seed: config.seed.wrapping_add(k),
                ..*config
            };
            let out = run(h.n, h.edges.iter().cloned().map(Ok), &cfg)?;
            out.sampled
                .iter()
                .try_fold(0.0, |acc, s| Ok(acc + s.new_weight * edge_energy(&s.edge, z)?))
        })
        .collect::<Result<_>>()?;
    let count = num_seeds as f64;
    let mean = energies.iter().sum::<f64>() / count;
    let var = energies.iter().map(|q| (q - mean).powi(2)).sum::<f64>() / (count - 1.0);
    let std_err = (var / count).sqrt();
    let diff = (mean - target).abs();
    let pass = diff <= 4.0 * std_err || diff <= 1e-9 * (1.0 + target.abs());
    Ok(UnbiasednessReport {
        num_seeds,
        target,
        mean,
        std_err,
        pass,
    })
}
