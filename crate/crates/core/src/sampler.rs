//! The online sampling engine.
//!
//! Each arriving hyperedge is reweighted onto its clique, folded into the ridged
//! Laplacian state, and kept with probability `p_i = min(1, c r_i w_i)` where
//! `r_i` is the largest ridged effective resistance across a pair of its vertices
//! after the update. Kept edges are reweighted to `w_i / p_i`. The decision is
//! final and nothing about the edge is retained except its clique weights.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::{Hyperedge, StoredHypergraph};
use crate::linalg::{RidgedLaplacianState, DEFAULT_REFRESH_PERIOD};
use crate::numeric::CompensatedSum;
use crate::reweighting::{kkt_violation, optimal_reweighting, OptimizerConfig, Reweighting};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparsifierConfig {
    pub epsilon: f64,
    pub delta: f64,
    /// Multiplier on `ln n · ln r / ε²` in the oversampling constant.
    pub kappa: f64,
    pub seed: u64,
    /// Declared maximum hyperedge size; edges above it abort the run.
    pub rank_bound: usize,
    pub optimizer: OptimizerConfig,
    pub refresh_period: usize,
}

impl SparsifierConfig {
    pub fn new(epsilon: f64, delta: f64, rank_bound: usize) -> Self {
        Self {
            epsilon,
            delta,
            kappa: 1.0,
            seed: 0,
            rank_bound,
            optimizer: OptimizerConfig::default(),
            refresh_period: DEFAULT_REFRESH_PERIOD,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    /// Ridge `η = δ / ε`.
    pub fn eta(&self) -> f64 {
        self.delta / self.epsilon
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !unit(self.epsilon) || !unit(self.delta) {
            return Err(Error::InvalidParameter(format!(
                "epsilon and delta must lie in (0, 1), got {} and {}",
                self.epsilon, self.delta
            )));
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(Error::InvalidParameter(format!("kappa must be positive, got {}", self.kappa)));
        }
        if self.rank_bound < 2 {
            return Err(Error::InvalidParameter(format!(
                "rank bound must be at least 2, got {}",
                self.rank_bound
            )));
        }
        if self.refresh_period == 0 {
            return Err(Error::InvalidParameter("refresh period must be positive".into()));
        }
        self.optimizer.validate()
    }
}

/// `max(1, κ ln n ln r / ε²)`.
pub fn oversampling_constant(n: usize, r: usize, epsilon: f64, kappa: f64) -> Result<f64> {
    if r < 2 {
        return Err(Error::InvalidParameter(format!("rank must be at least 2, got {r}")));
    }
    if n < 2 || !(epsilon > 0.0 && epsilon < 1.0) || kappa.is_nan() || kappa <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "need n >= 2, epsilon in (0,1), kappa > 0; got n={n}, epsilon={epsilon}, kappa={kappa}"
        )));
    }
    Ok(oversampling_constant_real(n as f64, r as f64, epsilon, kappa))
}

fn oversampling_constant_real(n: f64, r: f64, epsilon: f64, kappa: f64) -> f64 {
    (kappa * n.ln() * r.ln() / (epsilon * epsilon)).max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaChoice {
    pub delta: f64,
    /// Set when `ε w_min² n^{-2r}` fell below the smallest normal double and was clamped.
    pub underflow: bool,
}

/// Additive error `δ = ε w_min² n^{-2r}` under which an (ε, δ)-sparsifier is
/// also a (2ε, 0)-sparsifier. Evaluated in log space.
pub fn delta_for_eps_sparsifier(epsilon: f64, w_min: f64, n: usize, r: usize) -> DeltaChoice {
    let log_delta = epsilon.ln() + 2.0 * w_min.ln() - 2.0 * r as f64 * (n as f64).ln();
    let delta = log_delta.exp();
    if log_delta < f64::MIN_POSITIVE.ln() || delta < f64::MIN_POSITIVE {
        DeltaChoice {
            delta: f64::MIN_POSITIVE,
            underflow: true,
        }
    } else {
        DeltaChoice {
            delta,
            underflow: false,
        }
    }
}

/// A kept hyperedge and its sparsifier weight `w / p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledEdge {
    pub edge: Hyperedge,
    pub new_weight: f64,
    pub p: f64,
    /// 1-based arrival index.
    pub step: usize,
}

impl SampledEdge {
    pub fn reweighted(&self) -> Hyperedge {
        self.edge
            .with_weight(self.new_weight)
            .expect("w / p is positive and finite")
    }
}

/// Builds the sparsifier hypergraph from kept edges.
pub fn sparsifier_hypergraph(n: usize, sampled: &[SampledEdge]) -> Result<StoredHypergraph> {
    StoredHypergraph::new(n, sampled.iter().map(SampledEdge::reweighted).collect())
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// Per-step telemetry. Serializes as one JSON object per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    #[serde(rename = "i")]
    pub step: usize,
    pub r: f64,
    pub p: f64,
    /// `Φ_i = log det(L_i + ηI)` after the update.
    pub phi: f64,
    #[serde(rename = "dphi")]
    pub delta_phi: f64,
    #[serde(rename = "kkt")]
    pub kkt_violation: f64,
    pub sampled: bool,
    pub cum_weight: f64,
    /// The reweighting optimizer stopped before reaching its gap tolerance.
    #[serde(default, skip_serializing_if = "is_false")]
    pub capped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub record: StepRecord,
    /// Weight of the arriving edge.
    pub weight: f64,
    pub sampled: Option<SampledEdge>,
    pub reweighting: Reweighting,
}

/// Independent random stream for one arrival index.
pub fn step_rng(seed: u64, step: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step as u64);
    rng
}

/// One step of the online algorithm against `state`, which must hold `L_{i-1} + ηI`.
///
/// On return `state` holds `L_i + ηI`. `c` is the oversampling constant.
pub fn process_edge<G: Rng>(
    state: &mut RidgedLaplacianState,
    e: Hyperedge,
    step: usize,
    c: f64,
    optimizer: &OptimizerConfig,
    rng: &mut G,
) -> Result<StepOutcome> {
    let phi_prev = state.logdet();
    let outcome = optimal_reweighting(state, &e, optimizer)?;
    let w = e.weight();
    outcome.reweighting.apply(state, w)?;
    state.add_weight(w);
    if state.refresh_due() {
        state.refresh()?;
    }

    let r = e
        .pairs()
        .map(|(u, v)| state.resistance(u, v))
        .fold(f64::NEG_INFINITY, f64::max);
    let p = (c * r * w).min(1.0);
    let keep = p >= 1.0 || rng.random::<f64>() < p;
    let phi = state.logdet();
    let record = StepRecord {
        step,
        r,
        p,
        phi,
        delta_phi: phi - phi_prev,
        kkt_violation: kkt_violation(state, &e, &outcome.reweighting),
        sampled: keep,
        cum_weight: state.cum_weight(),
        capped: !outcome.converged,
    };
    let sampled = keep.then(|| SampledEdge {
        new_weight: w / p,
        p,
        step,
        edge: e,
    });
    Ok(StepOutcome {
        record,
        weight: w,
        sampled,
        reweighting: outcome.reweighting,
    })
}

/// End-of-run statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub steps: usize,
    pub sampled: usize,
    pub sum_p: f64,
    pub phi_0: f64,
    pub phi_m: f64,
    pub total_weight: f64,
    pub eta: f64,
    pub c: f64,
    pub rank_bound: usize,
    /// `c n ln(1 + 2W/(ηn)) / ln 2`, the bound on `Σ p_i` implied by the potential argument.
    pub expected_size_bound: f64,
    /// Steps whose potential increase fell short of `ln(1 + p_i / c)`.
    pub potential_violations: usize,
    pub optimizer_warnings: usize,
    pub max_kkt: f64,
    pub peak_resident_scalars: usize,
}

/// `c n ln(1 + 2W/(ηn))`.
pub fn size_bound_core(c: f64, n: usize, total_weight: f64, eta: f64) -> f64 {
    let n = n as f64;
    c * n * (2.0 * total_weight / (eta * n)).ln_1p()
}

/// Tolerance on the per-step potential increase: `1e-8 (1 + |Φ_i|)`.
pub fn potential_tolerance(phi: f64) -> f64 {
    1e-8 * (1.0 + phi.abs())
}

/// The online sparsifier. Holds only the O(n²) ridged Laplacian state and counters.
#[derive(Debug, Clone)]
pub struct Sparsifier {
    config: SparsifierConfig,
    state: RidgedLaplacianState,
    c: f64,
    step: usize,
    phi_0: f64,
    sum_p: CompensatedSum,
    sampled: usize,
    potential_violations: usize,
    optimizer_warnings: usize,
    max_kkt: f64,
    peak_resident: usize,
}

impl Sparsifier {
    pub fn new(n: usize, config: SparsifierConfig) -> Result<Self> {
        config.validate()?;
        let state = RidgedLaplacianState::new(n, config.eta())?.with_refresh_period(config.refresh_period);
        let c = oversampling_constant(n, config.rank_bound, config.epsilon, config.kappa)?;
        let phi_0 = state.logdet();
        let peak_resident = state.resident_scalars();
        Ok(Self {
            config,
            state,
            c,
            step: 0,
            phi_0,
            sum_p: CompensatedSum::new(),
            sampled: 0,
            potential_violations: 0,
            optimizer_warnings: 0,
            max_kkt: 0.0,
            peak_resident,
        })
    }

    pub fn config(&self) -> &SparsifierConfig {
        &self.config
    }

    pub fn state(&self) -> &RidgedLaplacianState {
        &self.state
    }

    /// Oversampling constant `c`.
    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn steps(&self) -> usize {
        self.step
    }

    /// f64 scalars resident in the engine, including transient optimizer blocks.
    pub fn resident_scalars(&self) -> usize {
        self.state.resident_scalars() + 8
    }

    pub fn peak_resident_scalars(&self) -> usize {
        self.peak_resident
    }

    /// Processes the next arrival. The edge is consumed; only its clique weights remain.
    pub fn process_edge(&mut self, e: Hyperedge) -> Result<StepOutcome> {
        let step = self.step + 1;
        if e.rank() > self.config.rank_bound {
            return Err(Error::RankBoundExceeded {
                step,
                size: e.rank(),
                bound: self.config.rank_bound,
            });
        }
        if let Some(&vertex) = e.vertices().last().filter(|&&v| v >= self.state.n()) {
            return Err(Error::EdgeOutsideStream {
                vertex,
                n: self.state.n(),
            });
        }
        let k = e.rank();
        // optimizer working set: a handful of k×k blocks plus pair vectors
        let transient = 6 * k * k + 4 * e.num_pairs();
        let mut rng = step_rng(self.config.seed, step);
        let outcome = process_edge(&mut self.state, e, step, self.c, &self.config.optimizer, &mut rng)?;
        self.step = step;

        let rec = &outcome.record;
        self.sum_p.add(rec.p);
        self.sampled += usize::from(rec.sampled);
        if rec.delta_phi < (rec.p / self.c).ln_1p() - potential_tolerance(rec.phi) {
            self.potential_violations += 1;
        }
        self.optimizer_warnings += usize::from(rec.capped);
        self.max_kkt = self.max_kkt.max(rec.kkt_violation);
        self.peak_resident = self.peak_resident.max(self.resident_scalars() + transient);
        Ok(outcome)
    }

    pub fn summary(&self) -> Summary {
        let n = self.state.n();
        let eta = self.state.eta();
        let total_weight = self.state.cum_weight();
        Summary {
            n,
            steps: self.step,
            sampled: self.sampled,
            sum_p: self.sum_p.value(),
            phi_0: self.phi_0,
            phi_m: self.state.logdet(),
            total_weight,
            eta,
            c: self.c,
            rank_bound: self.config.rank_bound,
            expected_size_bound: size_bound_core(self.c, n, total_weight, eta) / std::f64::consts::LN_2,
            potential_violations: self.potential_violations,
            optimizer_warnings: self.optimizer_warnings,
            max_kkt: self.max_kkt,
            peak_resident_scalars: self.peak_resident,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub sampled: Vec<SampledEdge>,
    pub records: Vec<StepRecord>,
    pub summary: Summary,
}

/// Runs the sampler over a stream, handing every step to `on_step` as it happens.
///
/// Records are not retained; only kept edges are collected.
pub fn run_streaming<I, F>(
    n: usize,
    edges: I,
    config: &SparsifierConfig,
    mut on_step: F,
) -> Result<(Vec<SampledEdge>, Summary)>
where
    I: IntoIterator<Item = Result<Hyperedge>>,
    F: FnMut(&StepOutcome) -> Result<()>,
{
    let mut engine = Sparsifier::new(n, *config)?;
    let mut kept = Vec::new();
    for e in edges {
        let outcome = engine.process_edge(e?)?;
        on_step(&outcome)?;
        if let Some(s) = outcome.sampled {
            kept.push(s);
        }
    }
    Ok((kept, engine.summary()))
}

/// Runs the sampler over a stream, keeping all telemetry in memory.
pub fn run<I>(n: usize, edges: I, config: &SparsifierConfig) -> Result<RunOutput>
where
    I: IntoIterator<Item = Result<Hyperedge>>,
{
    let mut records = Vec::new();
    let (sampled, summary) = run_streaming(n, edges, config, |o| {
        records.push(o.record.clone());
        Ok(())
    })?;
    Ok(RunOutput {
        sampled,
        records,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn edge(vs: &[usize], w: f64, n: usize) -> Hyperedge {
        Hyperedge::new(vs.iter().copied(), w, n).unwrap()
    }

    fn ok_edges(edges: Vec<Hyperedge>) -> impl Iterator<Item = Result<Hyperedge>> {
        edges.into_iter().map(Ok)
    }

    #[test]
    fn oversampling_examples() {
        let c = oversampling_constant(100, 4, 0.5, 1.0).unwrap();
        assert_abs_diff_eq!(c, 4.605170186 * 1.386294361 / 0.25, epsilon = 1e-6);
        assert_abs_diff_eq!(c, 25.5365, epsilon = 1e-4);
        let e = std::f64::consts::E;
        assert_eq!(oversampling_constant_real(e, e, 1.0, 1.0), 1.0);
        assert_eq!(oversampling_constant(5, 3, 0.5, 0.001).unwrap(), 1.0);
        assert!(oversampling_constant(5, 1, 0.5, 1.0).is_err());
    }

    #[test]
    fn delta_examples() {
        let d = delta_for_eps_sparsifier(0.1, 1.0, 4, 2);
        assert!(!d.underflow);
        assert_abs_diff_eq!(d.delta, 3.90625e-4, epsilon = 1e-15);
        let d2 = delta_for_eps_sparsifier(0.1, 2.0, 4, 2);
        assert_abs_diff_eq!(d2.delta, 4.0 * d.delta, epsilon = 1e-15);
        // 0.1 · 50^{-20} ≈ 1.05e-35 is representable
        let d = delta_for_eps_sparsifier(0.1, 1.0, 50, 10);
        assert!(!d.underflow);
        assert_abs_diff_eq!(d.delta.log10(), -1.0 - 20.0 * 50f64.log10(), epsilon = 1e-12);
        // 0.1 · 1000^{-120} = 1e-361 is not
        let d = delta_for_eps_sparsifier(0.1, 1.0, 1000, 60);
        assert!(d.underflow);
        assert_eq!(d.delta, f64::MIN_POSITIVE);
    }

    #[test]
    fn config_validation() {
        assert!(SparsifierConfig::new(0.5, 0.1, 3).validate().is_ok());
        assert!(SparsifierConfig::new(1.0, 0.1, 3).validate().is_err());
        assert!(SparsifierConfig::new(0.5, 0.0, 3).validate().is_err());
        assert!(SparsifierConfig::new(0.5, 0.1, 1).validate().is_err());
        assert!(SparsifierConfig::new(0.5, 0.1, 3).with_kappa(0.0).validate().is_err());
    }

    #[test]
    fn first_edge_two_vertices() {
        let cfg = SparsifierConfig::new(0.5, 0.05, 2);
        let mut s = Sparsifier::new(2, cfg).unwrap();
        assert_abs_diff_eq!(s.state().eta(), 0.1, epsilon = 1e-15);
        let out = s.process_edge(edge(&[0, 1], 1.0, 2)).unwrap();
        assert_abs_diff_eq!(out.record.r, 0.2 / 0.21, epsilon = 1e-12);
        assert_abs_diff_eq!(out.record.phi, 0.21f64.ln(), epsilon = 1e-12);
        assert_eq!(out.record.step, 1);
    }

    #[test]
    fn clipped_probability_is_deterministic() {
        // one pair: r w = 2w / (η + 2w) = 40/41, and c = 2 ln 2 ln 2 / 0.25 > 1.05
        let cfg = SparsifierConfig::new(0.5, 0.05, 2);
        for seed in 0..20 {
            let mut s = Sparsifier::new(2, cfg.with_seed(seed)).unwrap();
            let out = s.process_edge(edge(&[0, 1], 2.0, 2)).unwrap();
            assert_eq!(out.record.p, 1.0);
            let kept = out.sampled.unwrap();
            assert_eq!(kept.new_weight, 2.0);
        }
    }

    #[test]
    fn empty_stream() {
        let cfg = SparsifierConfig::new(0.5, 0.25, 3);
        let out = run(5, std::iter::empty(), &cfg).unwrap();
        assert!(out.sampled.is_empty());
        assert_abs_diff_eq!(out.summary.phi_m, 5.0 * 0.5f64.ln(), epsilon = 1e-15);
        assert_eq!(out.summary.phi_m, out.summary.phi_0);
        assert_eq!(out.summary.steps, 0);
    }

    #[test]
    fn repeated_edge_resistance_decreases() {
        let cfg = SparsifierConfig::new(0.5, 0.05, 2).with_seed(9);
        let edges = vec![edge(&[1, 2], 1.0, 4); 300];
        let out = run(4, ok_edges(edges), &cfg).unwrap();
        for pair in out.records.windows(2) {
            assert!(pair[1].r < pair[0].r);
        }
        let c = out.summary.c;
        let first_random = out.records.iter().position(|r| c * r.r < 1.0).unwrap();
        assert!(out.records[..first_random].iter().all(|r| r.p == 1.0 && r.sampled));
        assert!(out.records[first_random..].iter().all(|r| r.p < 1.0));
        assert!(out.records[first_random..].iter().any(|r| !r.sampled));
    }

    #[test]
    fn rank_bound_enforced() {
        let cfg = SparsifierConfig::new(0.5, 0.05, 2);
        let err = run(4, ok_edges(vec![edge(&[0, 1], 1.0, 4), edge(&[0, 1, 2], 1.0, 4)]), &cfg).unwrap_err();
        assert!(matches!(err, Error::RankBoundExceeded { step: 2, size: 3, bound: 2 }));
    }

    #[test]
    fn edge_outside_stream_rejected() {
        let cfg = SparsifierConfig::new(0.5, 0.05, 2);
        let err = run(3, ok_edges(vec![edge(&[0, 5], 1.0, 6)]), &cfg).unwrap_err();
        assert!(matches!(err, Error::EdgeOutsideStream { vertex: 5, n: 3 }));
    }

    #[test]
    fn stream_errors_abort() {
        let cfg = SparsifierConfig::new(0.5, 0.05, 3);
        let text = "H 4\n1 0 1\n1 0 9\n1 2 3\n";
        let (hdr, edges) = crate::hypergraph::parse_stream(text.as_bytes()).unwrap();
        let err = run(hdr.n, edges, &cfg).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn step_streams_are_independent_of_history() {
        let a: f64 = step_rng(5, 17).random();
        let mut r = step_rng(5, 16);
        let _: f64 = r.random();
        let b: f64 = step_rng(5, 17).random();
        assert_eq!(a, b);
        assert_ne!(a, step_rng(5, 18).random::<f64>());
        assert_ne!(a, step_rng(6, 17).random::<f64>());
    }
}
