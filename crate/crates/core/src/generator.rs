//! Deterministic synthetic hypergraph streams.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::{write_stream, Hyperedge, StoredHypergraph};

/// Probability that a planted-cluster edge stays inside one block.
pub const IN_BLOCK_PROBABILITY: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RankDist {
    Fixed(usize),
    /// Uniform over `2..=max`.
    Uniform(usize),
}

impl RankDist {
    pub fn max(&self) -> usize {
        match *self {
            RankDist::Fixed(r) | RankDist::Uniform(r) => r,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WeightDist {
    Constant(f64),
    LogUniform { min: f64, max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Model {
    UniformSubsets,
    PlantedClusters { blocks: usize },
    /// Every edge has exactly two vertices.
    GraphOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub n: usize,
    pub m: usize,
    pub rank: RankDist,
    pub weights: WeightDist,
    pub model: Model,
    pub seed: u64,
}

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InfeasibleSpec(msg));
        if self.n < 2 {
            return fail(format!("n must be at least 2, got {}", self.n));
        }
        let r = self.rank.max();
        if r < 2 || r > self.n {
            return fail(format!("rank {r} must lie in [2, n = {}]", self.n));
        }
        match self.weights {
            WeightDist::Constant(w) if !(w.is_finite() && w > 0.0) => {
                return fail(format!("constant weight must be positive, got {w}"));
            }
            WeightDist::LogUniform { min, max }
                if !(min.is_finite() && max.is_finite() && min > 0.0 && min <= max) =>
            {
                return fail(format!("need 0 < w_min <= w_max, got [{min}, {max}]"));
            }
            _ => {}
        }
        if let Model::PlantedClusters { blocks } = self.model {
            if blocks == 0 || blocks > self.n {
                return fail(format!("block count must lie in [1, n], got {blocks}"));
            }
        }
        Ok(())
    }
}

fn block_range(n: usize, blocks: usize, b: usize) -> std::ops::Range<usize> {
    (b * n / blocks)..((b + 1) * n / blocks)
}

fn draw_edge(spec: &GenSpec, rng: &mut ChaCha8Rng) -> Hyperedge {
    let n = spec.n;
    let size = match (spec.model, spec.rank) {
        (Model::GraphOnly, _) => 2,
        (_, RankDist::Fixed(r)) => r,
        (_, RankDist::Uniform(r)) => rng.random_range(2..=r),
    };
    let weight = match spec.weights {
        WeightDist::Constant(w) => w,
        WeightDist::LogUniform { min, max } if min == max => min,
        WeightDist::LogUniform { min, max } => rng.random_range(min.ln()..max.ln()).exp().clamp(min, max),
    };
    let vertices: Vec<usize> = match spec.model {
        Model::PlantedClusters { blocks } if rng.random_bool(IN_BLOCK_PROBABILITY) => {
            let range = block_range(n, blocks, rng.random_range(0..blocks));
            if range.len() >= size {
                index::sample(rng, range.len(), size)
                    .into_iter()
                    .map(|i| range.start + i)
                    .collect()
            } else {
                index::sample(rng, n, size).into_vec()
            }
        }
        _ => index::sample(rng, n, size).into_vec(),
    };
    Hyperedge::new(vertices, weight, n).expect("generated edge is valid")
}

/// Generates the hypergraph described by `spec`. Same spec, same edges.
pub fn generate_hypergraph(spec: &GenSpec) -> Result<StoredHypergraph> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let edges = (0..spec.m).map(|_| draw_edge(spec, &mut rng)).collect();
    StoredHypergraph::new(spec.n, edges)
}

/// Generates the stream text for `spec`, header included.
pub fn generate(spec: &GenSpec) -> Result<String> {
    let h = generate_hypergraph(spec)?;
    let mut out = Vec::new();
    write_stream(&mut out, h.n, Some(h.edges.len()), h.edges.iter())?;
    Ok(String::from_utf8(out).expect("stream text is ASCII"))
}
