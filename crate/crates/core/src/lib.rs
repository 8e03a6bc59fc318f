//! Online spectral sparsification of weighted hypergraph streams.
//!
//! Edges arrive one at a time. Each is reweighted onto its clique so as to
//! maximize the growth of `log det(L + ηI)`, then kept with probability
//! proportional to its largest ridged effective resistance. Memory stays at
//! `O(n²)` regardless of stream length.
//!
//! ```
//! use hypersparse::{parse_stream, run, SparsifierConfig};
//!
//! let text = "H 4\n1.0 0 1 2\n2.0 1 3\n";
//! let (header, edges) = parse_stream(text.as_bytes())?;
//! let config = SparsifierConfig::new(0.5, 0.05, 3).with_seed(7);
//! let out = run(header.n, edges, &config)?;
//! assert_eq!(out.records.len(), 2);
//! for kept in &out.sampled {
//!     println!("{}", kept.reweighted());
//! }
//! # Ok::<(), hypersparse::Error>(())
//! ```

pub mod error;
pub mod generator;
pub mod hypergraph;
pub mod linalg;
pub mod numeric;
pub mod records;
pub mod reweighting;
pub mod sampler;
pub mod verify;

pub use error::{EdgeError, Error, Result};
pub use generator::{generate, generate_hypergraph, GenSpec, Model, RankDist, WeightDist};
pub use hypergraph::{
    edge_energy, hypergraph_energy, parse_stream, write_stream, EdgeReader, Hyperedge, StoredHypergraph,
    StreamHeader,
};
pub use linalg::RidgedLaplacianState;
pub use records::ReweightingRecord;
pub use reweighting::{optimal_reweighting, OptimizerConfig, ReweightOutcome, Reweighting};
pub use sampler::{
    delta_for_eps_sparsifier, oversampling_constant, run, run_streaming, sparsifier_hypergraph, DeltaChoice,
    RunOutput, SampledEdge, Sparsifier, SparsifierConfig, StepOutcome, StepRecord, Summary,
};
