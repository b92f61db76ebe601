//! Multi-domain evolutionary optimization on networks.
//!
//! Several networks are optimized at once for the same combinatorial task
//! (community deception or influence maximization). Each network runs its own
//! population; elite solutions travel between similar networks through node
//! mappings learned from graph-autoencoder embeddings.
//!
//! The pipeline, bottom-up:
//!
//! - [`graph`]: immutable undirected graphs, edge-list ingestion, edits, motif weighting.
//! - [`community`]: greedy modularity (CNM) detection and Newman modularity.
//! - [`similarity`]: community-level graph similarity and the assisted-network matrix.
//! - [`embedding`]: a two-layer GCN autoencoder with hand-derived gradients.
//! - [`alignment`]: anchor selection, dual affine mappings and node mappings.
//! - [`evo`]: chromosomes, fitness functions, operators, baselines.
//! - [`orchestrator`]: the synchronized many-network loop with transfer.
//! - [`metrics`]: NMI, ARI and structural-change reports.
//! - [`config`], [`io`], [`synth`]: configuration, file formats and generators.

pub mod alignment;
pub mod community;
pub mod config;
pub mod embedding;
pub mod error;
pub mod evo;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod orchestrator;
pub mod rng;
pub mod similarity;
pub mod synth;

pub use error::{Error, Result};
pub use graph::{Edge, EditSet, Graph};
