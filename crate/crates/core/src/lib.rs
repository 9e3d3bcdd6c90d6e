//! Dilute q-state clock model on finite graphs.
//!
//! The crate covers the spin model itself ([`clock`]), its Edwards–Sokal
//! random-cluster representation ([`cluster`]), brute-force enumeration of
//! every finite-volume measure ([`oracle`]), the reflection injection behind
//! the counting inequality ([`reflection`]), the stochastic-domination
//! threshold ([`domination`]), Bernoulli bond percolation ([`percolation`])
//! and a heat-bath sampler for diluted boxes ([`mcmc`]).
//!
//! Spins are integer indices `0..q` (angle `2πi/q`) and edge values are
//! integer level indices, so every comparison between weights is an exact
//! integer comparison.
//!
//! Sweeps over independent cells (corpus graphs, replicas, percolation
//! samples) go through [`Exec`]; with the `parallel` feature they run on
//! rayon, otherwise on the calling thread. Results do not depend on the
//! mode or on the thread count.

pub mod clock;
pub mod cluster;
pub mod corpus;
pub mod domination;
mod error;
mod exec;
pub mod graph;
pub mod mcmc;
pub mod oracle;
pub mod percolation;
pub mod reflection;
pub mod rng;
pub mod stats;
pub mod union_find;

pub use clock::{pair_class, SpinConfig, WeightTable};
pub use cluster::{EdgeConfig, EdgeValue};
pub use error::{Error, Result};
pub use exec::Exec;
pub use graph::{BoxGraph, Disorder, Graph, VertexId};
