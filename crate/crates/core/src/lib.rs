//! Hierarchically consistent classification with a tunable prompt surrogate.
//!
//! The crate covers the whole pipeline: taxonomy trees ([`taxonomy`]), the
//! matrix-based treecut sampler and its brute-force oracle ([`treecut`]),
//! cosine-softmax classification over arbitrary label sets ([`classifier`]),
//! the node-centric and dynamic-treecut objectives with analytic gradients
//! ([`objectives`]), SGD training ([`trainer`]), leaf accuracy / HCA / MTA
//! ([`metrics`]), file formats ([`io`]), synthetic fixtures ([`synth`]) and
//! the CLI ([`cli`]).

pub mod classifier;
pub mod cli;
pub mod error;
pub mod io;
pub mod metrics;
pub mod objectives;
pub mod rng;
pub mod synth;
pub mod taxonomy;
pub mod trainer;
pub mod treecut;

pub use classifier::{EmbeddingTable, PromptParams, SampleSet};
pub use error::{Error, Result};
pub use rng::Rng64;
pub use taxonomy::{LabelSet, LabelSetKind, TaxonomyTree};
pub use treecut::{KeepFlags, MatrixBundle};
