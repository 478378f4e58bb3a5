//! Differentiable persistent homology, topological-contrastive losses and
//! kernel two-sample tests for detecting adversarial batches of embeddings,
//! plus a Poisson-cluster-process simulator of scattered logits.

pub mod cli;
pub mod error;
pub mod grad;
pub mod harness;
pub mod io;
pub mod mmdtest;
pub mod pcp;
pub mod persistence;
pub mod pointcloud;
pub mod rng;
pub mod stats;
pub mod tcloss;

pub use error::{Error, Result};
pub use persistence::{PersistenceDiagram, PersistencePair};
pub use pointcloud::{DistanceMatrix, PointCloud};
