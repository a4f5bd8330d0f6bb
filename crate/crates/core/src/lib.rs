//! Credit-risk propagation on multilayer loan networks.
//!
//! Loans are linked to their district and product in two bipartite layers
//! that share the loans as common nodes. A personalized PageRank that
//! restarts at defaulted loans scores every node; repeating this over
//! sliding monthly windows yields per-district and per-product risk series,
//! which are then clustered under dynamic time warping and compared with
//! observed default rates.
//!
//! Module map:
//! - [`spmat`]: compressed-column sparse matrices
//! - [`netmodel`]: network construction and supra adjacency
//! - [`pagerank`]: the personalized multilayer solver
//! - [`windows`]: window sequences and node score series
//! - [`tsa`]: DTW, k-means, elbow selection, pair comparison
//! - [`ingest`]: loan CSV I/O and the synthetic generator

pub mod export;
pub mod fixtures;
pub mod ingest;
pub mod month;
pub mod netmodel;
pub mod pagerank;
pub mod spmat;
pub mod tsa;
pub mod windows;

pub use ingest::{
    default_rate, generate_synthetic, parse_records, write_records, LoanRecord, RecordFilter,
    RiskySegment, SynthConfig,
};
pub use month::Month;
pub use netmodel::{build_network, Attribute, MultilayerNetwork, NodeKind, NodeRef};
pub use pagerank::{
    influence_vector, personalized_pagerank, InfluenceSpec, PageRankParams, PageRankResult,
    Teleport,
};
pub use spmat::{DanglingPolicy, SparseMatrix};
pub use tsa::{
    dtw_distance, dtw_kmeans, elbow_select, pair_comparison, ClusterResult, KMeansParams,
    PairComparison,
};
pub use windows::{
    enumerate_windows, run_sequence, NodeSeries, RunOptions, SequenceRun, Window, WindowSpec,
};

use thiserror::Error;

/// Any failure from the library, grouped by the stage that raised it.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] ingest::IngestError),
    #[error(transparent)]
    Network(#[from] netmodel::NetworkError),
    #[error(transparent)]
    PageRank(#[from] pagerank::PageRankError),
    #[error(transparent)]
    Sparse(#[from] spmat::SparseError),
    #[error(transparent)]
    Tsa(#[from] tsa::TsaError),
    #[error(transparent)]
    Window(#[from] windows::WindowError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
