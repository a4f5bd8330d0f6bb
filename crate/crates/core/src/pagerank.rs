//! Personalized multilayer PageRank.
//!
//! The walker follows the column-normalized supra adjacency `T` with
//! probability `r` and teleports to the restart distribution `v` with
//! probability `1 - r`. Columns of `T` with no out-edges (specific nodes
//! seen from a foreign layer) are dangling; their mass is sent through `v`
//! as well, which keeps every iterate a probability vector:
//!
//! ```text
//! p <- r·T·p + (r·dangling_mass(p) + 1 - r)·v
//! ```
//!
//! The dense transition tensor is never built.

use std::collections::BTreeSet;
use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::export::fmt_num;
use crate::netmodel::{MultilayerNetwork, NodeKind};
use crate::spmat::{DanglingPolicy, SparseError, SparseMatrix};

#[derive(Debug, Error, PartialEq)]
pub enum PageRankError {
    #[error("invalid PageRank parameters: {0}")]
    InvalidParams(String),
    #[error("invalid influence set: {0}")]
    InvalidInfluence(String),
    #[error("teleport vector has length {actual}, expected {expected}")]
    TeleportLength { expected: usize, actual: usize },
}

/// Common nodes where the walker restarts (the defaulted loans).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfluenceSpec {
    nodes: BTreeSet<usize>,
    pub description: String,
}

impl InfluenceSpec {
    pub fn new(
        nodes: impl IntoIterator<Item = usize>,
        description: impl Into<String>,
    ) -> Result<Self, PageRankError> {
        let nodes: BTreeSet<usize> = nodes.into_iter().collect();
        if nodes.is_empty() {
            return Err(PageRankError::InvalidInfluence(
                "influence set is empty".into(),
            ));
        }
        Ok(Self {
            nodes,
            description: description.into(),
        })
    }

    pub fn nodes(&self) -> &BTreeSet<usize> {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn validate_for(&self, net: &MultilayerNetwork) -> Result<(), PageRankError> {
        match self.nodes.iter().next_back() {
            None => Err(PageRankError::InvalidInfluence(
                "influence set is empty".into(),
            )),
            Some(&max) if max >= net.n_common() => Err(PageRankError::InvalidInfluence(format!(
                "node {max} is not a common node (N_c = {})",
                net.n_common()
            ))),
            Some(_) => Ok(()),
        }
    }
}

/// Restart distribution selector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Teleport {
    /// Jump to any node in any layer with equal probability.
    Uniform,
    Influence(InfluenceSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PageRankParams {
    /// Probability of following an edge rather than teleporting.
    pub restart: f64,
    /// Stop once the L1 change between iterates falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Opt-in chunked parallel mat-vec. `None` keeps the solve sequential
    /// and bitwise reproducible.
    pub parallel_chunks: Option<usize>,
}

impl Default for PageRankParams {
    fn default() -> Self {
        Self {
            restart: 0.85,
            tolerance: 1e-9,
            max_iterations: 1000,
            parallel_chunks: None,
        }
    }
}

impl PageRankParams {
    pub fn validate(&self) -> Result<(), PageRankError> {
        if !(self.restart > 0.0 && self.restart < 1.0) {
            return Err(PageRankError::InvalidParams(format!(
                "restart probability {} must lie in (0, 1)",
                self.restart
            )));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(PageRankError::InvalidParams(format!(
                "tolerance {} must be positive",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(PageRankError::InvalidParams(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Column-stochastic supra transition matrix plus its dangling-column mask.
#[derive(Debug, Clone)]
pub struct TransitionOperator {
    pub matrix: SparseMatrix,
    pub dangling: Vec<bool>,
}

impl TransitionOperator {
    pub fn from_network(net: &MultilayerNetwork) -> Self {
        Self::from_adjacency(&net.supra_adjacency()).expect("supra adjacency is non-negative")
    }

    /// Normalizes any square non-negative adjacency matrix.
    pub fn from_adjacency(adjacency: &SparseMatrix) -> Result<Self, SparseError> {
        if adjacency.n_rows() != adjacency.n_cols() {
            return Err(SparseError::DimensionMismatch {
                expected: adjacency.n_cols(),
                actual: adjacency.n_rows(),
            });
        }
        let (matrix, dangling) = adjacency.column_normalize(DanglingPolicy::UniformRestartFlag)?;
        Ok(Self { matrix, dangling })
    }

    pub fn dim(&self) -> usize {
        self.matrix.n_cols()
    }
}

/// Fixed point of the corrected walk over flat `(node, layer)` indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Stationary {
    pub distribution: Vec<f64>,
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PageRankResult {
    /// `per_layer_scores[i][α]`: probability of the walker at node `i` in layer `α`.
    pub per_layer_scores: Vec<Vec<f64>>,
    /// Layer sums of `per_layer_scores`.
    pub node_scores: Vec<f64>,
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
}

impl PageRankResult {
    pub fn total_mass(&self) -> f64 {
        self.node_scores.iter().sum()
    }
}

/// Restart distribution for a uniform teleport: `1/(N·L)` everywhere.
pub fn uniform_vector(net: &MultilayerNetwork) -> Vec<f64> {
    let dim = net.supra_dim();
    vec![1.0 / dim as f64; dim]
}

/// Restart distribution induced by the influence matrix.
///
/// The influence matrix has a one at `(i + α·N, i + β·N)` for every
/// influence node `i` and every layer pair, so it holds `|V_I|·L²` ones.
/// Normalizing the teleport term by that total puts `1/(|V_I|·L)` on each
/// copy of each influence node.
pub fn influence_vector(
    net: &MultilayerNetwork,
    spec: &InfluenceSpec,
) -> Result<Vec<f64>, PageRankError> {
    spec.validate_for(net)?;
    let mut v = vec![0.0; net.supra_dim()];
    let weight = 1.0 / (spec.len() * net.n_layers()) as f64;
    for &i in spec.nodes() {
        for layer in 0..net.n_layers() {
            v[net.flat_index(i, layer)] = weight;
        }
    }
    Ok(v)
}

/// Power iteration from `p₀ = teleport` until the L1 change drops below
/// `params.tolerance` or `params.max_iterations` is reached.
pub fn solve_stationary(
    op: &TransitionOperator,
    teleport: &[f64],
    params: &PageRankParams,
) -> Result<Stationary, PageRankError> {
    params.validate()?;
    let dim = op.dim();
    if teleport.len() != dim {
        return Err(PageRankError::TeleportLength {
            expected: dim,
            actual: teleport.len(),
        });
    }
    let r = params.restart;
    let mut p = teleport.to_vec();
    let mut next = vec![0.0; dim];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < params.max_iterations {
        iterations += 1;
        match params.parallel_chunks {
            Some(chunks) => op.matrix.par_matvec_into(&p, &mut next, chunks),
            None => op.matrix.matvec_into(&p, &mut next),
        }
        .expect("operator and iterate dimensions agree");
        let dangling_mass: f64 = p
            .iter()
            .zip(&op.dangling)
            .filter(|(_, &d)| d)
            .map(|(x, _)| x)
            .sum();
        let restart_mass = r * dangling_mass + (1.0 - r);
        residual = 0.0;
        for ((n, &v), &old) in next.iter_mut().zip(teleport).zip(&p) {
            *n = r * *n + restart_mass * v;
            residual += (*n - old).abs();
        }
        std::mem::swap(&mut p, &mut next);
        if residual < params.tolerance {
            converged = true;
            break;
        }
    }

    Ok(Stationary {
        distribution: p,
        iterations,
        final_residual: residual,
        converged,
    })
}

/// Solves the walk on `net` and aggregates the stationary distribution per
/// node. A run that hits `max_iterations` is returned with `converged = false`.
pub fn personalized_pagerank(
    net: &MultilayerNetwork,
    teleport: &Teleport,
    params: &PageRankParams,
) -> Result<PageRankResult, PageRankError> {
    params.validate()?;
    let v = match teleport {
        Teleport::Uniform => uniform_vector(net),
        Teleport::Influence(spec) => influence_vector(net, spec)?,
    };
    let op = TransitionOperator::from_network(net);
    let stationary = solve_stationary(&op, &v, params)?;
    Ok(aggregate(net, stationary))
}

fn aggregate(net: &MultilayerNetwork, s: Stationary) -> PageRankResult {
    let n = net.n_total();
    let layers = net.n_layers();
    let per_layer_scores: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..layers).map(|a| s.distribution[i + a * n]).collect())
        .collect();
    let node_scores = per_layer_scores
        .iter()
        .map(|row| row.iter().sum())
        .collect();
    PageRankResult {
        per_layer_scores,
        node_scores,
        iterations: s.iterations,
        final_residual: s.final_residual,
        converged: s.converged,
    }
}

/// Kind column used in score exports: `common` for loans, the layer name
/// for specific nodes.
pub fn node_kind_label(net: &MultilayerNetwork, node: usize) -> &str {
    match net.nodes()[node].kind {
        NodeKind::Common => "common",
        NodeKind::Specific { layer } => &net.layer_names()[layer],
    }
}

/// One row per node and layer plus a `sum` row per node, columns
/// `node_label,node_kind,layer_or_sum,score`.
pub fn write_scores_csv<W: Write>(
    writer: W,
    net: &MultilayerNetwork,
    result: &PageRankResult,
) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(["node_label", "node_kind", "layer_or_sum", "score"])?;
    for (i, node) in net.nodes().iter().enumerate() {
        let kind = node_kind_label(net, i);
        for (layer, name) in net.layer_names().iter().enumerate() {
            w.write_record([
                node.label.as_str(),
                kind,
                name.as_str(),
                &fmt_num(result.per_layer_scores[i][layer]),
            ])?;
        }
        w.write_record([
            node.label.as_str(),
            kind,
            "sum",
            &fmt_num(result.node_scores[i]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// JSON form of [`write_scores_csv`] with solver diagnostics attached.
pub fn scores_json(net: &MultilayerNetwork, result: &PageRankResult) -> serde_json::Value {
    let round = |x: f64| fmt_num(x).parse::<f64>().expect("formatted float parses");
    let scores: Vec<serde_json::Value> = net
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, node)| {
            serde_json::json!({
                "node_label": node.label,
                "node_kind": node_kind_label(net, i),
                "per_layer": result.per_layer_scores[i].iter().map(|&x| round(x)).collect::<Vec<_>>(),
                "sum": round(result.node_scores[i]),
            })
        })
        .collect();
    serde_json::json!({
        "layers": net.layer_names(),
        "iterations": result.iterations,
        "final_residual": round(result.final_residual),
        "converged": result.converged,
        "scores": scores,
    })
}
