//! Multilayer bipartite networks built from loan records.
//!
//! Every record becomes a common node present in all layers. Each layer
//! adds one specific node per distinct attribute label and links every
//! common node to the specific node carrying its label. Node indices are
//! global: the `N_c` common nodes come first, followed by the specific
//! nodes of layer 0, layer 1, and so on. In the flattened supra matrix,
//! flat index `i + α·N` is node `i` in layer `α`.

use std::collections::HashMap;
use std::io::Write;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::LoanRecord;
use crate::spmat::SparseMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("cannot build a network from zero records")]
    EmptyRecords,
    #[error("at least one layer is required")]
    NoLayers,
    #[error("record {loan_id:?} has an empty {attribute} label")]
    MissingAttribute { loan_id: String, attribute: String },
    #[error("invalid network: {0}")]
    Invalid(String),
}

/// Record attribute that defines one layer's specific nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attribute {
    District,
    Product,
}

impl Attribute {
    /// The two-layer setup used throughout: district first, product second.
    pub const DEFAULT_LAYERS: [Attribute; 2] = [Attribute::District, Attribute::Product];

    pub fn name(self) -> &'static str {
        match self {
            Attribute::District => "district",
            Attribute::Product => "product",
        }
    }

    pub fn extract(self, record: &LoanRecord) -> &str {
        match self {
            Attribute::District => &record.district,
            Attribute::Product => &record.product,
        }
    }
}

impl std::str::FromStr for Attribute {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "district" => Ok(Attribute::District),
            "product" => Ok(Attribute::Product),
            other => Err(format!(
                "unknown attribute {other:?} (expected district or product)"
            )),
        }
    }
}

impl std::fmt::Display for Attribute {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Common,
    Specific { layer: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeRef {
    pub kind: NodeKind,
    pub label: String,
    pub index: usize,
}

/// Undirected edge between a common node and a specific node of one layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntraEdge {
    pub common: usize,
    pub specific: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultilayerNetwork {
    layer_names: Vec<String>,
    n_common: usize,
    nodes: Vec<NodeRef>,
    specific_ranges: Vec<Range<usize>>,
    intra_edges: Vec<Vec<IntraEdge>>,
}

impl MultilayerNetwork {
    /// Assembles a network from labels and per-layer edge lists, checking
    /// every structural invariant. Edge endpoints are global node indices.
    pub fn new(
        layer_names: Vec<String>,
        common_labels: Vec<String>,
        specific_labels: Vec<Vec<String>>,
        intra_edges: Vec<Vec<IntraEdge>>,
    ) -> Result<Self, NetworkError> {
        let invalid = |m: String| Err(NetworkError::Invalid(m));
        let n_layers = layer_names.len();
        if n_layers == 0 {
            return Err(NetworkError::NoLayers);
        }
        if specific_labels.len() != n_layers || intra_edges.len() != n_layers {
            return invalid("specific labels and edges must be given for every layer".into());
        }
        if common_labels.is_empty() {
            return invalid("network has no common nodes".into());
        }

        let n_common = common_labels.len();
        let mut nodes = Vec::new();
        let mut unique = std::collections::HashSet::new();
        for label in common_labels {
            if !unique.insert(label.clone()) {
                return invalid(format!("duplicate common label {label:?}"));
            }
            nodes.push(NodeRef {
                kind: NodeKind::Common,
                index: nodes.len(),
                label,
            });
        }
        let mut specific_ranges = Vec::with_capacity(n_layers);
        for (layer, labels) in specific_labels.into_iter().enumerate() {
            let start = nodes.len();
            let mut unique = std::collections::HashSet::new();
            for label in labels {
                if !unique.insert(label.clone()) {
                    return invalid(format!("duplicate label {label:?} in layer {layer}"));
                }
                nodes.push(NodeRef {
                    kind: NodeKind::Specific { layer },
                    index: nodes.len(),
                    label,
                });
            }
            specific_ranges.push(start..nodes.len());
        }

        for (layer, edges) in intra_edges.iter().enumerate() {
            let range = &specific_ranges[layer];
            let mut degree = vec![0usize; range.len()];
            for e in edges {
                if e.common >= n_common {
                    return invalid(format!("layer {layer}: {} is not a common node", e.common));
                }
                if !range.contains(&e.specific) {
                    return invalid(format!(
                        "layer {layer}: {} is not a specific node of this layer",
                        e.specific
                    ));
                }
                if !(e.weight.is_finite() && e.weight > 0.0) {
                    return invalid(format!(
                        "layer {layer}: edge weight {} must be positive",
                        e.weight
                    ));
                }
                degree[e.specific - range.start] += 1;
            }
            if let Some(k) = degree.iter().position(|&d| d == 0) {
                return invalid(format!(
                    "layer {layer}: specific node {:?} has no edges",
                    nodes[range.start + k].label
                ));
            }
        }

        Ok(Self {
            layer_names,
            n_common,
            nodes,
            specific_ranges,
            intra_edges,
        })
    }

    pub fn n_layers(&self) -> usize {
        self.layer_names.len()
    }

    pub fn n_common(&self) -> usize {
        self.n_common
    }

    /// Total node count `N`, common plus all specific nodes.
    pub fn n_total(&self) -> usize {
        self.nodes.len()
    }

    /// Side length of the supra matrix, `N·L`.
    pub fn supra_dim(&self) -> usize {
        self.n_total() * self.n_layers()
    }

    pub fn layer_names(&self) -> &[String] {
        &self.layer_names
    }

    pub fn nodes(&self) -> &[NodeRef] {
        &self.nodes
    }

    pub fn common_nodes(&self) -> &[NodeRef] {
        &self.nodes[..self.n_common]
    }

    pub fn specific_nodes(&self, layer: usize) -> &[NodeRef] {
        &self.nodes[self.specific_ranges[layer].clone()]
    }

    pub fn intra_edges(&self, layer: usize) -> &[IntraEdge] {
        &self.intra_edges[layer]
    }

    pub fn flat_index(&self, node: usize, layer: usize) -> usize {
        debug_assert!(node < self.n_total() && layer < self.n_layers());
        node + layer * self.n_total()
    }

    /// Inverse of [`flat_index`](Self::flat_index): `(node, layer)`.
    pub fn unflatten(&self, flat: usize) -> (usize, usize) {
        (flat % self.n_total(), flat / self.n_total())
    }

    /// Same topology with every intra-layer weight multiplied by `factor`.
    pub fn with_scaled_weights(&self, factor: f64) -> Result<Self, NetworkError> {
        let mut scaled = self.clone();
        for e in scaled.intra_edges.iter_mut().flatten() {
            e.weight *= factor;
        }
        if scaled
            .intra_edges
            .iter()
            .flatten()
            .any(|e| !(e.weight.is_finite() && e.weight > 0.0))
        {
            return Err(NetworkError::Invalid(format!(
                "scale factor {factor} yields invalid weights"
            )));
        }
        Ok(scaled)
    }

    /// Flattened `(N·L)×(N·L)` supra adjacency matrix.
    ///
    /// Diagonal block `α` holds layer `α`'s bipartite edges in both
    /// directions over all `N` nodes. Every off-diagonal block is the
    /// partial identity linking common node `i < N_c` to itself.
    pub fn supra_adjacency(&self) -> SparseMatrix {
        let n = self.n_total();
        let layers = self.n_layers();
        let edge_count: usize = self.intra_edges.iter().map(Vec::len).sum();
        let mut triplets =
            Vec::with_capacity(2 * edge_count + layers * layers.saturating_sub(1) * self.n_common);
        for (alpha, edges) in self.intra_edges.iter().enumerate() {
            let off = alpha * n;
            for e in edges {
                triplets.push((e.common + off, e.specific + off, e.weight));
                triplets.push((e.specific + off, e.common + off, e.weight));
            }
        }
        for alpha in 0..layers {
            for beta in (0..layers).filter(|&b| b != alpha) {
                for i in 0..self.n_common {
                    triplets.push((i + alpha * n, i + beta * n, 1.0));
                }
            }
        }
        SparseMatrix::from_triplets(n * layers, n * layers, &triplets)
            .expect("network invariants guarantee valid triplets")
    }

    /// CSV edge list with columns `layer,src_label,dst_label,weight`.
    pub fn write_edge_list<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        w.write_record(["layer", "src_label", "dst_label", "weight"])?;
        for (layer, edges) in self.intra_edges.iter().enumerate() {
            for e in edges {
                w.write_record([
                    self.layer_names[layer].as_str(),
                    self.nodes[e.common].label.as_str(),
                    self.nodes[e.specific].label.as_str(),
                    &crate::export::fmt_num(e.weight),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// CSV node table with columns `index,kind,layer,label`. The layer
    /// column is empty for common nodes.
    pub fn write_node_table<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        w.write_record(["index", "kind", "layer", "label"])?;
        for node in &self.nodes {
            let (kind, layer) = match node.kind {
                NodeKind::Common => ("common", ""),
                NodeKind::Specific { layer } => ("specific", self.layer_names[layer].as_str()),
            };
            w.write_record([
                node.index.to_string().as_str(),
                kind,
                layer,
                node.label.as_str(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Builds one common node per record and one layer per attribute.
/// Specific nodes appear in first-appearance order; every intra edge has
/// weight 1.
pub fn build_network(
    records: &[LoanRecord],
    layers: &[Attribute],
) -> Result<MultilayerNetwork, NetworkError> {
    if records.is_empty() {
        return Err(NetworkError::EmptyRecords);
    }
    if layers.is_empty() {
        return Err(NetworkError::NoLayers);
    }
    let n_common = records.len();

    let mut specific_labels: Vec<Vec<String>> = Vec::with_capacity(layers.len());
    let mut local_edges: Vec<Vec<(usize, usize)>> = Vec::with_capacity(layers.len());
    for &attr in layers {
        let mut index_of: HashMap<&str, usize> = HashMap::new();
        let mut labels = Vec::new();
        let mut edges = Vec::with_capacity(n_common);
        for (c, record) in records.iter().enumerate() {
            let label = attr.extract(record);
            if label.is_empty() {
                return Err(NetworkError::MissingAttribute {
                    loan_id: record.loan_id.clone(),
                    attribute: attr.name().to_string(),
                });
            }
            let k = *index_of.entry(label).or_insert_with(|| {
                labels.push(label.to_string());
                labels.len() - 1
            });
            edges.push((c, k));
        }
        specific_labels.push(labels);
        local_edges.push(edges);
    }

    let mut offset = n_common;
    let mut intra_edges = Vec::with_capacity(layers.len());
    for (labels, edges) in specific_labels.iter().zip(&local_edges) {
        intra_edges.push(
            edges
                .iter()
                .map(|&(c, k)| IntraEdge {
                    common: c,
                    specific: offset + k,
                    weight: 1.0,
                })
                .collect(),
        );
        offset += labels.len();
    }

    MultilayerNetwork::new(
        layers.iter().map(|a| a.name().to_string()).collect(),
        records.iter().map(|r| r.loan_id.clone()).collect(),
        specific_labels,
        intra_edges,
    )
}
