//! Sliding monthly windows over loan records and the per-window solve.
//!
//! Each window keeps the loans granted inside it, builds their network,
//! restarts the walk at the loans that defaulted, and records every
//! specific node's aggregated score. Scores are then regrouped into one
//! series per district and per product spanning all windows.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::ops::Range;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::export::fmt_num;
use crate::ingest::LoanRecord;
use crate::month::Month;
use crate::netmodel::{build_network, Attribute, MultilayerNetwork, NetworkError};
use crate::pagerank::{
    personalized_pagerank, InfluenceSpec, PageRankError, PageRankParams, PageRankResult, Teleport,
};

#[derive(Debug, Error)]
pub enum WindowError {
    #[error("invalid window spec: {0}")]
    InvalidSpec(String),
    #[error("records span {span} months, shorter than the {window}-month window")]
    SpanTooShort { span: i32, window: u32 },
    #[error("no records to window")]
    NoRecords,
    #[error("window {index} ({start}..={end}) contains no records")]
    EmptyWindow {
        index: usize,
        start: Month,
        end: Month,
    },
    #[error("window {index}: {source}")]
    Network { index: usize, source: NetworkError },
    #[error("window {index}: {source}")]
    PageRank { index: usize, source: PageRankError },
    #[error("series file line {line}: {message}")]
    SeriesFormat { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WindowSpec {
    pub window_months: u32,
    pub step_months: u32,
    pub start_month: Month,
    /// Inclusive.
    pub end_month: Month,
}

impl WindowSpec {
    pub const DEFAULT_WINDOW_MONTHS: u32 = 60;
    pub const DEFAULT_STEP_MONTHS: u32 = 1;

    pub fn new(
        window_months: u32,
        step_months: u32,
        start_month: Month,
        end_month: Month,
    ) -> Result<Self, WindowError> {
        if window_months == 0 || step_months == 0 {
            return Err(WindowError::InvalidSpec(
                "window_months and step_months must be at least 1".into(),
            ));
        }
        let span = end_month.months_since(start_month) + 1;
        if span < window_months as i32 {
            return Err(WindowError::SpanTooShort {
                span,
                window: window_months,
            });
        }
        Ok(Self {
            window_months,
            step_months,
            start_month,
            end_month,
        })
    }

    /// Spec covering the first through last grant month in `records`.
    pub fn covering(
        records: &[LoanRecord],
        window_months: u32,
        step_months: u32,
    ) -> Result<Self, WindowError> {
        let first = records.iter().map(|r| r.grant_month).min();
        let last = records.iter().map(|r| r.grant_month).max();
        match (first, last) {
            (Some(first), Some(last)) => Self::new(window_months, step_months, first, last),
            _ => Err(WindowError::NoRecords),
        }
    }

    pub fn span_months(&self) -> u32 {
        (self.end_month.months_since(self.start_month) + 1) as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Window {
    pub index: usize,
    pub start: Month,
    /// Inclusive.
    pub end: Month,
}

impl Window {
    pub fn contains(&self, month: Month) -> bool {
        self.start <= month && month <= self.end
    }
}

/// `floor((span - window) / step) + 1` windows in chronological order.
pub fn enumerate_windows(spec: &WindowSpec) -> Vec<Window> {
    let count = (spec.span_months() - spec.window_months) / spec.step_months + 1;
    (0..count as usize)
        .map(|index| {
            let start = spec
                .start_month
                .offset(index as i32 * spec.step_months as i32);
            Window {
                index,
                start,
                end: start.offset(spec.window_months as i32 - 1),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowStatus {
    Solved,
    /// No defaulted loans, so there is no influence set; scores are 0.
    SkippedNoDefaulters,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowDiagnostics {
    pub index: usize,
    pub start: Month,
    pub end: Month,
    pub n_loans: usize,
    pub n_defaulted: usize,
    pub status: WindowStatus,
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct WindowOutcome {
    pub window: Window,
    pub n_loans: usize,
    pub n_defaulted: usize,
    pub network: MultilayerNetwork,
    /// `None` when the window was skipped.
    pub result: Option<PageRankResult>,
}

impl WindowOutcome {
    pub fn status(&self) -> WindowStatus {
        match self.result {
            Some(_) => WindowStatus::Solved,
            None => WindowStatus::SkippedNoDefaulters,
        }
    }

    pub fn diagnostics(&self) -> WindowDiagnostics {
        WindowDiagnostics {
            index: self.window.index,
            start: self.window.start,
            end: self.window.end,
            n_loans: self.n_loans,
            n_defaulted: self.n_defaulted,
            status: self.status(),
            iterations: self.result.as_ref().map_or(0, |r| r.iterations),
            final_residual: self.result.as_ref().map_or(0.0, |r| r.final_residual),
            converged: self.result.as_ref().is_none_or(|r| r.converged),
        }
    }

    /// Aggregated score of the specific node `label` in the layer built from
    /// `kind`, or 0 if it is absent or the window was skipped.
    pub fn specific_score(&self, kind: Attribute, label: &str) -> f64 {
        let (Some(result), Some(layer)) = (
            &self.result,
            self.network
                .layer_names()
                .iter()
                .position(|n| n == kind.name()),
        ) else {
            return 0.0;
        };
        self.network
            .specific_nodes(layer)
            .iter()
            .find(|n| n.label == label)
            .map_or(0.0, |n| result.node_scores[n.index])
    }
}

/// Score trajectory of one district or product across the window sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeSeries {
    pub kind: Attribute,
    pub label: String,
    /// One value per window; 0 where the node is absent.
    pub values: Vec<f64>,
    pub windows: Range<usize>,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub layers: Vec<Attribute>,
    /// Number of windows solved concurrently; 1 keeps everything on the
    /// calling thread.
    pub jobs: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            layers: Attribute::DEFAULT_LAYERS.to_vec(),
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SequenceRun {
    pub spec: WindowSpec,
    pub windows: Vec<WindowOutcome>,
    pub series: Vec<NodeSeries>,
}

impl SequenceRun {
    pub fn diagnostics(&self) -> Vec<WindowDiagnostics> {
        self.windows
            .iter()
            .map(WindowOutcome::diagnostics)
            .collect()
    }

    pub fn skipped(&self) -> Vec<usize> {
        self.windows
            .iter()
            .filter(|w| w.result.is_none())
            .map(|w| w.window.index)
            .collect()
    }

    pub fn series_of(&self, kind: Attribute) -> Vec<&NodeSeries> {
        self.series.iter().filter(|s| s.kind == kind).collect()
    }

    pub fn find_series(&self, kind: Attribute, label: &str) -> Option<&NodeSeries> {
        self.series
            .iter()
            .find(|s| s.kind == kind && s.label == label)
    }

    pub fn window_starts(&self) -> Vec<Month> {
        self.windows.iter().map(|w| w.window.start).collect()
    }
}

/// Builds and solves one window. Loans keep their input order as common
/// nodes; the influence set is every loan in the window flagged as defaulted.
pub fn solve_window(
    records: &[LoanRecord],
    window: Window,
    layers: &[Attribute],
    params: &PageRankParams,
) -> Result<WindowOutcome, WindowError> {
    let members: Vec<LoanRecord> = records
        .iter()
        .filter(|r| window.contains(r.grant_month))
        .cloned()
        .collect();
    if members.is_empty() {
        return Err(WindowError::EmptyWindow {
            index: window.index,
            start: window.start,
            end: window.end,
        });
    }
    let network = build_network(&members, layers).map_err(|source| WindowError::Network {
        index: window.index,
        source,
    })?;
    let defaulters: Vec<usize> = members
        .iter()
        .enumerate()
        .filter(|(_, r)| r.defaulted)
        .map(|(i, _)| i)
        .collect();
    let n_defaulted = defaulters.len();
    let result = if defaulters.is_empty() {
        None
    } else {
        let spec = InfluenceSpec::new(
            defaulters,
            format!("defaulted loans in window {}", window.index),
        )
        .expect("non-empty influence set");
        Some(
            personalized_pagerank(&network, &Teleport::Influence(spec), params).map_err(
                |source| WindowError::PageRank {
                    index: window.index,
                    source,
                },
            )?,
        )
    };
    Ok(WindowOutcome {
        window,
        n_loans: members.len(),
        n_defaulted,
        network,
        result,
    })
}

/// Solves every window of `spec` and assembles one [`NodeSeries`] per
/// distinct label of each layer attribute, in first-appearance order over
/// the full record list.
pub fn run_sequence(
    records: &[LoanRecord],
    spec: &WindowSpec,
    params: &PageRankParams,
    options: &RunOptions,
) -> Result<SequenceRun, WindowError> {
    params
        .validate()
        .map_err(|source| WindowError::PageRank { index: 0, source })?;
    let windows = enumerate_windows(spec);
    let solve = |w: &Window| solve_window(records, *w, &options.layers, params);
    let outcomes: Vec<WindowOutcome> = if options.jobs <= 1 {
        windows.iter().map(solve).collect::<Result<_, _>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.jobs)
            .build()
            .map_err(|e| WindowError::InvalidSpec(format!("thread pool: {e}")))?;
        pool.install(|| windows.par_iter().map(solve).collect::<Result<_, _>>())?
    };
    let series = assemble_series(records, &outcomes, &options.layers);
    Ok(SequenceRun {
        spec: *spec,
        windows: outcomes,
        series,
    })
}

fn assemble_series(
    records: &[LoanRecord],
    outcomes: &[WindowOutcome],
    layers: &[Attribute],
) -> Vec<NodeSeries> {
    let n_windows = outcomes.len();
    let mut series = Vec::new();
    let mut slot: HashMap<(Attribute, &str), usize> = HashMap::new();
    for &kind in layers {
        for r in records {
            let label = kind.extract(r);
            slot.entry((kind, label)).or_insert_with(|| {
                series.push(NodeSeries {
                    kind,
                    label: label.to_string(),
                    values: vec![0.0; n_windows],
                    windows: 0..n_windows,
                });
                series.len() - 1
            });
        }
    }
    for (w, outcome) in outcomes.iter().enumerate() {
        let Some(result) = &outcome.result else {
            continue;
        };
        for (layer, &kind) in layers.iter().enumerate() {
            for node in outcome.network.specific_nodes(layer) {
                if let Some(&k) = slot.get(&(kind, node.label.as_str())) {
                    series[k].values[w] = result.node_scores[node.index];
                }
            }
        }
    }
    series
}

/// Long-format export: `window_index,window_start,node_kind,label,score`,
/// ordered by window and then by series.
pub fn write_series_csv<W: Write>(writer: W, run: &SequenceRun) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record([
        "window_index",
        "window_start",
        "node_kind",
        "label",
        "score",
    ])?;
    for (k, outcome) in run.windows.iter().enumerate() {
        let index = outcome.window.index.to_string();
        let start = outcome.window.start.to_string();
        for s in &run.series {
            w.write_record([
                index.as_str(),
                start.as_str(),
                s.kind.name(),
                s.label.as_str(),
                &fmt_num(s.values[k]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Series read back from a long-format CSV, plus each window's start month.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    pub window_starts: Vec<Month>,
    pub series: Vec<NodeSeries>,
}

impl SeriesTable {
    pub fn of_kind(&self, kind: Attribute) -> Vec<NodeSeries> {
        self.series
            .iter()
            .filter(|s| s.kind == kind)
            .cloned()
            .collect()
    }

    pub fn find(&self, kind: Attribute, label: &str) -> Option<&NodeSeries> {
        self.series
            .iter()
            .find(|s| s.kind == kind && s.label == label)
    }
}

/// Parses the output of [`write_series_csv`]. Every series must cover every
/// window exactly once.
pub fn read_series_csv<R: Read>(reader: R) -> Result<SeriesTable, WindowError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let bad = |line: u64, message: String| WindowError::SeriesFormat { line, message };
    let header = rdr.headers()?.clone();
    if header.iter().ne([
        "window_index",
        "window_start",
        "node_kind",
        "label",
        "score",
    ]) {
        return Err(bad(
            1,
            format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()),
        ));
    }
    let mut starts: Vec<Month> = Vec::new();
    let mut order: Vec<(Attribute, String)> = Vec::new();
    let mut index: HashMap<(Attribute, String), usize> = HashMap::new();
    let mut cells: Vec<(usize, usize, f64, u64)> = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != 5 {
            return Err(bad(line, "expected 5 fields".into()));
        }
        let w: usize = row[0]
            .parse()
            .map_err(|_| bad(line, format!("bad window_index {:?}", &row[0])))?;
        let start: Month = row[1].parse().map_err(|e| bad(line, format!("{e}")))?;
        let kind: Attribute = row[2].parse().map_err(|e| bad(line, e))?;
        let score: f64 = row[4]
            .parse()
            .map_err(|_| bad(line, format!("bad score {:?}", &row[4])))?;
        if !(score.is_finite() && score >= 0.0) {
            return Err(bad(
                line,
                format!("score {score} must be finite and non-negative"),
            ));
        }
        match w.cmp(&starts.len()) {
            std::cmp::Ordering::Less if starts[w] != start => {
                return Err(bad(line, format!("window {w} start mismatch")))
            }
            std::cmp::Ordering::Equal => starts.push(start),
            std::cmp::Ordering::Greater => {
                return Err(bad(
                    line,
                    format!("window {w} appears before window {}", starts.len()),
                ))
            }
            _ => {}
        }
        let key = (kind, row[3].to_string());
        let k = *index.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            order.len() - 1
        });
        cells.push((k, w, score, line));
    }
    let n = starts.len();
    let mut values = vec![vec![f64::NAN; n]; order.len()];
    for (k, w, score, line) in cells {
        if !values[k][w].is_nan() {
            return Err(bad(line, "duplicate (window, series) row".into()));
        }
        values[k][w] = score;
    }
    if let Some(k) = values.iter().position(|v| v.iter().any(|x| x.is_nan())) {
        return Err(bad(
            0,
            format!("series {:?} is missing windows", order[k].1),
        ));
    }
    let series = order
        .into_iter()
        .zip(values)
        .map(|((kind, label), values)| NodeSeries {
            kind,
            label,
            values,
            windows: 0..n,
        })
        .collect();
    Ok(SeriesTable {
        window_starts: starts,
        series,
    })
}
