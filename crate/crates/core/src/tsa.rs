//! Time-series analytics over node score series: DTW distance, k-means
//! under DTW with barycenter centroids, elbow selection of k, and
//! score-versus-default-rate comparison for a (district, product) pair.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::export::fmt_num;
use crate::ingest::{default_rate, LoanRecord, RecordFilter};
use crate::netmodel::Attribute;
use crate::windows::{NodeSeries, Window};

#[derive(Debug, Error, PartialEq)]
pub enum TsaError {
    #[error("DTW needs two non-empty series")]
    EmptySeries,
    #[error("invalid k = {k} for {n} series")]
    InvalidK { k: usize, n: usize },
    #[error("all series must share one length (found {0} and {1})")]
    LengthMismatch(usize, usize),
    #[error("elbow selection needs at least 3 candidate k values, got {0}")]
    KRangeTooSmall(usize),
    #[error("pair ({district}, {product}) does not occur in the records")]
    UnknownPair { district: String, product: String },
    #[error("no {kind} series for label {label:?}")]
    MissingSeries { kind: Attribute, label: String },
}

/// DTW with absolute-difference local cost and no warping band.
pub fn dtw_distance(a: &[f64], b: &[f64]) -> Result<f64, TsaError> {
    if a.is_empty() || b.is_empty() {
        return Err(TsaError::EmptySeries);
    }
    // two rolling rows over b; index 0 is the virtual boundary column
    let mut prev = vec![f64::INFINITY; b.len() + 1];
    let mut curr = vec![f64::INFINITY; b.len() + 1];
    prev[0] = 0.0;
    for &x in a {
        curr[0] = f64::INFINITY;
        for (j, &y) in b.iter().enumerate() {
            let best = prev[j].min(prev[j + 1]).min(curr[j]);
            curr[j + 1] = (x - y).abs() + best;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[b.len()])
}

/// DTW cost together with one optimal alignment path, as `(i, j)` pairs
/// from `(0, 0)` to `(a.len() - 1, b.len() - 1)`.
pub fn dtw_path(a: &[f64], b: &[f64]) -> Result<(f64, Vec<(usize, usize)>), TsaError> {
    if a.is_empty() || b.is_empty() {
        return Err(TsaError::EmptySeries);
    }
    let (n, m) = (a.len(), b.len());
    let w = m + 1;
    let mut acc = vec![f64::INFINITY; (n + 1) * w];
    acc[0] = 0.0;
    for i in 1..=n {
        for j in 1..=m {
            let best = acc[(i - 1) * w + j - 1]
                .min(acc[(i - 1) * w + j])
                .min(acc[i * w + j - 1]);
            acc[i * w + j] = (a[i - 1] - b[j - 1]).abs() + best;
        }
    }
    let mut path = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n, m);
    while i > 0 && j > 0 {
        path.push((i - 1, j - 1));
        let diag = acc[(i - 1) * w + j - 1];
        let up = acc[(i - 1) * w + j];
        let left = acc[i * w + j - 1];
        if diag <= up && diag <= left {
            i -= 1;
            j -= 1;
        } else if up <= left {
            i -= 1;
        } else {
            j -= 1;
        }
    }
    path.reverse();
    Ok((acc[n * w + m], path))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Barycenter refinement passes per centroid update.
    pub dba_iterations: usize,
}

impl KMeansParams {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            max_iter: 100,
            dba_iterations: 10,
        }
    }
}

/// Clustering of raw (unnormalized) series.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// Cluster id per input series.
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Total DTW distance of every series to its centroid.
    pub inertia: f64,
    /// Inertia after seeding and after every outer iteration.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assignment {
    pub kind: Attribute,
    pub label: String,
    pub cluster: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterResult {
    pub k: usize,
    pub assignments: Vec<Assignment>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub seed: u64,
}

impl ClusterResult {
    pub fn cluster_of(&self, label: &str) -> Option<usize> {
        self.assignments
            .iter()
            .find(|a| a.label == label)
            .map(|a| a.cluster)
    }
}

fn check_lengths<S: AsRef<[f64]>>(data: &[S]) -> Result<usize, TsaError> {
    let len = data.first().map_or(0, |s| s.as_ref().len());
    for s in data {
        if s.as_ref().len() != len {
            return Err(TsaError::LengthMismatch(len, s.as_ref().len()));
        }
    }
    if len == 0 {
        return Err(TsaError::EmptySeries);
    }
    Ok(len)
}

fn dtw(a: &[f64], b: &[f64]) -> f64 {
    dtw_distance(a, b).expect("lengths checked")
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// k-means++ seeding with squared-DTW weights. If every remaining point
/// coincides with a chosen centroid, the lowest unused index is taken.
fn seed_centroids<S: AsRef<[f64]>>(data: &[S], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = data.len();
    let mut chosen = vec![rng.gen_range(0..n)];
    let mut nearest: Vec<f64> = data
        .iter()
        .map(|s| dtw(s.as_ref(), data[chosen[0]].as_ref()))
        .collect();
    while chosen.len() < k {
        let total: f64 = nearest.iter().map(|d| d * d).sum();
        let next = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, d) in nearest.iter().enumerate() {
                acc += d * d;
                if *d > 0.0 && acc >= target {
                    pick = Some(i);
                    break;
                }
            }
            pick.unwrap_or_else(|| {
                nearest
                    .iter()
                    .rposition(|&d| d > 0.0)
                    .expect("positive mass")
            })
        } else {
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
        for (i, s) in data.iter().enumerate() {
            nearest[i] = nearest[i].min(dtw(s.as_ref(), data[next].as_ref()));
        }
    }
    chosen
        .into_iter()
        .map(|i| data[i].as_ref().to_vec())
        .collect()
}

struct State {
    assignments: Vec<usize>,
    distances: Vec<f64>,
    centroids: Vec<Vec<f64>>,
}

impl State {
    fn inertia(&self, k: usize) -> f64 {
        let mut per_cluster = vec![0.0; k];
        for (&c, &d) in self.assignments.iter().zip(&self.distances) {
            per_cluster[c] += d;
        }
        per_cluster.iter().sum()
    }

    /// Nearest-centroid assignment. A point stays put when its current
    /// centroid is among the nearest; otherwise ties go to the lowest id.
    fn reassign<S: AsRef<[f64]> + Sync>(&mut self, data: &[S], keep_current: bool) -> bool {
        let centroids = &self.centroids;
        let rows: Vec<Vec<f64>> = data
            .par_iter()
            .map(|s| centroids.iter().map(|c| dtw(s.as_ref(), c)).collect())
            .collect();
        let mut changed = false;
        for (i, row) in rows.iter().enumerate() {
            let (mut best, mut best_d) = (0, row[0]);
            for (c, &d) in row.iter().enumerate().skip(1) {
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            if keep_current && row[self.assignments[i]] <= best_d {
                best = self.assignments[i];
                best_d = row[best];
            }
            changed |= best != self.assignments[i];
            self.assignments[i] = best;
            self.distances[i] = best_d;
        }
        changed
    }

    /// Re-seeds each empty cluster with the point farthest from its own
    /// centroid, taken from a cluster that keeps at least one member.
    fn repair_empty<S: AsRef<[f64]>>(&mut self, data: &[S]) -> bool {
        let k = self.centroids.len();
        let mut repaired = false;
        loop {
            let mut sizes = vec![0usize; k];
            for &c in &self.assignments {
                sizes[c] += 1;
            }
            let Some(empty) = sizes.iter().position(|&s| s == 0) else {
                return repaired;
            };
            let donor = (0..data.len())
                .filter(|&i| sizes[self.assignments[i]] >= 2)
                .fold(None, |best: Option<usize>, i| match best {
                    Some(b) if self.distances[b] >= self.distances[i] => Some(b),
                    _ => Some(i),
                })
                .expect("k <= n leaves a cluster with two members");
            self.centroids[empty] = data[donor].as_ref().to_vec();
            self.assignments[donor] = empty;
            self.distances[donor] = 0.0;
            repaired = true;
        }
    }

    /// DTW barycenter averaging. With absolute-difference cost the best
    /// value for a fixed alignment is the median of the aligned points, so
    /// each pass uses medians and is kept only if the cluster cost does not
    /// rise.
    fn update_centroids<S: AsRef<[f64]> + Sync>(&mut self, data: &[S], dba_iterations: usize) {
        let k = self.centroids.len();
        let members: Vec<Vec<usize>> = (0..k)
            .map(|c| {
                (0..data.len())
                    .filter(|&i| self.assignments[i] == c)
                    .collect()
            })
            .collect();
        let updated: Vec<(Vec<f64>, Vec<f64>)> = members
            .par_iter()
            .zip(&self.centroids)
            .map(|(idx, centroid)| {
                let mut centroid = centroid.clone();
                let mut dists: Vec<f64> = idx
                    .iter()
                    .map(|&i| dtw(&centroid, data[i].as_ref()))
                    .collect();
                let mut cost: f64 = dists.iter().sum();
                for _ in 0..dba_iterations {
                    let mut buckets = vec![Vec::new(); centroid.len()];
                    for &i in idx {
                        let series = data[i].as_ref();
                        let (_, path) = dtw_path(&centroid, series).expect("lengths checked");
                        for (t, u) in path {
                            buckets[t].push(series[u]);
                        }
                    }
                    let candidate: Vec<f64> = buckets.iter_mut().map(|b| median(b)).collect();
                    let cand_dists: Vec<f64> = idx
                        .iter()
                        .map(|&i| dtw(&candidate, data[i].as_ref()))
                        .collect();
                    let cand_cost: f64 = cand_dists.iter().sum();
                    if cand_cost > cost || candidate == centroid {
                        break;
                    }
                    centroid = candidate;
                    dists = cand_dists;
                    cost = cand_cost;
                }
                (centroid, dists)
            })
            .collect();
        for (c, (centroid, dists)) in updated.into_iter().enumerate() {
            self.centroids[c] = centroid;
            for (&i, d) in members[c].iter().zip(dists) {
                self.distances[i] = d;
            }
        }
    }
}

/// Lloyd-style k-means under DTW. Stops at an assignment fixpoint, after
/// `max_iter` outer iterations, or if an iteration would raise inertia (in
/// which case the previous state is kept).
pub fn kmeans_dtw<S: AsRef<[f64]> + Sync>(
    data: &[S],
    params: &KMeansParams,
) -> Result<Clustering, TsaError> {
    let n = data.len();
    if params.k == 0 || params.k > n {
        return Err(TsaError::InvalidK { k: params.k, n });
    }
    check_lengths(data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let centroids = seed_centroids(data, params.k, &mut rng);
    let mut state = State {
        assignments: vec![0; n],
        distances: vec![0.0; n],
        centroids,
    };
    state.reassign(data, false);
    state.repair_empty(data);
    let mut inertia = state.inertia(params.k);
    let mut history = vec![inertia];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < params.max_iter {
        iterations += 1;
        let previous = (
            state.assignments.clone(),
            state.distances.clone(),
            state.centroids.clone(),
        );
        state.update_centroids(data, params.dba_iterations);
        let changed = state.reassign(data, true);
        let repaired = state.repair_empty(data);
        let next = state.inertia(params.k);
        if next > inertia {
            (state.assignments, state.distances, state.centroids) = previous;
            converged = true;
            break;
        }
        inertia = next;
        history.push(inertia);
        if !changed && !repaired {
            converged = true;
            break;
        }
    }

    Ok(Clustering {
        assignments: state.assignments,
        centroids: state.centroids,
        inertia,
        inertia_history: history,
        iterations,
        converged,
    })
}

/// Clusters node series by shape and level.
pub fn dtw_kmeans(series: &[NodeSeries], params: &KMeansParams) -> Result<ClusterResult, TsaError> {
    let data: Vec<&[f64]> = series.iter().map(|s| s.values.as_slice()).collect();
    let c = kmeans_dtw(&data, params)?;
    Ok(ClusterResult {
        k: params.k,
        assignments: series
            .iter()
            .zip(&c.assignments)
            .map(|(s, &cluster)| Assignment {
                kind: s.kind,
                label: s.label.clone(),
                cluster,
            })
            .collect(),
        centroids: c.centroids,
        inertia: c.inertia,
        inertia_history: c.inertia_history,
        iterations: c.iterations,
        converged: c.converged,
        seed: params.seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElbowResult {
    pub chosen_k: usize,
    /// `(k, inertia)` for every candidate.
    pub curve: Vec<(usize, f64)>,
    /// Set when no point stands off the chord (a straight or flat curve);
    /// `chosen_k` then falls back to the smallest candidate.
    pub degenerate: bool,
}

/// Knee of a curve: the point farthest from the chord joining its ends,
/// measured after scaling both axes to `[0, 1]`.
pub fn knee_point(curve: &[(usize, f64)]) -> Result<(usize, bool), TsaError> {
    if curve.len() < 3 {
        return Err(TsaError::KRangeTooSmall(curve.len()));
    }
    let (k0, y0) = curve[0];
    let (k1, y1) = curve[curve.len() - 1];
    let dx = (k1 as f64 - k0 as f64).abs();
    let dy = (y1 - y0).abs();
    if dx == 0.0 || dy == 0.0 {
        return Ok((k0, true));
    }
    let scaled = |(k, y): (usize, f64)| ((k as f64 - k0 as f64) / dx, (y - y1) / dy);
    // chord from (0, sy0) to (1, sy1) in scaled space
    let (_, sy0) = scaled(curve[0]);
    let (_, sy1) = scaled(curve[curve.len() - 1]);
    let norm = (1.0 + (sy1 - sy0).powi(2)).sqrt();
    let mut best = (k0, 0.0);
    for &point in &curve[1..curve.len() - 1] {
        let (x, y) = scaled(point);
        let chord_y = sy0 + (sy1 - sy0) * x;
        let distance = (y - chord_y).abs() / norm;
        if distance > best.1 {
            best = (point.0, distance);
        }
    }
    if best.1 < 1e-9 {
        Ok((k0, true))
    } else {
        Ok((best.0, false))
    }
}

/// Runs [`dtw_kmeans`] for every k in `k_range` with the same seed and
/// picks the knee of the inertia curve.
pub fn elbow_select(
    series: &[NodeSeries],
    k_range: std::ops::RangeInclusive<usize>,
    seed: u64,
    max_iter: usize,
) -> Result<ElbowResult, TsaError> {
    let ks: Vec<usize> = k_range.collect();
    if ks.len() < 3 {
        return Err(TsaError::KRangeTooSmall(ks.len()));
    }
    let n = series.len();
    if let Some(&bad) = ks.iter().find(|&&k| k == 0 || k > n) {
        return Err(TsaError::InvalidK { k: bad, n });
    }
    let curve: Vec<(usize, f64)> = ks
        .par_iter()
        .map(|&k| {
            let params = KMeansParams {
                max_iter,
                ..KMeansParams::new(k, seed)
            };
            dtw_kmeans(series, &params).map(|r| (k, r.inertia))
        })
        .collect::<Result<_, _>>()?;
    let (chosen_k, degenerate) = knee_point(&curve)?;
    Ok(ElbowResult {
        chosen_k,
        curve,
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairComparison {
    pub district: String,
    pub product: String,
    pub series_district: Vec<f64>,
    pub series_product: Vec<f64>,
    pub series_sum: Vec<f64>,
    /// Defaults over loans matching both labels per window; 0 when none match.
    pub default_rate_series: Vec<f64>,
}

/// Lines up the district and product score series with their sum and the
/// pair's per-window default rate.
pub fn pair_comparison(
    records: &[LoanRecord],
    windows: &[Window],
    series: &[NodeSeries],
    district: &str,
    product: &str,
) -> Result<PairComparison, TsaError> {
    if !records
        .iter()
        .any(|r| r.district == district && r.product == product)
    {
        return Err(TsaError::UnknownPair {
            district: district.to_string(),
            product: product.to_string(),
        });
    }
    let find = |kind: Attribute, label: &str| {
        series
            .iter()
            .find(|s| s.kind == kind && s.label == label)
            .ok_or_else(|| TsaError::MissingSeries {
                kind,
                label: label.to_string(),
            })
    };
    let d = find(Attribute::District, district)?;
    let p = find(Attribute::Product, product)?;
    for s in [d, p] {
        if s.values.len() != windows.len() {
            return Err(TsaError::LengthMismatch(windows.len(), s.values.len()));
        }
    }
    let default_rate_series = windows
        .iter()
        .map(|w| {
            default_rate(
                records,
                &RecordFilter {
                    district: Some(district),
                    product: Some(product),
                    months: Some((w.start, w.end)),
                },
            )
            .rate
        })
        .collect();
    Ok(PairComparison {
        district: district.to_string(),
        product: product.to_string(),
        series_sum: d.values.iter().zip(&p.values).map(|(a, b)| a + b).collect(),
        series_district: d.values.clone(),
        series_product: p.values.clone(),
        default_rate_series,
    })
}

fn csv_writer<W: Write>(writer: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer)
}

/// `label,node_kind,cluster_id`
pub fn write_clusters_csv<W: Write>(writer: W, result: &ClusterResult) -> csv::Result<()> {
    let mut w = csv_writer(writer);
    w.write_record(["label", "node_kind", "cluster_id"])?;
    for a in &result.assignments {
        w.write_record([a.label.as_str(), a.kind.name(), &a.cluster.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `k,inertia`
pub fn write_inertia_csv<W: Write>(writer: W, curve: &[(usize, f64)]) -> csv::Result<()> {
    let mut w = csv_writer(writer);
    w.write_record(["k", "inertia"])?;
    for &(k, inertia) in curve {
        w.write_record([k.to_string(), fmt_num(inertia)])?;
    }
    w.flush()?;
    Ok(())
}

/// `window_index,score_district,score_product,score_sum,default_rate`
pub fn write_pair_csv<W: Write>(writer: W, cmp: &PairComparison) -> csv::Result<()> {
    let mut w = csv_writer(writer);
    w.write_record([
        "window_index",
        "score_district",
        "score_product",
        "score_sum",
        "default_rate",
    ])?;
    for i in 0..cmp.series_sum.len() {
        w.write_record([
            i.to_string(),
            fmt_num(cmp.series_district[i]),
            fmt_num(cmp.series_product[i]),
            fmt_num(cmp.series_sum[i]),
            fmt_num(cmp.default_rate_series[i]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::month::Month;

    fn node(kind: Attribute, label: &str, values: Vec<f64>) -> NodeSeries {
        let n = values.len();
        NodeSeries {
            kind,
            label: label.to_string(),
            values,
            windows: 0..n,
        }
    }

    #[test]
    fn dtw_examples() {
        assert_eq!(
            dtw_distance(&[1.0, 5.0, 2.0], &[1.0, 5.0, 2.0]).unwrap(),
            0.0
        );
        assert_eq!(
            dtw_distance(&[1.0, 2.0, 3.0], &[1.0, 2.0, 2.0, 3.0]).unwrap(),
            0.0
        );
        assert_eq!(dtw_distance(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 2.0);
        assert_eq!(dtw_distance(&[], &[1.0]), Err(TsaError::EmptySeries));
        assert_eq!(dtw_distance(&[1.0], &[]), Err(TsaError::EmptySeries));
    }

    #[test]
    fn path_cost_matches_distance() {
        let a = [0.0, 1.0, 3.0, 2.0, 2.0];
        let b = [0.0, 2.0, 3.0, 1.0];
        let (cost, path) = dtw_path(&a, &b).unwrap();
        assert_eq!(cost, dtw_distance(&a, &b).unwrap());
        assert_eq!(path.first(), Some(&(0, 0)));
        assert_eq!(path.last(), Some(&(4, 3)));
        let along: f64 = path.iter().map(|&(i, j)| (a[i] - b[j]).abs()).sum();
        assert!((along - cost).abs() < 1e-12);
        for step in path.windows(2) {
            let (di, dj) = (step[1].0 - step[0].0, step[1].1 - step[0].1);
            assert!(di <= 1 && dj <= 1 && di + dj >= 1);
        }
    }

    #[test]
    fn single_cluster() {
        let series = vec![
            node(Attribute::Product, "a", vec![0.0, 1.0, 2.0]),
            node(Attribute::Product, "b", vec![1.0, 1.0, 1.0]),
            node(Attribute::Product, "c", vec![4.0, 2.0, 0.0]),
        ];
        let r = dtw_kmeans(&series, &KMeansParams::new(1, 5)).unwrap();
        assert!(r.assignments.iter().all(|a| a.cluster == 0));
        let expected: f64 = series
            .iter()
            .map(|s| dtw_distance(&s.values, &r.centroids[0]).unwrap())
            .sum();
        assert!((r.inertia - expected).abs() < 1e-12);
    }

    #[test]
    fn invalid_inputs() {
        let series = vec![node(Attribute::Product, "a", vec![0.0, 1.0])];
        assert_eq!(
            dtw_kmeans(&series, &KMeansParams::new(2, 0)),
            Err(TsaError::InvalidK { k: 2, n: 1 })
        );
        assert_eq!(
            dtw_kmeans(&series, &KMeansParams::new(0, 0)),
            Err(TsaError::InvalidK { k: 0, n: 1 })
        );
        let uneven = vec![
            node(Attribute::Product, "a", vec![0.0, 1.0]),
            node(Attribute::Product, "b", vec![0.0]),
        ];
        assert_eq!(
            dtw_kmeans(&uneven, &KMeansParams::new(1, 0)),
            Err(TsaError::LengthMismatch(2, 1))
        );
    }

    #[test]
    fn identical_series_get_repaired_clusters() {
        let series: Vec<_> = (0..5)
            .map(|i| node(Attribute::District, &format!("d{i}"), vec![3.0; 6]))
            .collect();
        let r = dtw_kmeans(&series, &KMeansParams::new(3, 9)).unwrap();
        for c in 0..3 {
            assert!(
                r.assignments.iter().any(|a| a.cluster == c),
                "cluster {c} empty"
            );
        }
        assert_eq!(r.inertia, 0.0);
    }

    #[test]
    fn knee_examples() {
        let curve: Vec<_> = [100.0, 50.0, 20.0, 18.0, 17.0, 16.0]
            .into_iter()
            .enumerate()
            .map(|(i, y)| (i + 1, y))
            .collect();
        assert_eq!(knee_point(&curve).unwrap(), (3, false));
        let linear: Vec<_> = (1..=6).map(|k| (k, 60.0 - 10.0 * k as f64)).collect();
        assert_eq!(knee_point(&linear).unwrap(), (1, true));
        let flat: Vec<_> = (1..=4).map(|k| (k, 0.0)).collect();
        assert_eq!(knee_point(&flat).unwrap(), (1, true));
        assert_eq!(knee_point(&curve[..2]), Err(TsaError::KRangeTooSmall(2)));
    }

    #[test]
    fn elbow_range_errors() {
        let series: Vec<_> = (0..4)
            .map(|i| node(Attribute::Product, &i.to_string(), vec![i as f64; 3]))
            .collect();
        assert_eq!(
            elbow_select(&series, 1..=2, 0, 10),
            Err(TsaError::KRangeTooSmall(2))
        );
        assert_eq!(
            elbow_select(&series, 2..=5, 0, 10),
            Err(TsaError::InvalidK { k: 5, n: 4 })
        );
    }

    fn loan(id: usize, month: Month, district: &str, product: &str, defaulted: bool) -> LoanRecord {
        LoanRecord {
            loan_id: format!("L{id}"),
            grant_month: month,
            district: district.into(),
            product: product.into(),
            defaulted,
        }
    }

    #[test]
    fn pair_rates_and_absence() {
        let m0 = Month::new(2000, 1).unwrap();
        let m1 = m0.offset(1);
        let mut records: Vec<_> = (0..10).map(|i| loan(i, m0, "D", "P", i < 3)).collect();
        records.push(loan(10, m1, "D", "Q", true));
        records.push(loan(11, m1, "E", "P", false));
        let windows = vec![
            Window {
                index: 0,
                start: m0,
                end: m0,
            },
            Window {
                index: 1,
                start: m1,
                end: m1,
            },
        ];
        let series = vec![
            node(Attribute::District, "D", vec![0.2, 0.0]),
            node(Attribute::Product, "P", vec![0.1, 0.0]),
        ];
        let cmp = pair_comparison(&records, &windows, &series, "D", "P").unwrap();
        assert_eq!(cmp.default_rate_series, vec![0.3, 0.0]);
        assert_eq!(cmp.series_sum, vec![0.2 + 0.1, 0.0]);
        assert_eq!(
            pair_comparison(&records, &windows, &series, "E", "Q"),
            Err(TsaError::UnknownPair {
                district: "E".into(),
                product: "Q".into()
            })
        );
        assert!(matches!(
            pair_comparison(&records, &windows, &series, "D", "Q"),
            Err(TsaError::MissingSeries { .. })
        ));
        let mut buf = Vec::new();
        write_pair_csv(&mut buf, &cmp).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "window_index,score_district,score_product,score_sum,default_rate\n\
             0,0.2,0.1,0.3,0.3\n1,0,0,0,0\n"
        );
    }
}
