//! Dense reference implementations used as test oracles. Nothing here calls
//! into `spmat` or the sparse solver.
#![allow(dead_code, clippy::needless_range_loop)]

use muxrisk::netmodel::{IntraEdge, MultilayerNetwork};
use rand::seq::SliceRandom;
use rand::Rng;

pub type Dense = Vec<Vec<f64>>;

/// Supra adjacency assembled block by block from the network's edge lists.
pub fn dense_supra(net: &MultilayerNetwork) -> Dense {
    let n = net.n_total();
    let layers = net.n_layers();
    let mut blocks = vec![vec![vec![vec![0.0; n]; n]; layers]; layers];
    for a in 0..layers {
        for e in net.intra_edges(a) {
            blocks[a][a][e.common][e.specific] += e.weight;
            blocks[a][a][e.specific][e.common] += e.weight;
        }
        for b in 0..layers {
            if a != b {
                for i in 0..net.n_common() {
                    blocks[a][b][i][i] = 1.0;
                }
            }
        }
    }
    let mut m = vec![vec![0.0; n * layers]; n * layers];
    for a in 0..layers {
        for b in 0..layers {
            for i in 0..n {
                for j in 0..n {
                    m[a * n + i][b * n + j] = blocks[a][b][i][j];
                }
            }
        }
    }
    m
}

/// Column-normalized copy plus the zero-column mask.
pub fn dense_normalize(m: &Dense) -> (Dense, Vec<bool>) {
    let dim = m.len();
    let mut t = m.clone();
    let mut dangling = vec![false; dim];
    for j in 0..dim {
        let s: f64 = (0..dim).map(|i| m[i][j]).sum();
        if s == 0.0 {
            dangling[j] = true;
        } else {
            for row in t.iter_mut() {
                row[j] /= s;
            }
        }
    }
    (t, dangling)
}

/// The full influence matrix: a one at `(i + αN, i + βN)` for each
/// influence node `i` and every layer pair.
pub fn dense_influence_matrix(net: &MultilayerNetwork, influence: &[usize]) -> Dense {
    let n = net.n_total();
    let layers = net.n_layers();
    let mut u = vec![vec![0.0; n * layers]; n * layers];
    for &i in influence {
        for a in 0..layers {
            for b in 0..layers {
                u[i + a * n][i + b * n] = 1.0;
            }
        }
    }
    u
}

/// Teleport distribution: row sums of `u` divided by the sum of all its
/// elements. `None` means the all-ones matrix.
pub fn dense_teleport(net: &MultilayerNetwork, influence: Option<&[usize]>) -> Vec<f64> {
    let dim = net.supra_dim();
    let u = match influence {
        Some(set) => dense_influence_matrix(net, set),
        None => vec![vec![1.0; dim]; dim],
    };
    let total: f64 = u.iter().flatten().sum();
    u.iter()
        .map(|row| row.iter().sum::<f64>() / total)
        .collect()
}

/// The explicit transition matrix of the corrected walk:
/// `R = r·T + r·v·dᵀ + (1 - r)·v·1ᵀ`.
pub fn dense_transition(net: &MultilayerNetwork, v: &[f64], r: f64) -> Dense {
    let (t, dangling) = dense_normalize(&dense_supra(net));
    let dim = v.len();
    let mut rm = vec![vec![0.0; dim]; dim];
    for i in 0..dim {
        for j in 0..dim {
            let restart = if dangling[j] { r + (1.0 - r) } else { 1.0 - r };
            rm[i][j] = r * t[i][j] + restart * v[i];
        }
    }
    rm
}

/// Repeated dense multiplication from `v` until the L1 change is below
/// `tol`.
pub fn dense_power_iteration(net: &MultilayerNetwork, v: &[f64], r: f64, tol: f64) -> Vec<f64> {
    let rm = dense_transition(net, v, r);
    let dim = v.len();
    let mut p = v.to_vec();
    for _ in 0..1_000_000 {
        let next: Vec<f64> = (0..dim)
            .map(|i| (0..dim).map(|j| rm[i][j] * p[j]).sum())
            .collect();
        let change: f64 = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum();
        p = next;
        if change < tol {
            return p;
        }
    }
    panic!("dense oracle did not converge");
}

pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Flattens `per_layer_scores[i][α]` back to `i + α·N` order.
pub fn flatten_scores(net: &MultilayerNetwork, per_layer: &[Vec<f64>]) -> Vec<f64> {
    (0..net.supra_dim())
        .map(|k| {
            let (i, a) = net.unflatten(k);
            per_layer[i][a]
        })
        .collect()
}

/// Random multilayer network with 2-3 layers and at most `max_total` nodes.
/// Every common node gets 1-2 edges per layer and every specific node at
/// least one; weights are random when `weighted`.
pub fn random_network<R: Rng>(rng: &mut R, max_total: usize, weighted: bool) -> MultilayerNetwork {
    let layers = rng.gen_range(2..=3);
    let n_common = rng.gen_range(2..=(max_total / 2).max(2));
    let budget = max_total - n_common;
    let per_layer: Vec<usize> = (0..layers)
        .map(|_| rng.gen_range(1..=(budget / layers).clamp(1, n_common)))
        .collect();
    let weight = |rng: &mut R| {
        if weighted {
            rng.gen_range(0.5..3.0)
        } else {
            1.0
        }
    };

    let mut offset = n_common;
    let mut specific_labels = Vec::new();
    let mut edges = Vec::new();
    for (layer, &count) in per_layer.iter().enumerate() {
        let mut layer_edges: Vec<IntraEdge> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        let mut commons: Vec<usize> = (0..n_common).collect();
        commons.shuffle(rng);
        for s in 0..count {
            let c = commons[s % n_common];
            seen.insert((c, s));
            layer_edges.push(IntraEdge {
                common: c,
                specific: offset + s,
                weight: weight(rng),
            });
        }
        for c in 0..n_common {
            for _ in 0..rng.gen_range(1..=2) {
                let s = rng.gen_range(0..count);
                if seen.insert((c, s)) {
                    layer_edges.push(IntraEdge {
                        common: c,
                        specific: offset + s,
                        weight: weight(rng),
                    });
                }
            }
        }
        specific_labels.push((0..count).map(|s| format!("s{layer}_{s}")).collect());
        edges.push(layer_edges);
        offset += count;
    }
    MultilayerNetwork::new(
        (0..layers).map(|l| format!("layer{l}")).collect(),
        (0..n_common).map(|c| format!("c{c}")).collect(),
        specific_labels,
        edges,
    )
    .expect("generator respects network invariants")
}

/// Non-empty random subset of the common nodes.
pub fn random_influence<R: Rng>(rng: &mut R, net: &MultilayerNetwork) -> Vec<usize> {
    let mut set: Vec<usize> = (0..net.n_common()).filter(|_| rng.gen_bool(0.3)).collect();
    if set.is_empty() {
        set.push(rng.gen_range(0..net.n_common()));
    }
    set
}

/// Full-table DTW with absolute cost, kept separate from the library's
/// rolling-row implementation.
pub fn dtw_table(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len(), b.len());
    let mut d = vec![vec![f64::INFINITY; m + 1]; n + 1];
    d[0][0] = 0.0;
    for i in 1..=n {
        for j in 1..=m {
            let best = d[i - 1][j - 1].min(d[i - 1][j]).min(d[i][j - 1]);
            d[i][j] = (a[i - 1] - b[j - 1]).abs() + best;
        }
    }
    d[n][m]
}

/// Reads `node_label,node_kind,<layer>...,sum` rows of the committed
/// dense-oracle file.
pub fn read_oracle_scores(text: &str) -> Vec<(String, Vec<f64>, f64)> {
    text.lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(|line| {
            let fields: Vec<&str> = line.split(',').collect();
            let nums: Vec<f64> = fields[2..].iter().map(|x| x.parse().unwrap()).collect();
            let (sum, layers) = nums.split_last().unwrap();
            (fields[0].to_string(), layers.to_vec(), *sum)
        })
        .collect()
}
