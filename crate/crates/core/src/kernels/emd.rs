//! Earth Mover's Distance between normalized histograms.
//!
//! `emd_1d` is the production path for the per-channel histograms used by the
//! pipeline; it assumes unit-spaced bins on a line. `emd_general` solves the
//! full transportation problem for an arbitrary ground distance and is kept
//! exact so the metric properties can be tested meaningfully.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{check_normalized, KernelError};

/// Ground distance between histogram bins: a symmetric non-negative matrix
/// with zero diagonal.
#[derive(Debug, Clone)]
pub struct GroundDistance {
    n: usize,
    d: Vec<Vec<f64>>,
}

impl GroundDistance {
    pub fn new(d: Vec<Vec<f64>>) -> Result<Self, KernelError> {
        let n = d.len();
        for row in &d {
            if row.len() != n {
                return Err(KernelError::InvalidGroundDistance { n });
            }
        }
        for i in 0..n {
            if d[i][i] != 0.0 {
                return Err(KernelError::InvalidGroundDistance { n });
            }
            for j in 0..n {
                let v = d[i][j];
                if !v.is_finite() || v < 0.0 || v != d[j][i] {
                    return Err(KernelError::InvalidGroundDistance { n });
                }
            }
        }
        Ok(Self { n, d })
    }

    /// Unit-spaced bins on a line: `d[a][b] = |a - b|`.
    pub fn linear(n: usize) -> Self {
        let d = (0..n)
            .map(|a| (0..n).map(|b| (a as f64 - b as f64).abs()).collect())
            .collect();
        Self { n, d }
    }

    pub fn bins(&self) -> usize {
        self.n
    }

    pub fn at(&self, a: usize, b: usize) -> f64 {
        self.d[a][b]
    }
}

/// EMD between two normalized histograms on unit-spaced 1-D bins:
/// the sum of absolute CDF differences, which equals the transportation
/// optimum for the linear ground distance.
pub fn emd_1d(h1: &[f64], h2: &[f64]) -> Result<f64, KernelError> {
    if h1.len() != h2.len() {
        return Err(KernelError::DimensionMismatch {
            left: h1.len(),
            right: h2.len(),
        });
    }
    check_normalized(h1)?;
    check_normalized(h2)?;
    let mut carry = 0.0;
    let mut total = 0.0;
    for (&a, &b) in h1.iter().zip(h2) {
        carry += a - b;
        total += carry.abs();
    }
    Ok(total)
}

/// Exact EMD between two normalized histograms under an arbitrary ground
/// distance, solved as a transportation problem with successive shortest
/// paths. Bins with zero mass on both sides do not participate.
pub fn emd_general(h1: &[f64], h2: &[f64], g: &GroundDistance) -> Result<f64, KernelError> {
    if h1.len() != h2.len() {
        return Err(KernelError::DimensionMismatch {
            left: h1.len(),
            right: h2.len(),
        });
    }
    if h1.len() != g.bins() {
        return Err(KernelError::DimensionMismatch {
            left: h1.len(),
            right: g.bins(),
        });
    }
    check_normalized(h1)?;
    check_normalized(h2)?;

    let supplies: Vec<(usize, f64)> = h1
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > 0.0)
        .map(|(i, &m)| (i, m))
        .collect();
    let demands: Vec<(usize, f64)> = h2
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > 0.0)
        .map(|(j, &m)| (j, m))
        .collect();
    if supplies.is_empty() || demands.is_empty() {
        return Ok(0.0);
    }

    // Node layout: 0 = source, 1..=ns supplies, ns+1..=ns+nd demands, last = sink.
    let ns = supplies.len();
    let nd = demands.len();
    let source = 0;
    let sink = ns + nd + 1;
    let mut net = FlowNetwork::new(ns + nd + 2);
    for (k, &(_, m)) in supplies.iter().enumerate() {
        net.add_edge(source, 1 + k, m, 0.0);
    }
    for (k, &(_, m)) in demands.iter().enumerate() {
        net.add_edge(1 + ns + k, sink, m, 0.0);
    }
    for (a, &(i, _)) in supplies.iter().enumerate() {
        for (b, &(j, _)) in demands.iter().enumerate() {
            net.add_edge(1 + a, 1 + ns + b, f64::INFINITY, g.at(i, j));
        }
    }

    Ok(net.min_cost_flow(source, sink))
}

struct Arc {
    to: usize,
    rev: usize,
    residual: f64,
    cost: f64,
}

struct FlowNetwork {
    adj: Vec<Vec<Arc>>,
}

#[derive(PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on distance; node index breaks ties deterministically.
        other
            .dist
            .total_cmp(&self.dist)
            .then(other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl FlowNetwork {
    fn new(n: usize) -> Self {
        Self {
            adj: (0..n).map(|_| Vec::new()).collect(),
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: f64, cost: f64) {
        let rev_from = self.adj[to].len();
        let rev_to = self.adj[from].len();
        self.adj[from].push(Arc {
            to,
            rev: rev_from,
            residual: cap,
            cost,
        });
        self.adj[to].push(Arc {
            to: from,
            rev: rev_to,
            residual: 0.0,
            cost: -cost,
        });
    }

    /// Saturating min-cost flow via successive shortest paths with
    /// Johnson potentials. All original costs are non-negative, so plain
    /// Dijkstra applies throughout.
    fn min_cost_flow(&mut self, source: usize, sink: usize) -> f64 {
        const RESIDUAL_EPS: f64 = 1e-15;
        let n = self.adj.len();
        let mut potential = vec![0.0f64; n];
        let mut total_cost = 0.0;
        loop {
            let mut dist = vec![f64::INFINITY; n];
            let mut prev: Vec<Option<(usize, usize)>> = vec![None; n];
            let mut done = vec![false; n];
            let mut heap = BinaryHeap::new();
            dist[source] = 0.0;
            heap.push(HeapEntry {
                dist: 0.0,
                node: source,
            });
            while let Some(HeapEntry { node, .. }) = heap.pop() {
                if done[node] {
                    continue;
                }
                done[node] = true;
                for (idx, arc) in self.adj[node].iter().enumerate() {
                    if arc.residual <= RESIDUAL_EPS {
                        continue;
                    }
                    let reduced = arc.cost + potential[node] - potential[arc.to];
                    let cand = dist[node] + reduced.max(0.0);
                    if cand < dist[arc.to] {
                        dist[arc.to] = cand;
                        prev[arc.to] = Some((node, idx));
                        heap.push(HeapEntry {
                            dist: cand,
                            node: arc.to,
                        });
                    }
                }
            }
            if dist[sink].is_infinite() {
                break;
            }
            for v in 0..n {
                if dist[v].is_finite() {
                    potential[v] += dist[v];
                }
            }
            let mut bottleneck = f64::INFINITY;
            let mut v = sink;
            while let Some((u, idx)) = prev[v] {
                bottleneck = bottleneck.min(self.adj[u][idx].residual);
                v = u;
            }
            let mut v = sink;
            while let Some((u, idx)) = prev[v] {
                let rev = self.adj[u][idx].rev;
                self.adj[u][idx].residual -= bottleneck;
                self.adj[v][rev].residual += bottleneck;
                total_cost += bottleneck * self.adj[u][idx].cost;
                v = u;
            }
        }
        total_cost
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn emd_1d_identical_is_zero() {
        let h = vec![0.2, 0.3, 0.5];
        assert_eq!(emd_1d(&h, &h).unwrap(), 0.0);
    }

    #[test]
    fn emd_1d_unit_mass_one_bin() {
        assert!((emd_1d(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn emd_1d_half_mass() {
        // CDFs (0.5, 1) vs (0, 1)
        assert!((emd_1d(&[0.5, 0.5], &[0.0, 1.0]).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn emd_1d_rejects_unnormalized() {
        assert!(matches!(
            emd_1d(&[0.5, 0.1], &[0.5, 0.5]),
            Err(KernelError::Unnormalized { .. })
        ));
    }

    #[test]
    fn emd_general_identical_is_zero() {
        let h = vec![0.25, 0.25, 0.5];
        let g = GroundDistance::linear(3);
        assert!(emd_general(&h, &h, &g).unwrap().abs() < 1e-12);
    }

    #[test]
    fn emd_general_forced_single_move() {
        let g = GroundDistance::new(vec![vec![0.0, 3.0], vec![3.0, 0.0]]).unwrap();
        let got = emd_general(&[1.0, 0.0], &[0.0, 1.0], &g).unwrap();
        assert!((got - 3.0).abs() < 1e-12);
    }

    #[test]
    fn emd_general_dimension_mismatch() {
        let g = GroundDistance::linear(3);
        assert!(matches!(
            emd_general(&[1.0, 0.0], &[0.0, 1.0], &g),
            Err(KernelError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ground_distance_rejects_asymmetry() {
        let d = vec![vec![0.0, 1.0], vec![2.0, 0.0]];
        assert!(matches!(
            GroundDistance::new(d),
            Err(KernelError::InvalidGroundDistance { .. })
        ));
    }

    #[test]
    fn ground_distance_rejects_nonzero_diagonal() {
        let d = vec![vec![0.5]];
        assert!(matches!(
            GroundDistance::new(d),
            Err(KernelError::InvalidGroundDistance { .. })
        ));
    }

    #[test]
    fn emd_1d_matches_general_on_linear_ground() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let bins = rng.gen_range(2..=12);
            let g = GroundDistance::linear(bins);
            let h1 = random_hist(&mut rng, bins);
            let h2 = random_hist(&mut rng, bins);
            let fast = emd_1d(&h1, &h2).unwrap();
            let exact = emd_general(&h1, &h2, &g).unwrap();
            assert!(
                (fast - exact).abs() < 1e-9,
                "1-D {fast} vs transport {exact}"
            );
        }
    }

    fn random_hist(rng: &mut impl rand::Rng, bins: usize) -> Vec<f64> {
        let mut h: Vec<f64> = (0..bins).map(|_| rng.gen_range(0.0..1.0)).collect();
        if rng.gen_bool(0.3) {
            let z = rng.gen_range(0..bins);
            h[z] = 0.0;
        }
        let total: f64 = h.iter().sum();
        if total == 0.0 {
            h[0] = 1.0;
            return h;
        }
        for v in &mut h {
            *v /= total;
        }
        h
    }
}
