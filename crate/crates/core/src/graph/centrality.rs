// SPDX-License-Identifier: Apache-2.0

//! Betweenness and harmonic centrality on unweighted directed graphs.
//!
//! Both are sums of per-source contributions from one breadth-first search
//! per source. Sources are processed in fixed-size chunks; each chunk sums
//! its sources in order and chunk results are added in chunk order, so the
//! scores are bit-identical for any number of worker threads.

use std::collections::VecDeque;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Graphs up to this many nodes get exact betweenness by default.
pub const EXACT_NODE_LIMIT: usize = 50_000;
/// Pivot count used by the default policy above [`EXACT_NODE_LIMIT`].
pub const DEFAULT_SAMPLE_COUNT: usize = 2048;

const CHUNK: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BetweennessMode {
    Exact,
    /// Brandes accumulation from `samples` uniformly drawn source pivots,
    /// scaled by `n / samples`.
    Approximate { samples: usize, seed: u64 },
}

impl BetweennessMode {
    /// Exact up to [`EXACT_NODE_LIMIT`] nodes, sampled above.
    pub fn auto(node_count: usize, seed: u64) -> Self {
        if node_count <= EXACT_NODE_LIMIT {
            Self::Exact
        } else {
            Self::Approximate { samples: DEFAULT_SAMPLE_COUNT, seed }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Centralities {
    pub betweenness: Vec<f64>,
    pub harmonic: Vec<f64>,
}

struct Workspace {
    dist: Vec<i64>,
    sigma: Vec<f64>,
    delta: Vec<f64>,
    order: Vec<usize>,
    queue: VecDeque<usize>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            dist: vec![-1; n],
            sigma: vec![0.0; n],
            delta: vec![0.0; n],
            order: Vec::with_capacity(n),
            queue: VecDeque::with_capacity(n),
        }
    }

    fn bfs(&mut self, succ: &[Vec<usize>], s: usize) {
        for &v in &self.order {
            self.dist[v] = -1;
            self.sigma[v] = 0.0;
            self.delta[v] = 0.0;
        }
        self.order.clear();
        self.dist[s] = 0;
        self.sigma[s] = 1.0;
        self.queue.push_back(s);
        while let Some(v) = self.queue.pop_front() {
            self.order.push(v);
            let dv = self.dist[v];
            for &w in &succ[v] {
                if self.dist[w] < 0 {
                    self.dist[w] = dv + 1;
                    self.queue.push_back(w);
                }
                if self.dist[w] == dv + 1 {
                    self.sigma[w] += self.sigma[v];
                }
            }
        }
    }

    /// Adds the dependencies of source `s` onto `acc`.
    fn accumulate(&mut self, succ: &[Vec<usize>], s: usize, acc: &mut [f64]) {
        self.bfs(succ, s);
        for &v in self.order.iter().rev() {
            let dv = self.dist[v];
            let mut d = 0.0;
            for &w in &succ[v] {
                if self.dist[w] == dv + 1 {
                    d += self.sigma[v] / self.sigma[w] * (1.0 + self.delta[w]);
                }
            }
            self.delta[v] = d;
            if v != s {
                acc[v] += d;
            }
        }
    }
}

fn chunked_sum(
    n: usize,
    sources: &[usize],
    per_source: impl Fn(&mut Workspace, usize, &mut [f64]) + Sync,
) -> Vec<f64> {
    let partials: Vec<Vec<f64>> = sources
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut ws = Workspace::new(n);
            let mut acc = vec![0.0; n];
            for &s in chunk {
                per_source(&mut ws, s, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; n];
    for p in partials {
        for (t, x) in total.iter_mut().zip(p) {
            *t += x;
        }
    }
    total
}

/// `C_bc(v) = sum over ordered pairs (x, y), x != v != y, of
/// sigma(x, y | v) / sigma(x, y)`, not normalized.
pub fn betweenness(succ: &[Vec<usize>], mode: BetweennessMode) -> Vec<f64> {
    let n = succ.len();
    let (sources, scale): (Vec<usize>, f64) = match mode {
        BetweennessMode::Exact => ((0..n).collect(), 1.0),
        BetweennessMode::Approximate { samples, seed } => {
            assert!(samples >= 1, "approximate betweenness needs at least one pivot");
            if samples >= n {
                ((0..n).collect(), 1.0)
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut pivots = sample(&mut rng, n, samples).into_vec();
                pivots.sort_unstable();
                (pivots, n as f64 / samples as f64)
            }
        }
    };
    let mut scores = chunked_sum(n, &sources, |ws, s, acc| ws.accumulate(succ, s, acc));
    if scale != 1.0 {
        for x in &mut scores {
            *x *= scale;
        }
    }
    scores
}

/// `C_hc(v) = sum over u != v of 1 / d(u, v)`; unreachable pairs add 0.
pub fn harmonic(succ: &[Vec<usize>]) -> Vec<f64> {
    let n = succ.len();
    let sources: Vec<usize> = (0..n).collect();
    chunked_sum(n, &sources, |ws, s, acc| {
        ws.bfs(succ, s);
        for &v in &ws.order {
            if v != s {
                acc[v] += 1.0 / ws.dist[v] as f64;
            }
        }
    })
}

/// [`betweenness`] on a circuit graph.
pub fn betweenness_centrality(g: &super::CircuitGraph, mode: BetweennessMode) -> Vec<f64> {
    betweenness(g.successors(), mode)
}

/// [`harmonic`] on a circuit graph.
pub fn harmonic_centrality(g: &super::CircuitGraph) -> Vec<f64> {
    harmonic(g.successors())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_of_three() {
        let succ = vec![vec![1], vec![2], vec![]];
        assert_eq!(betweenness(&succ, BetweennessMode::Exact), vec![0.0, 1.0, 0.0]);
        let h = harmonic(&succ);
        assert_eq!(h, vec![0.0, 1.0, 1.5]);
    }

    #[test]
    fn isolated_and_leaf_nodes_score_zero() {
        let succ = vec![vec![1], vec![], vec![]];
        assert_eq!(betweenness(&succ, BetweennessMode::Exact), vec![0.0; 3]);
        assert_eq!(harmonic(&succ)[2], 0.0);
    }

    #[test]
    fn star_into_center() {
        let k = 5;
        let mut succ = vec![vec![k]; k];
        succ.push(vec![]);
        assert_eq!(harmonic(&succ)[k], k as f64);
    }

    #[test]
    fn directed_four_cycle_is_uniform() {
        let succ = vec![vec![1], vec![2], vec![3], vec![0]];
        let b = betweenness(&succ, BetweennessMode::Exact);
        // each node is interior to the 2-hop paths (1 each) and 3-hop paths (2 each)
        assert_eq!(b, vec![3.0; 4]);
    }

    #[test]
    fn sampling_is_seeded_and_scaled() {
        let n = 40;
        let succ: Vec<Vec<usize>> = (0..n).map(|i| vec![(i + 1) % n, (i + 7) % n]).collect();
        let a = betweenness(&succ, BetweennessMode::Approximate { samples: 10, seed: 3 });
        let b = betweenness(&succ, BetweennessMode::Approximate { samples: 10, seed: 3 });
        assert_eq!(a, b);
        // circulant graph: every source contributes the same total dependency,
        // so the rescaled estimate preserves the score sum exactly
        let exact = betweenness(&succ, BetweennessMode::Exact);
        let (sa, se): (f64, f64) = (a.iter().sum(), exact.iter().sum());
        assert!((sa - se).abs() < 1e-9 * se);
    }

    #[test]
    fn auto_policy_threshold() {
        assert_eq!(BetweennessMode::auto(50_000, 1), BetweennessMode::Exact);
        assert_eq!(
            BetweennessMode::auto(50_001, 1),
            BetweennessMode::Approximate { samples: 2048, seed: 1 }
        );
    }
}
