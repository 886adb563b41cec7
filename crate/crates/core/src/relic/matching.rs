// SPDX-License-Identifier: Apache-2.0

/// Bipartite graph given as adjacency lists from left to right vertices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Bipartite {
    pub right: usize,
    pub adj: Vec<Vec<usize>>,
}

impl Bipartite {
    pub fn new(left: usize, right: usize) -> Self {
        Self { right, adj: vec![Vec::new(); left] }
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        assert!(b < self.right, "right vertex {b} out of range");
        self.adj[a].push(b);
    }

    pub fn left(&self) -> usize {
        self.adj.len()
    }
}

/// Size of a maximum matching, by augmenting paths.
pub fn max_matching(g: &Bipartite) -> usize {
    let mut owner: Vec<Option<usize>> = vec![None; g.right];
    let mut seen = vec![false; g.right];
    let mut size = 0;
    for a in 0..g.left() {
        seen.fill(false);
        if augment(g, a, &mut owner, &mut seen) {
            size += 1;
        }
    }
    size
}

fn augment(g: &Bipartite, a: usize, owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
    for &b in &g.adj[a] {
        if seen[b] {
            continue;
        }
        seen[b] = true;
        if owner[b].is_none_or(|other| augment(g, other, owner, seen)) {
            owner[b] = Some(a);
            return true;
        }
    }
    false
}
