// SPDX-License-Identifier: Apache-2.0

//! Tarjan's strongly connected components, iterative.

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SccPartition {
    /// Component id per node. Ids are assigned in completion order, so a
    /// component's id is smaller than the id of any component reaching it.
    pub component: Vec<usize>,
    pub sizes: Vec<usize>,
    pub on_cycle: Vec<bool>,
}

impl SccPartition {
    pub fn component_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn same_component(&self, u: usize, v: usize) -> bool {
        self.component[u] == self.component[v]
    }

    /// Members of every component, in node order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.sizes.len()];
        for (v, &c) in self.component.iter().enumerate() {
            out[c].push(v);
        }
        out
    }
}

const UNVISITED: usize = usize::MAX;

/// Partitions the graph given by successor lists. Visits roots in node order
/// and successors in list order, so the result is deterministic.
pub fn tarjan(succ: &[Vec<usize>]) -> SccPartition {
    let n = succ.len();
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut component = vec![UNVISITED; n];
    let mut sizes = Vec::new();
    let mut next_index = 0;
    // (node, position of the next successor to explore)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        call.push((root, 0));
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if let Some(&w) = succ[v].get(*pos) {
                *pos += 1;
                if index[w] == UNVISITED {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let id = sizes.len();
                let mut size = 0;
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    component[w] = id;
                    size += 1;
                    if w == v {
                        break;
                    }
                }
                sizes.push(size);
            }
        }
    }

    let on_cycle = (0..n)
        .map(|v| sizes[component[v]] >= 2 || succ[v].contains(&v))
        .collect();
    SccPartition { component, sizes, on_cycle }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_cycle_is_one_component() {
        let succ = vec![vec![1], vec![2], vec![3], vec![0]];
        let p = tarjan(&succ);
        assert_eq!(p.component_count(), 1);
        assert_eq!(p.sizes, vec![4]);
        assert!(p.on_cycle.iter().all(|&c| c));
    }

    #[test]
    fn dag_is_all_singletons() {
        let succ = vec![vec![1, 2], vec![3], vec![3], vec![]];
        let p = tarjan(&succ);
        assert_eq!(p.component_count(), 4);
        assert!(p.on_cycle.iter().all(|&c| !c));
    }

    #[test]
    fn self_loop_counts_as_cycle() {
        let succ = vec![vec![0, 1], vec![]];
        let p = tarjan(&succ);
        assert_eq!(p.on_cycle, vec![true, false]);
    }

    #[test]
    fn deep_chain_does_not_overflow() {
        let n = 200_000;
        let succ: Vec<Vec<usize>> = (0..n).map(|i| vec![(i + 1) % n]).collect();
        let p = tarjan(&succ);
        assert_eq!(p.sizes, vec![n]);
    }
}
