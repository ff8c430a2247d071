// Reverse Cuthill-McKee ordering on the pattern of A + A^T.

use std::collections::VecDeque;

use crate::sparse::SparseMatrix;

/// Returns `perm` with `perm[new] = old`. Each connected component starts
/// from a pseudo-peripheral vertex; neighbours are queued by increasing
/// degree, ties by index.
pub fn reverse_cuthill_mckee(a: &SparseMatrix) -> Vec<usize> {
    let adj = a.symmetric_adjacency();
    let n = adj.len();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (degree[v], v));

    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(&adj, &degree, seed);
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(adj: &[Vec<usize>], start: usize) -> Vec<Option<usize>> {
    let mut level = vec![None; adj.len()];
    level[start] = Some(0);
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        let lv = level[v].unwrap();
        for &w in &adj[v] {
            if level[w].is_none() {
                level[w] = Some(lv + 1);
                queue.push_back(w);
            }
        }
    }
    level
}

// George-Liu: hop to a minimum-degree vertex of the last level until the
// eccentricity stops growing.
fn pseudo_peripheral(adj: &[Vec<usize>], degree: &[usize], seed: usize) -> usize {
    let mut v = seed;
    let mut ecc = 0;
    loop {
        let levels = bfs_levels(adj, v);
        let depth = levels.iter().flatten().copied().max().unwrap_or(0);
        if depth <= ecc && v != seed {
            return v;
        }
        ecc = depth;
        let candidate = levels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == Some(depth))
            .map(|(w, _)| w)
            .min_by_key(|&w| (degree[w], w))
            .unwrap_or(v);
        if candidate == v {
            return v;
        }
        let next_depth = bfs_levels(adj, candidate).iter().flatten().copied().max().unwrap_or(0);
        if next_depth <= depth {
            return v;
        }
        v = candidate;
    }
}
