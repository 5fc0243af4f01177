//! Reverse Cuthill–McKee ordering of a structurally symmetric pattern.

use std::collections::VecDeque;

use crate::sparse::CsrMatrix;

/// Adjacency lists of the symmetrized pattern of `a`, without the diagonal.
pub fn symmetric_adjacency(a: &CsrMatrix) -> Vec<Vec<usize>> {
    let n = a.nrows();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for (j, _) in a.row(i) {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

/// Breadth-first level structure rooted at `root`, restricted to unvisited
/// nodes. Returns the nodes in visiting order and the eccentricity of
/// `root`.
fn bfs(adj: &[Vec<usize>], root: usize, visited: &[bool]) -> (Vec<usize>, usize, Vec<usize>) {
    let mut depth = vec![usize::MAX; adj.len()];
    let mut order = vec![root];
    depth[root] = 0;
    let mut head = 0;
    while head < order.len() {
        let v = order[head];
        head += 1;
        for &w in &adj[v] {
            if !visited[w] && depth[w] == usize::MAX {
                depth[w] = depth[v] + 1;
                order.push(w);
            }
        }
    }
    let ecc = depth[*order.last().unwrap()];
    (order, ecc, depth)
}

/// Pseudo-peripheral node of the component containing `start`.
fn peripheral(adj: &[Vec<usize>], start: usize, visited: &[bool]) -> usize {
    let mut root = start;
    let (mut order, mut ecc, mut depth) = bfs(adj, root, visited);
    loop {
        let last = ecc;
        let candidate = order
            .iter()
            .copied()
            .filter(|&v| depth[v] == last)
            .min_by_key(|&v| (adj[v].len(), v))
            .unwrap();
        let (o, e, d) = bfs(adj, candidate, visited);
        if e <= ecc {
            return root;
        }
        root = candidate;
        (order, ecc, depth) = (o, e, d);
    }
}

/// Reverse Cuthill–McKee permutation: `perm[new] = old`.
pub fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut visited = vec![false; n];
    let mut perm = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (adj[v].len(), v));
    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let root = peripheral(adj, seed, &visited);
        let mut queue = VecDeque::from([root]);
        visited[root] = true;
        while let Some(v) = queue.pop_front() {
            perm.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (adj[w].len(), w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    perm.reverse();
    perm
}

/// Inverse of a permutation given as `perm[new] = old`.
pub fn invert(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    inv
}

/// Half-bandwidth of `adj` under the ordering `inv[old] = new`.
pub fn bandwidth(adj: &[Vec<usize>], inv: &[usize]) -> usize {
    adj.iter()
        .enumerate()
        .flat_map(|(i, list)| list.iter().map(move |&j| inv[i].abs_diff(inv[j])))
        .max()
        .unwrap_or(0)
}
