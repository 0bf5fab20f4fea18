//! Brute-force graph oracles over adjacency matrices.

#![allow(clippy::needless_range_loop)]

/// Adjacency matrix over vertices `0..n`.
pub fn matrix(n: usize, edges: &[(u32, u32)]) -> Vec<Vec<bool>> {
    let mut m = vec![vec![false; n]; n];
    for &(u, v) in edges {
        m[u as usize][v as usize] = true;
        m[v as usize][u as usize] = true;
    }
    m
}

/// Whether the vertices in `alive` (bitmask) induce a connected subgraph.
pub fn induced_connected(m: &[Vec<bool>], alive: u32) -> bool {
    let Some(start) = (0..m.len()).find(|&i| alive & (1 << i) != 0) else {
        return true;
    };
    let mut seen = 1u32 << start;
    let mut stack = vec![start];
    while let Some(u) = stack.pop() {
        for v in 0..m.len() {
            if m[u][v] && alive & (1 << v) != 0 && seen & (1 << v) == 0 {
                seen |= 1 << v;
                stack.push(v);
            }
        }
    }
    seen == alive
}

/// Smallest vertex set whose removal disconnects the graph or leaves a
/// single vertex.
pub fn brute_vertex_connectivity(m: &[Vec<bool>]) -> usize {
    let n = m.len();
    let all = (1u32 << n) - 1;
    (0..=all)
        .filter(|&removed| {
            let alive = all & !removed;
            alive.count_ones() <= 1 || !induced_connected(m, alive)
        })
        .map(|removed| removed.count_ones() as usize)
        .min()
        .unwrap()
        .min(n - 1)
}

/// Smallest edge set whose removal disconnects the graph, via the minimum
/// over vertex bipartitions of the crossing edges.
pub fn brute_edge_connectivity(m: &[Vec<bool>]) -> usize {
    let n = m.len();
    let mut best = usize::MAX;
    for side in 1..(1u32 << n) - 1 {
        let mut crossing = 0;
        for u in 0..n {
            for v in u + 1..n {
                let a = side & (1 << u) != 0;
                let b = side & (1 << v) != 0;
                if m[u][v] && a != b {
                    crossing += 1;
                }
            }
        }
        best = best.min(crossing);
    }
    best
}

pub fn product_matrix(
    g: &(usize, Vec<(u32, u32)>),
    h: &(usize, Vec<(u32, u32)>),
) -> Vec<Vec<bool>> {
    let (gm, hm) = (matrix(g.0, &g.1), matrix(h.0, &h.1));
    let idx = |a: usize, b: usize| a * h.0 + b;
    let n = g.0 * h.0;
    let mut m = vec![vec![false; n]; n];
    for a in 0..g.0 {
        for b in 0..h.0 {
            for c in 0..g.0 {
                for d in 0..h.0 {
                    m[idx(a, b)][idx(c, d)] = (a == c && hm[b][d]) || (b == d && gm[a][c]);
                }
            }
        }
    }
    m
}
