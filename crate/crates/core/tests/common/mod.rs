#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::Rng as _;
use wavelet_cf::rng::Rng;
use wavelet_cf::InteractionSet;

/// Random connected bipartite graph: a random spanning tree plus uniformly
/// drawn extra edges up to `edges`.
pub fn connected_bipartite(m: usize, k: usize, edges: usize, rng: &mut Rng) -> Vec<(u32, u32)> {
    assert!(edges >= m + k - 1 && edges <= m * k);
    let mut pairs = vec![(0u32, 0u32)];
    let mut order: Vec<(bool, u32)> = (1..m as u32)
        .map(|u| (true, u))
        .chain((1..k as u32).map(|i| (false, i)))
        .collect();
    order.shuffle(rng);
    let (mut users, mut items) = (vec![0u32], vec![0u32]);
    for (is_user, n) in order {
        if is_user {
            pairs.push((n, items[rng.random_range(0..items.len())]));
            users.push(n);
        } else {
            pairs.push((users[rng.random_range(0..users.len())], n));
            items.push(n);
        }
    }
    pairs.sort_unstable();
    while pairs.len() < edges {
        let p = (rng.random_range(0..m as u32), rng.random_range(0..k as u32));
        if let Err(pos) = pairs.binary_search(&p) {
            pairs.insert(pos, p);
        }
    }
    pairs
}

/// Random bipartite graph with `2 ≤ M, K`, `M + K ≤ max_n` and density in
/// `[0.02, 0.10]`; with `split` it is the disjoint union of two connected
/// pieces, otherwise connected.
pub fn random_graph(max_n: usize, split: bool, rng: &mut Rng) -> InteractionSet {
    loop {
        let m = rng.random_range(20..=max_n / 2);
        let k = rng.random_range(20..=max_n - m);
        let pieces = if split {
            vec![(m / 2, k / 2), (m - m / 2, k - k / 2)]
        } else {
            vec![(m, k)]
        };
        let min_edges: usize = pieces.iter().map(|&(a, b)| a + b - 1).sum();
        let lo = (0.02 * (m * k) as f64).ceil() as usize;
        let hi = (0.10 * (m * k) as f64).floor() as usize;
        let lo = lo.max(min_edges);
        if lo > hi {
            continue;
        }
        let total = rng.random_range(lo..=hi);
        let mut pairs = Vec::new();
        let (mut du, mut di) = (0u32, 0u32);
        let mut left = total;
        for (idx, &(a, b)) in pieces.iter().enumerate() {
            let share = if idx + 1 == pieces.len() {
                left
            } else {
                (total * a * b / (m * k)).clamp(a + b - 1, a * b)
            };
            let share = share.clamp(a + b - 1, a * b);
            left = left.saturating_sub(share);
            pairs.extend(
                connected_bipartite(a, b, share, rng)
                    .into_iter()
                    .map(|(u, i)| (u + du, i + di)),
            );
            du += a as u32;
            di += b as u32;
        }
        let data = InteractionSet::from_index_pairs(m, k, pairs).unwrap();
        let density = data.nnz() as f64 / (m * k) as f64;
        if (0.02..=0.10).contains(&density) {
            return data;
        }
    }
}

/// Dense normalized Laplacian built straight from the pairs.
pub fn dense_laplacian(data: &InteractionSet) -> DMatrix<f64> {
    let (m, n) = (data.num_users(), data.num_nodes());
    let mut a = DMatrix::<f64>::zeros(n, n);
    for &(u, i) in data.pairs() {
        a[(u as usize, m + i as usize)] = 1.0;
        a[(m + i as usize, u as usize)] = 1.0;
    }
    let d: Vec<f64> = (0..n).map(|r| a.row(r).sum()).collect();
    DMatrix::from_fn(n, n, |r, c| {
        let id = if r == c { 1.0 } else { 0.0 };
        id - a[(r, c)] / (d[r] * d[c]).sqrt()
    })
}

/// Ascending eigenvalues and matching eigenvector columns.
pub fn dense_eigen(l: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let e = SymmetricEigen::new(l);
    let mut idx: Vec<usize> = (0..e.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]));
    let values = idx.iter().map(|&i| e.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(e.eigenvectors.nrows(), idx.len(), |r, c| e.eigenvectors[(r, idx[c])]);
    (values, vectors)
}

/// Index ranges of eigenvalues closer than `gap` to their neighbour.
pub fn clusters(values: &[f64], gap: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || values[i] - values[i - 1] > gap {
            out.push(start..i);
            start = i;
        }
    }
    out
}

pub fn connected(data: &InteractionSet) -> bool {
    let (m, n) = (data.num_users(), data.num_nodes());
    let mut adj = vec![Vec::new(); n];
    for &(u, i) in data.pairs() {
        adj[u as usize].push(m + i as usize);
        adj[m + i as usize].push(u as usize);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}
