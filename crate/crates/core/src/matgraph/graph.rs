use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::CoeffMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest `m (4d)^(k-1)` that [`enumerate_connected_subsets`] accepts.
pub const ENUMERATION_BUDGET: f64 = 1e7;

/// Undirected simple graph on `0..n` with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphView {
    adj: Vec<Vec<usize>>,
    zero_threshold: f64,
}

impl GraphView {
    pub fn empty(n: usize) -> Self {
        Self {
            adj: vec![Vec::new(); n],
            zero_threshold: 0.0,
        }
    }

    /// Graph from an undirected edge list; loops and duplicates are dropped.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::Dimension(format!("edge ({i}, {j}) outside 0..{n}")));
            }
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        for l in &mut adj {
            l.sort_unstable();
            l.dedup();
        }
        Ok(Self {
            adj,
            zero_threshold: 0.0,
        })
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn zero_threshold(&self) -> f64 {
        self.zero_threshold
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i].binary_search(&j).is_ok()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adj.iter().map(Vec::len).collect()
    }

    /// `d`: the maximal vertex degree.
    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// `degree -> number of vertices`.
    pub fn degree_histogram(&self) -> BTreeMap<usize, usize> {
        let mut h = BTreeMap::new();
        for d in self.degrees() {
            *h.entry(d).or_insert(0) += 1;
        }
        h
    }

    /// BFS hop counts from `src`, cut off beyond `max_depth`.
    fn bfs(&self, src: usize, max_depth: usize) -> Vec<usize> {
        let mut dist = vec![UNREACHABLE; self.n()];
        dist[src] = 0;
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            if dist[u] >= max_depth {
                continue;
            }
            for &w in &self.adj[u] {
                if dist[w] == UNREACHABLE {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn is_connected_subset(&self, set: &[usize]) -> bool {
        if set.is_empty() {
            return true;
        }
        let mut inside = vec![false; self.n()];
        for &v in set {
            inside[v] = true;
        }
        let mut seen = vec![false; self.n()];
        let mut stack = vec![set[0]];
        seen[set[0]] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &w in &self.adj[u] {
                if inside[w] && !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == set.len()
    }
}

/// `G_A`: edge `{i, j}` iff `i != j` and `|a_ij| > zero_threshold`.
pub fn build_graph<T: Real>(a: &CoeffMatrix<T>, zero_threshold: f64) -> Result<GraphView> {
    if !(zero_threshold >= 0.0) {
        return Err(Error::InvalidArgument(format!("zero_threshold={zero_threshold} must be >= 0")));
    }
    if !a.is_symmetric() {
        return Err(Error::NotSymmetric {
            asymmetry: a.asymmetry().to_f64_lossy(),
        });
    }
    pattern_graph(a, zero_threshold)
}

/// Graph of the symmetrized support pattern: edge iff `a_ij` or `a_ji`
/// exceeds the threshold. Agrees with [`build_graph`] on symmetric input.
pub fn pattern_graph<T: Real>(a: &CoeffMatrix<T>, zero_threshold: f64) -> Result<GraphView> {
    let n = a.n();
    let thr = T::lit(zero_threshold);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if a.get(i, j).abs() > thr || a.get(j, i).abs() > thr {
                edges.push((i, j));
            }
        }
    }
    let mut g = GraphView::from_edges(n, &edges)?;
    g.zero_threshold = zero_threshold;
    Ok(g)
}

/// Distance sentinel for vertices in different components.
pub const UNREACHABLE: usize = usize::MAX;

/// All-pairs hop distances `ρ(i, j)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HopDistances {
    n: usize,
    d: Vec<usize>,
}

impl HopDistances {
    /// Hop count, or [`UNREACHABLE`].
    pub fn get(&self, i: usize, j: usize) -> usize {
        self.d[i * self.n + j]
    }

    pub fn finite(&self, i: usize, j: usize) -> Option<usize> {
        Some(self.get(i, j)).filter(|&d| d != UNREACHABLE)
    }
}

pub fn distances(g: &GraphView) -> HopDistances {
    let n = g.n();
    let mut d = Vec::with_capacity(n * n);
    for s in 0..n {
        d.extend(g.bfs(s, UNREACHABLE));
    }
    HopDistances { n, d }
}

/// `G_r`: edge iff `0 < ρ(i, j) <= r`.
pub fn power_graph(g: &GraphView, r: usize) -> Result<GraphView> {
    if r == 0 {
        return Err(Error::InvalidArgument("power graph order must be >= 1".into()));
    }
    let n = g.n();
    let adj = (0..n)
        .map(|s| {
            g.bfs(s, r)
                .into_iter()
                .enumerate()
                .filter(|&(v, dv)| v != s && dv != UNREACHABLE && dv <= r)
                .map(|(v, _)| v)
                .collect()
        })
        .collect();
    Ok(GraphView {
        adj,
        zero_threshold: g.zero_threshold,
    })
}

/// `I'` (order 1): all neighbors of `I`; `I''` (order 2): all vertices sharing
/// a neighbor with some vertex of `I`. Sorted.
pub fn neighborhood(g: &GraphView, set: &[usize], order: u8) -> Result<Vec<usize>> {
    let n = g.n();
    if let Some(&bad) = set.iter().find(|&&v| v >= n) {
        return Err(Error::Dimension(format!("vertex {bad} outside 0..{n}")));
    }
    let step = |from: &[bool]| {
        let mut out = vec![false; n];
        for (u, _) in from.iter().enumerate().filter(|(_, &b)| b) {
            for &w in g.neighbors(u) {
                out[w] = true;
            }
        }
        out
    };
    let mut mask = vec![false; n];
    for &v in set {
        mask[v] = true;
    }
    let distinct = mask.iter().filter(|&&b| b).count();
    let result = match order {
        1 => step(&mask),
        2 => step(&step(&mask)),
        _ => return Err(Error::InvalidArgument(format!("neighborhood order {order} must be 1 or 2"))),
    };
    let out: Vec<usize> = (0..n).filter(|&v| result[v]).collect();
    let d = g.max_degree();
    assert!(
        out.len() <= d.pow(order as u32) * distinct,
        "neighborhood of order {order} has {} > d^{order}|I| = {}",
        out.len(),
        d.pow(order as u32) * distinct
    );
    Ok(out)
}

/// `m (4d)^(k-1)` for `k >= 1`.
pub fn connected_subset_bound(m: usize, d: usize, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    m as f64 * (4.0 * d as f64).powi(k as i32 - 1)
}

/// Every connected vertex set of size `k`, each once, as sorted vectors.
///
/// Sets are grown from their minimum vertex using exclusive neighborhoods,
/// so no deduplication pass is needed.
pub fn enumerate_connected_subsets(g: &GraphView, k: usize) -> Result<Vec<Vec<usize>>> {
    let m = g.n();
    if k == 0 {
        return Ok(vec![Vec::new()]);
    }
    if k > m {
        return Ok(Vec::new());
    }
    let bound = connected_subset_bound(m, g.max_degree(), k);
    let needed = bound.min(crate::orlicz::ln_binomial(m, k).exp().round());
    if needed > ENUMERATION_BUDGET {
        return Err(Error::Budget {
            what: "connected-subset enumeration",
            needed,
            limit: ENUMERATION_BUDGET,
        });
    }
    let mut out = Vec::new();
    // Number of subgraph vertices adjacent to each vertex (or equal to it).
    let mut touched = vec![0usize; m];
    for root in 0..m {
        let ext: Vec<usize> = g.neighbors(root).iter().copied().filter(|&w| w > root).collect();
        let mut sub = vec![root];
        mark(g, root, &mut touched, 1);
        extend(g, root, k, &mut sub, ext, &mut touched, &mut out);
        mark(g, root, &mut touched, -1);
    }
    for s in &mut out {
        s.sort_unstable();
    }
    assert!(
        (out.len() as f64) <= bound,
        "{} connected {k}-subsets exceed the bound {bound}",
        out.len()
    );
    Ok(out)
}

fn mark(g: &GraphView, v: usize, touched: &mut [usize], delta: isize) {
    let apply = |t: &mut usize| *t = (*t as isize + delta) as usize;
    apply(&mut touched[v]);
    for &w in g.neighbors(v) {
        apply(&mut touched[w]);
    }
}

fn extend(
    g: &GraphView,
    root: usize,
    k: usize,
    sub: &mut Vec<usize>,
    mut ext: Vec<usize>,
    touched: &mut [usize],
    out: &mut Vec<Vec<usize>>,
) {
    if sub.len() == k {
        out.push(sub.clone());
        return;
    }
    while let Some(w) = ext.pop() {
        // Exclusive neighbors of w: not in or adjacent to the current subgraph.
        let mut next = ext.clone();
        for &u in g.neighbors(w) {
            if u > root && touched[u] == 0 && !next.contains(&u) {
                next.push(u);
            }
        }
        sub.push(w);
        mark(g, w, touched, 1);
        extend(g, root, k, sub, next, touched, out);
        mark(g, w, touched, -1);
        sub.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matgraph::GenSpec;

    fn path(n: usize) -> GraphView {
        let e: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        GraphView::from_edges(n, &e).unwrap()
    }

    #[test]
    fn graphs_of_generators() {
        let id: CoeffMatrix<f64> = GenSpec::Identity { n: 6 }.build().unwrap();
        let g = build_graph(&id, 0.0).unwrap();
        assert_eq!((g.edge_count(), g.max_degree()), (0, 0));
        let ones: CoeffMatrix<f64> = GenSpec::Ones { n: 6 }.build().unwrap();
        assert_eq!(build_graph(&ones, 0.0).unwrap().max_degree(), 5);
        let band: CoeffMatrix<f64> = GenSpec::Band { n: 5, width: 1 }.build().unwrap();
        let g = build_graph(&band, 0.0).unwrap();
        assert_eq!(g, path(5));
        assert_eq!(g.max_degree(), 2);
        let ns = CoeffMatrix::from_rows(&[vec![0.0f64, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(build_graph(&ns, 0.0), Err(Error::NotSymmetric { .. })));
        assert_eq!(pattern_graph(&ns, 0.0).unwrap().edge_count(), 1);
    }

    #[test]
    fn zero_threshold_drops_small_entries() {
        let a = CoeffMatrix::from_rows(&[vec![0.0f64, 1e-9], vec![1e-9, 0.0]]).unwrap();
        assert_eq!(build_graph(&a, 0.0).unwrap().edge_count(), 1);
        assert_eq!(build_graph(&a, 1e-6).unwrap().edge_count(), 0);
    }

    #[test]
    fn hop_distances() {
        let d = distances(&path(3));
        assert_eq!(d.get(0, 2), 2);
        let two = GraphView::empty(2);
        assert_eq!(distances(&two).get(0, 1), UNREACHABLE);
        assert_eq!(distances(&two).finite(0, 1), None);
        let k4 = GraphView::from_edges(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap();
        let d = distances(&k4);
        assert!((0..4).all(|i| (0..4).all(|j| d.get(i, j) == usize::from(i != j))));
    }

    #[test]
    fn power_graphs() {
        let p = path(5);
        assert_eq!(power_graph(&p, 2).unwrap().neighbors(2), &[0, 1, 3, 4]);
        assert_eq!(power_graph(&p, 1).unwrap(), p);
        assert_eq!(power_graph(&GraphView::empty(4), 3).unwrap(), GraphView::empty(4));
        assert!(power_graph(&p, 0).is_err());
    }

    #[test]
    fn neighborhoods() {
        let p = path(5);
        assert_eq!(neighborhood(&p, &[2], 1).unwrap(), vec![1, 3]);
        assert_eq!(neighborhood(&p, &[2], 2).unwrap(), vec![0, 2, 4]);
        assert!(neighborhood(&p, &[], 1).unwrap().is_empty());
        assert!(neighborhood(&p, &[9], 1).is_err());
    }

    #[test]
    fn connected_subsets_small_cases() {
        let p = path(5);
        let s = enumerate_connected_subsets(&p, 3).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(connected_subset_bound(5, 2, 3), 320.0);
        let singles = enumerate_connected_subsets(&p, 1).unwrap();
        assert_eq!(singles, (0..5).map(|v| vec![v]).collect::<Vec<_>>());
        let c6: Vec<_> = (0..6).map(|i| (i, (i + 1) % 6)).collect();
        let c6 = GraphView::from_edges(6, &c6).unwrap();
        assert_eq!(enumerate_connected_subsets(&c6, 2).unwrap().len(), 6);
    }

    #[test]
    fn enumeration_budget() {
        let ones: CoeffMatrix<f64> = GenSpec::Ones { n: 40 }.build().unwrap();
        let g = build_graph(&ones, 0.0).unwrap();
        assert!(matches!(enumerate_connected_subsets(&g, 8), Err(Error::Budget { .. })));
        // The binomial caps the size estimate when the degree bound is loose.
        assert_eq!(enumerate_connected_subsets(&g, 3).unwrap().len(), 9880);
    }

    #[test]
    fn complete_graph_counts_are_binomials() {
        let e: Vec<_> = (0..5).flat_map(|i| ((i + 1)..5).map(move |j| (i, j))).collect();
        let k5 = GraphView::from_edges(5, &e).unwrap();
        let binom = [1, 5, 10, 10, 5, 1];
        for (k, &b) in binom.iter().enumerate() {
            assert_eq!(enumerate_connected_subsets(&k5, k).unwrap().len(), b, "k={k}");
        }
    }
}
