use opnorm_core::matgraph::{
    connected_subset_bound, enumerate_connected_subsets, m_of, power_graph, symmetrize, CoeffMatrix, GraphView,
};
use opnorm_core::norms::spectral_norm;
use proptest::prelude::*;
use std::collections::VecDeque;

fn graph_from(m: usize, bits: &[bool]) -> (GraphView, Vec<Vec<usize>>) {
    let mut edges = Vec::new();
    let mut adj = vec![Vec::new(); m];
    let mut t = 0;
    for a in 0..m {
        for b in a + 1..m {
            if bits[t % bits.len()] {
                edges.push((a, b));
                adj[a].push(b);
                adj[b].push(a);
            }
            t += 1;
        }
    }
    (GraphView::from_edges(m, &edges).unwrap(), adj)
}

fn hops(adj: &[Vec<usize>], s: usize) -> Vec<usize> {
    let mut d = vec![usize::MAX; adj.len()];
    d[s] = 0;
    let mut q = VecDeque::from([s]);
    while let Some(v) = q.pop_front() {
        for &w in &adj[v] {
            if d[w] == usize::MAX {
                d[w] = d[v] + 1;
                q.push_back(w);
            }
        }
    }
    d
}

fn is_connected(adj: &[Vec<usize>], set: &[usize]) -> bool {
    let inside = |v: usize| set.contains(&v);
    let mut seen = vec![set[0]];
    let mut i = 0;
    while i < seen.len() {
        for &w in &adj[seen[i]] {
            if inside(w) && !seen.contains(&w) {
                seen.push(w);
            }
        }
        i += 1;
    }
    seen.len() == set.len()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn connected_subsets_match_brute_force_and_bound(m in 1usize..=9, bits in prop::collection::vec(any::<bool>(), 1..40)) {
        let (g, adj) = graph_from(m, &bits);
        let d = g.max_degree();
        for k in 1..=m {
            let found = enumerate_connected_subsets(&g, k).unwrap();
            let brute = (0u32..1 << m)
                .filter(|s| s.count_ones() as usize == k)
                .map(|s| (0..m).filter(|&v| s >> v & 1 == 1).collect::<Vec<_>>())
                .filter(|set| is_connected(&adj, set))
                .count();
            prop_assert_eq!(found.len(), brute);
            prop_assert!(found.len() as f64 <= connected_subset_bound(m, d, k));
            for s in &found {
                prop_assert!(is_connected(&adj, s));
            }
        }
    }

    #[test]
    fn power_graph_joins_vertices_within_r_hops(m in 1usize..=12, r in 1usize..=3, bits in prop::collection::vec(any::<bool>(), 1..30)) {
        let (g, adj) = graph_from(m, &bits);
        let p = power_graph(&g, r).unwrap();
        let d = g.max_degree();
        let reach: usize = (1..=r).map(|i| d * d.saturating_sub(1).pow(i as u32 - 1)).sum();
        prop_assert!(p.max_degree() <= reach.min(m.saturating_sub(1)));
        for s in 0..m {
            let h = hops(&adj, s);
            for t in 0..m {
                prop_assert_eq!(p.has_edge(s, t), s != t && h[t] <= r, "{} {}", s, t);
            }
        }
    }

    #[test]
    fn block_symmetrization_keeps_norm_and_doubles_m(n in 1usize..=6, vals in prop::collection::vec(-3.0f64..3.0, 36)) {
        let a = CoeffMatrix::from_fn(n, |i, j| vals[i * 6 + j]).unwrap();
        let s = symmetrize(&a);
        prop_assert!(s.is_symmetric());
        prop_assert_eq!(s.n(), 2 * n);
        let (na, ns) = (spectral_norm(a.matrix(), 1e-12), spectral_norm(s.matrix(), 1e-12));
        prop_assert!((na - ns).abs() <= 1e-10 * na.max(1.0));
        let rows = a.row_norms().into_iter().chain(a.col_norms()).fold(0.0, f64::max);
        prop_assert!((m_of(&s) - 2.0 * rows).abs() <= 1e-12 * rows.max(1.0));
    }
}
