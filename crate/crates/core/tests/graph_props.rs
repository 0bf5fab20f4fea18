//! Product construction and connectivity checked against brute force.

#![allow(clippy::needless_range_loop)]

mod common;

use std::collections::BTreeSet;

use common::oracle::{brute_edge_connectivity, brute_vertex_connectivity, matrix, product_matrix};
use proptest::prelude::*;
use scot_core::graph::{cartesian_product, connectivity_bounds, Graph};

/// Random connected graph on `n` vertices: a random spanning tree plus extra
/// edges chosen by `extra`.
fn connected_graph(max_n: usize) -> impl Strategy<Value = (usize, Vec<(u32, u32)>)> {
    (2..=max_n).prop_flat_map(|n| {
        let parents: Vec<BoxedStrategy<u32>> = (1..n).map(|i| (0..i as u32).boxed()).collect();
        let pairs = n * (n - 1) / 2;
        (
            Just(n),
            parents,
            proptest::collection::vec(any::<bool>(), pairs),
        )
            .prop_map(|(n, parents, extra)| {
                let mut edges = BTreeSet::new();
                for (i, p) in parents.into_iter().enumerate() {
                    edges.insert((p, i as u32 + 1));
                }
                let mut k = 0;
                for u in 0..n as u32 {
                    for v in u + 1..n as u32 {
                        if extra[k] {
                            edges.insert((u, v));
                        }
                        k += 1;
                    }
                }
                (n, edges.into_iter().collect())
            })
    })
}

fn any_graph(max_n: usize) -> impl Strategy<Value = (usize, Vec<(u32, u32)>)> {
    (1..=max_n).prop_flat_map(|n| {
        let pairs = n * (n - 1) / 2;
        (Just(n), proptest::collection::vec(any::<bool>(), pairs)).prop_map(|(n, mask)| {
            let mut edges = Vec::new();
            let mut k = 0;
            for u in 0..n as u32 {
                for v in u + 1..n as u32 {
                    if mask[k] {
                        edges.push((u, v));
                    }
                    k += 1;
                }
            }
            (n, edges)
        })
    })
}

fn graph((n, edges): &(usize, Vec<(u32, u32)>)) -> Graph<u32> {
    Graph::new(0..*n as u32, edges.iter().copied()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn product_adjacency_matches_pairwise_rule(g in any_graph(6), h in any_graph(6)) {
        let p = cartesian_product(&graph(&g), &graph(&h)).unwrap();
        let (gm, hm) = (matrix(g.0, &g.1), matrix(h.0, &h.1));
        for a in 0..g.0 as u32 {
            for b in 0..h.0 as u32 {
                for c in 0..g.0 as u32 {
                    for d in 0..h.0 as u32 {
                        let expected = (a == c && hm[b as usize][d as usize]) || (b == d && gm[a as usize][c as usize]);
                        prop_assert_eq!(p.has_edge(&(a, b), &(c, d)), expected);
                    }
                }
            }
        }
    }

    #[test]
    fn product_counts(g in any_graph(6), h in any_graph(6)) {
        let (gg, hh) = (graph(&g), graph(&h));
        let p = cartesian_product(&gg, &hh).unwrap();
        prop_assert_eq!(p.order(), gg.order() * hh.order());
        prop_assert_eq!(p.size(), gg.size() * hh.order() + gg.order() * hh.size());
    }

    #[test]
    fn product_commutes_up_to_swap(g in any_graph(5), h in any_graph(5)) {
        let gh = cartesian_product(&graph(&g), &graph(&h)).unwrap();
        let hg = cartesian_product(&graph(&h), &graph(&g)).unwrap();
        let a: BTreeSet<((u32, u32), (u32, u32))> = gh.edges().map(|(u, v)| (*u, *v)).collect();
        let b: BTreeSet<((u32, u32), (u32, u32))> = hg
            .edges()
            .map(|(u, v)| {
                let (x, y) = ((u.1, u.0), (v.1, v.0));
                if x < y { (x, y) } else { (y, x) }
            })
            .collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn min_degree_is_additive(g in any_graph(6), h in any_graph(6)) {
        let (gg, hh) = (graph(&g), graph(&h));
        let p = cartesian_product(&gg, &hh).unwrap();
        prop_assert_eq!(p.min_degree(), gg.min_degree() + hh.min_degree());
    }

    #[test]
    fn connectivity_bounds_match_brute_force_cuts(
        (g, h) in (connected_graph(4), connected_graph(4)).prop_filter("at most 9 vertices", |(g, h)| g.0 * h.0 <= 9)
    ) {
        let bounds = connectivity_bounds(&graph(&g), &graph(&h)).unwrap();
        let m = product_matrix(&g, &h);
        prop_assert_eq!(bounds.kappa, brute_vertex_connectivity(&m));
        prop_assert_eq!(bounds.lambda, brute_edge_connectivity(&m));
    }

    #[test]
    fn factor_connectivity_matches_brute_force(g in connected_graph(6)) {
        let m = matrix(g.0, &g.1);
        let gg = graph(&g);
        prop_assert_eq!(gg.vertex_connectivity(), brute_vertex_connectivity(&m));
        prop_assert_eq!(gg.edge_connectivity(), brute_edge_connectivity(&m));
    }
}

#[test]
fn bounds_on_small_named_products() {
    let path2 = Graph::new(0..2u32, [(0, 1)]).unwrap();
    let triangle = Graph::new(0..3u32, [(0, 1), (1, 2), (0, 2)]).unwrap();
    let b = connectivity_bounds(&path2, &triangle).unwrap();
    assert_eq!((b.kappa, b.lambda), (3, 3));
    let b = connectivity_bounds(&path2, &path2).unwrap();
    assert_eq!((b.kappa, b.lambda), (2, 2));
}
