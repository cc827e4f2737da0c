use proptest::prelude::*;
use xbm_core::rng::seeded;
use xbm_core::topology::{
    generate_topology, havel_hakimi_bipartite, is_bigraphic, split_and_equalize, split_and_equalize_capped,
    BipartiteGraph, DegreeSequence, TopologyParams,
};

fn edge_set() -> impl Strategy<Value = BipartiteGraph> {
    (1usize..12, 1usize..12).prop_flat_map(|(n_v, n_h)| {
        proptest::collection::vec(any::<bool>(), n_v * n_h).prop_map(move |keep| {
            let edges = (0..n_v * n_h).filter(|&k| keep[k]).map(|k| (k / n_h, k % n_h));
            BipartiteGraph::from_edges(n_v, n_h, edges).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn text_round_trip(g in edge_set()) {
        let back = BipartiteGraph::read_text(g.to_text().as_bytes()).unwrap();
        prop_assert_eq!(back, g);
    }

    #[test]
    fn binary_round_trip(g in edge_set()) {
        let mut buf = Vec::new();
        g.write_binary(&mut buf).unwrap();
        prop_assert_eq!(BipartiteGraph::read_binary(buf.as_slice()).unwrap(), g);
    }

    #[test]
    fn edge_ids_follow_visible_major_order(g in edge_set()) {
        for (id, (i, j)) in g.edges().enumerate() {
            prop_assert_eq!(g.edge_id(i, j), Some(id));
            prop_assert!(g.visible_edge_range(i).contains(&id));
        }
        let total: usize = (0..g.n_hidden()).map(|j| g.hidden_degree(j)).sum();
        prop_assert_eq!(total, g.n_edges());
    }

    /// Degrees taken from any simple graph are bigraphic and Havel–Hakimi
    /// realizes them node by node.
    #[test]
    fn havel_hakimi_realizes_graphic_pairs(g in edge_set()) {
        let (dv, dh) = (g.visible_degrees(), g.hidden_degrees());
        prop_assert!(is_bigraphic(&dv, &dh));
        let built = havel_hakimi_bipartite(&DegreeSequence(dv.clone()), &DegreeSequence(dh.clone())).unwrap();
        prop_assert_eq!(built.visible_degrees(), dv);
        prop_assert_eq!(built.hidden_degrees(), dh);
    }

    #[test]
    fn relabelling_preserves_degree_multiset(g in edge_set(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut perm: Vec<usize> = (0..g.n_visible()).collect();
        perm.shuffle(&mut seeded(seed));
        let r = g.relabel_visible(&perm).unwrap();
        let (mut a, mut b) = (g.visible_degrees(), r.visible_degrees());
        a.sort_unstable();
        b.sort_unstable();
        prop_assert_eq!(a, b);
        prop_assert_eq!(r.hidden_degrees(), g.hidden_degrees());
        for i in 0..g.n_visible() {
            prop_assert_eq!(r.visible_degree(perm[i]), g.visible_degree(i));
        }
    }

    #[test]
    fn split_balances_sums(mut seq in proptest::collection::vec(1usize..30, 2..40), cut in 0.0f64..1.0) {
        seq.sort_unstable_by(|a, b| b.cmp(a));
        let n_v = 1 + ((seq.len() - 2) as f64 * cut) as usize;
        let n_h = seq.len() - n_v;
        let seq = DegreeSequence(seq);
        let (sv, sh) = split_and_equalize(&seq, n_v, n_h).unwrap();
        prop_assert_eq!((sv.len(), sh.len()), (n_v, n_h));
        prop_assert_eq!(sv.sum(), sh.sum());
        prop_assert!(sv.sum().max(sh.sum()) >= seq.sum() / 2);

        let (cv, ch) = split_and_equalize_capped(&seq, n_v, n_h).unwrap();
        prop_assert_eq!(cv.sum(), ch.sum());
        prop_assert!(cv.as_slice().iter().all(|&d| d <= n_h));
        prop_assert!(ch.as_slice().iter().all(|&d| d <= n_v));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn generated_topologies_are_valid(n_v in 5usize..40, n_h in 5usize..40, seed in any::<u64>()) {
        let params = TopologyParams::default();
        let t = generate_topology(n_v, n_h, &params, &mut seeded(seed)).unwrap();
        let g = &t.graph;
        prop_assert_eq!((g.n_visible(), g.n_hidden()), (n_v, n_h));
        prop_assert!(g.visible_degrees().iter().all(|&d| d >= 1 && d <= n_h));
        prop_assert!(g.hidden_degrees().iter().all(|&d| d >= 1 && d <= n_v));
        prop_assert!(t.iterations >= 1 && t.iterations <= params.max_outer_iterations);
        prop_assert_eq!(t.warning, t.path.average > t.threshold);
        let again = generate_topology(n_v, n_h, &params, &mut seeded(seed)).unwrap();
        prop_assert_eq!(&again.graph, g);
    }
}
