mod common;

use std::collections::BTreeSet;

use chancekit::cooccur::GraphConfig;
use chancekit::ingest::{Event, EventStream};
use chancekit::keygraph::{assemble_map, bridges, combine_columns, extract_bases, key_score, KeyGraphConfig};
use chancekit::output::keygraph_dot;
use chancekit::Item;
use proptest::prelude::*;

fn streams() -> impl Strategy<Value = EventStream> {
    prop::collection::vec((0i64..10, prop::collection::vec(0u8..10, 1..6)), 0..40).prop_map(|raw| {
        EventStream::new(
            raw.into_iter()
                .map(|(t, ids)| Event::from_items(t, ids.into_iter().map(|i| Item::new(format!("w{i}")).unwrap())))
                .collect(),
        )
    })
}

fn small_cfg() -> impl Strategy<Value = KeyGraphConfig> {
    (1usize..8, 0usize..8, 1usize..6, 1usize..4).prop_map(|(n, m, k, c)| KeyGraphConfig {
        graph: GraphConfig::new(n, m),
        top_roofs: k,
        columns_per_roof: c,
    })
}

fn repeat(s: &EventStream, k: usize) -> EventStream {
    EventStream::new(s.events().iter().flat_map(|e| std::iter::repeat_n(e.clone(), k)).collect())
}

proptest! {
    #[test]
    fn key_scores_are_probabilities(s in streams(), cfg in small_cfg()) {
        let islands = extract_bases(&s, &cfg);
        for i in 0..10 {
            let k = key_score(&Item::new(format!("w{i}")).unwrap(), &islands, &s);
            prop_assert!((0.0..=1.0).contains(&k));
        }
    }

    #[test]
    fn combining_columns_is_monotone(ratios in prop::collection::vec(0.0f64..=1.0, 1..6), idx in 0usize..6, bump in 0.0f64..1.0) {
        let idx = idx % ratios.len();
        let mut raised = ratios.clone();
        raised[idx] = (raised[idx] + bump).min(1.0);
        let before = combine_columns(ratios.iter().copied());
        prop_assert!((0.0..=1.0).contains(&before));
        prop_assert!(combine_columns(raised) >= before);
    }

    #[test]
    fn maps_satisfy_class_invariants(s in streams(), cfg in small_cfg()) {
        let map = assemble_map(&s, &cfg);
        prop_assert_eq!(map.check_invariants(), Ok(()));
        prop_assert!(map.roofs.len() <= cfg.top_roofs);
        prop_assert!(map.roofs.windows(2).all(|w| w[0].key >= w[1].key));
        for roof in &map.roofs {
            let n = map.dotted_edges.iter().filter(|c| c.word == roof.item).count();
            prop_assert!(n <= cfg.columns_per_roof);
        }
        prop_assert!(common::check_dot(&keygraph_dot(&map)).is_ok());
    }

    #[test]
    fn repeating_events_keeps_the_map(s in streams(), cfg in small_cfg(), k in 2usize..4) {
        let once = assemble_map(&s, &cfg);
        let many = assemble_map(&repeat(&s, k), &cfg);
        prop_assert_eq!(&once.roofs, &many.roofs);
        prop_assert_eq!(&once.black_nodes, &many.black_nodes);
        prop_assert_eq!(&once.red_nodes, &many.red_nodes);
        prop_assert_eq!(&once.keyword_nodes, &many.keyword_nodes);
        prop_assert_eq!(&once.islands, &many.islands);
    }

    #[test]
    fn bridges_go_through_multi_island_roofs(s in streams(), cfg in small_cfg()) {
        let map = assemble_map(&s, &cfg);
        for b in bridges(&map) {
            prop_assert!(b.from < b.to);
            let reached: BTreeSet<usize> =
                map.dotted_edges.iter().filter(|c| c.word == b.via).map(|c| c.island).collect();
            prop_assert!(reached.len() >= 2);
            prop_assert!(reached.contains(&b.from) && reached.contains(&b.to));
        }
    }
}

#[test]
fn toy_dot_has_one_relay_node() {
    let cfg = KeyGraphConfig { graph: GraphConfig::new(4, 2), ..KeyGraphConfig::default() };
    let dot = keygraph_dot(&assemble_map(&common::toy_stream(), &cfg));
    common::check_dot(&dot).unwrap();
    let dashed: Vec<&str> = dot.lines().filter(|l| l.contains("style=dashed")).collect();
    assert_eq!(dashed.len(), 2);
    assert!(dashed.iter().all(|l| l.trim_start().starts_with("\"c\" -- ")));
    assert!(dot.contains("subgraph cluster_1 {") && dot.contains("subgraph cluster_2 {"));
    assert!(dot.contains("\"c\" [label=\"c (2)\", color=red, fontcolor=red];"));
}

#[test]
fn dot_checker_rejects_broken_documents() {
    assert!(common::check_dot("graph g {\n  \"a\" -- \"b\"\n}\n").is_err());
    assert!(common::check_dot("graph g {\n  \"a\" -- \"b\";\n").is_err());
    assert!(common::check_dot("graph g {\n  \"a [x=1];\n}\n").is_err());
    assert!(common::check_dot("graph g {\n  \"a\" -- \"b\" [style=dashed, color=red];\n}\n").is_ok());
}
