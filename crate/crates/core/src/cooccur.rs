//! Item frequencies, pairwise co-occurrence and the top-N/top-M graph.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Event, EventStream, Item};

/// Summed multiplicity of each item across events.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub counts: BTreeMap<Item, u64>,
}

impl FrequencyTable {
    pub fn get(&self, item: &Item) -> u64 {
        self.counts.get(item).copied().unwrap_or(0)
    }

    /// Items by descending count, ties ascending by id.
    pub fn ranked(&self) -> Vec<(&Item, u64)> {
        let mut ranked: Vec<_> = self.counts.iter().map(|(k, &v)| (k, v)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked
    }
}

pub fn item_frequencies(stream: &EventStream) -> FrequencyTable {
    frequencies_of(stream.events())
}

pub(crate) fn frequencies_of(events: &[Event]) -> FrequencyTable {
    let mut counts = BTreeMap::new();
    for event in events {
        for (item, &n) in &event.items {
            *counts.entry(item.clone()).or_insert(0) += u64::from(n);
        }
    }
    FrequencyTable { counts }
}

/// Σ over events of `min(mult(a), mult(b))`.
pub fn cooccurrence(stream: &EventStream, a: &Item, b: &Item) -> Result<u64> {
    if a == b {
        return Err(Error::SelfCooccurrence(a.to_string()));
    }
    Ok(stream
        .events()
        .iter()
        .map(|e| u64::from(e.multiplicity(a).min(e.multiplicity(b))))
        .sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphConfig {
    pub top_nodes: usize,
    /// Defaults to `top_nodes - 1` when unset.
    pub top_edges: Option<usize>,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig { top_nodes: 30, top_edges: None }
    }
}

impl GraphConfig {
    pub fn new(top_nodes: usize, top_edges: usize) -> Self {
        GraphConfig { top_nodes, top_edges: Some(top_edges) }
    }

    pub fn edge_limit(&self) -> usize {
        self.top_edges.unwrap_or(self.top_nodes.saturating_sub(1).max(1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.top_nodes == 0 || self.top_edges == Some(0) {
            return Err(Error::Config("top_nodes and top_edges must be >= 1".into()));
        }
        Ok(())
    }
}

/// An undirected edge with `a < b`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedEdge {
    pub a: Item,
    pub b: Item,
    pub weight: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CooccurrenceGraph {
    /// Member items with their frequencies.
    pub nodes: BTreeMap<Item, u64>,
    /// Sorted lexicographically on `(a, b)`.
    pub edges: Vec<WeightedEdge>,
}

impl CooccurrenceGraph {
    pub fn contains(&self, item: &Item) -> bool {
        self.nodes.contains_key(item)
    }
}

/// Pairwise co-occurrence among `nodes` (sorted, deduplicated), keyed by
/// index pairs `(i, j)` with `i < j`.
pub(crate) fn pair_weights(events: &[Event], nodes: &[Item]) -> BTreeMap<(usize, usize), u64> {
    let index: HashMap<&Item, usize> = nodes.iter().enumerate().map(|(i, it)| (it, i)).collect();
    let mut weights = BTreeMap::new();
    let mut present: Vec<(usize, u32)> = Vec::new();
    for event in events {
        present.clear();
        // event.items iterates in id order, so indices come out ascending
        present.extend(event.items.iter().filter_map(|(it, &n)| index.get(it).map(|&i| (i, n))));
        for (x, &(i, ni)) in present.iter().enumerate() {
            for &(j, nj) in &present[x + 1..] {
                *weights.entry((i, j)).or_insert(0) += u64::from(ni.min(nj));
            }
        }
    }
    weights
}

pub fn build_graph(stream: &EventStream, cfg: &GraphConfig) -> CooccurrenceGraph {
    graph_of(stream.events(), cfg)
}

pub(crate) fn graph_of(events: &[Event], cfg: &GraphConfig) -> CooccurrenceGraph {
    let freqs = frequencies_of(events);
    let mut nodes: BTreeMap<Item, u64> = BTreeMap::new();
    for (item, count) in freqs.ranked().into_iter().take(cfg.top_nodes) {
        nodes.insert(item.clone(), count);
    }
    let ordered: Vec<Item> = nodes.keys().cloned().collect();

    let mut candidates: Vec<((usize, usize), u64)> =
        pair_weights(events, &ordered).into_iter().filter(|&(_, w)| w > 0).collect();
    // index order equals lexicographic order on item ids
    candidates.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    candidates.truncate(cfg.edge_limit());
    candidates.sort_by_key(|&(pair, _)| pair);

    let edges = candidates
        .into_iter()
        .map(|((i, j), weight)| WeightedEdge { a: ordered[i].clone(), b: ordered[j].clone(), weight })
        .collect();
    CooccurrenceGraph { nodes, edges }
}

/// Maximal connected node sets, ordered by their smallest member.
pub fn connected_components(graph: &CooccurrenceGraph) -> Vec<BTreeSet<Item>> {
    let ordered: Vec<&Item> = graph.nodes.keys().collect();
    let index: HashMap<&Item, usize> = ordered.iter().enumerate().map(|(i, it)| (*it, i)).collect();
    let mut parent: Vec<usize> = (0..ordered.len()).collect();

    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }

    for edge in &graph.edges {
        let (Some(&i), Some(&j)) = (index.get(&edge.a), index.get(&edge.b)) else {
            continue;
        };
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            // keep the smaller index as root so roots are component minima
            parent[ri.max(rj)] = ri.min(rj);
        }
    }

    let mut groups: BTreeMap<usize, BTreeSet<Item>> = BTreeMap::new();
    for (i, item) in ordered.iter().enumerate() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().insert((*item).clone());
    }
    groups.into_values().collect()
}
