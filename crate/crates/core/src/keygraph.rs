//! KeyGraph maps: bases (islands), columns and roofs.
//!
//! The pipeline runs in three passes over a stream:
//!
//! 1. **Bases.** The top-N/top-M co-occurrence graph is built and its connected
//!    components become islands. Their members are the black nodes.
//! 2. **Columns.** For every word `w` and island `g`, `based(w, g)` measures how
//!    much `w` co-occurs with the rest of `g`.
//! 3. **Roofs.** Words are scored with
//!    `key(w) = 1 - Π_g (1 - based(w, g) / neighbors(g))`, taken over the
//!    islands `w` does not belong to. The top-K words are roofs. A roof that is
//!    already a black node is a keyword (drawn double-circled); any other roof
//!    is a red node joined to islands by dotted edges.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::cooccur::{build_graph, connected_components, CooccurrenceGraph, GraphConfig, WeightedEdge};
use crate::error::{Error, Result};
use crate::ingest::{EventStream, Item};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Island {
    /// 1-based, in order of the island's smallest member.
    pub id: usize,
    pub items: BTreeSet<Item>,
}

/// A dotted edge from a roof word to an island.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub word: Item,
    pub island: usize,
    pub strength: f64,
    /// Island member co-occurring most with `word`; used when drawing the edge.
    pub anchor: Item,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Roof {
    pub item: Item,
    pub key: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyGraphConfig {
    pub graph: GraphConfig,
    pub top_roofs: usize,
    pub columns_per_roof: usize,
}

impl Default for KeyGraphConfig {
    fn default() -> Self {
        KeyGraphConfig { graph: GraphConfig::default(), top_roofs: 12, columns_per_roof: 2 }
    }
}

impl KeyGraphConfig {
    pub fn validate(&self) -> Result<()> {
        self.graph.validate()?;
        if self.top_roofs == 0 || self.columns_per_roof == 0 {
            return Err(Error::Config("top_roofs and columns_per_roof must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KeyGraphMap {
    pub black_nodes: BTreeSet<Item>,
    pub red_nodes: BTreeSet<Item>,
    pub keyword_nodes: BTreeSet<Item>,
    pub solid_edges: Vec<WeightedEdge>,
    pub dotted_edges: Vec<Column>,
    pub islands: Vec<Island>,
    /// Ranked by key score.
    pub roofs: Vec<Roof>,
    /// Frequencies of every black or red node.
    pub frequencies: BTreeMap<Item, u64>,
}

impl KeyGraphMap {
    /// Checks the node-class and edge-placement invariants.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        if let Some(x) = self.red_nodes.intersection(&self.black_nodes).next() {
            return Err(format!("{x} is both red and black"));
        }
        for k in &self.keyword_nodes {
            if !self.black_nodes.contains(k) && !self.red_nodes.contains(k) {
                return Err(format!("keyword {k} is neither black nor red"));
            }
        }
        for col in &self.dotted_edges {
            if !self.red_nodes.contains(&col.word) && !self.keyword_nodes.contains(&col.word) {
                return Err(format!("dotted edge from non-roof {}", col.word));
            }
        }
        for edge in &self.solid_edges {
            let same = self
                .islands
                .iter()
                .any(|isl| isl.items.contains(&edge.a) && isl.items.contains(&edge.b));
            if !same {
                return Err(format!("solid edge {}-{} crosses islands", edge.a, edge.b));
            }
        }
        let mut seen = BTreeSet::new();
        for isl in &self.islands {
            for it in &isl.items {
                if !seen.insert(it) {
                    return Err(format!("{it} appears in two islands"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bridge {
    pub from: usize,
    pub to: usize,
    pub via: Item,
}

fn islands_from(graph: &CooccurrenceGraph) -> Vec<Island> {
    connected_components(graph)
        .into_iter()
        .enumerate()
        .map(|(i, items)| Island { id: i + 1, items })
        .collect()
}

pub fn extract_bases(stream: &EventStream, cfg: &KeyGraphConfig) -> Vec<Island> {
    islands_from(&build_graph(stream, &cfg.graph))
}

/// `based(w, g)` for every word in the stream against every island.
struct ColumnTable {
    /// word → per-island mass (indexed like `islands`).
    based: BTreeMap<Item, Vec<u64>>,
    neighbors: Vec<u64>,
    home: HashMap<Item, usize>,
}

impl ColumnTable {
    fn build(stream: &EventStream, islands: &[Island]) -> Self {
        let mut home = HashMap::new();
        for (g, isl) in islands.iter().enumerate() {
            for it in &isl.items {
                home.insert(it.clone(), g);
            }
        }
        let mut based: BTreeMap<Item, Vec<u64>> = BTreeMap::new();
        let mut mass = vec![0u64; islands.len()];
        for event in stream.events() {
            mass.iter_mut().for_each(|m| *m = 0);
            for (it, &n) in &event.items {
                if let Some(&g) = home.get(it) {
                    mass[g] += u64::from(n);
                }
            }
            for (it, &n) in &event.items {
                let row = based.entry(it.clone()).or_insert_with(|| vec![0; islands.len()]);
                let own = home.get(it).copied();
                for (g, &m) in mass.iter().enumerate() {
                    let others = if own == Some(g) { m - u64::from(n) } else { m };
                    row[g] += u64::from(n).min(others);
                }
            }
        }
        let mut neighbors = vec![0u64; islands.len()];
        for row in based.values() {
            for (g, &v) in row.iter().enumerate() {
                neighbors[g] += v;
            }
        }
        ColumnTable { based, neighbors, home }
    }

    fn key(&self, word: &Item) -> f64 {
        let Some(row) = self.based.get(word) else {
            return 0.0;
        };
        let own = self.home.get(word).copied();
        combine_columns(
            row.iter()
                .enumerate()
                .filter(|&(g, _)| Some(g) != own && self.neighbors[g] > 0)
                .map(|(g, &b)| b as f64 / self.neighbors[g] as f64),
        )
    }
}

/// `1 - Π (1 - r)` over per-island ratios `based / neighbors`.
pub fn combine_columns<I: IntoIterator<Item = f64>>(ratios: I) -> f64 {
    let miss: f64 = ratios.into_iter().map(|r| 1.0 - r.clamp(0.0, 1.0)).product();
    (1.0 - miss).clamp(0.0, 1.0)
}

/// Co-occurrence mass of `word` with island `island`, excluding `word` itself.
pub fn based(word: &Item, island: &Island, stream: &EventStream) -> f64 {
    stream
        .events()
        .iter()
        .map(|e| {
            let n = e.multiplicity(word);
            let rest: u64 = island
                .items
                .iter()
                .filter(|x| *x != word)
                .map(|x| u64::from(e.multiplicity(x)))
                .sum();
            u64::from(n).min(rest)
        })
        .sum::<u64>() as f64
}

/// Probability-style score in `[0, 1]` of `word` touching at least one
/// island other than its own.
pub fn key_score(word: &Item, islands: &[Island], stream: &EventStream) -> f64 {
    ColumnTable::build(stream, islands).key(word)
}

/// Ranks roofs by key score (ties by id) and emits each roof's strongest
/// columns to islands other than its own.
pub fn extract_roofs(
    stream: &EventStream,
    islands: &[Island],
    cfg: &KeyGraphConfig,
) -> (Vec<Roof>, Vec<Column>) {
    if islands.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let table = ColumnTable::build(stream, islands);
    let mut scored: Vec<Roof> = table
        .based
        .keys()
        .map(|w| Roof { item: w.clone(), key: table.key(w) })
        .filter(|r| r.key > 0.0)
        .collect();
    scored.sort_by(|a, b| b.key.total_cmp(&a.key).then_with(|| a.item.cmp(&b.item)));
    scored.truncate(cfg.top_roofs);

    let roof_set: BTreeSet<&Item> = scored.iter().map(|r| &r.item).collect();
    let anchors = anchors_for(stream, &roof_set, &table.home);

    let mut columns = Vec::new();
    for roof in &scored {
        let row = &table.based[&roof.item];
        let own = table.home.get(&roof.item).copied();
        let mut ranked: Vec<(usize, u64)> = row
            .iter()
            .enumerate()
            .filter(|&(g, &b)| b > 0 && Some(g) != own && table.neighbors[g] > 0)
            .map(|(g, &b)| (g, b))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        for (g, b) in ranked.into_iter().take(cfg.columns_per_roof) {
            let anchor = anchors
                .get(&(roof.item.clone(), g))
                .cloned()
                .unwrap_or_else(|| islands[g].items.iter().next().cloned().expect("non-empty island"));
            columns.push(Column { word: roof.item.clone(), island: islands[g].id, strength: b as f64, anchor });
        }
    }
    (scored, columns)
}

/// For each (roof, island) pair, the island member with the largest pairwise
/// co-occurrence with the roof (ties by id).
fn anchors_for(
    stream: &EventStream,
    roofs: &BTreeSet<&Item>,
    home: &HashMap<Item, usize>,
) -> BTreeMap<(Item, usize), Item> {
    let mut pair: BTreeMap<(&Item, &Item), u64> = BTreeMap::new();
    for event in stream.events() {
        for (w, &nw) in event.items.iter().filter(|(w, _)| roofs.contains(w)) {
            for (x, &nx) in event.items.iter().filter(|(x, _)| home.contains_key(*x) && *x != w) {
                *pair.entry((w, x)).or_insert(0) += u64::from(nw.min(nx));
            }
        }
    }
    let mut best: BTreeMap<(Item, usize), (u64, Item)> = BTreeMap::new();
    for ((w, x), weight) in pair {
        let g = home[x];
        let key = ((*w).clone(), g);
        match best.get(&key) {
            // x ascends within each w, so only a strictly larger weight replaces
            Some((bw, _)) if *bw >= weight => {}
            _ => {
                best.insert(key, (weight, x.clone()));
            }
        }
    }
    best.into_iter().map(|(k, (_, x))| (k, x)).collect()
}

pub fn assemble_map(stream: &EventStream, cfg: &KeyGraphConfig) -> KeyGraphMap {
    let graph = build_graph(stream, &cfg.graph);
    let islands = islands_from(&graph);
    let (roofs, dotted_edges) = extract_roofs(stream, &islands, cfg);

    let black_nodes: BTreeSet<Item> = graph.nodes.keys().cloned().collect();
    let mut red_nodes = BTreeSet::new();
    let mut keyword_nodes = BTreeSet::new();
    for roof in &roofs {
        if black_nodes.contains(&roof.item) {
            keyword_nodes.insert(roof.item.clone());
        } else {
            red_nodes.insert(roof.item.clone());
        }
    }

    let frequencies = if red_nodes.is_empty() {
        graph.nodes.clone()
    } else {
        let all = crate::cooccur::item_frequencies(stream);
        black_nodes
            .iter()
            .chain(red_nodes.iter())
            .map(|it| (it.clone(), all.get(it)))
            .collect()
    };

    KeyGraphMap {
        black_nodes,
        red_nodes,
        keyword_nodes,
        // every graph edge lies inside a component by construction
        solid_edges: graph.edges,
        dotted_edges,
        islands,
        roofs,
        frequencies,
    }
}

/// Island pairs joined through a common roof, sorted by `(from, to, via)`.
pub fn bridges(map: &KeyGraphMap) -> Vec<Bridge> {
    let mut touched: BTreeMap<&Item, BTreeSet<usize>> = BTreeMap::new();
    for col in &map.dotted_edges {
        touched.entry(&col.word).or_default().insert(col.island);
    }
    let mut out = Vec::new();
    for (via, islands) in touched {
        let ids: Vec<usize> = islands.into_iter().collect();
        for (i, &from) in ids.iter().enumerate() {
            for &to in &ids[i + 1..] {
                out.push(Bridge { from, to, via: via.clone() });
            }
        }
    }
    out.sort_by(|a, b| (a.from, a.to, &a.via).cmp(&(b.from, b.to, &b.via)));
    out
}
