//! DOT and CSV views of analysis results. JSON goes through serde directly.

use std::fmt::Write as _;

use serde::Serialize;

use crate::change::{ChangePoint, MagnitudeSample};
use crate::diversity::{ChangeSign, EntropyReading};
use crate::keygraph::{bridges, Bridge, KeyGraphMap};
use crate::resi::{PrecursorFlag, ResiReading};

fn quote(id: &str) -> String {
    let mut s = String::with_capacity(id.len() + 2);
    s.push('"');
    for ch in id.chars() {
        match ch {
            '"' => s.push_str("\\\""),
            '\\' => s.push_str("\\\\"),
            _ => s.push(ch),
        }
    }
    s.push('"');
    s
}

fn float(x: f64) -> String {
    format!("{x:.9}")
}

/// Islands become `cluster_<id>` subgraphs; black nodes are filled,
/// keywords get a second periphery, red roofs sit outside any cluster and
/// dotted columns are dashed red edges.
pub fn keygraph_dot(map: &KeyGraphMap) -> String {
    let mut out = String::new();
    out.push_str("graph keygraph {\n");
    out.push_str("  node [shape=ellipse];\n");
    let freq = |it| map.frequencies.get(it).copied().unwrap_or(0);
    for island in &map.islands {
        let _ = writeln!(out, "  subgraph cluster_{} {{", island.id);
        let _ = writeln!(out, "    label=\"island {}\";", island.id);
        for item in &island.items {
            let peripheries = if map.keyword_nodes.contains(item) { ", peripheries=2" } else { "" };
            let _ = writeln!(
                out,
                "    {} [label={}, style=filled, fillcolor=black, fontcolor=white{peripheries}];",
                quote(item.as_str()),
                quote(&format!("{item} ({})", freq(item))),
            );
        }
        out.push_str("  }\n");
    }
    for item in &map.red_nodes {
        let _ = writeln!(
            out,
            "  {} [label={}, color=red, fontcolor=red];",
            quote(item.as_str()),
            quote(&format!("{item} ({})", freq(item))),
        );
    }
    for edge in &map.solid_edges {
        let _ = writeln!(
            out,
            "  {} -- {} [weight={}, label=\"{}\"];",
            quote(edge.a.as_str()),
            quote(edge.b.as_str()),
            edge.weight,
            edge.weight
        );
    }
    let mut dotted: Vec<_> = map.dotted_edges.iter().collect();
    dotted.sort_by(|a, b| (&a.word, a.island).cmp(&(&b.word, b.island)));
    for col in dotted {
        let _ = writeln!(
            out,
            "  {} -- {} [style=dashed, color=red, label=\"{}\"];",
            quote(col.word.as_str()),
            quote(col.anchor.as_str()),
            col.strength
        );
    }
    out.push_str("}\n");
    out
}

#[derive(Serialize)]
pub struct KeyGraphDocument<'a> {
    #[serde(flatten)]
    pub map: &'a KeyGraphMap,
    pub bridges: Vec<Bridge>,
}

pub fn keygraph_json(map: &KeyGraphMap) -> serde_json::Result<String> {
    let doc = KeyGraphDocument { map, bridges: bridges(map) };
    serde_json::to_string_pretty(&doc).map(|s| s + "\n")
}

pub fn gbe_series_csv(series: &[EntropyReading], signs: &[ChangeSign]) -> String {
    let mut out = String::from("window_start,window_end,n_events,Hg,n_clusters,changes\n");
    for r in series {
        let changes: Vec<&str> = signs
            .iter()
            .filter(|s| s.window == r.index)
            .flat_map(|s| s.changes.iter().map(|c| c.kind.as_str()))
            .collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.window_start,
            r.window_end,
            r.n_events,
            r.hg.map(float).unwrap_or_default(),
            r.n_clusters,
            changes.join(";")
        );
    }
    out
}

pub fn magnitude_csv(samples: &[MagnitudeSample], points: &[ChangePoint]) -> String {
    let mut out = String::from("t,magnitude,detected\n");
    for s in samples {
        let hit = points.iter().any(|p| p.t == s.t);
        let _ = writeln!(out, "{},{},{}", s.t, float(s.magnitude), u8::from(hit));
    }
    out
}

pub fn resi_series_csv(series: &[ResiReading]) -> String {
    let mut out = String::from("t,H,n_clusters,n_events,flagged\n");
    for r in series {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.t,
            r.h.map(float).unwrap_or_default(),
            r.n_clusters,
            r.n_events,
            u8::from(r.flagged)
        );
    }
    out
}

pub fn resi_flags_csv(flags: &[PrecursorFlag]) -> String {
    let mut out = String::from("t,rise_slope,flat_slope\n");
    for f in flags {
        let _ = writeln!(out, "{},{},{}", f.t, float(f.rise_slope), float(f.flat_slope));
    }
    out
}
