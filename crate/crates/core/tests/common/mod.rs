#![allow(dead_code)]

use std::path::Path;

use chancekit::ingest::{Event, EventStream, SeismicEvent};
use chancekit::resi::{RegionSpec, ResiConfig};
use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Up to `max_events` baskets of 1..=4 draws from `max_items` items, over ticks 0..30.
pub fn random_stream(rng: &mut ChaCha8Rng, max_events: usize, max_items: usize) -> EventStream {
    let n_events = rng.gen_range(1..=max_events);
    let n_items = rng.gen_range(1..=max_items);
    let events = (0..n_events)
        .map(|_| {
            let t = rng.gen_range(0..30);
            let k = rng.gen_range(1..=4);
            let ids: Vec<String> = (0..k).map(|_| format!("i{}", rng.gen_range(0..n_items))).collect();
            Event::from_items(t, ids.into_iter().map(|s| chancekit::Item::new(s).unwrap()))
        })
        .collect();
    EventStream::new(events)
}

/// Two pairs joined by a bridging basket {b, x, c} for ten weeks of seven
/// ticks; the bridge stops at week 10 and the graph splits in two.
pub fn split_stream() -> EventStream {
    let mut events = Vec::new();
    for week in 0..20i64 {
        let base = week * 7;
        for d in 0..3 {
            events.push(Event::of(base + d, &["a", "b"]));
            events.push(Event::of(base + d + 3, &["c", "d"]));
        }
        if week < 10 {
            events.push(Event::of(base + 6, &["b", "x", "c"]));
            events.push(Event::of(base + 6, &["b", "x", "c"]));
        }
    }
    EventStream::new(events)
}

pub const MIX_ITEMS: [&str; 10] = ["a0", "a1", "a2", "a3", "a4", "b0", "b1", "b2", "b3", "b4"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mix {
    A,
    B,
}

impl Mix {
    fn weights(self) -> [u32; 10] {
        match self {
            Mix::A => [8, 6, 4, 2, 1, 1, 1, 1, 1, 1],
            Mix::B => [1, 1, 1, 1, 1, 8, 6, 4, 2, 1],
        }
    }
}

/// `per_tick` baskets of three draws per tick; each phase lasts `len` ticks.
pub fn mix_stream(seed: u64, phases: &[(Mix, i64)], per_tick: usize) -> EventStream {
    let mut rng = rng(seed);
    let mut events = Vec::new();
    let mut t = 0;
    for &(mix, len) in phases {
        let dist = WeightedIndex::new(mix.weights()).unwrap();
        for _ in 0..len {
            for _ in 0..per_tick {
                let ids: Vec<&str> = (0..3).map(|_| MIX_ITEMS[dist.sample(&mut rng)]).collect();
                events.push(Event::of(t, &ids));
            }
            t += 1;
        }
    }
    EventStream::new(events)
}

pub fn resi_config() -> ResiConfig {
    ResiConfig {
        region: RegionSpec { lat_min: 30.0, lat_max: 40.0, lon_min: 130.0, lon_max: 140.0, cell_deg: 0.5 },
        window: 10,
        step: 2,
        rise_lookback: 4,
        flat_lookback: 2,
        ..ResiConfig::default()
    }
}

pub const SWARM: (f64, f64) = (35.25, 135.25);
pub const DISTANT: [(f64, f64); 3] = [(31.25, 131.25), (38.75, 131.25), (31.25, 138.75)];
pub const BLOCK: [(f64, f64); 4] = [(35.25, 135.25), (35.25, 135.75), (35.75, 135.25), (35.75, 135.75)];

/// Ticks 0..40: one swarm cell, four events per tick. Ticks 40..100: one
/// event per tick at the swarm and three distant cells. Ticks 100..140:
/// four events per tick in one 2x2 block.
pub fn resi_catalog() -> Vec<SeismicEvent> {
    let ev = |t: i64, (lat, lon): (f64, f64)| SeismicEvent { t, lat, lon, mag: Some(3.0) };
    let mut out = Vec::new();
    for t in 0..40 {
        out.extend((0..4).map(|_| ev(t, SWARM)));
    }
    for t in 40..100 {
        out.push(ev(t, SWARM));
        out.extend(DISTANT.iter().map(|&p| ev(t, p)));
    }
    for t in 100..140 {
        out.extend(BLOCK.iter().map(|&p| ev(t, p)));
    }
    out
}

/// The first reading whose window lies entirely in the four-cluster phase.
pub const RESI_PLATEAU_ONSET: i64 = 50;

pub fn toy_stream() -> EventStream {
    let mut events = Vec::new();
    for t in 0..3 {
        events.push(Event::of(t, &["a", "b"]));
        events.push(Event::of(t, &["d", "e"]));
    }
    events.push(Event::of(3, &["a", "b", "c"]));
    events.push(Event::of(3, &["d", "e", "c"]));
    EventStream::new(events)
}

pub fn write_jsonl(stream: &EventStream, path: &Path) {
    let mut buf = Vec::new();
    stream.write_jsonl(&mut buf).unwrap();
    std::fs::write(path, buf).unwrap();
}

pub fn write_catalog(events: &[SeismicEvent], path: &Path) {
    let mut out = String::from("t,lat,lon,mag\n");
    for e in events {
        let mag = e.mag.map(|m| m.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{},{}\n", e.t, e.lat, e.lon, mag));
    }
    std::fs::write(path, out).unwrap();
}

/// Minimal checker for the undirected DOT subset the emitter produces:
/// balanced braces, quoted ids, `--` edges and bracketed attribute lists.
pub fn check_dot(src: &str) -> Result<(), String> {
    let mut lines = src.lines();
    let header = lines.next().ok_or("empty document")?;
    if !header.starts_with("graph ") || !header.ends_with('{') {
        return Err(format!("bad header `{header}`"));
    }
    let mut depth = 1usize;
    for line in lines {
        let l = line.trim();
        if l.is_empty() {
            continue;
        }
        if depth == 0 {
            return Err(format!("content after closing brace: `{l}`"));
        }
        if l == "}" {
            depth -= 1;
            continue;
        }
        if let Some(rest) = l.strip_prefix("subgraph ") {
            let name = rest.strip_suffix(" {").ok_or(format!("bad subgraph `{l}`"))?;
            if !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(format!("bad subgraph id `{name}`"));
            }
            depth += 1;
            continue;
        }
        let stmt = l.strip_suffix(';').ok_or(format!("missing `;` in `{l}`"))?;
        if let Some((key, value)) = stmt.split_once('=') {
            if !stmt.contains('[') {
                if key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') && is_id(value) {
                    continue;
                }
                return Err(format!("bad attribute statement `{l}`"));
            }
        }
        let (head, attrs) = match stmt.find('[') {
            Some(i) => (stmt[..i].trim(), Some(&stmt[i..])),
            None => (stmt, None),
        };
        if let Some(attrs) = attrs {
            check_attrs(attrs)?;
        }
        let parts: Vec<&str> = split_edge(head);
        let node_kw = matches!(head, "node" | "edge" | "graph");
        if !node_kw && !parts.iter().all(|p| is_id(p)) {
            return Err(format!("bad statement head `{head}`"));
        }
    }
    if depth != 0 {
        return Err("unbalanced braces".into());
    }
    Ok(())
}

fn split_edge(head: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut rest = head;
    loop {
        match find_unquoted(rest, " -- ") {
            Some(i) => {
                parts.push(rest[..i].trim());
                rest = &rest[i + 4..];
            }
            None => {
                parts.push(rest.trim());
                return parts;
            }
        }
    }
}

fn find_unquoted(s: &str, pat: &str) -> Option<usize> {
    let bytes = s.as_bytes();
    let mut in_quote = false;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' if in_quote => i += 1,
            b'"' => in_quote = !in_quote,
            _ if !in_quote && s[i..].starts_with(pat) => return Some(i),
            _ => {}
        }
        i += 1;
    }
    None
}

fn is_id(s: &str) -> bool {
    let s = s.trim();
    if let Some(inner) = s.strip_prefix('"').and_then(|r| r.strip_suffix('"')) {
        let mut chars = inner.chars();
        while let Some(c) = chars.next() {
            match c {
                '\\' => {
                    if chars.next().is_none() {
                        return false;
                    }
                }
                '"' => return false,
                _ => {}
            }
        }
        return true;
    }
    if s.parse::<f64>().is_ok() {
        return true;
    }
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn check_attrs(attrs: &str) -> Result<(), String> {
    let inner = attrs
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or(format!("bad attribute list `{attrs}`"))?;
    let mut rest = inner;
    while !rest.trim().is_empty() {
        let end = find_unquoted(rest, ",").unwrap_or(rest.len());
        let pair = &rest[..end];
        let (k, v) = pair.split_once('=').ok_or(format!("bad attribute `{pair}`"))?;
        if !is_id(k) || !is_id(v) {
            return Err(format!("bad attribute `{pair}`"));
        }
        rest = if end < rest.len() { &rest[end + 1..] } else { "" };
    }
    Ok(())
}
