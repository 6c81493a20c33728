//! Brute-force recomputation of counts, distributions and entropies, diffed
//! against the fast paths. Nothing here reuses the fast-path helpers.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::cooccur::{frequencies_of, graph_of, pair_weights};
use crate::diversity::{event_cluster_distribution, gbe, gbe_series, GbeConfig, Membership};
use crate::entropy::EntropySign;
use crate::ingest::{Event, EventStream, Item, SeismicEvent};
use crate::keygraph::Island;
use crate::resi::{grid_events, resi_series, Cell, RegionSpec, ResiConfig};

pub const ENTROPY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub compared: usize,
    pub mismatches: usize,
    pub detail: Option<String>,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.mismatches == 0
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct OracleReport {
    pub checks: Vec<Check>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let status = if c.passed() { "PASS" } else { "FAIL" };
            out.push_str(&format!("{status} {} ({} compared, {} mismatched)", c.name, c.compared, c.mismatches));
            if let Some(d) = &c.detail {
                out.push_str(&format!(": {d}"));
            }
            out.push('\n');
        }
        out.push_str(if self.passed() { "oracle: PASS\n" } else { "oracle: FAIL\n" });
        out
    }
}

#[derive(Default)]
struct Tally {
    compared: usize,
    mismatches: usize,
    first: Option<String>,
}

impl Tally {
    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.compared += 1;
        if !ok {
            self.mismatches += 1;
            if self.first.is_none() {
                self.first = Some(what());
            }
        }
    }

    fn finish(self, name: &str) -> Check {
        Check { name: name.to_string(), compared: self.compared, mismatches: self.mismatches, detail: self.first }
    }
}

/// Each occurrence listed separately, as it appeared in the input.
fn expand(event: &Event) -> Vec<&Item> {
    event.items.iter().flat_map(|(it, &n)| std::iter::repeat_n(it, n as usize)).collect()
}

fn count_in(list: &[&Item], target: &Item) -> u64 {
    list.iter().filter(|x| **x == target).count() as u64
}

pub fn naive_cooccurrence(events: &[Event], a: &Item, b: &Item) -> u64 {
    events
        .iter()
        .map(|e| {
            let list = expand(e);
            count_in(&list, a).min(count_in(&list, b))
        })
        .sum()
}

pub fn naive_distribution(events: &[Event], islands: &[Island], membership: Membership) -> BTreeMap<usize, u64> {
    let mut out = BTreeMap::new();
    for island in islands {
        let mut n = 0;
        for e in events {
            let list = expand(e);
            let hits = island.items.iter().filter(|it| count_in(&list, it) > 0).count();
            let member = match membership {
                Membership::AnyItem => hits > 0,
                Membership::AllItems => hits == island.items.len(),
            };
            if member {
                n += 1;
            }
        }
        if n > 0 {
            out.insert(island.id, n);
        }
    }
    out
}

/// `log2 T - (1/T) Σ f log2 f`, algebraically equal to `-Σ p log2 p`.
pub fn naive_entropy(freqs: &[u64]) -> Option<f64> {
    let total: u64 = freqs.iter().sum();
    if total == 0 {
        return None;
    }
    let t = total as f64;
    let s: f64 = freqs.iter().filter(|&&f| f > 0).map(|&f| f as f64 * (f as f64).log2()).sum();
    Some(t.log2() - s / t)
}

pub fn naive_grid(catalog: &[SeismicEvent], region: &RegionSpec, start: i64, end: i64) -> BTreeMap<Cell, u64> {
    let (rows, cols) = (region.rows(), region.cols());
    let mut out = BTreeMap::new();
    for ev in catalog.iter().filter(|e| e.t >= start && e.t < end) {
        'search: for row in 0..rows {
            let lo = region.lat_min + f64::from(row) * region.cell_deg;
            let hi = if row + 1 == rows { region.lat_max } else { region.lat_min + f64::from(row + 1) * region.cell_deg };
            let in_row = ev.lat >= lo && (ev.lat < hi || (row + 1 == rows && ev.lat <= hi));
            if !in_row {
                continue;
            }
            for col in 0..cols {
                let lo = region.lon_min + f64::from(col) * region.cell_deg;
                let hi = if col + 1 == cols { region.lon_max } else { region.lon_min + f64::from(col + 1) * region.cell_deg };
                if ev.lon >= lo && (ev.lon < hi || (col + 1 == cols && ev.lon <= hi)) {
                    *out.entry(Cell { row, col }).or_insert(0) += 1;
                    break 'search;
                }
            }
        }
    }
    out
}

fn signed(h: f64, sign: EntropySign) -> f64 {
    match sign {
        EntropySign::Negated => h,
        EntropySign::AsPrinted => -h,
    }
}

fn entropy_matches(fast: Option<f64>, slow: Option<f64>) -> bool {
    match (fast, slow) {
        (Some(a), Some(b)) => (a - b).abs() <= ENTROPY_TOLERANCE,
        (None, None) => true,
        _ => false,
    }
}

/// Compares frequencies, all pairwise co-occurrences, and the cluster
/// distribution and entropy of the whole stream and of every GBE window.
/// `inject_fault` corrupts the fast path so the harness can be shown to fail.
pub fn check_baskets(stream: &EventStream, cfg: &GbeConfig, inject_fault: bool) -> OracleReport {
    let events = stream.events();
    let mut report = OracleReport::default();

    let freqs = frequencies_of(events);
    let mut tally = Tally::default();
    for (item, &fast) in &freqs.counts {
        let slow: u64 = events.iter().map(|e| count_in(&expand(e), item)).sum();
        tally.record(fast == slow, || format!("freq({item}) fast={fast} naive={slow}"));
    }
    report.checks.push(tally.finish("frequencies"));

    let vocab: Vec<Item> = freqs.counts.keys().cloned().collect();
    let mut fast_pairs = pair_weights(events, &vocab);
    if inject_fault && vocab.len() >= 2 {
        *fast_pairs.entry((0, 1)).or_insert(0) += 1;
    }
    let mut tally = Tally::default();
    for i in 0..vocab.len() {
        for j in i + 1..vocab.len() {
            let fast = fast_pairs.get(&(i, j)).copied().unwrap_or(0);
            let slow = naive_cooccurrence(events, &vocab[i], &vocab[j]);
            tally.record(fast == slow, || format!("co({}, {}) fast={fast} naive={slow}", vocab[i], vocab[j]));
        }
    }
    if inject_fault && vocab.len() < 2 {
        tally.record(false, || "injected fault".to_string());
    }
    report.checks.push(tally.finish("cooccurrence"));

    let mut dist_tally = Tally::default();
    let mut entropy_tally = Tally::default();
    let mut compare = |label: &str, window: &[Event], islands: &[Island], fast_h: Option<f64>| {
        let fast = event_cluster_distribution(window, islands, cfg.membership);
        let slow = naive_distribution(window, islands, cfg.membership);
        dist_tally.record(fast.freqs == slow, || format!("{label}: fast={:?} naive={slow:?}", fast.freqs));
        let mut fast_h = fast_h;
        if inject_fault {
            fast_h = fast_h.map(|h| h + 1e-6);
        }
        let slow_h = naive_entropy(&slow.values().copied().collect::<Vec<_>>()).map(|h| signed(h, cfg.sign));
        entropy_tally.record(entropy_matches(fast_h, slow_h), || format!("{label}: fast={fast_h:?} naive={slow_h:?}"));
    };

    if !events.is_empty() {
        let islands: Vec<Island> = crate::cooccur::connected_components(&graph_of(events, &cfg.graph))
            .into_iter()
            .enumerate()
            .map(|(i, items)| Island { id: i + 1, items })
            .collect();
        let h = gbe(&event_cluster_distribution(events, &islands, cfg.membership), cfg.sign).ok();
        compare("whole stream", events, &islands, h);
    }
    for reading in gbe_series(stream, cfg) {
        let window: Vec<Event> = events
            .iter()
            .filter(|e| e.t >= reading.window_start && e.t < reading.window_end)
            .cloned()
            .collect();
        compare(&format!("window {}", reading.index), &window, &reading.islands, reading.hg);
    }
    report.checks.push(dist_tally.finish("cluster distributions"));
    report.checks.push(entropy_tally.finish("entropies"));
    report
}

/// Compares gridded counts and regional entropy for every window.
pub fn check_catalog(catalog: &[SeismicEvent], cfg: &ResiConfig, inject_fault: bool) -> OracleReport {
    let mut report = OracleReport::default();
    let kept: Vec<SeismicEvent> = catalog
        .iter()
        .filter(|e| cfg.min_mag.is_none_or(|m| e.mag.is_some_and(|x| x >= m)))
        .cloned()
        .collect();
    let mut grid_tally = Tally::default();
    let mut entropy_tally = Tally::default();
    for reading in resi_series(catalog, cfg) {
        let start = reading.t - cfg.window;
        let mut fast = grid_events(&kept, &cfg.region, start, reading.t).cells;
        if inject_fault {
            fast.entry(Cell { row: 0, col: 0 }).and_modify(|n| *n += 1).or_insert(1);
        }
        let slow = naive_grid(&kept, &cfg.region, start, reading.t);
        grid_tally.record(fast == slow, || format!("window ending {}: grids differ", reading.t));

        let clusters = crate::resi::cluster_epicenters(&slow, cfg.neighborhood);
        let slow_h = naive_entropy(&clusters.iter().map(|c| c.n_events).collect::<Vec<_>>()).map(|h| signed(h, cfg.sign));
        entropy_tally.record(entropy_matches(reading.h, slow_h), || {
            format!("window ending {}: fast={:?} naive={slow_h:?}", reading.t, reading.h)
        });
    }
    report.checks.push(grid_tally.finish("grid counts"));
    report.checks.push(entropy_tally.finish("regional entropies"));
    report
}
