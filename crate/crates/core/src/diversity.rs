//! Graph-based entropy (GBE) over sliding windows and structural-change signs.
//!
//! For each window the co-occurrence islands are rebuilt from that window's
//! baskets, every basket is assigned to the islands it touches, and the
//! entropy of the resulting cluster distribution is reported in bits.
//! Consecutive windows are then compared: a jump in entropy or a change in the
//! island structure (appearance, disappearance, separation, unification) is
//! a sign.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cooccur::{graph_of, GraphConfig};
use crate::entropy::{entropy_bits, EntropySign};
use crate::error::{Error, Result};
use crate::ingest::{Event, EventStream, Item, Timestamp};
use crate::keygraph::Island;

/// How a basket is attributed to an island.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    /// The basket holds at least one island item.
    #[default]
    AnyItem,
    /// The basket holds every island item.
    AllItems,
}

impl Membership {
    fn matches(self, event: &Event, island: &Island) -> bool {
        match self {
            Membership::AnyItem => island.items.iter().any(|it| event.contains(it)),
            Membership::AllItems => island.items.iter().all(|it| event.contains(it)),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClusterDistribution {
    /// Island id → number of baskets attributed to it. Only ids with count ≥ 1.
    pub freqs: BTreeMap<usize, u64>,
    pub probs: BTreeMap<usize, f64>,
    pub total: u64,
}

impl ClusterDistribution {
    pub fn from_freqs(freqs: BTreeMap<usize, u64>) -> Self {
        let freqs: BTreeMap<usize, u64> = freqs.into_iter().filter(|&(_, f)| f > 0).collect();
        let total: u64 = freqs.values().sum();
        let probs = freqs.iter().map(|(&id, &f)| (id, f as f64 / total as f64)).collect();
        ClusterDistribution { freqs, probs, total }
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }
}

pub fn event_cluster_distribution(
    events: &[Event],
    islands: &[Island],
    membership: Membership,
) -> ClusterDistribution {
    let mut freqs = BTreeMap::new();
    for event in events {
        for island in islands {
            if membership.matches(event, island) {
                *freqs.entry(island.id).or_insert(0) += 1;
            }
        }
    }
    ClusterDistribution::from_freqs(freqs)
}

pub fn gbe(dist: &ClusterDistribution, sign: EntropySign) -> Result<f64> {
    if dist.is_empty() {
        return Err(Error::UndefinedEntropy);
    }
    entropy_bits(dist.freqs.values().copied(), sign)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbeConfig {
    pub window_len: i64,
    pub step: i64,
    pub graph: GraphConfig,
    pub membership: Membership,
    /// Minimum Jaccard similarity for two islands to be the same cluster.
    pub jaccard: f64,
    /// 0 reports every nonzero entropy change.
    pub entropy_delta_threshold: f64,
    pub sign: EntropySign,
    pub parallel: bool,
}

impl Default for GbeConfig {
    fn default() -> Self {
        GbeConfig {
            window_len: 7,
            step: 7,
            graph: GraphConfig::default(),
            membership: Membership::AnyItem,
            jaccard: 0.5,
            entropy_delta_threshold: 0.0,
            sign: EntropySign::Negated,
            parallel: false,
        }
    }
}

impl GbeConfig {
    /// Returns warnings for legal but suspicious settings.
    pub fn validate(&self) -> Result<Vec<String>> {
        self.graph.validate()?;
        if self.window_len <= 0 || self.step <= 0 {
            return Err(Error::Config("window_len and step must be positive".into()));
        }
        if !(self.jaccard > 0.0 && self.jaccard <= 1.0) {
            return Err(Error::Config(format!("jaccard threshold {} not in (0, 1]", self.jaccard)));
        }
        if self.entropy_delta_threshold.is_nan() || self.entropy_delta_threshold < 0.0 {
            return Err(Error::Config("entropy_delta_threshold must be >= 0".into()));
        }
        let mut warnings = Vec::new();
        if self.step > self.window_len {
            warnings.push(format!(
                "step {} exceeds window_len {}; some events fall between windows",
                self.step, self.window_len
            ));
        }
        Ok(warnings)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyReading {
    pub index: usize,
    pub window_start: Timestamp,
    pub window_end: Timestamp,
    pub n_events: usize,
    /// Unset when no basket falls in any cluster.
    pub hg: Option<f64>,
    pub n_clusters: usize,
    pub islands: Vec<Island>,
}

impl EntropyReading {
    pub fn is_empty(&self) -> bool {
        self.hg.is_none()
    }
}

/// Start times `t0 + k*step`, stopping after the first window that reaches past
/// `t_last`.
pub(crate) fn window_starts(t0: Timestamp, t_last: Timestamp, len: i64, step: i64) -> Vec<Timestamp> {
    let mut starts = Vec::new();
    let mut start = t0;
    loop {
        starts.push(start);
        if start + len > t_last {
            break;
        }
        start += step;
    }
    starts
}

pub fn gbe_series(stream: &EventStream, cfg: &GbeConfig) -> Vec<EntropyReading> {
    let (Some(t0), Some(t_last)) = (stream.first_t(), stream.last_t()) else {
        return Vec::new();
    };
    let starts = window_starts(t0, t_last, cfg.window_len, cfg.step);
    let reading = |(index, &start): (usize, &Timestamp)| {
        let end = start + cfg.window_len;
        let events = stream.window(start, end);
        let islands: Vec<Island> = crate::cooccur::connected_components(&graph_of(events, &cfg.graph))
            .into_iter()
            .enumerate()
            .map(|(i, items)| Island { id: i + 1, items })
            .collect();
        let dist = event_cluster_distribution(events, &islands, cfg.membership);
        EntropyReading {
            index,
            window_start: start,
            window_end: end,
            n_events: events.len(),
            hg: gbe(&dist, cfg.sign).ok(),
            n_clusters: dist.freqs.len(),
            islands,
        }
    };
    if cfg.parallel {
        starts.par_iter().enumerate().map(reading).collect()
    } else {
        starts.iter().enumerate().map(reading).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeKind {
    Appearance,
    Disappearance,
    Separation,
    Unification,
}

impl ChangeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ChangeKind::Appearance => "appearance",
            ChangeKind::Disappearance => "disappearance",
            ChangeKind::Separation => "separation",
            ChangeKind::Unification => "unification",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuralChange {
    pub kind: ChangeKind,
    /// Island ids in the earlier window.
    pub before: Vec<usize>,
    /// Island ids in the later window.
    pub after: Vec<usize>,
    pub window_end: Timestamp,
}

pub fn jaccard(a: &BTreeSet<Item>, b: &BTreeSet<Item>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Matches islands across two windows by Jaccard similarity `>= tau` and
/// classifies what happened to them.
pub fn diff_clusters(
    prev: &[Island],
    next: &[Island],
    tau: f64,
    window_end: Timestamp,
) -> Vec<StructuralChange> {
    let mut forward: Vec<Vec<usize>> = vec![Vec::new(); prev.len()];
    let mut backward: Vec<Vec<usize>> = vec![Vec::new(); next.len()];
    for (i, p) in prev.iter().enumerate() {
        for (j, n) in next.iter().enumerate() {
            if jaccard(&p.items, &n.items) >= tau {
                forward[i].push(j);
                backward[j].push(i);
            }
        }
    }

    let change = |kind, before: Vec<usize>, after: Vec<usize>| StructuralChange { kind, before, after, window_end };
    let mut out = Vec::new();
    for (i, matched) in forward.iter().enumerate() {
        match matched.len() {
            0 => out.push(change(ChangeKind::Disappearance, vec![prev[i].id], vec![])),
            1 => {}
            _ => out.push(change(
                ChangeKind::Separation,
                vec![prev[i].id],
                matched.iter().map(|&j| next[j].id).collect(),
            )),
        }
    }
    for (j, matched) in backward.iter().enumerate() {
        match matched.len() {
            0 => out.push(change(ChangeKind::Appearance, vec![], vec![next[j].id])),
            1 => {}
            _ => out.push(change(
                ChangeKind::Unification,
                matched.iter().map(|&i| prev[i].id).collect(),
                vec![next[j].id],
            )),
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangeSign {
    /// Index of the later window of the pair.
    pub window: usize,
    pub window_start: Timestamp,
    pub window_end: Timestamp,
    /// Unset when either window has undefined entropy.
    pub delta_hg: Option<f64>,
    pub changes: Vec<StructuralChange>,
}

pub fn change_signs(series: &[EntropyReading], cfg: &GbeConfig) -> Vec<ChangeSign> {
    series
        .windows(2)
        .filter_map(|pair| {
            let (prev, cur) = (&pair[0], &pair[1]);
            let changes = diff_clusters(&prev.islands, &cur.islands, cfg.jaccard, cur.window_end);
            let delta_hg = prev.hg.zip(cur.hg).map(|(a, b)| b - a);
            let entropy_jump = delta_hg
                .map(f64::abs)
                .is_some_and(|d| d > 0.0 && d >= cfg.entropy_delta_threshold);
            (entropy_jump || !changes.is_empty()).then_some(ChangeSign {
                window: cur.index,
                window_start: cur.window_start,
                window_end: cur.window_end,
                delta_hg,
                changes,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn island(id: usize, items: &[&str]) -> Island {
        Island { id, items: items.iter().map(|s| Item::new(*s).unwrap()).collect() }
    }

    fn dist(events: &[Event]) -> ClusterDistribution {
        let islands = vec![island(1, &["a"]), island(2, &["b"])];
        event_cluster_distribution(events, &islands, Membership::AnyItem)
    }

    #[test]
    fn single_cluster_distribution() {
        let d = dist(&vec![Event::of(0, &["a"]); 4]);
        assert_eq!(d.probs, BTreeMap::from([(1, 1.0)]));
        assert_eq!(gbe(&d, EntropySign::Negated).unwrap(), 0.0);
    }

    #[test]
    fn even_and_uneven_distributions() {
        let even = dist(&[Event::of(0, &["a"]), Event::of(0, &["a"]), Event::of(0, &["b"]), Event::of(0, &["b"])]);
        assert_eq!(even.probs, BTreeMap::from([(1, 0.5), (2, 0.5)]));
        assert_eq!(gbe(&even, EntropySign::Negated).unwrap(), 1.0);

        let uneven = dist(&[Event::of(0, &["a"]), Event::of(0, &["a"]), Event::of(0, &["a"]), Event::of(0, &["b"])]);
        assert_eq!(uneven.probs, BTreeMap::from([(1, 0.75), (2, 0.25)]));
        assert!((gbe(&uneven, EntropySign::Negated).unwrap() - 0.811278).abs() < 1e-6);
    }

    #[test]
    fn basket_can_count_toward_several_clusters() {
        let d = dist(&[Event::of(0, &["a", "b"])]);
        assert_eq!(d.freqs, BTreeMap::from([(1, 1), (2, 1)]));
        assert_eq!(d.total, 2);
    }

    #[test]
    fn all_items_membership_requires_containment() {
        let islands = vec![island(1, &["a", "b"])];
        let events = [Event::of(0, &["a"]), Event::of(0, &["a", "b", "c"])];
        let any = event_cluster_distribution(&events, &islands, Membership::AnyItem);
        let all = event_cluster_distribution(&events, &islands, Membership::AllItems);
        assert_eq!(any.freqs[&1], 2);
        assert_eq!(all.freqs[&1], 1);
    }

    #[test]
    fn empty_distribution_is_undefined() {
        let d = dist(&[Event::of(0, &["zzz"])]);
        assert!(d.is_empty());
        assert!(matches!(gbe(&d, EntropySign::Negated), Err(Error::UndefinedEntropy)));
    }

    #[test]
    fn diff_identical_is_empty() {
        let x = vec![island(1, &["a", "b"]), island(2, &["c"])];
        assert!(diff_clusters(&x, &x, 1.0, 0).is_empty());
        assert!(diff_clusters(&x, &x, 0.01, 0).is_empty());
    }

    #[test]
    fn diff_half_split_is_separation() {
        let prev = vec![island(1, &["a", "b", "c", "d"])];
        let next = vec![island(1, &["a", "b"]), island(2, &["c", "d"])];
        let changes = diff_clusters(&prev, &next, 0.5, 14);
        assert_eq!(
            changes,
            vec![StructuralChange { kind: ChangeKind::Separation, before: vec![1], after: vec![1, 2], window_end: 14 }]
        );
        let merged = diff_clusters(&next, &prev, 0.5, 21);
        assert_eq!(merged[0].kind, ChangeKind::Unification);
        assert_eq!(merged[0].before, vec![1, 2]);
    }

    #[test]
    fn diff_appearance_and_disappearance() {
        let x = vec![island(1, &["x"])];
        assert_eq!(diff_clusters(&[], &x, 0.5, 0)[0].kind, ChangeKind::Appearance);
        assert_eq!(diff_clusters(&x, &[], 0.5, 0)[0].kind, ChangeKind::Disappearance);
    }

    #[test]
    fn window_starts_cover_span() {
        assert_eq!(window_starts(0, 83, 7, 7).len(), 12);
        assert_eq!(window_starts(0, 0, 7, 7), vec![0]);
        assert_eq!(window_starts(0, 10, 4, 2), vec![0, 2, 4, 6, 8]);
        assert_eq!(window_starts(0, 9, 4, 2), vec![0, 2, 4, 6]);
    }

    #[test]
    fn config_validation() {
        assert!(GbeConfig::default().validate().unwrap().is_empty());
        let wide = GbeConfig { step: 10, window_len: 5, ..Default::default() };
        assert_eq!(wide.validate().unwrap().len(), 1);
        assert!(GbeConfig { jaccard: 0.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn empty_stream_empty_series() {
        assert!(gbe_series(&EventStream::default(), &GbeConfig::default()).is_empty());
    }

    #[test]
    fn constant_series_threshold_suppresses_signs() {
        let reading = |index: usize| EntropyReading {
            index,
            window_start: index as i64,
            window_end: index as i64 + 1,
            n_events: 3,
            hg: Some(1.0),
            n_clusters: 2,
            islands: vec![island(1, &["a"]), island(2, &["b"])],
        };
        let series: Vec<_> = (0..5).map(reading).collect();
        let cfg = GbeConfig { entropy_delta_threshold: 0.1, ..Default::default() };
        assert!(change_signs(&series, &cfg).is_empty());
        let strict = GbeConfig { entropy_delta_threshold: 5.0, jaccard: 1.0, ..Default::default() };
        assert!(change_signs(&series, &strict).is_empty());
    }
}
