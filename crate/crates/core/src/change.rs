//! Change points between adjacent market windows, trend segments between
//! change points, and explanations of each change as a trend transition.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cooccur::item_frequencies;
use crate::diversity::ChangeSign;
use crate::error::{Error, Result};
use crate::ingest::{EventStream, Item, Timestamp};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    L1,
    #[default]
    L2,
    Cosine,
}

impl Metric {
    /// Largest distance between two normalized vectors.
    pub fn upper_bound(self) -> f64 {
        match self {
            Metric::L1 => 2.0,
            Metric::L2 => std::f64::consts::SQRT_2,
            Metric::Cosine => 1.0,
        }
    }
}

/// Relative event-occurrence frequencies of the tracked items in a window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketVector {
    pub window_start: Timestamp,
    pub window_end: Timestamp,
    pub weights: BTreeMap<Item, f64>,
    /// No tracked item occurred in the window; all weights are zero.
    pub empty: bool,
}

/// The `size` most frequent items, ties by id.
pub fn vocabulary(stream: &EventStream, size: usize) -> Vec<Item> {
    let freqs = item_frequencies(stream);
    let mut vocab: Vec<Item> = freqs.ranked().into_iter().take(size).map(|(it, _)| it.clone()).collect();
    vocab.sort();
    vocab
}

/// Share of baskets in `[start, end)` containing each vocabulary item, normalized
/// over the vocabulary.
pub fn market_vector(stream: &EventStream, start: Timestamp, end: Timestamp, vocab: &[Item]) -> MarketVector {
    let mut counts: BTreeMap<Item, u64> = vocab.iter().map(|it| (it.clone(), 0)).collect();
    for event in stream.window(start, end) {
        for item in event.items.keys() {
            if let Some(c) = counts.get_mut(item) {
                *c += 1;
            }
        }
    }
    let total: u64 = counts.values().sum();
    let weights = counts
        .into_iter()
        .map(|(it, c)| (it, if total == 0 { 0.0 } else { c as f64 / total as f64 }))
        .collect();
    MarketVector { window_start: start, window_end: end, weights, empty: total == 0 }
}

pub fn change_magnitude(a: &MarketVector, b: &MarketVector, metric: Metric) -> Result<f64> {
    if a.weights.len() != b.weights.len() || a.weights.keys().zip(b.weights.keys()).any(|(x, y)| x != y) {
        return Err(Error::VocabularyMismatch);
    }
    let pairs = a.weights.values().zip(b.weights.values());
    Ok(match metric {
        Metric::L1 => pairs.map(|(x, y)| (x - y).abs()).sum(),
        Metric::L2 => pairs.map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
        Metric::Cosine if a.weights == b.weights => 0.0,
        Metric::Cosine => {
            let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
            for (x, y) in pairs {
                dot += x * y;
                na += x * x;
                nb += y * y;
            }
            match (na == 0.0, nb == 0.0) {
                (true, true) => 0.0,
                (true, false) | (false, true) => 1.0,
                _ => (1.0 - dot / (na.sqrt() * nb.sqrt())).clamp(0.0, 1.0),
            }
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangeConfig {
    pub delta_t: i64,
    /// Spacing of candidate change times.
    pub step: i64,
    pub q: f64,
    pub metric: Metric,
    pub vocab_size: usize,
    pub nms: bool,
    /// Items listed per trend label and per rising/falling list.
    pub label_k: usize,
    /// Weight shifts at or below this are not reported as rising/falling.
    pub explain_tolerance: f64,
    pub parallel: bool,
}

impl Default for ChangeConfig {
    fn default() -> Self {
        ChangeConfig {
            delta_t: 7,
            step: 1,
            q: 0.2,
            metric: Metric::L2,
            vocab_size: 100,
            nms: true,
            label_k: 5,
            explain_tolerance: 1e-9,
            parallel: false,
        }
    }
}

impl ChangeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delta_t <= 0 || self.step <= 0 {
            return Err(Error::Config("delta_t and step must be positive".into()));
        }
        if self.q.is_nan() || self.q <= 0.0 {
            return Err(Error::Config("q must be positive".into()));
        }
        if self.vocab_size == 0 {
            return Err(Error::Config("vocab_size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MagnitudeSample {
    pub t: Timestamp,
    pub magnitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangePoint {
    pub t: Timestamp,
    pub magnitude: f64,
    pub from_trend: Option<usize>,
    pub to_trend: Option<usize>,
}

fn span_of(stream: &EventStream, cfg: &ChangeConfig) -> Result<(Timestamp, Timestamp)> {
    let required = 2 * cfg.delta_t;
    match (stream.first_t(), stream.last_t()) {
        (Some(t0), Some(t_last)) if t_last + 1 - t0 >= required => Ok((t0, t_last + 1)),
        (Some(t0), Some(t_last)) => Err(Error::SpanTooShort { span: t_last + 1 - t0, required }),
        _ => Err(Error::SpanTooShort { span: 0, required }),
    }
}

/// Distance between `market(t : t+Δt)` and `market(t-Δt : t)` for every
/// candidate `t` on the step grid.
pub fn magnitude_series(stream: &EventStream, cfg: &ChangeConfig) -> Result<Vec<MagnitudeSample>> {
    cfg.validate()?;
    let (t0, t_end) = span_of(stream, cfg)?;
    let vocab = vocabulary(stream, cfg.vocab_size);
    let candidates: Vec<Timestamp> = (0..)
        .map(|j| t0 + cfg.delta_t + j * cfg.step)
        .take_while(|t| t + cfg.delta_t <= t_end)
        .collect();
    let sample = |&t: &Timestamp| -> Result<MagnitudeSample> {
        let before = market_vector(stream, t - cfg.delta_t, t, &vocab);
        let after = market_vector(stream, t, t + cfg.delta_t, &vocab);
        Ok(MagnitudeSample { t, magnitude: change_magnitude(&after, &before, cfg.metric)? })
    };
    if cfg.parallel {
        candidates.par_iter().map(sample).collect()
    } else {
        candidates.iter().map(sample).collect()
    }
}

/// Candidates whose magnitude exceeds `q`, optionally reduced to local maxima
/// within `Δt` on either side (earliest wins ties).
pub fn select_changes(samples: &[MagnitudeSample], cfg: &ChangeConfig) -> Vec<ChangePoint> {
    let hits: Vec<&MagnitudeSample> = samples.iter().filter(|s| s.magnitude > cfg.q).collect();
    hits.iter()
        .filter(|s| {
            !cfg.nms
                || !hits.iter().any(|o| {
                    (o.t - s.t).abs() <= cfg.delta_t
                        && (o.magnitude > s.magnitude || (o.magnitude == s.magnitude && o.t < s.t))
                })
        })
        .map(|s| ChangePoint { t: s.t, magnitude: s.magnitude, from_trend: None, to_trend: None })
        .collect()
}

pub fn detect_changes(stream: &EventStream, cfg: &ChangeConfig) -> Result<Vec<ChangePoint>> {
    Ok(select_changes(&magnitude_series(stream, cfg)?, cfg))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendSegment {
    pub trend_id: usize,
    pub start: Timestamp,
    pub end: Timestamp,
    pub centroid: MarketVector,
    pub label_items: Vec<Item>,
}

fn top_items(weights: &BTreeMap<Item, f64>, k: usize) -> Vec<Item> {
    let mut ranked: Vec<(&Item, f64)> = weights.iter().filter(|(_, &w)| w > 0.0).map(|(it, &w)| (it, w)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.into_iter().take(k).map(|(it, _)| it.clone()).collect()
}

/// Mean market vector over consecutive `Δt` windows tiling `[start, end)`.
fn centroid(stream: &EventStream, start: Timestamp, end: Timestamp, vocab: &[Item], delta_t: i64) -> MarketVector {
    let mut sum: BTreeMap<Item, f64> = vocab.iter().map(|it| (it.clone(), 0.0)).collect();
    let mut n = 0usize;
    let mut w = start;
    while w < end {
        let v = market_vector(stream, w, (w + delta_t).min(end), vocab);
        if !v.empty {
            n += 1;
            for (it, x) in v.weights {
                *sum.get_mut(&it).expect("same vocabulary") += x;
            }
        }
        w += delta_t;
    }
    if n > 0 {
        sum.values_mut().for_each(|x| *x /= n as f64);
    }
    MarketVector { window_start: start, window_end: end, weights: sum, empty: n == 0 }
}

/// Splits the stream span at the change points. Segments whose centroids lie
/// within `q / 2` of an earlier trend's first centroid reuse its id.
pub fn segment_trends(
    stream: &EventStream,
    changepoints: &[ChangePoint],
    cfg: &ChangeConfig,
) -> Result<Vec<TrendSegment>> {
    let (Some(t0), Some(t_last)) = (stream.first_t(), stream.last_t()) else {
        return Ok(Vec::new());
    };
    let vocab = vocabulary(stream, cfg.vocab_size);
    let mut bounds = vec![t0];
    bounds.extend(changepoints.iter().map(|c| c.t).filter(|&t| t > t0 && t <= t_last));
    bounds.push(t_last + 1);
    bounds.sort_unstable();
    bounds.dedup();

    let mut trends: Vec<MarketVector> = Vec::new();
    let mut segments = Vec::new();
    for pair in bounds.windows(2) {
        let c = centroid(stream, pair[0], pair[1], &vocab, cfg.delta_t);
        let mut nearest: Option<(usize, f64)> = None;
        for (idx, rep) in trends.iter().enumerate() {
            let d = change_magnitude(&c, rep, cfg.metric)?;
            if d < cfg.q / 2.0 && nearest.is_none_or(|(_, best)| d < best) {
                nearest = Some((idx, d));
            }
        }
        let trend_id = match nearest {
            Some((idx, _)) => idx + 1,
            None => {
                trends.push(c.clone());
                trends.len()
            }
        };
        segments.push(TrendSegment {
            trend_id,
            start: pair[0],
            end: pair[1],
            label_items: top_items(&c.weights, cfg.label_k),
            centroid: c,
        });
    }
    Ok(segments)
}

/// Fills `from_trend`/`to_trend` from the segments meeting at each point.
pub fn label_change_points(points: &mut [ChangePoint], segments: &[TrendSegment]) {
    for cp in points {
        if let Some(i) = segments.iter().position(|s| s.start == cp.t).filter(|&i| i > 0) {
            cp.from_trend = Some(segments[i - 1].trend_id);
            cp.to_trend = Some(segments[i].trend_id);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemShift {
    pub item: Item,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangeExplanation {
    pub t: Timestamp,
    pub from_trend: usize,
    pub to_trend: usize,
    pub from_labels: Vec<Item>,
    pub to_labels: Vec<Item>,
    pub rising: Vec<ItemShift>,
    pub falling: Vec<ItemShift>,
    /// Entropy signs whose window overlaps `[t - Δt, t + Δt]`.
    pub structural: Vec<ChangeSign>,
}

pub fn explain_change(
    cp: &ChangePoint,
    segments: &[TrendSegment],
    signs: Option<&[ChangeSign]>,
    cfg: &ChangeConfig,
) -> Result<ChangeExplanation> {
    let i = segments
        .iter()
        .position(|s| s.start == cp.t)
        .filter(|&i| i > 0)
        .ok_or(Error::NotOnBoundary(cp.t))?;
    let (from, to) = (&segments[i - 1], &segments[i]);

    let mut shifts: Vec<ItemShift> = to
        .centroid
        .weights
        .iter()
        .map(|(it, &after)| ItemShift {
            item: it.clone(),
            delta: after - from.centroid.weights.get(it).copied().unwrap_or(0.0),
        })
        .filter(|s| s.delta.abs() > cfg.explain_tolerance)
        .collect();
    shifts.sort_by(|a, b| b.delta.total_cmp(&a.delta).then_with(|| a.item.cmp(&b.item)));
    let rising: Vec<ItemShift> = shifts.iter().filter(|s| s.delta > 0.0).take(cfg.label_k).cloned().collect();
    let mut falling: Vec<ItemShift> = shifts.into_iter().filter(|s| s.delta < 0.0).collect();
    falling.sort_by(|a, b| a.delta.total_cmp(&b.delta).then_with(|| a.item.cmp(&b.item)));
    falling.truncate(cfg.label_k);

    let (lo, hi) = (cp.t - cfg.delta_t, cp.t + cfg.delta_t);
    let structural = signs
        .unwrap_or(&[])
        .iter()
        .filter(|s| s.window_start <= hi && s.window_end > lo)
        .cloned()
        .collect();

    Ok(ChangeExplanation {
        t: cp.t,
        from_trend: from.trend_id,
        to_trend: to.trend_id,
        from_labels: from.label_items.clone(),
        to_labels: to.label_items.clone(),
        rising,
        falling,
        structural,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangeReport {
    pub vocabulary: Vec<Item>,
    pub change_points: Vec<ChangePoint>,
    pub segments: Vec<TrendSegment>,
    pub explanations: Vec<ChangeExplanation>,
    #[serde(skip)]
    pub magnitudes: Vec<MagnitudeSample>,
}

/// Detection, segmentation and explanation in one pass.
pub fn analyze(stream: &EventStream, cfg: &ChangeConfig, signs: Option<&[ChangeSign]>) -> Result<ChangeReport> {
    let magnitudes = magnitude_series(stream, cfg)?;
    let mut change_points = select_changes(&magnitudes, cfg);
    let segments = segment_trends(stream, &change_points, cfg)?;
    label_change_points(&mut change_points, &segments);
    let explanations = change_points
        .iter()
        .map(|cp| explain_change(cp, &segments, signs, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(ChangeReport { vocabulary: vocabulary(stream, cfg.vocab_size), change_points, segments, explanations, magnitudes })
}
