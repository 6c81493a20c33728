//! Regional entropy of seismic activity.
//!
//! Epicenters in a region are binned onto a regular lat/lon grid, occupied
//! cells are grouped into connected clusters, and the entropy of the event
//! distribution over clusters is tracked across sliding windows. A rise in
//! entropy that then levels off is flagged as a precursor candidate.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diversity::window_starts;
use crate::entropy::{entropy_bits, EntropySign};
use crate::error::{Error, Result};
use crate::ingest::{SeismicEvent, Timestamp};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    pub cell_deg: f64,
}

impl RegionSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lat_min < self.lat_max && self.lon_min < self.lon_max) {
            return Err(Error::Config("region bounds must satisfy min < max".into()));
        }
        if self.cell_deg.is_nan() || self.cell_deg <= 0.0 {
            return Err(Error::Config("cell_deg must be positive".into()));
        }
        Ok(())
    }

    pub fn rows(&self) -> u32 {
        (((self.lat_max - self.lat_min) / self.cell_deg).ceil() as u32).max(1)
    }

    pub fn cols(&self) -> u32 {
        (((self.lon_max - self.lon_min) / self.cell_deg).ceil() as u32).max(1)
    }

    /// Grid cell of a coordinate; `None` outside the region. Points on the
    /// max edge go to the last row/column.
    pub fn cell_of(&self, lat: f64, lon: f64) -> Option<Cell> {
        if !(self.lat_min..=self.lat_max).contains(&lat) || !(self.lon_min..=self.lon_max).contains(&lon) {
            return None;
        }
        let row = (((lat - self.lat_min) / self.cell_deg).floor() as u32).min(self.rows() - 1);
        let col = (((lon - self.lon_min) / self.cell_deg).floor() as u32).min(self.cols() - 1);
        Some(Cell { row, col })
    }
}

/// Ordered row-major, which matches ordering by linear cell index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub row: u32,
    pub col: u32,
}

impl Cell {
    /// Item-style identifier `r<row>c<col>`.
    pub fn id(&self) -> String {
        format!("r{}c{}", self.row, self.col)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridCounts {
    pub cells: BTreeMap<Cell, u64>,
    /// Events in the window but outside the region.
    pub dropped: u64,
}

pub fn grid_events(catalog: &[SeismicEvent], region: &RegionSpec, start: Timestamp, end: Timestamp) -> GridCounts {
    let mut grid = GridCounts::default();
    for ev in catalog.iter().filter(|e| e.t >= start && e.t < end) {
        match region.cell_of(ev.lat, ev.lon) {
            Some(cell) => *grid.cells.entry(cell).or_insert(0) += 1,
            None => grid.dropped += 1,
        }
    }
    grid
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Neighborhood {
    #[serde(rename = "4")]
    Four,
    #[default]
    #[serde(rename = "8")]
    Eight,
}

impl Neighborhood {
    fn offsets(self) -> &'static [(i64, i64)] {
        match self {
            Neighborhood::Four => &[(-1, 0), (1, 0), (0, -1), (0, 1)],
            Neighborhood::Eight => &[(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpicenterCluster {
    pub id: usize,
    pub cells: BTreeSet<Cell>,
    pub n_events: u64,
}

/// Connected components of occupied cells, ordered by smallest cell.
pub fn cluster_epicenters(cells: &BTreeMap<Cell, u64>, neighborhood: Neighborhood) -> Vec<EpicenterCluster> {
    let mut seen: BTreeSet<Cell> = BTreeSet::new();
    let mut clusters = Vec::new();
    for (&seed, _) in cells.iter().filter(|(_, &n)| n > 0) {
        if !seen.insert(seed) {
            continue;
        }
        let mut members = BTreeSet::from([seed]);
        let mut queue = VecDeque::from([seed]);
        while let Some(cell) = queue.pop_front() {
            for &(dr, dc) in neighborhood.offsets() {
                let (r, c) = (i64::from(cell.row) + dr, i64::from(cell.col) + dc);
                if r < 0 || c < 0 {
                    continue;
                }
                let next = Cell { row: r as u32, col: c as u32 };
                if cells.get(&next).is_some_and(|&n| n > 0) && seen.insert(next) {
                    members.insert(next);
                    queue.push_back(next);
                }
            }
        }
        let n_events = members.iter().map(|c| cells[c]).sum();
        clusters.push(EpicenterCluster { id: clusters.len() + 1, cells: members, n_events });
    }
    clusters
}

pub fn resi(clusters: &[EpicenterCluster], sign: EntropySign) -> Result<f64> {
    entropy_bits(clusters.iter().map(|c| c.n_events), sign)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResiConfig {
    pub region: RegionSpec,
    pub window: i64,
    pub step: i64,
    pub neighborhood: Neighborhood,
    pub min_events_per_window: usize,
    /// Readings in the rising phase (L1).
    pub rise_lookback: usize,
    /// Readings in the saturation phase (L2).
    pub flat_lookback: usize,
    /// Minimum rising slope, bits per window.
    pub theta_up: f64,
    /// Maximum absolute slope during saturation, bits per window.
    pub theta_flat: f64,
    /// Drop events below this magnitude (and events with no magnitude).
    pub min_mag: Option<f64>,
    /// Also require a drop in cluster count inside the saturation phase.
    pub strict: bool,
    pub sign: EntropySign,
    pub parallel: bool,
}

impl Default for ResiConfig {
    fn default() -> Self {
        ResiConfig {
            region: RegionSpec { lat_min: 30.0, lat_max: 46.0, lon_min: 128.0, lon_max: 146.0, cell_deg: 0.5 },
            window: 30,
            step: 5,
            neighborhood: Neighborhood::Eight,
            min_events_per_window: 1,
            rise_lookback: 4,
            flat_lookback: 2,
            theta_up: 0.1,
            theta_flat: 0.02,
            min_mag: None,
            strict: false,
            sign: EntropySign::Negated,
            parallel: false,
        }
    }
}

impl ResiConfig {
    pub fn validate(&self) -> Result<Vec<String>> {
        self.region.validate()?;
        if self.window <= 0 || self.step <= 0 {
            return Err(Error::Config("window and step must be positive".into()));
        }
        if self.rise_lookback < 2 || self.flat_lookback < 2 {
            return Err(Error::Config("rise_lookback and flat_lookback must be >= 2".into()));
        }
        if !(self.theta_flat >= 0.0 && self.theta_up > self.theta_flat) {
            return Err(Error::Config("thresholds must satisfy theta_up > theta_flat >= 0".into()));
        }
        let mut warnings = Vec::new();
        if self.step > self.window {
            warnings.push(format!("step {} exceeds window {}; some events are never counted", self.step, self.window));
        }
        Ok(warnings)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResiReading {
    /// Window end; the window is `[t - W, t)`.
    pub t: Timestamp,
    pub h: Option<f64>,
    pub n_clusters: usize,
    pub n_events: u64,
    /// Fewer than `min_events_per_window` events; excluded from slopes.
    pub flagged: bool,
}

pub fn resi_series(catalog: &[SeismicEvent], cfg: &ResiConfig) -> Vec<ResiReading> {
    let mut events: Vec<SeismicEvent> = catalog
        .iter()
        .filter(|e| cfg.min_mag.is_none_or(|m| e.mag.is_some_and(|x| x >= m)))
        .cloned()
        .collect();
    events.sort_by_key(|e| e.t);
    let (Some(t0), Some(t_last)) = (events.first().map(|e| e.t), events.last().map(|e| e.t)) else {
        return Vec::new();
    };
    let starts = window_starts(t0, t_last, cfg.window, cfg.step);
    let reading = |&start: &Timestamp| {
        let end = start + cfg.window;
        let lo = events.partition_point(|e| e.t < start);
        let hi = events.partition_point(|e| e.t < end);
        let grid = grid_events(&events[lo..hi], &cfg.region, start, end);
        let clusters = cluster_epicenters(&grid.cells, cfg.neighborhood);
        let n_events: u64 = grid.cells.values().sum();
        ResiReading {
            t: end,
            h: resi(&clusters, cfg.sign).ok(),
            n_clusters: clusters.len(),
            n_events,
            flagged: n_events < cfg.min_events_per_window as u64,
        }
    };
    if cfg.parallel {
        starts.par_iter().map(reading).collect()
    } else {
        starts.iter().map(reading).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecursorFlag {
    pub t: Timestamp,
    pub rise_slope: f64,
    pub flat_slope: f64,
}

/// Least-squares slope of `ys` against `0, 1, 2, ...`.
pub fn ls_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let x_mean = (n - 1.0) / 2.0;
    let y_mean = ys.iter().sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &y) in ys.iter().enumerate() {
        let dx = i as f64 - x_mean;
        num += dx * (y - y_mean);
        den += dx * dx;
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Flags index `k` of the usable readings when the slope over the `L1`
/// readings ending at `k - L2` is at least `theta_up` and the slope over the
/// last `L2` readings is within `theta_flat` of zero. Flags closer than
/// `L1 + L2` readings to the previous firing are merged into the earliest.
pub fn detect_precursor(series: &[ResiReading], cfg: &ResiConfig) -> Result<Vec<PrecursorFlag>> {
    let usable: Vec<&ResiReading> = series.iter().filter(|r| !r.flagged && r.h.is_some()).collect();
    let (l1, l2) = (cfg.rise_lookback, cfg.flat_lookback);
    if usable.len() < l1 + l2 {
        return Err(Error::SeriesTooShort { len: usable.len(), required: l1 + l2 });
    }
    let hs: Vec<f64> = usable.iter().map(|r| r.h.unwrap_or(0.0)).collect();
    let mut flags = Vec::new();
    let mut last_fire: Option<usize> = None;
    for k in (l1 + l2 - 1)..hs.len() {
        let rise = ls_slope(&hs[k + 1 - l1 - l2..k + 1 - l2]);
        let flat = ls_slope(&hs[k + 1 - l2..=k]);
        let mut fires = rise >= cfg.theta_up && flat.abs() <= cfg.theta_flat;
        if fires && cfg.strict {
            fires = (k + 1 - l2..=k).any(|i| usable[i].n_clusters < usable[i - 1].n_clusters);
        }
        if !fires {
            continue;
        }
        if last_fire.is_none_or(|prev| k - prev >= l1 + l2) {
            flags.push(PrecursorFlag { t: usable[k].t, rise_slope: rise, flat_slope: flat });
        }
        last_fire = Some(k);
    }
    Ok(flags)
}
