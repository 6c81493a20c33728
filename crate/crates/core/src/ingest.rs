//! Parsing raw text, basket logs and seismic catalogs into event streams.
//!
//! Every input kind ends up as an [`EventStream`]: a time-ordered list of
//! baskets, each basket a multiset of [`Item`]s. Text sentences, point-of-sale
//! baskets and gridded epicenters all share this shape.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Read, Write};

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unitless ordering key. Integer ticks are taken as-is; ISO-8601 instants
/// become Unix seconds.
pub type Timestamp = i64;

/// An opaque item identifier (word, product, grid cell).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Item(String);

impl Item {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() || id.chars().any(char::is_whitespace) {
            return Err(Error::InvalidItem(id));
        }
        Ok(Item(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Item {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        Item::new(s)
    }
}

impl From<Item> for String {
    fn from(item: Item) -> String {
        item.0
    }
}

impl fmt::Display for Item {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A timestamped multiset of items.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub t: Timestamp,
    pub items: BTreeMap<Item, u32>,
}

impl Event {
    /// Builds an event from a list of item occurrences; repeats add up.
    pub fn from_items<I>(t: Timestamp, items: I) -> Self
    where
        I: IntoIterator<Item = Item>,
    {
        let mut counts = BTreeMap::new();
        for item in items {
            *counts.entry(item).or_insert(0) += 1;
        }
        Event { t, items: counts }
    }

    /// Convenience constructor for tests and generators. Panics on invalid ids.
    pub fn of(t: Timestamp, ids: &[&str]) -> Self {
        Event::from_items(t, ids.iter().map(|s| Item::new(*s).expect("valid item id")))
    }

    pub fn multiplicity(&self, item: &Item) -> u32 {
        self.items.get(item).copied().unwrap_or(0)
    }

    pub fn contains(&self, item: &Item) -> bool {
        self.items.contains_key(item)
    }
}

/// Events ordered by non-decreasing timestamp.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventStream {
    events: Vec<Event>,
}

impl EventStream {
    /// Stable-sorts the events by `t`.
    pub fn new(mut events: Vec<Event>) -> Self {
        events.sort_by_key(|e| e.t);
        EventStream { events }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn first_t(&self) -> Option<Timestamp> {
        self.events.first().map(|e| e.t)
    }

    pub fn last_t(&self) -> Option<Timestamp> {
        self.events.last().map(|e| e.t)
    }

    /// Events with `start <= t < end`.
    pub fn window(&self, start: Timestamp, end: Timestamp) -> &[Event] {
        let lo = self.events.partition_point(|e| e.t < start);
        let hi = self.events.partition_point(|e| e.t < end);
        &self.events[lo..hi.max(lo)]
    }

    /// Writes one JSON object per event, items expanded by multiplicity.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for event in &self.events {
            let items: Vec<&str> = event
                .items
                .iter()
                .flat_map(|(item, &n)| std::iter::repeat_n(item.as_str(), n as usize))
                .collect();
            serde_json::to_writer(&mut out, &BasketOut { t: event.t, items })?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Parses an integer tick or an ISO-8601 instant/date (UTC assumed when no
/// offset is given).
pub fn parse_timestamp(raw: &str) -> Result<Timestamp> {
    let s = raw.trim();
    if let Ok(t) = s.parse::<i64>() {
        return Ok(t);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(dt.and_utc().timestamp());
        }
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        if let Some(dt) = d.and_hms_opt(0, 0, 0) {
            return Ok(dt.and_utc().timestamp());
        }
    }
    Err(Error::InvalidTimestamp(raw.to_string()))
}

#[derive(Clone, Debug)]
pub struct TokenizerConfig {
    pub lowercase: bool,
    pub min_token_len: usize,
    pub stopwords: BTreeSet<String>,
    pub sentence_delimiters: BTreeSet<char>,
}

const ENGLISH_STOPWORDS: &str = include_str!("stopwords_en.txt");

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig {
            lowercase: true,
            min_token_len: 2,
            stopwords: parse_stopwords(ENGLISH_STOPWORDS),
            sentence_delimiters: ['.', '!', '?', '\n'].into_iter().collect(),
        }
    }
}

impl TokenizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_token_len == 0 {
            return Err(Error::Config("min_token_len must be >= 1".into()));
        }
        Ok(())
    }
}

/// One token per line; blank lines and `#` comments ignored.
pub fn parse_stopwords(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

/// Splits text into sentence baskets. `t` is the index of the emitted event.
pub fn tokenize_text(raw: &str, cfg: &TokenizerConfig) -> EventStream {
    let mut events = Vec::new();
    for sentence in raw.split(|c| cfg.sentence_delimiters.contains(&c)) {
        let tokens = sentence
            .split(|c: char| !c.is_alphanumeric())
            .filter(|tok| !tok.is_empty())
            .map(|tok| if cfg.lowercase { tok.to_lowercase() } else { tok.to_string() })
            .filter(|tok| tok.chars().count() >= cfg.min_token_len)
            .filter(|tok| !cfg.stopwords.contains(&tok.to_lowercase()))
            .map(Item);
        let event = Event::from_items(events.len() as Timestamp, tokens);
        if !event.items.is_empty() {
            events.push(event);
        }
    }
    EventStream { events }
}

#[derive(Serialize)]
struct BasketOut<'a> {
    t: Timestamp,
    items: Vec<&'a str>,
}

#[derive(Deserialize)]
struct BasketLine {
    t: serde_json::Value,
    items: Vec<String>,
}

/// Parses JSON-lines baskets: `{"t": <int|ISO-8601>, "items": [..]}`.
/// Blank lines are skipped; line numbers in errors are 1-based.
pub fn parse_basket_jsonl<R: Read>(input: R) -> Result<EventStream> {
    let reader = std::io::BufReader::new(input);
    let mut events = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| Error::MalformedBasket { line: line_no, reason };
        let parsed: BasketLine = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        let t = match &parsed.t {
            serde_json::Value::Number(n) => n
                .as_i64()
                .ok_or_else(|| malformed(format!("timestamp {n} is not an integer")))?,
            serde_json::Value::String(s) => {
                parse_timestamp(s).map_err(|e| malformed(e.to_string()))?
            }
            other => return Err(malformed(format!("unsupported timestamp {other}"))),
        };
        if parsed.items.is_empty() {
            return Err(Error::EmptyBasket { line: line_no });
        }
        let items = parsed
            .items
            .into_iter()
            .map(|s| Item::new(s).map_err(|e| malformed(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        events.push(Event::from_items(t, items));
    }
    Ok(EventStream::new(events))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeismicEvent {
    pub t: Timestamp,
    pub lat: f64,
    pub lon: f64,
    pub mag: Option<f64>,
}

/// Parses a `t,lat,lon[,mag]` catalog. Row numbers in errors count data rows
/// from 1 (the header is row 0).
pub fn parse_catalog_csv<R: Read>(input: R) -> Result<Vec<SeismicEvent>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut records = reader.records();
    let header = match records.next() {
        Some(h) => h?,
        None => return Ok(Vec::new()),
    };
    let columns: Vec<String> = header.iter().map(str::to_ascii_lowercase).collect();
    let has_mag = match columns.as_slice() {
        [t, lat, lon] if t == "t" && lat == "lat" && lon == "lon" => false,
        [t, lat, lon, mag] if t == "t" && lat == "lat" && lon == "lon" && mag == "mag" => true,
        _ => return Err(Error::CatalogHeader(columns.join(","))),
    };

    let mut out = Vec::new();
    for (idx, record) in records.enumerate() {
        let row = idx + 1;
        let record = record?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let bad = |reason: String| Error::Catalog { row, reason };
        let expected = if has_mag { 4 } else { 3 };
        if record.len() != expected {
            return Err(bad(format!("expected {expected} fields, found {}", record.len())));
        }
        let t = parse_timestamp(&record[0]).map_err(|e| bad(e.to_string()))?;
        let number = |name: &str, raw: &str| -> Result<f64> {
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(format!("unparsable {name} `{raw}`")))
        };
        let lat = number("lat", &record[1])?;
        let lon = number("lon", &record[2])?;
        if !(-90.0..=90.0).contains(&lat) {
            return Err(bad(format!("lat {lat} outside [-90, 90]")));
        }
        if !(-180.0..=180.0).contains(&lon) {
            return Err(bad(format!("lon {lon} outside [-180, 180]")));
        }
        let mag = if has_mag && !record[3].is_empty() {
            Some(number("mag", &record[3])?)
        } else {
            None
        };
        out.push(SeismicEvent { t, lat, lon, mag });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(stream: &EventStream, idx: usize) -> Vec<(&str, u32)> {
        stream.events()[idx].items.iter().map(|(k, &v)| (k.as_str(), v)).collect()
    }

    #[test]
    fn two_sentences_become_two_events() {
        let s = tokenize_text("Lupin ran. Lupin hid.", &TokenizerConfig::default());
        assert_eq!(s.len(), 2);
        assert_eq!(counts(&s, 0), vec![("lupin", 1), ("ran", 1)]);
        assert_eq!(counts(&s, 1), vec![("hid", 1), ("lupin", 1)]);
        assert_eq!(s.events()[1].t, 1);
    }

    #[test]
    fn empty_text_is_empty_stream() {
        assert!(tokenize_text("", &TokenizerConfig::default()).is_empty());
        assert!(tokenize_text(" ... \n\n!", &TokenizerConfig::default()).is_empty());
    }

    #[test]
    fn stopwords_and_short_tokens_dropped_multiplicity_kept() {
        let s = tokenize_text("The cat saw a cat, x cat!", &TokenizerConfig::default());
        assert_eq!(counts(&s, 0), vec![("cat", 3), ("saw", 1)]);
    }

    #[test]
    fn case_folding_can_be_disabled() {
        let cfg = TokenizerConfig { lowercase: false, ..Default::default() };
        let s = tokenize_text("Lupin lupin", &cfg);
        assert_eq!(counts(&s, 0), vec![("Lupin", 1), ("lupin", 1)]);
    }

    #[test]
    fn basket_line_maps_directly() {
        let s = parse_basket_jsonl(r#"{"t":1,"items":["beer","wine"]}"#.as_bytes()).unwrap();
        assert_eq!(s.events(), &[Event::of(1, &["beer", "wine"])]);
    }

    #[test]
    fn baskets_are_sorted_stably() {
        let input = "{\"t\":2,\"items\":[\"x\"]}\n{\"t\":1,\"items\":[\"a\"]}\n{\"t\":1,\"items\":[\"b\"]}\n";
        let s = parse_basket_jsonl(input.as_bytes()).unwrap();
        let order: Vec<_> = s.events().iter().map(|e| e.items.keys().next().unwrap().as_str()).collect();
        assert_eq!(order, vec!["a", "b", "x"]);
    }

    #[test]
    fn empty_basket_reports_line() {
        let err = parse_basket_jsonl(r#"{"t":1,"items":[]}"#.as_bytes()).unwrap_err();
        assert_eq!(err.to_string(), "empty basket at line 1");
    }

    #[test]
    fn malformed_basket_reports_line() {
        let input = "{\"t\":1,\"items\":[\"a\"]}\n{\"t\":1,\"items\":\n";
        match parse_basket_jsonl(input.as_bytes()).unwrap_err() {
            Error::MalformedBasket { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_basket_jsonl(r#"{"t":1,"items":[""]}"#.as_bytes()).is_err());
    }

    #[test]
    fn iso_timestamps_are_accepted() {
        let input = "{\"t\":\"1970-01-01T00:01:00Z\",\"items\":[\"a\"]}\n{\"t\":\"1970-01-01\",\"items\":[\"b\"]}";
        let s = parse_basket_jsonl(input.as_bytes()).unwrap();
        assert_eq!(s.events()[0].t, 0);
        assert_eq!(s.events()[1].t, 60);
    }

    #[test]
    fn catalog_single_row() {
        let ev = parse_catalog_csv("t,lat,lon\n0,35.0,139.0".as_bytes()).unwrap();
        assert_eq!(ev, vec![SeismicEvent { t: 0, lat: 35.0, lon: 139.0, mag: None }]);
    }

    #[test]
    fn catalog_lat_out_of_range() {
        match parse_catalog_csv("t,lat,lon\n0,35,139\n1,95.0,139.0".as_bytes()).unwrap_err() {
            Error::Catalog { row, reason } => {
                assert_eq!(row, 2);
                assert!(reason.contains("lat"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn catalog_mag_column_contract() {
        let ok = parse_catalog_csv("t,lat,lon,mag\n0,1,2,3.5\n1,1,2,\n2,1,2,4".as_bytes()).unwrap();
        assert_eq!(ok.iter().map(|e| e.mag).collect::<Vec<_>>(), vec![Some(3.5), None, Some(4.0)]);
        assert!(parse_catalog_csv("t,lat,lon\n0,1,2\n1,1,2,3.5\n2,1,2".as_bytes()).is_err());
        assert!(parse_catalog_csv("t,lat,lon\n0,abc,2".as_bytes()).is_err());
        assert!(matches!(
            parse_catalog_csv("time,lat,lon\n0,1,2".as_bytes()),
            Err(Error::CatalogHeader(_))
        ));
    }

    #[test]
    fn window_slices_half_open() {
        let s = EventStream::new((0..10).map(|t| Event::of(t, &["a"])).collect());
        assert_eq!(s.window(2, 5).len(), 3);
        assert_eq!(s.window(5, 2).len(), 0);
        assert_eq!(s.window(20, 30).len(), 0);
    }
}
