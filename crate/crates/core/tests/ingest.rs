use std::collections::BTreeMap;

use chancekit::ingest::{parse_basket_jsonl, parse_catalog_csv, tokenize_text, Event, EventStream, TokenizerConfig};
use chancekit::{Error, Item};
use proptest::prelude::*;

fn token_totals(stream: &EventStream) -> BTreeMap<Item, u64> {
    let mut out = BTreeMap::new();
    for e in stream.events() {
        for (it, &n) in &e.items {
            *out.entry(it.clone()).or_insert(0) += u64::from(n);
        }
    }
    out
}

fn basket_lines() -> impl Strategy<Value = Vec<(i64, Vec<u8>)>> {
    prop::collection::vec((0i64..5, prop::collection::vec(0u8..6, 1..5)), 0..40)
}

fn to_jsonl(lines: &[(i64, Vec<u8>)]) -> String {
    lines
        .iter()
        .map(|(t, ids)| {
            let items: Vec<String> = ids.iter().map(|i| format!("i{i}")).collect();
            serde_json::json!({ "t": t, "items": items }).to_string() + "\n"
        })
        .collect()
}

proptest! {
    #[test]
    fn doubling_text_doubles_counts(words in prop::collection::vec("[a-z]{1,7}", 0..40), breaks in prop::collection::vec(any::<bool>(), 0..40)) {
        let mut text = String::new();
        for (i, w) in words.iter().enumerate() {
            text.push_str(w);
            text.push_str(if breaks.get(i).copied().unwrap_or(false) { ". " } else { " " });
        }
        let cfg = TokenizerConfig::default();
        let once = token_totals(&tokenize_text(&text, &cfg));
        let twice = token_totals(&tokenize_text(&format!("{text}\n{text}"), &cfg));
        prop_assert_eq!(once.len(), twice.len());
        for (it, n) in &once {
            prop_assert_eq!(twice[it], 2 * n);
        }
        prop_assert_eq!(tokenize_text(&text, &cfg), tokenize_text(&text, &cfg));
    }

    #[test]
    fn parse_sorts_stably(lines in basket_lines()) {
        let stream = parse_basket_jsonl(to_jsonl(&lines).as_bytes()).unwrap();
        prop_assert!(stream.events().windows(2).all(|w| w[0].t <= w[1].t));
        for t in 0..5 {
            let expected: Vec<Event> = lines
                .iter()
                .filter(|(lt, _)| *lt == t)
                .map(|(lt, ids)| Event::from_items(*lt, ids.iter().map(|i| Item::new(format!("i{i}")).unwrap())))
                .collect();
            let got: Vec<Event> = stream.events().iter().filter(|e| e.t == t).cloned().collect();
            prop_assert_eq!(got, expected);
        }
    }

    #[test]
    fn jsonl_round_trip(lines in basket_lines()) {
        let stream = parse_basket_jsonl(to_jsonl(&lines).as_bytes()).unwrap();
        let mut buf = Vec::new();
        stream.write_jsonl(&mut buf).unwrap();
        prop_assert_eq!(parse_basket_jsonl(buf.as_slice()).unwrap(), stream);
    }
}

#[test]
fn iso_timestamps_order_events() {
    let src = "{\"t\": \"2024-01-02T00:00:00Z\", \"items\": [\"b\"]}\n{\"t\": \"2024-01-01\", \"items\": [\"a\"]}\n";
    let s = parse_basket_jsonl(src.as_bytes()).unwrap();
    assert_eq!(s.events()[0].t, 1_704_067_200);
    assert_eq!(s.events()[1].t - s.events()[0].t, 86_400);
}

#[test]
fn malformed_line_reports_line_number() {
    let src = "{\"t\": 1, \"items\": [\"a\"]}\n\n{\"t\": 2, \"items\": \n";
    match parse_basket_jsonl(src.as_bytes()) {
        Err(Error::MalformedBasket { line, .. }) => assert_eq!(line, 3),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn catalog_without_magnitude_column() {
    let cat = parse_catalog_csv("t,lat,lon\n3,35.0,135.0\n1,36.0,136.0\n".as_bytes()).unwrap();
    assert_eq!(cat.len(), 2);
    assert!(cat.iter().all(|e| e.mag.is_none()));
    assert!(matches!(parse_catalog_csv("t,lat\n1,2\n".as_bytes()), Err(Error::CatalogHeader(_))));
}
