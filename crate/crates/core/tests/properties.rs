use std::collections::BTreeSet;

use chrono::{Duration, NaiveDate, NaiveDateTime, TimeZone};
use chrono_tz::America::New_York;
use proptest::prelude::*;

use esgrisk::aggregate::{build_series, DayMessage, TradingCalendar};
use esgrisk::detect::{detect_series, esd_outliers, exclude_confounded, ConfoundIndex, DetectionConfig, RiskEvent};
use esgrisk::ingest::{parse_timestamp, read_messages_from, CalendarEventKind, CalendarEventRow};
use esgrisk::lexicon::{NodeSet, TaxonomyNode};
use esgrisk::report::Cell;
use esgrisk::study::{abnormal_return, bmp_tstat, standardize, MarketModelFit};
use esgrisk::synth::{generate, synthetic_calendar, SynthConfig};

fn calendar(n: usize) -> TradingCalendar {
    synthetic_calendar(NaiveDate::from_ymd_opt(2019, 1, 2).unwrap(), n)
}

fn small_cfg() -> DetectionConfig {
    DetectionConfig {
        window_len: 20,
        min_tweets: 3,
        ..Default::default()
    }
}

prop_compose! {
    fn arb_day_messages(n_days: usize)(
        rows in prop::collection::vec(
            (0..2usize, 0..n_days, prop::collection::vec(0..10usize, 0..3), -1.0f64..1.0),
            0..600,
        )
    ) -> Vec<DayMessage> {
        rows.into_iter()
            .map(|(f, day, subs, sentiment)| DayMessage {
                firm: ["A", "B"][f].to_string(),
                day,
                nodes: subs.into_iter().map(|i| TaxonomyNode::SUBCATEGORIES[i]).collect::<NodeSet>(),
                sentiment,
            })
            .collect()
    }
}

fn detect_everything(msgs: &[DayMessage], n_days: usize, cfg: &DetectionConfig) -> Vec<RiskEvent> {
    let cal = calendar(n_days);
    let set = build_series(msgs, n_days);
    set.iter()
        .flat_map(|s| detect_series(&s, &cal, cfg, 0.05).unwrap())
        .collect()
}

fn merged_days(events: &[RiskEvent]) -> BTreeSet<(String, TaxonomyNode, usize)> {
    events
        .iter()
        .flat_map(|e| e.merged_outlier_days.iter().map(|&d| (e.firm.clone(), e.node, d)))
        .collect()
}

fn message_csv(rows: &[(u8, bool, i64)]) -> String {
    let mut s = String::from("id,firm,timestamp,text\n");
    for (i, &(kind, firm_ok, secs)) in rows.iter().enumerate() {
        let firm = if firm_ok { "AAA" } else { "" };
        let ts = match kind {
            0 => format!("{}", chrono::DateTime::from_timestamp(secs, 0).unwrap().format("%Y-%m-%dT%H:%M:%SZ")),
            1 => "yesterday".to_string(),
            _ => format!("{}", chrono::DateTime::from_timestamp(secs, 0).unwrap().format("%Y-%m-%d %H:%M:%S")),
        };
        s.push_str(&format!("m{i},{firm},{ts},\"text, {i}\"\n"));
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ingest_conserves_rows_and_is_deterministic(
        rows in prop::collection::vec((0u8..3, prop::bool::weighted(0.9), 1_500_000_000i64..1_700_000_000), 0..80)
    ) {
        let csv = message_csv(&rows);
        let (msgs, rep) = read_messages_from(csv.as_bytes(), "m.csv", New_York).unwrap();
        prop_assert_eq!(rep.rows, rows.len());
        prop_assert_eq!(rep.rows, rep.accepted + rep.skipped.len());
        prop_assert_eq!(rep.accepted, msgs.len());
        let (again, rep2) = read_messages_from(csv.as_bytes(), "m.csv", New_York).unwrap();
        prop_assert_eq!(msgs, again);
        prop_assert_eq!(rep, rep2);
    }

    #[test]
    fn naive_timestamps_round_trip_through_dst(minutes in 0i64..(2 * 366 * 24 * 60)) {
        // 2019 and 2020 cover two spring-forward and two fall-back transitions
        let wall: NaiveDateTime = NaiveDate::from_ymd_opt(2019, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap()
            + Duration::minutes(minutes);
        let text = wall.format("%Y-%m-%d %H:%M:%S").to_string();
        match parse_timestamp(&text, New_York) {
            Ok(utc) => prop_assert_eq!(utc.with_timezone(&New_York).naive_local(), wall),
            Err(_) => prop_assert!(New_York.from_local_datetime(&wall).single().is_none()
                && New_York.from_local_datetime(&wall).earliest().is_none()),
        }
    }

    #[test]
    fn merged_events_are_more_than_gap_apart(msgs in arb_day_messages(60)) {
        let cfg = small_cfg();
        let events = detect_everything(&msgs, 60, &cfg);
        for w in events.windows(2) {
            if w[0].firm == w[1].firm && w[0].node == w[1].node {
                prop_assert!(w[1].day - w[0].day > cfg.gap_days);
            }
        }
        for e in &events {
            prop_assert!(e.count >= cfg.min_tweets);
            prop_assert!(e.share >= cfg.min_share);
            prop_assert_eq!(e.merged_outlier_days[0], e.day);
        }
    }

    #[test]
    fn stricter_knobs_never_add_outlier_days(msgs in arb_day_messages(60)) {
        let base = small_cfg();
        let loose = merged_days(&detect_everything(&msgs, 60, &base));
        let z3 = merged_days(&detect_everything(&msgs, 60, &DetectionConfig { z: 3.0, ..base.clone() }));
        let mt = merged_days(&detect_everything(&msgs, 60, &DetectionConfig { min_tweets: 6, ..base.clone() }));
        prop_assert!(z3.is_subset(&loose));
        prop_assert!(mt.is_subset(&loose));
    }

    #[test]
    fn raising_z_shrinks_raw_outliers(counts in prop::collection::vec(0u32..30, 0..120), z in 0.5f64..4.0) {
        let lo = DetectionConfig { window_len: 15, z, ..Default::default() };
        let hi = DetectionConfig { z: z + 1.0, ..lo.clone() };
        let a: BTreeSet<usize> = esd_outliers(&counts, &lo).into_iter().collect();
        let b: BTreeSet<usize> = esd_outliers(&counts, &hi).into_iter().collect();
        prop_assert!(b.is_subset(&a));
    }

    #[test]
    fn wider_exclusion_removes_a_superset(
        msgs in arb_day_messages(60),
        confounds in prop::collection::vec((0..2usize, 0..90i64, prop::bool::ANY), 0..8),
        h in 1usize..6,
    ) {
        let n_days = 60;
        let cal = calendar(n_days);
        let cfg = small_cfg();
        let events = detect_everything(&msgs, n_days, &cfg);
        let rows: Vec<CalendarEventRow> = confounds
            .into_iter()
            .map(|(f, off, earn)| CalendarEventRow {
                firm: ["A", "B"][f].to_string(),
                date: cal.first() + Duration::days(off),
                kind: if earn { CalendarEventKind::EarningsRelease } else { CalendarEventKind::ControversyNews },
            })
            .collect();
        let idx = ConfoundIndex::new(&rows, &cal);
        let removed_at = |h: usize| -> BTreeSet<(String, TaxonomyNode, usize)> {
            let c = DetectionConfig { exclusion_halfwidth: h, ..cfg.clone() };
            let (kept, removed) = exclude_confounded(events.clone(), &idx, &c);
            assert_eq!(kept.len() + removed.len(), events.len());
            removed.into_iter().map(|r| (r.event.firm, r.event.node, r.event.day)).collect()
        };
        prop_assert!(removed_at(h).is_subset(&removed_at(h + 1)));
    }

    #[test]
    fn market_model_scaling(
        pairs in prop::collection::vec((-0.05f64..0.05, -0.05f64..0.05), 10..60),
        k in 0.1f64..50.0,
        ev in (-0.05f64..0.05, -0.05f64..0.05),
    ) {
        let (m, f): (Vec<f64>, Vec<f64>) = pairs.iter().map(|&(m, e)| (m, 0.0002 + 1.1 * m + e)).unzip();
        let km: Vec<f64> = m.iter().map(|x| x * k).collect();
        let kf: Vec<f64> = f.iter().map(|x| x * k).collect();
        let (Ok(fit), Ok(kfit)) = (MarketModelFit::estimate(&m, &f), MarketModelFit::estimate(&km, &kf)) else {
            return Ok(());
        };
        let ar = abnormal_return(&fit, ev.1, ev.0);
        let kar = abnormal_return(&kfit, k * ev.1, k * ev.0);
        prop_assert!((kar - k * ar).abs() <= 1e-9 * (1.0 + (k * ar).abs()));
        let sar = standardize(&fit, ar, ev.0);
        let ksar = standardize(&kfit, kar, k * ev.0);
        prop_assert!((ksar - sar).abs() <= 1e-7 * (1.0 + sar.abs()));
    }

    #[test]
    fn tstat_scale_and_sign(values in prop::collection::vec(-3.0f64..3.0, 2..50), k in 0.01f64..100.0) {
        let Ok(t) = bmp_tstat(&values) else { return Ok(()); };
        let scaled: Vec<f64> = values.iter().map(|v| v * k).collect();
        let negated: Vec<f64> = values.iter().map(|v| -v).collect();
        prop_assert!((bmp_tstat(&scaled).unwrap() - t).abs() <= 1e-9 * (1.0 + t.abs()));
        prop_assert_eq!(bmp_tstat(&negated).unwrap(), -t);
    }

    #[test]
    fn printed_values_parse_back(v in -50.0f64..50.0, t in prop::option::of(-8.0f64..8.0)) {
        let cell = Cell { stat: "SAAR", window: "t0".into(), value: Some(v), t };
        let text = cell.value_text();
        let number: f64 = text.trim_end_matches('*').parse().unwrap();
        prop_assert!((number - v).abs() <= 0.0005 + 1e-12);
        prop_assert!(text.trim_end_matches('*').split('.').nth(1).unwrap().len() == 3);
    }
}

#[test]
fn synthetic_generation_is_deterministic() {
    let cfg = SynthConfig {
        seed: 11,
        n_firms: 2,
        n_days: 40,
        noise_rate: 5.0,
        ..Default::default()
    };
    let a = generate(&cfg).unwrap();
    let b = generate(&cfg).unwrap();
    assert!(!a.messages.is_empty());
    assert_eq!(a.messages, b.messages);
    assert_eq!(a.returns.firm_returns, b.returns.firm_returns);
    assert_eq!(a.returns.market, b.returns.market);
    let c = generate(&SynthConfig { seed: 12, ..cfg }).unwrap();
    assert_ne!(a.messages, c.messages);
}

#[test]
fn results_rows_follow_taxonomy_blocks() {
    let order: Vec<TaxonomyNode> = esgrisk::report::report_order();
    assert_eq!(order[0], TaxonomyNode::EsgAll);
    let mut pillar = None;
    for n in &order[1..] {
        match n.parent() {
            Some(TaxonomyNode::EsgAll) => pillar = Some(*n),
            p => assert_eq!(p, pillar, "{n} out of its pillar block"),
        }
    }
}
