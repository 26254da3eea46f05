//! Abnormal-volume event detection.
//!
//! A day is an outlier when its count sits at least `z` sample standard
//! deviations above the mean of the `window_len` trading days strictly
//! before it. Outliers are then filtered by size and share of the firm's
//! traffic, merged when they fall within `gap_days` of an earlier accepted
//! outlier, signed by the day's sentiment index, and dropped when they sit
//! within `exclusion_halfwidth` trading days of an earnings release or a
//! controversy news item.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::{DailyCategorySeries, SeriesSet, TradingCalendar};
use crate::error::{Error, Result};
use crate::ingest::{parse_date, CalendarEventKind, CalendarEventRow, Table};
use crate::lexicon::TaxonomyNode;
use crate::sentiment::{classify_sign, Sign};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionConfig {
    pub z: f64,
    pub window_len: usize,
    pub min_share: f64,
    pub min_tweets: u32,
    pub gap_days: usize,
    pub exclusion_halfwidth: usize,
    /// Also flag unusually quiet days. Off by default: events are spikes.
    pub two_sided: bool,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            z: 2.0,
            window_len: 250,
            min_share: 0.05,
            min_tweets: 10,
            gap_days: 5,
            exclusion_halfwidth: 5,
            two_sided: false,
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Usage(format!("detection config: {m}")));
        if !(self.z.is_finite() && self.z > 0.0) {
            return bad("z must be positive");
        }
        if self.window_len < 2 {
            return bad("window_len must be at least 2");
        }
        if !(self.min_share > 0.0 && self.min_share < 1.0) {
            return bad("min_share must lie in (0, 1)");
        }
        if self.min_tweets == 0 {
            return bad("min_tweets must be positive");
        }
        if self.gap_days == 0 {
            return bad("gap_days must be positive");
        }
        if self.exclusion_halfwidth == 0 {
            return bad("exclusion_halfwidth must be positive");
        }
        Ok(())
    }
}

/// Days flagged by the trailing-window z-score rule.
///
/// Window moments come from exact integer running sums, so the cost is
/// linear in the series length. Days without a full window, and windows
/// with zero variance, are never flagged.
pub fn esd_outliers(counts: &[u32], cfg: &DetectionConfig) -> Vec<usize> {
    let n = cfg.window_len;
    if counts.len() <= n {
        return Vec::new();
    }
    let mut sum: u128 = counts[..n].iter().map(|&c| c as u128).sum();
    let mut sumsq: u128 = counts[..n].iter().map(|&c| (c as u128) * (c as u128)).sum();
    let nn = n as u128;
    let mut out = Vec::new();
    for t in n..counts.len() {
        // n * sum((x - mean)^2) = n * sumsq - sum^2, exact in integers
        let spread = nn * sumsq - sum * sum;
        if spread > 0 {
            let mean = sum as f64 / n as f64;
            let var = spread as f64 / (n as f64 * (n - 1) as f64);
            let sigma = var.sqrt();
            let dev = counts[t] as f64 - mean;
            let direction_ok = cfg.two_sided || dev > 0.0;
            if direction_ok && dev.abs() >= cfg.z * sigma {
                out.push(t);
            }
        }
        let (old, new) = (counts[t - n] as u128, counts[t] as u128);
        sum = sum + new - old;
        sumsq = sumsq + new * new - old * old;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskEvent {
    pub firm: String,
    pub node: TaxonomyNode,
    /// Calendar index of the event day.
    pub day: usize,
    pub date: NaiveDate,
    pub count: u32,
    pub total: u32,
    pub share: f64,
    pub sentiment_score: f64,
    pub sign: Sign,
    /// Every outlier folded into this event, starting with `day`.
    pub merged_outlier_days: Vec<usize>,
}

/// Apply the size and share filters, merge nearby outliers into the first
/// one, and sign each event from the event day's sentiment index.
pub fn filter_and_merge(
    outliers: &[usize],
    series: &DailyCategorySeries<'_>,
    calendar: &TradingCalendar,
    cfg: &DetectionConfig,
    sign_threshold: f64,
) -> Result<Vec<RiskEvent>> {
    let mut accepted: Vec<usize> = outliers
        .iter()
        .copied()
        .filter(|&d| series.counts[d] >= cfg.min_tweets && series.share(d) >= cfg.min_share)
        .collect();
    accepted.sort_unstable();

    let mut events: Vec<RiskEvent> = Vec::new();
    for day in accepted {
        if let Some(last) = events.last_mut() {
            if day - last.day <= cfg.gap_days {
                last.merged_outlier_days.push(day);
                continue;
            }
        }
        let sentiment = series.sentiment(day).ok_or_else(|| {
            Error::Numeric(format!(
                "no sentiment for {} / {} on day {day} despite count {}",
                series.firm, series.node, series.counts[day]
            ))
        })?;
        events.push(RiskEvent {
            firm: series.firm.to_string(),
            node: series.node,
            day,
            date: calendar.date(day),
            count: series.counts[day],
            total: series.totals[day],
            share: series.share(day),
            sentiment_score: sentiment.score,
            sign: classify_sign(sentiment.score, sign_threshold),
            merged_outlier_days: vec![day],
        });
    }
    Ok(events)
}

/// Full detection for one series.
pub fn detect_series(
    series: &DailyCategorySeries<'_>,
    calendar: &TradingCalendar,
    cfg: &DetectionConfig,
    sign_threshold: f64,
) -> Result<Vec<RiskEvent>> {
    let outliers = esd_outliers(series.counts, cfg);
    filter_and_merge(&outliers, series, calendar, cfg, sign_threshold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovedEvent {
    pub event: RiskEvent,
    pub kind: CalendarEventKind,
    /// Trading days from the event to the nearest confounding date
    /// (positive when the confound comes after the event).
    pub distance: i64,
}

/// Confounding dates per firm, as calendar indices. Dates on non-trading
/// days move to the next trading day; dates outside the calendar are ignored.
#[derive(Debug, Clone, Default)]
pub struct ConfoundIndex {
    by_firm: HashMap<String, Vec<(usize, CalendarEventKind)>>,
}

impl ConfoundIndex {
    pub fn new(rows: &[CalendarEventRow], calendar: &TradingCalendar) -> Self {
        let mut by_firm: HashMap<String, Vec<(usize, CalendarEventKind)>> = HashMap::new();
        for r in rows {
            if r.date < calendar.first() {
                continue;
            }
            if let Some(i) = calendar.first_on_or_after(r.date) {
                by_firm.entry(r.firm.clone()).or_default().push((i, r.kind));
            }
        }
        for v in by_firm.values_mut() {
            v.sort();
            v.dedup();
        }
        ConfoundIndex { by_firm }
    }

    /// Nearest confound within `halfwidth` trading days, ties going to the
    /// earlier date.
    pub fn nearest(&self, firm: &str, day: usize, halfwidth: usize) -> Option<(i64, CalendarEventKind)> {
        let rows = self.by_firm.get(firm)?;
        let lo = day.saturating_sub(halfwidth);
        let start = rows.partition_point(|(d, _)| *d < lo);
        rows[start..]
            .iter()
            .take_while(|(d, _)| *d <= day + halfwidth)
            .map(|&(d, kind)| (d as i64 - day as i64, kind))
            .min_by_key(|&(dist, kind)| (dist.abs(), dist, kind))
    }
}

pub fn exclude_confounded(
    events: Vec<RiskEvent>,
    confounds: &ConfoundIndex,
    cfg: &DetectionConfig,
) -> (Vec<RiskEvent>, Vec<RemovedEvent>) {
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for e in events {
        match confounds.nearest(&e.firm, e.day, cfg.exclusion_halfwidth) {
            Some((distance, kind)) => removed.push(RemovedEvent {
                event: e,
                kind,
                distance,
            }),
            None => kept.push(e),
        }
    }
    (kept, removed)
}

/// Split events into (negative, positive). Only negative events are risk
/// events; positive ones are kept for diagnostics.
pub fn select_risk_events(events: Vec<RiskEvent>) -> (Vec<RiskEvent>, Vec<RiskEvent>) {
    events.into_iter().partition(|e| e.sign == Sign::Negative)
}

/// Everything detection produces, each list sorted by (firm, node, day).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionOutcome {
    pub risk_events: Vec<RiskEvent>,
    pub positive_events: Vec<RiskEvent>,
    pub removed: Vec<RemovedEvent>,
}

impl DetectionOutcome {
    /// Every detected event (before confound and sign filtering).
    pub fn all_detected(&self) -> impl Iterator<Item = &RiskEvent> {
        self.risk_events
            .iter()
            .chain(&self.positive_events)
            .chain(self.removed.iter().map(|r| &r.event))
    }
}

/// Run detection over every (firm, node) series.
pub fn detect_all(
    series: &SeriesSet,
    calendar: &TradingCalendar,
    confounds: &ConfoundIndex,
    cfg: &DetectionConfig,
    sign_threshold: f64,
) -> Result<DetectionOutcome> {
    cfg.validate()?;
    let views: Vec<DailyCategorySeries<'_>> = series.iter().collect();
    let detected: Vec<Vec<RiskEvent>> = views
        .par_iter()
        .map(|s| detect_series(s, calendar, cfg, sign_threshold))
        .collect::<Result<_>>()?;
    let events: Vec<RiskEvent> = detected.into_iter().flatten().collect();
    let (kept, mut removed) = exclude_confounded(events, confounds, cfg);
    let (mut risk_events, mut positive_events) = select_risk_events(kept);
    let key = |e: &RiskEvent| (e.firm.clone(), e.node, e.day);
    risk_events.sort_by_key(key);
    positive_events.sort_by_key(key);
    removed.sort_by_key(|r| key(&r.event));
    Ok(DetectionOutcome {
        risk_events,
        positive_events,
        removed,
    })
}

// ---------------------------------------------------------------------------
// events file

pub const EVENTS_HEADER: [&str; 10] = [
    "firm",
    "node",
    "date",
    "count",
    "share",
    "sentiment_score",
    "sign",
    "kept",
    "removal_reason",
    "distance_to_confound",
];

/// One row of the events file.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub firm: String,
    pub node: TaxonomyNode,
    pub date: NaiveDate,
    pub count: u32,
    pub share: f64,
    pub sentiment_score: f64,
    pub sign: Sign,
    /// True when the event enters the event study.
    pub kept: bool,
    pub removal_reason: Option<String>,
    pub distance_to_confound: Option<i64>,
}

pub const POSITIVE_SENTIMENT: &str = "positive_sentiment";

impl DetectionOutcome {
    /// Rows for the events file, sorted by (firm, node, date).
    pub fn records(&self) -> Vec<EventRecord> {
        let rec = |e: &RiskEvent, kept: bool, reason: Option<String>, dist: Option<i64>| EventRecord {
            firm: e.firm.clone(),
            node: e.node,
            date: e.date,
            count: e.count,
            share: e.share,
            sentiment_score: e.sentiment_score,
            sign: e.sign,
            kept,
            removal_reason: reason,
            distance_to_confound: dist,
        };
        let mut rows: Vec<EventRecord> = self
            .risk_events
            .iter()
            .map(|e| rec(e, true, None, None))
            .chain(
                self.positive_events
                    .iter()
                    .map(|e| rec(e, false, Some(POSITIVE_SENTIMENT.into()), None)),
            )
            .chain(self.removed.iter().map(|r| {
                rec(&r.event, false, Some(r.kind.as_str().into()), Some(r.distance))
            }))
            .collect();
        rows.sort_by(|a, b| (&a.firm, a.node, a.date).cmp(&(&b.firm, b.node, b.date)));
        rows
    }
}

pub fn write_events<W: Write>(records: &[EventRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::Data(format!("writing events: {e}"));
    w.write_record(EVENTS_HEADER).map_err(wrap)?;
    for r in records {
        w.write_record([
            r.firm.clone(),
            r.node.ident().to_string(),
            r.date.to_string(),
            r.count.to_string(),
            format!("{:.6}", r.share),
            format!("{:.6}", r.sentiment_score),
            r.sign.to_string(),
            r.kept.to_string(),
            r.removal_reason.clone().unwrap_or_default(),
            r.distance_to_confound.map(|d| d.to_string()).unwrap_or_default(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::Data(format!("writing events: {e}")))?;
    Ok(())
}

pub fn read_events(path: &Path) -> Result<Vec<EventRecord>> {
    parse_events(Table::open(path)?)
}

pub fn read_events_from<R: Read>(reader: R, source: &str) -> Result<Vec<EventRecord>> {
    parse_events(Table::from_reader(reader, source)?)
}

fn parse_events<R: Read>(mut table: Table<R>) -> Result<Vec<EventRecord>> {
    if table.is_empty_file() {
        return Ok(Vec::new());
    }
    let cols: Vec<usize> = EVENTS_HEADER
        .iter()
        .map(|c| table.column(c))
        .collect::<Result<_>>()?;
    let source = table.source().to_string();
    let mut out = Vec::new();
    for item in table.records() {
        let (line, rec) = item?;
        let bad = |m: String| Error::Data(format!("{source}:{line}: {m}"));
        let f = |i: usize| rec.get(cols[i]).unwrap_or("").trim();
        let num = |i: usize| -> Result<f64> {
            f(i).parse().map_err(|_| bad(format!("bad {} {:?}", EVENTS_HEADER[i], f(i))))
        };
        out.push(EventRecord {
            firm: f(0).to_string(),
            node: f(1).parse().map_err(|e: crate::lexicon::UnknownNode| bad(e.to_string()))?,
            date: parse_date(f(2)).map_err(bad)?,
            count: f(3).parse().map_err(|_| bad(format!("bad count {:?}", f(3))))?,
            share: num(4)?,
            sentiment_score: num(5)?,
            sign: f(6).parse().map_err(bad)?,
            kept: f(7).parse().map_err(|_| bad(format!("bad kept flag {:?}", f(7))))?,
            removal_reason: Some(f(8)).filter(|s| !s.is_empty()).map(str::to_string),
            distance_to_confound: match f(9) {
                "" => None,
                s => Some(s.parse().map_err(|_| bad(format!("bad distance {s:?}")))?),
            },
        });
    }
    Ok(out)
}

/// Event counts per node.
pub fn count_by_node<'a>(events: impl IntoIterator<Item = &'a RiskEvent>) -> BTreeMap<TaxonomyNode, usize> {
    let mut m = BTreeMap::new();
    for e in events {
        *m.entry(e.node).or_insert(0) += 1;
    }
    m
}

/// Removed events per signed distance, zero-filled over `[-halfwidth, halfwidth]`.
pub fn distance_histogram(removed: &[RemovedEvent], halfwidth: usize) -> BTreeMap<i64, usize> {
    let h = halfwidth as i64;
    let mut m: BTreeMap<i64, usize> = (-h..=h).map(|d| (d, 0)).collect();
    for r in removed {
        *m.entry(r.distance).or_insert(0) += 1;
    }
    m
}
