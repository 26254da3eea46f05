//! Trading-day assignment and per-(firm, node) daily message series.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::{DateTime, NaiveDate, NaiveTime, Utc};
use chrono_tz::Tz;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::MarketIndexRow;
use crate::lexicon::{NodeSet, TaxonomyNode};
use crate::sentiment::DailySentiment;

/// Exchange close; a message stamped exactly at the close belongs to that day.
pub const MARKET_CLOSE: NaiveTime = match NaiveTime::from_hms_opt(16, 0, 0) {
    Some(t) => t,
    None => panic!("bad close time"),
};

/// Ordered trading dates. Days are addressed by their index in the calendar.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TradingCalendar {
    days: Vec<NaiveDate>,
}

impl TradingCalendar {
    pub fn new(days: Vec<NaiveDate>) -> Result<Self> {
        if days.is_empty() {
            return Err(Error::Data("trading calendar is empty".into()));
        }
        if let Some(w) = days.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Data(format!(
                "trading calendar not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(TradingCalendar { days })
    }

    /// The calendar is the set of dates carrying a market-index return.
    pub fn from_market_index(rows: &[MarketIndexRow]) -> Result<Self> {
        let mut days: Vec<NaiveDate> = rows.iter().map(|r| r.date).collect();
        days.sort();
        Self::new(days)
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn days(&self) -> &[NaiveDate] {
        &self.days
    }

    pub fn date(&self, day: usize) -> NaiveDate {
        self.days[day]
    }

    pub fn first(&self) -> NaiveDate {
        self.days[0]
    }

    pub fn last(&self) -> NaiveDate {
        self.days[self.days.len() - 1]
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        self.days.binary_search(&date).ok()
    }

    pub fn first_on_or_after(&self, date: NaiveDate) -> Option<usize> {
        let i = self.days.partition_point(|d| *d < date);
        (i < self.days.len()).then_some(i)
    }

    pub fn first_after(&self, date: NaiveDate) -> Option<usize> {
        let i = self.days.partition_point(|d| *d <= date);
        (i < self.days.len()).then_some(i)
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.index_of(date).is_some()
    }
}

/// Closing-to-closing assignment: a message belongs to trading day `d` when
/// it was sent after the close preceding `d` and no later than 16:00 on `d`,
/// exchange-local time. Messages before the first calendar date or after
/// the last close return `None`.
pub fn assign_trading_day(ts: DateTime<Utc>, calendar: &TradingCalendar, exchange_tz: Tz) -> Option<usize> {
    let local = ts.with_timezone(&exchange_tz).naive_local();
    let date = local.date();
    if date < calendar.first() {
        return None;
    }
    match calendar.index_of(date) {
        Some(i) if local.time() <= MARKET_CLOSE => Some(i),
        _ => calendar.first_after(date),
    }
}

/// One classified message placed on the trading calendar.
#[derive(Debug, Clone, PartialEq)]
pub struct DayMessage {
    pub firm: String,
    pub day: usize,
    /// Matched subcategories (not yet expanded).
    pub nodes: NodeSet,
    pub sentiment: f64,
}

/// Daily counts and sentiment sums for one taxonomy node of one firm.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSeries {
    pub counts: Vec<u32>,
    pub sentiment_sums: Vec<f64>,
}

impl NodeSeries {
    fn zeros(n: usize) -> Self {
        NodeSeries {
            counts: vec![0; n],
            sentiment_sums: vec![0.0; n],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirmSeries {
    /// All messages of the firm per day, ESG-related or not.
    pub totals: Vec<u32>,
    /// Indexed by [`TaxonomyNode::index`].
    pub nodes: Vec<NodeSeries>,
}

/// Borrowed view of one (firm, node) series.
#[derive(Debug, Clone, Copy)]
pub struct DailyCategorySeries<'a> {
    pub firm: &'a str,
    pub node: TaxonomyNode,
    pub counts: &'a [u32],
    pub totals: &'a [u32],
    pub sentiment_sums: &'a [f64],
}

impl DailyCategorySeries<'_> {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Mean sentiment of the node's messages on `day`; `None` if there were none.
    pub fn sentiment(&self, day: usize) -> Option<DailySentiment> {
        let n = self.counts[day];
        (n > 0).then(|| DailySentiment {
            score: self.sentiment_sums[day] / n as f64,
            message_count: n,
        })
    }

    pub fn share(&self, day: usize) -> f64 {
        match self.totals[day] {
            0 => 0.0,
            t => self.counts[day] as f64 / t as f64,
        }
    }
}

/// Every firm's series on a shared calendar.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSet {
    pub n_days: usize,
    pub firms: BTreeMap<String, FirmSeries>,
}

impl SeriesSet {
    pub fn get(&self, firm: &str, node: TaxonomyNode) -> Option<DailyCategorySeries<'_>> {
        self.firms.get_key_value(firm).map(|(name, fs)| view(name, fs, node))
    }

    /// All (firm, node) series, ordered by firm then node.
    pub fn iter(&self) -> impl Iterator<Item = DailyCategorySeries<'_>> {
        self.firms.iter().flat_map(|(name, fs)| {
            TaxonomyNode::ALL.into_iter().map(move |node| view(name, fs, node))
        })
    }

    /// Debug dump: one row per (firm, node, day) with a non-zero count.
    pub fn write_dump<W: Write>(&self, calendar: &TradingCalendar, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let wrap = |e: csv::Error| Error::Data(format!("series dump: {e}"));
        w.write_record(["firm", "node", "date", "count", "total", "sentiment"])
            .map_err(wrap)?;
        for s in self.iter() {
            for day in 0..s.len() {
                if s.counts[day] == 0 {
                    continue;
                }
                let sent = s.sentiment(day).map(|d| d.score).unwrap_or(0.0);
                w.write_record([
                    s.firm.to_string(),
                    s.node.ident().to_string(),
                    calendar.date(day).to_string(),
                    s.counts[day].to_string(),
                    s.totals[day].to_string(),
                    format!("{sent:.6}"),
                ])
                .map_err(wrap)?;
            }
        }
        w.flush().map_err(|e| Error::Data(format!("series dump: {e}")))?;
        Ok(())
    }
}

fn view<'a>(name: &'a str, fs: &'a FirmSeries, node: TaxonomyNode) -> DailyCategorySeries<'a> {
    let ns = &fs.nodes[node.index()];
    DailyCategorySeries {
        firm: name,
        node,
        counts: &ns.counts,
        totals: &fs.totals,
        sentiment_sums: &ns.sentiment_sums,
    }
}

/// Count messages per (firm, node, day). A message counts once for every
/// node in the ancestor closure of its matched subcategories, so pillar and
/// root counts are set unions rather than sums.
pub fn build_series(messages: &[DayMessage], n_days: usize) -> SeriesSet {
    let mut by_firm: BTreeMap<&str, Vec<&DayMessage>> = BTreeMap::new();
    for m in messages {
        assert!(m.day < n_days, "message day {} outside calendar of {n_days}", m.day);
        by_firm.entry(m.firm.as_str()).or_default().push(m);
    }
    let firms: Vec<(String, FirmSeries)> = by_firm
        .into_par_iter()
        .map(|(firm, msgs)| {
            let mut fs = FirmSeries {
                totals: vec![0; n_days],
                nodes: (0..TaxonomyNode::COUNT).map(|_| NodeSeries::zeros(n_days)).collect(),
            };
            for m in msgs {
                fs.totals[m.day] += 1;
                for node in m.nodes.with_ancestors().iter() {
                    let ns = &mut fs.nodes[node.index()];
                    ns.counts[m.day] += 1;
                    ns.sentiment_sums[m.day] += m.sentiment;
                }
            }
            (firm.to_string(), fs)
        })
        .collect();
    SeriesSet {
        n_days,
        firms: firms.into_iter().collect(),
    }
}
