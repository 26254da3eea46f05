//! Readers for every external input file.
//!
//! All inputs are comma-separated with a header row. Column lookup is by
//! (case-insensitive) header name, so column order does not matter.
//!
//! | file            | columns                       |
//! |-----------------|-------------------------------|
//! | messages        | `id,firm,timestamp,text`      |
//! | prices          | `firm,date,close[,return]`    |
//! | market index    | `date,return`                 |
//! | calendar events | `firm,date`                   |
//!
//! Message rows that fail validation are skipped and recorded in an
//! [`IngestReport`]; price and index problems are fatal because every
//! downstream return depends on them.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use chrono::{DateTime, LocalResult, NaiveDate, NaiveDateTime, TimeZone, Utc};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub id: String,
    pub firm: String,
    pub timestamp: DateTime<Utc>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceRow {
    pub firm: String,
    pub date: NaiveDate,
    pub close: f64,
    /// Simple daily return; `None` for the first row of a series when it
    /// had to be derived from closes.
    pub ret: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketIndexRow {
    pub date: NaiveDate,
    pub ret: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CalendarEventKind {
    EarningsRelease,
    ControversyNews,
}

impl CalendarEventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CalendarEventKind::EarningsRelease => "earnings_release",
            CalendarEventKind::ControversyNews => "controversy_news",
        }
    }
}

impl fmt::Display for CalendarEventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CalendarEventRow {
    pub firm: String,
    pub date: NaiveDate,
    pub kind: CalendarEventKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedRow {
    /// 1-based line number in the source file (the header is line 1).
    pub line: u64,
    pub reason: String,
}

/// Per-file accounting: `rows == accepted + skipped.len()` always holds.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub source: String,
    pub rows: usize,
    pub accepted: usize,
    pub skipped: Vec<SkippedRow>,
}

impl IngestReport {
    fn new(source: &str) -> Self {
        IngestReport {
            source: source.to_string(),
            ..Default::default()
        }
    }

    fn skip(&mut self, line: u64, reason: impl Into<String>) {
        let reason = reason.into();
        log::warn!("{}:{}: skipped row: {}", self.source, line, reason);
        self.skipped.push(SkippedRow { line, reason });
    }
}

/// Per-firm price series, each sorted by date.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PriceTable {
    pub series: BTreeMap<String, Vec<PriceRow>>,
}

impl PriceTable {
    pub fn firm(&self, firm: &str) -> Option<&[PriceRow]> {
        self.series.get(firm).map(Vec::as_slice)
    }
}

// ---------------------------------------------------------------------------
// csv plumbing

pub(crate) struct Table<R: Read> {
    source: String,
    reader: csv::Reader<R>,
    columns: Vec<String>,
}

impl Table<File> {
    pub(crate) fn open(path: &Path) -> Result<Self> {
        Table::open_with(path, false)
    }

    /// `comments` treats lines starting with `#` as comments (lexicon files).
    pub(crate) fn open_with(path: &Path, comments: bool) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Table::from_reader_with(file, &path.display().to_string(), comments)
    }
}

impl<R: Read> Table<R> {
    pub(crate) fn from_reader(reader: R, source: &str) -> Result<Self> {
        Table::from_reader_with(reader, source, false)
    }

    pub(crate) fn from_reader_with(reader: R, source: &str, comments: bool) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .flexible(true)
            .comment(comments.then_some(b'#'))
            .trim(csv::Trim::Headers)
            .from_reader(reader);
        let columns = reader
            .headers()
            .map_err(|e| Error::csv(PathBuf::from(source), e))?
            .iter()
            .map(|h| h.trim_start_matches('\u{feff}').to_ascii_lowercase())
            .collect();
        Ok(Table {
            source: source.to_string(),
            reader,
            columns,
        })
    }

    pub(crate) fn is_empty_file(&self) -> bool {
        self.columns.is_empty() || (self.columns.len() == 1 && self.columns[0].is_empty())
    }

    pub(crate) fn column(&self, name: &str) -> Result<usize> {
        self.optional_column(name).ok_or_else(|| {
            Error::Data(format!(
                "{}: missing required column `{}` (found: {})",
                self.source,
                name,
                self.columns.join(",")
            ))
        })
    }

    pub(crate) fn optional_column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub(crate) fn source(&self) -> &str {
        &self.source
    }

    /// Iterate records as `(line, record)`.
    pub(crate) fn records(
        &mut self,
    ) -> impl Iterator<Item = Result<(u64, csv::StringRecord)>> + '_ {
        let source = self.source.clone();
        self.reader.records().map(move |r| {
            let rec = r.map_err(|e| Error::csv(PathBuf::from(&source), e))?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            Ok((line, rec))
        })
    }
}

pub(crate) fn parse_date(s: &str) -> std::result::Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|e| format!("bad date {s:?}: {e}"))
}

fn parse_f64(s: &str, what: &str) -> std::result::Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("bad {what} {s:?}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("non-finite {what} {s:?}"))
    }
}

// ---------------------------------------------------------------------------
// timestamps

const NAIVE_FORMATS: &[&str] = &[
    "%Y-%m-%dT%H:%M:%S%.f",
    "%Y-%m-%d %H:%M:%S%.f",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M",
];

const OFFSET_FORMATS: &[&str] = &["%Y-%m-%d %H:%M:%S%.f%:z", "%Y-%m-%d %H:%M:%S%.f%z"];

/// Parse a timestamp to a UTC instant.
///
/// Timestamps carrying an offset (RFC 3339, `Z` or `±hh:mm`) are taken as
/// is; bare local times are read in `source_tz`. A local time repeated by a
/// DST fall-back resolves to its earlier instant; one skipped by a
/// spring-forward gap is rejected.
pub fn parse_timestamp(s: &str, source_tz: Tz) -> std::result::Result<DateTime<Utc>, String> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.with_timezone(&Utc));
    }
    for fmt in OFFSET_FORMATS {
        if let Ok(dt) = DateTime::parse_from_str(s, fmt) {
            return Ok(dt.with_timezone(&Utc));
        }
    }
    let naive = NAIVE_FORMATS
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
        .ok_or_else(|| format!("unparseable timestamp {s:?}"))?;
    match source_tz.from_local_datetime(&naive) {
        LocalResult::Single(dt) => Ok(dt.with_timezone(&Utc)),
        LocalResult::Ambiguous(early, _) => Ok(early.with_timezone(&Utc)),
        LocalResult::None => Err(format!(
            "timestamp {s:?} does not exist in {source_tz} (DST gap)"
        )),
    }
}

pub fn parse_tz(name: &str) -> Result<Tz> {
    name.parse::<Tz>()
        .map_err(|_| Error::Usage(format!("unknown timezone {name:?}")))
}

// ---------------------------------------------------------------------------
// readers

/// Read a message file; see the module docs for the schema.
pub fn read_messages(path: &Path, source_tz: Tz) -> Result<(Vec<Message>, IngestReport)> {
    parse_messages(Table::open(path)?, source_tz)
}

/// Same as [`read_messages`] but over any reader; `source` names it in
/// diagnostics.
pub fn read_messages_from<R: Read>(
    reader: R,
    source: &str,
    source_tz: Tz,
) -> Result<(Vec<Message>, IngestReport)> {
    parse_messages(Table::from_reader(reader, source)?, source_tz)
}

fn parse_messages<R: Read>(
    mut table: Table<R>,
    source_tz: Tz,
) -> Result<(Vec<Message>, IngestReport)> {
    let mut report = IngestReport::new(table.source());
    if table.is_empty_file() {
        return Ok((Vec::new(), report));
    }
    let c_id = table.column("id")?;
    let c_firm = table.column("firm")?;
    let c_ts = table.column("timestamp")?;
    let c_text = table.column("text")?;
    let width = [c_id, c_firm, c_ts, c_text].into_iter().max().unwrap_or(0) + 1;

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for item in table.records() {
        let (line, rec) = item?;
        report.rows += 1;
        if rec.len() < width {
            report.skip(line, format!("expected {width} fields, found {}", rec.len()));
            continue;
        }
        let id = rec[c_id].trim();
        let firm = rec[c_firm].trim();
        if id.is_empty() {
            report.skip(line, "empty id");
            continue;
        }
        if firm.is_empty() {
            report.skip(line, "empty firm");
            continue;
        }
        let timestamp = match parse_timestamp(&rec[c_ts], source_tz) {
            Ok(ts) => ts,
            Err(reason) => {
                report.skip(line, reason);
                continue;
            }
        };
        if !seen.insert(id.to_string()) {
            report.skip(line, format!("duplicate id {id:?}"));
            continue;
        }
        out.push(Message {
            id: id.to_string(),
            firm: firm.to_string(),
            timestamp,
            text: rec[c_text].to_string(),
        });
        report.accepted += 1;
    }
    Ok((out, report))
}

/// Read daily prices. When the `return` column is absent, returns are
/// derived from consecutive closes and the first row of each firm gets none.
pub fn read_prices(path: &Path) -> Result<PriceTable> {
    parse_prices(Table::open(path)?)
}

pub fn read_prices_from<R: Read>(reader: R, source: &str) -> Result<PriceTable> {
    parse_prices(Table::from_reader(reader, source)?)
}

fn parse_prices<R: Read>(mut table: Table<R>) -> Result<PriceTable> {
    if table.is_empty_file() {
        return Ok(PriceTable::default());
    }
    let c_firm = table.column("firm")?;
    let c_date = table.column("date")?;
    let c_close = table.column("close")?;
    let c_ret = table.optional_column("return");
    let source = table.source().to_string();

    let mut series: BTreeMap<String, Vec<PriceRow>> = BTreeMap::new();
    let mut seen = HashSet::new();
    for item in table.records() {
        let (line, rec) = item?;
        let bad = |msg: String| Error::Data(format!("{source}:{line}: {msg}"));
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        let firm = field(c_firm);
        if firm.is_empty() {
            return Err(bad("empty firm".into()));
        }
        let date = parse_date(field(c_date)).map_err(bad)?;
        let close = parse_f64(field(c_close), "close").map_err(bad)?;
        if close <= 0.0 {
            return Err(bad(format!("close must be positive, got {close}")));
        }
        let ret = match c_ret.map(field) {
            Some(s) if !s.is_empty() => Some(parse_f64(s, "return").map_err(bad)?),
            _ => None,
        };
        if !seen.insert((firm.to_string(), date)) {
            return Err(bad(format!("duplicate price row ({firm}, {date})")));
        }
        series.entry(firm.to_string()).or_default().push(PriceRow {
            firm: firm.to_string(),
            date,
            close,
            ret,
        });
    }

    for rows in series.values_mut() {
        rows.sort_by_key(|r| r.date);
        if c_ret.is_none() {
            let closes: Vec<f64> = rows.iter().map(|r| r.close).collect();
            rows[0].ret = None;
            for (i, row) in rows.iter_mut().enumerate().skip(1) {
                row.ret = Some(closes[i] / closes[i - 1] - 1.0);
            }
        }
    }
    Ok(PriceTable { series })
}

/// Read the market index; the result is sorted by date.
pub fn read_market_index(path: &Path) -> Result<Vec<MarketIndexRow>> {
    parse_market_index(Table::open(path)?)
}

pub fn read_market_index_from<R: Read>(reader: R, source: &str) -> Result<Vec<MarketIndexRow>> {
    parse_market_index(Table::from_reader(reader, source)?)
}

fn parse_market_index<R: Read>(mut table: Table<R>) -> Result<Vec<MarketIndexRow>> {
    if table.is_empty_file() {
        return Ok(Vec::new());
    }
    let c_date = table.column("date")?;
    let c_ret = table.column("return")?;
    let source = table.source().to_string();
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for item in table.records() {
        let (line, rec) = item?;
        let bad = |msg: String| Error::Data(format!("{source}:{line}: {msg}"));
        let date = parse_date(rec.get(c_date).unwrap_or("")).map_err(bad)?;
        let ret = parse_f64(rec.get(c_ret).unwrap_or(""), "return").map_err(bad)?;
        if !seen.insert(date) {
            return Err(bad(format!("duplicate market index date {date}")));
        }
        rows.push(MarketIndexRow { date, ret });
    }
    rows.sort_by_key(|r| r.date);
    Ok(rows)
}

/// Read earnings-release or controversy-news dates. Bad rows are skipped
/// and reported; an empty file yields no rows.
pub fn read_calendar_events(
    path: &Path,
    kind: CalendarEventKind,
) -> Result<(Vec<CalendarEventRow>, IngestReport)> {
    parse_calendar_events(Table::open(path)?, kind)
}

pub fn read_calendar_events_from<R: Read>(
    reader: R,
    source: &str,
    kind: CalendarEventKind,
) -> Result<(Vec<CalendarEventRow>, IngestReport)> {
    parse_calendar_events(Table::from_reader(reader, source)?, kind)
}

fn parse_calendar_events<R: Read>(
    mut table: Table<R>,
    kind: CalendarEventKind,
) -> Result<(Vec<CalendarEventRow>, IngestReport)> {
    let mut report = IngestReport::new(table.source());
    if table.is_empty_file() {
        return Ok((Vec::new(), report));
    }
    let c_firm = table.column("firm")?;
    let c_date = table.column("date")?;
    let mut out = Vec::new();
    for item in table.records() {
        let (line, rec) = item?;
        report.rows += 1;
        let firm = rec.get(c_firm).unwrap_or("").trim();
        if firm.is_empty() {
            report.skip(line, "empty firm");
            continue;
        }
        match parse_date(rec.get(c_date).unwrap_or("")) {
            Ok(date) => {
                out.push(CalendarEventRow {
                    firm: firm.to_string(),
                    date,
                    kind,
                });
                report.accepted += 1;
            }
            Err(reason) => report.skip(line, reason),
        }
    }
    Ok((out, report))
}
