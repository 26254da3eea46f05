//! Run configuration and the file-based stages behind the command-line tool.
//!
//! Stages hand off through files in `out_dir`: `classify` writes
//! `classified.csv`, `detect` reads it and writes `events.csv`, `study`
//! reads the kept rows of `events.csv`. Every stage also echoes the
//! effective configuration to `resolved_config.toml`.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Read};
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use chrono_tz::Tz;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::{assign_trading_day, build_series, DayMessage, SeriesSet, TradingCalendar};
use crate::detect::{
    detect_all, read_events, write_events, ConfoundIndex, DetectionConfig, DetectionOutcome, EventRecord,
};
use crate::error::{Error, Result};
use crate::ingest::{
    parse_timestamp, parse_tz, read_calendar_events, read_market_index, read_messages, read_prices,
    CalendarEventKind, CalendarEventRow, IngestReport, Message, Table,
};
use crate::lexicon::{Lexicon, NodeSet, TaxonomyNode};
use crate::report::{render_event_summary, render_results, EventSummary};
use crate::sentiment::{SentimentLexicon, DEFAULT_SIGN_THRESHOLD};
use crate::study::{run_study, EstimationConfig, ReturnPanel, StudyEvent, StudyOutcome};
use crate::synth::{
    evaluate_detection, generate, read_ground_truth, DetectedKey, DetectionScore, PlantSchedule, SynthConfig,
    SynthDataset,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub messages: Option<PathBuf>,
    pub prices: Option<PathBuf>,
    pub market: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub sentiment_lexicon: Option<PathBuf>,
    pub earnings: Option<PathBuf>,
    pub controversies: Option<PathBuf>,
    /// Classified-message artifact; defaults to `out_dir/classified.csv`.
    pub classified: Option<PathBuf>,
    /// Events file; defaults to `out_dir/events.csv`.
    pub events: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Zone for message timestamps that carry no offset.
    pub source_tz: String,
    /// Exchange zone for the 16:00 close-to-close day assignment.
    pub exchange_tz: String,
    pub sentiment_threshold: f64,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    /// Also run the study with this estimation length (e.g. 90).
    pub robustness_est_len: Option<usize>,
    /// Write the per-day series dump (`series.csv`).
    pub dump_series: bool,
    pub detection: DetectionConfig,
    pub estimation: EstimationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            messages: None,
            prices: None,
            market: None,
            lexicon: None,
            sentiment_lexicon: None,
            earnings: None,
            controversies: None,
            classified: None,
            events: None,
            out_dir: PathBuf::from("out"),
            source_tz: "UTC".into(),
            exchange_tz: "America/New_York".into(),
            sentiment_threshold: DEFAULT_SIGN_THRESHOLD,
            threads: 0,
            robustness_est_len: None,
            dump_series: false,
            detection: DetectionConfig::default(),
            estimation: EstimationConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parse a TOML config; relative paths are taken relative to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::from_toml(&text, base).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))
    }

    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Usage(e.to_string()))?;
        cfg.rebase(base);
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.messages,
            &mut self.prices,
            &mut self.market,
            &mut self.lexicon,
            &mut self.sentiment_lexicon,
            &mut self.earnings,
            &mut self.controversies,
            &mut self.classified,
            &mut self.events,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        fix(&mut self.out_dir);
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.detection.validate()?;
        self.estimation.validate()?;
        if let Some(n) = self.robustness_est_len {
            self.estimation.with_est_len(n).validate()?;
        }
        if !self.sentiment_threshold.is_finite() {
            return Err(Error::Usage("sentiment_threshold must be finite".into()));
        }
        parse_tz(&self.source_tz).map_err(|e| Error::Usage(e.to_string()))?;
        parse_tz(&self.exchange_tz).map_err(|e| Error::Usage(e.to_string()))?;
        Ok(())
    }

    fn require<'a>(&self, p: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
        let p = p
            .as_deref()
            .ok_or_else(|| Error::Usage(format!("no `{name}` path configured")))?;
        if !p.is_file() {
            return Err(Error::Usage(format!("{name} file {} does not exist", p.display())));
        }
        Ok(p)
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    pub fn classified_path(&self) -> PathBuf {
        self.classified.clone().unwrap_or_else(|| self.out("classified.csv"))
    }

    pub fn events_path(&self) -> PathBuf {
        self.events.clone().unwrap_or_else(|| self.out("events.csv"))
    }

    fn prepare_out(&self) -> Result<()> {
        fs::create_dir_all(&self.out_dir).map_err(|e| Error::io(&self.out_dir, e))?;
        write_text(&self.out("resolved_config.toml"), &self.to_toml())
    }

    fn exchange(&self) -> Result<Tz> {
        parse_tz(&self.exchange_tz)
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    if threads == 0 {
        return f();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Usage(format!("thread pool: {e}")))?;
    pool.install(f)
}

// ---------------------------------------------------------------------------
// classify

/// One message after keyword classification and sentiment scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifiedRow {
    pub id: String,
    pub firm: String,
    pub timestamp: DateTime<Utc>,
    /// Matched subcategories (ancestors are implied).
    pub nodes: NodeSet,
    pub sentiment: f64,
    pub matched_terms: Vec<String>,
}

pub fn classify_all(messages: &[Message], lexicon: &Lexicon, sentiment: &SentimentLexicon) -> Vec<ClassifiedRow> {
    messages
        .par_iter()
        .map(|m| {
            let tokens = crate::lexicon::tokenize(&m.text);
            let (nodes, matches) = lexicon.classify_tokens(&tokens);
            let mut terms: Vec<String> = matches.iter().map(|t| t.term.join(" ")).collect();
            terms.dedup();
            ClassifiedRow {
                id: m.id.clone(),
                firm: m.firm.clone(),
                timestamp: m.timestamp,
                nodes,
                sentiment: sentiment.score_tokens(&tokens),
                matched_terms: terms,
            }
        })
        .collect()
}

pub const CLASSIFIED_HEADER: [&str; 6] = ["id", "firm", "timestamp", "nodes", "sentiment", "matched_terms"];

pub fn write_classified(rows: &[ClassifiedRow], path: &Path) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(f));
    w.write_record(CLASSIFIED_HEADER).map_err(|e| Error::csv(path, e))?;
    for r in rows {
        let nodes: Vec<&str> = r.nodes.iter().map(|n| n.ident()).collect();
        w.write_record([
            r.id.as_str(),
            r.firm.as_str(),
            &r.timestamp.to_rfc3339_opts(SecondsFormat::AutoSi, true),
            &nodes.join(";"),
            &r.sentiment.to_string(),
            &r.matched_terms.join(";"),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_classified(path: &Path) -> Result<Vec<ClassifiedRow>> {
    parse_classified(Table::open(path)?)
}

pub fn read_classified_from<R: Read>(reader: R, source: &str) -> Result<Vec<ClassifiedRow>> {
    parse_classified(Table::from_reader(reader, source)?)
}

fn parse_classified<R: Read>(mut table: Table<R>) -> Result<Vec<ClassifiedRow>> {
    if table.is_empty_file() {
        return Ok(Vec::new());
    }
    let cols: Vec<usize> = CLASSIFIED_HEADER.iter().map(|c| table.column(c)).collect::<Result<_>>()?;
    let source = table.source().to_string();
    let mut out = Vec::new();
    for item in table.records() {
        let (line, rec) = item?;
        let bad = |m: String| Error::Data(format!("{source}:{line}: {m}"));
        let f = |i: usize| rec.get(cols[i]).unwrap_or("");
        let mut nodes = NodeSet::default();
        for tok in f(3).split(';').filter(|s| !s.is_empty()) {
            nodes.insert(tok.parse().map_err(|e: crate::lexicon::UnknownNode| bad(e.to_string()))?);
        }
        out.push(ClassifiedRow {
            id: f(0).to_string(),
            firm: f(1).to_string(),
            timestamp: parse_timestamp(f(2), chrono_tz::UTC).map_err(bad)?,
            nodes,
            sentiment: f(4).parse().map_err(|_| bad(format!("bad sentiment {:?}", f(4))))?,
            matched_terms: f(5).split(';').filter(|s| !s.is_empty()).map(str::to_string).collect(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifySummary {
    pub ingest: IngestReport,
    pub messages: usize,
    /// Messages per node, ancestor closure included.
    pub per_node: Vec<(TaxonomyNode, usize)>,
}

impl ClassifySummary {
    fn new(ingest: IngestReport, rows: &[ClassifiedRow]) -> Self {
        let mut counts = [0usize; TaxonomyNode::COUNT];
        for r in rows {
            for n in r.nodes.with_ancestors().iter() {
                counts[n.index()] += 1;
            }
        }
        ClassifySummary {
            ingest,
            messages: rows.len(),
            per_node: crate::report::report_order().into_iter().map(|n| (n, counts[n.index()])).collect(),
        }
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("node,messages\n");
        for (n, c) in &self.per_node {
            let _ = writeln!(out, "{},{c}", n.ident());
        }
        out
    }
}

fn ingest_report_csv(reports: &[&IngestReport]) -> String {
    let mut out = String::from("source,line,reason\n");
    for r in reports {
        for s in &r.skipped {
            let reason = s.reason.replace('"', "'");
            let _ = writeln!(out, "{},{},\"{reason}\"", r.source, s.line);
        }
    }
    out
}

pub fn cmd_classify(cfg: &RunConfig) -> Result<ClassifySummary> {
    cfg.validate()?;
    let messages_path = cfg.require(&cfg.messages, "messages")?;
    let lexicon = Lexicon::load(cfg.require(&cfg.lexicon, "lexicon")?)?;
    let sentiment = SentimentLexicon::load(cfg.require(&cfg.sentiment_lexicon, "sentiment_lexicon")?)?;
    let source_tz = parse_tz(&cfg.source_tz)?;
    cfg.prepare_out()?;
    with_pool(cfg.threads, || {
        let (messages, report) = read_messages(messages_path, source_tz)?;
        let rows = classify_all(&messages, &lexicon, &sentiment);
        write_classified(&rows, &cfg.classified_path())?;
        write_text(&cfg.out("ingest_report.csv"), &ingest_report_csv(&[&report]))?;
        let summary = ClassifySummary::new(report, &rows);
        write_text(&cfg.out("classify_summary.csv"), &summary.csv())?;
        Ok(summary)
    })
}

// ---------------------------------------------------------------------------
// detect

/// Assign classified rows to trading days; rows outside the calendar are
/// dropped and counted.
pub fn to_day_messages(rows: &[ClassifiedRow], calendar: &TradingCalendar, tz: Tz) -> (Vec<DayMessage>, usize) {
    let assigned: Vec<Option<DayMessage>> = rows
        .par_iter()
        .map(|r| {
            assign_trading_day(r.timestamp, calendar, tz).map(|day| DayMessage {
                firm: r.firm.clone(),
                day,
                nodes: r.nodes,
                sentiment: r.sentiment,
            })
        })
        .collect();
    let dropped = assigned.iter().filter(|a| a.is_none()).count();
    (assigned.into_iter().flatten().collect(), dropped)
}

/// Series construction and event detection over classified rows.
pub fn detect_rows(
    rows: &[ClassifiedRow],
    calendar: &TradingCalendar,
    confounds: &[CalendarEventRow],
    cfg: &RunConfig,
) -> Result<(SeriesSet, DetectionOutcome, usize)> {
    let (day_msgs, dropped) = to_day_messages(rows, calendar, cfg.exchange()?);
    if dropped > 0 {
        log::warn!("{dropped} messages fall outside the trading calendar and were dropped");
    }
    let series = build_series(&day_msgs, calendar.len());
    let index = ConfoundIndex::new(confounds, calendar);
    let outcome = detect_all(&series, calendar, &index, &cfg.detection, cfg.sentiment_threshold)?;
    Ok((series, outcome, dropped))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectSummary {
    pub kept: usize,
    pub positive: usize,
    pub removed: usize,
    pub dropped_messages: usize,
    pub summary: EventSummary,
}

fn load_confounds(cfg: &RunConfig) -> Result<(Vec<CalendarEventRow>, Vec<IngestReport>)> {
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for (p, kind, name) in [
        (&cfg.earnings, CalendarEventKind::EarningsRelease, "earnings"),
        (&cfg.controversies, CalendarEventKind::ControversyNews, "controversies"),
    ] {
        if p.is_some() {
            let (r, rep) = read_calendar_events(cfg.require(p, name)?, kind)?;
            rows.extend(r);
            reports.push(rep);
        }
    }
    Ok((rows, reports))
}

pub fn cmd_detect(cfg: &RunConfig) -> Result<DetectSummary> {
    cfg.validate()?;
    let market_path = cfg.require(&cfg.market, "market")?;
    let classified_path = cfg.classified_path();
    if !classified_path.is_file() {
        return Err(Error::Usage(format!(
            "classified messages {} not found; run `classify` first",
            classified_path.display()
        )));
    }
    cfg.prepare_out()?;
    with_pool(cfg.threads, || {
        let calendar = TradingCalendar::from_market_index(&read_market_index(market_path)?)?;
        let (confounds, reports) = load_confounds(cfg)?;
        let rows = read_classified(&classified_path)?;
        let (series, outcome, dropped) = detect_rows(&rows, &calendar, &confounds, cfg)?;

        let events_path = cfg.events_path();
        let f = fs::File::create(&events_path).map_err(|e| Error::io(&events_path, e))?;
        write_events(&outcome.records(), BufWriter::new(f))?;
        let summary = render_event_summary(&outcome.risk_events, &outcome.removed, cfg.detection.exclusion_halfwidth);
        write_text(&cfg.out("histogram.csv"), &summary.histogram_csv())?;
        write_text(&cfg.out("event_counts.csv"), &summary.counts_csv())?;
        if !reports.is_empty() {
            write_text(&cfg.out("calendar_report.csv"), &ingest_report_csv(&reports.iter().collect::<Vec<_>>()))?;
        }
        if cfg.dump_series {
            let p = cfg.out("series.csv");
            let f = fs::File::create(&p).map_err(|e| Error::io(&p, e))?;
            series.write_dump(&calendar, BufWriter::new(f))?;
        }
        Ok(DetectSummary {
            kept: outcome.risk_events.len(),
            positive: outcome.positive_events.len(),
            removed: outcome.removed.len(),
            dropped_messages: dropped,
            summary,
        })
    })
}

// ---------------------------------------------------------------------------
// study

/// Study inputs from the kept rows of an events file.
pub fn kept_study_events(records: &[EventRecord]) -> Vec<StudyEvent> {
    records
        .iter()
        .filter(|r| r.kept)
        .map(|r| StudyEvent { firm: r.firm.clone(), node: r.node, date: r.date })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudySummary {
    pub main: StudyOutcome,
    pub robustness: Option<StudyOutcome>,
}

fn write_study_outputs(cfg: &RunConfig, outcome: &StudyOutcome, suffix: &str) -> Result<()> {
    let (csv, text) = render_results(&outcome.results);
    write_text(&cfg.out(&format!("results{suffix}.csv")), &csv)?;
    write_text(&cfg.out(&format!("results{suffix}.txt")), &text)?;

    let mut curve = String::from("node,offset,scaar\n");
    for (node, points) in &outcome.curves {
        for p in points {
            let _ = writeln!(curve, "{},{},{}", node.ident(), p.offset, p.scaar);
        }
    }
    write_text(&cfg.out(&format!("scaar_curve{suffix}.csv")), &curve)?;

    let mut drops = String::from("firm,node,date,reason\n");
    for d in &outcome.dropped {
        let _ = writeln!(drops, "{},{},{},\"{}\"", d.event.firm, d.event.node.ident(), d.event.date, d.reason);
    }
    write_text(&cfg.out(&format!("drops{suffix}.csv")), &drops)
}

/// Main study plus the optional robustness run, in memory.
pub fn study_panel(panel: &ReturnPanel, events: &[StudyEvent], cfg: &RunConfig) -> Result<StudySummary> {
    let main = run_study(panel, events, &cfg.estimation)?;
    let robustness = cfg
        .robustness_est_len
        .map(|n| run_study(panel, events, &cfg.estimation.with_est_len(n)))
        .transpose()?;
    Ok(StudySummary { main, robustness })
}

pub fn cmd_study(cfg: &RunConfig) -> Result<StudySummary> {
    cfg.validate()?;
    let prices_path = cfg.require(&cfg.prices, "prices")?;
    let market_path = cfg.require(&cfg.market, "market")?;
    let events_path = cfg.events_path();
    if !events_path.is_file() {
        return Err(Error::Usage(format!("events file {} not found; run `detect` first", events_path.display())));
    }
    cfg.prepare_out()?;
    with_pool(cfg.threads, || {
        let panel = ReturnPanel::new(&read_market_index(market_path)?, &read_prices(prices_path)?)?;
        let events = kept_study_events(&read_events(&events_path)?);
        let summary = study_panel(&panel, &events, cfg)?;
        write_study_outputs(cfg, &summary.main, "")?;
        if let (Some(r), Some(n)) = (&summary.robustness, cfg.robustness_est_len) {
            write_study_outputs(cfg, r, &format!("_est{n}"))?;
        }
        Ok(summary)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSummary {
    pub classify: ClassifySummary,
    pub detect: DetectSummary,
    pub study: StudySummary,
}

pub fn cmd_pipeline(cfg: &RunConfig) -> Result<PipelineSummary> {
    Ok(PipelineSummary {
        classify: cmd_classify(cfg)?,
        detect: cmd_detect(cfg)?,
        study: cmd_study(cfg)?,
    })
}

// ---------------------------------------------------------------------------
// synth and eval

/// A synthetic scenario: the generator config plus an optional planting
/// schedule appended to its explicit planted events.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub synth: SynthConfig,
    pub schedule: Option<PlantSchedule>,
}

impl SynthSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))
    }

    /// Generator config with the schedule applied.
    pub fn resolve(&self) -> Result<SynthConfig> {
        let mut cfg = self.synth.clone();
        if let Some(s) = &self.schedule {
            cfg.plant_schedule(s)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Run config for a dataset written by [`cmd_synth`], relative to its directory.
pub fn synth_run_config(cfg: &SynthConfig) -> RunConfig {
    RunConfig {
        messages: Some("messages.csv".into()),
        prices: Some("prices.csv".into()),
        market: Some("market.csv".into()),
        lexicon: Some("lexicon.csv".into()),
        sentiment_lexicon: Some("sentiment_lexicon.csv".into()),
        earnings: Some("earnings.csv".into()),
        controversies: Some("controversies.csv".into()),
        out_dir: "out".into(),
        exchange_tz: cfg.exchange_tz.clone(),
        robustness_est_len: Some(90),
        ..RunConfig::default()
    }
}

/// Generate a dataset into `dir` along with `config.toml` (a run config
/// pointing at the files) and `synth.toml` (the resolved generator config).
pub fn cmd_synth(spec: &SynthSpec, dir: &Path) -> Result<SynthDataset> {
    let cfg = spec.resolve()?;
    let ds = generate(&cfg)?;
    ds.write_to(dir)?;
    write_text(&dir.join("config.toml"), &synth_run_config(&cfg).to_toml())?;
    let resolved = SynthSpec { synth: cfg, schedule: None };
    write_text(
        &dir.join("synth.toml"),
        &toml::to_string(&resolved).map_err(|e| Error::Usage(e.to_string()))?,
    )?;
    Ok(ds)
}

/// Keys of kept (negative) events at the levels present in the truth set.
pub fn detected_keys(events: &[EventRecord], truth_nodes: &BTreeSet<crate::lexicon::Level>, calendar: &TradingCalendar) -> Vec<DetectedKey> {
    events
        .iter()
        .filter(|e| e.kept && truth_nodes.contains(&e.node.level()))
        .filter_map(|e| {
            calendar.index_of(e.date).map(|day| DetectedKey { firm: e.firm.clone(), node: e.node, day })
        })
        .collect()
}

/// Precision and recall of the events file against a ground-truth file,
/// matching within `tolerance` trading days.
pub fn cmd_eval(cfg: &RunConfig, truth_path: &Path, tolerance: usize) -> Result<DetectionScore> {
    let market_path = cfg.require(&cfg.market, "market")?;
    let events_path = cfg.events_path();
    if !events_path.is_file() {
        return Err(Error::Usage(format!("events file {} not found", events_path.display())));
    }
    if !truth_path.is_file() {
        return Err(Error::Usage(format!("ground truth {} not found", truth_path.display())));
    }
    let calendar = TradingCalendar::from_market_index(&read_market_index(market_path)?)?;
    let truth = read_ground_truth(truth_path, &calendar)?;
    let levels = truth.planted.iter().map(|t| t.node.level()).collect();
    let negatives: Vec<_> = truth
        .planted
        .iter()
        .filter(|t| t.sign == crate::sentiment::Sign::Negative)
        .cloned()
        .collect();
    let detected = detected_keys(&read_events(&events_path)?, &levels, &calendar);
    let score = evaluate_detection(&detected, &negatives, tolerance);
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let na = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    write_text(
        &cfg.out("eval.csv"),
        &format!(
            "metric,value\ndetected,{}\nplanted,{}\nmatched_detected,{}\nmatched_planted,{}\nprecision,{}\nrecall,{}\n",
            score.n_detected,
            score.n_truth,
            score.matched_detected,
            score.matched_truth,
            na(score.precision),
            na(score.recall)
        ),
    )?;
    Ok(score)
}

/// In-memory end-to-end run over a synthetic dataset (no files).
pub fn run_dataset(ds: &SynthDataset, cfg: &RunConfig, lexicon: &Lexicon, sentiment: &SentimentLexicon) -> Result<(DetectionOutcome, StudySummary)> {
    cfg.validate()?;
    let rows = classify_all(&ds.messages, lexicon, sentiment);
    let mut confounds = ds.earnings.clone();
    confounds.extend(ds.controversies.iter().cloned());
    let (_, outcome, _) = detect_rows(&rows, &ds.returns.calendar, &confounds, cfg)?;
    let events = kept_study_events(&outcome.records());
    let study = study_panel(&ds.returns.panel(), &events, cfg)?;
    Ok((outcome, study))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sentiment::Sign;
    use crate::synth::{demo_lexicon, demo_sentiment_lexicon, PlantedEvent};

    #[test]
    fn toml_round_trip_and_rebase() {
        let cfg = RunConfig::from_toml(
            "messages = \"m.csv\"\nout_dir = \"/tmp/x\"\nrobustness_est_len = 90\n[detection]\nz = 3.0\n[estimation]\nest_len = 100\nmin_obs = 80\n",
            Path::new("/data"),
        )
        .unwrap();
        assert_eq!(cfg.messages, Some(PathBuf::from("/data/m.csv")));
        assert_eq!(cfg.out_dir, PathBuf::from("/tmp/x"));
        assert_eq!(cfg.detection.z, 3.0);
        assert_eq!(cfg.detection.min_tweets, 10);
        assert_eq!(cfg.estimation.est_len, 100);
        let again = RunConfig::from_toml(&cfg.to_toml(), Path::new("/elsewhere")).unwrap();
        assert_eq!(again, cfg);
        assert!(RunConfig::from_toml("bogus = 1\n", Path::new("")).is_err());
    }

    #[test]
    fn missing_lexicon_is_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let msgs = dir.path().join("m.csv");
        fs::write(&msgs, "id,firm,timestamp,text\n").unwrap();
        let cfg = RunConfig {
            messages: Some(msgs),
            lexicon: Some(dir.path().join("nope.csv")),
            out_dir: dir.path().join("out"),
            ..Default::default()
        };
        let err = cmd_classify(&cfg).unwrap_err();
        assert_eq!(err.class(), crate::error::ErrorClass::Usage);
    }

    #[test]
    fn empty_corpus_gives_empty_artifact() {
        let dir = tempfile::tempdir().unwrap();
        let p = |n: &str| dir.path().join(n);
        fs::write(p("m.csv"), "id,firm,timestamp,text\n").unwrap();
        fs::write(p("lex.csv"), crate::synth::DEMO_LEXICON).unwrap();
        fs::write(p("sent.csv"), crate::synth::DEMO_SENTIMENT).unwrap();
        let cfg = RunConfig {
            messages: Some(p("m.csv")),
            lexicon: Some(p("lex.csv")),
            sentiment_lexicon: Some(p("sent.csv")),
            out_dir: p("out"),
            ..Default::default()
        };
        let s = cmd_classify(&cfg).unwrap();
        assert_eq!(s.messages, 0);
        assert!(s.per_node.iter().all(|(_, c)| *c == 0));
        assert_eq!(read_classified(&cfg.classified_path()).unwrap(), vec![]);
        assert!(p("out/resolved_config.toml").is_file());
    }

    #[test]
    fn classified_round_trip() {
        let lex = demo_lexicon();
        let senti = demo_sentiment_lexicon();
        let msgs = vec![
            Message {
                id: "1".into(),
                firm: "A".into(),
                timestamp: "2020-01-02T15:00:00.25Z".parse().unwrap(),
                text: "Oil spill, shame; also bribery".into(),
            },
            Message { id: "2".into(), firm: "A".into(), timestamp: "2020-01-02T15:00:00Z".parse().unwrap(), text: "hello".into() },
        ];
        let rows = classify_all(&msgs, &lex, &senti);
        assert_eq!(rows[0].nodes.len(), 2);
        assert_eq!(rows[0].sentiment, -0.7);
        assert_eq!(rows[0].matched_terms, vec!["oil spill".to_string(), "bribery".to_string()]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        write_classified(&rows, &p).unwrap();
        assert_eq!(read_classified(&p).unwrap(), rows);
    }

    fn one_spike(earnings_near: bool) -> SynthDataset {
        let mut cfg = SynthConfig {
            n_firms: 1,
            n_days: 300,
            noise_rate: 350.0,
            earnings_interval: 0,
            planted: vec![PlantedEvent { firm: 0, node: TaxonomyNode::CorporateBehavior, day: 280, spike_size: 10.0, sign: Sign::Negative }],
            ..Default::default()
        };
        if earnings_near {
            cfg.controversies.push((0, 278));
        }
        generate(&cfg).unwrap()
    }

    #[test]
    fn one_planted_spike_one_kept_event() {
        let ds = one_spike(false);
        let cfg = RunConfig::default();
        let (outcome, _) = run_dataset(&ds, &cfg, &demo_lexicon(), &demo_sentiment_lexicon()).unwrap();
        let sub: Vec<_> = outcome.risk_events.iter().filter(|e| e.node.is_subcategory()).collect();
        assert_eq!(sub.len(), 1, "{:?}", outcome.risk_events);
        assert_eq!((sub[0].node, sub[0].day), (TaxonomyNode::CorporateBehavior, 280));
        assert!(outcome.removed.is_empty());
    }

    #[test]
    fn spike_near_confound_is_removed() {
        let ds = one_spike(true);
        let (outcome, _) = run_dataset(&ds, &RunConfig::default(), &demo_lexicon(), &demo_sentiment_lexicon()).unwrap();
        assert!(outcome.risk_events.iter().all(|e| e.day != 280));
        let sub: Vec<_> = outcome.removed.iter().filter(|r| r.event.node == TaxonomyNode::CorporateBehavior).collect();
        assert_eq!(sub.len(), 1);
        assert_eq!(sub[0].distance, -2);
    }
}
