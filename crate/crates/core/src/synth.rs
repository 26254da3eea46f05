//! Synthetic ground-truth generator.
//!
//! Produces a trading calendar, market and firm returns from a one-factor
//! market model, a message stream with Poisson background traffic per
//! (firm, subcategory) and planted spikes, earnings dates, and the planted
//! ground truth. Every random draw comes from ChaCha8 streams seeded by
//! `SynthConfig::seed`, so a config always produces the same bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Datelike, Duration, NaiveDate, TimeZone, Utc, Weekday};
use chrono_tz::Tz;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::aggregate::{TradingCalendar, MARKET_CLOSE};
use crate::error::{Error, Result};
use crate::ingest::{
    parse_tz, CalendarEventKind, CalendarEventRow, MarketIndexRow, Message, PriceRow, PriceTable,
};
use crate::lexicon::{Lexicon, TaxonomyNode};
use crate::sentiment::{Sign, SentimentLexicon};
use crate::study::{ReturnPanel, StudyEvent};

/// Demonstration keyword lexicon shipped with the crate. Not authoritative.
pub const DEMO_LEXICON: &str = include_str!("../data/demo_lexicon.csv");
/// Demonstration sentiment lexicon shipped with the crate. Not authoritative.
pub const DEMO_SENTIMENT: &str = include_str!("../data/demo_sentiment.csv");

pub fn demo_lexicon() -> Lexicon {
    Lexicon::load_from(DEMO_LEXICON.as_bytes(), "demo_lexicon.csv").expect("bundled lexicon parses")
}

pub fn demo_sentiment_lexicon() -> SentimentLexicon {
    SentimentLexicon::load_from(DEMO_SENTIMENT.as_bytes(), "demo_sentiment.csv")
        .expect("bundled sentiment lexicon parses")
}

const FILLER: &[&str] = &[
    "the", "company", "today", "shares", "market", "news", "update", "thread", "people",
    "talking", "about", "again", "just", "read", "this", "report", "quarter", "morning",
    "looks", "like", "watching", "numbers", "chart", "volume",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedEvent {
    pub firm: usize,
    pub node: TaxonomyNode,
    pub day: usize,
    pub spike_size: f64,
    pub sign: Sign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_firms: usize,
    pub n_days: usize,
    pub start_date: NaiveDate,
    pub exchange_tz: String,
    /// Mean ESG messages per (firm, subcategory, trading day).
    pub base_rate: f64,
    /// Mean non-ESG messages per (firm, trading day).
    pub noise_rate: f64,
    /// Probability that a background ESG message carries a positive term.
    pub background_positive_prob: f64,
    pub market_drift: f64,
    pub market_vol: f64,
    pub idio_vol: f64,
    pub alpha_range: [f64; 2],
    pub beta_range: [f64; 2],
    /// Abnormal return added to the firm's return on each planted day.
    pub injected_ar: f64,
    /// Trading days between earnings releases; 0 disables them.
    pub earnings_interval: usize,
    /// Extra controversy dates as (firm, day).
    pub controversies: Vec<(usize, usize)>,
    pub planted: Vec<PlantedEvent>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 42,
            n_firms: 5,
            n_days: 500,
            start_date: NaiveDate::from_ymd_opt(2017, 1, 2).unwrap(),
            exchange_tz: "America/New_York".into(),
            base_rate: 5.0,
            noise_rate: 350.0,
            background_positive_prob: 0.9,
            market_drift: 0.0003,
            market_vol: 0.01,
            idio_vol: 0.02,
            alpha_range: [-0.0002, 0.0002],
            beta_range: [0.6, 1.4],
            injected_ar: 0.0,
            earnings_interval: 63,
            controversies: Vec::new(),
            planted: Vec::new(),
        }
    }
}

/// Layout for [`SynthConfig::plant_schedule`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantSchedule {
    pub per_firm: usize,
    pub first_day: usize,
    pub min_spacing: usize,
    pub spike_size: f64,
    pub sign: Sign,
    pub nodes: Vec<TaxonomyNode>,
    /// Keep planted days more than this many trading days from confounds.
    pub confound_clearance: usize,
}

impl Default for PlantSchedule {
    fn default() -> Self {
        PlantSchedule {
            per_firm: 3,
            first_day: 260,
            min_spacing: 20,
            spike_size: 10.0,
            sign: Sign::Negative,
            nodes: TaxonomyNode::SUBCATEGORIES.to_vec(),
            confound_clearance: 6,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Usage(m));
        if self.n_firms == 0 || self.n_days < 2 {
            return bad("synth needs at least one firm and two days".into());
        }
        for (name, v) in [
            ("base_rate", self.base_rate),
            ("noise_rate", self.noise_rate),
            ("market_vol", self.market_vol),
            ("idio_vol", self.idio_vol),
        ] {
            if !v.is_finite() || v < 0.0 {
                return bad(format!("{name} must be a finite non-negative number"));
            }
        }
        if !(0.0..=1.0).contains(&self.background_positive_prob) {
            return bad("background_positive_prob must lie in [0, 1]".into());
        }
        if self.alpha_range[0] > self.alpha_range[1] || self.beta_range[0] > self.beta_range[1] {
            return bad("alpha_range and beta_range must be [low, high]".into());
        }
        parse_tz(&self.exchange_tz)?;
        for p in &self.planted {
            if p.firm >= self.n_firms || p.day >= self.n_days {
                return bad(format!("planted event {p:?} outside {} firms x {} days", self.n_firms, self.n_days));
            }
            if !p.spike_size.is_finite() || p.spike_size < 0.0 {
                return bad(format!("planted spike size {} must be non-negative", p.spike_size));
            }
            if p.node == TaxonomyNode::EsgAll {
                return bad("planted events target a pillar or subcategory".into());
            }
        }
        for &(f, d) in &self.controversies {
            if f >= self.n_firms || d >= self.n_days {
                return bad(format!("controversy ({f}, {d}) outside the panel"));
            }
        }
        Ok(())
    }

    pub fn firm_name(i: usize) -> String {
        format!("F{:03}", i + 1)
    }

    /// Earnings release days of firm `i`.
    pub fn earnings_days(&self, i: usize) -> Vec<usize> {
        if self.earnings_interval == 0 {
            return Vec::new();
        }
        let phase = (7 * i + 11) % self.earnings_interval;
        (phase..self.n_days).step_by(self.earnings_interval).collect()
    }

    fn confound_days(&self, i: usize) -> Vec<usize> {
        let mut days = self.earnings_days(i);
        days.extend(self.controversies.iter().filter(|c| c.0 == i).map(|c| c.1));
        days
    }

    /// Appends a spaced set of planted events per firm.
    ///
    /// Days are spread evenly over `[first_day, n_days - 2]` with a seeded
    /// jitter, pushed forward past confound windows, and kept at least
    /// `min_spacing` apart. Nodes cycle through `schedule.nodes`.
    pub fn plant_schedule(&mut self, schedule: &PlantSchedule) -> Result<()> {
        if schedule.nodes.is_empty() || schedule.per_firm == 0 {
            return Ok(());
        }
        let last = self.n_days.saturating_sub(2);
        if schedule.first_day > last {
            return Err(Error::Usage("plant schedule starts after the last usable day".into()));
        }
        let mut rng = stream(self.seed, 3);
        let span = last - schedule.first_day + 1;
        let step = (span / schedule.per_firm).max(1);
        for firm in 0..self.n_firms {
            let confounds = self.confound_days(firm);
            let clear = |d: usize| confounds.iter().all(|&c| c.abs_diff(d) > schedule.confound_clearance);
            let mut prev: Option<usize> = None;
            for k in 0..schedule.per_firm {
                let jitter = rng.random_range(0..step.div_ceil(3).max(1));
                let mut day = schedule.first_day + k * step + jitter;
                if let Some(p) = prev {
                    day = day.max(p + schedule.min_spacing);
                }
                while day <= last && !clear(day) {
                    day += 1;
                }
                if day > last {
                    return Err(Error::Usage(format!(
                        "cannot fit {} planted events for firm {firm} in {} days",
                        schedule.per_firm, self.n_days
                    )));
                }
                prev = Some(day);
                self.planted.push(PlantedEvent {
                    firm,
                    node: schedule.nodes[(firm + k) % schedule.nodes.len()],
                    day,
                    spike_size: schedule.spike_size,
                    sign: schedule.sign,
                });
            }
        }
        Ok(())
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn is_holiday(d: NaiveDate) -> bool {
    matches!((d.month(), d.day()), (1, 1) | (7, 4) | (12, 25))
}

/// Weekdays from `start`, skipping Jan 1, Jul 4 and Dec 25.
pub fn synthetic_calendar(start: NaiveDate, n_days: usize) -> TradingCalendar {
    let mut days = Vec::with_capacity(n_days);
    let mut d = start;
    while days.len() < n_days {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) && !is_holiday(d) {
            days.push(d);
        }
        d = d.succ_opt().expect("date in range");
    }
    TradingCalendar::new(days).expect("strictly increasing")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthEvent {
    pub firm: String,
    pub node: TaxonomyNode,
    pub day: usize,
    pub date: NaiveDate,
    pub spike_size: f64,
    pub sign: Sign,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub planted: Vec<TruthEvent>,
    pub injected_ar: f64,
}

impl GroundTruth {
    pub fn study_events(&self) -> Vec<StudyEvent> {
        self.planted
            .iter()
            .map(|t| StudyEvent { firm: t.firm.clone(), node: t.node, date: t.date })
            .collect()
    }
}

/// Market and firm returns only; the fast path for return-level studies.
#[derive(Debug, Clone)]
pub struct SynthReturns {
    pub calendar: TradingCalendar,
    pub firms: Vec<String>,
    pub market: Vec<f64>,
    pub firm_returns: Vec<Vec<f64>>,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
}

impl SynthReturns {
    pub fn panel(&self) -> ReturnPanel {
        let firms = self
            .firms
            .iter()
            .zip(&self.firm_returns)
            .map(|(f, r)| (f.clone(), r.iter().map(|&x| Some(x)).collect()))
            .collect();
        ReturnPanel::from_parts(self.calendar.clone(), self.market.clone(), firms)
            .expect("lengths agree")
    }

    pub fn market_rows(&self) -> Vec<MarketIndexRow> {
        self.calendar
            .days()
            .iter()
            .zip(&self.market)
            .map(|(&date, &ret)| MarketIndexRow { date, ret })
            .collect()
    }

    /// Closes start at 100 and compound the returns.
    pub fn price_table(&self) -> PriceTable {
        let mut series = BTreeMap::new();
        for (firm, rets) in self.firms.iter().zip(&self.firm_returns) {
            let mut close = 100.0;
            let rows = self
                .calendar
                .days()
                .iter()
                .zip(rets)
                .map(|(&date, &r)| {
                    close *= 1.0 + r;
                    PriceRow { firm: firm.clone(), date, close, ret: Some(r) }
                })
                .collect();
            series.insert(firm.clone(), rows);
        }
        PriceTable { series }
    }
}

pub fn generate_returns(cfg: &SynthConfig) -> Result<SynthReturns> {
    cfg.validate()?;
    let calendar = synthetic_calendar(cfg.start_date, cfg.n_days);
    let mut rng = stream(cfg.seed, 1);
    let market_dist = Normal::new(cfg.market_drift, cfg.market_vol).map_err(|e| Error::Usage(e.to_string()))?;
    let idio = Normal::new(0.0, cfg.idio_vol).map_err(|e| Error::Usage(e.to_string()))?;
    let market: Vec<f64> = (0..cfg.n_days).map(|_| market_dist.sample(&mut rng)).collect();

    let mut shocked: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); cfg.n_firms];
    for p in &cfg.planted {
        shocked[p.firm].insert(p.day);
    }
    let mut alphas = Vec::with_capacity(cfg.n_firms);
    let mut betas = Vec::with_capacity(cfg.n_firms);
    let mut firm_returns = Vec::with_capacity(cfg.n_firms);
    for days in &shocked {
        let a = uniform(&mut rng, cfg.alpha_range);
        let b = uniform(&mut rng, cfg.beta_range);
        let rets = market
            .iter()
            .enumerate()
            .map(|(t, &m)| {
                let ar = if days.contains(&t) { cfg.injected_ar } else { 0.0 };
                a + b * m + idio.sample(&mut rng) + ar
            })
            .collect();
        alphas.push(a);
        betas.push(b);
        firm_returns.push(rets);
    }
    Ok(SynthReturns {
        calendar,
        firms: (0..cfg.n_firms).map(SynthConfig::firm_name).collect(),
        market,
        firm_returns,
        alphas,
        betas,
    })
}

fn uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub config: SynthConfig,
    pub returns: SynthReturns,
    pub messages: Vec<Message>,
    pub earnings: Vec<CalendarEventRow>,
    pub controversies: Vec<CalendarEventRow>,
    pub truth: GroundTruth,
}

struct Vocab {
    terms: Vec<Vec<String>>,
    positive: Vec<String>,
    negative: Vec<String>,
}

impl Vocab {
    fn demo() -> Self {
        let mut terms = vec![Vec::new(); TaxonomyNode::COUNT];
        for e in demo_lexicon().entries() {
            terms[e.node.index()].push(e.term.join(" "));
        }
        let mut positive = Vec::new();
        let mut negative = Vec::new();
        for e in demo_sentiment_lexicon().entries() {
            let t = e.term.join(" ");
            if e.weight > 0.0 {
                positive.push(t);
            } else if e.weight < 0.0 {
                negative.push(t);
            }
        }
        Vocab { terms, positive, negative }
    }
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, xs: &'a [T]) -> &'a T {
    &xs[rng.random_range(0..xs.len())]
}

fn esg_text(rng: &mut ChaCha8Rng, vocab: &Vocab, node: TaxonomyNode, sign: Sign, ticker: &str) -> String {
    let term = pick(rng, &vocab.terms[node.index()]);
    let senti = match sign {
        Sign::Positive => pick(rng, &vocab.positive),
        Sign::Negative => pick(rng, &vocab.negative),
    };
    let (a, b) = (pick(rng, FILLER), pick(rng, FILLER));
    match rng.random_range(0..4u8) {
        0 => format!("${ticker} {a} {term} {b} {senti}"),
        1 => format!("@desk_{} {senti} {a} {term} ${ticker}", rng.random_range(0..100u8)),
        2 => format!("{senti}: {term} {a} {b} https://t.co/{}", rng.random_range(0..100_000u32)),
        _ => format!("{a} {b} #{term} {senti} ${ticker}"),
    }
}

fn noise_text(rng: &mut ChaCha8Rng, ticker: &str) -> String {
    let (a, b, c) = (pick(rng, FILLER), pick(rng, FILLER), pick(rng, FILLER));
    format!("${ticker} {a} {b} {c}")
}

fn close_instant(date: NaiveDate, tz: Tz) -> DateTime<Utc> {
    tz.from_local_datetime(&date.and_time(MARKET_CLOSE))
        .earliest()
        .expect("16:00 exists on every date")
        .with_timezone(&Utc)
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthDataset> {
    let returns = generate_returns(cfg)?;
    let tz = parse_tz(&cfg.exchange_tz)?;
    let cal = &returns.calendar;
    let vocab = Vocab::demo();

    let mut planted_at: BTreeMap<(usize, usize), Vec<&PlantedEvent>> = BTreeMap::new();
    for p in &cfg.planted {
        planted_at.entry((p.firm, p.day)).or_default().push(p);
    }

    let mut rng = stream(cfg.seed, 2);
    let noise = poisson(cfg.noise_rate)?;
    let background = poisson(cfg.base_rate)?;
    let mut messages = Vec::new();
    let mut next_id = 0u64;
    let mut prev_close = close_instant(cal.first(), tz) - Duration::hours(16);
    for day in 0..cal.len() {
        let close = close_instant(cal.date(day), tz);
        let span = (close - prev_close).num_seconds().max(1);
        for firm in 0..cfg.n_firms {
            let ticker = SynthConfig::firm_name(firm);
            let mut texts: Vec<String> = Vec::new();
            let planted = planted_at.get(&(firm, day));
            let suppressed = |sub: TaxonomyNode| {
                planted.is_some_and(|ps| ps.iter().any(|p| sub == p.node || sub.parent() == Some(p.node)))
            };
            for sub in TaxonomyNode::SUBCATEGORIES {
                if suppressed(sub) {
                    continue;
                }
                for _ in 0..draw(&background, &mut rng) {
                    let sign = if rng.random_bool(cfg.background_positive_prob) {
                        Sign::Positive
                    } else {
                        Sign::Negative
                    };
                    texts.push(esg_text(&mut rng, &vocab, sub, sign, &ticker));
                }
            }
            for p in planted.into_iter().flatten() {
                let dist = poisson(cfg.base_rate * p.spike_size)?;
                let subs = if p.node.is_subcategory() { vec![p.node] } else { p.node.subcategories() };
                for _ in 0..draw(&dist, &mut rng) {
                    let sub = *pick(&mut rng, &subs);
                    texts.push(esg_text(&mut rng, &vocab, sub, p.sign, &ticker));
                }
            }
            for _ in 0..draw(&noise, &mut rng) {
                texts.push(noise_text(&mut rng, &ticker));
            }
            for text in texts {
                let ts = close - Duration::seconds(rng.random_range(0..span));
                next_id += 1;
                messages.push(Message { id: format!("m{next_id}"), firm: ticker.clone(), timestamp: ts, text });
            }
        }
        prev_close = close;
    }

    let mut earnings = Vec::new();
    for firm in 0..cfg.n_firms {
        for d in cfg.earnings_days(firm) {
            earnings.push(CalendarEventRow {
                firm: SynthConfig::firm_name(firm),
                date: cal.date(d),
                kind: CalendarEventKind::EarningsRelease,
            });
        }
    }
    let controversies = cfg
        .controversies
        .iter()
        .map(|&(f, d)| CalendarEventRow {
            firm: SynthConfig::firm_name(f),
            date: cal.date(d),
            kind: CalendarEventKind::ControversyNews,
        })
        .collect();
    let truth = GroundTruth {
        planted: cfg
            .planted
            .iter()
            .map(|p| TruthEvent {
                firm: SynthConfig::firm_name(p.firm),
                node: p.node,
                day: p.day,
                date: cal.date(p.day),
                spike_size: p.spike_size,
                sign: p.sign,
            })
            .collect(),
        injected_ar: cfg.injected_ar,
    };
    Ok(SynthDataset { config: cfg.clone(), returns, messages, earnings, controversies, truth })
}

fn poisson(rate: f64) -> Result<Option<Poisson<f64>>> {
    if rate <= 0.0 {
        return Ok(None);
    }
    Poisson::new(rate).map(Some).map_err(|e| Error::Usage(format!("poisson rate {rate}: {e}")))
}

fn draw(dist: &Option<Poisson<f64>>, rng: &mut ChaCha8Rng) -> u64 {
    dist.as_ref().map_or(0, |d| d.sample(rng) as u64)
}

/// Paths written by [`SynthDataset::write_to`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthPaths {
    pub messages: PathBuf,
    pub prices: PathBuf,
    pub market: PathBuf,
    pub earnings: PathBuf,
    pub controversies: PathBuf,
    pub lexicon: PathBuf,
    pub sentiment_lexicon: PathBuf,
    pub ground_truth: PathBuf,
}

impl SynthPaths {
    pub fn in_dir(dir: &Path) -> Self {
        SynthPaths {
            messages: dir.join("messages.csv"),
            prices: dir.join("prices.csv"),
            market: dir.join("market.csv"),
            earnings: dir.join("earnings.csv"),
            controversies: dir.join("controversies.csv"),
            lexicon: dir.join("lexicon.csv"),
            sentiment_lexicon: dir.join("sentiment_lexicon.csv"),
            ground_truth: dir.join("ground_truth.csv"),
        }
    }
}

pub const GROUND_TRUTH_HEADER: &str = "firm,node,date,spike_size,sign,injected_ar";

impl SynthDataset {
    pub fn write_to(&self, dir: &Path) -> Result<SynthPaths> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let paths = SynthPaths::in_dir(dir);

        let mut w = csv_writer(&paths.messages)?;
        w.write_record(["id", "firm", "timestamp", "text"]).map_err(|e| Error::csv(&paths.messages, e))?;
        for m in &self.messages {
            let ts = m.timestamp.format("%Y-%m-%dT%H:%M:%SZ").to_string();
            w.write_record([m.id.as_str(), m.firm.as_str(), ts.as_str(), m.text.as_str()])
                .map_err(|e| Error::csv(&paths.messages, e))?;
        }
        w.flush().map_err(|e| Error::io(&paths.messages, e))?;

        let mut out = String::from("firm,date,close,return\n");
        for rows in self.returns.price_table().series.values() {
            for r in rows {
                out.push_str(&format!("{},{},{:.6},{}\n", r.firm, r.date, r.close, r.ret.unwrap_or(f64::NAN)));
            }
        }
        write_file(&paths.prices, &out)?;

        let mut out = String::from("date,return\n");
        for r in self.returns.market_rows() {
            out.push_str(&format!("{},{}\n", r.date, r.ret));
        }
        write_file(&paths.market, &out)?;

        for (path, rows) in [(&paths.earnings, &self.earnings), (&paths.controversies, &self.controversies)] {
            let mut out = String::from("firm,date\n");
            for r in rows {
                out.push_str(&format!("{},{}\n", r.firm, r.date));
            }
            write_file(path, &out)?;
        }
        write_file(&paths.lexicon, DEMO_LEXICON)?;
        write_file(&paths.sentiment_lexicon, DEMO_SENTIMENT)?;

        let mut out = format!("{GROUND_TRUTH_HEADER}\n");
        for t in &self.truth.planted {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                t.firm,
                t.node.ident(),
                t.date,
                t.spike_size,
                t.sign,
                self.truth.injected_ar
            ));
        }
        write_file(&paths.ground_truth, &out)?;
        Ok(paths)
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Reads a ground-truth file written by [`SynthDataset::write_to`].
pub fn read_ground_truth(path: &Path, calendar: &TradingCalendar) -> Result<GroundTruth> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut truth = GroundTruth::default();
    for (i, line) in text.lines().enumerate().skip(1) {
        let bad = |what: &str| Error::Data(format!("{}:{}: bad {what}", path.display(), i + 1));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad("row"));
        }
        let date = NaiveDate::parse_from_str(f[2], "%Y-%m-%d").map_err(|_| bad("date"))?;
        truth.planted.push(TruthEvent {
            firm: f[0].to_string(),
            node: f[1].parse().map_err(|_| bad("node"))?,
            day: calendar.index_of(date).ok_or_else(|| bad("date (not a trading day)"))?,
            date,
            spike_size: f[3].parse().map_err(|_| bad("spike_size"))?,
            sign: f[4].parse().map_err(|_| bad("sign"))?,
        });
        truth.injected_ar = f[5].parse().map_err(|_| bad("injected_ar"))?;
    }
    Ok(truth)
}

/// A detected event reduced to what matching needs.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct DetectedKey {
    pub firm: String,
    pub node: TaxonomyNode,
    pub day: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionScore {
    pub n_detected: usize,
    pub n_truth: usize,
    /// Detected events within tolerance of some planted event.
    pub matched_detected: usize,
    /// Planted events with some detected event within tolerance.
    pub matched_truth: usize,
    /// `None` when nothing was detected.
    pub precision: Option<f64>,
    /// `None` when nothing was planted.
    pub recall: Option<f64>,
}

/// Precision and recall of detected events against planted ones.
///
/// A pair matches when firm and node agree and the days differ by at most
/// `tolerance`. Matching is not one-to-one.
pub fn evaluate_detection(detected: &[DetectedKey], truth: &[TruthEvent], tolerance: usize) -> DetectionScore {
    let near = |d: &DetectedKey, t: &TruthEvent| d.firm == t.firm && d.node == t.node && d.day.abs_diff(t.day) <= tolerance;
    let matched_detected = detected.iter().filter(|d| truth.iter().any(|t| near(d, t))).count();
    let matched_truth = truth.iter().filter(|t| detected.iter().any(|d| near(d, t))).count();
    let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
    DetectionScore {
        n_detected: detected.len(),
        n_truth: truth.len(),
        matched_detected,
        matched_truth,
        precision: ratio(matched_detected, detected.len()),
        recall: ratio(matched_truth, truth.len()),
    }
}
