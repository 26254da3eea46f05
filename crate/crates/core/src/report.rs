//! Results tables and detection summaries.
//!
//! Standardized statistics (SAAR, SCAAR) are printed multiplied by 100;
//! raw AAR and CAAR are printed in percent. Both use three decimals.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::detect::{distance_histogram, RemovedEvent, RiskEvent};
use crate::lexicon::TaxonomyNode;
use crate::study::{offset_label, Statistic, StudyResult};

pub const RESULTS_HEADER: &str = "node,stat,window,value,tvalue,significance,n";

/// Table row order: the ESG root, then each pillar followed by its subcategories.
pub fn report_order() -> Vec<TaxonomyNode> {
    let mut v = vec![TaxonomyNode::EsgAll];
    for p in TaxonomyNode::PILLARS {
        v.push(p);
        v.extend(p.subcategories());
    }
    v
}

/// Two-sided normal p-value stars: *** p<0.01, ** p<0.05, * p<0.1.
pub fn stars(t: f64) -> &'static str {
    let p = 2.0 * (1.0 - Normal::standard().cdf(t.abs()));
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

fn fmt3(x: f64) -> String {
    // avoid "-0.000"
    let s = format!("{x:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub stat: &'static str,
    pub window: String,
    pub value: Option<f64>,
    pub t: Option<f64>,
}

impl Cell {
    fn new(stat: &'static str, window: String, s: &Statistic, scale: f64) -> Self {
        Cell {
            stat,
            window,
            value: s.value.map(|v| v * scale),
            t: s.t.ok(),
        }
    }

    pub fn header(&self) -> String {
        if self.window.starts_with('[') {
            format!("{}{}", self.stat, self.window)
        } else {
            format!("{}({})", self.stat, self.window)
        }
    }

    /// "-0.289***"; stars are omitted when t is undefined.
    pub fn value_text(&self) -> String {
        match self.value {
            None => "n/a".into(),
            Some(v) => format!("{}{}", fmt3(v), self.t.map_or("", stars)),
        }
    }

    pub fn t_text(&self) -> String {
        match self.t {
            None => "(n/a)".into(),
            Some(t) => format!("({})", fmt3(t)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultsRow {
    pub node: TaxonomyNode,
    pub n: usize,
    pub cells: Vec<Cell>,
}

/// Rows in report order, columns SCAAR windows then SAAR offsets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultsTable {
    pub title: String,
    pub rows: Vec<ResultsRow>,
}

impl ResultsTable {
    /// Standardized table: SCAAR and SAAR, values x 100.
    pub fn standardized(results: &[StudyResult]) -> Self {
        Self::build("Standardized abnormal returns (x 100)", results, |r| {
            r.scaar
                .iter()
                .map(|(w, s)| Cell::new("SCAAR", w.to_string(), s, 100.0))
                .chain(r.saar.iter().map(|(o, s)| Cell::new("SAAR", offset_label(*o), s, 100.0)))
                .collect()
        })
    }

    /// Raw table: CAAR and AAR in percent.
    pub fn raw(results: &[StudyResult]) -> Self {
        Self::build("Raw abnormal returns (percent)", results, |r| {
            r.caar
                .iter()
                .map(|(w, s)| Cell::new("CAAR", w.to_string(), s, 100.0))
                .chain(r.aar.iter().map(|(o, s)| Cell::new("AAR", offset_label(*o), s, 100.0)))
                .collect()
        })
    }

    fn build(title: &str, results: &[StudyResult], cells: impl Fn(&StudyResult) -> Vec<Cell>) -> Self {
        let by_node: BTreeMap<TaxonomyNode, &StudyResult> = results.iter().map(|r| (r.node, r)).collect();
        let rows = report_order()
            .into_iter()
            .filter_map(|node| by_node.get(&node))
            .map(|r| ResultsRow { node: r.node, n: r.n, cells: cells(r) })
            .collect();
        ResultsTable { title: title.into(), rows }
    }

    /// Body rows of the delimited results file (no header).
    pub fn delimited_rows(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            for c in &row.cells {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    row.node.ident(),
                    c.stat,
                    c.window,
                    c.value.map_or("n/a".into(), fmt3),
                    c.t.map_or("n/a".into(), fmt3),
                    c.t.filter(|_| c.value.is_some()).map_or("", stars),
                    row.n
                );
            }
        }
        out
    }

    pub fn aligned(&self) -> String {
        let name_w = self
            .rows
            .iter()
            .map(|r| label(r.node).len())
            .chain(std::iter::once(4))
            .max()
            .unwrap_or(4)
            + 2;
        let headers: Vec<String> = self.rows.first().map_or_else(Vec::new, |r| r.cells.iter().map(Cell::header).collect());
        let col_w = headers.iter().map(String::len).max().unwrap_or(0).max(12) + 2;
        let mut out = format!("{}\n", self.title);
        let _ = write!(out, "{:<name_w$}", "Node");
        for h in &headers {
            let _ = write!(out, "{h:>col_w$}");
        }
        let _ = writeln!(out, "{:>8}", "n");
        for row in &self.rows {
            let _ = write!(out, "{:<name_w$}", label(row.node));
            for c in &row.cells {
                let _ = write!(out, "{:>col_w$}", pad_stars(&c.value_text()));
            }
            let _ = writeln!(out, "{:>8}", row.n);
            let _ = write!(out, "{:<name_w$}", "");
            for c in &row.cells {
                let _ = write!(out, "{:>col_w$}", format!("{}   ", c.t_text()));
            }
            out.push('\n');
        }
        out
    }
}

// right-align on the number, leaving room for up to three stars
fn pad_stars(s: &str) -> String {
    let n = s.chars().rev().take_while(|&c| c == '*').count();
    format!("{s}{}", " ".repeat(3 - n.min(3)))
}

fn label(node: TaxonomyNode) -> String {
    if node.is_subcategory() {
        format!("  {}", node.label())
    } else {
        node.label().to_string()
    }
}

/// Delimited results file covering standardized and raw statistics.
/// Empty input gives a header-only file.
pub fn render_results_delimited(results: &[StudyResult]) -> String {
    let mut out = format!("{RESULTS_HEADER}\n");
    out.push_str(&ResultsTable::standardized(results).delimited_rows());
    out.push_str(&ResultsTable::raw(results).delimited_rows());
    out
}

pub fn render_results_aligned(results: &[StudyResult]) -> String {
    format!(
        "{}\n{}\nStars: *** p<0.01, ** p<0.05, * p<0.1 (normal approximation); t-values in parentheses.\n",
        ResultsTable::standardized(results).aligned(),
        ResultsTable::raw(results).aligned()
    )
}

/// Delimited and aligned variants.
pub fn render_results(results: &[StudyResult]) -> (String, String) {
    (render_results_delimited(results), render_results_aligned(results))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventSummary {
    /// Kept risk events per node, every node present.
    pub kept: BTreeMap<TaxonomyNode, usize>,
    /// Confound-removed events per node, every node present.
    pub removed: BTreeMap<TaxonomyNode, usize>,
    /// Removed events per signed distance to the confound.
    pub histogram: BTreeMap<i64, usize>,
}

pub fn render_event_summary(kept: &[RiskEvent], removed: &[RemovedEvent], halfwidth: usize) -> EventSummary {
    let mut s = EventSummary {
        kept: TaxonomyNode::ALL.iter().map(|&n| (n, 0)).collect(),
        removed: TaxonomyNode::ALL.iter().map(|&n| (n, 0)).collect(),
        histogram: distance_histogram(removed, halfwidth),
    };
    for e in kept {
        *s.kept.entry(e.node).or_insert(0) += 1;
    }
    for r in removed {
        *s.removed.entry(r.event.node).or_insert(0) += 1;
    }
    s
}

impl EventSummary {
    pub fn counts_csv(&self) -> String {
        let mut out = String::from("node,kept,removed\n");
        for node in report_order() {
            let _ = writeln!(out, "{},{},{}", node.ident(), self.kept[&node], self.removed[&node]);
        }
        out
    }

    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("distance,count\n");
        for (d, c) in &self.histogram {
            let _ = writeln!(out, "{d},{c}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::RiskEvent;
    use crate::ingest::CalendarEventKind;
    use crate::sentiment::Sign;
    use crate::study::{TStatUndefined, Window};
    use chrono::NaiveDate;

    fn stat(v: f64, t: f64) -> Statistic {
        Statistic { value: Some(v), t: Ok(t) }
    }

    fn result(node: TaxonomyNode, n: usize, saar0: Statistic) -> StudyResult {
        let z = stat(0.0, 0.0);
        StudyResult {
            node,
            n,
            saar: vec![(-1, z), (0, saar0), (1, z)],
            scaar: vec![(Window::new(-1, 0), stat(-0.00289, -5.265)), (Window::new(-1, 1), z)],
            aar: vec![(-1, z), (0, z), (1, z)],
            caar: vec![(Window::new(-1, 0), z), (Window::new(-1, 1), z)],
        }
    }

    #[test]
    fn star_thresholds() {
        assert_eq!(stars(-5.265), "***");
        assert_eq!(stars(2.6), "***");
        assert_eq!(stars(2.5), "**");
        assert_eq!(stars(-1.97), "**");
        assert_eq!(stars(1.95), "*");
        assert_eq!(stars(1.65), "*");
        assert_eq!(stars(1.64), "");
    }

    #[test]
    fn headline_cell() {
        let r = result(TaxonomyNode::EsgAll, 665, stat(-0.00292, -5.0));
        let t = ResultsTable::standardized(&[r]);
        let c = &t.rows[0].cells[0];
        assert_eq!(c.value_text(), "-0.289***");
        assert_eq!(c.t_text(), "(-5.265)");
        let text = t.aligned();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[1].contains("SCAAR[-1;0]") && lines[1].contains("SAAR(t0)"));
        assert!(lines[2].starts_with("ESG") && lines[2].contains("-0.289***"));
        assert!(lines[3].contains("(-5.265)"));
    }

    #[test]
    fn undefined_t_prints_value_without_stars() {
        let one = Statistic { value: Some(-0.01), t: Err(TStatUndefined::TooFewEvents) };
        let r = result(TaxonomyNode::Social, 1, one);
        let csv = render_results_delimited(&[r]);
        let row = csv.lines().find(|l| l.starts_with("Social,SAAR,t0,")).unwrap();
        assert_eq!(row, "Social,SAAR,t0,-1.000,n/a,,1");
        let t = ResultsTable::standardized(&[result(TaxonomyNode::Social, 1, one)]);
        assert_eq!(t.rows[0].cells[3].value_text(), "-1.000");
        assert_eq!(t.rows[0].cells[3].t_text(), "(n/a)");
    }

    #[test]
    fn empty_results_header_only() {
        assert_eq!(render_results_delimited(&[]), format!("{RESULTS_HEADER}\n"));
    }

    #[test]
    fn rows_follow_pillar_grouping() {
        let order = report_order();
        assert_eq!(order.len(), TaxonomyNode::COUNT);
        assert_eq!(order[0], TaxonomyNode::EsgAll);
        assert_eq!(order[1], TaxonomyNode::Environment);
        assert!(order[2..6].iter().all(|n| n.parent() == Some(TaxonomyNode::Environment)));
        assert_eq!(order[6], TaxonomyNode::Social);
        assert_eq!(order[11], TaxonomyNode::Governance);
        let results: Vec<StudyResult> = TaxonomyNode::ALL.iter().rev().map(|&n| result(n, 3, stat(0.0, 0.0))).collect();
        let t = ResultsTable::standardized(&results);
        assert_eq!(t.rows.iter().map(|r| r.node).collect::<Vec<_>>(), order);
    }

    #[test]
    fn delimited_round_trips_to_printed_precision() {
        let vals = [-0.0028949, 0.0123456, -1e-7, 0.5];
        for v in vals {
            let r = result(TaxonomyNode::Governance, 4, stat(v, -2.3456));
            let csv = render_results_delimited(&[r]);
            let row = csv.lines().find(|l| l.starts_with("Governance,SAAR,t0,")).unwrap();
            let f: Vec<&str> = row.split(',').collect();
            let parsed: f64 = f[3].parse().unwrap();
            assert!((parsed - v * 100.0).abs() <= 0.0005 + 1e-12, "{v} -> {}", f[3]);
            assert_eq!(f[4], "-2.346");
            assert_eq!(f[5], "**");
        }
    }

    fn ev(node: TaxonomyNode) -> RiskEvent {
        RiskEvent {
            firm: "A".into(),
            node,
            day: 0,
            date: NaiveDate::from_ymd_opt(2020, 1, 2).unwrap(),
            count: 10,
            total: 20,
            share: 0.5,
            sentiment_score: -0.2,
            sign: Sign::Negative,
            merged_outlier_days: vec![0],
        }
    }

    #[test]
    fn summary_counts_and_histogram() {
        use TaxonomyNode::*;
        let kept = [ev(Governance), ev(Governance), ev(Governance), ev(Social)];
        let removed = [RemovedEvent { event: ev(HumanCapital), kind: CalendarEventKind::EarningsRelease, distance: -4 }];
        let s = render_event_summary(&kept, &removed, 5);
        assert_eq!(s.kept[&Governance], 3);
        assert_eq!(s.kept[&Social], 1);
        assert_eq!(s.kept[&Environment], 0);
        assert_eq!(s.removed[&HumanCapital], 1);
        assert_eq!(s.histogram[&-4], 1);
        assert_eq!(s.histogram.len(), 11);
        assert!(s.histogram_csv().contains("\n-4,1\n"));

        let none = render_event_summary(&kept, &[], 5);
        assert!(none.histogram.values().all(|&c| c == 0));
        assert_eq!(none.histogram_csv().lines().count(), 12);
    }
}
