//! Daily panels of per-asset values and the rolling/expanding window grid.
//!
//! Two panels feed the pipeline: log-returns built from adjusted closes and
//! daily bullish-message counts. Both are stored asset-major (`values[i]` is
//! the full series of asset `i`) on a strictly increasing date calendar.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::output::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PanelKind {
    Returns,
    Opinion,
}

impl PanelKind {
    fn value_column(self) -> &'static str {
        match self {
            PanelKind::Returns => "log_return",
            PanelKind::Opinion => "bullish_count",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelSeries {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    values: Vec<Vec<f64>>,
    kind: PanelKind,
}

impl PanelSeries {
    pub fn new(
        dates: Vec<NaiveDate>,
        tickers: Vec<String>,
        values: Vec<Vec<f64>>,
        kind: PanelKind,
    ) -> Result<Self> {
        if values.len() != tickers.len() {
            return Err(Error::Shape(format!(
                "{} value rows for {} tickers",
                values.len(),
                tickers.len()
            )));
        }
        if let Some(row) = values.iter().find(|r| r.len() != dates.len()) {
            return Err(Error::Shape(format!(
                "row of length {} against {} dates",
                row.len(),
                dates.len()
            )));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Shape("dates are not strictly increasing".into()));
        }
        let unique: BTreeSet<&str> = tickers.iter().map(String::as_str).collect();
        if unique.len() != tickers.len() {
            return Err(Error::Shape("duplicate ticker".into()));
        }
        let valid = match kind {
            PanelKind::Returns => values.iter().flatten().all(|v| v.is_finite()),
            PanelKind::Opinion => values.iter().flatten().all(|v| v.is_finite() && *v >= 0.0),
        };
        if !valid {
            return Err(Error::Shape(format!("{kind:?} panel holds invalid values")));
        }
        Ok(Self {
            dates,
            tickers,
            values,
            kind,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn kind(&self) -> PanelKind {
        self.kind
    }

    /// Number of assets.
    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }

    /// Number of dates.
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn row(&self, asset: usize) -> &[f64] {
        &self.values[asset]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// Re-index onto `calendar`, filling dates this panel lacks with zero.
    /// Dates of this panel that are not in `calendar` are dropped.
    pub fn reindex_zero_fill(&self, calendar: &[NaiveDate]) -> Result<Self> {
        let position: HashMap<NaiveDate, usize> =
            self.dates.iter().enumerate().map(|(i, d)| (*d, i)).collect();
        let values = self
            .values
            .iter()
            .map(|row| {
                calendar
                    .iter()
                    .map(|d| position.get(d).map_or(0.0, |&k| row[k]))
                    .collect()
            })
            .collect();
        Self::new(calendar.to_vec(), self.tickers.clone(), values, self.kind)
    }

    fn restrict_to(&self, keep: &BTreeSet<NaiveDate>, tickers: &[String]) -> Result<Self> {
        let index: HashMap<&str, usize> = self
            .tickers
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect();
        let cols: Vec<usize> = self
            .dates
            .iter()
            .enumerate()
            .filter(|(_, d)| keep.contains(d))
            .map(|(k, _)| k)
            .collect();
        let values = tickers
            .iter()
            .map(|t| {
                let row = &self.values[index[t.as_str()]];
                cols.iter().map(|&k| row[k]).collect()
            })
            .collect();
        let dates = cols.iter().map(|&k| self.dates[k]).collect();
        Self::new(dates, tickers.to_vec(), values, self.kind)
    }

    /// Long-format CSV: `date,ticker,<log_return|bullish_count>`. Values are
    /// written in shortest round-trip form so [`PanelSeries::read_csv`]
    /// reproduces the panel exactly.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, |w| {
            writeln!(w, "date,ticker,{}", self.kind.value_column())?;
            for (k, date) in self.dates.iter().enumerate() {
                for (i, ticker) in self.tickers.iter().enumerate() {
                    writeln!(w, "{date},{ticker},{}", self.values[i][k])?;
                }
            }
            Ok(())
        })
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = open_csv(path)?;
        let headers = reader
            .headers()
            .map_err(|e| csv_error(path, &e))?
            .clone();
        let kind = match headers.get(2) {
            Some("log_return") => PanelKind::Returns,
            Some("bullish_count") => PanelKind::Opinion,
            other => {
                return Err(Error::Parse {
                    path: path.into(),
                    line: 1,
                    message: format!("unknown value column {other:?}"),
                })
            }
        };
        let mut tickers: Vec<String> = Vec::new();
        let mut ticker_index: HashMap<String, usize> = HashMap::new();
        let mut cells: BTreeMap<NaiveDate, HashMap<usize, f64>> = BTreeMap::new();
        for record in reader.records() {
            let record = record.map_err(|e| csv_error(path, &e))?;
            let line = line_of(&record);
            let (date, ticker, raw) = split_row(path, line, &record)?;
            let value: f64 = raw.parse().map_err(|_| Error::Parse {
                path: path.into(),
                line,
                message: format!("bad value {raw:?}"),
            })?;
            let next = tickers.len();
            let i = *ticker_index.entry(ticker.to_string()).or_insert_with(|| {
                tickers.push(ticker.to_string());
                next
            });
            cells.entry(date).or_default().insert(i, value);
        }
        let dates: Vec<NaiveDate> = cells.keys().copied().collect();
        let mut values = vec![Vec::with_capacity(dates.len()); tickers.len()];
        for (date, row) in &cells {
            for (i, series) in values.iter_mut().enumerate() {
                let v = row.get(&i).ok_or_else(|| Error::Parse {
                    path: path.into(),
                    line: 0,
                    message: format!("{} has no value on {date}", tickers[i]),
                })?;
                series.push(*v);
            }
        }
        Self::new(dates, tickers, values, kind)
    }
}

/// Counters collected while reading an opinion file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub rows: usize,
    pub unknown_ticker_rows: usize,
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn csv_error(path: &Path, e: &csv::Error) -> Error {
    Error::Parse {
        path: path.into(),
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    }
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn check_header(path: &Path, reader: &mut csv::Reader<std::fs::File>, expected: &[&str]) -> Result<()> {
    let headers = reader.headers().map_err(|e| csv_error(path, &e))?;
    if headers.iter().ne(expected.iter().copied()) {
        return Err(Error::Parse {
            path: path.into(),
            line: 1,
            message: format!("expected header {}", expected.join(",")),
        });
    }
    Ok(())
}

fn split_row<'r>(
    path: &Path,
    line: u64,
    record: &'r csv::StringRecord,
) -> Result<(NaiveDate, &'r str, &'r str)> {
    if record.len() != 3 {
        return Err(Error::Parse {
            path: path.into(),
            line,
            message: format!("expected 3 fields, found {}", record.len()),
        });
    }
    let date = parse_date(&record[0]).map_err(|message| Error::Parse {
        path: path.into(),
        line,
        message,
    })?;
    Ok((date, &record[1], &record[2]))
}

pub fn parse_date(raw: &str) -> std::result::Result<NaiveDate, String> {
    NaiveDate::parse_from_str(raw, "%Y-%m-%d").map_err(|e| format!("bad date {raw:?}: {e}"))
}

type DatedCells = HashMap<String, BTreeMap<NaiveDate, f64>>;

fn insert_cell(
    cells: &mut DatedCells,
    path: &Path,
    line: u64,
    ticker: &str,
    date: NaiveDate,
    value: f64,
) -> Result<()> {
    let series = cells.entry(ticker.to_string()).or_default();
    if series.insert(date, value).is_some() {
        return Err(Error::Parse {
            path: path.into(),
            line,
            message: format!("duplicate row for {ticker} on {date}"),
        });
    }
    Ok(())
}

/// Load `date,ticker,close` and turn it into a log-return panel.
///
/// The calendar is the set of dates on which every requested ticker has a
/// close; the first of those dates is dropped because it has no prior close.
pub fn load_price_panel(path: &Path, tickers: &[String]) -> Result<PanelSeries> {
    let wanted: BTreeSet<&str> = tickers.iter().map(String::as_str).collect();
    let mut reader = open_csv(path)?;
    check_header(path, &mut reader, &["date", "ticker", "close"])?;
    let mut closes = DatedCells::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, &e))?;
        let line = line_of(&record);
        let (date, ticker, raw) = split_row(path, line, &record)?;
        let close: f64 = raw.parse().map_err(|_| Error::Parse {
            path: path.into(),
            line,
            message: format!("bad close {raw:?}"),
        })?;
        if !(close.is_finite() && close > 0.0) {
            return Err(Error::BadPrice {
                path: path.into(),
                line,
                ticker: ticker.to_string(),
                value: close,
            });
        }
        if wanted.contains(ticker) {
            insert_cell(&mut closes, path, line, ticker, date, close)?;
        }
    }

    let mut calendar: Option<BTreeSet<NaiveDate>> = None;
    for ticker in tickers {
        let series = closes.get(ticker).ok_or_else(|| Error::MissingAsset {
            path: path.into(),
            ticker: ticker.clone(),
        })?;
        let dates: BTreeSet<NaiveDate> = series.keys().copied().collect();
        calendar = Some(match calendar {
            None => dates,
            Some(c) => c.intersection(&dates).copied().collect(),
        });
    }
    let calendar: Vec<NaiveDate> = calendar.unwrap_or_default().into_iter().collect();
    if calendar.is_empty() {
        return Err(Error::NoOverlap);
    }

    let values = tickers
        .iter()
        .map(|t| {
            let series = &closes[t];
            calendar
                .windows(2)
                .map(|w| series[&w[1]].ln() - series[&w[0]].ln())
                .collect()
        })
        .collect();
    PanelSeries::new(
        calendar[1..].to_vec(),
        tickers.to_vec(),
        values,
        PanelKind::Returns,
    )
}

/// Load `date,ticker,bullish_count` onto the union calendar of all rows that
/// belong to requested tickers. Missing (ticker, date) cells are zero.
pub fn load_opinion_panel(path: &Path, tickers: &[String]) -> Result<PanelSeries> {
    let (panel, stats) = load_opinion_panel_with_stats(path, tickers)?;
    if stats.unknown_ticker_rows > 0 {
        log::warn!(
            "{}: ignored {} rows for tickers outside the universe",
            path.display(),
            stats.unknown_ticker_rows
        );
    }
    Ok(panel)
}

pub fn load_opinion_panel_with_stats(
    path: &Path,
    tickers: &[String],
) -> Result<(PanelSeries, IngestStats)> {
    let wanted: BTreeSet<&str> = tickers.iter().map(String::as_str).collect();
    let mut reader = open_csv(path)?;
    check_header(path, &mut reader, &["date", "ticker", "bullish_count"])?;
    let mut counts = DatedCells::new();
    let mut stats = IngestStats::default();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, &e))?;
        let line = line_of(&record);
        let (date, ticker, raw) = split_row(path, line, &record)?;
        let count: i64 = raw.parse().map_err(|_| Error::Parse {
            path: path.into(),
            line,
            message: format!("bad count {raw:?}"),
        })?;
        if count < 0 {
            return Err(Error::BadCount {
                path: path.into(),
                line,
                ticker: ticker.to_string(),
                value: count,
            });
        }
        stats.rows += 1;
        if !wanted.contains(ticker) {
            stats.unknown_ticker_rows += 1;
            continue;
        }
        insert_cell(&mut counts, path, line, ticker, date, count as f64)?;
    }
    let calendar: Vec<NaiveDate> = counts
        .values()
        .flat_map(|s| s.keys().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let values = tickers
        .iter()
        .map(|t| match counts.get(t) {
            Some(series) => calendar
                .iter()
                .map(|d| series.get(d).copied().unwrap_or(0.0))
                .collect(),
            None => vec![0.0; calendar.len()],
        })
        .collect();
    let panel = PanelSeries::new(calendar, tickers.to_vec(), values, PanelKind::Opinion)?;
    Ok((panel, stats))
}

/// Restrict two panels over the same tickers to their common dates. Both
/// outputs use the ticker order of `a`.
pub fn align(a: &PanelSeries, b: &PanelSeries) -> Result<(PanelSeries, PanelSeries)> {
    let ta: BTreeSet<&str> = a.tickers.iter().map(String::as_str).collect();
    let tb: BTreeSet<&str> = b.tickers.iter().map(String::as_str).collect();
    if ta != tb {
        return Err(Error::Shape("panels cover different tickers".into()));
    }
    let da: BTreeSet<NaiveDate> = a.dates.iter().copied().collect();
    let common: BTreeSet<NaiveDate> = b.dates.iter().copied().filter(|d| da.contains(d)).collect();
    if common.is_empty() {
        return Err(Error::NoOverlap);
    }
    Ok((
        a.restrict_to(&common, &a.tickers)?,
        b.restrict_to(&common, &a.tickers)?,
    ))
}

/// Read a ticker universe: one symbol per line, blank lines and `#` comments
/// skipped.
pub fn read_tickers(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let tickers: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect();
    let unique: BTreeSet<&String> = tickers.iter().collect();
    if unique.len() != tickers.len() {
        return Err(Error::Parse {
            path: path.into(),
            line: 0,
            message: "duplicate ticker".into(),
        });
    }
    Ok(tickers)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowPolicy {
    Rolling,
    Expanding,
}

impl std::str::FromStr for WindowPolicy {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "rolling" => Ok(WindowPolicy::Rolling),
            "expanding" => Ok(WindowPolicy::Expanding),
            other => Err(format!("unknown policy {other:?} (rolling|expanding)")),
        }
    }
}

impl std::fmt::Display for WindowPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            WindowPolicy::Rolling => "rolling",
            WindowPolicy::Expanding => "expanding",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub width: usize,
    pub step: usize,
    pub policy: WindowPolicy,
}

impl WindowSpec {
    pub fn new(width: usize, step: usize, policy: WindowPolicy) -> Result<Self> {
        if width < 2 {
            return Err(Error::InvalidWindow(format!("width {width} < 2")));
        }
        if step < 1 {
            return Err(Error::InvalidWindow("step must be at least 1".into()));
        }
        Ok(Self {
            width,
            step,
            policy,
        })
    }
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            width: 126,
            step: 5,
            policy: WindowPolicy::Rolling,
        }
    }
}

/// Half-open index range `[start, end)` into a panel's calendar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Window {
    pub start: usize,
    pub end: usize,
}

impl Window {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Enumerate the analysis windows over a series of length `len`.
pub fn windows(spec: &WindowSpec, len: usize) -> Result<Vec<Window>> {
    if spec.width < 2 || spec.step < 1 {
        return Err(Error::InvalidWindow(format!("{spec:?}")));
    }
    if len < spec.width {
        return Err(Error::TooShort {
            len,
            width: spec.width,
        });
    }
    let count = (len - spec.width) / spec.step + 1;
    Ok((0..count)
        .map(|k| match spec.policy {
            WindowPolicy::Rolling => Window {
                start: k * spec.step,
                end: k * spec.step + spec.width,
            },
            WindowPolicy::Expanding => Window {
                start: 0,
                end: spec.width + k * spec.step,
            },
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn d(s: &str) -> NaiveDate {
        parse_date(s).unwrap()
    }

    fn fixture(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn names(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn constant_price_gives_zero_returns() {
        let f = fixture(
            "date,ticker,close\n2020-01-01,A,100\n2020-01-02,A,100\n2020-01-03,A,100\n",
        );
        let p = load_price_panel(f.path(), &names(&["A"])).unwrap();
        assert_eq!(p.row(0), &[0.0, 0.0]);
        assert_eq!(p.dates(), &[d("2020-01-02"), d("2020-01-03")]);
        assert_eq!(p.kind(), PanelKind::Returns);
    }

    #[test]
    fn ratio_e_gives_unit_log_return() {
        let e = std::f64::consts::E;
        let f = fixture(&format!(
            "date,ticker,close\n2020-01-01,A,100\n2020-01-02,A,{}\n",
            100.0 * e
        ));
        let p = load_price_panel(f.path(), &names(&["A"])).unwrap();
        assert!((p.row(0)[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn three_tickers_six_dates() {
        let mut s = String::from("date,ticker,close\n");
        for day in 1..=6 {
            for (t, base) in [("A", 10.0), ("B", 20.0), ("C", 30.0)] {
                s.push_str(&format!("2020-01-0{day},{t},{}\n", base + day as f64));
            }
        }
        let f = fixture(&s);
        let p = load_price_panel(f.path(), &names(&["C", "A", "B"])).unwrap();
        assert_eq!(p.n_assets(), 3);
        assert_eq!(p.len(), 5);
        assert_eq!(p.tickers(), &names(&["C", "A", "B"])[..]);
        assert!((p.row(0)[0] - (32.0f64 / 31.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn price_errors() {
        let f = fixture("date,ticker,close\n2020-01-01,A,100\n2020-01-02,A,100\n");
        assert!(matches!(
            load_price_panel(f.path(), &names(&["A", "B"])),
            Err(Error::MissingAsset { ticker, .. }) if ticker == "B"
        ));
        let f = fixture("date,ticker,close\n2020-01-01,A,100\n2020-01-02,A,0\n");
        assert!(matches!(
            load_price_panel(f.path(), &names(&["A"])),
            Err(Error::BadPrice { line: 3, .. })
        ));
        let f = fixture("date,ticker,close\n2020-01-01,A,100\n2020-13-02,A,1\n");
        assert!(matches!(
            load_price_panel(f.path(), &names(&["A"])),
            Err(Error::Parse { line: 3, .. })
        ));
        let f = fixture("date,ticker,close\n2020-01-01,A,abc\n");
        assert!(matches!(
            load_price_panel(f.path(), &names(&["A"])),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn opinion_identity_and_zero_rows() {
        let f = fixture(
            "date,ticker,bullish_count\n2020-01-01,A,3\n2020-01-02,A,0\n2020-01-03,A,7\n2020-01-01,ZZZ,4\n",
        );
        let (p, stats) = load_opinion_panel_with_stats(f.path(), &names(&["A", "B"])).unwrap();
        assert_eq!(p.row(0), &[3.0, 0.0, 7.0]);
        assert_eq!(p.row(1), &[0.0, 0.0, 0.0]);
        assert_eq!(stats.unknown_ticker_rows, 1);
        assert_eq!(stats.rows, 4);
    }

    #[test]
    fn opinion_union_calendar() {
        let f = fixture(
            "date,ticker,bullish_count\n2020-01-01,A,1\n2020-01-02,A,2\n2020-01-03,B,5\n2020-01-04,B,6\n",
        );
        let p = load_opinion_panel(f.path(), &names(&["A", "B"])).unwrap();
        assert_eq!(p.len(), 4);
        assert_eq!(p.row(0), &[1.0, 2.0, 0.0, 0.0]);
        assert_eq!(p.row(1), &[0.0, 0.0, 5.0, 6.0]);
    }

    #[test]
    fn opinion_negative_count() {
        let f = fixture("date,ticker,bullish_count\n2020-01-01,A,-1\n");
        assert!(matches!(
            load_opinion_panel(f.path(), &names(&["A"])),
            Err(Error::BadCount { value: -1, .. })
        ));
    }

    fn panel_on(days: std::ops::Range<u32>) -> PanelSeries {
        let dates: Vec<NaiveDate> = days
            .clone()
            .map(|k| d("2020-01-01") + chrono::Days::new(k as u64))
            .collect();
        let values = vec![days.clone().map(|k| k as f64).collect(); 1];
        PanelSeries::new(dates, names(&["A"]), values, PanelKind::Opinion).unwrap()
    }

    #[test]
    fn align_cases() {
        let a = panel_on(0..10);
        let (x, y) = align(&a, &a).unwrap();
        assert_eq!(x, a);
        assert_eq!(y, a);

        let b = panel_on(1..11);
        let (x, y) = align(&a, &b).unwrap();
        assert_eq!(x.len(), 9);
        assert_eq!(x.dates(), y.dates());
        assert_eq!(x.row(0)[0], 1.0);

        let c = panel_on(20..30);
        assert!(matches!(align(&a, &c), Err(Error::NoOverlap)));
    }

    #[test]
    fn zero_fill_reindex() {
        let a = panel_on(2..4);
        let cal: Vec<NaiveDate> = (0..5).map(|k| d("2020-01-01") + chrono::Days::new(k)).collect();
        let r = a.reindex_zero_fill(&cal).unwrap();
        assert_eq!(r.row(0), &[0.0, 0.0, 2.0, 3.0, 0.0]);
    }

    #[test]
    fn window_grid() {
        let spec = WindowSpec::new(126, 5, WindowPolicy::Rolling).unwrap();
        let w = windows(&spec, 1251).unwrap();
        assert_eq!(w.len(), 226);
        assert_eq!(w[0], Window { start: 0, end: 126 });
        assert_eq!(w[225], Window { start: 1125, end: 1251 });

        let spec = WindowSpec::new(4, 2, WindowPolicy::Rolling).unwrap();
        let w: Vec<(usize, usize)> = windows(&spec, 8).unwrap().iter().map(|w| (w.start, w.end)).collect();
        assert_eq!(w, vec![(0, 4), (2, 6), (4, 8)]);

        let spec = WindowSpec::new(4, 2, WindowPolicy::Expanding).unwrap();
        let w: Vec<(usize, usize)> = windows(&spec, 8).unwrap().iter().map(|w| (w.start, w.end)).collect();
        assert_eq!(w, vec![(0, 4), (0, 6), (0, 8)]);

        let spec = WindowSpec::new(7, 3, WindowPolicy::Rolling).unwrap();
        assert_eq!(windows(&spec, 7).unwrap().len(), 1);
        assert!(matches!(windows(&spec, 6), Err(Error::TooShort { .. })));
        assert!(WindowSpec::new(1, 1, WindowPolicy::Rolling).is_err());
        assert!(WindowSpec::new(2, 0, WindowPolicy::Rolling).is_err());
    }
}
