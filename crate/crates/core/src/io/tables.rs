use std::path::Path;

use chrono::NaiveDate;

use super::{read_text, IoError};
use crate::coupling::TargetCurve;
use crate::estimation::{Observation, ObservationSeries, SeriesError};
use crate::town::{Counts, TICKS_PER_DAY};

pub const OBSERVATION_HEADER: [&str; 4] = ["date", "H", "U", "D"];

/// A header plus string cells, as read from or written to CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

struct Record {
    line: u64,
    fields: Vec<String>,
}

fn records(text: &str, path: &Path, expected: &[&str]) -> Result<Vec<Record>, IoError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(text.as_bytes());
    let mut out = Vec::new();
    let mut header_seen = false;
    for result in reader.records() {
        let record = result.map_err(|e| IoError::Row {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let fields: Vec<String> = record.iter().map(|f| f.trim().to_string()).collect();
        if !header_seen {
            if fields != expected {
                return Err(IoError::Header {
                    path: path.to_path_buf(),
                    expected: expected.join(","),
                    found: fields.join(","),
                });
            }
            header_seen = true;
            continue;
        }
        if fields.len() != expected.len() {
            return Err(IoError::Row {
                path: path.to_path_buf(),
                line,
                message: format!("expected {} fields, found {}", expected.len(), fields.len()),
            });
        }
        out.push(Record { line, fields });
    }
    if !header_seen {
        return Err(IoError::Header { path: path.to_path_buf(), expected: expected.join(","), found: String::new() });
    }
    Ok(out)
}

fn parse_date(field: &str, path: &Path, line: u64) -> Result<NaiveDate, IoError> {
    NaiveDate::parse_from_str(field, "%Y-%m-%d").map_err(|e| IoError::Row {
        path: path.to_path_buf(),
        line,
        message: format!("invalid ISO-8601 date `{field}`: {e}"),
    })
}

fn parse_number(field: &str, name: &str, path: &Path, line: u64) -> Result<f64, IoError> {
    let value: f64 = field.parse().map_err(|_| IoError::Row {
        path: path.to_path_buf(),
        line,
        message: format!("{name}: `{field}` is not a number"),
    })?;
    if !value.is_finite() || value < 0.0 {
        return Err(IoError::Row {
            path: path.to_path_buf(),
            line,
            message: format!("{name} must be a finite non-negative number, got {field}"),
        });
    }
    Ok(value)
}

/// Parse `date,H,U,D` text; `path` is only used in error messages.
pub fn parse_observations(text: &str, path: &Path) -> Result<ObservationSeries, IoError> {
    let records = records(text, path, &OBSERVATION_HEADER)?;
    let mut rows = Vec::with_capacity(records.len());
    for r in &records {
        rows.push(Observation {
            date: parse_date(&r.fields[0], path, r.line)?,
            h: parse_number(&r.fields[1], "H", path, r.line)?,
            u: parse_number(&r.fields[2], "U", path, r.line)?,
            d: parse_number(&r.fields[3], "D", path, r.line)?,
        });
    }
    ObservationSeries::new(rows).map_err(|source| {
        let line = match &source {
            SeriesError::Empty => 1,
            SeriesError::InvalidValue { index, .. }
            | SeriesError::DateGap { index, .. }
            | SeriesError::DeathsDecrease { index, .. } => records[*index].line,
        };
        IoError::Series { path: path.to_path_buf(), line, source }
    })
}

pub fn load_observations(path: &Path) -> Result<ObservationSeries, IoError> {
    parse_observations(&read_text(path)?, path)
}

pub fn write_table(path: &Path, table: &Table) -> Result<(), IoError> {
    let io = |e: csv::Error| IoError::Io { path: path.to_path_buf(), source: e.into() };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(&table.header).map_err(io)?;
    for row in &table.rows {
        w.write_record(row).map_err(io)?;
    }
    w.flush().map_err(|e| IoError::io(path, e))
}

/// Read any CSV with a header row; all rows must have the header's width.
pub fn read_table(path: &Path) -> Result<Table, IoError> {
    let text = read_text(path)?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let row_err = |e: csv::Error| IoError::Row {
        path: path.to_path_buf(),
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    };
    let header = reader.headers().map_err(row_err)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for r in reader.records() {
        rows.push(r.map_err(row_err)?.iter().map(str::to_string).collect());
    }
    Ok(Table { header, rows })
}

pub fn write_observations_csv(series: &ObservationSeries, path: &Path) -> Result<(), IoError> {
    let mut t = Table::new(&OBSERVATION_HEADER);
    for r in series.rows() {
        t.push(vec![r.date.to_string(), r.h.to_string(), r.u.to_string(), r.d.to_string()]);
    }
    write_table(path, &t)
}

/// Town aggregates, one row every `stride` ticks.
pub fn write_counts_csv(path: &Path, counts: &[Counts], stride: usize) -> Result<(), IoError> {
    let mut t = Table::new(&["tick", "day", "S", "Ia", "Is", "R"]);
    for (tick, c) in counts.iter().enumerate().step_by(stride.max(1)) {
        t.push(vec![
            tick.to_string(),
            (tick as f64 / TICKS_PER_DAY as f64).to_string(),
            c.susceptible.to_string(),
            c.asymptomatic.to_string(),
            c.symptomatic.to_string(),
            c.recovered.to_string(),
        ]);
    }
    write_table(path, &t)
}

pub const TARGET_HEADER: [&str; 2] = ["date", "infected"];

/// Parse a `date,infected` target curve with consecutive dates.
pub fn parse_target(text: &str, path: &Path) -> Result<TargetCurve, IoError> {
    let records = records(text, path, &TARGET_HEADER)?;
    let mut values = Vec::with_capacity(records.len());
    let mut start = None;
    let mut previous: Option<NaiveDate> = None;
    for r in &records {
        let date = parse_date(&r.fields[0], path, r.line)?;
        if let Some(p) = previous {
            if p.succ_opt() != Some(date) {
                return Err(IoError::Row {
                    path: path.to_path_buf(),
                    line: r.line,
                    message: format!("date {date} does not follow {p} by exactly one day"),
                });
            }
        }
        start.get_or_insert(date);
        previous = Some(date);
        values.push(parse_number(&r.fields[1], "infected", path, r.line)?);
    }
    if values.is_empty() {
        return Err(IoError::Row { path: path.to_path_buf(), line: 1, message: "no data rows".into() });
    }
    TargetCurve::new(start, values).map_err(|e| IoError::Row { path: path.to_path_buf(), line: 0, message: e.to_string() })
}

pub fn load_target(path: &Path) -> Result<TargetCurve, IoError> {
    parse_target(&read_text(path)?, path)
}

/// Undated curves are written from 1970-01-01.
pub fn write_target_csv(curve: &TargetCurve, path: &Path) -> Result<(), IoError> {
    let start = curve.start.unwrap_or_default();
    let mut t = Table::new(&TARGET_HEADER);
    for (v, date) in curve.values.iter().zip(start.iter_days()) {
        t.push(vec![date.to_string(), v.to_string()]);
    }
    write_table(path, &t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("obs.csv")
    }

    #[test]
    fn well_formed_file() {
        let s = parse_observations("date,H,U,D\n2020-03-17,1,0,0\n2020-03-18,2,1,0\n2020-03-19,3,1,1\n", p()).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.rows()[2].d, 1.0);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let dup = parse_observations("date,H,U,D\n2020-03-17,1,0,0\n2020-03-17,2,1,0\n", p()).unwrap_err();
        assert!(matches!(dup, IoError::Series { line: 3, .. }), "{dup}");
        let dec = parse_observations("date,H,U,D\n2020-03-17,1,0,2\n2020-03-18,2,1,1\n", p()).unwrap_err();
        assert!(dec.to_string().contains("cumulative deaths must be non-decreasing"));
        let bad = parse_observations("date,H,U,D\n2020-03-17,x,0,0\n", p()).unwrap_err();
        assert!(matches!(bad, IoError::Row { line: 2, .. }));
        let neg = parse_observations("date,H,U,D\n2020-03-17,-1,0,0\n", p()).unwrap_err();
        assert!(matches!(neg, IoError::Row { line: 2, .. }));
        assert!(matches!(parse_observations("date,H,D,U\n", p()).unwrap_err(), IoError::Header { .. }));
        assert!(matches!(parse_observations("", p()).unwrap_err(), IoError::Header { .. }));
        assert!(matches!(parse_observations("date,H,U,D\n", p()).unwrap_err(), IoError::Series { .. }));
        let short = parse_observations("date,H,U,D\n2020-03-17,1,0\n", p()).unwrap_err();
        assert!(matches!(short, IoError::Row { line: 2, .. }));
    }

    #[test]
    fn target_parsing() {
        let t = parse_target("date,infected\n2020-10-30,27\n2020-10-31,28.5\n", Path::new("t.csv")).unwrap();
        assert_eq!(t.values, vec![27.0, 28.5]);
        assert_eq!(t.start, NaiveDate::from_ymd_opt(2020, 10, 30));
        assert!(parse_target("date,infected\n2020-10-30,27\n2020-11-02,1\n", Path::new("t.csv")).is_err());
    }
}
