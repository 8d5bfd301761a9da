use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One day of hospital data: current hospitalised, current intensive care,
/// cumulative deaths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub date: NaiveDate,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "U")]
    pub u: f64,
    #[serde(rename = "D")]
    pub d: f64,
}

impl Observation {
    pub fn values(&self) -> [f64; 3] {
        [self.h, self.u, self.d]
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SeriesError {
    #[error("observation series is empty")]
    Empty,
    #[error("row {index}: {field} must be a finite non-negative number, got {value}")]
    InvalidValue { index: usize, field: &'static str, value: f64 },
    #[error("row {index}: date {date} does not follow {previous} by exactly one day")]
    DateGap { index: usize, previous: NaiveDate, date: NaiveDate },
    #[error("row {index}: cumulative deaths must be non-decreasing ({previous} then {value})")]
    DeathsDecrease { index: usize, previous: f64, value: f64 },
}

/// Daily-contiguous observations with non-decreasing cumulative deaths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservationSeries {
    rows: Vec<Observation>,
}

impl ObservationSeries {
    pub fn new(rows: Vec<Observation>) -> Result<Self, SeriesError> {
        if rows.is_empty() {
            return Err(SeriesError::Empty);
        }
        for (index, row) in rows.iter().enumerate() {
            for (field, value) in [("H", row.h), ("U", row.u), ("D", row.d)] {
                if !value.is_finite() || value < 0.0 {
                    return Err(SeriesError::InvalidValue { index, field, value });
                }
            }
            if index > 0 {
                let prev = &rows[index - 1];
                if prev.date.succ_opt() != Some(row.date) {
                    return Err(SeriesError::DateGap { index, previous: prev.date, date: row.date });
                }
                if row.d < prev.d {
                    return Err(SeriesError::DeathsDecrease { index, previous: prev.d, value: row.d });
                }
            }
        }
        Ok(Self { rows })
    }

    /// Series starting at `start` built from per-day `[H, U, D]` values.
    pub fn from_values(start: NaiveDate, values: &[[f64; 3]]) -> Result<Self, SeriesError> {
        let rows = values
            .iter()
            .zip(start.iter_days())
            .map(|(v, date)| Observation { date, h: v[0], u: v[1], d: v[2] })
            .collect();
        Self::new(rows)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Observation] {
        &self.rows
    }

    pub fn start_date(&self) -> NaiveDate {
        self.rows[0].date
    }

    pub fn date(&self, index: usize) -> NaiveDate {
        self.rows[index].date
    }

    /// Divide every value by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let rows = self
            .rows
            .iter()
            .map(|r| Observation { date: r.date, h: r.h / factor, u: r.u / factor, d: r.d / factor })
            .collect();
        Self { rows }
    }
}
