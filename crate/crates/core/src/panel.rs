//! Count panels: cumulative and daily-increment matrices indexed by
//! (date, series), plus the canonical long-format CSV representation.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::NaiveDate;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kind of count carried by a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feature {
    Cases,
    Deaths,
    Recovered,
}

impl Feature {
    pub const ALL: [Feature; 3] = [Feature::Cases, Feature::Deaths, Feature::Recovered];

    pub fn as_str(self) -> &'static str {
        match self {
            Feature::Cases => "cases",
            Feature::Deaths => "deaths",
            Feature::Recovered => "recovered",
        }
    }

    pub fn index(self) -> usize {
        match self {
            Feature::Cases => 0,
            Feature::Deaths => 1,
            Feature::Recovered => 2,
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cases" => Ok(Feature::Cases),
            "deaths" => Ok(Feature::Deaths),
            "recovered" => Ok(Feature::Recovered),
            other => Err(Error::InvalidArgument(format!("unknown feature `{other}`"))),
        }
    }
}

/// Identifies one column of a panel.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeriesKey {
    pub region: String,
    pub feature: Feature,
    pub flat_index: usize,
}

impl SeriesKey {
    pub fn new(region: impl Into<String>, feature: Feature, flat_index: usize) -> Self {
        SeriesKey {
            region: region.into(),
            feature,
            flat_index,
        }
    }

    fn same_series(&self, other: &SeriesKey) -> bool {
        self.region == other.region && self.feature == other.feature
    }
}

/// Checks that two key lists name the same series in the same order.
pub fn check_keys(expected: &[SeriesKey], actual: &[SeriesKey]) -> Result<()> {
    if expected.len() != actual.len() {
        return Err(Error::KeyMismatch(format!(
            "expected {} series, found {}",
            expected.len(),
            actual.len()
        )));
    }
    for (a, b) in expected.iter().zip(actual) {
        if !a.same_series(b) {
            return Err(Error::KeyMismatch(format!(
                "expected {}/{}, found {}/{}",
                a.region, a.feature, b.region, b.feature
            )));
        }
    }
    Ok(())
}

/// Cumulative counts, one row per consecutive calendar day.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativePanel {
    pub dates: Vec<NaiveDate>,
    pub keys: Vec<SeriesKey>,
    pub values: Array2<u64>,
}

impl CumulativePanel {
    /// Number of day-over-day decreases, i.e. cells clamped by
    /// [`to_daily_increments`].
    pub fn negative_step_count(&self) -> usize {
        let t = self.values.nrows();
        (1..t)
            .map(|row| {
                self.values
                    .row(row)
                    .iter()
                    .zip(self.values.row(row - 1))
                    .filter(|(cur, prev)| cur < prev)
                    .count()
            })
            .sum()
    }
}

/// Daily increments Y[t][d].
#[derive(Debug, Clone, PartialEq)]
pub struct CountPanel {
    pub dates: Vec<NaiveDate>,
    pub keys: Vec<SeriesKey>,
    pub values: Array2<u64>,
}

impl CountPanel {
    pub fn n_days(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_series(&self) -> usize {
        self.values.ncols()
    }

    pub fn find(&self, region: &str, feature: Feature) -> Option<usize> {
        self.keys
            .iter()
            .position(|k| k.region == region && k.feature == feature)
    }

    /// Distinct regions in key order.
    pub fn regions(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for key in &self.keys {
            if !out.contains(&key.region) {
                out.push(key.region.clone());
            }
        }
        out
    }

    pub fn as_f64(&self) -> Array2<f64> {
        self.values.mapv(|v| v as f64)
    }

    /// Calendar date of a (possibly future) day index.
    pub fn date_of(&self, day: usize) -> NaiveDate {
        let first = self.dates[0];
        first + chrono::Days::new(day as u64)
    }

    /// Writes the canonical `date,region,feature,count` table.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        let map_err = |e: csv::Error| Error::InvalidArgument(format!("csv write: {e}"));
        writer
            .write_record(["date", "region", "feature", "count"])
            .map_err(map_err)?;
        for (t, date) in self.dates.iter().enumerate() {
            let date = date.format("%Y-%m-%d").to_string();
            for (d, key) in self.keys.iter().enumerate() {
                writer
                    .write_record([
                        date.as_str(),
                        key.region.as_str(),
                        key.feature.as_str(),
                        &self.values[[t, d]].to_string(),
                    ])
                    .map_err(map_err)?;
            }
        }
        writer
            .flush()
            .map_err(|e| Error::InvalidArgument(format!("csv write: {e}")))?;
        Ok(())
    }

    /// Reads a table written by [`CountPanel::write_csv`]. Series order is the
    /// order of first appearance; every (date, series) cell must be present.
    pub fn read_csv<R: Read>(input: R) -> Result<CountPanel> {
        let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
        let header = reader
            .headers()
            .map_err(|e| Error::Parse {
                line: 1,
                message: e.to_string(),
            })?
            .clone();
        let expected = ["date", "region", "feature", "count"];
        if header.len() != 4 || header.iter().zip(expected).any(|(a, b)| a.trim() != b) {
            return Err(Error::Parse {
                line: 1,
                message: "expected header `date,region,feature,count`".into(),
            });
        }

        let mut dates: Vec<NaiveDate> = Vec::new();
        let mut keys: Vec<(String, Feature)> = Vec::new();
        let mut cells: Vec<(usize, usize, u64, usize)> = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::Parse {
                line: e.position().map(|p| p.line() as usize).unwrap_or(0),
                message: e.to_string(),
            })?;
            let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
            let bad = |message: String| Error::Parse { line, message };
            if record.len() != 4 {
                return Err(bad(format!("expected 4 fields, found {}", record.len())));
            }
            let date = NaiveDate::parse_from_str(record[0].trim(), "%Y-%m-%d")
                .map_err(|e| bad(format!("bad date `{}`: {e}", &record[0])))?;
            let feature: Feature = record[2].parse().map_err(|e: Error| bad(e.to_string()))?;
            let count: u64 = record[3]
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad count `{}`", &record[3])))?;
            let region = record[1].trim().to_string();

            let t = match dates.iter().position(|d| *d == date) {
                Some(i) => i,
                None => {
                    dates.push(date);
                    dates.len() - 1
                }
            };
            let d = match keys.iter().position(|(r, f)| *r == region && *f == feature) {
                Some(i) => i,
                None => {
                    keys.push((region, feature));
                    keys.len() - 1
                }
            };
            cells.push((t, d, count, line));
        }
        if cells.is_empty() {
            return Err(Error::EmptyInput);
        }
        for w in dates.windows(2) {
            if w[1] != w[0] + chrono::Days::new(1) {
                return Err(Error::InvalidArgument(format!(
                    "dates are not consecutive: {} then {}",
                    w[0], w[1]
                )));
            }
        }

        let mut values = Array2::<u64>::zeros((dates.len(), keys.len()));
        let mut seen = Array2::<bool>::from_elem((dates.len(), keys.len()), false);
        for (t, d, count, line) in cells {
            if seen[[t, d]] {
                return Err(Error::DuplicateRow {
                    date: dates[t].to_string(),
                    region: format!("{} (line {line})", keys[d].0),
                });
            }
            seen[[t, d]] = true;
            values[[t, d]] = count;
        }
        if let Some(((t, d), _)) = seen.indexed_iter().find(|(_, s)| !**s) {
            return Err(Error::InvalidArgument(format!(
                "missing cell for {} {}/{}",
                dates[t], keys[d].0, keys[d].1
            )));
        }
        let keys = keys
            .into_iter()
            .enumerate()
            .map(|(i, (region, feature))| SeriesKey::new(region, feature, i))
            .collect();
        Ok(CountPanel {
            dates,
            keys,
            values,
        })
    }
}

/// First differences with negative steps clamped to zero; row 0 keeps the
/// first cumulative value.
pub fn to_daily_increments(cum: &CumulativePanel) -> CountPanel {
    let mut values = cum.values.clone();
    for row in (1..cum.values.nrows()).rev() {
        for d in 0..cum.values.ncols() {
            values[[row, d]] = cum.values[[row, d]].saturating_sub(cum.values[[row - 1, d]]);
        }
    }
    CountPanel {
        dates: cum.dates.clone(),
        keys: cum.keys.clone(),
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn single_column(values: &[u64]) -> CumulativePanel {
        let start = NaiveDate::from_ymd_opt(2020, 3, 20).unwrap();
        CumulativePanel {
            dates: (0..values.len())
                .map(|i| start + chrono::Days::new(i as u64))
                .collect(),
            keys: vec![SeriesKey::new("MD", Feature::Cases, 0)],
            values: Array2::from_shape_vec((values.len(), 1), values.to_vec()).unwrap(),
        }
    }

    fn column(panel: &CountPanel) -> Vec<u64> {
        panel.values.column(0).to_vec()
    }

    #[test]
    fn increments_clamp_corrections() {
        assert_eq!(column(&to_daily_increments(&single_column(&[0, 3, 3, 2, 7]))), vec![0, 3, 0, 0, 5]);
        assert_eq!(column(&to_daily_increments(&single_column(&[5, 5, 5]))), vec![5, 0, 0]);
        assert_eq!(column(&to_daily_increments(&single_column(&[1, 2, 4]))), vec![1, 1, 2]);
        assert_eq!(single_column(&[0, 3, 3, 2, 7]).negative_step_count(), 1);
    }

    #[test]
    fn canonical_csv_round_trip() {
        let start = NaiveDate::from_ymd_opt(2020, 3, 20).unwrap();
        let panel = CountPanel {
            dates: vec![start, start + chrono::Days::new(1)],
            keys: vec![
                SeriesKey::new("AN", Feature::Cases, 0),
                SeriesKey::new("AN", Feature::Deaths, 1),
            ],
            values: array![[1, 2], [3, 4]],
        };
        let mut buf = Vec::new();
        panel.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("date,region,feature,count\n2020-03-20,AN,cases,1\n"));
        assert_eq!(CountPanel::read_csv(buf.as_slice()).unwrap(), panel);
    }

    #[test]
    fn canonical_csv_rejects_gaps_and_duplicates() {
        let dup = "date,region,feature,count\n2020-03-20,AN,cases,1\n2020-03-20,AN,cases,2\n";
        assert!(matches!(
            CountPanel::read_csv(dup.as_bytes()),
            Err(Error::DuplicateRow { .. })
        ));
        let gap = "date,region,feature,count\n2020-03-20,AN,cases,1\n2020-03-22,AN,cases,2\n";
        assert!(CountPanel::read_csv(gap.as_bytes()).is_err());
    }

    #[test]
    fn key_check_detects_reordering() {
        let a = vec![
            SeriesKey::new("AN", Feature::Cases, 0),
            SeriesKey::new("AN", Feature::Deaths, 1),
        ];
        let mut b = a.clone();
        b.swap(0, 1);
        assert!(check_keys(&a, &a).is_ok());
        assert!(check_keys(&a, &b).is_err());
    }
}
