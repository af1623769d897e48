//! Parsing of wide cumulative-count CSV files (one row per region and date).

use std::collections::BTreeMap;
use std::io::Read;

use chrono::NaiveDate;
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::panel::{CumulativePanel, Feature, SeriesKey};

/// Names the logical columns of an input file.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMapping {
    pub date: String,
    pub region: String,
    pub cases: String,
    pub deaths: String,
    pub recovered: String,
    /// chrono format string; `None` accepts `YYYY-MM-DD` and `DD/MM/YYYY`.
    pub date_format: Option<String>,
}

impl Default for ColumnMapping {
    /// Layout of the ISCIII `serie_historica_acumulados.csv` file.
    fn default() -> Self {
        ColumnMapping {
            date: "FECHA".into(),
            region: "CCAA".into(),
            cases: "CASOS".into(),
            deaths: "Fallecidos".into(),
            recovered: "Recuperados".into(),
            date_format: None,
        }
    }
}

impl ColumnMapping {
    fn column_for(&self, feature: Feature) -> &str {
        match feature {
            Feature::Cases => &self.cases,
            Feature::Deaths => &self.deaths,
            Feature::Recovered => &self.recovered,
        }
    }

    fn parse_date(&self, raw: &str) -> Option<NaiveDate> {
        let raw = raw.trim();
        match &self.date_format {
            Some(fmt) => NaiveDate::parse_from_str(raw, fmt).ok(),
            None => NaiveDate::parse_from_str(raw, "%Y-%m-%d")
                .or_else(|_| NaiveDate::parse_from_str(raw, "%d/%m/%Y"))
                .ok(),
        }
    }
}

fn parse_count(raw: &str) -> std::result::Result<Option<u64>, String> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(None);
    }
    if let Ok(v) = raw.parse::<u64>() {
        return Ok(Some(v));
    }
    match raw.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < 9.0e15 => Ok(Some(v as u64)),
        _ => Err(format!("bad count `{raw}`")),
    }
}

/// Parses a cumulative-count file into a daily panel.
///
/// Dates span the minimum to the maximum date found; a region without a row
/// (or with an empty cell) on some date takes the previous day's value, or 0
/// before its first report. Series whose column is absent from the header, or
/// which never carry a value for a region, are dropped.
pub fn parse_cumulative_csv<R: Read>(raw: R, mapping: &ColumnMapping) -> Result<CumulativePanel> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(raw);
    let header = match reader.headers() {
        Ok(h) if h.iter().any(|f| !f.is_empty()) => h.clone(),
        Ok(_) => return Err(Error::EmptyInput),
        Err(e) => {
            return Err(Error::Parse {
                line: 1,
                message: e.to_string(),
            })
        }
    };
    let find = |name: &str| header.iter().position(|h| h == name);
    let date_col = find(&mapping.date).ok_or_else(|| Error::MissingColumn(mapping.date.clone()))?;
    let region_col =
        find(&mapping.region).ok_or_else(|| Error::MissingColumn(mapping.region.clone()))?;
    let feature_cols: Vec<(Feature, usize)> = Feature::ALL
        .iter()
        .filter_map(|&f| find(mapping.column_for(f)).map(|c| (f, c)))
        .collect();
    if feature_cols.is_empty() {
        return Err(Error::MissingColumn(format!(
            "{}|{}|{}",
            mapping.cases, mapping.deaths, mapping.recovered
        )));
    }

    let mut rows: BTreeMap<String, BTreeMap<NaiveDate, [Option<u64>; 3]>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != header.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let date = mapping.parse_date(&record[date_col]).ok_or_else(|| Error::Parse {
            line,
            message: format!("bad date `{}`", &record[date_col]),
        })?;
        let region = record[region_col].to_string();
        if region.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty region code".into(),
            });
        }
        let mut counts = [None; 3];
        for &(feature, col) in &feature_cols {
            counts[feature.index()] =
                parse_count(&record[col]).map_err(|message| Error::Parse { line, message })?;
        }
        let by_date = rows.entry(region.clone()).or_default();
        if by_date.insert(date, counts).is_some() {
            return Err(Error::DuplicateRow {
                date: date.to_string(),
                region,
            });
        }
    }

    let first = rows.values().filter_map(|m| m.keys().next()).min().copied();
    let last = rows.values().filter_map(|m| m.keys().next_back()).max().copied();
    let (first, last) = match (first, last) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::EmptyInput),
    };
    let dates: Vec<NaiveDate> = first.iter_days().take_while(|d| *d <= last).collect();

    let mut keys = Vec::new();
    let mut columns: Vec<Vec<u64>> = Vec::new();
    for (region, by_date) in &rows {
        for &(feature, _) in &feature_cols {
            let fi = feature.index();
            if by_date.values().all(|c| c[fi].is_none()) {
                continue;
            }
            let mut last_value = 0;
            let column = dates
                .iter()
                .map(|date| {
                    if let Some(v) = by_date.get(date).and_then(|c| c[fi]) {
                        last_value = v;
                    }
                    last_value
                })
                .collect();
            keys.push(SeriesKey::new(region.clone(), feature, keys.len()));
            columns.push(column);
        }
    }
    if keys.is_empty() {
        return Err(Error::EmptyInput);
    }

    let values = Array2::from_shape_fn((dates.len(), keys.len()), |(t, d)| columns[d][t]);
    Ok(CumulativePanel {
        dates,
        keys,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iso_mapping() -> ColumnMapping {
        ColumnMapping {
            date: "date".into(),
            region: "region".into(),
            cases: "cases".into(),
            deaths: "deaths".into(),
            recovered: "recovered".into(),
            date_format: None,
        }
    }

    #[test]
    fn parses_well_formed_file() {
        let raw = "date,region,cases,deaths,recovered\n\
                   2020-03-20,AN,1,0,0\n2020-03-20,MD,5,1,0\n\
                   2020-03-21,AN,2,0,1\n2020-03-21,MD,9,2,1\n\
                   2020-03-22,AN,4,1,1\n2020-03-22,MD,12,2,3\n";
        let panel = parse_cumulative_csv(raw.as_bytes(), &iso_mapping()).unwrap();
        assert_eq!(panel.values.dim(), (3, 6));
        assert_eq!(panel.keys[3].region, "MD");
        assert_eq!(panel.keys[3].feature, Feature::Cases);
        assert_eq!(panel.values.column(3).to_vec(), vec![5, 9, 12]);
        for (i, k) in panel.keys.iter().enumerate() {
            assert_eq!(k.flat_index, i);
        }
    }

    #[test]
    fn forward_fills_missing_dates() {
        let raw = "date,region,cases,deaths,recovered\n\
                   2020-03-20,AN,1,0,0\n2020-03-20,MD,5,1,0\n\
                   2020-03-21,AN,2,0,1\n\
                   2020-03-22,AN,4,1,1\n2020-03-22,MD,12,2,3\n";
        let panel = parse_cumulative_csv(raw.as_bytes(), &iso_mapping()).unwrap();
        assert_eq!(panel.values.column(3).to_vec(), vec![5, 5, 12]);
    }

    #[test]
    fn bad_number_reports_line() {
        let raw = "date,region,cases,deaths,recovered\n2020-03-20,AN,1,0,0\n2020-03-21,AN,abc,0,0\n";
        match parse_cumulative_csv(raw.as_bytes(), &iso_mapping()) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("abc"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_arity_and_bad_date_are_errors() {
        let raw = "date,region,cases,deaths,recovered\n2020-03-20,AN,1,0\n";
        assert!(matches!(
            parse_cumulative_csv(raw.as_bytes(), &iso_mapping()),
            Err(Error::Parse { line: 2, .. })
        ));
        let raw = "date,region,cases,deaths,recovered\n2020-13-45,AN,1,0,0\n";
        assert!(matches!(
            parse_cumulative_csv(raw.as_bytes(), &iso_mapping()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn empty_and_duplicate_inputs() {
        assert!(matches!(
            parse_cumulative_csv("".as_bytes(), &iso_mapping()),
            Err(Error::EmptyInput)
        ));
        assert!(matches!(
            parse_cumulative_csv("date,region,cases,deaths,recovered\n".as_bytes(), &iso_mapping()),
            Err(Error::EmptyInput)
        ));
        let raw = "date,region,cases,deaths,recovered\n2020-03-20,AN,1,0,0\n2020-03-20,AN,2,0,0\n";
        match parse_cumulative_csv(raw.as_bytes(), &iso_mapping()) {
            Err(Error::DuplicateRow { date, region }) => {
                assert_eq!(date, "2020-03-20");
                assert_eq!(region, "AN");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn drops_absent_columns_and_empty_series() {
        let raw = "date,region,cases,deaths\n2020-03-20,AN,1,\n2020-03-21,AN,2,\n2020-03-21,MD,3,1\n";
        let panel = parse_cumulative_csv(raw.as_bytes(), &iso_mapping()).unwrap();
        let names: Vec<(String, Feature)> =
            panel.keys.iter().map(|k| (k.region.clone(), k.feature)).collect();
        assert_eq!(
            names,
            vec![
                ("AN".to_string(), Feature::Cases),
                ("MD".to_string(), Feature::Cases),
                ("MD".to_string(), Feature::Deaths)
            ]
        );
        assert_eq!(panel.values.column(1).to_vec(), vec![0, 3]);
    }

    #[test]
    fn default_mapping_reads_day_month_year() {
        let raw = "CCAA,FECHA,CASOS,Hospitalizados,UCI,Fallecidos,Recuperados\n\
                   AN,20/3/2020,10,1,0,1,0\nAN,21/3/2020,12,1,0,1,2\n";
        let panel = parse_cumulative_csv(raw.as_bytes(), &ColumnMapping::default()).unwrap();
        assert_eq!(panel.dates[0], NaiveDate::from_ymd_opt(2020, 3, 20).unwrap());
        assert_eq!(panel.values.dim(), (2, 3));
    }
}
