#![allow(dead_code)]

use chrono::NaiveDate;
use countcast_core::panel::{CountPanel, Feature, SeriesKey};
use ndarray::Array2;

pub fn start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 3, 20).unwrap()
}

/// Noiseless weekly pattern: 2 regions x 3 features, distinct level and phase
/// per series.
pub fn periodic_panel(t: usize) -> CountPanel {
    let bases = [40.0, 8.0, 25.0, 120.0, 15.0, 60.0];
    let keys: Vec<SeriesKey> = ["AA", "BB"]
        .iter()
        .flat_map(|r| Feature::ALL.iter().map(move |f| (r.to_string(), *f)))
        .enumerate()
        .map(|(i, (r, f))| SeriesKey::new(r, f, i))
        .collect();
    let values = Array2::from_shape_fn((t, keys.len()), |(day, d)| {
        let phase = d as f64 * 0.9;
        let angle = 2.0 * std::f64::consts::PI * day as f64 / 7.0 + phase;
        (bases[d] * (1.0 + 0.7 * angle.sin())).round() as u64
    });
    CountPanel {
        dates: (0..t).map(|i| start_date() + chrono::Days::new(i as u64)).collect(),
        keys,
        values,
    }
}
