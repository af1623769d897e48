#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

pub const REGIONS: [&str; 19] = [
    "AN", "AR", "AS", "IB", "CN", "CB", "CM", "CL", "CT", "CE", "VC", "EX", "GA", "MD", "ML", "MC", "NC", "PV", "RI",
];

/// Cumulative counts in the ISCIII column layout: an epidemic wave per
/// region with weekly reporting dips, Poisson noise and a few downward
/// corrections.
pub fn synthetic_cumulative_csv(n_regions: usize, days: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = NaiveDate::from_ymd_opt(2020, 2, 20).unwrap();
    let mut out = String::from("CCAA,FECHA,CASOS,Fallecidos,Recuperados\n");
    for (r, region) in REGIONS.iter().take(n_regions).enumerate() {
        let size = 40.0 + 25.0 * r as f64;
        let peak = 35.0 + (r % 5) as f64 * 4.0;
        let mut totals = [0u64; 3];
        for t in 0..days {
            let wave = (-((t as f64 - peak) / 14.0).powi(2)).exp();
            let weekly = if t % 7 == 5 || t % 7 == 6 { 0.6 } else { 1.0 };
            let rates = [size * wave * weekly + 1.0, 0.08 * size * wave + 0.2, 0.4 * size * wave + 0.5];
            for (f, rate) in rates.iter().enumerate() {
                totals[f] += Poisson::new(*rate).unwrap().sample(&mut rng) as u64;
            }
            let mut reported = totals;
            if t == days * 2 / 3 && r % 6 == 0 {
                reported[0] = reported[0].saturating_sub(15);
            }
            let date = start + chrono::Days::new(t as u64);
            out.push_str(&format!(
                "{region},{},{},{},{}\n",
                date.format("%Y-%m-%d"),
                reported[0],
                reported[1],
                reported[2]
            ));
        }
    }
    out
}

pub fn countcast(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_countcast"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

/// Writes the raw data and a config file; returns the config path.
pub fn setup(dir: &Path, n_regions: usize, days: usize, extra_config: &str) -> PathBuf {
    std::fs::write(dir.join("raw.csv"), synthetic_cumulative_csv(n_regions, days, 7)).unwrap();
    let config = dir.join("run.cfg");
    std::fs::write(&config, format!("input = raw.csv\n{extra_config}")).unwrap();
    config
}

/// Every regular file under `root`, relative path first, sorted.
pub fn snapshot(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(dir: &Path, root: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(&path, root, out);
            } else {
                out.push((path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}
