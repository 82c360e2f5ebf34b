//! Synthetic scorecard files with a known generating model, for tests and
//! demos when the public dataset is not at hand.
//!
//! `net_price = 0.6·COSTT4_A − 1500·[CONTROL = 3] + 0.2·TUITIONFEE_IN + ε`,
//! `ε ~ N(0, noise_sd²)`. Public rows (CONTROL = 1) carry the label in
//! NPT4_PUB, the rest in NPT4_PRIV.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::ingest::YearFile;
use crate::rng;

#[derive(Clone, Debug)]
pub struct SynthConfig {
    pub rows: usize,
    pub years: Vec<i64>,
    pub noise_sd: f64,
    pub seed: u64,
    /// Fraction of TUITIONFEE_OUT cells written as a missingness sentinel.
    pub missing_rate: f64,
    /// Fraction of rows with neither net-price column populated.
    pub unlabeled_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            rows: 5000,
            years: vec![2015, 2016],
            noise_sd: 500.0,
            seed: 42,
            missing_rate: 0.02,
            unlabeled_rate: 0.0,
        }
    }
}

pub const HEADER: &str = "UNITID,CONTROL,COSTT4_A,TUITIONFEE_IN,TUITIONFEE_OUT,NPT4_PUB,NPT4_PRIV";

#[derive(Clone, Debug, PartialEq)]
pub struct SynthRow {
    pub unitid: u64,
    pub control: u8,
    pub cost: f64,
    pub tuition_in: f64,
    pub tuition_out: Option<f64>,
    pub net_price: Option<f64>,
}

pub fn net_price_mean(cost: f64, control: u8, tuition_in: f64) -> f64 {
    0.6 * cost - 1500.0 * f64::from(control == 3) + 0.2 * tuition_in
}

pub fn generate(cfg: &SynthConfig) -> Vec<SynthRow> {
    let mut r = rng::seeded(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise_sd).expect("finite noise sd");
    (0..cfg.rows)
        .map(|i| {
            let u: f64 = r.random();
            let control = if u < 0.35 {
                1
            } else if u < 0.75 {
                2
            } else {
                3
            };
            let cost = r.random_range(10_000.0..60_000.0f64).round();
            let tuition_in = match control {
                1 => r.random_range(2_000.0..12_000.0f64),
                _ => r.random_range(8_000.0..40_000.0f64),
            }
            .round();
            let tuition_out = (r.random::<f64>() >= cfg.missing_rate).then(|| {
                if control == 1 {
                    (tuition_in + r.random_range(5_000.0..15_000.0f64)).round()
                } else {
                    tuition_in
                }
            });
            let price = net_price_mean(cost, control, tuition_in) + noise.sample(&mut r);
            let net_price = (r.random::<f64>() >= cfg.unlabeled_rate).then_some(price.round().max(0.0));
            SynthRow {
                unitid: 100_000 + i as u64,
                control,
                cost,
                tuition_in,
                tuition_out,
                net_price,
            }
        })
        .collect()
}

fn fmt_opt(v: Option<f64>, sentinel: &str) -> String {
    v.map_or_else(|| sentinel.to_owned(), |x| format!("{x}"))
}

/// Writes one CSV per configured year (rows dealt round-robin) and returns
/// the file list for a run spec.
pub fn write_files(dir: &Path, cfg: &SynthConfig) -> Result<Vec<YearFile>> {
    if cfg.years.is_empty() {
        return Err(Error::Config("synthetic generator needs at least one year".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let rows = generate(cfg);
    let mut out = Vec::new();
    for (y, &year) in cfg.years.iter().enumerate() {
        let path = dir.join(format!("scorecard_{year}.csv"));
        let mut body = String::from(HEADER);
        body.push('\n');
        for (i, row) in rows.iter().enumerate() {
            if i % cfg.years.len() != y {
                continue;
            }
            let (public, private) = match (row.control, row.net_price) {
                (1, p) => (fmt_opt(p, "NULL"), "NULL".to_owned()),
                (_, p) => ("NULL".to_owned(), fmt_opt(p, "PrivacySuppressed")),
            };
            let tuition_out = fmt_opt(
                row.tuition_out,
                if i % 2 == 0 { "PrivacySuppressed" } else { "NULL" },
            );
            body.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                row.unitid, row.control, row.cost, row.tuition_in, tuition_out, public, private
            ));
        }
        let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        f.write_all(body.as_bytes()).map_err(|e| Error::io(&path, e))?;
        out.push(YearFile { path, year });
    }
    Ok(out)
}
