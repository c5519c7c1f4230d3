//! Cost measurements for the signing schemes and a model of the
//! endorsement flow of a permissioned ledger.

pub mod endorse;
pub mod measure;

use std::io;
use std::str::FromStr;

use mems_core::baselines::Scheme;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use measure::{bench_agg, bench_grid, bench_messages, bench_sign, bench_verify, GridSpec};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid benchmark request: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] mems_core::Error),
    #[error(transparent)]
    Coordinator(#[from] mems_ptp::PtpError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, BenchError>;

/// Minimum repetitions per measurement.
pub const MIN_REPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Sign,
    Verify,
    Agg,
    /// Message count of one complete session; no timing.
    Messages,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchRecord {
    #[serde(serialize_with = "ser_scheme", deserialize_with = "de_scheme")]
    pub scheme: Scheme,
    pub n: usize,
    pub op: Op,
    pub reps: usize,
    pub mean_ns: u64,
    pub median_ns: u64,
    pub exp_count: u64,
    pub msg_count: u64,
}

fn ser_scheme<S: Serializer>(s: &Scheme, ser: S) -> std::result::Result<S::Ok, S::Error> {
    ser.serialize_str(s.name())
}

fn de_scheme<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<Scheme, D::Error> {
    let s = String::deserialize(de)?;
    Scheme::from_str(&s).map_err(serde::de::Error::custom)
}

pub const CSV_HEADER: &str = "scheme,n,op,reps,mean_ns,median_ns,exp_count,msg_count";

pub fn write_csv<W: io::Write>(records: &[BenchRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if records.is_empty() {
        w.write_record(CSV_HEADER.split(','))?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: io::Read>(input: R) -> Result<Vec<BenchRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header.join(",") != CSV_HEADER {
        return Err(BenchError::Invalid(format!(
            "unexpected header {:?}",
            header.join(",")
        )));
    }
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// `(mean, median)` in whole nanoseconds.
pub(crate) fn summarize(samples: &[u64]) -> (u64, u64) {
    use statrs::statistics::{Data, Median, Statistics};
    if samples.is_empty() {
        return (0, 0);
    }
    let xs: Vec<f64> = samples.iter().map(|&s| s as f64).collect();
    let mean = xs.iter().mean();
    let median = Data::new(xs).median();
    (mean.round() as u64, median.round() as u64)
}
