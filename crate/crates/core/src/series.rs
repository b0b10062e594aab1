//! Input series: a timestamped target column plus covariate columns.
//!
//! Timestamps are carried for reporting only. Every computation downstream
//! is positional.

use std::cmp::Ordering;
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{EwsError, Result};

/// Row label of a series: an integer period or an ISO calendar date.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Timestamp {
    Period(i64),
    Date(String),
}

impl Timestamp {
    /// Parses an integer period or an ISO `YYYY-MM-DD` date (an optional
    /// time suffix is kept verbatim).
    pub fn parse(raw: &str) -> Option<Self> {
        let raw = raw.trim();
        if let Ok(p) = raw.parse::<i64>() {
            return Some(Timestamp::Period(p));
        }
        let b = raw.as_bytes();
        let iso = b.len() >= 10
            && b[..4].iter().all(u8::is_ascii_digit)
            && b[4] == b'-'
            && b[5..7].iter().all(u8::is_ascii_digit)
            && b[7] == b'-'
            && b[8..10].iter().all(u8::is_ascii_digit);
        iso.then(|| Timestamp::Date(raw.to_string()))
    }

    fn partial_cmp_same_kind(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Timestamp::Period(a), Timestamp::Period(b)) => Some(a.cmp(b)),
            // ISO dates order lexicographically.
            (Timestamp::Date(a), Timestamp::Date(b)) => Some(a.cmp(b)),
            _ => None,
        }
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Timestamp::Period(p) => write!(f, "{p}"),
            Timestamp::Date(d) => f.write_str(d),
        }
    }
}

/// Target series `Y_t` together with `d` covariate columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFrame {
    timestamps: Vec<Timestamp>,
    target_name: String,
    target: Vec<f64>,
    covariate_names: Vec<String>,
    covariates: Vec<Vec<f64>>,
}

impl SeriesFrame {
    /// Builds a frame, checking the length, ordering and finiteness invariants.
    pub fn new(
        timestamps: Vec<Timestamp>,
        target_name: impl Into<String>,
        target: Vec<f64>,
        covariate_names: Vec<String>,
        covariates: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let len = target.len();
        if len == 0 {
            return Err(EwsError::InvalidConfig(
                "series must have at least one row".into(),
            ));
        }
        if timestamps.len() != len {
            return Err(EwsError::DimensionMismatch(format!(
                "{} timestamps for {len} target values",
                timestamps.len()
            )));
        }
        if covariate_names.len() != covariates.len() {
            return Err(EwsError::DimensionMismatch(format!(
                "{} covariate names for {} covariate columns",
                covariate_names.len(),
                covariates.len()
            )));
        }
        if let Some(bad) = covariates.iter().position(|c| c.len() != len) {
            return Err(EwsError::DimensionMismatch(format!(
                "covariate {} has length {}, target has {len}",
                covariate_names[bad],
                covariates[bad].len()
            )));
        }
        for (i, pair) in timestamps.windows(2).enumerate() {
            if pair[0].partial_cmp_same_kind(&pair[1]) != Some(Ordering::Less) {
                return Err(EwsError::InvalidConfig(format!(
                    "timestamps not strictly increasing at position {}",
                    i + 1
                )));
            }
        }
        let all_finite = target
            .iter()
            .chain(covariates.iter().flatten())
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(EwsError::InvalidConfig(
                "series contains non-finite values".into(),
            ));
        }
        Ok(Self {
            timestamps,
            target_name: target_name.into(),
            target,
            covariate_names,
            covariates,
        })
    }

    /// Frame indexed by integer periods `0..len`.
    pub fn from_periods(
        target: Vec<f64>,
        covariate_names: Vec<String>,
        covariates: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let timestamps = (0..target.len() as i64).map(Timestamp::Period).collect();
        Self::new(timestamps, "y", target, covariate_names, covariates)
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        &self.timestamps
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    /// Covariates column-major: `covariates()[j][t]`.
    pub fn covariates(&self) -> &[Vec<f64>] {
        &self.covariates
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    /// Number of covariate columns `d`.
    pub fn n_covariates(&self) -> usize {
        self.covariates.len()
    }

    /// Replaces every column by its log-returns; the first row is consumed.
    pub fn to_log_returns(&self) -> Result<Self> {
        if self.len() < 2 {
            return Err(EwsError::SeriesTooShort {
                len: self.len(),
                delta: 1,
            });
        }
        let target = log_returns(&self.target)?;
        let covariates = self
            .covariates
            .iter()
            .map(|c| log_returns(c))
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            self.timestamps[1..].to_vec(),
            self.target_name.clone(),
            target,
            self.covariate_names.clone(),
            covariates,
        )
    }

    /// Reads the CSV layout: timestamp, target, covariates..., header required.
    ///
    /// Rows with any missing field (empty, `NA`, `NaN`, `null`) are dropped.
    /// Returns the frame and the number of dropped rows.
    pub fn read_csv<R: Read>(reader: R) -> Result<(Self, usize)> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| EwsError::Parse {
                row: 1,
                message: e.to_string(),
            })?
            .clone();
        if header.len() < 2 {
            return Err(EwsError::Parse {
                row: 1,
                message: "need at least a timestamp and a target column".into(),
            });
        }
        let target_name = header[1].trim().to_string();
        let covariate_names: Vec<String> = header
            .iter()
            .skip(2)
            .map(|h| h.trim().to_string())
            .collect();
        let d = covariate_names.len();

        let mut timestamps = Vec::new();
        let mut target = Vec::new();
        let mut covariates = vec![Vec::new(); d];
        let mut dropped = 0;
        for (i, record) in rdr.records().enumerate() {
            let row = i + 2;
            let record = record.map_err(|e| EwsError::Parse {
                row,
                message: e.to_string(),
            })?;
            if record.iter().skip(1).any(is_missing) {
                dropped += 1;
                continue;
            }
            let ts = Timestamp::parse(&record[0]).ok_or_else(|| EwsError::Parse {
                row,
                message: format!("bad timestamp {:?}", &record[0]),
            })?;
            if let Some(prev) = timestamps.last() {
                if ts.partial_cmp_same_kind(prev) != Some(Ordering::Greater) {
                    return Err(EwsError::Parse {
                        row,
                        message: format!("timestamp {ts} does not increase"),
                    });
                }
            }
            let mut values = record.iter().skip(1).map(|field| {
                field
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| EwsError::Parse {
                        row,
                        message: format!("bad number {field:?}"),
                    })
            });
            timestamps.push(ts);
            target.push(values.next().expect("record width checked by reader")?);
            for col in covariates.iter_mut() {
                col.push(values.next().expect("record width checked by reader")?);
            }
        }
        if target.is_empty() {
            return Err(EwsError::Parse {
                row: 2,
                message: "no complete rows".into(),
            });
        }
        let frame = Self::new(timestamps, target_name, target, covariate_names, covariates)
            .map_err(|e| EwsError::Parse {
                row: 0,
                message: e.to_string(),
            })?;
        Ok((frame, dropped))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string(), self.target_name.clone()];
        header.extend(self.covariate_names.iter().cloned());
        wtr.write_record(&header)?;
        for t in 0..self.len() {
            let mut row = vec![self.timestamps[t].to_string(), self.target[t].to_string()];
            row.extend(self.covariates.iter().map(|c| c[t].to_string()));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn is_missing(field: &str) -> bool {
    let f = field.trim();
    f.is_empty()
        || f.eq_ignore_ascii_case("na")
        || f.eq_ignore_ascii_case("nan")
        || f.eq_ignore_ascii_case("null")
}

/// Log-returns `ln(p[i+1] / p[i])`.
pub fn log_returns(prices: &[f64]) -> Result<Vec<f64>> {
    if let Some((index, &value)) = prices.iter().enumerate().find(|(_, p)| !(**p > 0.0)) {
        return Err(EwsError::NonPositivePrice { index, value });
    }
    Ok(prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}
