//! Raw event data model, CSV ingestion, and the impression-conversion join.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

pub const IMPRESSION_HEADER: &str = "user_id,publisher_id,advertiser_id,timestamp,interaction";
pub const CONVERSION_HEADER: &str = "user_id,advertiser_id,timestamp,value";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interaction {
    View,
    Click,
}

impl Interaction {
    fn parse(s: &str, line: usize) -> Result<Self> {
        match s {
            "view" => Ok(Interaction::View),
            "click" => Ok(Interaction::Click),
            other => Err(Error::Parse {
                line,
                message: format!("unknown interaction {other:?}"),
            }),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Interaction::View => "view",
            Interaction::Click => "click",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpressionEvent {
    pub user_id: String,
    pub publisher_id: String,
    pub advertiser_id: String,
    pub timestamp: u64,
    pub interaction: Interaction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConversionEvent {
    pub user_id: String,
    pub advertiser_id: String,
    pub timestamp: u64,
    pub value: f64,
}

/// One joined (impression, conversion) pair: same user and advertiser,
/// impression strictly before the conversion.
#[derive(Debug, Clone, PartialEq)]
pub struct Touchpoint {
    pub conversion: ConversionEvent,
    pub impression: ImpressionEvent,
    /// Index of the conversion in the input slice, so attribution can group
    /// touchpoints per conversion instance even when rows are duplicated.
    pub conversion_index: usize,
}

fn parse_timestamp(s: &str, line: usize) -> Result<u64> {
    let v: i64 = s.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid timestamp {s:?}"),
    })?;
    if v < 0 {
        return Err(Error::Validation {
            line,
            message: format!("negative timestamp {v}"),
        });
    }
    Ok(v as u64)
}

fn check_nonempty(s: &str, field: &str, line: usize) -> Result<String> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Validation {
            line,
            message: format!("empty {field}"),
        });
    }
    Ok(s.to_string())
}

fn read_lines(path: &Path, expected_header: &str) -> Result<Vec<(usize, String)>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    let mut lines = reader.lines().enumerate();
    match lines.next() {
        Some((_, Ok(header))) if header.trim() == expected_header => {}
        Some((_, Ok(header))) => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header {expected_header:?}, got {header:?}"),
            })
        }
        Some((_, Err(e))) => return Err(e.into()),
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "missing header".to_string(),
            })
        }
    }
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push((i + 1, line));
    }
    Ok(out)
}

pub fn load_impressions(path: impl AsRef<Path>) -> Result<Vec<ImpressionEvent>> {
    let mut events = Vec::new();
    for (line, row) in read_lines(path.as_ref(), IMPRESSION_HEADER)? {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                line,
                message: format!("expected 5 fields, got {}", fields.len()),
            });
        }
        events.push(ImpressionEvent {
            user_id: check_nonempty(fields[0], "user_id", line)?,
            publisher_id: check_nonempty(fields[1], "publisher_id", line)?,
            advertiser_id: check_nonempty(fields[2], "advertiser_id", line)?,
            timestamp: parse_timestamp(fields[3], line)?,
            interaction: Interaction::parse(fields[4].trim(), line)?,
        });
    }
    Ok(events)
}

pub fn load_conversions(path: impl AsRef<Path>) -> Result<Vec<ConversionEvent>> {
    let mut events = Vec::new();
    for (line, row) in read_lines(path.as_ref(), CONVERSION_HEADER)? {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line,
                message: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let value: f64 = fields[3].trim().parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid value {:?}", fields[3]),
        })?;
        if !value.is_finite() || value < 0.0 {
            return Err(Error::Validation {
                line,
                message: format!("negative or non-finite value {value}"),
            });
        }
        events.push(ConversionEvent {
            user_id: check_nonempty(fields[0], "user_id", line)?,
            advertiser_id: check_nonempty(fields[1], "advertiser_id", line)?,
            timestamp: parse_timestamp(fields[2], line)?,
            value,
        });
    }
    Ok(events)
}

/// Join impressions and conversions on user id, advertiser id, and
/// `impression.timestamp < conversion.timestamp`.
///
/// The output order is canonical (conversion timestamp, then impression
/// timestamp, then identifiers), so permuting either input leaves the
/// result unchanged up to conversion-instance indices.
pub fn join(impressions: &[ImpressionEvent], conversions: &[ConversionEvent]) -> Vec<Touchpoint> {
    let mut out = Vec::new();
    for (ci, conv) in conversions.iter().enumerate() {
        for imp in impressions {
            if imp.user_id == conv.user_id
                && imp.advertiser_id == conv.advertiser_id
                && imp.timestamp < conv.timestamp
            {
                out.push(Touchpoint {
                    conversion: conv.clone(),
                    impression: imp.clone(),
                    conversion_index: ci,
                });
            }
        }
    }
    out.sort_by(|a, b| {
        (
            a.conversion.timestamp,
            &a.conversion.user_id,
            &a.conversion.advertiser_id,
            a.impression.timestamp,
            &a.impression.publisher_id,
            a.conversion_index,
        )
            .cmp(&(
                b.conversion.timestamp,
                &b.conversion.user_id,
                &b.conversion.advertiser_id,
                b.impression.timestamp,
                &b.impression.publisher_id,
                b.conversion_index,
            ))
    });
    out
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// The worked impression table: two users, two publishers, one ad.
    pub fn table2_impressions() -> Vec<ImpressionEvent> {
        let mk = |u: &str, p: &str, t: u64| ImpressionEvent {
            user_id: u.into(),
            publisher_id: p.into(),
            advertiser_id: "Ad-1".into(),
            timestamp: t,
            interaction: Interaction::View,
        };
        vec![
            mk("u1", "P-1", 1),
            mk("u1", "P-1", 11),
            mk("u2", "P-1", 15),
            mk("u2", "P-2", 25),
        ]
    }

    /// The worked conversion table: u1 at t=10, u2 at t=20 and t=30.
    pub fn table3_conversions() -> Vec<ConversionEvent> {
        let mk = |u: &str, t: u64| ConversionEvent {
            user_id: u.into(),
            advertiser_id: "Ad-1".into(),
            timestamp: t,
            value: 1.0,
        };
        vec![mk("u1", 10), mk("u2", 20), mk("u2", 30)]
    }
}
