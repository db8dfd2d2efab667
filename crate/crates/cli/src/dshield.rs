//! Attack-report logs turned into a weighted blacklist.
//!
//! Each line is `timestamp,contributor_id,src_ip,dst_ip`. The timestamp's
//! first ten characters are its `YYYY-MM-DD` day. A source's weight is the
//! number of matching reports naming it.

use std::collections::BTreeMap;
use std::path::Path;

use lcpfilter_core::{Address, ListKind, WeightedAddressSet};

use crate::formats::FormatError;

/// Malformed lines reported individually before the rest are only counted.
pub const WARNING_CAP: usize = 10;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReportFilter {
    /// `YYYY-MM-DD`.
    pub day: Option<String>,
    pub contributor: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReportLog {
    pub blacklist: WeightedAddressSet,
    /// Well-formed lines passing the filter.
    pub accepted: u64,
    pub malformed: u64,
    /// The first [`WARNING_CAP`] malformed lines as `line: reason`.
    pub warnings: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("no report matched ({malformed} malformed lines)")]
    Empty { malformed: u64 },
}

pub fn parse_report_log(text: &str, filter: &ReportFilter) -> Result<ReportLog, LogError> {
    let mut counts: BTreeMap<Address, u64> = BTreeMap::new();
    let mut accepted = 0;
    let mut malformed = 0;
    let mut warnings = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = match fields.as_slice() {
            [ts, contributor, src, _dst] if ts.len() >= 10 && ts.is_char_boundary(10) => src
                .parse::<Address>()
                .map(|ip| (&ts[..10], *contributor, ip))
                .map_err(|_| "bad source address"),
            [_, _, _, _] => Err("bad timestamp"),
            _ => Err("expected 4 fields"),
        };
        let (day, contributor, ip) = match parsed {
            Ok(v) => v,
            Err(reason) => {
                malformed += 1;
                if warnings.len() < WARNING_CAP {
                    warnings.push(format!("{}: {reason}", i + 1));
                }
                continue;
            }
        };
        if filter.day.as_deref().is_some_and(|d| d != day)
            || filter.contributor.as_deref().is_some_and(|c| c != contributor)
        {
            continue;
        }
        accepted += 1;
        *counts.entry(ip).or_insert(0) += 1;
    }
    if counts.is_empty() {
        return Err(LogError::Empty { malformed });
    }
    let mut blacklist = WeightedAddressSet::new(ListKind::Bad);
    for (ip, n) in counts {
        blacklist.set(ip, n);
    }
    Ok(ReportLog {
        blacklist,
        accepted,
        malformed,
        warnings,
    })
}

pub fn read_report_log(path: &Path, filter: &ReportFilter) -> Result<ReportLog, LogError> {
    let text = std::fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_report_log(&text, filter)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_reports() {
        let log = "2024-03-01T10:00:00,7,1.2.3.4,9.9.9.9\n2024-03-01T11:00:00,7,1.2.3.4,9.9.9.9\n2024-03-01 12:00,8,1.2.3.4,9.9.9.9\n";
        let r = parse_report_log(log, &ReportFilter::default()).unwrap();
        assert_eq!(r.blacklist.get("1.2.3.4".parse().unwrap()), Some(3));
        assert_eq!(r.accepted, 3);
    }

    #[test]
    fn contributor_and_day_filters() {
        let log = "2024-03-01T10:00:00,7,1.2.3.4,9.9.9.9\n2024-03-01T10:00:00,8,5.6.7.8,9.9.9.9\n2024-03-02T10:00:00,7,5.5.5.5,9.9.9.9\n";
        let f = ReportFilter {
            day: Some("2024-03-01".into()),
            contributor: Some("7".into()),
        };
        let r = parse_report_log(log, &f).unwrap();
        assert_eq!(
            r.blacklist.addresses().collect::<Vec<_>>(),
            ["1.2.3.4".parse().unwrap()]
        );
    }

    #[test]
    fn malformed_lines_counted_with_cap() {
        let mut log = String::from("2024-03-01T10:00:00,7,1.2.3.4,9.9.9.9\n");
        for _ in 0..25 {
            log += "garbage\n";
        }
        log += "2024-03-01T10:00:00,7,1.2.3.999,9.9.9.9\n";
        let r = parse_report_log(&log, &ReportFilter::default()).unwrap();
        assert_eq!(r.malformed, 26);
        assert_eq!(r.warnings.len(), WARNING_CAP);
    }

    #[test]
    fn nothing_valid() {
        assert!(matches!(
            parse_report_log("x\n", &ReportFilter::default()),
            Err(LogError::Empty { malformed: 1 })
        ));
    }
}
