//! Daily pollutant profiles in the `date,h00..h23` CSV layout.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::curve::{resample, SampledCurve, TimeGrid};
use crate::error::{Error, Result};

pub const HOURS: usize = 24;
/// Days with more missing hours than this are skipped.
pub const MAX_MISSING: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[allow(clippy::upper_case_acronyms)]
pub enum Pollutant {
    CO,
    NO,
    NO2,
    O3,
    SO2,
}

impl Pollutant {
    pub const ALL: [Pollutant; 5] = [Pollutant::CO, Pollutant::NO, Pollutant::NO2, Pollutant::O3, Pollutant::SO2];
}

impl fmt::Display for Pollutant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Pollutant::CO => "CO",
            Pollutant::NO => "NO",
            Pollutant::NO2 => "NO2",
            Pollutant::O3 => "O3",
            Pollutant::SO2 => "SO2",
        };
        f.write_str(s)
    }
}

impl FromStr for Pollutant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Pollutant::ALL
            .into_iter()
            .find(|p| p.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown pollutant `{s}` (expected CO, NO, NO2, O3 or SO2)")))
    }
}

/// One day of hourly means, gaps already filled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyProfileRecord {
    pub date: NaiveDate,
    pub pollutant: Pollutant,
    pub values: [f64; HOURS],
    /// Hours whose value was interpolated.
    pub filled: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub records: Vec<DailyProfileRecord>,
    pub warnings: Vec<String>,
}

fn header() -> Vec<String> {
    std::iter::once("date".to_string())
        .chain((0..HOURS).map(|h| format!("h{h:02}")))
        .collect()
}

fn is_missing(cell: &str) -> bool {
    matches!(cell.to_ascii_lowercase().as_str(), "" | "na" | "nan" | "null")
}

/// Linear fill between the nearest observed hours; hours before the first
/// or after the last observation copy it.
fn fill_gaps(cells: &[Option<f64>; HOURS]) -> ([f64; HOURS], Vec<usize>) {
    let known: Vec<usize> = (0..HOURS).filter(|&h| cells[h].is_some()).collect();
    let mut out = [0.0; HOURS];
    let mut filled = Vec::new();
    for h in 0..HOURS {
        if let Some(v) = cells[h] {
            out[h] = v;
            continue;
        }
        filled.push(h);
        let left = known.iter().rev().find(|&&k| k < h);
        let right = known.iter().find(|&&k| k > h);
        out[h] = match (left, right) {
            (Some(&l), Some(&r)) => {
                let (a, b) = (cells[l].unwrap(), cells[r].unwrap());
                a + (b - a) * (h - l) as f64 / (r - l) as f64
            }
            (Some(&l), None) => cells[l].unwrap(),
            (None, Some(&r)) => cells[r].unwrap(),
            (None, None) => f64::NAN,
        };
    }
    (out, filled)
}

/// Parses the CSV layout from any reader. Rows come back in date order.
pub fn parse_csv<R: Read>(reader: R, pollutant: Pollutant) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = rdr.records();
    let head = rows
        .next()
        .ok_or_else(|| Error::Parse {
            line: 1,
            message: "empty file; expected header date,h00..h23".into(),
        })??;
    let got: Vec<String> = head.iter().map(|s| s.to_ascii_lowercase()).collect();
    if got != header() {
        return Err(Error::Parse {
            line: 1,
            message: "header must be date,h00,h01,...,h23".into(),
        });
    }

    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for row in rows {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.len() == 1 && row[0].is_empty() {
            continue;
        }
        if row.len() != HOURS + 1 {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", HOURS + 1, row.len()),
            });
        }
        let date = NaiveDate::parse_from_str(&row[0], "%Y-%m-%d").map_err(|e| Error::Parse {
            line,
            message: format!("bad date `{}`: {e}", &row[0]),
        })?;
        let mut cells = [None; HOURS];
        for h in 0..HOURS {
            let cell = &row[h + 1];
            if is_missing(cell) {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line,
                message: format!("hour {h:02}: `{cell}` is not a number"),
            })?;
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Parse {
                    line,
                    message: format!("hour {h:02}: concentration {v} must be finite and non-negative"),
                });
            }
            cells[h] = Some(v);
        }
        let missing = cells.iter().filter(|c| c.is_none()).count();
        if missing > MAX_MISSING {
            let msg = format!("line {line}: {date} has {missing} missing hours (limit {MAX_MISSING}); skipped");
            log::warn!("{msg}");
            warnings.push(msg);
            continue;
        }
        let (values, filled) = fill_gaps(&cells);
        records.push(DailyProfileRecord {
            date,
            pollutant,
            values,
            filled,
        });
    }
    records.sort_by_key(|r| r.date);
    Ok(Ingested { records, warnings })
}

pub fn ingest_csv(path: &Path, pollutant: Pollutant) -> Result<Ingested> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    parse_csv(std::io::BufReader::new(file), pollutant)
}

/// Writes records in the ingestion layout; values use the shortest
/// representation that parses back to the same number.
pub fn write_csv<W: Write>(records: &[DailyProfileRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header())?;
    for r in records {
        let mut row = vec![r.date.format("%Y-%m-%d").to_string()];
        row.extend(r.values.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// The day as a curve on `grid`, hour `k` sitting at `t = k / 23`.
pub fn profile_curve(record: &DailyProfileRecord, grid: TimeGrid) -> Result<SampledCurve> {
    let hourly = SampledCurve::new(TimeGrid::new(HOURS)?, record.values.to_vec())?;
    Ok(resample(&hourly, grid))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(date: &str, cells: &[String]) -> String {
        format!("{date},{}\n", cells.join(","))
    }

    fn file(rows: &[String]) -> String {
        let mut s = header().join(",") + "\n";
        for r in rows {
            s.push_str(r);
        }
        s
    }

    fn full_day(v: impl Fn(usize) -> f64) -> Vec<String> {
        (0..HOURS).map(|h| v(h).to_string()).collect()
    }

    #[test]
    fn one_complete_day() {
        let text = file(&[row("2020-01-01", &full_day(|h| h as f64 * 0.5))]);
        let got = parse_csv(text.as_bytes(), Pollutant::CO).unwrap();
        assert_eq!(got.records.len(), 1);
        let r = &got.records[0];
        assert_eq!(r.values[7], 3.5);
        assert!(r.filled.is_empty());
        assert!(got.warnings.is_empty());
    }

    #[test]
    fn interior_gaps_are_filled_linearly() {
        let mut cells = full_day(|h| h as f64);
        cells[5] = String::new();
        cells[6] = "NA".into();
        cells[3] = "2.5".into();
        let text = file(&[row("2020-01-02", &cells)]);
        let r = &parse_csv(text.as_bytes(), Pollutant::NO2).unwrap().records[0];
        // between hour 4 (value 4) and hour 7 (value 7)
        assert_eq!(r.values[5], 5.0);
        assert_eq!(r.values[6], 6.0);
        assert_eq!(r.values[3], 2.5);
        assert_eq!(r.filled, vec![5, 6]);
    }

    #[test]
    fn edge_gaps_copy_nearest() {
        let mut cells = full_day(|h| 1.0 + h as f64);
        cells[0] = String::new();
        cells[23] = String::new();
        let text = file(&[row("2020-01-02", &cells)]);
        let r = &parse_csv(text.as_bytes(), Pollutant::O3).unwrap().records[0];
        assert_eq!(r.values[0], 2.0);
        assert_eq!(r.values[23], 23.0);
    }

    #[test]
    fn too_many_gaps_skip_the_day() {
        let mut cells = full_day(|_| 1.0);
        for h in [1, 4, 9, 10, 20] {
            cells[h] = String::new();
        }
        let text = file(&[row("2020-01-03", &cells), row("2020-01-01", &full_day(|_| 2.0))]);
        let got = parse_csv(text.as_bytes(), Pollutant::CO).unwrap();
        assert_eq!(got.records.len(), 1);
        assert_eq!(got.warnings.len(), 1);
        assert!(got.warnings[0].contains("2020-01-03"));
    }

    #[test]
    fn records_are_sorted_by_date() {
        let text = file(&[
            row("2020-03-01", &full_day(|_| 3.0)),
            row("2020-01-01", &full_day(|_| 1.0)),
            row("2020-02-01", &full_day(|_| 2.0)),
        ]);
        let got = parse_csv(text.as_bytes(), Pollutant::SO2).unwrap();
        let firsts: Vec<f64> = got.records.iter().map(|r| r.values[0]).collect();
        assert_eq!(firsts, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn malformed_rows_report_their_line() {
        let mut bad = full_day(|_| 1.0);
        bad[2] = "abc".into();
        let text = file(&[row("2020-01-01", &full_day(|_| 1.0)), row("2020-01-02", &bad)]);
        match parse_csv(text.as_bytes(), Pollutant::CO) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let short = file(&["2020-01-01,1,2,3\n".to_string()]);
        assert!(matches!(parse_csv(short.as_bytes(), Pollutant::CO), Err(Error::Parse { line: 2, .. })));
        let negative = file(&[row("2020-01-01", &full_day(|h| if h == 4 { -1.0 } else { 1.0 }))]);
        assert!(matches!(parse_csv(negative.as_bytes(), Pollutant::CO), Err(Error::Parse { .. })));
        assert!(matches!(
            parse_csv("day,a\n".as_bytes(), Pollutant::CO),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn write_parse_round_trip() {
        let text = file(&[
            row("2020-01-01", &full_day(|h| (h as f64 * 0.1).sin().abs() / 3.0)),
            row("2020-01-02", &full_day(|h| 1e-7 * h as f64)),
        ]);
        let first = parse_csv(text.as_bytes(), Pollutant::CO).unwrap().records;
        let mut out = Vec::new();
        write_csv(&first, &mut out).unwrap();
        let second = parse_csv(out.as_slice(), Pollutant::CO).unwrap().records;
        assert_eq!(first, second);
        let mut again = Vec::new();
        write_csv(&second, &mut again).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn hours_map_onto_unit_interval() {
        let text = file(&[row("2020-01-01", &full_day(|h| h as f64))]);
        let r = &parse_csv(text.as_bytes(), Pollutant::CO).unwrap().records[0];
        let c = profile_curve(r, TimeGrid::new(47).unwrap()).unwrap();
        // hour k lands on node 2k; midpoints interpolate
        assert_eq!(c.values()[0], 0.0);
        assert_eq!(c.values()[46], 23.0);
        assert!((c.values()[1] - 0.5).abs() < 1e-12);
        assert!((c.values()[20] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn pollutant_names() {
        for p in Pollutant::ALL {
            assert_eq!(p.to_string().parse::<Pollutant>().unwrap(), p);
        }
        assert_eq!("no2".parse::<Pollutant>().unwrap(), Pollutant::NO2);
        assert!("PM10".parse::<Pollutant>().is_err());
    }
}
