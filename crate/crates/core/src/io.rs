//! CSV formats for count series, mean series and flag events.
//!
//! All files use 1-based node labels and `\n` line endings.
//!
//! * series: `t,src,dst,count`; unlisted pairs are 0, duplicate rows add up.
//! * means: `t,src,dst,lambda`; every off-diagonal pair must be listed for
//!   every time. Unlisted self-pairs take the mean of that time's listed
//!   off-diagonal entries.
//! * flags: `t,statistic,team_or_leader,value,boundary,flagged`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{CountMatrix, FlagEvent, Matrix, MeanModel, NetworkSeries, NetworkSnapshot};

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    if let csv::ErrorKind::Io(io) = e.kind() {
        return Error::Io(io.to_string());
    }
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers().map_err(csv_error)?;
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {:?}, found {:?}", expected.join(","), got.join(",")),
        });
    }
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, name: &str, line: usize) -> Result<T> {
    let raw = rec.get(idx).map(str::trim).unwrap_or("");
    raw.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid {name} {raw:?}"),
    })
}

fn node(rec: &csv::StringRecord, idx: usize, name: &str, line: usize) -> Result<usize> {
    let label: usize = field(rec, idx, name, line)?;
    label.checked_sub(1).ok_or_else(|| Error::Parse {
        line,
        message: format!("{name} labels start at 1"),
    })
}

fn contiguous(times: impl Iterator<Item = u32>) -> Result<()> {
    for (expected, found) in (1u32..).zip(times) {
        if expected != found {
            return Err(Error::NonContiguousTime { expected, found });
        }
    }
    Ok(())
}

/// Reads a count series. The network size is the largest label seen.
pub fn read_series<R: Read>(reader: R) -> Result<NetworkSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(&mut rdr, &["t", "src", "dst", "count"])?;
    let mut rows: BTreeMap<u32, Vec<(usize, usize, u32, usize)>> = BTreeMap::new();
    let mut n = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let t: u32 = field(&rec, 0, "t", line)?;
        let src = node(&rec, 1, "src", line)?;
        let dst = node(&rec, 2, "dst", line)?;
        let count: i64 = field(&rec, 3, "count", line)?;
        if count < 0 {
            return Err(Error::NegativeCount { line, count });
        }
        if src == dst && count > 0 {
            return Err(Error::Parse {
                line,
                message: format!("self-pair ({},{}) cannot carry counts", src + 1, dst + 1),
            });
        }
        let count = u32::try_from(count).map_err(|_| Error::Parse {
            line,
            message: format!("count {count} too large"),
        })?;
        n = n.max(src + 1).max(dst + 1);
        rows.entry(t).or_default().push((src, dst, count, line));
    }
    if rows.is_empty() {
        return Err(Error::EmptySeries);
    }
    contiguous(rows.keys().copied())?;
    let n = n.max(2);
    let snapshots = rows
        .into_iter()
        .map(|(t, entries)| {
            let mut counts = CountMatrix::zeros(n);
            for (src, dst, count, line) in entries {
                let total = counts.get(src, dst).checked_add(count).ok_or_else(|| Error::Parse {
                    line,
                    message: "summed count overflows".into(),
                })?;
                counts.set(src, dst, total);
            }
            NetworkSnapshot::new(t, counts)
        })
        .collect::<Result<Vec<_>>>()?;
    NetworkSeries::new(snapshots)
}

pub fn parse_series(path: &Path) -> Result<NetworkSeries> {
    read_series(open(path)?)
}

/// Writes the nonzero counts of a series. The last pair `(n−1, n)` is
/// written at every time, even when zero, so that the network size and
/// every time index survive a round trip.
pub fn write_series_to<W: Write>(series: &NetworkSeries, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(["t", "src", "dst", "count"]).map_err(csv_error)?;
    let n = series.n();
    for snap in series.snapshots() {
        for i in 0..n {
            for j in 0..n {
                let c = snap.counts.get(i, j);
                let anchor = i == n - 2 && j == n - 1;
                if c > 0 || anchor {
                    w.write_record(&[snap.t.to_string(), (i + 1).to_string(), (j + 1).to_string(), c.to_string()])
                        .map_err(csv_error)?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_series(series: &NetworkSeries, path: &Path) -> Result<()> {
    write_series_to(series, create(path)?)
}

/// Reads a per-edge mean series for an `n`-node network.
pub fn read_means<R: Read>(reader: R, n: usize) -> Result<MeanModel> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(&mut rdr, &["t", "src", "dst", "lambda"])?;
    let mut rows: BTreeMap<u32, Vec<Option<f64>>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let t: u32 = field(&rec, 0, "t", line)?;
        let src = node(&rec, 1, "src", line)?;
        let dst = node(&rec, 2, "dst", line)?;
        let lambda: f64 = field(&rec, 3, "lambda", line)?;
        if src >= n || dst >= n {
            return Err(Error::DimensionMismatch(format!(
                "line {line}: pair ({},{}) outside a {n}-node network",
                src + 1,
                dst + 1
            )));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::NonPositiveMean {
                src: src + 1,
                dst: dst + 1,
                t,
                value: lambda,
            });
        }
        rows.entry(t).or_insert_with(|| vec![None; n * n])[src * n + dst] = Some(lambda);
    }
    if rows.is_empty() {
        return Err(Error::EmptySeries);
    }
    contiguous(rows.keys().copied())?;
    let means = rows
        .into_iter()
        .map(|(t, cells)| {
            let listed: Vec<f64> = (0..n * n)
                .filter(|&idx| idx / n != idx % n)
                .filter_map(|idx| cells[idx])
                .collect();
            let diagonal = listed.iter().sum::<f64>() / listed.len().max(1) as f64;
            let mut m = Matrix::filled(n, 0.0);
            for i in 0..n {
                for j in 0..n {
                    let v = match cells[i * n + j] {
                        Some(v) => v,
                        None if i == j && !listed.is_empty() => diagonal,
                        None => {
                            return Err(Error::NonPositiveMean {
                                src: i + 1,
                                dst: j + 1,
                                t,
                                value: 0.0,
                            })
                        }
                    };
                    m.set(i, j, v);
                }
            }
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MeanModel::PerEdgeSeries { means })
}

pub fn parse_means(path: &Path, n: usize) -> Result<MeanModel> {
    read_means(open(path)?, n)
}

/// Writes every entry, self-pairs included, of a per-edge mean series.
pub fn write_means_to<W: Write>(means: &[Matrix], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(["t", "src", "dst", "lambda"]).map_err(csv_error)?;
    for (idx, m) in means.iter().enumerate() {
        for i in 0..m.n() {
            for j in 0..m.n() {
                w.write_record(&[
                    (idx + 1).to_string(),
                    (i + 1).to_string(),
                    (j + 1).to_string(),
                    format!("{:?}", m.get(i, j)),
                ])
                .map_err(csv_error)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// `a,b` for a distance-linear mean model.
pub fn parse_dist_linear(text: &str) -> Result<MeanModel> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let parse = |s: &str| {
        s.parse::<f64>().map_err(|_| Error::InvalidConfig(format!("invalid distance-linear coefficient {s:?}")))
    };
    match parts.as_slice() {
        [a] => Ok(MeanModel::distance_linear(parse(a)?)),
        [a, b] => Ok(MeanModel::DistanceLinear {
            a: parse(a)?,
            b: parse(b)?,
        }),
        _ => Err(Error::InvalidConfig(format!("expected \"a,b\", got {text:?}"))),
    }
}

/// A row of a flag file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlagRecord {
    pub t: u32,
    pub statistic: String,
    pub team_or_leader: String,
    pub value: f64,
    pub boundary: f64,
    pub flagged: bool,
}

impl From<&FlagEvent> for FlagRecord {
    fn from(e: &FlagEvent) -> Self {
        FlagRecord {
            t: e.t,
            statistic: e.statistic.name().to_string(),
            team_or_leader: e.team.label(),
            value: e.value,
            boundary: e.boundary,
            flagged: e.flagged,
        }
    }
}

/// Writes events in the order given; callers pass them sorted by time and
/// node.
pub fn write_flags_to<W: Write>(events: &[FlagEvent], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .has_headers(false)
        .from_writer(writer);
    w.write_record(["t", "statistic", "team_or_leader", "value", "boundary", "flagged"])
        .map_err(csv_error)?;
    for e in events {
        w.serialize(FlagRecord::from(e)).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_flags(events: &[FlagEvent], path: &Path) -> Result<()> {
    write_flags_to(events, create(path)?)
}

pub fn read_flags_from<R: Read>(reader: R) -> Result<Vec<FlagRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize().map(|r| r.map_err(csv_error)).collect()
}

pub fn read_flags(path: &Path) -> Result<Vec<FlagRecord>> {
    read_flags_from(open(path)?)
}
