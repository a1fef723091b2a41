//! Logger CSV in and out.
//!
//! Layout: a mandatory header row, time in seconds in the first column, one
//! voltage column per named channel. UTF-8, comma separated, `.` decimals.

use std::io::{Read, Write};
use std::path::Path;

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::signal::TimeSeries;

/// Allowed deviation of a time step from the median step, as a fraction.
pub const JITTER_TOLERANCE: f64 = 0.01;

/// Channels of a recording, in column order.
pub type Recording = IndexMap<String, TimeSeries>;

/// Reads a logger CSV into one uniformly sampled series per voltage column.
///
/// The sampling interval is the median time step. Steps deviating from it by
/// more than 1% are an error unless `resample` is set, in which case every
/// channel is linearly interpolated onto the uniform grid starting at the
/// first timestamp.
pub fn ingest_csv<R: Read>(source: R, resample: bool) -> Result<Recording> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if headers.len() < 2 {
        return Err(Error::Csv {
            line: 1,
            detail: "need a time column and at least one channel column".into(),
        });
    }
    let channels = &headers[1..];
    if let Some(dup) = channels
        .iter()
        .enumerate()
        .find(|(i, c)| channels[..*i].contains(c))
    {
        return Err(Error::Csv {
            line: 1,
            detail: format!("duplicate channel name '{}'", dup.1),
        });
    }

    let mut times = Vec::new();
    let mut lines = Vec::new();
    let mut columns = vec![Vec::new(); channels.len()];
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let parse = |i: usize| -> Result<f64> {
            let cell = record.get(i).unwrap_or("");
            cell.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Csv {
                    line,
                    detail: format!("column '{}' has non-numeric value '{cell}'", headers[i]),
                })
        };
        times.push(parse(0)?);
        for (c, col) in columns.iter_mut().enumerate() {
            col.push(parse(c + 1)?);
        }
        lines.push(line);
    }
    if times.len() < 2 {
        return Err(Error::Csv {
            line: lines.last().copied().unwrap_or(1),
            detail: format!("need at least 2 data rows, got {}", times.len()),
        });
    }

    let steps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    if let Some(i) = steps.iter().position(|d| *d <= 0.0) {
        return Err(Error::NonMonotoneTime { line: lines[i + 1] });
    }
    let dt = median(&steps);
    let jitter_at = steps
        .iter()
        .position(|d| (d - dt).abs() > JITTER_TOLERANCE * dt);

    let t0 = times[0];
    let mut out = IndexMap::new();
    match jitter_at {
        None => {
            for (name, col) in channels.iter().zip(columns) {
                out.insert(name.clone(), TimeSeries::new(dt, t0, col)?);
            }
        }
        Some(i) if !resample => {
            return Err(Error::Jitter {
                line: lines[i + 1],
                dt_s: dt,
            })
        }
        Some(_) => {
            let span = times[times.len() - 1] - t0;
            let n = (span / dt + 1e-9).floor() as usize + 1;
            for (name, col) in channels.iter().zip(columns) {
                let samples = resample_linear(&times, &col, t0, dt, n);
                out.insert(name.clone(), TimeSeries::new(dt, t0, samples)?);
            }
        }
    }
    Ok(out)
}

pub fn ingest_csv_path(path: &Path, resample: bool) -> Result<Recording> {
    let file = std::fs::File::open(path)?;
    ingest_csv(std::io::BufReader::new(file), resample)
        .map_err(|e| e.context(path.display().to_string()))
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// Piecewise-linear interpolation of `(times, values)` at `t0 + i·dt`.
fn resample_linear(times: &[f64], values: &[f64], t0: f64, dt: f64, n: usize) -> Vec<f64> {
    let mut j = 0;
    (0..n)
        .map(|i| {
            let t = t0 + i as f64 * dt;
            while j + 2 < times.len() && times[j + 1] < t {
                j += 1;
            }
            let (ta, tb) = (times[j], times[j + 1]);
            let frac = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
            values[j] + frac * (values[j + 1] - values[j])
        })
        .collect()
}

/// Writes series sharing one grid as `t_s,<name>...` CSV.
pub fn write_recording<W: Write>(dest: W, recording: &Recording) -> Result<()> {
    let mut iter = recording.values();
    let first = iter
        .next()
        .ok_or_else(|| Error::invalid("nothing to write"))?;
    if recording.values().any(|ts| ts.len() != first.len()) {
        return Err(Error::invalid("series to write must share a length"));
    }
    let mut w = csv::Writer::from_writer(dest);
    let mut header = vec!["t_s".to_string()];
    header.extend(recording.keys().cloned());
    w.write_record(&header)?;
    for i in 0..first.len() {
        let mut row = vec![first.time_at(i).to_string()];
        row.extend(recording.values().map(|ts| ts.samples[i].to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_three_column_file() {
        let text = "t,ch1,ch2\n0,1.0,2.0\n1,1.5,2.5\n2,2.0,3.0\n";
        let rec = ingest_csv(text.as_bytes(), false).unwrap();
        assert_eq!(rec.len(), 2);
        assert_eq!(rec["ch1"].dt_s, 1.0);
        assert_eq!(rec["ch2"].samples, vec![2.0, 2.5, 3.0]);
        assert_eq!(rec.keys().collect::<Vec<_>>(), vec!["ch1", "ch2"]);
    }

    #[test]
    fn non_numeric_cell_names_line() {
        let text = "t,ch1\n0,1.0\n1,oops\n2,2.0\n";
        match ingest_csv(text.as_bytes(), false) {
            Err(Error::Csv { line, detail }) => {
                assert_eq!(line, 3);
                assert!(detail.contains("oops"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ragged_row_is_rejected() {
        let text = "t,ch1\n0,1.0\n1,2.0,3.0\n";
        assert!(matches!(
            ingest_csv(text.as_bytes(), false),
            Err(Error::Csv { .. })
        ));
    }

    #[test]
    fn non_monotone_time() {
        let text = "t,ch1\n0,1\n1,1\n1,1\n";
        assert!(matches!(
            ingest_csv(text.as_bytes(), false),
            Err(Error::NonMonotoneTime { line: 4 })
        ));
    }

    #[test]
    fn too_few_rows_and_columns() {
        assert!(ingest_csv("t,ch1\n0,1\n".as_bytes(), false).is_err());
        assert!(ingest_csv("t\n0\n1\n".as_bytes(), false).is_err());
    }

    #[test]
    fn jitter_needs_resample_flag() {
        let text = "t,ch1\n0,0\n1,1\n2.05,2\n3,3\n4,4\n";
        assert!(matches!(
            ingest_csv(text.as_bytes(), false),
            Err(Error::Jitter { line: 4, .. })
        ));
        let rec = ingest_csv(text.as_bytes(), true).unwrap();
        let s = &rec["ch1"];
        assert_eq!(s.len(), 5);
        assert!((s.samples[2] - (1.0 + 1.0 / 1.05)).abs() < 1e-12);
        assert_eq!(s.samples[4], 4.0);
    }

    #[test]
    fn small_jitter_is_tolerated() {
        let text = "t,ch1\n0,0\n1.005,1\n2,2\n3,3\n";
        let rec = ingest_csv(text.as_bytes(), false).unwrap();
        assert_eq!(rec["ch1"].samples, vec![0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn write_then_read() {
        let mut rec = Recording::new();
        rec.insert(
            "a".into(),
            TimeSeries::new(0.5, 2.0, vec![1.0, -2.0, 3.25]).unwrap(),
        );
        rec.insert(
            "b".into(),
            TimeSeries::new(0.5, 2.0, vec![0.1, 0.2, 0.3]).unwrap(),
        );
        let mut buf = Vec::new();
        write_recording(&mut buf, &rec).unwrap();
        let back = ingest_csv(buf.as_slice(), false).unwrap();
        assert_eq!(back, rec);
    }
}
