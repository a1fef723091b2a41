use std::io::Write;

use serde::Serialize;

use super::sweep::{MixingResult, SweepResult};
use crate::error::{Error, Result};
use crate::spectral::HarmonicReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::invalid(format!("unknown format '{other}'"))),
        }
    }
}

/// Anything the CLI can write out.
pub enum Report<'a> {
    Sweep(&'a SweepResult),
    Mixing(&'a MixingResult),
    /// Harmonic reports of a single record, one per channel name.
    Harmonics(&'a [(String, HarmonicReport)]),
}

pub fn emit_report<W: Write>(report: &Report<'_>, format: Format, dest: W) -> Result<()> {
    match (report, format) {
        (Report::Sweep(r), Format::Json) => write_json(r, dest),
        (Report::Mixing(r), Format::Json) => write_json(r, dest),
        (Report::Harmonics(r), Format::Json) => write_json(r, dest),
        (Report::Sweep(r), Format::Csv) => sweep_csv(r, dest),
        (Report::Mixing(r), Format::Csv) => mixing_csv(r, dest),
        (Report::Harmonics(r), Format::Csv) => harmonics_csv(r, dest),
    }
}

fn write_json<T: Serialize + ?Sized, W: Write>(value: &T, mut dest: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut dest, value)?;
    dest.write_all(b"\n")?;
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn harmonic_cells(r: &HarmonicReport, k_max: usize) -> Vec<String> {
    let mut row: Vec<String> = (0..k_max)
        .map(|i| opt(r.harmonics_v.get(i).copied()))
        .collect();
    row.push(r.thd_f.to_string());
    row.push(r.thd_r.to_string());
    row.push(opt(r.ratio_2_3));
    row
}

fn harmonic_header(k_max: usize) -> Vec<String> {
    let mut h: Vec<String> = (1..=k_max).map(|i| format!("V{i}")).collect();
    h.extend(["thd_f", "thd_r", "ratio_2_3"].map(String::from));
    h
}

/// Columns: `f_hz,path,channel,V1..Vk,thd_f,thd_r,ratio_2_3,normalized_ratio,label`.
/// Harmonics above Nyquist and undefined values are left blank.
fn sweep_csv<W: Write>(r: &SweepResult, dest: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(dest);
    let mut header = vec!["f_hz".to_string(), "path".into(), "channel".into()];
    header.extend(harmonic_header(r.k_max));
    header.extend(["normalized_ratio", "label"].map(String::from));
    w.write_record(&header)?;
    for p in &r.points {
        let mut row = vec![
            p.freq_hz.to_string(),
            p.path.to_string(),
            p.channel.to_string(),
        ];
        row.extend(harmonic_cells(&p.report, r.k_max));
        row.push(opt(p.normalized_ratio));
        row.push(p.label.label.clone());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn harmonics_csv<W: Write>(reports: &[(String, HarmonicReport)], dest: W) -> Result<()> {
    let k_max = reports.iter().map(|(_, r)| r.k()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(dest);
    let mut header = vec!["channel".to_string(), "f_hz".into()];
    header.extend(harmonic_header(k_max));
    w.write_record(&header)?;
    for (name, r) in reports {
        let mut row = vec![name.clone(), r.f0_hz.to_string()];
        row.extend(harmonic_cells(r, k_max));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per detected peak; unmatched peaks have blank product columns.
fn mixing_csv<W: Write>(r: &MixingResult, dest: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(dest);
    w.write_record([
        "f1_hz",
        "f2_hz",
        "channel",
        "peak_hz",
        "amplitude_v",
        "m",
        "n",
        "sign",
        "order",
        "product_hz",
    ])?;
    for run in &r.runs {
        let (f1, f2) = (run.spec.f1_hz.to_string(), run.spec.f2_hz.to_string());
        for (c, rep) in run.channels.iter().enumerate() {
            for m in &rep.matched {
                let p = &m.product;
                w.write_record([
                    f1.clone(),
                    f2.clone(),
                    c.to_string(),
                    m.observed_freq_hz.to_string(),
                    m.amplitude_v.to_string(),
                    p.m.to_string(),
                    p.n.to_string(),
                    format!("{:?}", p.sign).to_lowercase(),
                    p.order.to_string(),
                    p.freq_hz.to_string(),
                ])?;
            }
            for peak in rep.unmatched_peaks.iter() {
                let mut row = vec![
                    f1.clone(),
                    f2.clone(),
                    c.to_string(),
                    peak.freq_hz.to_string(),
                    peak.amplitude_v.to_string(),
                ];
                row.extend(std::iter::repeat_n(String::new(), 5));
                w.write_record(&row)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
