//! Text dataset format.
//!
//! ```text
//! {"format_version":1,"carrier_hz":3500000000.0,"bandwidth_hz":46000000.0,"F":64,...}
//! ue_id,trial,ap_index,x_m,y_m,z_m,re_0,im_0,re_1,im_1,...,re_{F-1},im_{F-1}
//! ...
//! ```
//!
//! Line 1 is a single JSON object with the dataset metadata. Every following
//! line is one record with exactly `6 + 2F` comma-separated fields. Floats
//! are written with 17 significant digits, so a write/read round trip is
//! value-identical. Records appear grouped by `(ue_id, trial)` in ascending
//! order with contiguous `ap_index` from 0.

use crate::channel::{ChannelRecord, DatasetMeta, SoundingDataset};
use crate::error::{Error, Result};
use crate::geometry::Point3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

pub const FORMAT_VERSION: u32 = 1;

/// Leading non-sample fields of a record line.
pub const FIXED_FIELDS: usize = 6;

const FIXED_NAMES: [&str; FIXED_FIELDS] = ["ue_id", "trial", "ap_index", "x_m", "y_m", "z_m"];

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    #[serde(flatten)]
    meta: DatasetMeta,
}

fn check_version(version: u32) -> Result<()> {
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    Ok(())
}

fn write_float(out: &mut impl Write, v: f64) -> std::io::Result<()> {
    write!(out, ",{v:.16e}")
}

pub fn write_dataset(dataset: &SoundingDataset, out: impl Write, format_version: u32) -> Result<()> {
    check_version(format_version)?;
    let mut out = BufWriter::new(out);
    let header = Header {
        format_version,
        meta: dataset.meta.clone(),
    };
    serde_json::to_writer(&mut out, &header).map_err(|e| Error::InvalidInput(e.to_string()))?;
    out.write_all(b"\n")?;
    for r in dataset.records() {
        write!(out, "{},{},{}", r.ue_id, r.trial, r.ap_index)?;
        for v in r.ap_position.to_array() {
            write_float(&mut out, v)?;
        }
        for s in &r.samples {
            write_float(&mut out, s.re)?;
            write_float(&mut out, s.im)?;
        }
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_dataset_file(dataset: &SoundingDataset, path: impl AsRef<Path>, format_version: u32) -> Result<()> {
    write_dataset(dataset, File::create(path)?, format_version)
}

/// Parses the JSON metadata line.
pub(crate) fn parse_header(line: &str, line_no: usize) -> Result<DatasetMeta> {
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| Error::parse(line_no, "header", e.to_string()))?;
    let version = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::parse(line_no, "format_version", "missing or not an integer"))?;
    check_version(u32::try_from(version).map_err(|_| Error::UnsupportedVersion(u32::MAX))?)?;
    let header: Header =
        serde_json::from_value(value).map_err(|e| Error::parse(line_no, "header", e.to_string()))?;
    header
        .meta
        .validate()
        .map_err(|e| Error::parse(line_no, "header", e.to_string()))?;
    Ok(header.meta)
}

fn sample_field_name(index: usize) -> String {
    let k = index - FIXED_FIELDS;
    format!("{}_{}", if k.is_multiple_of(2) { "re" } else { "im" }, k / 2)
}

fn field_name(index: usize) -> String {
    FIXED_NAMES
        .get(index)
        .map(|s| s.to_string())
        .unwrap_or_else(|| sample_field_name(index))
}

fn parse_int<T: std::str::FromStr>(s: &str, line: usize, index: usize) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::parse(line, field_name(index), format!("'{s}' is not a valid integer")))
}

fn parse_float(s: &str, line: usize, index: usize) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::parse(line, field_name(index), format!("'{s}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, field_name(index), "value is not finite"));
    }
    Ok(v)
}

/// Parses one body line into a record.
fn parse_record(line: &str, line_no: usize, n_freq: usize) -> Result<ChannelRecord> {
    let fields: Vec<&str> = line.split(',').collect();
    let expected = FIXED_FIELDS + 2 * n_freq;
    if fields.len() != expected {
        return Err(Error::parse(
            line_no,
            "record",
            format!("expected {expected} fields, found {}", fields.len()),
        ));
    }
    let ue_id: u32 = parse_int(fields[0], line_no, 0)?;
    let trial: u32 = parse_int(fields[1], line_no, 1)?;
    if trial < 1 {
        return Err(Error::parse(line_no, "trial", "trial numbers start at 1"));
    }
    let ap_index: usize = parse_int(fields[2], line_no, 2)?;
    let position = Point3::new(
        parse_float(fields[3], line_no, 3)?,
        parse_float(fields[4], line_no, 4)?,
        parse_float(fields[5], line_no, 5)?,
    );
    let mut samples = Vec::with_capacity(n_freq);
    for k in 0..n_freq {
        let i = FIXED_FIELDS + 2 * k;
        samples.push(Complex64::new(
            parse_float(fields[i], line_no, i)?,
            parse_float(fields[i + 1], line_no, i + 1)?,
        ));
    }
    Ok(ChannelRecord {
        ap_index,
        ap_position: position,
        ue_id,
        trial,
        samples,
    })
}

/// Checks record order as lines stream in, so violations carry a line number.
pub(crate) struct OrderCheck {
    last: Option<(u32, u32, usize)>,
}

impl OrderCheck {
    pub(crate) fn new() -> Self {
        OrderCheck { last: None }
    }

    pub(crate) fn push(&mut self, r: &ChannelRecord, line_no: usize) -> Result<()> {
        let key = (r.ue_id, r.trial, r.ap_index);
        let ok = match self.last {
            None => r.ap_index == 0,
            Some((ue, trial, idx)) if (ue, trial) == (r.ue_id, r.trial) => r.ap_index == idx + 1,
            Some((ue, trial, _)) => (r.ue_id, r.trial) > (ue, trial) && r.ap_index == 0,
        };
        if !ok {
            return Err(Error::parse(
                line_no,
                "ap_index",
                format!(
                    "record (ue {}, trial {}, ap {}) breaks the (ue_id, trial, ap_index) ordering",
                    r.ue_id, r.trial, r.ap_index
                ),
            ));
        }
        self.last = Some(key);
        Ok(())
    }
}

/// Reads a dataset. Every record line must end with a newline; a final line
/// without one is reported as truncated.
pub fn read_dataset(mut input: impl BufRead) -> Result<SoundingDataset> {
    let mut buf = String::new();
    if input.read_line(&mut buf)? == 0 {
        return Err(Error::parse(1, "header", "file is empty"));
    }
    let meta = parse_header(buf.trim_end_matches(['\n', '\r']), 1)?;

    let mut records = Vec::new();
    let mut order = OrderCheck::new();
    let mut blank_at: Option<usize> = None;
    let mut line_no = 1;
    loop {
        buf.clear();
        if input.read_line(&mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let terminated = buf.ends_with('\n');
        let line = buf.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            blank_at.get_or_insert(line_no);
            continue;
        }
        if let Some(blank) = blank_at {
            return Err(Error::parse(blank, "record", "blank line inside the record body"));
        }
        if !terminated {
            return Err(Error::parse(line_no, "record", "truncated record (no line terminator)"));
        }
        let record = parse_record(line, line_no, meta.n_freq)?;
        order.push(&record, line_no)?;
        records.push(record);
    }
    SoundingDataset::from_records(meta, records)
}

pub fn read_dataset_file(path: impl AsRef<Path>) -> Result<SoundingDataset> {
    read_dataset(BufReader::new(File::open(path)?))
}
