//! Adapter for channel data in foreign delimited layouts.
//!
//! A [`MappingSpec`] declares which column holds each dataset field, the
//! unit of the position columns, and where the transfer-function samples
//! start. Metadata either comes from the mapping or, when omitted, from a
//! native JSON header on the first line of the source.
//!
//! ```toml
//! delimiter = ";"
//! header_rows = 1
//! position_unit = "cm"
//!
//! [metadata]
//! carrier_hz = 3.5e9
//! bandwidth_hz = 46e6
//! F = 64
//! speed_mps = 4.0
//! capture_interval_s = 0.05
//! altitude_m = 35.0
//! environment_seed = 0
//!
//! [columns]
//! ue_id = "rx"
//! ap_index = 1
//! x = 2
//! y = 3
//! z = 4
//! samples_start = 5
//! ```

use crate::channel::{ChannelRecord, DatasetMeta, SoundingDataset};
use crate::error::{Error, Result};
use crate::format::parse_header;
use crate::geometry::Point3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

/// A column given by zero-based position or by header name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub ue_id: Option<ColumnRef>,
    pub trial: Option<ColumnRef>,
    pub ap_index: Option<ColumnRef>,
    pub x: Option<ColumnRef>,
    pub y: Option<ColumnRef>,
    pub z: Option<ColumnRef>,
    pub samples_start: Option<ColumnRef>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleLayout {
    /// `re_0, im_0, re_1, im_1, ...`
    #[default]
    Interleaved,
    /// `re_0, ..., re_{F-1}, im_0, ..., im_{F-1}`
    Blocked,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MappingSpec {
    pub delimiter: char,
    /// Rows to skip before the data (after the JSON header, if any). The
    /// last skipped row provides the names for [`ColumnRef::Name`].
    pub header_rows: usize,
    /// `m`, `cm`, `mm` or `km`.
    pub position_unit: String,
    pub sample_layout: SampleLayout,
    /// When absent, line 1 must be a native JSON metadata header.
    pub metadata: Option<DatasetMeta>,
    pub columns: ColumnMap,
}

impl Default for MappingSpec {
    fn default() -> Self {
        MappingSpec {
            delimiter: ',',
            header_rows: 0,
            position_unit: "m".into(),
            sample_layout: SampleLayout::Interleaved,
            metadata: None,
            columns: ColumnMap::default(),
        }
    }
}

impl MappingSpec {
    /// Mapping that reads the native dataset format.
    pub fn native() -> Self {
        MappingSpec {
            columns: ColumnMap {
                ue_id: Some(ColumnRef::Index(0)),
                trial: Some(ColumnRef::Index(1)),
                ap_index: Some(ColumnRef::Index(2)),
                x: Some(ColumnRef::Index(3)),
                y: Some(ColumnRef::Index(4)),
                z: Some(ColumnRef::Index(5)),
                samples_start: Some(ColumnRef::Index(6)),
            },
            ..MappingSpec::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Import(format!("mapping spec: {e}")))
    }

    fn unit_scale(&self) -> Result<f64> {
        match self.position_unit.trim() {
            "m" => Ok(1.0),
            "cm" => Ok(0.01),
            "mm" => Ok(0.001),
            "km" => Ok(1000.0),
            other => Err(Error::Import(format!("unknown position unit '{other}'"))),
        }
    }
}

struct Resolved {
    ue_id: usize,
    trial: Option<usize>,
    ap_index: usize,
    xyz: [usize; 3],
    samples_start: usize,
}

fn resolve(
    column: &Option<ColumnRef>,
    field: &str,
    names: &BTreeMap<String, usize>,
) -> Result<Option<usize>> {
    match column {
        None => Ok(None),
        Some(ColumnRef::Index(i)) => Ok(Some(*i)),
        Some(ColumnRef::Name(name)) => names
            .get(name.trim())
            .copied()
            .map(Some)
            .ok_or_else(|| Error::Import(format!("column '{name}' for {field} not found in header row"))),
    }
}

fn required(column: Option<usize>, field: &str) -> Result<usize> {
    column.ok_or_else(|| Error::Import(format!("required field '{field}' is not mapped")))
}

fn resolve_all(spec: &MappingSpec, names: &BTreeMap<String, usize>) -> Result<Resolved> {
    let c = &spec.columns;
    Ok(Resolved {
        ue_id: required(resolve(&c.ue_id, "ue_id", names)?, "ue_id")?,
        trial: resolve(&c.trial, "trial", names)?,
        ap_index: required(resolve(&c.ap_index, "ap_index", names)?, "ap_index")?,
        xyz: [
            required(resolve(&c.x, "x", names)?, "x")?,
            required(resolve(&c.y, "y", names)?, "y")?,
            required(resolve(&c.z, "z", names)?, "z")?,
        ],
        samples_start: required(resolve(&c.samples_start, "samples_start", names)?, "samples_start")?,
    })
}

fn cell<'a>(row: &'a csv::StringRecord, col: usize, line: usize, field: &str) -> Result<&'a str> {
    row.get(col)
        .map(str::trim)
        .ok_or_else(|| Error::parse(line, field, format!("row has no column {col}")))
}

fn number<T: std::str::FromStr>(row: &csv::StringRecord, col: usize, line: usize, field: &str) -> Result<T> {
    let s = cell(row, col, line, field)?;
    s.parse()
        .map_err(|_| Error::parse(line, field, format!("cannot parse '{s}'")))
}

fn finite(row: &csv::StringRecord, col: usize, line: usize, field: &str) -> Result<f64> {
    let v: f64 = number(row, col, line, field)?;
    if !v.is_finite() {
        return Err(Error::parse(line, field, "value is not finite"));
    }
    Ok(v)
}

/// Reads `source` according to `spec` into a validated dataset.
pub fn import_external(source: impl Read, spec: &MappingSpec) -> Result<SoundingDataset> {
    let scale = spec.unit_scale()?;
    if !spec.delimiter.is_ascii() {
        return Err(Error::Import("delimiter must be a single ASCII character".into()));
    }
    let mut reader = BufReader::new(source);
    let mut line_offset = 0usize;
    let meta = match &spec.metadata {
        Some(meta) => {
            meta.validate().map_err(|e| Error::Import(format!("metadata: {e}")))?;
            meta.clone()
        }
        None => {
            let mut first = String::new();
            reader.read_line(&mut first)?;
            if first.trim().is_empty() {
                return Err(Error::Import("no metadata in mapping and no JSON header line".into()));
            }
            line_offset = 1;
            parse_header(first.trim_end_matches(['\n', '\r']), 1)?
        }
    };

    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(spec.delimiter as u8)
        .from_reader(reader);

    let mut names = BTreeMap::new();
    let mut rows = csv_reader.records();
    for _ in 0..spec.header_rows {
        match rows.next() {
            Some(row) => {
                let row = row.map_err(|e| Error::Import(e.to_string()))?;
                names = row
                    .iter()
                    .enumerate()
                    .map(|(i, n)| (n.trim().to_string(), i))
                    .collect();
            }
            None => break,
        }
    }
    let cols = resolve_all(spec, &names)?;
    if cols.trial.is_none() {
        log::warn!("mapping has no trial column; every record is assigned trial 1");
    }

    let n_freq = meta.n_freq;
    let mut records = Vec::new();
    for row in rows {
        let row = row.map_err(|e| Error::Import(e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line() as usize) + line_offset;
        if row.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        let trial = match cols.trial {
            Some(c) => number(&row, c, line, "trial")?,
            None => 1,
        };
        let pos = |axis: usize, name: &str| finite(&row, cols.xyz[axis], line, name).map(|v| v * scale);
        let position = Point3::new(pos(0, "x")?, pos(1, "y")?, pos(2, "z")?);

        let available = row.len().saturating_sub(cols.samples_start);
        if available != 2 * n_freq {
            return Err(Error::parse(
                line,
                "samples",
                format!("expected {} sample values, found {available}", 2 * n_freq),
            ));
        }
        let samples = (0..n_freq)
            .map(|k| {
                let (re_col, im_col) = match spec.sample_layout {
                    SampleLayout::Interleaved => (cols.samples_start + 2 * k, cols.samples_start + 2 * k + 1),
                    SampleLayout::Blocked => (cols.samples_start + k, cols.samples_start + n_freq + k),
                };
                Ok(Complex64::new(
                    finite(&row, re_col, line, &format!("re_{k}"))?,
                    finite(&row, im_col, line, &format!("im_{k}"))?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;

        let record = ChannelRecord {
            ap_index: number(&row, cols.ap_index, line, "ap_index")?,
            ap_position: position,
            ue_id: number(&row, cols.ue_id, line, "ue_id")?,
            trial,
            samples,
        };
        record
            .validate()
            .map_err(|e| Error::parse(line, "record", e.to_string()))?;
        records.push(record);
    }
    SoundingDataset::from_records(meta, records)
}

pub fn import_external_file(source: impl AsRef<Path>, spec: &MappingSpec) -> Result<SoundingDataset> {
    import_external(std::fs::File::open(source)?, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::{read_dataset, write_dataset, FORMAT_VERSION};

    fn meta() -> DatasetMeta {
        DatasetMeta {
            carrier_hz: 3.5e9,
            bandwidth_hz: 46e6,
            n_freq: 2,
            speed_mps: 4.0,
            capture_interval_s: 0.05,
            altitude_m: 35.0,
            environment_seed: 0,
        }
    }

    fn native_text() -> String {
        let records = (0..4)
            .flat_map(|l| {
                [1u32, 2].into_iter().map(move |ue| {
                    ChannelRecord::new(
                        l,
                        Point3::new(l as f64 * 0.2, 3.0, 35.0),
                        ue,
                        1,
                        vec![Complex64::new(1e-4 * (l + 1) as f64, -3e-5), Complex64::new(2e-5, 1e-6 / 3.0)],
                    )
                    .unwrap()
                })
            })
            .collect();
        let ds = SoundingDataset::from_records(meta(), records).unwrap();
        let mut buf = Vec::new();
        write_dataset(&ds, &mut buf, FORMAT_VERSION).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn identity_mapping_equals_native_reader() {
        let text = native_text();
        let imported = import_external(text.as_bytes(), &MappingSpec::native()).unwrap();
        assert_eq!(imported, read_dataset(text.as_bytes()).unwrap());
    }

    fn foreign_spec() -> MappingSpec {
        MappingSpec::from_toml(
            r#"
            delimiter = ";"
            header_rows = 1
            position_unit = "cm"
            sample_layout = "blocked"

            [metadata]
            carrier_hz = 3.5e9
            bandwidth_hz = 46e6
            F = 2
            speed_mps = 4.0
            capture_interval_s = 0.05
            altitude_m = 35.0
            environment_seed = 0

            [columns]
            ue_id = "rx"
            ap_index = "idx"
            x = 2
            y = 3
            z = 4
            samples_start = 5
            "#,
        )
        .unwrap()
    }

    const FOREIGN: &str = "rx;idx;x_cm;y_cm;z_cm;r0;r1;i0;i1\n\
                           3;0;150;20;3500;0.5;0.25;-0.5;0.125\n\
                           3;1;170;20;3500;0.5;0.25;-0.5;0.125\n";

    #[test]
    fn centimetres_are_scaled_and_trial_defaults_to_one() {
        let ds = import_external(FOREIGN.as_bytes(), &foreign_spec()).unwrap();
        assert_eq!(ds.len(), 2);
        let r = &ds.records()[1];
        assert_eq!(r.ap_position, Point3::new(1.7, 0.2, 35.0));
        assert_eq!(r.trial, 1);
        assert_eq!(r.samples, vec![Complex64::new(0.5, -0.5), Complex64::new(0.25, 0.125)]);
    }

    #[test]
    fn unmapped_required_field_is_an_error() {
        let mut spec = foreign_spec();
        spec.columns.x = None;
        match import_external(FOREIGN.as_bytes(), &spec) {
            Err(Error::Import(msg)) => assert!(msg.contains("'x'")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_unit_is_an_error() {
        let mut spec = foreign_spec();
        spec.position_unit = "furlong".into();
        assert!(matches!(import_external(FOREIGN.as_bytes(), &spec), Err(Error::Import(_))));
    }

    #[test]
    fn missing_header_column_name_is_an_error() {
        let mut spec = foreign_spec();
        spec.columns.ue_id = Some(ColumnRef::Name("ue".into()));
        assert!(matches!(import_external(FOREIGN.as_bytes(), &spec), Err(Error::Import(_))));
    }

    #[test]
    fn short_row_reports_line() {
        let text = format!("{FOREIGN}3;2;190;20;3500;0.5\n");
        match import_external(text.as_bytes(), &foreign_spec()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }
}
