//! CSV and JSON file formats.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading
//! a file back gives bitwise-identical values.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::clustering::{DistanceMatrix, Partition};
use crate::error::{Error, Result};
use crate::lti::StateSpace;
use crate::signal::{IOPair, LabeledDataset, TimeSeries};
use crate::spectral::Cepstrum;

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("'{field}' is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("'{field}' is not finite")));
    }
    Ok(v)
}

fn parse_usize(field: &str, line: usize) -> Result<usize> {
    field
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("'{field}' is not a nonnegative integer")))
}

fn reader<R: Read>(r: R, has_headers: bool) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(has_headers)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(r)
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let headers = rdr.headers()?;
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(parse_err(
            1,
            format!("expected header '{}', got '{}'", expected.join(","), got.join(",")),
        ));
    }
    Ok(())
}

fn line_of(record: &csv::StringRecord, fallback: usize) -> usize {
    record
        .position()
        .map_or(fallback, |p| p.line() as usize)
}

/// Series CSV: `pair_id,role,k,value` with role `input` or `output`.
pub fn write_series_csv<W: Write>(pairs: &[IOPair], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["pair_id", "role", "k", "value"])?;
    for p in pairs {
        for (role, series) in [("input", p.input()), ("output", p.output())] {
            for (k, v) in series.values().iter().enumerate() {
                wtr.write_record([p.pair_id.to_string(), role.to_string(), k.to_string(), v.to_string()])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a series CSV; pairs come back ordered by `pair_id`.
pub fn read_series_csv<R: Read>(r: R, sample_period: f64) -> Result<Vec<IOPair>> {
    let mut rdr = reader(r, true);
    check_header(&mut rdr, &["pair_id", "role", "k", "value"])?;
    let mut series: BTreeMap<usize, [Vec<(usize, f64)>; 2]> = BTreeMap::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = line_of(&rec, idx + 2);
        if rec.len() != 4 {
            return Err(parse_err(line, format!("expected 4 fields, got {}", rec.len())));
        }
        let id = parse_usize(&rec[0], line)?;
        let role = match &rec[1] {
            "input" => 0,
            "output" => 1,
            other => return Err(parse_err(line, format!("unknown role '{other}'"))),
        };
        let k = parse_usize(&rec[2], line)?;
        let v = parse_f64(&rec[3], line)?;
        series.entry(id).or_default()[role].push((k, v));
    }
    series
        .into_iter()
        .map(|(id, [mut input, mut output])| {
            let assemble = |s: &mut Vec<(usize, f64)>, role: &str| -> Result<TimeSeries> {
                s.sort_by_key(|e| e.0);
                if s.iter().enumerate().any(|(i, e)| e.0 != i) {
                    return Err(parse_err(
                        0,
                        format!("pair {id} {role}: sample indices are not 0..n without gaps"),
                    ));
                }
                TimeSeries::with_sample_period(s.iter().map(|e| e.1).collect(), sample_period)
            };
            IOPair::new(id, assemble(&mut input, "input")?, assemble(&mut output, "output")?)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub pair_id: usize,
    pub label: usize,
}

/// Dataset manifest: labels per pair plus generation metadata. `systems`
/// holds the generating models when known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub pairs: Vec<ManifestEntry>,
    pub sample_period: f64,
    pub seed: u64,
    pub generator_config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub systems: Vec<StateSpace>,
}

impl Manifest {
    pub fn for_dataset(
        dataset: &LabeledDataset,
        sample_period: f64,
        seed: u64,
        generator_config: serde_json::Value,
    ) -> Self {
        Self {
            pairs: dataset
                .pairs()
                .iter()
                .zip(dataset.labels())
                .map(|(p, &label)| ManifestEntry {
                    pair_id: p.pair_id,
                    label,
                })
                .collect(),
            sample_period,
            seed,
            generator_config,
            systems: dataset.systems().to_vec(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Combines the manifest labels with pairs read from a series CSV.
    pub fn attach(&self, pairs: Vec<IOPair>) -> Result<LabeledDataset> {
        let by_id: BTreeMap<usize, usize> = self.pairs.iter().map(|e| (e.pair_id, e.label)).collect();
        if by_id.len() != pairs.len() {
            return Err(Error::Parameter(format!(
                "manifest lists {} pairs but the series file has {}",
                by_id.len(),
                pairs.len()
            )));
        }
        let labels = pairs
            .iter()
            .map(|p| {
                by_id.get(&p.pair_id).copied().ok_or_else(|| {
                    Error::Parameter(format!("pair {} is missing from the manifest", p.pair_id))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        LabeledDataset::with_systems(pairs, labels, self.systems.clone())
    }
}

/// n rows of n comma-separated values, no header.
pub fn write_matrix_csv<W: Write>(m: &DistanceMatrix, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for i in 0..m.len() {
        wtr.write_record(m.row(i).iter().map(|v| v.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_matrix_csv<R: Read>(r: R) -> Result<DistanceMatrix> {
    let mut rows = Vec::new();
    for (idx, rec) in reader(r, false).records().enumerate() {
        let rec = rec?;
        let line = line_of(&rec, idx + 1);
        rows.push(
            rec.iter()
                .map(|f| parse_f64(f, line))
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    let n = rows.len();
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(parse_err(i + 1, format!("row has {} values, expected {n}", r.len())));
    }
    DistanceMatrix::from_rows(rows)
}

/// `pair_id,label`.
pub fn write_partition_csv<W: Write>(pair_ids: &[usize], p: &Partition, w: W) -> Result<()> {
    if pair_ids.len() != p.len() {
        return Err(Error::IncompatibleLength {
            left: pair_ids.len(),
            right: p.len(),
        });
    }
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["pair_id", "label"])?;
    for (id, l) in pair_ids.iter().zip(p.labels()) {
        wtr.write_record([id.to_string(), l.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_partition_csv<R: Read>(r: R) -> Result<(Vec<usize>, Partition)> {
    let mut rdr = reader(r, true);
    check_header(&mut rdr, &["pair_id", "label"])?;
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = line_of(&rec, idx + 2);
        if rec.len() != 2 {
            return Err(parse_err(line, format!("expected 2 fields, got {}", rec.len())));
        }
        ids.push(parse_usize(&rec[0], line)?);
        labels.push(parse_usize(&rec[1], line)?);
    }
    Ok((ids, Partition::new(labels)?))
}

/// `pair_id,k,c_y,c_u`.
pub fn write_cepstra_csv<W: Write>(rows: &[(usize, Cepstrum, Cepstrum)], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["pair_id", "k", "c_y", "c_u"])?;
    for (id, cy, cu) in rows {
        for (k, (y, u)) in cy.coefficients().iter().zip(cu.coefficients()).enumerate() {
            wtr.write_record([id.to_string(), k.to_string(), y.to_string(), u.to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Single series: `k,value`.
pub fn write_single_series_csv<W: Write>(s: &TimeSeries, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["k", "value"])?;
    for (k, v) in s.values().iter().enumerate() {
        wtr.write_record([k.to_string(), v.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_single_series_csv<R: Read>(r: R, sample_period: f64) -> Result<TimeSeries> {
    let mut rdr = reader(r, true);
    check_header(&mut rdr, &["k", "value"])?;
    let mut values = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = line_of(&rec, idx + 2);
        if rec.len() != 2 {
            return Err(parse_err(line, format!("expected 2 fields, got {}", rec.len())));
        }
        if parse_usize(&rec[0], line)? != idx {
            return Err(parse_err(line, format!("expected sample index {idx}")));
        }
        values.push(parse_f64(&rec[1], line)?);
    }
    TimeSeries::with_sample_period(values, sample_period)
}
