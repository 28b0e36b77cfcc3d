//! File formats: dataset and design-template CSV, bin JSON.
//!
//! Dataset CSV has the header `ts_tilde,stage_start,excluded` with
//! `excluded` in `{0, 1}`; template CSV has `ts_tilde,count`; bins are a
//! JSON object mapping each `ts_tilde` to its list of upper bin edges.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::likelihood::{Dataset, Observation};
use crate::params::TestPlan;
use crate::simulate::{BinSpec, DesignTemplate, TemplateRow};

const DATASET_HEADER: [&str; 3] = ["ts_tilde", "stage_start", "excluded"];
const TEMPLATE_HEADER: [&str; 2] = ["ts_tilde", "count"];

/// Reads CSV rows after checking the header; yields `(line, fields)`.
fn read_rows<R: Read>(
    reader: R,
    what: &'static str,
    header: &[&str],
) -> Result<Vec<(usize, Vec<String>)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut rows = Vec::new();
    let mut seen_header = false;
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let fields: Vec<String> = rec.iter().map(str::to_owned).collect();
        let is_header = fields.len() == header.len()
            && fields.iter().zip(header).all(|(a, b)| a == b);
        if !seen_header {
            if !is_header {
                return Err(Error::Parse {
                    what,
                    line,
                    message: format!("expected header `{}`", header.join(",")),
                });
            }
            seen_header = true;
            continue;
        }
        if is_header {
            return Err(Error::Parse {
                what,
                line,
                message: "duplicate header".into(),
            });
        }
        if fields.len() != header.len() {
            return Err(Error::Parse {
                what,
                line,
                message: format!("expected {} fields, found {}", header.len(), fields.len()),
            });
        }
        rows.push((line, fields));
    }
    if !seen_header {
        return Err(Error::Parse {
            what,
            line: 1,
            message: format!("missing header `{}`", header.join(",")),
        });
    }
    Ok(rows)
}

fn parse_ts(what: &'static str, line: usize, s: &str) -> Result<f64> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        _ => Err(Error::Parse {
            what,
            line,
            message: format!("ts_tilde must be a finite number >= 0, got `{s}`"),
        }),
    }
}

fn parse_count(what: &'static str, line: usize, field: &str, s: &str) -> Result<u32> {
    s.parse::<u32>().map_err(|_| Error::Parse {
        what,
        line,
        message: format!("{field} must be a nonnegative integer, got `{s}`"),
    })
}

pub fn read_dataset<R: Read>(reader: R, plan: TestPlan) -> Result<Dataset> {
    const WHAT: &str = "dataset";
    let mut obs = Vec::new();
    for (line, f) in read_rows(reader, WHAT, &DATASET_HEADER)? {
        let ts = parse_ts(WHAT, line, &f[0])?;
        let stage_start = parse_count(WHAT, line, "stage_start", &f[1])?;
        let excluded = match f[2].as_str() {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Parse {
                    what: WHAT,
                    line,
                    message: format!("excluded must be 0 or 1, got `{other}`"),
                })
            }
        };
        obs.push(Observation {
            ts,
            stage_start,
            excluded,
        });
    }
    Ok(Dataset::new(obs, plan))
}

pub fn load_dataset(path: impl AsRef<Path>, plan: TestPlan) -> Result<Dataset> {
    read_dataset(std::fs::File::open(path)?, plan)
}

pub fn write_dataset<W: Write>(writer: W, data: &Dataset) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    w.write_record(DATASET_HEADER)?;
    for o in &data.observations {
        w.write_record([
            o.ts.to_string(),
            o.stage_start.to_string(),
            u8::from(o.excluded).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_template<R: Read>(reader: R) -> Result<DesignTemplate> {
    const WHAT: &str = "template";
    let mut rows = Vec::new();
    for (line, f) in read_rows(reader, WHAT, &TEMPLATE_HEADER)? {
        let ts = parse_ts(WHAT, line, &f[0])?;
        let count = parse_count(WHAT, line, "count", &f[1])?;
        if count == 0 {
            return Err(Error::Parse {
                what: WHAT,
                line,
                message: "count must be >= 1".into(),
            });
        }
        rows.push(TemplateRow { ts, count });
    }
    DesignTemplate::new(rows)
}

pub fn load_template(path: impl AsRef<Path>) -> Result<DesignTemplate> {
    read_template(std::fs::File::open(path)?)
}

pub fn read_bins<R: Read>(reader: R) -> Result<BinSpec> {
    let raw: BTreeMap<String, Vec<f64>> = serde_json::from_reader(reader)?;
    let mut groups = Vec::with_capacity(raw.len());
    for (key, edges) in raw {
        let ts = key.trim().parse::<f64>().map_err(|_| {
            Error::InvalidInput(format!("bin key `{key}` is not a ts_tilde value"))
        })?;
        groups.push((ts, edges));
    }
    BinSpec::new(groups)
}

pub fn load_bins(path: impl AsRef<Path>) -> Result<BinSpec> {
    read_bins(std::fs::File::open(path)?)
}
