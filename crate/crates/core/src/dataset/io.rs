//! CSV dataset files.
//!
//! Two `#` lines lead the file: the format tag, then the metadata as one
//! JSON object. A single header row and the records follow. Values are
//! written with 17 significant digits, which round-trips every `f64`.

use std::io::{BufRead, BufReader, Read, Write};

use super::{Dataset, DatasetMeta, ValuationRecord};
use crate::error::{Error, Result};

pub const DATASET_FORMAT: &str = "surrogate-dataset/v1";
const META_PREFIX: &str = "# meta ";

pub fn write_dataset<W: Write>(d: &Dataset, mut w: W) -> Result<()> {
    writeln!(w, "# {DATASET_FORMAT}")?;
    writeln!(w, "{META_PREFIX}{}", serde_json::to_string(&d.meta)?)?;
    let mode = d.mode();
    let mut out = csv::Writer::from_writer(w);
    out.write_record(mode.input_names().iter().chain(mode.target_names()))?;
    for r in &d.records {
        out.write_record(r.x.iter().chain(&r.y).map(|v| format!("{v:.16e}")))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_dataset<R: Read>(r: R) -> Result<Dataset> {
    let mut r = BufReader::new(r);
    let mut line = String::new();
    r.read_line(&mut line)?;
    if line.trim_end() != format!("# {DATASET_FORMAT}") {
        return Err(Error::Schema(format!("expected `# {DATASET_FORMAT}` on the first line")));
    }
    line.clear();
    r.read_line(&mut line)?;
    let meta: DatasetMeta = match line.trim_end().strip_prefix(META_PREFIX) {
        Some(json) => serde_json::from_str(json)?,
        None => return Err(Error::Schema("missing metadata line".into())),
    };

    let mode = meta.mode;
    let (nx, ny) = (mode.input_dim(), mode.target_names().len());
    let mut rows = csv::Reader::from_reader(r);
    let expected: Vec<&str> = mode.input_names().iter().chain(mode.target_names()).copied().collect();
    let header: Vec<String> = rows.headers()?.iter().map(str::to_string).collect();
    if header != expected {
        return Err(Error::Schema(format!("header {header:?} does not match mode {mode}: {expected:?}")));
    }
    let mut records = Vec::new();
    for row in rows.records() {
        let row = row?;
        let values = row
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| Error::Schema(format!("bad number `{s}`: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != nx + ny {
            return Err(Error::DimensionMismatch {
                expected: nx + ny,
                got: values.len(),
            });
        }
        records.push(ValuationRecord {
            x: values[..nx].to_vec(),
            y: values[nx..].to_vec(),
        });
    }
    Ok(Dataset { meta, records })
}
