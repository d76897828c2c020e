//! Thin helpers over the `csv` crate for the artifact files.

use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn write_csv<I>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV file, checking that the header equals `expected`.
pub(crate) fn read_csv(path: &Path, expected: &[String]) -> Result<Vec<csv::StringRecord>> {
    if !path.exists() {
        return Err(Error::MissingUpstream(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::parse(
            path.display().to_string(),
            format!(
                "unexpected header `{}`, expected `{}`",
                header.iter().collect::<Vec<_>>().join(","),
                expected.join(",")
            ),
        ));
    }
    r.records().map(|rec| rec.map_err(Error::from)).collect()
}

pub(crate) fn field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, path: &Path) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = rec
        .get(idx)
        .ok_or_else(|| Error::parse(path.display().to_string(), format!("missing column {idx}")))?;
    raw.parse::<T>().map_err(|e| {
        Error::parse(
            path.display().to_string(),
            format!("column {idx} value `{raw}`: {e}"),
        )
    })
}

pub(crate) fn header(names: impl IntoIterator<Item = impl Into<String>>) -> Vec<String> {
    names.into_iter().map(Into::into).collect()
}
