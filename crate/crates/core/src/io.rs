//! File formats shared with the command line tool.
//!
//! * Profiles: a CSV with a single `lambda` column, or a JSON array of numbers.
//! * Datasets: CSV with header `x1,…,xd,lambda` (mean) or `w1,…,wd,y,lambda`
//!   (regression). An optional trailing `corrupted` column (`0`/`1`) is
//!   accepted and kept as a diagnostic.
//! * Configs and scenarios: JSON; schema errors carry a JSON pointer.
//!
//! Floats are written with Rust's shortest round-trip formatting.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;

use crate::error::{Error, Result};
use crate::estimators::{Dataset, Mode};
use crate::profile::CorruptionProfile;

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn record_line(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn parse_number(field: &str, line: u64, column: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| parse_err(line, format!("column {column}: cannot parse {field:?} as a number")))
}

fn parse_lambda(field: &str, line: u64) -> Result<f64> {
    let l = parse_number(field, line, "lambda")?;
    if !(0.0..=1.0).contains(&l) {
        return Err(parse_err(line, format!("lambda out of range at line {line}: {l}")));
    }
    Ok(l)
}

/// Read a profile from `path`; `.json` files are parsed as a JSON array,
/// everything else as CSV.
pub fn read_profile(path: &Path) -> Result<CorruptionProfile> {
    let file = File::open(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        let mut text = String::new();
        BufReader::new(file).read_to_string(&mut text)?;
        parse_profile_json(&text)
    } else {
        parse_profile_csv(file)
    }
}

pub fn parse_profile_json(text: &str) -> Result<CorruptionProfile> {
    let lambdas: Vec<f64> = parse_json(text)?;
    if let Some(i) = lambdas.iter().position(|l| !(0.0..=1.0).contains(l)) {
        return Err(Error::Schema {
            pointer: format!("/{i}"),
            message: format!("lambda out of range: {}", lambdas[i]),
        });
    }
    CorruptionProfile::new(lambdas)
}

pub fn parse_profile_csv<R: Read>(reader: R) -> Result<CorruptionProfile> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() != 1 || &headers[0] != "lambda" {
        return Err(parse_err(1, "expected a single `lambda` column"));
    }
    let mut lambdas = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        lambdas.push(parse_lambda(&rec[0], record_line(&rec))?);
    }
    CorruptionProfile::new(lambdas)
}

pub fn write_profile<W: Write>(profile: &CorruptionProfile, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["lambda"])?;
    for l in profile.in_input_order() {
        wtr.write_record([l.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Column layout implied by a dataset header.
fn dataset_layout(headers: &csv::StringRecord) -> Result<(Mode, usize, bool)> {
    let cols: Vec<&str> = headers.iter().collect();
    let flags = cols.last() == Some(&"corrupted");
    let body = if flags { &cols[..cols.len() - 1] } else { &cols[..] };
    let Some((&"lambda", features)) = body.split_last() else {
        return Err(parse_err(1, "the last data column must be `lambda`"));
    };
    let (mode, prefix, covariates) = match features.split_last() {
        Some((&"y", w)) => (Mode::Regression, "w", w),
        _ => (Mode::Mean, "x", features),
    };
    if covariates.is_empty() {
        return Err(parse_err(1, "no feature columns"));
    }
    for (k, name) in covariates.iter().enumerate() {
        let want = format!("{prefix}{}", k + 1);
        if *name != want {
            return Err(parse_err(1, format!("expected column {want:?}, found {name:?}")));
        }
    }
    Ok((mode, covariates.len(), flags))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    parse_dataset(File::open(path)?)
}

pub fn parse_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let (mode, dim, has_flags) = dataset_layout(&headers)?;
    let width = if mode == Mode::Regression { dim + 1 } else { dim };
    let mut rows = Vec::new();
    let mut lambdas = Vec::new();
    let mut flags = Vec::new();
    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                return Err(parse_err(line, e.to_string()));
            }
        };
        let line = record_line(&rec);
        for k in 0..width {
            let v = parse_number(&rec[k], line, &headers[k])?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("column {}: value is not finite", &headers[k])));
            }
            rows.push(v);
        }
        lambdas.push(parse_lambda(&rec[width], line)?);
        if has_flags {
            flags.push(match rec[width + 1].trim() {
                "0" | "false" => false,
                "1" | "true" => true,
                other => return Err(parse_err(line, format!("column corrupted: expected 0 or 1, found {other:?}"))),
            });
        }
    }
    if lambdas.is_empty() {
        return Err(parse_err(2, "no data rows"));
    }
    let profile = CorruptionProfile::new(lambdas)?;
    let data = match mode {
        Mode::Mean => Dataset::mean(dim, rows, profile)?,
        Mode::Regression => Dataset::regression(dim, rows, profile)?,
    };
    if has_flags {
        data.with_corruption_flags(flags)
    } else {
        Ok(data)
    }
}

/// Write a dataset in the layout [`parse_dataset`] reads. The `corrupted`
/// column is written only when `with_flags` is set and flags are present.
pub fn write_dataset<W: Write>(data: &Dataset, out: W, with_flags: bool) -> Result<()> {
    let d = data.dim();
    let mut header: Vec<String> = match data.mode() {
        Mode::Mean => (1..=d).map(|k| format!("x{k}")).collect(),
        Mode::Regression => (1..=d).map(|k| format!("w{k}")).chain(["y".to_string()]).collect(),
    };
    header.push("lambda".into());
    let flags = data.corruption_flags().filter(|_| with_flags);
    if flags.is_some() {
        header.push("corrupted".into());
    }
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(&header)?;
    let lambdas = data.profile().in_input_order();
    for (i, row) in data.rows().enumerate() {
        let mut rec: Vec<String> = row.iter().map(f64::to_string).collect();
        rec.push(lambdas[i].to_string());
        if let Some(f) = flags {
            rec.push(u8::from(f[i]).to_string());
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Deserialize JSON, reporting schema violations with a JSON pointer.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = json_pointer(e.path());
        Error::Schema { pointer, message: e.into_inner().to_string() }
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    parse_json(&text)
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_csv_and_json() {
        let p = parse_profile_csv("lambda\n0.5\n0\n1\n".as_bytes()).unwrap();
        assert_eq!(p.in_input_order(), vec![0.5, 0.0, 1.0]);
        let err = parse_profile_csv("lambda\n0.5\n1.2\n".as_bytes()).unwrap_err();
        assert_eq!(err.to_string(), "line 3: lambda out of range at line 3: 1.2");
        assert!(parse_profile_csv("rate\n0.5\n".as_bytes()).is_err());
        let p = parse_profile_json("[0.1, 0.2]").unwrap();
        assert_eq!(p.len(), 2);
        assert!(matches!(parse_profile_json("[0.1, 2]"), Err(Error::Schema { pointer, .. }) if pointer == "/1"));
    }

    #[test]
    fn profile_round_trip() {
        let p = CorruptionProfile::new(vec![0.3, 0.1, 0.7]).unwrap();
        let mut buf = Vec::new();
        write_profile(&p, &mut buf).unwrap();
        assert_eq!(parse_profile_csv(buf.as_slice()).unwrap(), p);
    }

    #[test]
    fn dataset_layouts() {
        let d = parse_dataset("x1,x2,lambda\n1,2,0.1\n3,4,0.2\n".as_bytes()).unwrap();
        assert_eq!((d.mode(), d.dim(), d.len()), (Mode::Mean, 2, 2));
        let r = parse_dataset("w1,y,lambda,corrupted\n1,2,0.1,0\n3,4,0.2,1\n".as_bytes()).unwrap();
        assert_eq!((r.mode(), r.dim()), (Mode::Regression, 1));
        assert_eq!(r.corruption_flags(), Some(&[false, true][..]));
        assert!(parse_dataset("x2,lambda\n1,0\n".as_bytes()).is_err());
        assert!(parse_dataset("x1,lambda\n".as_bytes()).is_err());
        let err = parse_dataset("x1,lambda\n1,0\nabc,0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse_dataset("x1,lambda\n1,0\n2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn dataset_round_trip() {
        let text = "w1,w2,y,lambda,corrupted\n0.1,-2,3.5,0.25,1\n1e-300,4,5,1,0\n";
        let d = parse_dataset(text.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_dataset(&d, &mut buf, true).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), text.replace("1e-300", &1e-300f64.to_string()));
    }

    #[test]
    fn schema_errors_carry_pointer() {
        #[derive(serde::Deserialize, Debug)]
        #[allow(dead_code)]
        struct Outer {
            items: Vec<Inner>,
        }
        #[derive(serde::Deserialize, Debug)]
        #[allow(dead_code)]
        struct Inner {
            x: u32,
        }
        let err = parse_json::<Outer>(r#"{"items":[{"x":1},{"x":-1}]}"#).unwrap_err();
        match err {
            Error::Schema { pointer, .. } => assert_eq!(pointer, "/items/1/x"),
            other => panic!("{other}"),
        }
    }
}
