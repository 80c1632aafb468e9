//! Dataset ingestion: CSV files with a `y,x1,x2` header.

use std::path::Path;

use crate::error::Error;
use crate::geometry::Point;

/// Raw outcome and score columns as loaded from disk.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub y: Vec<f64>,
    pub x: Vec<Point>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Parse CSV text. The header must contain `y`, `x1`, `x2` (any order);
/// extra columns are ignored.
pub fn parse_dataset(text: &str) -> Result<Dataset, Error> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or(Error::Parse { line: 1, msg: "empty file, expected a `y,x1,x2` header".into() })?;
    let cols: Vec<&str> = header.split(',').map(|c| c.trim()).collect();
    let find = |name: &str| -> Result<usize, Error> {
        cols.iter().position(|&c| c == name).ok_or(Error::Parse {
            line: 1,
            msg: format!("header is missing column `{name}`"),
        })
    };
    let iy = find("y")?;
    let ix1 = find("x1")?;
    let ix2 = find("x2")?;

    let mut ds = Dataset::default();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').map(|c| c.trim()).collect();
        let need = iy.max(ix1).max(ix2);
        if fields.len() <= need {
            return Err(Error::Parse { line: line_no, msg: format!("expected at least {} fields", need + 1) });
        }
        let parse = |s: &str| -> Result<f64, Error> {
            s.parse::<f64>().map_err(|_| Error::Parse { line: line_no, msg: format!("bad number `{s}`") })
        };
        let y = parse(fields[iy])?;
        let x1 = parse(fields[ix1])?;
        let x2 = parse(fields[ix2])?;
        if !(y.is_finite() && x1.is_finite() && x2.is_finite()) {
            return Err(Error::NonFinite { line: line_no });
        }
        ds.y.push(y);
        ds.x.push(Point::new(x1, x2));
    }
    Ok(ds)
}

pub fn load_dataset(path: &Path) -> Result<Dataset, Error> {
    parse_dataset(&std::fs::read_to_string(path)?)
}

/// Write a dataset in the same format `load_dataset` reads, floats with 17
/// significant digits.
pub fn write_dataset_string(ds: &Dataset) -> String {
    let mut out = String::from("y,x1,x2\n");
    for i in 0..ds.len() {
        out.push_str(&format!(
            "{},{},{}\n",
            crate::emit::fmt_f64(ds.y[i]),
            crate::emit::fmt_f64(ds.x[i].x1),
            crate::emit::fmt_f64(ds.x[i].x2)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn well_formed_rows() {
        let ds = parse_dataset("y,x1,x2\n1,0.5,0.5\n2,-0.5,0.25\n0,0,0\n").unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.x[1], Point::new(-0.5, 0.25));
    }

    #[test]
    fn header_only_is_empty() {
        let ds = parse_dataset("y,x1,x2\n").unwrap();
        assert_eq!(ds.len(), 0);
    }

    #[test]
    fn parse_error_carries_line() {
        let err = parse_dataset("y,x1,x2\n1,2,abc\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_finite_rejected() {
        let err = parse_dataset("y,x1,x2\n1,2,inf\n").unwrap_err();
        assert!(matches!(err, Error::NonFinite { line: 2 }));
    }

    #[test]
    fn extra_columns_ignored() {
        let ds = parse_dataset("id,y,x1,x2,weight\n7,1.5,0.1,0.2,9\n").unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.y[0], 1.5);
    }

    #[test]
    fn round_trip() {
        let ds = parse_dataset("y,x1,x2\n1.25,-0.5,0.75\n").unwrap();
        let text = write_dataset_string(&ds);
        let back = parse_dataset(&text).unwrap();
        assert_eq!(back.y, ds.y);
        assert_eq!(back.x, ds.x);
    }
}
