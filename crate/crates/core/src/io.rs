//! CSV matrices: a header row of feature names, one sample per line.

use std::io::{Read, Write};

use ndarray::Array2;

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CsvMatrix {
    pub header: Vec<String>,
    pub data: Array2<f64>,
}

impl CsvMatrix {
    /// Sub-matrix of the named columns, in the given order.
    pub fn columns(&self, names: &[&str]) -> Result<Array2<f64>> {
        let idx = names
            .iter()
            .map(|name| {
                self.header
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| Error::invalid("column", format!("no column named {name:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.data.select(ndarray::Axis(1), &idx).as_standard_layout().into_owned())
    }
}

pub fn read_csv_matrix<R: Read>(reader: R) -> Result<CsvMatrix> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let d = header.len();
    let mut flat = Vec::new();
    let mut rows = 0usize;
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: record.len(),
            });
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::invalid("csv", format!("row {}, column {}: not a number: {field:?}", i + 1, j))
            })?;
            flat.push(v);
        }
        rows += 1;
    }
    let data = Array2::from_shape_vec((rows, d), flat).expect("shape");
    Ok(CsvMatrix { header, data })
}

pub fn write_csv_matrix<W: Write>(writer: W, header: &[String], data: &Array2<f64>) -> Result<()> {
    if header.len() != data.ncols() {
        return Err(Error::DimensionMismatch {
            expected: header.len(),
            found: data.ncols(),
        });
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header)?;
    for r in data.outer_iter() {
        w.write_record(r.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// `x0, x1, ...` column names.
pub fn default_header(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("x{j}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn round_trip() {
        let x = array![[0.1, -2.0], [1e-300, 3.5]];
        let mut buf = Vec::new();
        write_csv_matrix(&mut buf, &default_header(2), &x).unwrap();
        let back = read_csv_matrix(buf.as_slice()).unwrap();
        assert_eq!(back.header, vec!["x0", "x1"]);
        assert_eq!(back.data, x);
    }

    #[test]
    fn header_only_is_empty() {
        let m = read_csv_matrix("a,b\n".as_bytes()).unwrap();
        assert_eq!(m.data.dim(), (0, 2));
    }

    #[test]
    fn bad_field() {
        assert!(read_csv_matrix("a\n1\nx\n".as_bytes()).is_err());
        assert!(read_csv_matrix("a,b\n1\n".as_bytes()).is_err());
    }
}
