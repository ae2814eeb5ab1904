//! Numeric CSV helpers. Floats are written with the shortest string that
//! parses back to the same value.

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Shortest round-trip representation of `v`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Writes a header and rows of numbers.
pub fn write_table<W: Write>(out: W, header: &[String], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| fmt_f64(*v)))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a square matrix with `names` as the header row.
pub fn write_matrix<W: Write>(out: W, names: &[String], m: &nalgebra::DMatrix<f64>) -> Result<()> {
    write_table(out, names, m.row_iter().map(|r| r.iter().copied().collect()))
}

/// Reads a numeric table, returning the header and the rows.
pub fn read_table<R: Read>(input: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {}: not a number: {s:?}", line + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_exact() {
        let vals = vec![0.1, 1.0 / 3.0, -2.5e-17, 1e300, 0.0];
        let mut buf = Vec::new();
        write_table(&mut buf, &["a".into(), "b".into(), "c".into(), "d".into(), "e".into()], [vals.clone()]).unwrap();
        let (h, rows) = read_table(buf.as_slice()).unwrap();
        assert_eq!(h.len(), 5);
        assert_eq!(rows[0], vals);
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(read_table("t,y\n0,abc\n".as_bytes()), Err(Error::Parse(_))));
    }
}
