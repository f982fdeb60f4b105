use std::io::{Read, Write};

use super::index::ComplexIndexSpectrum;
use crate::error::{Error, Result};

/// CSV with columns `frequency_Hz, re_n_plus, im_n_plus, re_n_minus, im_n_minus`.
pub fn write_index_csv<W: Write>(spectrum: &ComplexIndexSpectrum, out: W) -> Result<()> {
    let io = |e: csv::Error| Error::Numeric(format!("csv write failed: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["frequency_Hz", "re_n_plus", "im_n_plus", "re_n_minus", "im_n_minus"])
        .map_err(io)?;
    for i in 0..spectrum.len() {
        let (p, m) = (spectrum.n_plus[i], spectrum.n_minus[i]);
        w.serialize((spectrum.grid.frequency(i), p.re, p.im, m.re, m.im))
            .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Numeric(e.to_string()))
}

pub fn write_index_json<W: Write>(spectrum: &ComplexIndexSpectrum, out: W) -> Result<()> {
    serde_json::to_writer(out, spectrum).map_err(|e| Error::Numeric(format!("json write failed: {e}")))
}

pub fn read_index_json<R: Read>(input: R) -> Result<ComplexIndexSpectrum> {
    serde_json::from_reader(input).map_err(|e| Error::config("index-json", e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::FrequencyGrid;
    use num_complex::Complex64;

    fn sample() -> ComplexIndexSpectrum {
        let grid = FrequencyGrid::new(377e12, 0.0, 2e6, 1e6).unwrap();
        ComplexIndexSpectrum {
            grid,
            n_plus: vec![Complex64::new(1.0 + 1e-7, 2e-8); 3],
            n_minus: vec![Complex64::new(1.0 - 1e-7, 3e-8); 3],
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let mut buf = Vec::new();
        write_index_csv(&sample(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "frequency_Hz,re_n_plus,im_n_plus,re_n_minus,im_n_minus");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("377000000000000"));
    }

    #[test]
    fn json_round_trip() {
        let s = sample();
        let mut buf = Vec::new();
        write_index_json(&s, &mut buf).unwrap();
        assert_eq!(read_index_json(buf.as_slice()).unwrap(), s);
    }
}
