//! GMAF1 binary field format.
//!
//! ```text
//! GMAF1\n
//! n res_1 ... res_{2n} kind\n          kind in {real, complex, hermitian}
//! <little-endian f64 payload>
//! ```
//!
//! Points are row-major over the axes with `x_1` fastest. Complex values are
//! interleaved `(re, im)`; Hermitian fields store all `n^2` entries per point.

use std::io::{BufRead, Write};

use num_complex::Complex64 as C64;

use super::{ComplexScalarField, FieldError, HermitianMatrixField, PeriodicGrid};

pub const MAGIC: &str = "GMAF1";

#[derive(Clone, Debug, PartialEq)]
pub enum FieldData {
    Real(ComplexScalarField),
    Complex(ComplexScalarField),
    Hermitian(HermitianMatrixField),
}

impl FieldData {
    pub fn kind(&self) -> &'static str {
        match self {
            FieldData::Real(_) => "real",
            FieldData::Complex(_) => "complex",
            FieldData::Hermitian(_) => "hermitian",
        }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        match self {
            FieldData::Real(f) | FieldData::Complex(f) => f.grid(),
            FieldData::Hermitian(h) => h.grid(),
        }
    }

    /// Scalar field, stored as `real` if flagged real and `complex` otherwise.
    pub fn scalar(f: &ComplexScalarField) -> Self {
        if f.is_real() {
            FieldData::Real(f.clone())
        } else {
            FieldData::Complex(f.clone())
        }
    }
}

pub fn write_field<W: Write>(mut w: W, field: &FieldData) -> Result<(), FieldError> {
    let grid = field.grid();
    let res: Vec<String> = grid.res().iter().map(|r| r.to_string()).collect();
    write!(w, "{MAGIC}\n{} {} {}\n", grid.n(), res.join(" "), field.kind())?;
    let mut buf = Vec::new();
    match field {
        FieldData::Real(f) => {
            buf.reserve(f.values().len() * 8);
            for v in f.values() {
                buf.extend_from_slice(&v.re.to_le_bytes());
            }
        }
        FieldData::Complex(f) => {
            buf.reserve(f.values().len() * 16);
            for v in f.values() {
                buf.extend_from_slice(&v.re.to_le_bytes());
                buf.extend_from_slice(&v.im.to_le_bytes());
            }
        }
        FieldData::Hermitian(h) => {
            buf.reserve(h.data().len() * 16);
            for v in h.data() {
                buf.extend_from_slice(&v.re.to_le_bytes());
                buf.extend_from_slice(&v.im.to_le_bytes());
            }
        }
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

pub fn read_field<R: BufRead>(mut r: R) -> Result<FieldData, FieldError> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    if line != format!("{MAGIC}\n") {
        return Err(FieldError::Format(format!("bad magic {:?}", line.trim_end())));
    }
    line.clear();
    r.read_line(&mut line)?;
    if !line.ends_with('\n') {
        return Err(FieldError::Format("truncated header".into()));
    }
    let tokens: Vec<&str> = line.split_whitespace().collect();
    let n: usize = tokens
        .first()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| FieldError::Format("missing dimension".into()))?;
    if tokens.len() != 2 * n + 2 {
        return Err(FieldError::Format(format!(
            "header has {} tokens, expected {}",
            tokens.len(),
            2 * n + 2
        )));
    }
    let res = tokens[1..=2 * n]
        .iter()
        .map(|t| t.parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| FieldError::Format(format!("bad resolution: {e}")))?;
    let grid = PeriodicGrid::new(n, res)?;
    let kind = tokens[2 * n + 1];
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    let floats_per_point = match kind {
        "real" => 1,
        "complex" => 2,
        "hermitian" => 2 * n * n,
        other => return Err(FieldError::Format(format!("unknown kind {other:?}"))),
    };
    let expected = grid.len() * floats_per_point * 8;
    if payload.len() != expected {
        return Err(FieldError::Format(format!(
            "payload is {} bytes, expected {expected}",
            payload.len()
        )));
    }
    let floats: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let complex = || -> Vec<C64> {
        floats
            .chunks_exact(2)
            .map(|c| C64::new(c[0], c[1]))
            .collect()
    };
    Ok(match kind {
        "real" => FieldData::Real(ComplexScalarField::from_real(&grid, floats)?),
        "complex" => FieldData::Complex(ComplexScalarField::from_complex(&grid, complex())?),
        _ => FieldData::Hermitian(HermitianMatrixField::from_data(&grid, complex())?),
    })
}
