//! Plain-text parameter serialization.
//!
//! One line per tensor: `name,d1 d2 ...,v1,v2,...` with values printed at
//! 17 significant digits so the text round-trips bit-exactly.

use std::io::{BufRead, Write};

use super::tensor::Tensor;
use crate::error::{Error, Result};

pub fn write_tensors<W: Write>(w: &mut W, tensors: &[(String, &Tensor)]) -> Result<()> {
    for (name, t) in tensors {
        if name.contains(',') || name.contains('\n') {
            return Err(Error::Data(format!("tensor name '{name}' not serializable")));
        }
        let shape = t
            .shape()
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        write!(w, "{name},{shape}").map_err(|e| Error::Numeric(e.to_string()))?;
        for v in t.data() {
            write!(w, ",{v:.16e}").map_err(|e| Error::Numeric(e.to_string()))?;
        }
        writeln!(w).map_err(|e| Error::Numeric(e.to_string()))?;
    }
    Ok(())
}

pub fn read_tensors<R: BufRead>(r: &mut R) -> Result<Vec<(String, Tensor)>> {
    let mut out = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::Data(format!("read failure: {e}")))?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split(',');
        let name = fields
            .next()
            .ok_or_else(|| Error::Data(format!("line {}: missing name", lineno + 1)))?
            .to_string();
        let shape_str = fields
            .next()
            .ok_or_else(|| Error::Data(format!("line {}: missing shape", lineno + 1)))?;
        let shape: Vec<usize> = if shape_str.trim().is_empty() {
            vec![]
        } else {
            shape_str
                .split_whitespace()
                .map(|s| {
                    s.parse::<usize>().map_err(|_| {
                        Error::Data(format!("line {}: bad dimension '{s}'", lineno + 1))
                    })
                })
                .collect::<Result<_>>()?
        };
        let data: Vec<f64> = fields
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::Data(format!("line {}: bad value '{s}'", lineno + 1)))
            })
            .collect::<Result<_>>()?;
        out.push((name, Tensor::new(shape, data)?));
    }
    Ok(out)
}
