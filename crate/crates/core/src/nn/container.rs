//! Text container for trained networks.
//!
//! ```text
//! pra-model 1
//! network <name> <layer-count>
//! dense <in> <out> <activation>
//! weights <out·in values, row-major>
//! bias <out values>
//! equivariant <blocks> <d_in> <d_out> <activation>
//! u <d_out·d_in values, row-major>
//! v <d_out·d_in values, row-major>
//! bias <d_out values>
//! end
//! ```
//!
//! Tokens are separated by single spaces, one record per line. Values are
//! written with Rust's shortest round-trip `f64` formatting, so reading a
//! file back reproduces every parameter bit for bit. A file holds any number
//! of named networks followed by `end`. Lines starting with `#` are
//! comments and may appear anywhere.

use std::io::{BufRead, Write};

use super::activation::Activation;
use super::dense::DenseLayer;
use super::matrix::Matrix;
use super::mlp::{Layer, Mlp};
use crate::equivariant::EquivariantLayer;
use crate::error::{Error, Result};

pub const MAGIC: &str = "pra-model";
pub const VERSION: u32 = 1;

fn write_values<W: Write>(w: &mut W, tag: &str, values: &[f64]) -> Result<()> {
    write!(w, "{tag}")?;
    for v in values {
        write!(w, " {v}")?;
    }
    writeln!(w)?;
    Ok(())
}

pub fn write_models<W: Write>(w: &mut W, nets: &[(&str, &Mlp)]) -> Result<()> {
    writeln!(w, "{MAGIC} {VERSION}")?;
    for (name, net) in nets {
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::Format(format!("invalid network name {name:?}")));
        }
        writeln!(w, "network {name} {}", net.layers().len())?;
        for layer in net.layers() {
            match layer {
                Layer::Dense(l) => {
                    writeln!(
                        w,
                        "dense {} {} {}",
                        l.in_dim(),
                        l.out_dim(),
                        l.activation().name()
                    )?;
                    write_values(w, "weights", l.weights().data())?;
                    write_values(w, "bias", l.bias())?;
                }
                Layer::Equivariant(l) => {
                    writeln!(
                        w,
                        "equivariant {} {} {} {}",
                        l.blocks(),
                        l.block_in(),
                        l.block_out(),
                        l.activation().name()
                    )?;
                    write_values(w, "u", l.u().data())?;
                    write_values(w, "v", l.v().data())?;
                    write_values(w, "bias", l.bias())?;
                }
            }
        }
    }
    writeln!(w, "end")?;
    Ok(())
}

struct Lines<R> {
    inner: R,
    line_no: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self) -> Result<String> {
        loop {
            let mut buf = String::new();
            if self.inner.read_line(&mut buf)? == 0 {
                return Err(Error::Format(format!(
                    "unexpected end of file after line {}",
                    self.line_no
                )));
            }
            self.line_no += 1;
            if !buf.starts_with('#') {
                return Ok(buf.trim_end_matches(['\n', '\r']).to_string());
            }
        }
    }

    fn err(&self, msg: impl std::fmt::Display) -> Error {
        Error::Format(format!("line {}: {msg}", self.line_no))
    }

    fn values(&mut self, tag: &str, count: usize) -> Result<Vec<f64>> {
        let line = self.next_line()?;
        let mut tokens = line.split(' ');
        if tokens.next() != Some(tag) {
            return Err(self.err(format!("expected `{tag}` record")));
        }
        let vals = tokens
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| self.err(e))?;
        if vals.len() != count {
            return Err(self.err(format!(
                "`{tag}` needs {count} values, found {}",
                vals.len()
            )));
        }
        Ok(vals)
    }
}

fn parse_usize(lines: &Lines<impl BufRead>, tok: Option<&str>) -> Result<usize> {
    tok.ok_or_else(|| lines.err("missing field"))?
        .parse()
        .map_err(|e| lines.err(e))
}

fn parse_activation(lines: &Lines<impl BufRead>, tok: Option<&str>) -> Result<Activation> {
    let t = tok.ok_or_else(|| lines.err("missing activation"))?;
    Activation::from_name(t).ok_or_else(|| lines.err(format!("unknown activation {t:?}")))
}

pub fn read_models<R: BufRead>(reader: R) -> Result<Vec<(String, Mlp)>> {
    let mut lines = Lines {
        inner: reader,
        line_no: 0,
    };
    let header = lines.next_line()?;
    if header != format!("{MAGIC} {VERSION}") {
        return Err(lines.err(format!("bad header {header:?}")));
    }
    let mut out = Vec::new();
    loop {
        let line = lines.next_line()?;
        let mut tok = line.split(' ');
        match tok.next() {
            Some("end") => return Ok(out),
            Some("network") => {
                let name = tok
                    .next()
                    .ok_or_else(|| lines.err("missing name"))?
                    .to_string();
                let count = parse_usize(&lines, tok.next())?;
                let mut layers = Vec::with_capacity(count);
                for _ in 0..count {
                    let line = lines.next_line()?;
                    let mut tok = line.split(' ');
                    match tok.next() {
                        Some("dense") => {
                            let i = parse_usize(&lines, tok.next())?;
                            let o = parse_usize(&lines, tok.next())?;
                            let act = parse_activation(&lines, tok.next())?;
                            let w = lines.values("weights", i * o)?;
                            let b = lines.values("bias", o)?;
                            layers
                                .push(DenseLayer::new(Matrix::from_vec(o, i, w)?, b, act)?.into());
                        }
                        Some("equivariant") => {
                            let k = parse_usize(&lines, tok.next())?;
                            let i = parse_usize(&lines, tok.next())?;
                            let o = parse_usize(&lines, tok.next())?;
                            let act = parse_activation(&lines, tok.next())?;
                            let u = lines.values("u", i * o)?;
                            let v = lines.values("v", i * o)?;
                            let b = lines.values("bias", o)?;
                            layers.push(
                                EquivariantLayer::new(
                                    Matrix::from_vec(o, i, u)?,
                                    Matrix::from_vec(o, i, v)?,
                                    b,
                                    k,
                                    act,
                                )?
                                .into(),
                            );
                        }
                        other => return Err(lines.err(format!("unknown layer kind {other:?}"))),
                    }
                }
                out.push((name, Mlp::new(layers)?));
            }
            other => return Err(lines.err(format!("unexpected record {other:?}"))),
        }
    }
}
