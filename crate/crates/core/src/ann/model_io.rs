//! Plain-text model files.
//!
//! ```text
//! faultnet-model 1
//! layers 4 50 50 4
//! activations tansig tansig logsig
//! normalizer 1e-12 <mu x4> <sigma x4>      (or `normalizer none`)
//! layer 0
//! <one weight row per line>
//! bias <values>
//! layer 1
//! ...
//! ```
//!
//! Values use Rust's shortest round-trip decimal form, so reading a written
//! model reproduces every parameter bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::network::{Activation, LayerSpec, Network};
use crate::dataset::Normalizer;
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "faultnet-model";

fn join(vals: &[f64]) -> String {
    vals.iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn write_model<W: Write>(net: &Network, mut w: W) -> Result<()> {
    let specs = net.specs();
    writeln!(w, "{MAGIC} {MODEL_FORMAT_VERSION}")?;
    let mut dims = vec![specs[0].in_dim.to_string()];
    dims.extend(specs.iter().map(|s| s.out_dim.to_string()));
    writeln!(w, "layers {}", dims.join(" "))?;
    let acts: Vec<_> = specs.iter().map(|s| s.activation.name()).collect();
    writeln!(w, "activations {}", acts.join(" "))?;
    match &net.normalizer {
        Some(n) => writeln!(
            w,
            "normalizer {} {} {}",
            n.epsilon,
            join(&n.mean),
            join(&n.std)
        )?,
        None => writeln!(w, "normalizer none")?,
    }
    for (l, s) in specs.iter().enumerate() {
        writeln!(w, "layer {l}")?;
        let (wt, b) = net.layer(l);
        for row in wt.chunks_exact(s.in_dim) {
            writeln!(w, "{}", join(row))?;
        }
        writeln!(w, "bias {}", join(b))?;
    }
    w.flush()?;
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line_no: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self) -> Result<String> {
        loop {
            self.line_no += 1;
            match self.inner.next() {
                Some(l) => {
                    let l = l?;
                    if !l.trim().is_empty() {
                        return Ok(l);
                    }
                }
                None => return Err(self.err("unexpected end of file")),
            }
        }
    }

    fn err(&self, msg: impl std::fmt::Display) -> Error {
        Error::Parse(format!("model line {}: {msg}", self.line_no))
    }

    /// Next line, which must start with `key`; returns the remaining tokens.
    fn keyed(&mut self, key: &str) -> Result<Vec<String>> {
        let line = self.next_line()?;
        let mut toks = line.split_whitespace();
        if toks.next() != Some(key) {
            return Err(self.err(format!("expected `{key}`")));
        }
        Ok(toks.map(str::to_string).collect())
    }

    fn floats(&self, toks: &[String], expect: usize) -> Result<Vec<f64>> {
        if toks.len() != expect {
            return Err(self.err(format!("expected {expect} values, found {}", toks.len())));
        }
        toks.iter()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| self.err(format!("bad number `{t}`")))
            })
            .collect()
    }
}

pub fn read_model<R: BufRead>(r: R) -> Result<Network> {
    let mut lines = Lines {
        inner: r.lines(),
        line_no: 0,
    };
    let header = lines.keyed(MAGIC)?;
    match header.as_slice() {
        [v] if v.parse::<u32>().ok() == Some(MODEL_FORMAT_VERSION) => {}
        _ => return Err(lines.err("unsupported model version")),
    }
    let dims: Vec<usize> = lines
        .keyed("layers")?
        .iter()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| lines.err("bad layer dimension"))?;
    if dims.len() < 2 {
        return Err(lines.err("need at least two layer dimensions"));
    }
    let acts = lines.keyed("activations")?;
    if acts.len() != dims.len() - 1 {
        return Err(lines.err("activation count does not match layers"));
    }
    let mut specs = Vec::new();
    for (i, a) in acts.iter().enumerate() {
        let activation = Activation::from_name(a)
            .ok_or_else(|| lines.err(format!("unknown activation `{a}`")))?;
        specs.push(LayerSpec {
            in_dim: dims[i],
            out_dim: dims[i + 1],
            activation,
        });
    }
    let ntoks = lines.keyed("normalizer")?;
    let normalizer = if ntoks.len() == 1 && ntoks[0] == "none" {
        None
    } else {
        let v = lines.floats(&ntoks, 9)?;
        let n = Normalizer {
            epsilon: v[0],
            mean: [v[1], v[2], v[3], v[4]],
            std: [v[5], v[6], v[7], v[8]],
        };
        if n.std.iter().any(|s| !(*s > 0.0)) {
            return Err(lines.err("normalizer std must be positive"));
        }
        Some(n)
    };
    let mut params = Vec::new();
    for (l, s) in specs.iter().enumerate() {
        let idx = lines.keyed("layer")?;
        if idx.len() != 1 || idx[0].parse::<usize>().ok() != Some(l) {
            return Err(lines.err(format!("expected layer {l}")));
        }
        for _ in 0..s.out_dim {
            let line = lines.next_line()?;
            let toks: Vec<String> = line.split_whitespace().map(str::to_string).collect();
            params.extend(lines.floats(&toks, s.in_dim)?);
        }
        let b = lines.keyed("bias")?;
        params.extend(lines.floats(&b, s.out_dim)?);
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(lines.err("non-finite parameter"));
    }
    Network::from_parts(specs, params, normalizer)
}

fn format_err(path: &Path, e: Error) -> Error {
    match e {
        Error::Io(_)
        | Error::Parse(_)
        | Error::DimensionMismatch { .. }
        | Error::InvalidConfig(_) => Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        },
        other => other,
    }
}

impl Network {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| format_err(path, e.into()))?;
        write_model(self, BufWriter::new(f)).map_err(|e| format_err(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| format_err(path, e.into()))?;
        read_model(BufReader::new(f)).map_err(|e| format_err(path, e))
    }
}
