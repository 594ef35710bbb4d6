//! Versioned text checkpoints.
//!
//! ```text
//! luca-ckpt v1
//! # key=value            (optional metadata lines)
//! <name> <rows> <cols>
//! <row 0 values>
//! ...
//! ```
//!
//! Values use Rust's shortest round-trip float formatting, so save then load
//! reproduces every parameter bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Matrix, Parameters};
use crate::error::{Error, Result};

pub const HEADER: &str = "luca-ckpt v1";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub meta: Vec<(String, String)>,
    pub arrays: Vec<(String, Matrix)>,
}

impl Checkpoint {
    pub fn from_params(params: &impl Parameters, meta: Vec<(String, String)>) -> Self {
        let mut arrays = Vec::new();
        params.visit(&mut |name, m| arrays.push((name.to_string(), m.clone())));
        Checkpoint { meta, arrays }
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Copies arrays into `params`; names and shapes must match exactly.
    pub fn load_into(&self, params: &mut impl Parameters) -> Result<()> {
        let mut i = 0;
        let mut err = None;
        params.visit_mut(&mut |name, m| {
            if err.is_some() {
                return;
            }
            match self.arrays.get(i) {
                Some((n, a)) if n == name && a.shape() == m.shape() => {
                    m.as_mut_slice().copy_from_slice(a.as_slice());
                }
                Some((n, a)) => {
                    err = Some(Error::Checkpoint(format!(
                        "array {i}: expected {name} {:?}, found {n} {:?}",
                        m.shape(),
                        a.shape()
                    )))
                }
                None => err = Some(Error::Checkpoint(format!("missing array {name}"))),
            }
            i += 1;
        });
        if let Some(e) = err {
            return Err(e);
        }
        if i != self.arrays.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint holds {} arrays, model has {i}",
                self.arrays.len()
            )));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{HEADER}\n");
        for (k, v) in &self.meta {
            writeln!(out, "# {k}={v}").unwrap();
        }
        for (name, m) in &self.arrays {
            writeln!(out, "{name} {} {}", m.rows(), m.cols()).unwrap();
            for r in 0..m.rows() {
                let row: Vec<String> = m.row(r).iter().map(|x| format!("{x:?}")).collect();
                writeln!(out, "{}", row.join(" ")).unwrap();
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, h)) if h.trim() == HEADER => {}
            Some((_, h)) => {
                return Err(Error::Checkpoint(format!(
                    "unsupported header `{h}` (expected `{HEADER}`)"
                )))
            }
            None => return Err(Error::Checkpoint("empty checkpoint".into())),
        }
        let mut ck = Checkpoint::default();
        while let Some((ln, line)) = lines.next() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(kv) = line.strip_prefix('#') {
                if let Some((k, v)) = kv.trim().split_once('=') {
                    ck.meta.push((k.trim().to_string(), v.trim().to_string()));
                }
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let bad = |m: &str| Error::Checkpoint(format!("line {ln}: {m}"));
            if parts.len() != 3 {
                return Err(bad("expected `<name> <rows> <cols>`"));
            }
            let rows: usize = parts[1].parse().map_err(|_| bad("invalid row count"))?;
            let cols: usize = parts[2].parse().map_err(|_| bad("invalid column count"))?;
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (rl, row) = lines
                    .next()
                    .ok_or_else(|| bad(&format!("truncated array {}", parts[0])))?;
                let before = data.len();
                for tok in row.split_whitespace() {
                    data.push(tok.parse::<f64>().map_err(|_| {
                        Error::Checkpoint(format!("line {rl}: invalid value `{tok}`"))
                    })?);
                }
                if data.len() - before != cols {
                    return Err(Error::Checkpoint(format!(
                        "line {rl}: expected {cols} values"
                    )));
                }
            }
            ck.arrays
                .push((parts[0].to_string(), Matrix::from_vec(rows, cols, data)));
        }
        Ok(ck)
    }
}

pub fn write_checkpoint(params: &impl Parameters, meta: &[(String, String)]) -> String {
    Checkpoint::from_params(params, meta.to_vec()).to_text()
}

pub fn read_checkpoint(text: &str) -> Result<Checkpoint> {
    Checkpoint::parse(text)
}

/// Writes through a temporary file and rename, so an interrupted save never
/// leaves a truncated checkpoint behind.
pub fn save_checkpoint(path: &Path, params: &impl Parameters, meta: &[(String, String)]) -> Result<()> {
    let tmp = path.with_extension("ckpt.tmp");
    fs::write(&tmp, write_checkpoint(params, meta)).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::parse(&text)
}
