//! Model files, round-trip-exact JSON output and CSV tables.

use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::model::{LatticeModel, MmbmModel, Model};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ModelFile {
    Lattice(LatticeFile),
    Mmbm(MmbmFile),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeFile {
    pub phases: usize,
    /// Keyed by the jump size, `"-1"` through `"M"`.
    pub blocks: BTreeMap<String, Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra_killing: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmbmFile {
    pub phases: usize,
    pub drift: Vec<f64>,
    pub sigma2: Vec<f64>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra_killing: Option<Vec<f64>>,
}

fn matrix(rows: &[Vec<f64>], n: usize, what: &str) -> Result<Mat> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Format(format!("{what} must be {n}x{n}")));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Format(format!("{what} has a non-finite entry")));
    }
    Ok(Mat::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn rows_of(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect()
}

impl ModelFile {
    pub fn into_model(self) -> Result<Model> {
        match self {
            ModelFile::Lattice(f) => {
                let n = f.phases;
                if n == 0 {
                    return Err(Error::Format("phases must be positive".into()));
                }
                let mut by_level = BTreeMap::new();
                for (key, rows) in &f.blocks {
                    let level: i64 = key
                        .trim()
                        .parse()
                        .map_err(|_| Error::Format(format!("block key {key:?} is not an integer")))?;
                    if level < -1 {
                        return Err(Error::Format(format!("block {level}: downward jumps are unit steps")));
                    }
                    if by_level.insert(level, matrix(rows, n, &format!("block {key}"))?).is_some() {
                        return Err(Error::Format(format!("block {level} given twice")));
                    }
                }
                for need in [-1, 0] {
                    if !by_level.contains_key(&need) {
                        return Err(Error::Format(format!("block \"{need}\" is required")));
                    }
                }
                // gaps between -1 and the largest jump are zero blocks
                let top = *by_level.keys().next_back().unwrap();
                let blocks = (-1..=top)
                    .map(|l| by_level.remove(&l).unwrap_or_else(|| Mat::zeros(n, n)))
                    .collect();
                let model = LatticeModel::new(blocks)?;
                let model = match f.extra_killing {
                    Some(q) => model.with_killing(&q)?,
                    None => model,
                };
                Ok(Model::Lattice(model))
            }
            ModelFile::Mmbm(f) => {
                let n = f.phases;
                if n == 0 || f.drift.len() != n || f.sigma2.len() != n {
                    return Err(Error::Format(format!("drift and sigma2 must have {n} entries")));
                }
                let q = matrix(&f.q, n, "Q")?;
                Ok(Model::Mmbm(MmbmModel::new(f.drift, f.sigma2, q, f.extra_killing)?))
            }
        }
    }

    /// File form of a model; killing is folded into the generator.
    pub fn from_model(model: &Model) -> Self {
        match model {
            Model::Lattice(m) => {
                let blocks = m
                    .blocks()
                    .iter()
                    .enumerate()
                    .map(|(idx, b)| ((idx as i64 - 1).to_string(), rows_of(b)))
                    .collect();
                ModelFile::Lattice(LatticeFile {
                    phases: m.n_phases(),
                    blocks,
                    extra_killing: None,
                })
            }
            Model::Mmbm(m) => ModelFile::Mmbm(MmbmFile {
                phases: m.n_phases(),
                drift: m.drift().iter().cloned().collect(),
                sigma2: m.sigma2().iter().cloned().collect(),
                q: rows_of(&m.defective_generator()),
                extra_killing: None,
            }),
        }
    }
}

pub fn parse_model(text: &str) -> Result<Model> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    file.into_model()
}

pub fn load_model(path: &Path) -> Result<(Model, String)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let model = parse_model(&text)?;
    let hash = model_hash(&model);
    Ok((model, hash))
}

/// SHA-256 of the canonical 17-digit serialisation, so formatting and key
/// order in the source file do not change the hash.
pub fn model_hash(model: &Model) -> String {
    let canonical = to_json_string(&ModelFile::from_model(model), false);
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// JSON formatter printing every double with 17 significant digits.
/// Non-finite values become `null`.
struct Sig17<F> {
    inner: F,
}

macro_rules! forward {
    ($($name:ident $(, $arg:ident : $ty:ty)*;)*) => {
        $(fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
            self.inner.$name(w $(, $arg)*)
        })*
    };
}

impl<F: serde_json::ser::Formatter> serde_json::ser::Formatter for Sig17<F> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    forward! {
        begin_array;
        end_array;
        begin_array_value, first: bool;
        end_array_value;
        begin_object;
        end_object;
        begin_object_key, first: bool;
        end_object_key;
        begin_object_value;
        end_object_value;
    }
}

pub fn to_json_string<T: Serialize>(value: &T, pretty: bool) -> String {
    let mut buf = Vec::new();
    let result = if pretty {
        let mut ser = serde_json::Serializer::with_formatter(
            &mut buf,
            Sig17 {
                inner: serde_json::ser::PrettyFormatter::new(),
            },
        );
        value.serialize(&mut ser)
    } else {
        let mut ser = serde_json::Serializer::with_formatter(
            &mut buf,
            Sig17 {
                inner: serde_json::ser::CompactFormatter,
            },
        );
        value.serialize(&mut ser)
    };
    result.expect("serialising to memory cannot fail");
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

fn csv_number(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        String::new()
    }
}

/// CSV table: one line per matrix entry, prefixed by the given key columns.
/// Phases are 0-based.
pub fn matrices_csv<'a, I>(key_names: &[&str], items: I) -> String
where
    I: IntoIterator<Item = (Vec<String>, &'a Mat)>,
{
    let mut out = String::new();
    let mut header: Vec<&str> = key_names.to_vec();
    header.extend(["i", "j", "value"]);
    out.push_str(&header.join(","));
    out.push('\n');
    for (keys, m) in items {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let mut line = keys.clone();
                line.extend([i.to_string(), j.to_string(), csv_number(m[(i, j)])]);
                out.push_str(&line.join(","));
                out.push('\n');
            }
        }
    }
    out
}

/// Extrema grid with columns `m, l, i, j, probability`.
pub fn extrema_csv(law: &crate::extrema::ExtremaLaw) -> String {
    let body = matrices_csv(
        &["m", "l"],
        law.cells.iter().map(|c| (vec![c.m.to_string(), c.l.to_string()], &c.prob)),
    );
    body.replacen("m,l,i,j,value", "m,l,i,j,probability", 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BD12: &str = r#"{"type":"lattice","phases":1,"blocks":{"-1":[[2.0]],"0":[[-3.0]],"1":[[1.0]]}}"#;

    #[test]
    fn lattice_round_trip_and_hash() {
        let m = parse_model(BD12).unwrap();
        let spaced = r#"{ "blocks": {"1": [[1]], "0": [[-3]], "-1": [[2]]}, "phases": 1, "type": "lattice" }"#;
        assert_eq!(model_hash(&m), model_hash(&parse_model(spaced).unwrap()));
        let again = to_json_string(&ModelFile::from_model(&m), true);
        assert_eq!(parse_model(&again).unwrap(), m);
    }

    #[test]
    fn unknown_keys_and_bad_shapes_rejected() {
        let extra = r#"{"type":"lattice","phases":1,"blocks":{"-1":[[2]],"0":[[-3]]},"colour":1}"#;
        assert!(matches!(parse_model(extra), Err(Error::Format(_))));
        let shape = r#"{"type":"lattice","phases":2,"blocks":{"-1":[[2]],"0":[[-3]]}}"#;
        assert!(matches!(parse_model(shape), Err(Error::Format(_))));
        let deep = r#"{"type":"lattice","phases":1,"blocks":{"-2":[[1]],"-1":[[2]],"0":[[-3]]}}"#;
        assert!(matches!(parse_model(deep), Err(Error::Format(_))));
        assert!(parse_model(r#"{"type":"levy","phases":1}"#).is_err());
    }

    #[test]
    fn gaps_are_zero_blocks() {
        let m = parse_model(r#"{"type":"lattice","phases":1,"blocks":{"-1":[[2]],"0":[[-3]],"2":[[1]]}}"#).unwrap();
        let Model::Lattice(m) = m else { panic!() };
        assert_eq!(m.max_jump(), 2);
        assert_eq!(m.block(1).unwrap()[(0, 0)], 0.0);
    }

    #[test]
    fn mmbm_with_killing() {
        let text = r#"{"type":"mmbm","phases":2,"drift":[-1,0.5],"sigma2":[1,2],"Q":[[-1,1],[2,-2]],"extra_killing":[0.5,0]}"#;
        let Model::Mmbm(m) = parse_model(text).unwrap() else { panic!() };
        assert_eq!(m.kill_rates()[0], 0.5);
    }

    #[test]
    fn seventeen_digits() {
        let s = to_json_string(&vec![0.1, 1.0, f64::NAN], false);
        assert_eq!(s, "[1.0000000000000001e-1,1.0000000000000000e0,null]");
        let back: Vec<Option<f64>> = serde_json::from_str(&s).unwrap();
        assert_eq!(back[0], Some(0.1));
    }
}
