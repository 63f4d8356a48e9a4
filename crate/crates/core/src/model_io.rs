//! Versioned JSON model files.
//!
//! ```text
//! {
//!   "format": "nndm-model",
//!   "version": 1,
//!   "n": …, "p": …,
//!   "prior": { "mu0": [..], "nu0": …, "gamma0": …, "delta0sq": …,
//!              "psi0": { "rows": p, "cols": p, "data": [row-major] },
//!              "alpha": …, "k": … },
//!   "provenance": { "seed": …, "delta0": "default|cv|user", "alpha": "default|rule|user" },
//!   "cv": null | { "grid": [..], "scores": [..], "best": …, "best_score": … },
//!   "posteriors": [ { "mu": [..], "psi": { "rows": p, "cols": p, "data": [..] } }, … ]
//! }
//! ```
//!
//! Floats are written in shortest round-trip form, so a save/load cycle
//! reproduces every stored number bit for bit. `ν_n` and `γ_n` follow from
//! the prior and are not stored per posterior.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{NndmError, Result};
use crate::estimator::{FittedModel, Provenance};
use crate::hyper::{CvResult, Hyperparameters};
use crate::posterior::NeighborhoodPosterior;

pub const FORMAT_TAG: &str = "nndm-model";
pub const FORMAT_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    fn square(data: &[f64], p: usize) -> Matrix {
        Matrix {
            rows: p,
            cols: p,
            data: data.to_vec(),
        }
    }

    fn into_square(self, p: usize, what: &str) -> Result<Vec<f64>> {
        if self.rows != p || self.cols != p || self.data.len() != p * p {
            return Err(invalid_file(format!(
                "{what} must be {p} x {p} with {} entries, found {} x {} with {}",
                p * p,
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        Ok(self.data)
    }
}

#[derive(Serialize, Deserialize)]
struct PriorRecord {
    mu0: Vec<f64>,
    nu0: f64,
    gamma0: f64,
    delta0sq: f64,
    psi0: Matrix,
    alpha: f64,
    k: usize,
}

#[derive(Serialize, Deserialize)]
struct PosteriorRecord {
    mu: Vec<f64>,
    psi: Matrix,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u64,
    n: usize,
    p: usize,
    prior: PriorRecord,
    provenance: Provenance,
    cv: Option<CvResult>,
    posteriors: Vec<PosteriorRecord>,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u64,
}

fn invalid_file(message: String) -> NndmError {
    NndmError::Parse { offset: 0, message }
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let start: usize = text.split_inclusive('\n').take(line - 1).map(str::len).sum();
    (start + column.saturating_sub(1)).min(text.len())
}

fn parse_error(text: &str, err: serde_json::Error) -> NndmError {
    NndmError::Parse {
        offset: byte_offset(text, err.line(), err.column()),
        message: err.to_string(),
    }
}

/// Canonical serialization of `model`.
pub fn to_json_string(model: &FittedModel) -> String {
    let h = model.hyper();
    let p = model.p();
    let file = ModelFile {
        format: FORMAT_TAG.to_string(),
        version: FORMAT_VERSION,
        n: model.n(),
        p,
        prior: PriorRecord {
            mu0: h.mu0().to_vec(),
            nu0: h.nu0(),
            gamma0: h.gamma0(),
            delta0sq: h.delta0sq(),
            psi0: Matrix::square(h.psi0(), p),
            alpha: h.alpha(),
            k: h.k(),
        },
        provenance: *model.provenance(),
        cv: model.cv().cloned(),
        posteriors: model
            .posteriors()
            .iter()
            .map(|q| PosteriorRecord {
                mu: q.mu().to_vec(),
                psi: Matrix::square(q.psi(), p),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("model records always serialize");
    s.push('\n');
    s
}

/// Parses a model from its serialized text.
pub fn from_json_str(text: &str) -> Result<FittedModel> {
    let header: Header = serde_json::from_str(text).map_err(|e| parse_error(text, e))?;
    if header.format != FORMAT_TAG {
        return Err(invalid_file(format!("unknown format tag {:?}", header.format)));
    }
    if header.version > FORMAT_VERSION {
        return Err(NndmError::Version {
            found: header.version,
            supported: FORMAT_VERSION,
        });
    }
    let file: ModelFile = serde_json::from_str(text).map_err(|e| parse_error(text, e))?;
    let p = file.p;
    if file.prior.mu0.len() != p {
        return Err(invalid_file(format!("prior mean has {} entries, p = {p}", file.prior.mu0.len())));
    }
    if file.posteriors.len() != file.n {
        return Err(invalid_file(format!(
            "file declares n = {} but holds {} posteriors",
            file.n,
            file.posteriors.len()
        )));
    }
    let pr = file.prior;
    let hyper = Hyperparameters::from_stored(
        pr.mu0,
        pr.nu0,
        pr.gamma0,
        pr.delta0sq,
        pr.psi0.into_square(p, "psi0")?,
        pr.alpha,
        pr.k,
    )?;
    let (nu_n, gamma_n) = (hyper.nu_n(), hyper.gamma_n());
    let posteriors = file
        .posteriors
        .into_iter()
        .enumerate()
        .map(|(i, rec)| {
            if rec.mu.len() != p {
                return Err(invalid_file(format!("posterior {i} mean has {} entries, p = {p}", rec.mu.len())));
            }
            let psi = rec.psi.into_square(p, "psi")?;
            NeighborhoodPosterior::from_parameters(rec.mu, nu_n, gamma_n, psi)
        })
        .collect::<Result<Vec<_>>>()?;
    FittedModel::from_parts(hyper, posteriors, file.provenance, file.cv)
}

/// Writes the canonical serialization of `model` to `sink`.
pub fn save_model<W: Write>(model: &FittedModel, mut sink: W) -> Result<()> {
    sink.write_all(to_json_string(model).as_bytes())?;
    sink.flush()?;
    Ok(())
}

/// Reads a model written by [`save_model`]. Nothing is returned unless the
/// whole file parses and validates.
pub fn load_model<R: Read>(mut source: R) -> Result<FittedModel> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| NndmError::Parse {
        offset: e.valid_up_to(),
        message: "model file is not valid UTF-8".into(),
    })?;
    from_json_str(text)
}
