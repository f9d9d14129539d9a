//! Ensemble container: the 8-byte magic `AGFENS01`, a little-endian `u64`
//! header length, a JSON header, then for each replicate its seed (`u64`)
//! followed by `points * d` little-endian `f64` values.

use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::ModelSpec;
use crate::error::{Error, Result};

use super::ensemble::GaussianEnsemble;
use super::grid::GridSpec;
use super::sampler::{FieldSample, Method};

pub const MAGIC: &[u8; 8] = b"AGFENS01";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainerHeader {
    pub grid: GridSpec,
    pub d: usize,
    pub method: Method,
    pub base_seed: u64,
    pub replicates: usize,
    pub model: ModelSpec,
}

pub fn write_ensemble<W: Write>(mut w: W, ens: &GaussianEnsemble) -> Result<()> {
    ens.validate()?;
    let first = ens
        .replicates
        .first()
        .ok_or_else(|| Error::Format("cannot write an empty ensemble".into()))?;
    let header = ContainerHeader {
        grid: first.grid.clone(),
        d: first.d,
        method: first.method,
        base_seed: ens.base_seed,
        replicates: ens.len(),
        model: (*first.model).clone(),
    };
    let json = serde_json::to_vec(&header)?;
    w.write_all(MAGIC)?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    let mut buf = Vec::with_capacity(first.values.len() * 8 + 8);
    for r in &ens.replicates {
        buf.clear();
        buf.extend_from_slice(&r.seed.to_le_bytes());
        for v in &r.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_ensemble<R: Read>(mut r: R) -> Result<GaussianEnsemble> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not an ensemble container (bad magic)".into()));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    if len > 1 << 30 {
        return Err(Error::Format(format!("header length {len} is implausible")));
    }
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    let header: ContainerHeader = serde_json::from_slice(&json)?;
    header.grid.validate()?;
    let model = Arc::new(header.model);
    let n = header.grid.len() * header.d;
    let mut bytes = vec![0u8; 8 + 8 * n];
    let mut replicates = Vec::with_capacity(header.replicates);
    for _ in 0..header.replicates {
        r.read_exact(&mut bytes)?;
        let seed = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes"));
        let values: Vec<f64> = bytes[8..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite value in container".into()));
        }
        replicates.push(FieldSample {
            grid: header.grid.clone(),
            d: header.d,
            values,
            model: model.clone(),
            seed,
            method: header.method,
        });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after the last replicate".into()));
    }
    let ens = GaussianEnsemble {
        base_seed: header.base_seed,
        replicates,
    };
    ens.validate()?;
    Ok(ens)
}

/// CSV with columns `i_1..i_N, t_1..t_N, X_1..X_d`.
pub fn write_sample_csv<W: Write>(w: W, sample: &FieldSample) -> Result<()> {
    let n = sample.grid.n_dims();
    let mut out = csv::Writer::from_writer(w);
    let mut head: Vec<String> = (1..=n).map(|j| format!("i_{j}")).collect();
    head.extend((1..=n).map(|j| format!("t_{j}")));
    head.extend((1..=sample.d).map(|i| format!("X_{i}")));
    out.write_record(&head).map_err(csv_err)?;
    for p in 0..sample.len() {
        let idx = sample.grid.index(p);
        let t = sample.grid.point(p);
        let mut row: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
        row.extend(t.iter().map(|x| format!("{x:?}")));
        row.extend(sample.value(p).iter().map(|x| format!("{x:?}")));
        out.write_record(&row).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}
