//! Checkpoint files: a one-line JSON header followed by raw parameters.
//!
//! The header records the model kind, dimension, norm exponent, table sizes
//! and the run's root seed. After the newline the file carries every
//! parameter as a 64-bit little-endian float: the entity table, the relation
//! table, then (for models that have it) the scalar phase-mixing weight.
//! Writes go through a temp file and an atomic rename, so a crash never
//! leaves a half-written checkpoint at the target path.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::{ModelKind, ModelParams};

/// Metadata line at the top of a checkpoint file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub model: ModelKind,
    pub dim: usize,
    pub p_norm: u32,
    pub n_entities: usize,
    pub n_relations: usize,
    /// Root seed of the run that produced the parameters.
    pub seed: u64,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_owned(),
        source,
    }
}

/// Write `params` to `path` atomically.
pub fn save(path: &Path, params: &ModelParams, seed: u64) -> Result<()> {
    let header = CheckpointHeader {
        model: params.kind,
        dim: params.dim,
        p_norm: params.p_norm,
        n_entities: params.n_entities,
        n_relations: params.n_relations,
        seed,
    };
    let tmp_path = path.with_extension("tmp");
    {
        let file = File::create(&tmp_path).map_err(io_err(&tmp_path))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer(&mut w, &header)
            .map_err(|e| Error::BadCheckpoint(format!("header encoding failed: {e}")))?;
        w.write_all(b"\n").map_err(io_err(&tmp_path))?;
        for v in params.entities.iter().chain(&params.relations) {
            w.write_all(&v.to_le_bytes()).map_err(io_err(&tmp_path))?;
        }
        if params.kind.has_lambda() {
            w.write_all(&params.lambda.to_le_bytes())
                .map_err(io_err(&tmp_path))?;
        }
        w.flush().map_err(io_err(&tmp_path))?;
    }
    fs::rename(&tmp_path, path).map_err(io_err(path))?;
    Ok(())
}

/// Read a checkpoint back into parameters plus its header.
pub fn load(path: &Path) -> Result<(ModelParams, CheckpointHeader)> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut r = BufReader::new(file);

    let mut header_bytes = Vec::new();
    let mut one = [0u8; 1];
    loop {
        let n = r.read(&mut one).map_err(io_err(path))?;
        if n == 0 {
            return Err(Error::BadCheckpoint(
                "file ended before the header line".into(),
            ));
        }
        if one[0] == b'\n' {
            break;
        }
        header_bytes.push(one[0]);
        if header_bytes.len() > 1 << 16 {
            return Err(Error::BadCheckpoint("header line unreasonably long".into()));
        }
    }
    let header: CheckpointHeader = serde_json::from_slice(&header_bytes)
        .map_err(|e| Error::BadCheckpoint(format!("bad header: {e}")))?;
    if header.dim == 0 || header.n_entities == 0 || header.n_relations == 0 {
        return Err(Error::BadCheckpoint("header declares empty tables".into()));
    }
    if header.p_norm != 1 && header.p_norm != 2 {
        return Err(Error::BadCheckpoint(format!(
            "unsupported norm exponent {}",
            header.p_norm
        )));
    }

    let n_ent = header.n_entities * header.model.entity_stride(header.dim);
    let n_rel = header.n_relations * header.model.relation_stride(header.dim);
    let n_scalar = usize::from(header.model.has_lambda());
    let expected = (n_ent + n_rel + n_scalar) * 8;

    let mut body = Vec::with_capacity(expected);
    r.read_to_end(&mut body).map_err(io_err(path))?;
    if body.len() != expected {
        return Err(Error::BadCheckpoint(format!(
            "expected {expected} parameter bytes, found {}",
            body.len()
        )));
    }

    let mut values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let entities: Vec<f64> = values.by_ref().take(n_ent).collect();
    let relations: Vec<f64> = values.by_ref().take(n_rel).collect();
    let lambda = values.next().unwrap_or(0.0);

    let params = ModelParams {
        kind: header.model,
        dim: header.dim,
        p_norm: header.p_norm,
        n_entities: header.n_entities,
        n_relations: header.n_relations,
        entities,
        relations,
        lambda,
    };
    Ok((params, header))
}

/// Check that a checkpoint matches the dataset it is being applied to.
pub fn check_vocab(header: &CheckpointHeader, n_entities: usize, n_relations: usize) -> Result<()> {
    if header.n_entities != n_entities || header.n_relations != n_relations {
        return Err(Error::VocabMismatch {
            ckpt_entities: header.n_entities,
            ckpt_relations: header.n_relations,
            data_entities: n_entities,
            data_relations: n_relations,
        });
    }
    Ok(())
}
