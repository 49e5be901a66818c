//! Checkpoint format: a JSON header describing the architecture and tensor
//! table, followed by raw little-endian tensor bytes. Round-trips are
//! bit-exact.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::model::{GruLayer, SharedWeights, EMBED_DIM};
use super::real::Real;
use super::{Nir, NirError, NirSet};

const MAGIC: &[u8; 8] = b"PAPFNIR1";

#[derive(Serialize, Deserialize)]
struct Header {
    dtype: String,
    n_obj: usize,
    tensors: Vec<TensorMeta>,
    members: Vec<MemberMeta>,
}

#[derive(Serialize, Deserialize)]
struct TensorMeta {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct MemberMeta {
    id: String,
    dim: usize,
    target_mean: Vec<f64>,
    target_std: Vec<f64>,
}

fn shared_tensors<T: Real>(shared: &SharedWeights<T>) -> Vec<(String, Vec<usize>, Vec<T>)> {
    let mut out = Vec::new();
    let push2 = |out: &mut Vec<_>, name: &str, a: &Array2<T>| {
        out.push((
            name.to_string(),
            vec![a.nrows(), a.ncols()],
            a.iter().cloned().collect::<Vec<T>>(),
        ));
    };
    let push1 = |out: &mut Vec<_>, name: &str, a: &Array1<T>| {
        out.push((name.to_string(), vec![a.len()], a.iter().cloned().collect::<Vec<T>>()));
    };
    push2(&mut out, "token_embedding", &shared.token_embedding);
    for (tag, layers) in [("encoder", &shared.encoder), ("decoder", &shared.decoder)] {
        for (l, layer) in layers.iter().enumerate() {
            push2(&mut out, &format!("{tag}{l}.w_ih"), &layer.w_ih);
            push2(&mut out, &format!("{tag}{l}.w_hh"), &layer.w_hh);
            push1(&mut out, &format!("{tag}{l}.b_ih"), &layer.b_ih);
            push1(&mut out, &format!("{tag}{l}.b_hh"), &layer.b_hh);
        }
    }
    push2(&mut out, "decoder_out.w", &shared.decoder_out_w);
    push1(&mut out, "decoder_out.b", &shared.decoder_out_b);
    push2(&mut out, "hyper.w1", &shared.hyper_w1);
    push1(&mut out, "hyper.b1", &shared.hyper_b1);
    push2(&mut out, "hyper.w2", &shared.hyper_w2);
    push1(&mut out, "hyper.b2", &shared.hyper_b2);
    out
}

/// Writes a NIR set (shared weights + per-instance embeddings) to one file.
pub fn save_nir_set<T: Real>(set: &NirSet<T>, path: &Path) -> Result<(), NirError> {
    let mut tensors = shared_tensors(&set.shared);
    for m in &set.members {
        tensors.push((
            format!("embedding.{}", m.id),
            vec![EMBED_DIM],
            m.embedding.iter().cloned().collect(),
        ));
    }
    let header = Header {
        dtype: T::DTYPE.to_string(),
        n_obj: set.shared.n_obj,
        tensors: tensors
            .iter()
            .map(|(name, shape, _)| TensorMeta {
                name: name.clone(),
                shape: shape.clone(),
            })
            .collect(),
        members: set
            .members
            .iter()
            .map(|m| MemberMeta {
                id: m.id.clone(),
                dim: m.dim,
                target_mean: m.target_mean.clone(),
                target_std: m.target_std.clone(),
            })
            .collect(),
    };
    let header_json =
        serde_json::to_vec(&header).map_err(|e| NirError::CheckpointIo(e.to_string()))?;

    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&header_json);
    for (_, _, data) in &tensors {
        for &v in data {
            T::write_le(&mut buf, v);
        }
    }
    let mut file = std::fs::File::create(path).map_err(|e| NirError::CheckpointIo(e.to_string()))?;
    file.write_all(&buf)
        .map_err(|e| NirError::CheckpointIo(e.to_string()))
}

/// Reads a NIR set back; the scalar type must match the stored dtype.
pub fn load_nir_set<T: Real>(path: &Path) -> Result<NirSet<T>, NirError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(|e| NirError::CheckpointIo(e.to_string()))?
        .read_to_end(&mut bytes)
        .map_err(|e| NirError::CheckpointIo(e.to_string()))?;
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(NirError::CheckpointFormat("bad magic".into()));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let header: Header = serde_json::from_slice(&bytes[16..16 + header_len])
        .map_err(|e| NirError::CheckpointFormat(e.to_string()))?;
    if header.dtype != T::DTYPE {
        return Err(NirError::CheckpointFormat(format!(
            "dtype {} does not match requested {}",
            header.dtype,
            T::DTYPE
        )));
    }

    let mut offset = 16 + header_len;
    let mut tensors: std::collections::BTreeMap<String, (Vec<usize>, Vec<T>)> = Default::default();
    for meta in &header.tensors {
        let count: usize = meta.shape.iter().product();
        let need = count * T::width();
        if offset + need > bytes.len() {
            return Err(NirError::CheckpointFormat("truncated tensor data".into()));
        }
        let data: Vec<T> = (0..count)
            .map(|i| T::read_le(&bytes, offset + i * T::width()))
            .collect();
        offset += need;
        tensors.insert(meta.name.clone(), (meta.shape.clone(), data));
    }

    let take2 = |tensors: &mut std::collections::BTreeMap<String, (Vec<usize>, Vec<T>)>,
                 name: &str|
     -> Result<Array2<T>, NirError> {
        let (shape, data) = tensors
            .remove(name)
            .ok_or_else(|| NirError::CheckpointFormat(format!("missing tensor {name}")))?;
        Array2::from_shape_vec((shape[0], shape[1]), data)
            .map_err(|e| NirError::CheckpointFormat(e.to_string()))
    };
    let take1 = |tensors: &mut std::collections::BTreeMap<String, (Vec<usize>, Vec<T>)>,
                 name: &str|
     -> Result<Array1<T>, NirError> {
        let (_, data) = tensors
            .remove(name)
            .ok_or_else(|| NirError::CheckpointFormat(format!("missing tensor {name}")))?;
        Ok(Array1::from_vec(data))
    };

    let mut layers = |tag: &str, tensors: &mut std::collections::BTreeMap<String, (Vec<usize>, Vec<T>)>| -> Result<Vec<GruLayer<T>>, NirError> {
        (0..2)
            .map(|l| {
                Ok(GruLayer {
                    w_ih: take2(tensors, &format!("{tag}{l}.w_ih"))?,
                    w_hh: take2(tensors, &format!("{tag}{l}.w_hh"))?,
                    b_ih: take1(tensors, &format!("{tag}{l}.b_ih"))?,
                    b_hh: take1(tensors, &format!("{tag}{l}.b_hh"))?,
                })
            })
            .collect()
    };

    let shared = SharedWeights {
        token_embedding: take2(&mut tensors, "token_embedding")?,
        encoder: layers("encoder", &mut tensors)?,
        decoder: layers("decoder", &mut tensors)?,
        decoder_out_w: take2(&mut tensors, "decoder_out.w")?,
        decoder_out_b: take1(&mut tensors, "decoder_out.b")?,
        hyper_w1: take2(&mut tensors, "hyper.w1")?,
        hyper_b1: take1(&mut tensors, "hyper.b1")?,
        hyper_w2: take2(&mut tensors, "hyper.w2")?,
        hyper_b2: take1(&mut tensors, "hyper.b2")?,
        n_obj: header.n_obj,
    };
    let shared = Arc::new(shared);
    let members = header
        .members
        .iter()
        .map(|m| {
            let e = take1(&mut tensors, &format!("embedding.{}", m.id))?;
            Ok(Nir::new(
                Arc::clone(&shared),
                e,
                m.target_mean.clone(),
                m.target_std.clone(),
                m.dim,
                m.id.clone(),
            ))
        })
        .collect::<Result<Vec<_>, NirError>>()?;
    Ok(NirSet { shared, members })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{BitVector, Evaluable};
    use crate::seeding::rng_from;
    use rand::Rng;

    #[test]
    fn checkpoint_round_trips_bit_exactly() {
        let shared = SharedWeights::<f32>::init(3, 5);
        let mut rng = rng_from(1);
        let shared = Arc::new(shared);
        let members: Vec<Nir<f32>> = (0..2)
            .map(|i| {
                let e = Array1::from_shape_fn(EMBED_DIM, |_| rng.random_range(-1.0..1.0f32));
                Nir::new(
                    Arc::clone(&shared),
                    e,
                    vec![0.5, 1.5, -1.0],
                    vec![1.0, 2.0, 3.0],
                    10,
                    format!("nir-{i}"),
                )
            })
            .collect();
        let set = NirSet {
            shared: Arc::clone(&shared),
            members,
        };

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.ckpt");
        save_nir_set(&set, &path).unwrap();
        let loaded = load_nir_set::<f32>(&path).unwrap();

        assert_eq!(loaded.members.len(), 2);
        let x = BitVector::parse("1100110011").unwrap();
        for (a, b) in set.members.iter().zip(&loaded.members) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.embedding, b.embedding);
            assert_eq!(a.evaluate(&x), b.evaluate(&x), "bit-exact behavior");
        }
        // wrong dtype is rejected
        assert!(load_nir_set::<f64>(&path).is_err());
    }
}
