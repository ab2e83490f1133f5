use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EstimatorError, Network, RegressorSpec};
use crate::dataset::{PreprocessConfig, Target};

pub const MODEL_MAGIC: &[u8; 8] = b"CBLNET\0\0";
pub const MODEL_VERSION: u32 = 1;

/// A trained regressor with everything needed to run it on a raw frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub target: Target,
    pub preprocess: PreprocessConfig,
    pub network: Network,
}

#[derive(Serialize, Deserialize)]
struct Header {
    target: Target,
    preprocess: PreprocessConfig,
    spec: RegressorSpec,
}

/// Layout: magic, `u32` version, `u32` header length, JSON header,
/// `u64` parameter count, little-endian `f32` parameters.
pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<(), EstimatorError> {
    let mut out = BufWriter::new(File::create(path)?);
    write_model(model, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model, EstimatorError> {
    read_model(&mut BufReader::new(File::open(path)?))
}

fn write_model(model: &Model, out: &mut impl Write) -> Result<(), EstimatorError> {
    let header = serde_json::to_vec(&Header {
        target: model.target,
        preprocess: model.preprocess,
        spec: model.network.spec().clone(),
    })
    .map_err(|e| EstimatorError::ModelFormat(e.to_string()))?;
    out.write_all(MODEL_MAGIC)?;
    out.write_all(&MODEL_VERSION.to_le_bytes())?;
    out.write_all(&(header.len() as u32).to_le_bytes())?;
    out.write_all(&header)?;
    let params = model.network.params();
    out.write_all(&(params.len() as u64).to_le_bytes())?;
    for p in params {
        out.write_all(&(*p as f32).to_le_bytes())?;
    }
    Ok(())
}

fn read_model(input: &mut impl Read) -> Result<Model, EstimatorError> {
    let bad = |m: &str| EstimatorError::ModelFormat(m.into());
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MODEL_MAGIC {
        return Err(bad("bad magic"));
    }
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != MODEL_VERSION {
        return Err(EstimatorError::ModelFormat(format!("unsupported version {version}")));
    }
    input.read_exact(&mut word)?;
    let mut header = vec![0u8; u32::from_le_bytes(word) as usize];
    input.read_exact(&mut header)?;
    let header: Header = serde_json::from_slice(&header).map_err(|e| EstimatorError::ModelFormat(e.to_string()))?;
    let mut count = [0u8; 8];
    input.read_exact(&mut count)?;
    let count = u64::from_le_bytes(count) as usize;
    if count != header.spec.param_count() {
        return Err(EstimatorError::ShapeMismatch {
            expected: header.spec.param_count(),
            got: count,
        });
    }
    let mut raw = vec![0u8; count * 4];
    input.read_exact(&mut raw)?;
    let params = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok(Model {
        target: header.target,
        preprocess: header.preprocess,
        network: Network::from_params(header.spec, params)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::init_weights;

    #[test]
    fn roundtrip_rounds_to_f32() {
        let spec = RegressorSpec::compact(16, 16);
        let model = Model {
            target: Target::Distance,
            preprocess: PreprocessConfig::default(),
            network: init_weights(&spec, 1).unwrap(),
        };
        let mut buf = Vec::new();
        write_model(&model, &mut buf).unwrap();
        let back = read_model(&mut buf.as_slice()).unwrap();
        assert_eq!(back.target, Target::Distance);
        assert_eq!(back.network.spec(), &spec);
        for (a, b) in back.network.params().iter().zip(model.network.params()) {
            assert_eq!(*a, *b as f32 as f64);
        }
        let mut again = Vec::new();
        write_model(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn rejects_corruption() {
        let model = Model {
            target: Target::Angle,
            preprocess: PreprocessConfig::default(),
            network: init_weights(&RegressorSpec::compact(16, 16), 1).unwrap(),
        };
        let mut buf = Vec::new();
        write_model(&model, &mut buf).unwrap();
        let mut wrong_magic = buf.clone();
        wrong_magic[0] = b'X';
        assert!(matches!(
            read_model(&mut wrong_magic.as_slice()),
            Err(EstimatorError::ModelFormat(_))
        ));
        let truncated = &buf[..buf.len() - 3];
        assert!(read_model(&mut &truncated[..]).is_err());
    }
}
