//! Binary model files: `SCML` magic, little-endian u16 version, u8 family tag,
//! u32 length of the bincode config block, the config block, then the bincode
//! parameter payload.

use std::path::Path;

use super::{Family, LearnerConfig, ModelParams, TrainedModel};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SCML";
pub const MODEL_VERSION: u16 = 1;

#[derive(serde::Serialize, serde::Deserialize)]
struct Payload {
    n_classes: usize,
    n_features: usize,
    params: ModelParams,
}

impl TrainedModel {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let enc = |e: bincode::Error| Error::Format(format!("model encoding: {e}"));
        let config = bincode::serialize(&self.config).map_err(enc)?;
        let payload = bincode::serialize(&Payload {
            n_classes: self.n_classes,
            n_features: self.n_features,
            params: self.params.clone(),
        })
        .map_err(enc)?;
        let mut out = Vec::with_capacity(11 + config.len() + payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.push(self.config.family.tag());
        out.extend_from_slice(&(config.len() as u32).to_le_bytes());
        out.extend_from_slice(&config);
        out.extend_from_slice(&payload);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 11 || &bytes[..4] != MAGIC {
            return Err(Error::Format("not a model file (bad magic)".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != MODEL_VERSION {
            return Err(Error::Format(format!("unsupported model version {version}")));
        }
        let family = Family::from_tag(bytes[6])
            .ok_or_else(|| Error::Format(format!("unknown family tag {}", bytes[6])))?;
        let len = u32::from_le_bytes(bytes[7..11].try_into().unwrap()) as usize;
        let body = &bytes[11..];
        if body.len() < len {
            return Err(Error::Format("truncated model config block".into()));
        }
        let dec = |e: bincode::Error| Error::Format(format!("model decoding: {e}"));
        let config: LearnerConfig = bincode::deserialize(&body[..len]).map_err(dec)?;
        let payload: Payload = bincode::deserialize(&body[len..]).map_err(dec)?;
        if config.family != family {
            return Err(Error::Format("family tag disagrees with config block".into()));
        }
        Ok(TrainedModel {
            config,
            n_classes: payload.n_classes,
            n_features: payload.n_features,
            params: payload.params,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{fit, FeatureMatrix};

    #[test]
    fn round_trip_every_family() {
        let rows: Vec<[f64; 2]> = (0..60).map(|i| [i as f64, (i as f64 * 0.3).sin()]).collect();
        let y: Vec<usize> = (0..60).map(|i| i / 20).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        for family in Family::ALL {
            let mut cfg = LearnerConfig::new(family, 3);
            cfg.n_estimators = 5;
            let m = fit(&cfg, &x, &y, 3).unwrap();
            let back = TrainedModel::from_bytes(&m.to_bytes().unwrap()).unwrap();
            assert_eq!(back, m);
            assert_eq!(back.predict_proba(&x).unwrap(), m.predict_proba(&x).unwrap());
        }
    }

    #[test]
    fn rejects_bad_headers() {
        assert!(matches!(TrainedModel::from_bytes(b"NOPE\x01\x00\x00\x00\x00\x00\x00"), Err(Error::Format(_))));
        let x = FeatureMatrix::from_rows(&[[0.0], [1.0]]).unwrap();
        let m = fit(&LearnerConfig::new(Family::Dt, 0), &x, &[0, 1], 2).unwrap();
        let mut bytes = m.to_bytes().unwrap();
        bytes[4] = 9;
        let err = TrainedModel::from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("version"));
    }
}
