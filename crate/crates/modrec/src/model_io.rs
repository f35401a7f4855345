//! One on-disk container for every trained model.
//!
//! Layout: magic `RMM1`, format version, a JSON header (model kind, layer
//! list/architecture or the full classical model, array directory), then the
//! bulk weights as raw little-endian f64 — so network parameters round-trip
//! bit-exactly and a hex dump starts with something greppable.

use crate::baselines::Classifier;
use crate::features::Standardizer;
use crate::iq::SeedSpec;
use crate::nn::{Model, ModelError, ModelSpec};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

pub const MODEL_MAGIC: [u8; 4] = *b"RMM1";
pub const MODEL_FORMAT_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a model file: bad magic")]
    BadMagic,
    #[error("unsupported model format version {got}")]
    BadVersion { got: u16 },
    #[error("model file truncated at byte {offset}")]
    Truncated { offset: usize },
    #[error("malformed model header: {reason}")]
    BadHeader { reason: String },
    #[error("array {name}: header declares {want} values, file holds {got}")]
    ArrayLen { name: String, want: u64, got: u64 },
    #[error("model file has {extra} trailing bytes")]
    TrailingBytes { extra: usize },
    #[error("saved parameters do not fit the declared architecture")]
    ParamShape,
    #[error("not a neural-network model")]
    NotANet,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A trained classifier ready to persist: either a network (architecture +
/// weight arrays, plus the feature standardizer when it eats features) or a
/// classical model bundled with its standardizer.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Net {
        spec: ModelSpec,
        params: Vec<Vec<f64>>,
        norm: Option<Standardizer>,
    },
    Classical {
        clf: Classifier,
        norm: Standardizer,
    },
}

#[derive(Serialize, Deserialize)]
struct ArrayDesc {
    name: String,
    len: u64,
}

#[derive(Serialize, Deserialize)]
enum HeaderMeta {
    Net { spec: ModelSpec, norm: bool },
    Classical { clf: Classifier, norm: Standardizer },
}

#[derive(Serialize, Deserialize)]
struct Header {
    kind: String,
    meta: HeaderMeta,
    arrays: Vec<ArrayDesc>,
}

impl TrainedModel {
    /// Snapshot a network's current weights for saving.
    pub fn from_net(model: &Model, norm: Option<Standardizer>) -> Self {
        TrainedModel::Net {
            spec: model.spec.clone(),
            params: model.params().iter().map(|p| p.to_vec()).collect(),
            norm,
        }
    }

    /// Short name of the model family ("cnn", "knn1", ...).
    pub fn kind(&self) -> String {
        match self {
            TrainedModel::Net { spec, .. } => spec.name.clone(),
            TrainedModel::Classical { clf, .. } => clf.kind().to_string(),
        }
    }

    /// True when the model consumes 32-feature rows rather than raw IQ.
    pub fn wants_features(&self) -> bool {
        match self {
            TrainedModel::Net { spec, .. } => spec.input_shape.len() == 1,
            TrainedModel::Classical { .. } => true,
        }
    }

    /// Rebuild a runnable network from the stored architecture and weights.
    pub fn net_model(&self) -> Result<Model, ModelIoError> {
        let TrainedModel::Net { spec, params, .. } = self else {
            return Err(ModelIoError::NotANet);
        };
        let mut model = Model::build(spec.clone(), SeedSpec::new(0, 0))?;
        {
            let mut slots = model.params_mut();
            if slots.len() != params.len()
                || slots.iter().zip(params).any(|(s, p)| s.len() != p.len())
            {
                return Err(ModelIoError::ParamShape);
            }
            for (s, p) in slots.iter_mut().zip(params) {
                s.copy_from_slice(p);
            }
        }
        Ok(model)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let (header, payload): (Header, Vec<&[f64]>) = match self {
            TrainedModel::Net { spec, params, norm } => {
                let mut arrays: Vec<ArrayDesc> = params
                    .iter()
                    .enumerate()
                    .map(|(i, p)| ArrayDesc {
                        name: format!("param{i}"),
                        len: p.len() as u64,
                    })
                    .collect();
                let mut payload: Vec<&[f64]> = params.iter().map(|p| p.as_slice()).collect();
                if let Some(n) = norm {
                    for (name, slice) in [("norm_mean", &n.mean[..]), ("norm_std", &n.std[..])] {
                        arrays.push(ArrayDesc {
                            name: name.to_string(),
                            len: slice.len() as u64,
                        });
                        payload.push(slice);
                    }
                }
                (
                    Header {
                        kind: spec.name.clone(),
                        meta: HeaderMeta::Net {
                            spec: spec.clone(),
                            norm: norm.is_some(),
                        },
                        arrays,
                    },
                    payload,
                )
            }
            TrainedModel::Classical { clf, norm } => (
                Header {
                    kind: clf.kind().to_string(),
                    meta: HeaderMeta::Classical {
                        clf: clf.clone(),
                        norm: norm.clone(),
                    },
                    arrays: Vec::new(),
                },
                Vec::new(),
            ),
        };
        let header_json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(
            10 + header_json.len() + payload.iter().map(|p| p.len() * 8).sum::<usize>(),
        );
        out.extend_from_slice(&MODEL_MAGIC);
        out.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
        out.extend_from_slice(&header_json);
        for p in payload {
            for v in p {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelIoError> {
        struct Cursor<'a> {
            bytes: &'a [u8],
            off: usize,
        }
        impl<'a> Cursor<'a> {
            fn take(&mut self, n: usize) -> Result<&'a [u8], ModelIoError> {
                let end = self
                    .off
                    .checked_add(n)
                    .filter(|&e| e <= self.bytes.len())
                    .ok_or(ModelIoError::Truncated { offset: self.bytes.len() })?;
                let s = &self.bytes[self.off..end];
                self.off = end;
                Ok(s)
            }
            fn remaining(&self) -> usize {
                self.bytes.len() - self.off
            }
        }
        let mut cur = Cursor { bytes, off: 0 };
        if cur.take(4)? != MODEL_MAGIC {
            return Err(ModelIoError::BadMagic);
        }
        let version = u16::from_le_bytes(cur.take(2)?.try_into().unwrap());
        if version != MODEL_FORMAT_VERSION {
            return Err(ModelIoError::BadVersion { got: version });
        }
        let header_len = u32::from_le_bytes(cur.take(4)?.try_into().unwrap()) as usize;
        let header: Header =
            serde_json::from_slice(cur.take(header_len)?).map_err(|e| ModelIoError::BadHeader {
                reason: e.to_string(),
            })?;

        let mut arrays = Vec::with_capacity(header.arrays.len());
        for desc in &header.arrays {
            let want_bytes = (desc.len as usize)
                .checked_mul(8)
                .ok_or(ModelIoError::Truncated { offset: bytes.len() })?;
            let remaining = cur.remaining();
            let raw = cur.take(want_bytes).map_err(|_| ModelIoError::ArrayLen {
                name: desc.name.clone(),
                want: desc.len,
                got: remaining as u64 / 8,
            })?;
            let vals: Vec<f64> = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            arrays.push(vals);
        }
        if cur.remaining() != 0 {
            return Err(ModelIoError::TrailingBytes { extra: cur.remaining() });
        }

        match header.meta {
            HeaderMeta::Net { spec, norm } => {
                let expect = arrays.len();
                let n_params = if norm { expect.saturating_sub(2) } else { expect };
                let mut params = arrays;
                let norm = if norm {
                    if params.len() < 2 {
                        return Err(ModelIoError::BadHeader {
                            reason: "norm declared but arrays missing".to_string(),
                        });
                    }
                    let std_v = params.pop().expect("checked");
                    let mean_v = params.pop().expect("checked");
                    let (Ok(mean), Ok(std)) = (
                        <[f64; crate::features::FEATURE_COUNT]>::try_from(mean_v),
                        <[f64; crate::features::FEATURE_COUNT]>::try_from(std_v),
                    ) else {
                        return Err(ModelIoError::BadHeader {
                            reason: "standardizer arrays have the wrong length".to_string(),
                        });
                    };
                    Some(Standardizer { mean, std })
                } else {
                    None
                };
                debug_assert_eq!(params.len(), n_params);
                Ok(TrainedModel::Net { spec, params, norm })
            }
            HeaderMeta::Classical { clf, norm } => Ok(TrainedModel::Classical { clf, norm }),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelIoError> {
        Ok(std::fs::write(path, self.to_bytes())?)
    }

    pub fn load(path: &Path) -> Result<Self, ModelIoError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{GaussianNb, Knn1};
    use crate::nn::Tensor;
    use rand::Rng;

    fn tiny_norm() -> Standardizer {
        let mut mean = [0.0; crate::features::FEATURE_COUNT];
        let mut std = [1.0; crate::features::FEATURE_COUNT];
        mean[3] = 0.25;
        std[7] = 2.5;
        Standardizer { mean, std }
    }

    #[test]
    fn net_round_trips_bit_exactly() {
        let model = Model::build(ModelSpec::dnn_feat(), SeedSpec::new(40, 0)).unwrap();
        let tm = TrainedModel::from_net(&model, Some(tiny_norm()));
        let bytes = tm.to_bytes();
        assert_eq!(&bytes[..4], b"RMM1");
        let back = TrainedModel::from_bytes(&bytes).unwrap();
        assert_eq!(tm, back);

        // The rebuilt network predicts identically to the original.
        let rebuilt = back.net_model().unwrap();
        let mut rng = SeedSpec::new(41, 0).rng();
        let x = Tensor::from_vec(
            &[3, 32],
            (0..96).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        assert_eq!(model.predict(&x).unwrap().data, rebuilt.predict(&x).unwrap().data);
        assert_eq!(back.kind(), "dnn_feat");
        assert!(back.wants_features());
    }

    #[test]
    fn classical_round_trips() {
        let rows = vec![
            vec![0.0, 0.0],
            vec![0.1, -0.1],
            vec![5.0, 5.0],
            vec![5.1, 4.9],
        ];
        let labels = vec![0u16, 0, 3, 3];
        let knn = Classifier::Knn1(Knn1::fit(&rows, &labels).unwrap());
        let gnb = Classifier::GaussianNb(GaussianNb::fit(&rows, &labels).unwrap());
        for clf in [knn, gnb] {
            let tm = TrainedModel::Classical { clf, norm: tiny_norm() };
            let back = TrainedModel::from_bytes(&tm.to_bytes()).unwrap();
            assert_eq!(tm, back);
            assert!(back.wants_features());
            assert!(matches!(back.net_model(), Err(ModelIoError::NotANet)));
            let TrainedModel::Classical { clf, .. } = &back else { unreachable!() };
            assert_eq!(clf.predict(&[5.05, 5.0]).unwrap(), 3);
        }
    }

    #[test]
    fn rejects_corrupt_files() {
        let model = Model::build(ModelSpec::dnn_feat(), SeedSpec::new(42, 0)).unwrap();
        let good = TrainedModel::from_net(&model, None).to_bytes();

        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            TrainedModel::from_bytes(&bad_magic),
            Err(ModelIoError::BadMagic)
        ));

        let mut bad_version = good.clone();
        bad_version[4] = 9;
        assert!(matches!(
            TrainedModel::from_bytes(&bad_version),
            Err(ModelIoError::BadVersion { got: 9 })
        ));

        let truncated = &good[..good.len() - 5];
        assert!(matches!(
            TrainedModel::from_bytes(truncated),
            Err(ModelIoError::ArrayLen { .. })
        ));

        let mut trailing = good.clone();
        trailing.extend_from_slice(&[0u8; 3]);
        assert!(matches!(
            TrainedModel::from_bytes(&trailing),
            Err(ModelIoError::TrailingBytes { extra: 3 })
        ));

        let mut garbage_header = good;
        // Corrupt a byte inside the JSON header region.
        garbage_header[12] = 0xFF;
        assert!(matches!(
            TrainedModel::from_bytes(&garbage_header),
            Err(ModelIoError::BadHeader { .. })
        ));
    }

    #[test]
    fn param_shape_mismatch_is_refused() {
        let model = Model::build(ModelSpec::dnn_feat(), SeedSpec::new(43, 0)).unwrap();
        let mut tm = TrainedModel::from_net(&model, None);
        let TrainedModel::Net { params, .. } = &mut tm else { unreachable!() };
        params[0].push(0.0);
        assert!(matches!(tm.net_model(), Err(ModelIoError::ParamShape)));
    }
}
