//! Versioned JSON checkpoints. Parameter arrays are base64 little-endian f64
//! so a reload reproduces energies bit for bit.

use std::collections::BTreeMap;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Potential, PotentialConfig};
use crate::vqc::AnsatzSpec;
use crate::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

mod b64 {
    use super::*;

    pub fn encode(v: &[f64]) -> String {
        let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
        STANDARD.encode(bytes)
    }

    pub fn decode(s: &str) -> std::result::Result<Vec<f64>, String> {
        let bytes = STANDARD.decode(s).map_err(|e| e.to_string())?;
        if bytes.len() % 8 != 0 {
            return Err(format!("{} bytes is not a whole number of f64", bytes.len()));
        }
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
        let s = String::deserialize(d)?;
        decode(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamBlob {
    pub name: String,
    pub shape: Vec<usize>,
    #[serde(with = "b64")]
    pub data: Vec<f64>,
}

/// AMSGrad moments and scheduler bookkeeping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub step: u64,
    pub lr: f64,
    #[serde(with = "b64")]
    pub m: Vec<f64>,
    #[serde(with = "b64")]
    pub v: Vec<f64>,
    #[serde(with = "b64")]
    pub v_max: Vec<f64>,
    pub plateau_best: f64,
    pub plateau_bad_epochs: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub epochs_completed: usize,
    pub best_epoch: Option<usize>,
    pub best_val_loss: Option<f64>,
    #[serde(default)]
    pub notes: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub potential_config: PotentialConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ansatz_spec: Option<AnsatzSpec>,
    pub params: Vec<ParamBlob>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer_state: Option<OptimizerState>,
    /// Live EMA shadow; `params` holds the best-validation EMA weights.
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_b64")]
    pub ema_state: Option<Vec<f64>>,
    /// Un-averaged optimizer iterate, needed to resume training.
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_b64")]
    pub raw_params: Option<Vec<f64>>,
    pub rng_seed: u64,
    #[serde(default)]
    pub training_metadata: TrainingMetadata,
}

mod opt_b64 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<Vec<f64>>, s: S) -> std::result::Result<S::Ok, S::Error> {
        match v {
            Some(v) => s.serialize_some(&b64::encode(v)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Vec<f64>>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| b64::decode(&s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

impl Checkpoint {
    pub fn from_potential(potential: &Potential, rng_seed: u64) -> Self {
        let p = potential.params();
        let params = potential
            .model()
            .entries
            .iter()
            .map(|e| ParamBlob {
                name: e.name.clone(),
                shape: e.shape.clone(),
                data: p[e.offset..e.offset + e.len()].to_vec(),
            })
            .collect();
        Self {
            format_version: CHECKPOINT_VERSION,
            potential_config: potential.config().clone(),
            ansatz_spec: potential.config().readout.ansatz().copied(),
            params,
            optimizer_state: None,
            ema_state: None,
            raw_params: None,
            rng_seed,
            training_metadata: TrainingMetadata::default(),
        }
    }

    /// Rebuilds the potential, checking every named block against the layout.
    pub fn to_potential(&self) -> Result<Potential> {
        let mut pot = Potential::new(&self.potential_config, 0)?;
        let entries = pot.model().entries.clone();
        if entries.len() != self.params.len() {
            return Err(Error::Checkpoint(format!(
                "{} parameter blocks, model has {}",
                self.params.len(),
                entries.len()
            )));
        }
        let p = pot.params_mut();
        for e in &entries {
            let blob = self
                .params
                .iter()
                .find(|b| b.name == e.name)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter block {}", e.name)))?;
            if blob.shape != e.shape || blob.data.len() != e.len() {
                return Err(Error::Checkpoint(format!(
                    "{}: shape {:?} with {} values, expected {:?}",
                    e.name,
                    blob.shape,
                    blob.data.len(),
                    e.shape
                )));
            }
            p[e.offset..e.offset + e.len()].copy_from_slice(&blob.data);
        }
        Ok(pot)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(s)?;
        let version = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::Checkpoint("missing format_version".into()))?;
        if version != CHECKPOINT_VERSION as u64 {
            return Err(Error::UnsupportedFormat(version as u32));
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Readout;
    use crate::vqc::{AnsatzSpec, MeasurementMode, Variant};

    fn small(readout: Readout) -> PotentialConfig {
        PotentialConfig {
            hidden_irreps: "4x0e + 2x1o".parse().unwrap(),
            n_layers: 2,
            radial_mlp_sizes: vec![4],
            readout,
            ..Default::default()
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let a = AnsatzSpec {
            n_main: 2,
            n_qft: 1,
            ..AnsatzSpec::new(Variant::QFTEntanglerCZ)
        };
        for readout in [Readout::Classical { hidden: 3 }, Readout::Vqc { ansatz: a }] {
            let pot = Potential::new(&small(readout), 5).unwrap();
            let mut ck = Checkpoint::from_potential(&pot, 5);
            ck.ema_state = Some(vec![1.0 / 3.0, -0.0, f64::MIN_POSITIVE]);
            let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
            assert_eq!(back, ck);
            let pot2 = back.to_potential().unwrap();
            assert_eq!(pot2.params(), pot.params());
            let cfg = crate::geometry::AtomicConfiguration::free(
                vec![[0.0, 0.0, 0.0], [2.3, 0.1, 0.0], [0.2, 2.2, 0.4]],
                vec![14; 3],
            )
            .unwrap();
            let e1 = pot.energy(&cfg, &MeasurementMode::Exact).unwrap();
            let e2 = pot2.energy(&cfg, &MeasurementMode::Exact).unwrap();
            assert_eq!(e1.to_bits(), e2.to_bits());
        }
    }

    #[test]
    fn rejects_unknown_version_and_bad_shapes() {
        let pot = Potential::new(&small(Readout::Classical { hidden: 3 }), 1).unwrap();
        let ck = Checkpoint::from_potential(&pot, 1);
        let mut v: serde_json::Value = serde_json::from_str(&ck.to_json().unwrap()).unwrap();
        v["format_version"] = 2.into();
        assert!(matches!(
            Checkpoint::from_json(&v.to_string()),
            Err(Error::UnsupportedFormat(2))
        ));
        let mut bad = ck.clone();
        bad.params[0].data.pop();
        assert!(matches!(bad.to_potential(), Err(Error::Checkpoint(_))));
    }
}
