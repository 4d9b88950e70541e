//! JSON form: `{"kind": "kraus" | "superop", "dims": [d_in, d_out], "data": ...}`.

use serde::de::{self, DeserializeOwned};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::QuantumChannel;
use crate::scalar::Real;
use crate::tensor::ComplexMatrix;

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Kraus,
    Superop,
}

#[derive(Serialize)]
#[serde(bound(serialize = "T: Real + Serialize"))]
struct RawOut<'a, T> {
    kind: Kind,
    dims: [usize; 2],
    data: &'a ComplexMatrix<T>,
}

#[derive(Deserialize)]
#[serde(bound(deserialize = "T: Real + DeserializeOwned"))]
#[serde(deny_unknown_fields)]
struct RawIn<T> {
    kind: Kind,
    dims: [usize; 2],
    data: serde_json::Value,
    #[serde(default)]
    #[allow(dead_code)]
    label: Option<String>,
    #[serde(skip)]
    _marker: std::marker::PhantomData<T>,
}

impl<T: Real + Serialize> Serialize for QuantumChannel<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        RawOut {
            kind: Kind::Superop,
            dims: [self.d_in, self.d_out],
            data: &self.superop,
        }
        .serialize(serializer)
    }
}

impl<'de, T: Real + DeserializeOwned> Deserialize<'de> for QuantumChannel<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RawIn::<T>::deserialize(deserializer)?;
        let [d_in, d_out] = raw.dims;
        let ch = match raw.kind {
            Kind::Superop => {
                let m: ComplexMatrix<T> = serde_json::from_value(raw.data).map_err(de::Error::custom)?;
                QuantumChannel::from_superop(d_in, d_out, m)
            }
            Kind::Kraus => {
                let ks: Vec<ComplexMatrix<T>> = serde_json::from_value(raw.data).map_err(de::Error::custom)?;
                if ks.iter().any(|k| k.rows() != d_out || k.cols() != d_in) {
                    return Err(de::Error::custom("Kraus operator shape does not match dims"));
                }
                QuantumChannel::from_kraus(&ks)
            }
        }
        .map_err(de::Error::custom)?;
        Ok(match raw.label {
            Some(l) => ch.with_label(l),
            None => ch,
        })
    }
}
