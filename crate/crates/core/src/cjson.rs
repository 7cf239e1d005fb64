//! Serde helpers: a complex number is written as a plain number when its
//! imaginary part is exactly zero and as `[re, im]` otherwise. Both forms are
//! accepted on input.

use num_complex::Complex64 as C64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Repr {
    Real(f64),
    Pair([f64; 2]),
}

impl From<C64> for Repr {
    fn from(z: C64) -> Repr {
        if z.im == 0.0 {
            Repr::Real(z.re)
        } else {
            Repr::Pair([z.re, z.im])
        }
    }
}

impl From<Repr> for C64 {
    fn from(r: Repr) -> C64 {
        match r {
            Repr::Real(x) => C64::new(x, 0.0),
            Repr::Pair([a, b]) => C64::new(a, b),
        }
    }
}

fn check(z: C64) -> Result<C64, String> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err("non-finite complex value".into())
    }
}

pub fn serialize<S: Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
    Repr::from(*z).serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
    check(Repr::deserialize(d)?.into()).map_err(D::Error::custom)
}

pub mod vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
        let r: Vec<Repr> = v.iter().map(|z| Repr::from(*z)).collect();
        r.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C64>, D::Error> {
        Vec::<Repr>::deserialize(d)?
            .into_iter()
            .map(|r| check(r.into()).map_err(D::Error::custom))
            .collect()
    }
}

pub fn to_value(z: C64) -> serde_json::Value {
    serde_json::to_value(Repr::from(z)).expect("finite numbers serialize")
}

/// Parses a JSON value holding a number or an `[re, im]` pair.
pub fn from_value(v: &serde_json::Value) -> Option<C64> {
    let r: Repr = serde_json::from_value(v.clone()).ok()?;
    check(r.into()).ok()
}
