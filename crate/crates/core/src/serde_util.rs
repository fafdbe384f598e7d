//! Lenient integer (de)serialization: big integers travel as decimal strings,
//! but hand-written configs may use plain JSON numbers.

use num_bigint::{BigInt, BigUint};
use serde::de::{self, Deserializer, Visitor};
use serde::Serializer;
use std::fmt;

struct BigIntVisitor;

impl Visitor<'_> for BigIntVisitor {
    type Value = BigInt;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("an integer or a decimal string")
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<BigInt, E> {
        Ok(BigInt::from(v))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<BigInt, E> {
        Ok(BigInt::from(v))
    }

    fn visit_i128<E: de::Error>(self, v: i128) -> Result<BigInt, E> {
        Ok(BigInt::from(v))
    }

    fn visit_u128<E: de::Error>(self, v: u128) -> Result<BigInt, E> {
        Ok(BigInt::from(v))
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<BigInt, E> {
        v.trim()
            .parse()
            .map_err(|_| E::custom(format!("invalid integer {v:?}")))
    }
}

pub fn deserialize_bigint<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
    d.deserialize_any(BigIntVisitor)
}

pub fn deserialize_biguint<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
    let v = deserialize_bigint(d)?;
    v.to_biguint()
        .ok_or_else(|| de::Error::custom(format!("expected a non-negative integer, got {v}")))
}

pub fn deserialize_opt_biguint<'de, D: Deserializer<'de>>(
    d: D,
) -> Result<Option<BigUint>, D::Error> {
    deserialize_biguint(d).map(Some)
}

pub fn serialize_opt_biguint<S: Serializer>(v: &Option<BigUint>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        // small values stay numeric so configs read naturally
        Some(v) => match u64::try_from(v) {
            Ok(small) => s.serialize_u64(small),
            Err(_) => s.serialize_str(&v.to_string()),
        },
        None => s.serialize_none(),
    }
}
