//! Arithmetic over the two constructible rings the protocols run on: the
//! integers and the integers modulo `m`.
//!
//! Elements are plain arbitrary-precision integers. Modular elements are kept
//! in canonical form `0 <= v < m`; an element outside that range does not
//! belong to the ring and the checked operations reject it.

use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tape::{RandomTape, TapeError};

/// Above this modulus, unit sampling falls back to rejection instead of
/// indexing into the explicit list of units.
const UNIT_TABLE_LIMIT: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RingError {
    #[error("element {value} is not a canonical member of {ring}")]
    ForeignElement { value: BigInt, ring: String },
    #[error("division by zero")]
    DivisionByZero,
    #[error("{value} is not a unit modulo {modulus}")]
    NotAUnit { value: BigInt, modulus: BigUint },
    #[error("{dividend} is not divisible by {divisor}")]
    NotDivisible { dividend: BigInt, divisor: BigInt },
    #[error("modulus must be at least 2, got {0}")]
    BadModulus(BigUint),
    #[error("noise bound must be at least 1")]
    BadNoiseBound,
    #[error(transparent)]
    Tape(#[from] TapeError),
}

/// Descriptor of a constructible ring.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RingSpecRepr", into = "RingSpecRepr")]
pub enum RingSpec {
    /// The ring of integers. Noise is drawn uniformly from
    /// `[-noise_bound, noise_bound]`, so hiding over `Z` is statistical.
    Integers { noise_bound: BigUint },
    /// Integers modulo `modulus >= 2`.
    IntegersMod { modulus: BigUint },
}

/// An element of a [`RingSpec`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RingElement(pub BigInt);

impl RingElement {
    pub fn value(&self) -> &BigInt {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

impl fmt::Display for RingElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<i64> for RingElement {
    fn from(v: i64) -> Self {
        RingElement(BigInt::from(v))
    }
}

impl From<BigInt> for RingElement {
    fn from(v: BigInt) -> Self {
        RingElement(v)
    }
}

impl Serialize for RingElement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

impl<'de> Deserialize<'de> for RingElement {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        crate::serde_util::deserialize_bigint(d).map(RingElement)
    }
}

impl RingSpec {
    pub fn integers(noise_bound: u64) -> Result<Self, RingError> {
        if noise_bound == 0 {
            return Err(RingError::BadNoiseBound);
        }
        Ok(RingSpec::Integers {
            noise_bound: BigUint::from(noise_bound),
        })
    }

    pub fn modular(m: u64) -> Result<Self, RingError> {
        Self::modular_big(BigUint::from(m))
    }

    pub fn modular_big(m: BigUint) -> Result<Self, RingError> {
        if m < BigUint::from(2u8) {
            return Err(RingError::BadModulus(m));
        }
        Ok(RingSpec::IntegersMod { modulus: m })
    }

    pub fn modulus(&self) -> Option<&BigUint> {
        match self {
            RingSpec::IntegersMod { modulus } => Some(modulus),
            RingSpec::Integers { .. } => None,
        }
    }

    pub fn is_modular(&self) -> bool {
        self.modulus().is_some()
    }

    fn modulus_int(&self) -> Option<BigInt> {
        self.modulus().map(|m| BigInt::from_biguint(Sign::Plus, m.clone()))
    }

    /// Maps an arbitrary integer into the ring (canonical residue when modular).
    pub fn element(&self, v: impl Into<BigInt>) -> RingElement {
        let v = v.into();
        match self.modulus_int() {
            Some(m) => RingElement(v.mod_floor(&m)),
            None => RingElement(v),
        }
    }

    pub fn zero(&self) -> RingElement {
        RingElement(BigInt::zero())
    }

    pub fn one(&self) -> RingElement {
        RingElement(BigInt::one())
    }

    pub fn contains(&self, a: &RingElement) -> bool {
        match self.modulus_int() {
            Some(m) => !a.0.is_negative() && a.0 < m,
            None => true,
        }
    }

    pub fn check(&self, a: &RingElement) -> Result<(), RingError> {
        if self.contains(a) {
            Ok(())
        } else {
            Err(RingError::ForeignElement {
                value: a.0.clone(),
                ring: self.to_string(),
            })
        }
    }

    pub fn add(&self, a: &RingElement, b: &RingElement) -> RingElement {
        self.element(&a.0 + &b.0)
    }

    pub fn sub(&self, a: &RingElement, b: &RingElement) -> RingElement {
        self.element(&a.0 - &b.0)
    }

    pub fn neg(&self, a: &RingElement) -> RingElement {
        self.element(-&a.0)
    }

    pub fn mul(&self, a: &RingElement, b: &RingElement) -> RingElement {
        self.element(&a.0 * &b.0)
    }

    pub fn pow(&self, a: &RingElement, exp: u32) -> RingElement {
        match self.modulus_int() {
            Some(m) => RingElement(a.0.modpow(&BigInt::from(exp), &m)),
            None => RingElement(num_traits::pow(a.0.clone(), exp as usize)),
        }
    }

    pub fn sum<'a>(&self, items: impl IntoIterator<Item = &'a RingElement>) -> RingElement {
        items
            .into_iter()
            .fold(self.zero(), |acc, x| self.add(&acc, x))
    }

    pub fn product<'a>(&self, items: impl IntoIterator<Item = &'a RingElement>) -> RingElement {
        items
            .into_iter()
            .fold(self.one(), |acc, x| self.mul(&acc, x))
    }

    pub fn checked_add(&self, a: &RingElement, b: &RingElement) -> Result<RingElement, RingError> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.add(a, b))
    }

    pub fn checked_sub(&self, a: &RingElement, b: &RingElement) -> Result<RingElement, RingError> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.sub(a, b))
    }

    pub fn checked_mul(&self, a: &RingElement, b: &RingElement) -> Result<RingElement, RingError> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.mul(a, b))
    }

    pub fn checked_pow(&self, a: &RingElement, exp: u32) -> Result<RingElement, RingError> {
        self.check(a)?;
        Ok(self.pow(a, exp))
    }

    /// Whether multiplication by `a` can be undone: nonzero over `Z`, a unit mod `m`.
    pub fn is_legal_divisor(&self, a: &RingElement) -> bool {
        match self.modulus_int() {
            Some(m) => a.0.gcd(&m).is_one(),
            None => !a.0.is_zero(),
        }
    }

    pub fn inverse(&self, a: &RingElement) -> Result<RingElement, RingError> {
        let m = match self.modulus_int() {
            Some(m) => m,
            None => {
                return if a.0.abs().is_one() {
                    Ok(a.clone())
                } else if a.0.is_zero() {
                    Err(RingError::DivisionByZero)
                } else {
                    Err(RingError::NotDivisible {
                        dividend: BigInt::one(),
                        divisor: a.0.clone(),
                    })
                };
            }
        };
        if a.0.is_zero() {
            return Err(RingError::DivisionByZero);
        }
        let e = a.0.extended_gcd(&m);
        if !e.gcd.is_one() {
            return Err(RingError::NotAUnit {
                value: a.0.clone(),
                modulus: self.modulus().cloned().unwrap_or_default(),
            });
        }
        Ok(self.element(e.x))
    }

    /// Recovers the unique `x` with `a * x = r`.
    pub fn exact_div(&self, r: &RingElement, a: &RingElement) -> Result<RingElement, RingError> {
        self.check(r)?;
        self.check(a)?;
        if a.0.is_zero() {
            return Err(RingError::DivisionByZero);
        }
        if self.is_modular() {
            let inv = self.inverse(a)?;
            return Ok(self.mul(r, &inv));
        }
        let (q, rem) = r.0.div_rem(&a.0);
        if !rem.is_zero() {
            return Err(RingError::NotDivisible {
                dividend: r.0.clone(),
                divisor: a.0.clone(),
            });
        }
        Ok(RingElement(q))
    }

    /// Units of `Z_m`, in increasing order. Only meaningful for modest `m`.
    pub fn units(&self) -> Vec<RingElement> {
        let Some(m) = self.modulus_int() else {
            return vec![self.element(-1), self.one()];
        };
        let mut out = Vec::new();
        let mut v = BigInt::one();
        while v < m {
            if v.gcd(&m).is_one() {
                out.push(RingElement(v.clone()));
            }
            v += 1;
        }
        out
    }

    fn small_modulus(&self) -> Option<u64> {
        self.modulus()
            .and_then(|m| u64::try_from(m).ok())
            .filter(|&m| m <= UNIT_TABLE_LIMIT)
    }

    /// Draws noise from `tape`.
    ///
    /// Modular rings: uniform over `Z_m`, or over its units when `require_unit`.
    /// Integers: uniform over `[-B, B]`, or over `[-B, B] \ {0}`.
    pub fn sample_noise(
        &self,
        tape: &mut dyn RandomTape,
        require_unit: bool,
    ) -> Result<RingElement, RingError> {
        match self {
            RingSpec::IntegersMod { modulus } => {
                if !require_unit {
                    let v = tape.draw_below(modulus)?;
                    return Ok(RingElement(BigInt::from(v)));
                }
                if self.small_modulus().is_some() {
                    let units = self.units();
                    let idx = tape.draw_below(&BigUint::from(units.len()))?;
                    let idx = usize::try_from(&idx).expect("index below table length");
                    return Ok(units[idx].clone());
                }
                loop {
                    let v = RingElement(BigInt::from(tape.draw_below(modulus)?));
                    if self.is_legal_divisor(&v) {
                        return Ok(v);
                    }
                }
            }
            RingSpec::Integers { noise_bound } => {
                let b = BigInt::from(noise_bound.clone());
                if require_unit {
                    let d = BigInt::from(tape.draw_below(&(noise_bound * 2u8))?);
                    let v = if d < b { d - &b } else { d - &b + 1 };
                    Ok(RingElement(v))
                } else {
                    let d = BigInt::from(tape.draw_below(&(noise_bound * 2u8 + 1u8))?);
                    Ok(RingElement(d - b))
                }
            }
        }
    }

    /// Inverse of [`sample_noise`](Self::sample_noise): the raw tape draw that
    /// makes the sampler return `v`. Used to script hand-traced runs.
    pub fn noise_to_draw(&self, v: &RingElement, require_unit: bool) -> Result<BigUint, RingError> {
        match self {
            RingSpec::IntegersMod { .. } => {
                self.check(v)?;
                if require_unit {
                    if !self.is_legal_divisor(v) {
                        return Err(RingError::NotAUnit {
                            value: v.0.clone(),
                            modulus: self.modulus().cloned().unwrap_or_default(),
                        });
                    }
                    if self.small_modulus().is_some() {
                        let pos = self.units().iter().position(|u| u == v).expect("unit listed");
                        return Ok(BigUint::from(pos));
                    }
                }
                Ok(v.0.to_biguint().expect("canonical residue is non-negative"))
            }
            RingSpec::Integers { noise_bound } => {
                let b = BigInt::from(noise_bound.clone());
                if v.0.abs() > b {
                    return Err(RingError::ForeignElement {
                        value: v.0.clone(),
                        ring: format!("noise range of {self}"),
                    });
                }
                let raw = if require_unit {
                    if v.0.is_zero() {
                        return Err(RingError::DivisionByZero);
                    }
                    if v.0.is_negative() {
                        &v.0 + &b
                    } else {
                        &v.0 + &b - 1
                    }
                } else {
                    &v.0 + &b
                };
                Ok(raw.to_biguint().expect("shifted into range"))
            }
        }
    }

    /// Signed representative in `(-m/2, m/2]` for modular rings, the value itself over `Z`.
    pub fn centered(&self, a: &RingElement) -> BigInt {
        match self.modulus_int() {
            Some(m) => {
                if &a.0 * 2 > m {
                    &a.0 - m
                } else {
                    a.0.clone()
                }
            }
            None => a.0.clone(),
        }
    }
}

impl fmt::Display for RingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RingSpec::Integers { noise_bound } => write!(f, "Z (noise bound {noise_bound})"),
            RingSpec::IntegersMod { modulus } => write!(f, "Z_{modulus}"),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RingSpecRepr {
    ring: String,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        deserialize_with = "crate::serde_util::deserialize_opt_biguint",
        serialize_with = "crate::serde_util::serialize_opt_biguint"
    )]
    m: Option<BigUint>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        deserialize_with = "crate::serde_util::deserialize_opt_biguint",
        serialize_with = "crate::serde_util::serialize_opt_biguint"
    )]
    noise_bound: Option<BigUint>,
}

/// Noise bound used when an integer ring is configured without one.
pub const DEFAULT_NOISE_BOUND: u64 = 1 << 32;

impl TryFrom<RingSpecRepr> for RingSpec {
    type Error = String;

    fn try_from(r: RingSpecRepr) -> Result<Self, String> {
        match r.ring.as_str() {
            "Z" => {
                let b = r.noise_bound.unwrap_or_else(|| BigUint::from(DEFAULT_NOISE_BOUND));
                if b.is_zero() {
                    return Err("noise_bound must be positive".into());
                }
                Ok(RingSpec::Integers { noise_bound: b })
            }
            "Zm" => {
                let m = r.m.ok_or("ring \"Zm\" requires field \"m\"")?;
                RingSpec::modular_big(m).map_err(|e| e.to_string())
            }
            other => Err(format!("unknown ring {other:?}, expected \"Z\" or \"Zm\"")),
        }
    }
}

impl From<RingSpec> for RingSpecRepr {
    fn from(r: RingSpec) -> Self {
        match r {
            RingSpec::Integers { noise_bound } => RingSpecRepr {
                ring: "Z".into(),
                m: None,
                noise_bound: Some(noise_bound),
            },
            RingSpec::IntegersMod { modulus } => RingSpecRepr {
                ring: "Zm".into(),
                m: Some(modulus),
                noise_bound: None,
            },
        }
    }
}
