//! Randomness sources for parties.
//!
//! Every random choice a party makes goes through [`RandomTape::draw_below`],
//! a uniform draw from `0..bound`. That single primitive lets the same
//! protocol code run on a seeded generator, on a scripted list of draws for
//! hand-traced examples, or under an [`Odometer`] that walks every possible
//! sequence of draws for exhaustive secrecy checks.

use std::cell::RefCell;
use std::collections::{BTreeMap, VecDeque};
use std::rc::Rc;

use num_bigint::{BigUint, RandBigInt};
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::topology::PartyId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TapeError {
    #[error("scripted tape exhausted")]
    Exhausted,
    #[error("scripted draw {value} is out of range for bound {bound}")]
    OutOfRange { value: BigUint, bound: BigUint },
    #[error("cannot draw below zero")]
    EmptyRange,
    #[error("draw bound {0} is too large to enumerate")]
    NotEnumerable(BigUint),
    #[error("enumeration replay diverged: expected bound {expected}, got {got}")]
    Inconsistent { expected: u64, got: u64 },
}

pub trait RandomTape {
    /// Uniform draw from `0..bound`.
    fn draw_below(&mut self, bound: &BigUint) -> Result<BigUint, TapeError>;

    fn draw_index(&mut self, bound: u64) -> Result<u64, TapeError> {
        let v = self.draw_below(&BigUint::from(bound))?;
        Ok(u64::try_from(&v).expect("draw below a u64 bound fits in u64"))
    }
}

/// Hands out one tape per randomness-capable party.
pub trait TapeFactory {
    fn tape(&mut self, party: PartyId) -> Box<dyn RandomTape>;

    /// The seed when tapes are derived from one, so the run can be replayed.
    fn seed(&self) -> Option<u64> {
        None
    }
}

/// ChaCha8 stream `party` of the run seed.
pub struct ChaChaTape(ChaCha8Rng);

impl ChaChaTape {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        ChaChaTape(rng)
    }
}

impl RandomTape for ChaChaTape {
    fn draw_below(&mut self, bound: &BigUint) -> Result<BigUint, TapeError> {
        if bound.is_zero() {
            return Err(TapeError::EmptyRange);
        }
        Ok(self.0.gen_biguint_below(bound))
    }
}

/// Forks one independent generator per party from a run seed.
#[derive(Debug, Clone, Copy)]
pub struct SeededTapes(pub u64);

impl TapeFactory for SeededTapes {
    fn tape(&mut self, party: PartyId) -> Box<dyn RandomTape> {
        Box::new(ChaChaTape::new(self.0, party.0 as u64))
    }

    fn seed(&self) -> Option<u64> {
        Some(self.0)
    }
}

/// Replays a fixed list of raw draws.
#[derive(Debug, Clone, Default)]
pub struct ScriptTape {
    values: VecDeque<BigUint>,
}

impl ScriptTape {
    pub fn new(values: impl IntoIterator<Item = BigUint>) -> Self {
        ScriptTape {
            values: values.into_iter().collect(),
        }
    }
}

impl RandomTape for ScriptTape {
    fn draw_below(&mut self, bound: &BigUint) -> Result<BigUint, TapeError> {
        let v = self.values.pop_front().ok_or(TapeError::Exhausted)?;
        if &v >= bound {
            return Err(TapeError::OutOfRange {
                value: v,
                bound: bound.clone(),
            });
        }
        Ok(v)
    }
}

/// Per-party scripts; parties without a script get an empty (immediately
/// exhausted) tape.
#[derive(Debug, Clone, Default)]
pub struct ScriptedTapes {
    scripts: BTreeMap<usize, Vec<BigUint>>,
}

impl ScriptedTapes {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, party: usize, draws: impl IntoIterator<Item = BigUint>) -> Self {
        self.scripts.entry(party).or_default().extend(draws);
        self
    }

    pub fn with_u64(self, party: usize, draws: impl IntoIterator<Item = u64>) -> Self {
        self.with(party, draws.into_iter().map(BigUint::from))
    }
}

impl TapeFactory for ScriptedTapes {
    fn tape(&mut self, party: PartyId) -> Box<dyn RandomTape> {
        Box::new(ScriptTape::new(
            self.scripts.get(&party.0).cloned().unwrap_or_default(),
        ))
    }
}

#[derive(Debug, Default)]
struct OdometerState {
    /// (chosen value, bound) for each draw of the current path, in global order
    choices: Vec<(u64, u64)>,
    pos: usize,
    limit: u64,
}

/// Enumerates every possible sequence of draws made by all parties of a run.
///
/// All tapes handed out by one odometer share a single cursor, so draws are
/// numbered in the (deterministic) order the engine makes them. After a run,
/// [`advance`](Odometer::advance) moves to the next path, like the digits of
/// an odometer whose wheel sizes are discovered on the way.
#[derive(Debug, Clone)]
pub struct Odometer {
    state: Rc<RefCell<OdometerState>>,
}

struct OdometerTape {
    state: Rc<RefCell<OdometerState>>,
}

impl Odometer {
    /// `limit` caps the bound of any single draw.
    pub fn new(limit: u64) -> Self {
        Odometer {
            state: Rc::new(RefCell::new(OdometerState {
                limit,
                ..Default::default()
            })),
        }
    }

    /// Probability of the path just run.
    pub fn weight(&self) -> BigRational {
        let st = self.state.borrow();
        let denom = st.choices[..st.pos]
            .iter()
            .fold(num_bigint::BigInt::one(), |acc, &(_, b)| acc * b);
        BigRational::new(num_bigint::BigInt::one(), denom)
    }

    /// Moves to the next path. Returns `false` once every path has been visited.
    pub fn advance(&self) -> bool {
        let mut st = self.state.borrow_mut();
        let pos = st.pos;
        st.choices.truncate(pos);
        st.pos = 0;
        while let Some(last) = st.choices.last_mut() {
            if last.0 + 1 < last.1 {
                last.0 += 1;
                return true;
            }
            st.choices.pop();
        }
        false
    }
}

impl TapeFactory for Odometer {
    fn tape(&mut self, _party: PartyId) -> Box<dyn RandomTape> {
        Box::new(OdometerTape {
            state: Rc::clone(&self.state),
        })
    }
}

impl RandomTape for OdometerTape {
    fn draw_below(&mut self, bound: &BigUint) -> Result<BigUint, TapeError> {
        if bound.is_zero() {
            return Err(TapeError::EmptyRange);
        }
        let mut st = self.state.borrow_mut();
        let b = u64::try_from(bound)
            .ok()
            .filter(|&b| b <= st.limit)
            .ok_or_else(|| TapeError::NotEnumerable(bound.clone()))?;
        let pos = st.pos;
        let v = if pos < st.choices.len() {
            let (v, expected) = st.choices[pos];
            if expected != b {
                return Err(TapeError::Inconsistent { expected, got: b });
            }
            v
        } else {
            st.choices.push((0, b));
            0
        };
        st.pos += 1;
        Ok(BigUint::from(v))
    }
}
