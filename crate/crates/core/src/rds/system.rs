use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::RdsError;

/// `len` fair ±1 symbols at absolute positions `start, start+1, …` of the two-sided
/// sequence determined by `seed`. Position `i` always yields the same symbol, so
/// windows can be refilled in any order.
fn symbols(seed: u64, start: i64, len: usize) -> impl Iterator<Item = i8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let abs = (start as i128 + (1i128 << 63)) as u128;
    let mut bit = (abs % 32) as u32;
    rng.set_word_pos(abs / 32);
    let mut word = rng.next_u32();
    (0..len).map(move |_| {
        if bit == 32 {
            bit = 0;
            word = rng.next_u32();
        }
        let s = if (word >> bit) & 1 == 1 { 1 } else { -1 };
        bit += 1;
        s
    })
}

/// A base point `ω ∈ {±1}^ℤ` under the product (1/2, 1/2) measure, read through a
/// window at `pos`: `ω_i` is the symbol at absolute position `pos + i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaseSequence {
    pub seed: u64,
    pub pos: i64,
}

impl BaseSequence {
    pub fn new(seed: u64) -> Self {
        Self { seed, pos: 0 }
    }

    pub fn symbol(&self, i: i64) -> i8 {
        symbols(self.seed, self.pos + i, 1).next().expect("one symbol")
    }

    /// `ω_0, …, ω_{len−1}`.
    pub fn window(&self, len: usize) -> Vec<i8> {
        symbols(self.seed, self.pos, len).collect()
    }

    /// The base map θ applied `n` times.
    pub fn shift(&self, n: i64) -> Self {
        Self { seed: self.seed, pos: self.pos + n }
    }

    /// `φ(n, ω) = Σ_{i<n} ω_i`.
    pub fn cocycle(&self, n: usize) -> i64 {
        symbols(self.seed, self.pos, n).map(i64::from).sum()
    }
}

/// A fiber point `y ∈ {±1}^ℤ` under the product measure, seen at `offset`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiberSequence {
    pub seed: u64,
    pub offset: i64,
}

impl FiberSequence {
    pub fn symbol(&self, i: i64) -> i8 {
        symbols(self.seed, self.offset + i, 1).next().expect("one symbol")
    }

    /// `S^s y` with `(S y)_i = y_{i+1}`.
    pub fn shift(&self, s: i64) -> Self {
        Self { seed: self.seed, offset: self.offset + s }
    }

    pub fn window(&self, lo: i64, len: usize) -> Vec<i8> {
        symbols(self.seed, self.offset + lo, len).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SkewPoint {
    pub omega: BaseSequence,
    pub y: FiberSequence,
}

/// `T(ω, y) = (θω, S^{ω₀} y)`: the fiber moves left when `ω₀ = +1` and right when
/// `ω₀ = −1`. Fiber events are restricted to the window `[−W/2, W/2]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkewProduct {
    pub fiber_window: usize,
}

impl SkewProduct {
    pub fn new(fiber_window: usize) -> Result<Self, RdsError> {
        if fiber_window == 0 {
            return Err(RdsError::Domain("fiber window must be positive".into()));
        }
        Ok(Self { fiber_window })
    }

    pub fn window_bounds(&self) -> (i64, i64) {
        let half = (self.fiber_window / 2) as i64;
        (-half, self.fiber_window as i64 - 1 - half)
    }

    /// `Tⁿ(ω, y) = (θⁿω, S^{φ(n,ω)} y)`.
    pub fn iterate(&self, x: &SkewPoint, n: usize) -> SkewPoint {
        SkewPoint {
            omega: x.omega.shift(n as i64),
            y: x.y.shift(x.omega.cocycle(n)),
        }
    }

    pub fn check_window(&self, c: &Cylinder) -> Result<(), RdsError> {
        let (lo, hi) = self.window_bounds();
        match c.coords().find(|&i| i < lo || i > hi) {
            Some(coord) => Err(RdsError::Window { coord, lo, hi }),
            None => Ok(()),
        }
    }
}

/// A fiber cylinder `{y : y_i = s_i for (i, s_i) listed}`.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<(i64, i8)>", into = "Vec<(i64, i8)>")]
pub struct Cylinder(BTreeMap<i64, i8>);

impl Cylinder {
    pub fn new(constraints: Vec<(i64, i8)>) -> Result<Self, RdsError> {
        let mut map = BTreeMap::new();
        for (i, s) in constraints {
            if s != 1 && s != -1 {
                return Err(RdsError::Domain(format!("cylinder symbol {s} at {i} is not ±1")));
            }
            if map.insert(i, s).is_some_and(|old| old != s) {
                return Err(RdsError::Domain(format!("cylinder fixes coordinate {i} twice")));
            }
        }
        Ok(Self(map))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn coords(&self) -> impl Iterator<Item = i64> + '_ {
        self.0.keys().copied()
    }

    /// Mass under the uniform product measure.
    pub fn mass(&self) -> f64 {
        0.5f64.powi(self.0.len() as i32)
    }

    /// `{y : S^s y ∈ C}`, i.e. the constraints moved by `+s`.
    pub fn preimage(&self, s: i64) -> Cylinder {
        Cylinder(self.0.iter().map(|(&i, &v)| (i + s, v)).collect())
    }

    /// `None` when the constraints contradict each other (empty intersection).
    pub fn intersect(&self, other: &Cylinder) -> Option<Cylinder> {
        let mut out = self.0.clone();
        for (&i, &v) in &other.0 {
            if *out.entry(i).or_insert(v) != v {
                return None;
            }
        }
        Some(Cylinder(out))
    }

    pub fn contains(&self, y: &FiberSequence) -> bool {
        self.0.iter().all(|(&i, &v)| y.symbol(i) == v)
    }
}

impl TryFrom<Vec<(i64, i8)>> for Cylinder {
    type Error = RdsError;
    fn try_from(v: Vec<(i64, i8)>) -> Result<Self, Self::Error> {
        Cylinder::new(v)
    }
}

impl From<Cylinder> for Vec<(i64, i8)> {
    fn from(c: Cylinder) -> Self {
        c.0.into_iter().collect()
    }
}
