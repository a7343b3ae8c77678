use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::measure::{Alphabet, DenseMeasure};

use super::{BaseSequence, RdsError};

/// Bound on `d(Q, P)` for the perturbations `Q` ruled out by the contradiction.
const PERTURBATION: f64 = 0.01;
/// The fiber distance the window must beat.
const THRESHOLD: f64 = 0.01;

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity(n + 1);
    t.push(0.0);
    for k in 1..=n {
        t.push(t[k - 1] + (k as f64).ln());
    }
    t
}

/// Law of the simple ±1 walk after `k` steps as `(values, probabilities)`.
fn walk_law(k: usize, lf: &[f64]) -> (Vec<i64>, Vec<f64>) {
    let ln2 = std::f64::consts::LN_2;
    (0..=k)
        .map(|u| {
            let v = 2 * u as i64 - k as i64;
            (v, (lf[k] - lf[u] - lf[k - u] - k as f64 * ln2).exp())
        })
        .unzip()
}

/// `Pr[S_k = v]` for the simple ±1 random walk.
pub fn walk_probability(k: usize, v: i64) -> f64 {
    if v.unsigned_abs() as usize > k || (k as i64 + v) % 2 != 0 {
        return 0.0;
    }
    let lf = ln_factorials(k);
    let u = ((k as i64 + v) / 2) as usize;
    (lf[k] - lf[u] - lf[k - u] - k as f64 * std::f64::consts::LN_2).exp()
}

fn check_window(w: usize) -> Result<(), RdsError> {
    if w < 3 || w.is_multiple_of(2) {
        return Err(RdsError::Domain(format!("window W = {w} must be odd and ≥ 3")));
    }
    Ok(())
}

/// `Pr[sign(Σ_{i=1}^{W} y_i) ≠ sign(Σ_{i=1+s}^{W+s} y_i)]` for i.i.d. fair ±1 symbols.
///
/// The two sums share `W − |s|` terms; with `C` their sum and `X`, `Y` the sums of the
/// `|s|` terms only one window sees, the flip probability is
/// `Σ_c Pr[C=c] · 2 Pr[c+X>0] Pr[c+X<0]`.
pub fn sign_flip_probability(w: usize, s: i64) -> Result<f64, RdsError> {
    check_window(w)?;
    let s = s.unsigned_abs() as usize;
    if s == 0 {
        return Ok(0.0);
    }
    if s >= w {
        return Ok(0.5);
    }
    let lf = ln_factorials(w);
    let (cv, cp) = walk_law(w - s, &lf);
    let (xv, xp) = walk_law(s, &lf);
    // tail[i] = Pr[X ≥ xv[i]]
    let mut tail = vec![0.0; xp.len() + 1];
    for i in (0..xp.len()).rev() {
        tail[i] = tail[i + 1] + xp[i];
    }
    let total = cv
        .iter()
        .zip(&cp)
        .map(|(&c, &pc)| {
            // first index with c + X > 0
            let i = xv.partition_point(|&x| c + x <= 0);
            let up = tail[i];
            2.0 * pc * up * (1.0 - up)
        })
        .sum::<f64>();
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ShiftMethod {
    Exact,
    MonteCarlo { samples: u64, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    /// Binomial standard error; zero for exact evaluations.
    pub std_error: f64,
}

/// Draws whether the sign of a `W`-window sum flips under a shift by `s`.
fn sample_flip<R: Rng>(rng: &mut R, w: usize, s: usize) -> bool {
    let walk = |rng: &mut R, k: usize| -> i64 {
        if k == 0 {
            return 0;
        }
        let b = Binomial::new(k as u64, 0.5).expect("valid binomial").sample(rng) as i64;
        2 * b - k as i64
    };
    let s = s.min(w);
    let c = walk(rng, w - s);
    let x = walk(rng, s);
    let y = walk(rng, s);
    (c + x > 0) != (c + y > 0)
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const CHUNK: u64 = 1 << 14;

/// `d(R, SR)` for `R(y) = sign(Σ_{i=1}^{W} y_i)`: exactly (log-binomial evaluation of
/// [`sign_flip_probability`] at shift 1) or by seeded Monte Carlo.
pub fn shift_distance(w: usize, method: ShiftMethod) -> Result<Estimate, RdsError> {
    check_window(w)?;
    match method {
        ShiftMethod::Exact => Ok(Estimate {
            value: sign_flip_probability(w, 1)?,
            std_error: 0.0,
        }),
        ShiftMethod::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(RdsError::Domain("Monte Carlo needs at least one sample".into()));
            }
            let hits: u64 = (0..samples.div_ceil(CHUNK))
                .into_par_iter()
                .map(|chunk| {
                    let mut rng = stream_rng(seed, chunk);
                    let n = CHUNK.min(samples - chunk * CHUNK);
                    (0..n).filter(|_| sample_flip(&mut rng, w, 1)).count() as u64
                })
                .sum();
            let p = hits as f64 / samples as f64;
            Ok(Estimate {
                value: p,
                std_error: (p * (1.0 - p) / samples as f64).sqrt(),
            })
        }
    }
}

/// `μ{Q ≠ Q′}` for two independent partitions with atoms of mass `(p, 1 − p)`,
/// read off the two-cell product measure.
pub fn independence_forced_distance(p: f64) -> Result<f64, RdsError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(RdsError::Domain(format!("atom mass {p} outside [0, 1]")));
    }
    let a = Alphabet::binary();
    let q = DenseMeasure::on_coordinate(a, 0, vec![p, 1.0 - p])
        .and_then(|m| m.tensor(&DenseMeasure::on_coordinate(a, 1, vec![p, 1.0 - p])?))
        .map_err(|e| RdsError::Domain(e.to_string()))?;
    Ok(q.value(&[0, 1]) + q.value(&[1, 0]))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Convention {
    pub metric: String,
    /// `d(Q, TⁿQ)` forced by exact independence under this metric.
    pub forced: f64,
    /// `forced − triangle_bound`; positive means the contradiction holds.
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CounterexampleReport {
    pub w: usize,
    pub n: usize,
    pub samples: u64,
    pub seed: u64,
    /// `n mod 2`: the value of `φ(n, ·)` defining the parity set `E`.
    pub delta: i64,
    pub shift_distance: f64,
    pub threshold: f64,
    /// `shift_distance < threshold`; when false the remaining numbers are still reported.
    pub precondition_met: bool,
    pub parity_mass_exact: f64,
    pub parity_mass_empirical: f64,
    pub parity_hits: u64,
    /// Largest exact `d_{μ_ω}(P, TⁿP)` over sampled `ω ∈ θⁿE`.
    pub max_fiber_distance: f64,
    /// Pooled Monte Carlo estimate of the same distance (one fiber draw per hit).
    pub fiber_distance_empirical: Estimate,
    pub all_below_threshold: bool,
    /// `d(Q, P) + d(P, TⁿP) + d(TⁿP, TⁿQ)` for any `Q` within `0.01` of `P`.
    pub triangle_bound: f64,
    /// The bound `3/100` stated for the same quantity.
    pub stated_bound: f64,
    pub forced_distance: f64,
    pub contradiction_margin: f64,
    pub conventions: Vec<Convention>,
}

/// The fiber partition is `P(ω, y) = sign(Σ_{i=1}^{W} y_i)` and
/// `(TⁿP)(x) = P(T^{−n}x)`. For `ω ∈ θⁿE` the fiber map of `T^{−n}` is a shift by
/// `−φ(n, θ^{−n}ω) = −δ`, so `d_{μ_ω}(P, TⁿP)` is the sign-flip probability at shift δ.
/// Sampling draws `ω′ = θ^{−n}ω` from the base measure and keeps those in `E`.
pub fn counterexample_check(
    w: usize,
    n: usize,
    samples: u64,
    seed: u64,
) -> Result<CounterexampleReport, RdsError> {
    check_window(w)?;
    if n == 0 || samples == 0 {
        return Err(RdsError::Domain("n and samples must be positive".into()));
    }
    let delta = (n % 2) as i64;
    let sd = shift_distance(w, ShiftMethod::Exact)?.value;
    let fiber_exact = sign_flip_probability(w, -delta)?;

    let (hits, flips) = (0..samples.div_ceil(CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let mut rng = stream_rng(seed, chunk);
            let count = CHUNK.min(samples - chunk * CHUNK);
            let mut hits = 0u64;
            let mut flips = 0u64;
            for _ in 0..count {
                let omega = BaseSequence::new(rng.next_u64());
                let phi = omega.cocycle(n);
                if phi == delta {
                    hits += 1;
                    flips += u64::from(sample_flip(&mut rng, w, phi.unsigned_abs() as usize));
                }
            }
            (hits, flips)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));

    let max_fiber_distance = if hits > 0 { fiber_exact } else { 0.0 };
    let p = if hits > 0 { flips as f64 / hits as f64 } else { 0.0 };
    let empirical = Estimate {
        value: p,
        std_error: if hits > 0 { (p * (1.0 - p) / hits as f64).sqrt() } else { 0.0 },
    };
    let triangle_bound = 2.0 * PERTURBATION + max_fiber_distance;
    let forced = independence_forced_distance(0.5)?;
    let conventions = [
        ("mass of {Q != TnQ}", forced),
        ("sum of atom symmetric differences", 2.0 * forced),
        ("value stated in the source", 0.25),
    ]
    .into_iter()
    .map(|(metric, f)| Convention {
        metric: metric.to_string(),
        forced: f,
        margin: f - triangle_bound,
    })
    .collect();
    Ok(CounterexampleReport {
        w,
        n,
        samples,
        seed,
        delta,
        shift_distance: sd,
        threshold: THRESHOLD,
        precondition_met: sd < THRESHOLD,
        parity_mass_exact: walk_probability(n, delta),
        parity_mass_empirical: hits as f64 / samples as f64,
        parity_hits: hits,
        max_fiber_distance,
        fiber_distance_empirical: empirical,
        all_below_threshold: max_fiber_distance < THRESHOLD,
        triangle_bound,
        stated_bound: 0.03,
        forced_distance: forced,
        contradiction_margin: forced - triangle_bound,
        conventions,
    })
}
