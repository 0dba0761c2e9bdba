//! Exact evaluation of diag(e^t, e^-t) orbits at d = 2.
//!
//! Lattices are sampled as exact rational matrices whose entries carry
//! thousands of random bits, so the orbit behaves generically out to
//! t ~ bits * ln 2. Heights are read off a Gauss-reduced basis maintained in
//! exact integer arithmetic: with basis rows (u, w)/den and s ~ e^{2t} held
//! as a 127-bit dyadic mantissa, the scaled Gram form
//!     H(c, c') = s^2 (c.u)(c'.u) + (c.w)(c'.w)
//! is integral, and log lambda_1 = (log H_11 - log sigma)/2 for a fixed
//! scale sigma. The reduction state warm-starts from one grid time to the
//! next, so a whole trace costs about as many reduction steps as t_max.

use crate::error::Result;
use crate::flows::LogLawTrace;
use crate::parallel::{self, ExecMode};
use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, LOG2_E, TAU};

/// Random bits per draw so the orbit stays generic out to `t_max`.
///
/// The artifact wall sits at the log of the compounded entry denominator,
/// which is at least `bits * ln 2` (in practice about twice that, since the
/// sampler's rational arithmetic stacks denominators); the 1.2 factor on top
/// keeps the margin one-sided.
pub fn depth_bits(t_max: f64) -> u64 {
    let needed = (1.2 * (t_max + 50.0) * LOG2_E).ceil() as u64;
    needed.max(4096).next_multiple_of(64)
}

fn ln_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 53 {
        let mut v = 0u64;
        for (i, d) in x.iter_u64_digits().enumerate() {
            if i == 0 {
                v = d;
            }
        }
        return (v as f64).ln();
    }
    let shift = bits - 53;
    let top: BigUint = x >> shift;
    let mut v = 0u64;
    for (i, d) in top.iter_u64_digits().enumerate() {
        if i == 0 {
            v = d;
        }
    }
    (v as f64).ln() + shift as f64 * LN_2
}

fn ln_bigint_abs(x: &BigInt) -> f64 {
    ln_biguint(x.magnitude())
}

fn ln_ratio(r: &BigRational) -> f64 {
    ln_bigint_abs(r.numer()) - ln_bigint_abs(r.denom())
}

/// Uniform dyadic rational in [0, 1) with `bits` random bits.
fn dyadic_uniform(rng: &mut ChaCha8Rng, bits: u64) -> BigRational {
    let n_bytes = bits.div_ceil(8) as usize;
    let mut bytes = vec![0u8; n_bytes];
    rng.fill(&mut bytes[..]);
    let extra = (n_bytes as u64) * 8 - bits;
    if extra > 0 {
        bytes[n_bytes - 1] &= 0xffu8 >> extra;
    }
    let num = BigUint::from_bytes_le(&bytes);
    BigRational::new(
        BigInt::from_biguint(Sign::Plus, num),
        BigInt::one() << bits,
    )
}

/// A rank-2 lattice with exact rational basis rows (u, w)/den, deep enough
/// for long diagonal orbits. `half_log_covol` normalizes heights to the
/// unimodular rescaling of the lattice.
#[derive(Clone, Debug)]
pub struct DeepLattice2 {
    u: [BigInt; 2],
    w: [BigInt; 2],
    ln_den: f64,
    half_log_covol: f64,
}

/// Draws from the same hyperbolic-area law as the f64 exact sampler (strip
/// rejection onto the fundamental domain, then a uniform rotation realized
/// as an exact rational point on the circle).
pub fn sample_deep_lattice(rng: &mut ChaCha8Rng, bits: u64) -> DeepLattice2 {
    let inv_y0 = BigRational::new(BigInt::from(50), BigInt::from(43));
    let inv_ymax = BigRational::new(BigInt::one(), BigInt::from(1_000_000));
    let span = &inv_y0 - &inv_ymax;
    let one = BigRational::one();
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let (x, y) = loop {
        let u1 = dyadic_uniform(rng, bits);
        let y = one.clone() / (&inv_y0 - &(&u1 * &span));
        let x = dyadic_uniform(rng, bits) - &half;
        if &x * &x + &y * &y >= one {
            break (x, y);
        }
    };
    // exact rational rotation via the circle parametrization
    // (cos, sin) = ((1-a^2)/(1+a^2), 2a/(1+a^2)), a = tan(theta/2)
    let theta = rng.random::<f64>() * TAU;
    let a = BigRational::from_float((theta / 2.0).tan()).unwrap_or_else(BigRational::zero);
    let a2 = &a * &a;
    let denom = &one + &a2;
    let cos = (&one - &a2) / &denom;
    let sin = (&a + &a) / &denom;
    // rows of R * [[1, x], [0, y]]
    let row_u = [cos.clone(), &cos * &x - &sin * &y];
    let row_w = [sin.clone(), &sin * &x + &cos * &y];
    let mut den: BigInt = BigInt::one();
    for e in row_u.iter().chain(row_w.iter()) {
        den = den.lcm(e.denom());
    }
    let scale = |e: &BigRational| -> BigInt { e.numer() * (&den / e.denom()) };
    DeepLattice2 {
        u: [scale(&row_u[0]), scale(&row_u[1])],
        w: [scale(&row_w[0]), scale(&row_w[1])],
        ln_den: ln_bigint_abs(&den),
        half_log_covol: 0.5 * ln_ratio(&y),
    }
}

/// s = e^{2t} as mantissa * 2^exponent with mantissa in [2^126, 2^127).
fn exp_2t(t: f64) -> (BigUint, i64) {
    let l = 2.0 * t * LOG2_E;
    let mut fl = l.floor();
    let frac = l - fl;
    let mut mant = (frac.exp2() * 2f64.powi(126)).round();
    if mant >= 2f64.powi(127) {
        mant = 2f64.powi(126);
        fl += 1.0;
    }
    (BigUint::from(mant as u128), fl as i64 - 126)
}

/// Gauss-reduction state of one orbit under diag(e^t, e^-t).
pub struct DiagonalOrbit2 {
    lat: DeepLattice2,
    c1: [BigInt; 2],
    c2: [BigInt; 2],
    p1: BigInt,
    q1: BigInt,
    p2: BigInt,
    q2: BigInt,
}

impl DiagonalOrbit2 {
    pub fn new(lat: DeepLattice2) -> DiagonalOrbit2 {
        let (p1, q1) = (lat.u[0].clone(), lat.w[0].clone());
        let (p2, q2) = (lat.u[1].clone(), lat.w[1].clone());
        DiagonalOrbit2 {
            lat,
            c1: [BigInt::one(), BigInt::zero()],
            c2: [BigInt::zero(), BigInt::one()],
            p1,
            q1,
            p2,
            q2,
        }
    }

    /// Delta_1 = -log lambda_1 of the unimodular orbit point at time t.
    ///
    /// Warm-starts from the previous reduction state; evaluation times should
    /// be visited in ascending order for the intended cost profile.
    pub fn delta1_at(&mut self, t: f64) -> f64 {
        let (mant, m) = exp_2t(t);
        let p_int = BigInt::from_biguint(Sign::Plus, &mant * &mant);
        let (wx, wy, extra_ln) = if m >= 0 {
            (p_int << ((2 * m) as u64), BigInt::one(), 0.0)
        } else {
            let shift = (-2 * m) as u64;
            (p_int, BigInt::one() << shift, shift as f64 * LN_2)
        };
        let mut h11 = &wx * &self.p1 * &self.p1 + &wy * &self.q1 * &self.q1;
        let mut h12 = &wx * &self.p1 * &self.p2 + &wy * &self.q1 * &self.q2;
        let mut h22 = &wx * &self.p2 * &self.p2 + &wy * &self.q2 * &self.q2;
        for _step in 0..200_000 {
            if h11 > h22 {
                std::mem::swap(&mut self.c1, &mut self.c2);
                std::mem::swap(&mut self.p1, &mut self.p2);
                std::mem::swap(&mut self.q1, &mut self.q2);
                std::mem::swap(&mut h11, &mut h22);
            }
            let mu = (&h12 + &h12 + &h11).div_floor(&(&h11 + &h11));
            if mu.is_zero() {
                break;
            }
            self.c2[0] -= &mu * &self.c1[0];
            self.c2[1] -= &mu * &self.c1[1];
            self.p2 -= &mu * &self.p1;
            self.q2 -= &mu * &self.q1;
            h22 = h22 - (&mu + &mu) * &h12 + &mu * &mu * &h11;
            h12 -= &mu * &h11;
        }
        debug_assert!(h11.is_positive());
        // lambda_1^2 = H_11 / sigma, sigma = s * den^2 * 2^{max(0, -2m)}
        let ln_s = ln_biguint(&mant) + m as f64 * LN_2;
        let ln_sigma = ln_s + 2.0 * self.lat.ln_den + extra_ln;
        let ln_lambda = 0.5 * (ln_bigint_abs(&h11) - ln_sigma);
        -(ln_lambda - self.lat.half_log_covol)
    }
}

/// Per-seed summary of a long trace.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceOutcome {
    pub seed_index: u64,
    pub final_ratio: f64,
    pub trace: LogLawTrace,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TraceConfig {
    pub t_min: f64,
    pub t_max: f64,
    /// geometric grid step (consecutive times differ by this factor)
    pub step: f64,
    pub bits: u64,
    /// diagonal rate: the orbit runs under diag(e^{rate t}, e^{-rate t})
    /// while ratios are taken against log t
    pub rate: f64,
}

impl TraceConfig {
    pub fn standard(t_max: f64) -> TraceConfig {
        TraceConfig {
            t_min: 30.0,
            t_max,
            step: 1.05,
            bits: depth_bits(t_max),
            rate: 1.0,
        }
    }

    pub fn grid(&self) -> Vec<f64> {
        let mut times = Vec::new();
        let mut t = self.t_min;
        while t < self.t_max * (1.0 - 1e-12) {
            times.push(t);
            t *= self.step;
        }
        times.push(self.t_max);
        times
    }
}

/// Runs the diagonal trace for one seeded deep lattice.
pub fn deep_trace(master_seed: u64, seed_index: u64, cfg: &TraceConfig) -> TraceOutcome {
    let mut rng = parallel::block_rng(master_seed, seed_index);
    let lat = sample_deep_lattice(&mut rng, cfg.bits);
    let mut orbit = DiagonalOrbit2::new(lat);
    let times = cfg.grid();
    let deltas: Vec<f64> = times.iter().map(|&t| orbit.delta1_at(cfg.rate * t)).collect();
    let trace = LogLawTrace::from_deltas(times, deltas);
    TraceOutcome {
        seed_index,
        final_ratio: trace.final_ratio(),
        trace,
    }
}

/// Traces for `n_seeds` independent Haar lattices, in parallel.
pub fn trace_experiment(
    master_seed: u64,
    n_seeds: u64,
    cfg: &TraceConfig,
    mode: ExecMode,
) -> Vec<TraceOutcome> {
    parallel::map_indexed(n_seeds as usize, mode, |s| {
        deep_trace(master_seed, s as u64, cfg)
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BorelCantelliReport {
    pub epsilon: f64,
    pub t_maxes: Vec<f64>,
    /// `fractions[seed][k]` = violating fraction of grid times in
    /// [t_max_k / 2, t_max_k]
    pub fractions: Vec<Vec<f64>>,
    /// seeds whose fraction sequence is nonincreasing across the t_maxes
    pub nonincreasing_seeds: usize,
}

/// Checks that the fraction of late-orbit times violating
/// Delta_1 <= (1/(d i) + epsilon) log t shrinks as the horizon grows.
pub fn borel_cantelli_experiment(
    master_seed: u64,
    n_seeds: u64,
    epsilon: f64,
    t_maxes: &[f64],
    mode: ExecMode,
) -> Result<BorelCantelliReport> {
    let di = 2.0; // d = 2, i = 1
    let bits = depth_bits(t_maxes.iter().cloned().fold(100.0, f64::max));
    let rows = parallel::map_indexed(n_seeds as usize, mode, |s| {
        let mut rng = parallel::block_rng(master_seed, s as u64);
        let lat = sample_deep_lattice(&mut rng, bits);
        let mut orbit = DiagonalOrbit2::new(lat);
        let mut fractions = Vec::with_capacity(t_maxes.len());
        for &t_max in t_maxes {
            let mut t = t_max / 2.0;
            let (mut total, mut violations) = (0usize, 0usize);
            while t <= t_max * (1.0 + 1e-12) {
                let delta = orbit.delta1_at(t);
                if delta > (1.0 / di + epsilon) * t.ln() {
                    violations += 1;
                }
                total += 1;
                t *= 1.05;
            }
            fractions.push(violations as f64 / total as f64);
        }
        fractions
    });
    let nonincreasing = rows
        .iter()
        .filter(|f| f.windows(2).all(|w| w[1] <= w[0] + 1e-12))
        .count();
    Ok(BorelCantelliReport {
        epsilon,
        t_maxes: t_maxes.to_vec(),
        fractions: rows,
        nonincreasing_seeds: nonincreasing,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HittingReport {
    pub t_levels: Vec<f64>,
    /// `hits[seed][level]`: first integer m with Delta_1(m) >= t, None within
    /// the budget
    pub hits: Vec<Vec<Option<u64>>>,
    pub mean_log_m: Vec<f64>,
    /// OLS slope of mean log m against t
    pub slope: f64,
}

/// First discrete times the orbit enters the shrinking targets
/// {lambda_1 <= e^{-t}}, with the regression slope of log m on t.
pub fn hitting_experiment(
    master_seed: u64,
    n_seeds: u64,
    t_levels: &[f64],
    m_max: u64,
    mode: ExecMode,
) -> Result<HittingReport> {
    let bits = depth_bits(m_max as f64);
    let rows: Vec<Vec<Option<u64>>> = parallel::map_indexed(n_seeds as usize, mode, |s| {
        let mut rng = parallel::block_rng(master_seed, s as u64);
        let lat = sample_deep_lattice(&mut rng, bits);
        let mut orbit = DiagonalOrbit2::new(lat);
        let mut hits: Vec<Option<u64>> = vec![None; t_levels.len()];
        for m in 1..=m_max {
            let delta = orbit.delta1_at(m as f64);
            let mut all_done = true;
            for (hit, &level) in hits.iter_mut().zip(t_levels) {
                if hit.is_none() {
                    if delta >= level {
                        *hit = Some(m);
                    } else {
                        all_done = false;
                    }
                }
            }
            if all_done {
                break;
            }
        }
        hits
    });
    let mut mean_log_m = Vec::with_capacity(t_levels.len());
    for j in 0..t_levels.len() {
        let vals: Vec<f64> = rows
            .iter()
            .filter_map(|r| r[j].map(|m| (m as f64).ln()))
            .collect();
        mean_log_m.push(vals.iter().sum::<f64>() / vals.len().max(1) as f64);
    }
    // plain least squares of mean log m on t
    let n = t_levels.len() as f64;
    let tbar = t_levels.iter().sum::<f64>() / n;
    let ybar = mean_log_m.iter().sum::<f64>() / n;
    let sxx: f64 = t_levels.iter().map(|t| (t - tbar) * (t - tbar)).sum();
    let sxy: f64 = t_levels
        .iter()
        .zip(&mean_log_m)
        .map(|(t, y)| (t - tbar) * (y - ybar))
        .sum();
    Ok(HittingReport {
        t_levels: t_levels.to_vec(),
        hits: rows,
        mean_log_m,
        slope: sxy / sxx,
    })
}
