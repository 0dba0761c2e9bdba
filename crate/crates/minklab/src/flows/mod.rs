//! Diagonal and unipotent flows on the space of lattices, height traces,
//! hitting times, and the supporting experiments.
//!
//! The plain-f64 entry points here are exact for unipotent flows (whose
//! coefficient growth is polynomial) and for short diagonal orbits. A basis
//! held in f64 is a dyadic-rational lattice, and under `diag(e^t, e^-t)` its
//! rational structure takes over near t ≈ 36 (53 bits of mantissa): beyond
//! that the computed orbit escapes along an artifact direction no matter how
//! carefully the arithmetic is done. The long-horizon experiments therefore
//! live in [`deep`], which samples lattices at thousands of bits of depth
//! and reduces exactly.

pub mod deep;

use crate::error::{Error, Result};
use crate::lattice::LatticeBasis;
use crate::mat::Mat;
use crate::minima;
use serde::{Deserialize, Serialize};

/// Generator of a one-parameter flow.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum FlowSpec {
    /// exp(t diag(z)) with sum(z) = 0 and z != 0.
    Diagonal { z: Vec<f64> },
    /// exp(t N) for a strictly upper-triangular N (nilpotent, so the
    /// exponential is the finite series).
    Unipotent { n: Mat },
}

impl FlowSpec {
    pub fn diagonal(z: Vec<f64>) -> Result<FlowSpec> {
        let sum: f64 = z.iter().sum();
        if sum.abs() > 1e-12 {
            return Err(Error::InvalidRange(format!(
                "diagonal generator must be traceless, sum = {sum}"
            )));
        }
        if !z.iter().any(|&x| x.abs() > 0.0) {
            return Err(Error::InvalidRange("diagonal generator is zero".into()));
        }
        Ok(FlowSpec::Diagonal { z })
    }

    pub fn unipotent(n: Mat) -> Result<FlowSpec> {
        for i in 0..n.dim() {
            for j in 0..=i {
                if n[(i, j)] != 0.0 {
                    return Err(Error::InvalidRange(
                        "unipotent generator must be strictly upper triangular".into(),
                    ));
                }
            }
        }
        Ok(FlowSpec::Unipotent { n })
    }

    pub fn dim(&self) -> usize {
        match self {
            FlowSpec::Diagonal { z } => z.len(),
            FlowSpec::Unipotent { n } => n.dim(),
        }
    }

    /// Closed-form flow matrix at time t.
    pub fn matrix(&self, t: f64) -> Mat {
        match self {
            FlowSpec::Diagonal { z } => {
                let d = z.len();
                let mut m = Mat::zeros(d);
                for i in 0..d {
                    m[(i, i)] = (t * z[i]).exp();
                }
                m
            }
            FlowSpec::Unipotent { n } => {
                let d = n.dim();
                let mut term = Mat::identity(d);
                let mut sum = Mat::identity(d);
                for j in 1..d {
                    term = term.mul(&n.scale(t / j as f64));
                    sum = sum.add(&term);
                }
                sum
            }
        }
    }
}

/// Left-multiplies the basis by the flow matrix at time t.
pub fn apply_flow(spec: &FlowSpec, t: f64, basis: &LatticeBasis) -> Result<LatticeBasis> {
    basis.transform(&spec.matrix(t))
}

/// Height trace along an orbit: times, Delta_i = -log lambda_i, and the
/// running maximum of Delta_i(s) / log s.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LogLawTrace {
    pub times: Vec<f64>,
    pub delta_values: Vec<f64>,
    pub running_ratio: Vec<f64>,
}

impl LogLawTrace {
    pub fn from_deltas(times: Vec<f64>, delta_values: Vec<f64>) -> LogLawTrace {
        let mut running = Vec::with_capacity(times.len());
        let mut best = f64::NEG_INFINITY;
        for (t, d) in times.iter().zip(&delta_values) {
            best = best.max(d / t.ln());
            running.push(best);
        }
        LogLawTrace {
            times,
            delta_values,
            running_ratio: running,
        }
    }

    pub fn final_ratio(&self) -> f64 {
        *self.running_ratio.last().unwrap_or(&f64::NAN)
    }
}

/// Geometric time grid from `t_min` to `t_max` with `points` entries.
pub fn geometric_grid(t_min: f64, t_max: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2 && t_max > t_min && t_min > 1.0);
    let ratio = (t_max / t_min).powf(1.0 / (points - 1) as f64);
    (0..points).map(|k| t_min * ratio.powi(k as i32)).collect()
}

pub const TRACE_T_MIN_DEFAULT: f64 = 2.0;

/// Evaluates Delta_i along the orbit on a geometric grid (f64 path; see the
/// module docs for its depth ceiling under diagonal flows).
pub fn log_law_trace(
    spec: &FlowSpec,
    basis: &LatticeBasis,
    i: usize,
    t_max: f64,
    grid: usize,
) -> Result<LogLawTrace> {
    let d = basis.dim();
    if d > 3 {
        return Err(Error::DimensionTooLarge {
            dim: d,
            max: 3,
            op: "log_law_trace",
        });
    }
    if i == 0 || i >= d {
        return Err(Error::InvalidRange(format!(
            "trace index must satisfy 1 <= i <= d-1, got i={i}"
        )));
    }
    if !(t_max > TRACE_T_MIN_DEFAULT && t_max <= 1e5) {
        return Err(Error::InvalidRange(
            "t_max must lie in (t_min, 1e5]".into(),
        ));
    }
    let times = geometric_grid(TRACE_T_MIN_DEFAULT, t_max, grid.max(2));
    let mut deltas = Vec::with_capacity(times.len());
    for &t in &times {
        let moved = apply_flow(spec, t, basis)?;
        let lam = minima::partial_minima(&moved, i)?.values[i - 1];
        deltas.push(-lam.ln());
    }
    Ok(LogLawTrace::from_deltas(times, deltas))
}

/// Fraction of late-orbit grid times violating the height bound
/// `Delta_i <= (1/(d i) + epsilon) log t`, per seed and per horizon.
///
/// Diagonal flows route through the exact engine in [`deep`] (supported for
/// d = 2, i = 1, generator proportional to (1, -1)); unipotent flows at
/// d = 2 stay on the f64 path, whose polynomial coefficient growth keeps it
/// exact over these horizons.
pub fn borel_cantelli_upper_check(
    spec: &FlowSpec,
    i: usize,
    epsilon: f64,
    seeds: u64,
    t_maxes: &[f64],
    master_seed: u64,
    mode: crate::parallel::ExecMode,
) -> Result<deep::BorelCantelliReport> {
    let d = spec.dim();
    match spec {
        FlowSpec::Diagonal { z } => {
            if d != 2 || i != 1 || (z[0] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidRange(
                    "the exact engine covers the d = 2, i = 1 flow with z = (1, -1); \
                     rescale time for other diagonal rates"
                        .into(),
                ));
            }
            deep::borel_cantelli_experiment(master_seed, seeds, epsilon, t_maxes, mode)
        }
        FlowSpec::Unipotent { .. } => {
            if d != 2 || i != 1 {
                return Err(Error::DimensionTooLarge {
                    dim: d,
                    max: 2,
                    op: "borel_cantelli_upper_check (unipotent)",
                });
            }
            let di = 2.0;
            let sampler = crate::haar::HaarSampler::exact_d2();
            let rows = crate::parallel::map_indexed(seeds as usize, mode, |s| -> Result<Vec<f64>> {
                let mut rng = crate::parallel::block_rng(master_seed, s as u64);
                let (basis, _) = sampler.sample_one(&mut rng)?;
                let mut fractions = Vec::with_capacity(t_maxes.len());
                for &t_max in t_maxes {
                    let mut t = t_max / 2.0;
                    let (mut total, mut violations) = (0usize, 0usize);
                    while t <= t_max * (1.0 + 1e-12) {
                        let moved = apply_flow(spec, t, &basis)?;
                        let lam = minima::partial_minima(&moved, i)?.values[i - 1];
                        if -lam.ln() > (1.0 / di + epsilon) * t.ln() {
                            violations += 1;
                        }
                        total += 1;
                        t *= 1.05;
                    }
                    fractions.push(violations as f64 / total as f64);
                }
                Ok(fractions)
            });
            let mut fractions = Vec::with_capacity(rows.len());
            for r in rows {
                fractions.push(r?);
            }
            let nonincreasing = fractions
                .iter()
                .filter(|f: &&Vec<f64>| f.windows(2).all(|w| w[1] <= w[0] + 1e-12))
                .count();
            Ok(deep::BorelCantelliReport {
                epsilon,
                t_maxes: t_maxes.to_vec(),
                fractions,
                nonincreasing_seeds: nonincreasing,
            })
        }
    }
}

/// First integer time m in 1..=m_max with lambda_i(flow_m basis) <= level,
/// or None within the budget (f64 path).
pub fn hitting_time(
    spec: &FlowSpec,
    basis: &LatticeBasis,
    i: usize,
    level: f64,
    m_max: u64,
) -> Result<Option<u64>> {
    let d = basis.dim();
    if i == 0 || i > d {
        return Err(Error::InvalidRange(format!("bad minima index i={i}")));
    }
    for m in 1..=m_max {
        let moved = apply_flow(spec, m as f64, basis)?;
        let lam = minima::partial_minima(&moved, i)?.values[i - 1];
        if lam <= level {
            return Ok(Some(m));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::is_unimodular_integer_matrix;

    #[test]
    fn flow_matrices() {
        let diag = FlowSpec::diagonal(vec![1.0, -1.0]).unwrap();
        let m = diag.matrix(2f64.ln());
        assert!((m[(0, 0)] - 2.0).abs() < 1e-12 && (m[(1, 1)] - 0.5).abs() < 1e-12);

        let nil = FlowSpec::unipotent(Mat::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]])).unwrap();
        let u = nil.matrix(1.0);
        assert!((u[(0, 1)] - 1.0).abs() < 1e-15 && (u[(0, 0)] - 1.0).abs() < 1e-15);

        assert!(FlowSpec::diagonal(vec![1.0, -0.5]).is_err());
        assert!(
            FlowSpec::unipotent(Mat::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]])).is_err()
        );
    }

    #[test]
    fn flow_preserves_identity_at_zero_and_covolume() {
        let z2 = LatticeBasis::standard(2);
        let diag = FlowSpec::diagonal(vec![1.0, -1.0]).unwrap();
        let b0 = apply_flow(&diag, 0.0, &z2).unwrap();
        assert!(b0.matrix().frobenius_dist(&z2.matrix()) < 1e-15);
        for t in [0.3, 1.0, 4.0] {
            let b = apply_flow(&diag, t, &z2).unwrap();
            assert!((b.covolume() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn z2_orbit_has_closed_form_height() {
        // lambda_1(diag(e^t, e^-t) Z^2) = e^-t for t >= 0, so the raw ratio
        // t / log t runs away on this special fixture.
        let z2 = LatticeBasis::standard(2);
        let diag = FlowSpec::diagonal(vec![1.0, -1.0]).unwrap();
        for t in [0.5, 1.0, 2.5, 5.0] {
            let lam = minima::partial_minima(&apply_flow(&diag, t, &z2).unwrap(), 1)
                .unwrap()
                .values[0];
            assert!((lam - (-t).exp()).abs() < 1e-9);
        }
        // the f64 path keeps its aspect-ratio headroom up to t ~ 11
        let trace = log_law_trace(&diag, &z2, 1, 10.0, 20).unwrap();
        assert!(trace.final_ratio() > 2.0);
        // running ratio is nondecreasing by construction
        for w in trace.running_ratio.windows(2) {
            assert!(w[1] >= w[0] - 1e-15);
        }
    }

    #[test]
    fn dual_commutes_with_the_flow_block_form() {
        // dual(g_t u_A Z^d) spans the same lattice as g_t^{-T} u_A^{-T} Z^d
        for (m, n) in [(1usize, 1usize), (1, 2), (2, 1)] {
            let d = m + n;
            let mut a_block = Mat::zeros(d);
            for i in 0..m {
                for j in 0..n {
                    a_block[(i, m + j)] = 0.3 + 0.4 * (i + j) as f64;
                }
            }
            let u_a = Mat::identity(d).add(&a_block);
            let t = 0.7;
            let mut g_t = Mat::zeros(d);
            for i in 0..m {
                g_t[(i, i)] = (t / m as f64).exp();
            }
            for j in 0..n {
                g_t[(m + j, m + j)] = (-t / n as f64).exp();
            }
            let forward = LatticeBasis::from_matrix(&g_t.mul(&u_a)).unwrap();
            let dual = forward.dual().unwrap();
            let expected = g_t
                .inverse()
                .unwrap()
                .transpose()
                .mul(&u_a.inverse().unwrap().transpose());
            let change = expected.inverse().unwrap().mul(&dual.matrix());
            assert!(is_unimodular_integer_matrix(&change));
        }
    }

    #[test]
    fn hitting_time_trivial_cases() {
        let z2 = LatticeBasis::standard(2);
        let diag = FlowSpec::diagonal(vec![1.0, -1.0]).unwrap();
        // at m = 1 the orbit already has lambda_1 = e^{-1} <= 0.5
        assert_eq!(hitting_time(&diag, &z2, 1, 0.5, 10).unwrap(), Some(1));
        // unreachable level within the budget
        assert_eq!(hitting_time(&diag, &z2, 1, 1e-9, 5).unwrap(), None);
    }
}
