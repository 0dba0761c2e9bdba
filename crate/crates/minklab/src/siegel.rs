//! Primitive tuples, the ball-indicator counting transform, and the
//! Monte-Carlo check of the mean-value identity
//! `E_mu[ f-hat^k ] = c_{d,k} (V_d r^d)^k`.

use crate::error::{Error, Result};
use crate::haar::{HaarSampler, SamplerKind};
use crate::intmat;
use crate::lattice::{LatticeBasis, LatticeVector};
use crate::minima;
use crate::parallel::ExecMode;
use crate::special::unit_ball_volume;
use serde::{Deserialize, Serialize};

/// Budget for exact enumerations: counts must be exact, so running over
/// budget is a hard error rather than a silent truncation.
pub const DEFAULT_ENUM_BUDGET: usize = 1_000_000;

/// An ordered k-tuple of lattice vectors extendable to a basis; all
/// elementary divisors of the k x d coefficient matrix equal 1.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PrimitiveTuple {
    pub vectors: Vec<LatticeVector>,
}

impl PrimitiveTuple {
    pub fn order(&self) -> usize {
        self.vectors.len()
    }
}

fn check_tuple_args(d: usize, k: usize) -> Result<()> {
    // d = 5 is admitted as a primitivity stress case; the exact counts stay
    // tiny at the radii these calls use.
    if d > 5 {
        return Err(Error::DimensionTooLarge {
            dim: d,
            max: 5,
            op: "primitive tuple enumeration",
        });
    }
    if k == 0 || k >= d {
        return Err(Error::InvalidRange(format!(
            "tuple order must satisfy 1 <= k < d, got k={k}, d={d}"
        )));
    }
    Ok(())
}

/// Signed expansion of the canonical half-space representatives.
fn signed_points(basis: &LatticeBasis, radius: f64, budget: usize) -> Result<Vec<LatticeVector>> {
    let canon = minima::lattice_points_within(basis, radius, budget)?;
    if canon.len() * 2 > budget {
        return Err(Error::EnumerationBudgetExceeded { budget });
    }
    let mut all = Vec::with_capacity(canon.len() * 2);
    for v in canon {
        all.push(basis.vector(v.coeffs.iter().map(|c| -c).collect()));
        all.push(v);
    }
    all.sort_by(|a, b| {
        a.norm
            .partial_cmp(&b.norm)
            .unwrap()
            .then_with(|| a.coeffs.cmp(&b.coeffs))
    });
    Ok(all)
}

/// All ordered primitive k-tuples with every component of norm <= radius.
/// Sign and permutation variants count as distinct tuples.
pub fn enumerate_primitive_tuples(
    basis: &LatticeBasis,
    k: usize,
    radius: f64,
    budget: usize,
) -> Result<Vec<PrimitiveTuple>> {
    check_tuple_args(basis.dim(), k)?;
    let points = signed_points(basis, radius, budget)?;
    let mut out = Vec::new();
    let mut prefix: Vec<usize> = Vec::with_capacity(k);
    let mut nodes = 0usize;
    tuple_search(&points, k, &mut prefix, &mut nodes, budget, &mut |tuple| {
        out.push(PrimitiveTuple {
            vectors: tuple.to_vec(),
        });
        Ok(())
    })?;
    Ok(out)
}

/// |P^k(L) intersected with the k-fold product of balls of `radius`|: the
/// counting transform for the ball indicator, evaluated exactly.
pub fn f_hat_k(basis: &LatticeBasis, k: usize, radius: f64, budget: usize) -> Result<u64> {
    check_tuple_args(basis.dim(), k)?;
    let points = signed_points(basis, radius, budget)?;
    let mut count = 0u64;
    let mut prefix: Vec<usize> = Vec::with_capacity(k);
    let mut nodes = 0usize;
    tuple_search(&points, k, &mut prefix, &mut nodes, budget, &mut |_| {
        count += 1;
        Ok(())
    })?;
    Ok(count)
}

/// Depth-first walk over ordered tuples with the primitivity test applied to
/// every prefix (subtuples of primitive tuples are primitive, so failing
/// prefixes prune the whole subtree). Visited nodes are charged against the
/// budget.
fn tuple_search(
    points: &[LatticeVector],
    k: usize,
    prefix: &mut Vec<usize>,
    nodes: &mut usize,
    budget: usize,
    emit: &mut dyn FnMut(&[LatticeVector]) -> Result<()>,
) -> Result<()> {
    if prefix.len() == k {
        let tuple: Vec<LatticeVector> = prefix.iter().map(|&i| points[i].clone()).collect();
        return emit(&tuple);
    }
    for idx in 0..points.len() {
        *nodes += 1;
        if *nodes > budget {
            return Err(Error::EnumerationBudgetExceeded { budget });
        }
        prefix.push(idx);
        let rows: Vec<Vec<i64>> = prefix.iter().map(|&i| points[i].coeffs.clone()).collect();
        if intmat::primitive_system(&rows) {
            tuple_search(points, k, prefix, nodes, budget, emit)?;
        }
        prefix.pop();
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SiegelCheckReport {
    pub dim: usize,
    pub k: usize,
    pub radius: f64,
    pub count: usize,
    pub seed: u64,
    pub sampler: SamplerKind,
    /// Weighted ensemble mean of the counting transform.
    pub left: f64,
    /// Closed form c_{d,k} (V_d r^d)^k.
    pub right: f64,
    pub stderr: f64,
    pub z: f64,
}

/// Monte-Carlo check of the mean-value identity for ball indicators:
/// the ensemble average of `f_hat_k` against `c_{d,k} (V_d r^d)^k`.
pub fn siegel_mc_check(
    sampler: &HaarSampler,
    k: usize,
    radius: f64,
    count: usize,
    seed: u64,
    budget: usize,
    mode: ExecMode,
) -> Result<SiegelCheckReport> {
    let d = sampler.dim;
    if !(2..=3).contains(&d) {
        return Err(Error::DimensionTooLarge {
            dim: d,
            max: 3,
            op: "siegel_mc_check",
        });
    }
    check_tuple_args(d, k)?;
    let blocks = sampler.reduce_blocks(count, seed, mode, |iter| {
        let mut s = [0.0f64; 5]; // sw, sw2, swx, sw2x, sw2x2
        for item in iter {
            let (basis, w) = item?;
            let x = f_hat_k(&basis, k, radius, budget)? as f64;
            s[0] += w;
            s[1] += w * w;
            s[2] += w * x;
            s[3] += w * w * x;
            s[4] += w * w * x * x;
        }
        Ok(s)
    })?;
    let mut s = [0.0f64; 5];
    for b in &blocks {
        for (acc, x) in s.iter_mut().zip(b) {
            *acc += x;
        }
    }
    let [sw, sw2, swx, sw2x, sw2x2] = s;
    let left = swx / sw;
    // delta-method variance of the self-normalized ratio:
    // sum w^2 (x - left)^2 / (sum w)^2, expanded into the block scalars
    let var_num = sw2x2 - 2.0 * left * sw2x + left * left * sw2;
    let stderr = var_num.max(0.0).sqrt() / sw;
    let c_dk = crate::haar::volume_constants(d, k)?.c_dk;
    let right = c_dk * (unit_ball_volume(d) * radius.powi(d as i32)).powi(k as i32);
    let z = if stderr > 0.0 {
        (left - right) / stderr
    } else {
        0.0
    };
    Ok(SiegelCheckReport {
        dim: d,
        k,
        radius,
        count,
        seed,
        sampler: sampler.kind,
        left,
        right,
        stderr,
        z,
    })
}
