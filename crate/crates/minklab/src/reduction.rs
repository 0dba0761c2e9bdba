//! Constructive basis algorithms: projecting off a shortest vector, the
//! recursive quasi-minimal basis, greedy Minkowski reduction, and the
//! Minkowski-second-theorem product ratio.

use crate::error::{Error, Result};
use crate::intmat;
use crate::lattice::{LatticeBasis, LatticeVector};
use crate::mat::Mat;
use crate::minima;
use crate::special::unit_ball_volume;
use serde::{Deserialize, Serialize};

/// Projection of the lattice onto the hyperplane orthogonal to a shortest
/// vector. The projected lattice is expressed in an orthonormal frame of the
/// hyperplane, so it is again a square (d-1)-dimensional basis and the
/// construction can recurse.
#[derive(Clone, Debug)]
pub struct ProjectionStep {
    /// A vector attaining lambda_1.
    pub shortest: LatticeVector,
    /// Orthogonal projector onto shortest^perp (ambient d x d matrix).
    pub projector: Mat,
    /// The projected lattice pi(L) in frame coordinates; its covolume is
    /// covol(L) / ||shortest||.
    pub projected_basis: LatticeBasis,
    /// Coefficient vectors (in the input basis) of the completion vectors
    /// whose projections are the columns of `projected_basis`.
    pub lifts: Vec<Vec<i64>>,
}

pub fn project_off_shortest(basis: &LatticeBasis) -> Result<ProjectionStep> {
    let d = basis.dim();
    if d < 2 {
        return Err(Error::InvalidRange(
            "projection needs dimension at least 2".into(),
        ));
    }
    let prof = minima::partial_minima(basis, 1)?;
    let shortest = prof.attaining[0].clone();
    let completion = intmat::unimodular_completion(&shortest.coeffs).ok_or_else(|| {
        Error::InvariantViolation("shortest vector has non-primitive coefficients".into())
    })?;
    // Columns: the shortest vector followed by the rest of the completed basis.
    let mut cols = vec![shortest.embedding.clone()];
    for c in completion.iter().skip(1) {
        cols.push(basis.embed(c));
    }
    let (q, _r) = Mat::from_cols(&cols)
        .qr_positive()
        .ok_or_else(|| Error::InvariantViolation("completion lost rank".into()))?;
    // q columns 1..d form an orthonormal frame of shortest^perp.
    let mut pcols = Vec::with_capacity(d - 1);
    for col in cols.iter().skip(1) {
        let p: Vec<f64> = (1..d)
            .map(|i| q.col(i).iter().zip(col).map(|(a, b)| a * b).sum())
            .collect();
        pcols.push(p);
    }
    let projected_basis = LatticeBasis::new(pcols)?;
    let mut projector = Mat::identity(d);
    let n2 = shortest.norm * shortest.norm;
    for i in 0..d {
        for j in 0..d {
            projector[(i, j)] -= shortest.embedding[i] * shortest.embedding[j] / n2;
        }
    }
    Ok(ProjectionStep {
        shortest,
        projector,
        projected_basis,
        lifts: completion[1..].to_vec(),
    })
}

/// Basis with ||v_1|| = lambda_1 and every ||v_j|| within the explicit
/// envelope [lambda_j / C(d), lambda_j * C(d)], C(d) = (1 + 1/sqrt(3))^d.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuasiMinimalBasis {
    pub vectors: Vec<LatticeVector>,
    pub ratios: Vec<f64>,
}

/// The envelope constant (1 + 1/sqrt(3))^d for the quasi-minimal ratios.
pub fn quasi_minimal_envelope(d: usize) -> f64 {
    (1.0 + 1.0 / 3f64.sqrt()).powi(d as i32)
}

/// Recursive construction: project off a shortest vector, recurse on the
/// projected lattice, lift the result, and shift every lift so its component
/// along v_1 lands in [-1/2, 1/2).
pub fn quasi_minimal_basis(basis: &LatticeBasis) -> Result<QuasiMinimalBasis> {
    let d = basis.dim();
    if d > minima::MAX_ENUM_DIM {
        return Err(Error::DimensionTooLarge {
            dim: d,
            max: minima::MAX_ENUM_DIM,
            op: "quasi_minimal_basis",
        });
    }
    let cols = quasi_minimal_coeffs(basis)?;
    let det = intmat::det_i128(
        &(0..d)
            .map(|i| (0..d).map(|j| cols[j][i] as i128).collect())
            .collect::<Vec<_>>(),
    );
    if !matches!(det, Some(1) | Some(-1)) {
        return Err(Error::InvariantViolation(
            "quasi-minimal construction produced a non-basis".into(),
        ));
    }
    let profile = minima::successive_minima(basis)?;
    let vectors: Vec<LatticeVector> = cols.into_iter().map(|c| basis.vector(c)).collect();
    let ratios = vectors
        .iter()
        .zip(&profile.values)
        .map(|(v, l)| v.norm / l)
        .collect();
    Ok(QuasiMinimalBasis { vectors, ratios })
}

fn quasi_minimal_coeffs(basis: &LatticeBasis) -> Result<Vec<Vec<i64>>> {
    let d = basis.dim();
    if d == 1 {
        return Ok(vec![vec![1]]);
    }
    let step = project_off_shortest(basis)?;
    let sub = quasi_minimal_coeffs(&step.projected_basis)?;
    let v1 = &step.shortest;
    let v1n2 = v1.norm * v1.norm;
    let mut cols = vec![v1.coeffs.clone()];
    for mcol in sub {
        let mut lift = vec![0i64; d];
        for (k, &mk) in mcol.iter().enumerate() {
            for (l, &u) in lift.iter_mut().zip(&step.lifts[k]) {
                *l += mk * u;
            }
        }
        let emb = basis.embed(&lift);
        let t: f64 = emb.iter().zip(&v1.embedding).map(|(a, b)| a * b).sum::<f64>() / v1n2;
        let shift = (t + 0.5).floor() as i64;
        if shift != 0 {
            for (l, &c) in lift.iter_mut().zip(&v1.coeffs) {
                *l -= shift * c;
            }
        }
        cols.push(lift);
    }
    Ok(cols)
}

/// Greedy Minkowski reduction: for each i, the shortest lattice vector (ties
/// broken lexicographically on coefficients) extending the already chosen
/// vectors to a set completable to a basis, decided by the elementary-divisor
/// test in exact integer arithmetic.
pub fn minkowski_reduce(basis: &LatticeBasis) -> Result<LatticeBasis> {
    let d = basis.dim();
    if d > 5 {
        return Err(Error::DimensionTooLarge {
            dim: d,
            max: 5,
            op: "minkowski_reduce",
        });
    }
    let profile = minima::successive_minima(basis)?;
    let mut chosen: Vec<Vec<i64>> = Vec::with_capacity(d);
    for i in 0..d {
        // Minkowski vectors can exceed lambda_i only by sqrt(5)/2 at these
        // dimensions; start a little above and double as a safety net.
        let mut radius = profile.values[i] * 1.2 + 1e-12;
        let mut found = false;
        for _ in 0..32 {
            let points = minima::lattice_points_within(basis, radius, minima::DEFAULT_NODE_BUDGET)?;
            if let Some(v) = points.iter().find(|v| {
                chosen.push(v.coeffs.clone());
                let ok = intmat::primitive_system(&chosen);
                chosen.pop();
                ok
            }) {
                chosen.push(v.coeffs.clone());
                found = true;
                break;
            }
            radius *= 2.0;
        }
        if !found {
            return Err(Error::InvariantViolation(format!(
                "no extendable vector found at level {i}"
            )));
        }
    }
    basis.change_basis(&chosen)
}

/// (prod_i lambda_i) / covol, which Minkowski's second theorem confines to
/// [2^d / (d! V_d), 2^d / V_d] with V_d the unit-ball volume.
pub fn minkowski_product_ratio(basis: &LatticeBasis) -> Result<f64> {
    let profile = minima::successive_minima(basis)?;
    Ok(profile.values.iter().product::<f64>() / basis.covolume())
}

/// The classical two-sided window for `minkowski_product_ratio`.
pub fn minkowski_window(d: usize) -> (f64, f64) {
    let vd = unit_ball_volume(d);
    let factorial: f64 = (1..=d).map(|i| i as f64).product();
    let pow = 2f64.powi(d as i32);
    (pow / (factorial * vd), pow / vd)
}

/// Euclidean norms of the basis columns.
pub fn column_norms(basis: &LatticeBasis) -> Vec<f64> {
    basis
        .columns()
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minima::half_sum_fixture;

    fn hexagonal() -> LatticeBasis {
        LatticeBasis::new(vec![vec![1.0, 0.0], vec![0.5, 3f64.sqrt() / 2.0]]).unwrap()
    }

    #[test]
    fn projection_of_z2() {
        let step = project_off_shortest(&LatticeBasis::standard(2)).unwrap();
        assert!((step.shortest.norm - 1.0).abs() < 1e-12);
        assert!((step.projected_basis.covolume() - 1.0).abs() < 1e-12);
        let norms = column_norms(&step.projected_basis);
        assert!((norms[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projection_covolume_identity() {
        let b = LatticeBasis::new(vec![vec![0.5, 0.0], vec![0.0, 2.0]]).unwrap();
        let step = project_off_shortest(&b).unwrap();
        assert!((step.shortest.norm - 0.5).abs() < 1e-12);
        assert!((step.projected_basis.covolume() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn projection_of_hexagonal_hits_the_bound() {
        // pi_1(L) = (sqrt(3)/2) Z: the equality case of the projection bound.
        let step = project_off_shortest(&hexagonal()).unwrap();
        let c = step.projected_basis.covolume();
        assert!((c - 3f64.sqrt() / 2.0).abs() < 1e-9);
        // every nonzero projected vector is a multiple of the generator
        for k in 1..5i64 {
            let v = step.projected_basis.vector(vec![k]);
            assert!(v.norm >= (3f64.sqrt() / 2.0) * step.shortest.norm - 1e-9);
        }
    }

    #[test]
    fn quasi_minimal_on_z3() {
        let q = quasi_minimal_basis(&LatticeBasis::standard(3)).unwrap();
        for r in &q.ratios {
            assert!((r - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn quasi_minimal_on_half_sum_fixture() {
        let q = quasi_minimal_basis(&half_sum_fixture(5)).unwrap();
        let cap = quasi_minimal_envelope(5);
        assert!((q.ratios[0] - 1.0).abs() < 1e-12);
        for r in &q.ratios {
            assert!(*r <= cap + 1e-9 && *r >= 1.0 / cap - 1e-9);
        }
    }

    #[test]
    fn minkowski_reduce_sheared_z2() {
        let b = LatticeBasis::new(vec![vec![5.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let red = minkowski_reduce(&b).unwrap();
        let norms = column_norms(&red);
        assert!((norms[0] - 1.0).abs() < 1e-9);
        assert!((norms[1] - 1.0).abs() < 1e-9);
        assert!(b.same_lattice(&red));
    }

    #[test]
    fn minkowski_reduce_sheared_hexagonal() {
        // a badly sheared basis of the hexagonal lattice reduces back to two
        // norm-1 vectors, and every reduced norm dominates its minimum
        let sheared = hexagonal()
            .change_basis(&[vec![1, 4], vec![0, 1]])
            .unwrap();
        let red = minkowski_reduce(&sheared).unwrap();
        let norms = column_norms(&red);
        assert!((norms[0] - 1.0).abs() < 1e-9);
        assert!((norms[1] - 1.0).abs() < 1e-9);
        let profile = crate::minima::successive_minima(&sheared).unwrap();
        for (n, l) in norms.iter().zip(&profile.values) {
            assert!(*n >= l - 1e-9);
        }
        assert!(sheared.same_lattice(&red));
    }

    #[test]
    fn minkowski_reduce_half_sum_fixture() {
        // First four norms are 1; the fifth extendable vector has coefficient
        // square sum 5/4, i.e. norm sqrt(5)/2 > 1.
        let red = minkowski_reduce(&half_sum_fixture(5)).unwrap();
        let norms = column_norms(&red);
        assert!((norms[0] - 1.0).abs() < 1e-9);
        for n in &norms[..4] {
            assert!((n - 1.0).abs() < 1e-9);
        }
        assert!(norms[4] > 1.0 + 1e-6);
        assert!((norms[4] - 5f64.sqrt() / 2.0).abs() < 1e-9);
    }

    #[test]
    fn product_ratio_windows() {
        for d in 2..=4 {
            let (lo, hi) = minkowski_window(d);
            let r = minkowski_product_ratio(&LatticeBasis::standard(d)).unwrap();
            assert!((r - 1.0).abs() < 1e-12);
            assert!(lo <= r && r <= hi);
        }
        for a in [0.25, 0.5, 0.9, 1.0] {
            let b = LatticeBasis::new(vec![vec![a, 0.0], vec![0.0, 1.0 / a]]).unwrap();
            let r = minkowski_product_ratio(&b).unwrap();
            assert!((r - 1.0).abs() < 1e-12);
        }
        // hexagonal rescaled to covolume 1: ratio = lambda_1*lambda_2 stays
        // inside the d = 2 window [2/pi, 4/pi]
        let hex = hexagonal();
        let s = 1.0 / hex.covolume().sqrt();
        let hex1 = hex.scaled(s).unwrap();
        let r = minkowski_product_ratio(&hex1).unwrap();
        let (lo, hi) = minkowski_window(2);
        assert!(lo <= r && r <= hi, "ratio {r} outside [{lo}, {hi}]");
    }
}
