//! Successive minima by complete radius-bounded enumeration, a brute-force
//! oracle, and the search for minima-attaining bases.

use crate::error::{Error, Result};
use crate::intmat;
use crate::lattice::{LatticeBasis, LatticeVector};
use crate::mat::Mat;
use serde::{Deserialize, Serialize};

/// Hard ceiling for enumeration-based operations.
pub const MAX_ENUM_DIM: usize = 8;

/// Norm slack under which two lattice vectors are treated as tied.
pub const NORM_TIE_TOL: f64 = 1e-9;

/// Default node budget for internal enumerations; generous because the
/// sampler-facing paths stay far below it.
pub const DEFAULT_NODE_BUDGET: usize = 50_000_000;

/// The vector (lambda_1..lambda_d) together with attaining linearly
/// independent lattice vectors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MinimaProfile {
    pub values: Vec<f64>,
    pub attaining: Vec<LatticeVector>,
}

#[derive(Clone, Debug)]
pub struct EnumEntry {
    pub coeffs: Vec<i64>,
    pub norm2: f64,
}

/// Enumerates every nonzero coefficient vector with quadratic-form value
/// <= r2, one representative per +-pair (the one whose last nonzero
/// coordinate is positive), via Cholesky descent on the Gram matrix.
pub fn enumerate_coeffs(gram: &Mat, r2: f64, budget: usize) -> Result<Vec<EnumEntry>> {
    let d = gram.dim();
    let r = crate::lattice::cholesky_upper_of(gram).ok_or(Error::DegenerateBasis {
        det: 0.0,
        tol: 0.0,
    })?;
    let mut out = Vec::new();
    let mut coeffs = vec![0i64; d];
    let mut nodes = 0usize;
    descend(
        &r,
        d,
        r2,
        0.0,
        &mut coeffs,
        true,
        &mut out,
        &mut nodes,
        budget,
    )?;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn descend(
    r: &Mat,
    level: usize, // coordinates level..d are fixed
    r2: f64,
    partial: f64,
    coeffs: &mut Vec<i64>,
    all_upper_zero: bool,
    out: &mut Vec<EnumEntry>,
    nodes: &mut usize,
    budget: usize,
) -> Result<()> {
    if level == 0 {
        if !all_upper_zero {
            out.push(EnumEntry {
                coeffs: coeffs.clone(),
                norm2: partial,
            });
        }
        return Ok(());
    }
    let i = level - 1;
    let d = r.dim();
    let mut proj = 0.0;
    for j in level..d {
        proj += r[(i, j)] * coeffs[j] as f64;
    }
    let rem = r2 - partial;
    if rem < 0.0 {
        return Ok(());
    }
    let rii = r[(i, i)];
    let center = -proj / rii;
    let halfwidth = rem.sqrt() / rii;
    let mut lo = (center - halfwidth).ceil() as i64;
    let hi = (center + halfwidth).floor() as i64;
    if all_upper_zero {
        // canonical representative: last nonzero coordinate positive
        lo = lo.max(0);
    }
    for x in lo..=hi {
        *nodes += 1;
        if *nodes > budget {
            return Err(Error::EnumerationBudgetExceeded { budget });
        }
        let term = rii * (x as f64 - center);
        let contrib = term * term;
        if contrib > rem + 1e-9 * (1.0 + rem) {
            continue;
        }
        coeffs[i] = x;
        descend(
            r,
            i,
            r2,
            partial + contrib,
            coeffs,
            all_upper_zero && x == 0,
            out,
            nodes,
            budget,
        )?;
    }
    coeffs[i] = 0;
    Ok(())
}

/// All lattice points of norm <= radius, one per +-pair, sorted by
/// (norm, coefficient vector).
pub fn lattice_points_within(
    basis: &LatticeBasis,
    radius: f64,
    budget: usize,
) -> Result<Vec<LatticeVector>> {
    let gram = basis.gram().entries().clone();
    let entries = enumerate_coeffs(&gram, radius * radius * (1.0 + 1e-12), budget)?;
    let mut vecs: Vec<LatticeVector> = entries
        .into_iter()
        .map(|e| basis.vector(e.coeffs))
        .filter(|v| v.norm <= radius * (1.0 + 1e-12))
        .collect();
    vecs.sort_by(|a, b| {
        a.norm
            .partial_cmp(&b.norm)
            .unwrap()
            .then_with(|| a.coeffs.cmp(&b.coeffs))
    });
    Ok(vecs)
}

/// Column norms after size reduction (Gram-Schmidt coefficients brought into
/// [-1/2, 1/2]), used to seed enumeration radii. Runs entirely on the
/// Cholesky factor: a column operation on the basis is the same column
/// operation on R.
fn size_reduced_column_norms(basis: &LatticeBasis) -> Vec<f64> {
    let d = basis.dim();
    let gram = basis.gram().entries().clone();
    let Some(mut r) = crate::lattice::cholesky_upper_of(&gram) else {
        // fall back to raw column norms; enumeration will surface the error
        return basis
            .columns()
            .iter()
            .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect();
    };
    for j in 1..d {
        for i in (0..j).rev() {
            let c = (r[(i, j)] / r[(i, i)]).round();
            if c != 0.0 && c.is_finite() {
                for k in 0..=i {
                    let v = r[(k, i)];
                    r[(k, j)] -= c * v;
                }
            }
        }
    }
    (0..d)
        .map(|j| (0..=j).map(|k| r[(k, j)] * r[(k, j)]).sum::<f64>().sqrt())
        .collect()
}

/// Exact first `upto` successive minima with attaining vectors.
///
/// Enumerates all lattice vectors inside a certified radius (doubling until
/// `upto` independent vectors appear) and then greedily selects the shortest
/// vector linearly independent from those already chosen; independence is
/// decided in exact integer arithmetic on the coefficients.
pub fn partial_minima(basis: &LatticeBasis, upto: usize) -> Result<MinimaProfile> {
    let d = basis.dim();
    if d > MAX_ENUM_DIM {
        return Err(Error::DimensionTooLarge {
            dim: d,
            max: MAX_ENUM_DIM,
            op: "successive_minima",
        });
    }
    let upto = upto.min(d);
    assert!(upto >= 1);
    let mut norms = size_reduced_column_norms(basis);
    norms.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut radius = norms[upto - 1] * (1.0 + 1e-12);
    let gram = basis.gram().entries().clone();
    for _attempt in 0..64 {
        let entries = enumerate_coeffs(&gram, radius * radius, DEFAULT_NODE_BUDGET)?;
        if let Some(profile) = greedy_select(basis, entries, upto) {
            return Ok(profile);
        }
        radius *= 2.0;
    }
    Err(Error::InvariantViolation(
        "radius doubling failed to certify the requested minima".into(),
    ))
}

pub fn successive_minima(basis: &LatticeBasis) -> Result<MinimaProfile> {
    partial_minima(basis, basis.dim())
}

fn greedy_select(
    basis: &LatticeBasis,
    mut entries: Vec<EnumEntry>,
    upto: usize,
) -> Option<MinimaProfile> {
    entries.sort_by(|a, b| {
        a.norm2
            .partial_cmp(&b.norm2)
            .unwrap()
            .then_with(|| a.coeffs.cmp(&b.coeffs))
    });
    let mut chosen_coeffs: Vec<Vec<i64>> = Vec::with_capacity(upto);
    let mut attaining = Vec::with_capacity(upto);
    for e in entries {
        chosen_coeffs.push(e.coeffs.clone());
        if intmat::rank(&chosen_coeffs) == chosen_coeffs.len() {
            attaining.push(basis.vector(e.coeffs));
        } else {
            chosen_coeffs.pop();
        }
        if attaining.len() == upto {
            let values = attaining.iter().map(|v: &LatticeVector| v.norm).collect();
            return Some(MinimaProfile { values, attaining });
        }
    }
    None
}

/// Brute-force oracle: exhaustive scan of all integer coefficient vectors in
/// [-bound, bound]^d. Identical contract to `successive_minima` whenever the
/// true attaining vectors have coefficients inside the box.
pub fn brute_force_minima(basis: &LatticeBasis, coeff_bound: i64) -> Result<MinimaProfile> {
    let d = basis.dim();
    if d > 5 {
        return Err(Error::DimensionTooLarge {
            dim: d,
            max: 5,
            op: "brute_force_minima",
        });
    }
    if !(1..=6).contains(&coeff_bound) {
        return Err(Error::InvalidRange(format!(
            "brute-force coefficient bound must lie in 1..=6, got {coeff_bound}"
        )));
    }
    let mut entries = Vec::new();
    let mut coeffs = vec![0i64; d];
    scan_box(basis, coeff_bound, 0, &mut coeffs, &mut entries);
    greedy_select(basis, entries, d).ok_or_else(|| {
        Error::InvariantViolation("coefficient box does not span d independent vectors".into())
    })
}

fn scan_box(
    basis: &LatticeBasis,
    bound: i64,
    level: usize,
    coeffs: &mut Vec<i64>,
    out: &mut Vec<EnumEntry>,
) {
    if level == coeffs.len() {
        // keep one representative per +-pair: first nonzero coordinate positive
        let first = coeffs.iter().find(|&&c| c != 0);
        match first {
            None => {}
            Some(&c) if c < 0 => {}
            _ => {
                let v = basis.embed(coeffs);
                let norm2 = v.iter().map(|x| x * x).sum();
                out.push(EnumEntry {
                    coeffs: coeffs.clone(),
                    norm2,
                });
            }
        }
        return;
    }
    for x in -bound..=bound {
        coeffs[level] = x;
        scan_box(basis, bound, level + 1, coeffs, out);
    }
    coeffs[level] = 0;
}

/// Cap on equal-norm candidates per slot in the attaining-basis search.
pub const ATTAINING_CANDIDATE_CAP: usize = 512;

/// Searches for a basis (v_1..v_d) with ||v_j|| = lambda_j for every j.
///
/// Returns the first tuple (in (norm, lex) candidate order) whose coefficient
/// matrix has determinant +-1, or `None` when no such basis exists — which
/// happens for d >= 5, e.g. on the span of e_1..e_4 and (e_1+..+e_5)/2.
pub fn minima_attaining_basis_search(basis: &LatticeBasis) -> Result<Option<Vec<LatticeVector>>> {
    let d = basis.dim();
    if d > 5 {
        return Err(Error::DimensionTooLarge {
            dim: d,
            max: 5,
            op: "minima_attaining_basis_search",
        });
    }
    let profile = successive_minima(basis)?;
    let lambda_d = profile.values[d - 1];
    let points = lattice_points_within(
        basis,
        lambda_d + NORM_TIE_TOL,
        DEFAULT_NODE_BUDGET,
    )?;
    // slot j candidates: vectors tying lambda_j within tolerance
    let slots: Vec<Vec<&LatticeVector>> = (0..d)
        .map(|j| {
            points
                .iter()
                .filter(|v| (v.norm - profile.values[j]).abs() <= NORM_TIE_TOL)
                .take(ATTAINING_CANDIDATE_CAP)
                .collect()
        })
        .collect();
    let mut chosen: Vec<&LatticeVector> = Vec::with_capacity(d);
    if search_slots(&slots, 0, &mut chosen) {
        return Ok(Some(chosen.into_iter().cloned().collect()));
    }
    Ok(None)
}

fn search_slots<'a>(
    slots: &[Vec<&'a LatticeVector>],
    level: usize,
    chosen: &mut Vec<&'a LatticeVector>,
) -> bool {
    if level == slots.len() {
        let rows: Vec<Vec<i128>> = chosen
            .iter()
            .map(|v| v.coeffs.iter().map(|&c| c as i128).collect())
            .collect();
        return matches!(intmat::det_i128(&rows), Some(1) | Some(-1));
    }
    for cand in &slots[level] {
        chosen.push(cand);
        let rows: Vec<Vec<i64>> = chosen.iter().map(|v| v.coeffs.clone()).collect();
        if intmat::rank(&rows) == chosen.len() && search_slots(slots, level + 1, chosen) {
            return true;
        }
        chosen.pop();
    }
    false
}

/// The d = 5 lattice spanned by e_1..e_4 and (e_1+...+e_5)/2: all successive
/// minima equal 1, yet no basis attains them.
pub fn half_sum_fixture(d: usize) -> LatticeBasis {
    assert!(d >= 5);
    let mut cols = Vec::with_capacity(d);
    for i in 0..d - 1 {
        let mut c = vec![0.0; d];
        c[i] = 1.0;
        cols.push(c);
    }
    cols.push(vec![0.5; d]);
    LatticeBasis::new(cols).expect("fixture basis")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minima_of_standard_cube() {
        let prof = successive_minima(&LatticeBasis::standard(3)).unwrap();
        for v in &prof.values {
            assert!((v - 1.0).abs() < 1e-12);
        }
        for a in &prof.attaining {
            assert_eq!(a.coeffs.iter().map(|c| c.abs()).sum::<i64>(), 1);
        }
    }

    #[test]
    fn minima_of_half_sum_fixture() {
        // All five minima equal 1: the unit ball holds exactly +-e_1..+-e_5.
        let prof = successive_minima(&half_sum_fixture(5)).unwrap();
        for v in &prof.values {
            assert!((v - 1.0).abs() < 1e-9);
        }
        let brute = brute_force_minima(&half_sum_fixture(5), 3).unwrap();
        for (a, b) in prof.values.iter().zip(&brute.values) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn minima_of_diagonal() {
        let b = LatticeBasis::new(vec![vec![0.5, 0.0], vec![0.0, 2.0]]).unwrap();
        let prof = successive_minima(&b).unwrap();
        assert!((prof.values[0] - 0.5).abs() < 1e-12);
        assert!((prof.values[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn brute_force_on_z2() {
        let prof = brute_force_minima(&LatticeBasis::standard(2), 2).unwrap();
        assert!((prof.values[0] - 1.0).abs() < 1e-12);
        assert!((prof.values[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn brute_force_on_hexagonal() {
        // All 48 nonzero coefficient pairs in [-3,3]^2 were scanned by the
        // oracle itself; the shortest nonzero norm of the hexagonal basis is 1.
        let hex = LatticeBasis::new(vec![vec![1.0, 0.0], vec![0.5, 3f64.sqrt() / 2.0]]).unwrap();
        let prof = brute_force_minima(&hex, 3).unwrap();
        assert!((prof.values[0] - 1.0).abs() < 1e-12);
        assert!((prof.values[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn brute_force_rejects_out_of_range() {
        let b = LatticeBasis::standard(2);
        assert!(matches!(
            brute_force_minima(&b, 7),
            Err(Error::InvalidRange(_))
        ));
        assert!(matches!(
            brute_force_minima(&half_sum_fixture(6), 3),
            Err(Error::DimensionTooLarge { .. })
        ));
    }

    #[test]
    fn attaining_basis_on_z4_but_not_on_half_sum() {
        let found = minima_attaining_basis_search(&LatticeBasis::standard(4))
            .unwrap()
            .expect("Z^4 attains");
        assert_eq!(found.len(), 4);
        for v in &found {
            assert!((v.norm - 1.0).abs() < 1e-12);
        }
        assert!(minima_attaining_basis_search(&half_sum_fixture(5))
            .unwrap()
            .is_none());
    }

    #[test]
    fn dimension_guard() {
        let b = LatticeBasis::standard(9);
        assert!(matches!(
            successive_minima(&b),
            Err(Error::DimensionTooLarge { .. })
        ));
    }
}
