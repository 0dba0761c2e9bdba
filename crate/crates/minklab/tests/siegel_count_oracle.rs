//! Independent oracle for the Siegel-translate multiplicity: enumerate all
//! candidate basis vectors in a ball, test every unimodular tuple by an
//! explicit Gram-Schmidt membership check, and compare with the
//! slot-propagation implementation. The only pruning used here follows in
//! one line from the set definition (a_1 <= t a_2 <= ... and prod a_i =
//! covol force a_1^d <= t^{d(d-1)/2} covol).

use minklab::haar::{count_siegel_translates, HaarSampler, SiegelSet};
use minklab::lattice::{LatticeBasis, LatticeVector};
use minklab::minima::{lattice_points_within, successive_minima, DEFAULT_NODE_BUDGET};
use minklab::parallel::block_rng;

const TOL: f64 = 1e-9;

fn signed_points(basis: &LatticeBasis, radius: f64) -> Vec<LatticeVector> {
    let mut pts = Vec::new();
    for v in lattice_points_within(basis, radius, DEFAULT_NODE_BUDGET).unwrap() {
        pts.push(basis.vector(v.coeffs.iter().map(|c| -c).collect()));
        pts.push(v);
    }
    pts
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Ordered bases with coefficient determinant +1 whose R-factor satisfies
/// the Siegel inequalities, counted by exhaustive search.
fn oracle_count(basis: &LatticeBasis, sset: &SiegelSet) -> usize {
    let d = basis.dim();
    let (t, u) = (sset.t, sset.u);
    let covol = basis.covolume();
    let profile = successive_minima(basis).unwrap();
    let radius = t.powi(d as i32) * d as f64 * profile.values[d - 1] * (1.0 + TOL);
    let pts = signed_points(basis, radius);
    let a1_cap = t.powf((d - 1) as f64 / 2.0) * covol.powf(1.0 / d as f64) * (1.0 + TOL);
    let mut count = 0usize;
    match d {
        2 => {
            for v1 in &pts {
                if v1.norm > a1_cap {
                    continue;
                }
                let a1 = v1.norm;
                for v2 in &pts {
                    let det = v1.coeffs[0] * v2.coeffs[1] - v1.coeffs[1] * v2.coeffs[0];
                    if det != 1 {
                        continue;
                    }
                    let proj = dot(&v1.embedding, &v2.embedding) / (a1 * a1);
                    let a2 = (v2.norm * v2.norm - proj * proj * a1 * a1)
                        .max(0.0)
                        .sqrt();
                    if a1 <= t * a2 * (1.0 + TOL) && proj.abs() <= u + TOL {
                        count += 1;
                    }
                }
            }
            // identify the simultaneous sign flip, which is in SL(2,Z)
            assert_eq!(count % 2, 0);
            count / 2
        }
        3 => {
            for v1 in &pts {
                if v1.norm > a1_cap {
                    continue;
                }
                let a1 = v1.norm;
                let q1: Vec<f64> = v1.embedding.iter().map(|x| x / a1).collect();
                for v2 in &pts {
                    let n12 = dot(&q1, &v2.embedding) / a1;
                    if n12.abs() > u + TOL {
                        continue;
                    }
                    let r2: Vec<f64> = v2
                        .embedding
                        .iter()
                        .zip(&q1)
                        .map(|(x, q)| x - dot(&q1, &v2.embedding) * q)
                        .collect();
                    let a2 = dot(&r2, &r2).sqrt();
                    if a1 > t * a2 * (1.0 + TOL) {
                        continue;
                    }
                    let q2: Vec<f64> = r2.iter().map(|x| x / a2).collect();
                    for v3 in &pts {
                        // coefficient matrix has the tuple as columns
                        let (a, b, c) = (&v1.coeffs, &v2.coeffs, &v3.coeffs);
                        let det = i128::from(a[0]) * (i128::from(b[1]) * i128::from(c[2]) - i128::from(b[2]) * i128::from(c[1]))
                            - i128::from(a[1]) * (i128::from(b[0]) * i128::from(c[2]) - i128::from(b[2]) * i128::from(c[0]))
                            + i128::from(a[2]) * (i128::from(b[0]) * i128::from(c[1]) - i128::from(b[1]) * i128::from(c[0]));
                        if det != 1 {
                            continue;
                        }
                        let n13 = dot(&q1, &v3.embedding) / a1;
                        let n23 = dot(&q2, &v3.embedding) / a2;
                        if n13.abs() > u + TOL || n23.abs() > u + TOL {
                            continue;
                        }
                        let a3 = (dot(&v3.embedding, &v3.embedding)
                            - (n13 * a1) * (n13 * a1)
                            - (n23 * a2) * (n23 * a2))
                            .max(0.0)
                            .sqrt();
                        if a2 <= t * a3 * (1.0 + TOL) {
                            count += 1;
                        }
                    }
                }
            }
            count
        }
        _ => unreachable!(),
    }
}

#[test]
fn multiplicity_matches_the_exhaustive_oracle_d2() {
    let sset = SiegelSet::standard();
    let sampler = HaarSampler::siegel(2).unwrap();
    let mut rng = block_rng(61, 0);
    // sampled Siegel points plus two handcrafted lattices
    let mut cases: Vec<LatticeBasis> = (0..12)
        .map(|_| sampler.sample_one(&mut rng).unwrap().0)
        .collect();
    cases.push(LatticeBasis::new(vec![vec![0.05, 0.0], vec![0.0, 20.0]]).unwrap());
    cases.push(LatticeBasis::standard(2));
    for (i, basis) in cases.iter().enumerate() {
        let fast = count_siegel_translates(basis, &sset).unwrap();
        let slow = oracle_count(basis, &sset);
        assert_eq!(fast, slow, "case {i}: fast {fast} vs oracle {slow}");
    }
}

#[test]
fn multiplicity_matches_the_exhaustive_oracle_d3() {
    let sset = SiegelSet::standard();
    let sampler = HaarSampler::siegel(3).unwrap();
    let mut rng = block_rng(62, 0);
    // moderate-cusp draws keep the exhaustive ball small enough for a test
    let mut cases: Vec<LatticeBasis> = Vec::new();
    while cases.len() < 6 {
        let (basis, _) = sampler.sample_one(&mut rng).unwrap();
        if successive_minima(&basis).unwrap().values[2] < 2.0 {
            cases.push(basis);
        }
    }
    cases.push(LatticeBasis::standard(3));
    cases.push(
        LatticeBasis::new(vec![
            vec![0.3, 0.0, 0.0],
            vec![0.1, 0.8, 0.0],
            vec![0.2, 0.3, 1.0 / 0.24],
        ])
        .unwrap(),
    );
    for (i, basis) in cases.iter().enumerate() {
        let fast = count_siegel_translates(basis, &sset).unwrap();
        let slow = oracle_count(basis, &sset);
        assert_eq!(fast, slow, "case {i}: fast {fast} vs oracle {slow}");
    }
}
