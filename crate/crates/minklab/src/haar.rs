//! Iwasawa coordinates, Siegel sets, volume constants, and two samplers of
//! the probability Haar measure on the space of unimodular lattices.
//!
//! The exact d = 2 sampler draws from the classical fundamental domain of
//! the modular group (all weights 1). The general sampler draws from the
//! Haar density restricted to a Siegel set and corrects the finite overlap
//! with importance weights 1/m(g), where m(g) counts the Siegel-reduced
//! bases of the lattice; estimators downstream are self-normalized, so the
//! overall normalization never enters.

use crate::error::{Error, Result};
use crate::lattice::{LatticeBasis, LatticeVector};
use crate::mat::Mat;
use crate::minima;
use crate::parallel::{self, ExecMode};
use crate::special::{gamma_half, zeta};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

const TOL: f64 = 1e-9;

/// (k, a, n) factors of a unimodular matrix: k in SO(d), a positive diagonal
/// with product 1, n unit upper triangular.
#[derive(Clone, Debug)]
pub struct IwasawaCoords {
    pub k: Mat,
    pub a: Vec<f64>,
    pub n: Mat,
}

impl IwasawaCoords {
    pub fn reconstruct(&self) -> Mat {
        let d = self.a.len();
        let mut an = Mat::zeros(d);
        for i in 0..d {
            for j in 0..d {
                an[(i, j)] = self.a[i] * self.n[(i, j)];
            }
        }
        self.k.mul(&an)
    }
}

/// QR-style factorization with positive diagonal; requires det(g) = 1
/// within 1e-8.
pub fn iwasawa_decompose(g: &Mat) -> Result<IwasawaCoords> {
    let det = g.det();
    if (det - 1.0).abs() > 1e-8 {
        return Err(Error::NotUnimodular { det });
    }
    let (q, r) = g
        .qr_positive()
        .ok_or(Error::NotUnimodular { det })?;
    let d = g.dim();
    let a: Vec<f64> = (0..d).map(|i| r[(i, i)]).collect();
    let mut n = Mat::identity(d);
    for i in 0..d {
        for j in i + 1..d {
            n[(i, j)] = r[(i, j)] / r[(i, i)];
        }
    }
    Ok(IwasawaCoords { k: q, a, n })
}

/// The A-part weight of Haar measure in Iwasawa coordinates:
/// rho(a) = prod_{i<j} a_i / a_j.
pub fn haar_density(a: &[f64]) -> f64 {
    let d = a.len();
    let mut rho = 1.0;
    for i in 0..d {
        for j in i + 1..d {
            rho *= a[i] / a[j];
        }
    }
    rho
}

/// Siegel set parameters: a_i/a_{i+1} <= t and |n_ij| <= u.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SiegelSet {
    pub t: f64,
    pub u: f64,
}

impl SiegelSet {
    /// The standard covering parameters t = 2/sqrt(3), u = 1/2.
    pub fn standard() -> SiegelSet {
        SiegelSet {
            t: 2.0 / 3f64.sqrt(),
            u: 0.5,
        }
    }

    /// Whether the set is large enough to cover a fundamental domain.
    pub fn is_covering(&self) -> bool {
        self.t >= 2.0 / 3f64.sqrt() - 1e-12 && self.u >= 0.5 - 1e-12
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct VolumeConstants {
    /// Vol(K) stipulated as prod_{i=1}^{d-1} pi^{i/2} / Gamma(i/2 + 1).
    pub vol_k: f64,
    /// Vol of the full quotient: zeta(2) * ... * zeta(d).
    pub vol_x: f64,
    /// Constant of the primitive-tuple mean-value identity:
    /// 1 / (zeta(d) * ... * zeta(d-k+1)).
    pub c_dk: f64,
}

pub fn volume_constants(d: usize, k: usize) -> Result<VolumeConstants> {
    if d < 2 || k == 0 || k >= d {
        return Err(Error::InvalidRange(format!(
            "volume constants need d >= 2 and 1 <= k < d, got d={d}, k={k}"
        )));
    }
    let pi = std::f64::consts::PI;
    let mut vol_k = 1.0;
    for i in 1..d {
        vol_k *= pi.powf(i as f64 / 2.0) / gamma_half(i + 2);
    }
    let mut vol_x = 1.0;
    for j in 2..=d {
        vol_x *= zeta(j as u32);
    }
    let mut c_dk = 1.0;
    for j in d - k + 1..=d {
        c_dk /= zeta(j as u32);
    }
    Ok(VolumeConstants { vol_k, vol_x, c_dk })
}

/// Uniform rotation: QR sign-fixing of a Gaussian matrix, reflected into
/// SO(d) when the orthogonal factor has determinant -1.
pub fn so_uniform(rng: &mut ChaCha8Rng, d: usize) -> Mat {
    loop {
        let mut g = Mat::zeros(d);
        for i in 0..d {
            for j in 0..d {
                g[(i, j)] = rng.sample(StandardNormal);
            }
        }
        let Some((mut q, _r)) = g.qr_positive() else {
            continue;
        };
        if q.det() < 0.0 {
            for i in 0..d {
                q[(i, d - 1)] = -q[(i, d - 1)];
            }
        }
        return q;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Exact2,
    Siegel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    Exact,
    Importance,
}

/// A reproducible batch of Haar-weighted lattice samples.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleEnsemble {
    pub seed: u64,
    pub dim: usize,
    pub kind: SamplerKind,
    pub weight_kind: WeightKind,
    /// Per-coordinate truncation intervals of the sampler.
    pub truncation: Vec<(f64, f64)>,
    pub samples: Vec<(LatticeBasis, f64)>,
}

#[derive(Clone, Debug)]
pub struct HaarSampler {
    pub dim: usize,
    pub kind: SamplerKind,
    pub sset: SiegelSet,
    /// Truncation of the ratio coordinates r_k = a_k / a_{k+1} (Siegel) or of
    /// the cusp height y (exact d2).
    truncation: Vec<(f64, f64)>,
}

/// Strip parameters of the exact d = 2 sampler. The strip floor sits just
/// below sqrt(3)/2 and the rejection step trims it back to the fundamental
/// domain; the ceiling keeps the 1/y^2 tail mass below 1e-6 of the total.
const EXACT2_Y0: f64 = 0.86;
const EXACT2_YMAX: f64 = 1e6;

impl HaarSampler {
    /// Exact sampler of the d = 2 Haar measure through the modular
    /// fundamental domain; all weights are 1.
    pub fn exact_d2() -> HaarSampler {
        HaarSampler {
            dim: 2,
            kind: SamplerKind::Exact2,
            sset: SiegelSet::standard(),
            truncation: vec![(EXACT2_Y0, EXACT2_YMAX)],
        }
    }

    /// Siegel-set importance sampler for d in {2, 3}.
    pub fn siegel(dim: usize) -> Result<HaarSampler> {
        if !(2..=3).contains(&dim) {
            return Err(Error::DimensionTooLarge {
                dim,
                max: 3,
                op: "sample_siegel",
            });
        }
        let sset = SiegelSet::standard();
        // Ratio coordinate r_k carries density r^{k(d-k)-1} dr on (0, t];
        // truncating each below r_min keeps the total excluded mass under
        // 1e-6 of the Siegel-set measure.
        let per_coord = 1e-6 / (dim - 1) as f64;
        let truncation = (1..dim)
            .map(|k| {
                let m = (k * (dim - k)) as f64;
                (sset.t * per_coord.powf(1.0 / m), sset.t)
            })
            .collect();
        Ok(HaarSampler {
            dim,
            kind: SamplerKind::Siegel,
            sset,
            truncation,
        })
    }

    pub fn weight_kind(&self) -> WeightKind {
        match self.kind {
            SamplerKind::Exact2 => WeightKind::Exact,
            SamplerKind::Siegel => WeightKind::Importance,
        }
    }

    pub fn truncation(&self) -> &[(f64, f64)] {
        &self.truncation
    }

    pub fn sample_one(&self, rng: &mut ChaCha8Rng) -> Result<(LatticeBasis, f64)> {
        match self.kind {
            SamplerKind::Exact2 => self.sample_exact2(rng),
            SamplerKind::Siegel => self.sample_siegel_one(rng),
        }
    }

    fn sample_exact2(&self, rng: &mut ChaCha8Rng) -> Result<(LatticeBasis, f64)> {
        let (y0, ymax) = self.truncation[0];
        let span = 1.0 / y0 - 1.0 / ymax;
        let (x, y) = loop {
            let u: f64 = rng.random();
            let y = 1.0 / (1.0 / y0 - u * span);
            let x: f64 = rng.random::<f64>() - 0.5;
            if x * x + y * y >= 1.0 {
                break (x, y);
            }
        };
        let s = 1.0 / y.sqrt();
        let theta = rng.random::<f64>() * std::f64::consts::TAU;
        let (sin, cos) = theta.sin_cos();
        let rot = |v: [f64; 2]| vec![cos * v[0] - sin * v[1], sin * v[0] + cos * v[1]];
        let cols = vec![rot([s, 0.0]), rot([x * s, y * s])];
        Ok((LatticeBasis::new(cols)?, 1.0))
    }

    fn sample_siegel_one(&self, rng: &mut ChaCha8Rng) -> Result<(LatticeBasis, f64)> {
        let d = self.dim;
        let t = self.sset.t;
        // ratio coordinates r_k = a_k / a_{k+1}, independent power laws
        let mut log_r = Vec::with_capacity(d - 1);
        for (k, &(r_min, _)) in self.truncation.iter().enumerate() {
            let m = ((k + 1) * (d - k - 1)) as f64;
            let floor = (r_min / t).powf(m);
            let u = floor + rng.random::<f64>() * (1.0 - floor);
            log_r.push(t.ln() + u.ln() / m);
        }
        // a_i from the ratios, normalized to product 1
        let mut s = vec![0.0; d];
        for i in (0..d - 1).rev() {
            s[i] = s[i + 1] + log_r[i];
        }
        let mean = s.iter().sum::<f64>() / d as f64;
        let a: Vec<f64> = s.iter().map(|si| (si - mean).exp()).collect();
        let mut an = Mat::zeros(d);
        for i in 0..d {
            an[(i, i)] = a[i];
            for j in i + 1..d {
                an[(i, j)] = a[i] * (rng.random::<f64>() - 0.5) * 2.0 * self.sset.u;
            }
        }
        let k = so_uniform(rng, d);
        let basis = LatticeBasis::from_matrix(&k.mul(&an))?;
        let m = count_siegel_translates(&basis, &self.sset)?;
        Ok((basis, 1.0 / m as f64))
    }

    /// Deterministic blockwise ensemble; identical output for any worker
    /// count and for the sequential fallback.
    pub fn ensemble_with_mode(
        &self,
        count: usize,
        seed: u64,
        mode: ExecMode,
    ) -> Result<SampleEnsemble> {
        let blocks = parallel::map_blocks(count, seed, mode, |_b, mut rng, len| {
            let mut out = Vec::with_capacity(len);
            for _ in 0..len {
                out.push(self.sample_one(&mut rng));
            }
            out
        });
        let mut samples = Vec::with_capacity(count);
        for block in blocks {
            for s in block {
                samples.push(s?);
            }
        }
        Ok(SampleEnsemble {
            seed,
            dim: self.dim,
            kind: self.kind,
            weight_kind: self.weight_kind(),
            truncation: self.truncation.clone(),
            samples,
        })
    }

    pub fn ensemble(&self, count: usize, seed: u64) -> Result<SampleEnsemble> {
        self.ensemble_with_mode(count, seed, ExecMode::Auto)
    }

    /// Streams blocks through a reducer without materializing the ensemble.
    pub fn reduce_blocks<T, F>(&self, count: usize, seed: u64, mode: ExecMode, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&mut dyn Iterator<Item = Result<(LatticeBasis, f64)>>) -> Result<T> + Sync,
    {
        let blocks = parallel::map_blocks(count, seed, mode, |_b, mut rng, len| {
            let mut iter = (0..len).map(|_| self.sample_one(&mut rng));
            f(&mut iter)
        });
        blocks.into_iter().collect()
    }
}

/// Convenience wrapper matching the d = 2 exact-sampler operation.
pub fn sample_exact_d2(count: usize, seed: u64) -> Result<SampleEnsemble> {
    HaarSampler::exact_d2().ensemble(count, seed)
}

/// Convenience wrapper for the Siegel importance sampler.
pub fn sample_siegel(
    d: usize,
    count: usize,
    seed: u64,
    sset: &SiegelSet,
) -> Result<SampleEnsemble> {
    if !sset.is_covering() {
        return Err(Error::InvalidRange(
            "Siegel parameters below the covering thresholds t=2/sqrt(3), u=1/2".into(),
        ));
    }
    let mut sampler = HaarSampler::siegel(d)?;
    sampler.sset = *sset;
    sampler.ensemble(count, seed)
}

fn count_ints(lo: f64, hi: f64) -> usize {
    let n = hi.floor() - lo.ceil() + 1.0;
    if n > 0.0 {
        n as usize
    } else {
        0
    }
}

/// Number of ordered bases of the lattice that lie in the Siegel set
/// (identified under simultaneous sign flip of all basis vectors, which acts
/// trivially on the (a, n) coordinates).
///
/// The search runs slot by slot with bounds propagated from the Siegel
/// inequalities and unimodularity: for the |covol| = V lattice the leading
/// Gram-Schmidt norm of a Siegel basis obeys a_1 <= t^{(d-1)/2} V^{1/d},
/// and once a_1..a_{j-1} are fixed the remaining product is pinned to
/// V / (a_1...a_{j-1}), which bounds a_j the same way. Each admissible
/// projected vector lifts to finitely many candidates through the |n_ij| <= u
/// windows, so the whole count touches only a bounded neighborhood.
pub fn count_siegel_translates(basis: &LatticeBasis, sset: &SiegelSet) -> Result<usize> {
    let d = basis.dim();
    if !(2..=3).contains(&d) {
        return Err(Error::DimensionTooLarge {
            dim: d,
            max: 3,
            op: "count_siegel_translates",
        });
    }
    let t = sset.t;
    let u = sset.u;
    let covol = basis.covolume();
    let t1_cap = t.powf((d - 1) as f64 / 2.0) * covol.powf(1.0 / d as f64) * (1.0 + TOL);
    let points = minima::lattice_points_within(basis, t1_cap, minima::DEFAULT_NODE_BUDGET)?;
    let mut m = 0usize;
    for v1 in &points {
        if crate::intmat::content(&v1.coeffs) != 1 {
            continue;
        }
        // At even d the simultaneous flip pairs canonical and anti-canonical
        // slot-1 choices, so the canonical representatives already count each
        // basis class once; at odd d both signs are distinct classes.
        let signs: &[i64] = if d % 2 == 0 { &[1] } else { &[1, -1] };
        for &sign in signs {
            let v1 = signed(basis, v1, sign);
            m += match d {
                2 => count_second_slot_d2(basis, &v1, covol, t, u),
                3 => count_slots_d3(basis, &v1, covol, t, u)?,
                _ => unreachable!(),
            };
        }
    }
    if m == 0 {
        return Err(Error::InvalidRange(
            "basis does not lie in the Siegel set".into(),
        ));
    }
    Ok(m)
}

fn signed(basis: &LatticeBasis, v: &LatticeVector, sign: i64) -> LatticeVector {
    if sign == 1 {
        v.clone()
    } else {
        basis.vector(v.coeffs.iter().map(|c| -c).collect())
    }
}

fn count_second_slot_d2(
    basis: &LatticeBasis,
    v1: &LatticeVector,
    covol: f64,
    t: f64,
    u: f64,
) -> usize {
    let a1 = v1.norm;
    let a2 = covol / a1;
    if a1 > t * a2 * (1.0 + TOL) {
        return 0;
    }
    let Some(comp) = crate::intmat::unimodular_completion(&v1.coeffs) else {
        return 0;
    };
    let mut w = comp[1].clone();
    let det = v1.coeffs[0] * w[1] - v1.coeffs[1] * w[0];
    if det == -1 {
        w = vec![-w[0], -w[1]];
    }
    let w_emb = basis.embed(&w);
    let n0: f64 = w_emb
        .iter()
        .zip(&v1.embedding)
        .map(|(a, b)| a * b)
        .sum::<f64>()
        / (a1 * a1);
    count_ints(n0 - u - TOL, n0 + u + TOL)
}

fn count_slots_d3(
    basis: &LatticeBasis,
    v1: &LatticeVector,
    covol: f64,
    t: f64,
    u: f64,
) -> Result<usize> {
    let a1 = v1.norm;
    let Some(comp) = crate::intmat::unimodular_completion(&v1.coeffs) else {
        return Ok(0);
    };
    // orthonormal frame of v1-perp and the projected rank-2 lattice
    let cols = vec![
        v1.embedding.clone(),
        basis.embed(&comp[1]),
        basis.embed(&comp[2]),
    ];
    let Some((q, _)) = Mat::from_cols(&cols).qr_positive() else {
        return Ok(0);
    };
    let frame = [q.col(1), q.col(2)];
    let pcols: Vec<Vec<f64>> = cols[1..]
        .iter()
        .map(|c| frame.iter().map(|f| dot(f, c)).collect())
        .collect();
    let projected = LatticeBasis::new(pcols)?;
    let a2_cap = (t * covol / a1).sqrt() * (1.0 + TOL);
    let ppoints = minima::lattice_points_within(&projected, a2_cap, minima::DEFAULT_NODE_BUDGET)?;
    let v1n2 = a1 * a1;
    let mut m = 0usize;
    for w2 in &ppoints {
        for sign in [1i64, -1] {
            let a2 = w2.norm;
            if a1 > t * a2 * (1.0 + TOL) {
                continue;
            }
            let a3 = covol / (a1 * a2);
            if a2 > t * a3 * (1.0 + TOL) {
                continue;
            }
            // lift of the projected vector into the lattice
            let mut lift = vec![0i64; 3];
            for (k, &mk) in w2.coeffs.iter().enumerate() {
                for (l, &c) in lift.iter_mut().zip(&comp[k + 1]) {
                    *l += sign * mk * c;
                }
            }
            let lift_emb = basis.embed(&lift);
            let t12 = dot(&lift_emb, &v1.embedding) / v1n2;
            // integer shifts bringing n_12 into [-u, u]
            let lo = t12 - u - TOL;
            let hi = t12 + u + TOL;
            let mut shift = lo.ceil() as i64;
            while (shift as f64) <= hi {
                let v2c: Vec<i64> = lift
                    .iter()
                    .zip(&v1.coeffs)
                    .map(|(l, c)| l - shift * c)
                    .collect();
                m += count_third_slot_d3(basis, v1, &v2c, a2, u)?;
                shift += 1;
            }
        }
    }
    Ok(m)
}

fn count_third_slot_d3(
    basis: &LatticeBasis,
    v1: &LatticeVector,
    v2c: &[i64],
    a2: f64,
    u: f64,
) -> Result<usize> {
    let g = crate::intmat::cross3(&v1.coeffs, v2c);
    if crate::intmat::content(&g) != 1 {
        return Ok(0); // pair not extendable to a basis
    }
    let Some(x0) = crate::intmat::solve_dot_one(&g) else {
        return Ok(0);
    };
    let v2 = basis.vector(v2c.to_vec());
    let a1 = v1.norm;
    let n12 = dot(&v2.embedding, &v1.embedding) / (a1 * a1);
    // second Gram-Schmidt direction
    let q1: Vec<f64> = v1.embedding.iter().map(|x| x / a1).collect();
    let r: Vec<f64> = v2
        .embedding
        .iter()
        .zip(&q1)
        .map(|(x, q)| x - dot(&v2.embedding, &q1) * q)
        .collect();
    let q2: Vec<f64> = r.iter().map(|x| x / a2).collect();
    let v3 = basis.vector(x0);
    let n13 = dot(&v3.embedding, &v1.embedding) / (a1 * a1);
    let n23 = dot(&v3.embedding, &q2) / a2;
    // v3 + alpha v1 + beta v2 shifts (n13, n23) by (alpha + beta n12, beta)
    let mut count = 0usize;
    let blo = (-u - TOL - n23).ceil() as i64;
    let bhi = (u + TOL - n23).floor() as i64;
    for beta in blo..=bhi {
        let base = n13 + beta as f64 * n12;
        count += count_ints(-u - TOL - base, u + TOL - base);
    }
    Ok(count)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Writes an ensemble as JSON lines: one header record, then one record per
/// sample.
pub fn write_ensemble_jsonl(path: &std::path::Path, e: &SampleEnsemble) -> Result<()> {
    #[derive(Serialize)]
    struct Header<'a> {
        seed: u64,
        dim: usize,
        kind: &'a SamplerKind,
        weight_kind: &'a WeightKind,
        truncation: &'a [(f64, f64)],
        count: usize,
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(
        &mut f,
        &Header {
            seed: e.seed,
            dim: e.dim,
            kind: &e.kind,
            weight_kind: &e.weight_kind,
            truncation: &e.truncation,
            count: e.samples.len(),
        },
    )?;
    f.write_all(b"\n")?;
    for (basis, weight) in &e.samples {
        #[derive(Serialize)]
        struct Line<'a> {
            basis: &'a LatticeBasis,
            weight: f64,
        }
        serde_json::to_writer(&mut f, &Line { basis, weight: *weight })?;
        f.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_ensemble_jsonl(path: &std::path::Path) -> Result<SampleEnsemble> {
    #[derive(Deserialize)]
    struct Header {
        seed: u64,
        dim: usize,
        kind: SamplerKind,
        weight_kind: WeightKind,
        truncation: Vec<(f64, f64)>,
    }
    #[derive(Deserialize)]
    struct Line {
        basis: LatticeBasis,
        weight: f64,
    }
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut lines = f.lines();
    let header: Header = serde_json::from_str(
        &lines
            .next()
            .ok_or_else(|| Error::InvalidRange("empty ensemble file".into()))??,
    )?;
    let mut samples = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let l: Line = serde_json::from_str(&line)?;
        samples.push((l.basis, l.weight));
    }
    Ok(SampleEnsemble {
        seed: header.seed,
        dim: header.dim,
        kind: header.kind,
        weight_kind: header.weight_kind,
        truncation: header.truncation,
        samples,
    })
}
