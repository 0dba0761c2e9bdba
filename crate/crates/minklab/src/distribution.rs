//! Empirical distribution of successive minima, exponent fits, the dual tail
//! route, and the deterministic Siegel-box integral.

use crate::error::{Error, Result};
use crate::haar::HaarSampler;
use crate::minima;
use crate::parallel::ExecMode;
use crate::special::gamma_half;
use serde::{Deserialize, Serialize};

/// Minimum effective hit count for a grid point to enter the exponent fit.
pub const MIN_EFFECTIVE_HITS: f64 = 30.0;

/// Minimum number of usable grid points for a fit.
pub const MIN_FIT_POINTS: usize = 4;

/// Default log-log fit window for the i = 1 experiments.
pub const DEFAULT_FIT_WINDOW: (f64, f64) = (0.05, 0.3);

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridPoint {
    /// The input delta (or z) of the grid row.
    pub x: f64,
    pub estimate: f64,
    pub stderr: f64,
    /// Effective hit count (Kish size of the hit subset).
    pub n_eff: f64,
    pub used_in_fit: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub quantity: String,
    pub grid: Vec<GridPoint>,
    pub fitted_exponent: f64,
    pub fit_stderr: f64,
    pub fit_window: (f64, f64),
    pub seed: u64,
    pub sample_count: usize,
}

/// Sufficient statistics of one weighted indicator estimate.
#[derive(Clone, Copy, Debug, Default)]
struct IndicatorAcc {
    swx: f64,
    sw2x: f64,
}

#[derive(Clone, Debug, Default)]
struct BlockAcc {
    sw: f64,
    sw2: f64,
    per_point: Vec<IndicatorAcc>,
}

impl BlockAcc {
    fn new(n: usize) -> Self {
        BlockAcc {
            sw: 0.0,
            sw2: 0.0,
            per_point: vec![IndicatorAcc::default(); n],
        }
    }

    fn push(&mut self, w: f64, hits: impl Iterator<Item = (usize, bool)>) {
        self.sw += w;
        self.sw2 += w * w;
        for (idx, hit) in hits {
            if hit {
                self.per_point[idx].swx += w;
                self.per_point[idx].sw2x += w * w;
            }
        }
    }

    fn merge(&mut self, other: &BlockAcc) {
        self.sw += other.sw;
        self.sw2 += other.sw2;
        for (a, b) in self.per_point.iter_mut().zip(&other.per_point) {
            a.swx += b.swx;
            a.sw2x += b.sw2x;
        }
    }

    /// Self-normalized estimate with a delta-method standard error.
    fn point_at(&self, acc: &IndicatorAcc, x: f64) -> GridPoint {
        let est = acc.swx / self.sw;
        // sum w_i^2 (x_i - est)^2 expanded for binary x
        let var_num = acc.sw2x * (1.0 - 2.0 * est) + est * est * self.sw2;
        let stderr = var_num.max(0.0).sqrt() / self.sw;
        let n_eff = if acc.sw2x > 0.0 {
            acc.swx * acc.swx / acc.sw2x
        } else {
            0.0
        };
        GridPoint {
            x,
            estimate: est,
            stderr,
            n_eff,
            used_in_fit: false,
        }
    }
}

/// Weighted least squares of y on x; returns (slope, slope stderr).
fn wls_slope(points: &[(f64, f64, f64)]) -> (f64, f64) {
    let sw: f64 = points.iter().map(|p| p.2).sum();
    let xbar: f64 = points.iter().map(|p| p.0 * p.2).sum::<f64>() / sw;
    let ybar: f64 = points.iter().map(|p| p.1 * p.2).sum::<f64>() / sw;
    let sxx: f64 = points
        .iter()
        .map(|p| p.2 * (p.0 - xbar) * (p.0 - xbar))
        .sum();
    let sxy: f64 = points
        .iter()
        .map(|p| p.2 * (p.0 - xbar) * (p.1 - ybar))
        .sum();
    let slope = sxy / sxx;
    (slope, (1.0 / sxx).sqrt())
}

fn validate_deltas(deltas: &[f64]) -> Result<()> {
    if deltas.len() < MIN_FIT_POINTS {
        return Err(Error::InvalidRange(format!(
            "need at least {MIN_FIT_POINTS} grid deltas"
        )));
    }
    if deltas.iter().any(|&d| !(d > 0.0 && d <= 0.5)) {
        return Err(Error::InvalidRange(
            "every delta must lie in (0, 0.5]".into(),
        ));
    }
    Ok(())
}

fn fit_report(
    quantity: String,
    deltas: &[f64],
    total: &BlockAcc,
    fit_window: (f64, f64),
    seed: u64,
    sample_count: usize,
) -> Result<ExperimentReport> {
    let mut grid: Vec<GridPoint> = deltas
        .iter()
        .enumerate()
        .map(|(j, &d)| total.point_at(&total.per_point[j], d))
        .collect();
    let mut fit_points = Vec::new();
    for p in grid.iter_mut() {
        let in_window = p.x >= fit_window.0 - 1e-12 && p.x <= fit_window.1 + 1e-12;
        if in_window && p.n_eff >= MIN_EFFECTIVE_HITS && p.estimate > 0.0 {
            p.used_in_fit = true;
            let se_log = p.stderr / p.estimate;
            fit_points.push((p.x.ln(), p.estimate.ln(), 1.0 / (se_log * se_log)));
        }
    }
    if fit_points.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientMass {
            usable: fit_points.len(),
            need: MIN_FIT_POINTS,
        });
    }
    let (slope, fit_stderr) = wls_slope(&fit_points);
    Ok(ExperimentReport {
        quantity,
        grid,
        fitted_exponent: slope,
        fit_stderr,
        fit_window,
        seed,
        sample_count,
    })
}

/// Weighted empirical CDF of lambda_i over a Haar ensemble with a log-log
/// exponent fit. Grid points with fewer than 30 effective hits are reported
/// but excluded from the fit.
pub fn estimate_phi(
    sampler: &HaarSampler,
    i: usize,
    deltas: &[f64],
    count: usize,
    seed: u64,
    fit_window: (f64, f64),
    mode: ExecMode,
) -> Result<ExperimentReport> {
    let d = sampler.dim;
    if i == 0 || i >= d {
        return Err(Error::InvalidRange(format!(
            "phi index must satisfy 1 <= i <= d-1, got i={i}, d={d}"
        )));
    }
    validate_deltas(deltas)?;
    let blocks = sampler.reduce_blocks(count, seed, mode, |iter| {
        let mut acc = BlockAcc::new(deltas.len());
        for s in iter {
            let (basis, w) = s?;
            let lam = minima::partial_minima(&basis, i)?.values[i - 1];
            acc.push(w, deltas.iter().enumerate().map(|(j, &d)| (j, lam <= d)));
        }
        Ok(acc)
    })?;
    let mut total = BlockAcc::new(deltas.len());
    for b in &blocks {
        total.merge(b);
    }
    fit_report(
        format!("phi_{i} (d={d})"),
        deltas,
        &total,
        fit_window,
        seed,
        count,
    )
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TailReport {
    /// Tail of lambda_i estimated directly: P(lambda_i >= 1/delta).
    pub primal: ExperimentReport,
    /// The same tail read through the dual ensemble: P(lambda_{d+1-i}(L*) <= delta).
    pub dual_grid: Vec<GridPoint>,
    /// Range of lambda_i(L) * lambda_{d+1-i}(L*) observed over all samples.
    pub sandwich_range: (f64, f64),
}

/// Weighted empirical tail P(lambda_i >= 1/delta) with the dual-route
/// cross-check. The duality sandwich
/// `1 <= lambda_i(L) lambda_{d+1-i}(L*) <= d!` is asserted on every sample,
/// as is the per-sample implication `lambda_i >= 1/delta  =>
/// lambda_{d+1-i}(L*) <= d! delta`.
pub fn estimate_tail(
    sampler: &HaarSampler,
    i: usize,
    deltas: &[f64],
    count: usize,
    seed: u64,
    fit_window: (f64, f64),
    mode: ExecMode,
) -> Result<TailReport> {
    let d = sampler.dim;
    if i < 2 || i > d {
        return Err(Error::InvalidRange(format!(
            "tail index must satisfy 2 <= i <= d, got i={i}, d={d}"
        )));
    }
    validate_deltas(deltas)?;
    let factorial: f64 = (1..=d).map(|k| k as f64).product();
    let blocks = sampler.reduce_blocks(count, seed, mode, |iter| {
        let mut primal = BlockAcc::new(deltas.len());
        let mut dual = BlockAcc::new(deltas.len());
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in iter {
            let (basis, w) = s?;
            let lam = minima::partial_minima(&basis, i)?.values[i - 1];
            let dual_basis = basis.dual()?;
            let lam_dual = minima::partial_minima(&dual_basis, d + 1 - i)?.values[d - i];
            let prod = lam * lam_dual;
            if prod < 1.0 - 1e-9 || prod > factorial + 1e-9 {
                return Err(Error::InvariantViolation(format!(
                    "duality sandwich failed: lambda_{i} * lambda*_{} = {prod}",
                    d + 1 - i
                )));
            }
            lo = lo.min(prod);
            hi = hi.max(prod);
            let mut prim_hits = Vec::with_capacity(deltas.len());
            let mut dual_hits = Vec::with_capacity(deltas.len());
            for (j, &delta) in deltas.iter().enumerate() {
                let hit_primal = lam >= 1.0 / delta;
                if hit_primal && !(lam_dual <= factorial * delta) {
                    return Err(Error::InvariantViolation(
                        "tail implication lambda_i >= 1/delta => lambda* <= d! delta failed"
                            .into(),
                    ));
                }
                prim_hits.push((j, hit_primal));
                dual_hits.push((j, lam_dual <= delta));
            }
            primal.push(w, prim_hits.into_iter());
            dual.push(w, dual_hits.into_iter());
        }
        Ok((primal, dual, lo, hi))
    })?;
    let mut primal_total = BlockAcc::new(deltas.len());
    let mut dual_total = BlockAcc::new(deltas.len());
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (p, q, l, h) in &blocks {
        primal_total.merge(p);
        dual_total.merge(q);
        lo = lo.min(*l);
        hi = hi.max(*h);
    }
    let primal = fit_report(
        format!("tail lambda_{i} (d={d})"),
        deltas,
        &primal_total,
        fit_window,
        seed,
        count,
    )?;
    let dual_grid = deltas
        .iter()
        .enumerate()
        .map(|(j, &x)| dual_total.point_at(&dual_total.per_point[j], x))
        .collect();
    Ok(TailReport {
        primal,
        dual_grid,
        sandwich_range: (lo, hi),
    })
}

/// Adaptive Simpson quadrature with relative tolerance.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), fm)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        fm: f64,
        eps: f64,
        depth: usize,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (left, flm) = simpson(f, a, fa, m, fm);
        let (right, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * eps {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, left, flm, eps / 2.0, depth - 1)
            + recurse(f, m, fm, b, fb, right, frm, eps / 2.0, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, fm) = simpson(f, a, fa, b, fb);
    let eps = rel_tol * whole.abs().max(1e-300);
    recurse(f, a, fa, b, fb, whole, fm, eps, 40)
}

/// Unnormalized Haar mass of the shrinking Siegel box that pins the first
/// i = d - 1 basis directions below delta: the iterated integral of
/// rho(a) / (a_1...a_{d-1}) over the box, times the K-volume and the volume
/// of the n-window [1/2, 1]^{d(d-1)/2}.
///
/// The a-part integrand in the free coordinates is prod_j a_j^{2(d-j)-1},
/// which is homogeneous of total degree d(d-1) including the differentials,
/// so mass(delta)/mass(delta/2) = 2^{d(d-1)} exactly.
pub fn siegel_set_box_measure(d: usize, i: usize, delta: f64) -> Result<f64> {
    if !(2..=3).contains(&d) || i + 1 != d {
        return Err(Error::InvalidRange(format!(
            "box measure implemented for d in {{2,3}} with i = d-1, got d={d}, i={i}"
        )));
    }
    if !(delta > 0.0 && delta <= 0.3) {
        return Err(Error::InvalidRange(
            "delta must lie in (0, 0.3] for the box measure".into(),
        ));
    }
    let cap = delta / (i as f64).sqrt();
    let lower_ratio = 3f64.sqrt() / 2.0;
    let a_mass = match d {
        2 => adaptive_simpson(&|a1| a1, 0.0, cap, 1e-9),
        3 => adaptive_simpson(
            &|a1| {
                let inner = adaptive_simpson(&|a2| a2, lower_ratio * a1, cap, 1e-9);
                a1.powi(3) * inner
            },
            0.0,
            cap,
            1e-9,
        ),
        _ => unreachable!(),
    };
    let pi = std::f64::consts::PI;
    let mut vol_k = 1.0;
    for j in 1..d {
        vol_k *= pi.powf(j as f64 / 2.0) / gamma_half(j + 2);
    }
    let n_box = 0.5f64.powi((d * (d - 1) / 2) as i32);
    Ok(vol_k * n_box * a_mass)
}

/// Two-sample Kolmogorov-Smirnov distance (unweighted samples).
pub fn ks_distance(xs: &mut [f64], ys: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < n && j < m {
        let x = xs[i].min(ys[j]);
        while i < n && xs[i] <= x {
            i += 1;
        }
        while j < m && ys[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_measure_scaling_is_exact() {
        for (d, i) in [(2usize, 1usize), (3, 2)] {
            let m1 = siegel_set_box_measure(d, i, 0.05).unwrap();
            let m2 = siegel_set_box_measure(d, i, 0.025).unwrap();
            let target = 2f64.powi((d * (d - 1)) as i32);
            assert!(
                (m1 / m2 - target).abs() / target < 1e-6,
                "d={d}: ratio {} vs {target}",
                m1 / m2
            );
        }
        // monotone in delta
        let lo = siegel_set_box_measure(2, 1, 0.1).unwrap();
        let hi = siegel_set_box_measure(2, 1, 0.2).unwrap();
        assert!(hi > lo);
        assert!(siegel_set_box_measure(3, 1, 0.1).is_err());
    }

    #[test]
    fn box_measure_d2_closed_form() {
        // d=2, i=1: integrand a, so the a-mass is delta^2/2; times
        // Vol(K) = 2 and the n-box 1/2.
        let delta = 0.2;
        let m = siegel_set_box_measure(2, 1, delta).unwrap();
        assert!((m - delta * delta / 2.0).abs() < 1e-10);
    }

    #[test]
    fn ks_of_identical_samples_is_zero() {
        let mut a = vec![0.3, 0.1, 0.2];
        let mut b = vec![0.1, 0.2, 0.3];
        assert!(ks_distance(&mut a, &mut b) < 1e-12);
    }

    #[test]
    fn wls_recovers_line() {
        let pts: Vec<(f64, f64, f64)> = (1..10)
            .map(|k| {
                let x = k as f64 * 0.3;
                (x, 2.5 * x + 1.0, 1.0)
            })
            .collect();
        let (slope, _) = wls_slope(&pts);
        assert!((slope - 2.5).abs() < 1e-12);
    }
}
