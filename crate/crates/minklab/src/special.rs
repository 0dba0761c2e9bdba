//! Special values: zeta, half-integer gamma, unit-ball volumes.

/// Gamma(k/2) for integer k >= 1, from the exact half-integer recurrences.
pub fn gamma_half(k_twice: usize) -> f64 {
    assert!(k_twice >= 1);
    if k_twice % 2 == 0 {
        // Gamma(n) = (n-1)!
        let n = k_twice / 2;
        (1..n).map(|i| i as f64).product()
    } else {
        // Gamma(1/2) = sqrt(pi); Gamma(x+1) = x Gamma(x)
        let mut g = std::f64::consts::PI.sqrt();
        let mut j = 1; // numerator of the half-integer argument j/2
        while j + 2 <= k_twice {
            g *= j as f64 / 2.0;
            j += 2;
        }
        g
    }
}

/// Volume of the unit ball in R^d: pi^{d/2} / Gamma(d/2 + 1).
pub fn unit_ball_volume(d: usize) -> f64 {
    std::f64::consts::PI.powf(d as f64 / 2.0) / gamma_half(d + 2)
}

/// Riemann zeta at integer s >= 2 by an Euler-Maclaurin accelerated series.
///
/// With N = 256 and three Bernoulli correction terms the truncation error is
/// far below 1e-13 for every s >= 2.
pub fn zeta(s: u32) -> f64 {
    assert!(s >= 2);
    let sf = f64::from(s);
    let n = 256u32;
    let nf = f64::from(n);
    let mut sum = 0.0;
    for k in 1..n {
        sum += (f64::from(k)).powf(-sf);
    }
    sum += nf.powf(1.0 - sf) / (sf - 1.0);
    sum += 0.5 * nf.powf(-sf);
    sum += sf / 12.0 * nf.powf(-sf - 1.0);
    sum -= sf * (sf + 1.0) * (sf + 2.0) / 720.0 * nf.powf(-sf - 3.0);
    sum += sf * (sf + 1.0) * (sf + 2.0) * (sf + 3.0) * (sf + 4.0) / 30240.0 * nf.powf(-sf - 5.0);
    sum
}
