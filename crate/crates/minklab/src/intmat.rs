//! Exact integer linear algebra on coefficient vectors.
//!
//! Primitivity and basis-extendability questions are decided here in exact
//! arithmetic (i128), never in floating point. All matrices are tiny
//! (k x d with k <= d <= 8), so fraction-free elimination is plenty.

/// Determinant of a square integer matrix by fraction-free (Bareiss)
/// elimination. Returns `None` on internal overflow, which callers treat as
/// "not unimodular" / "rank unknown".
pub fn det_i128(rows: &[Vec<i128>]) -> Option<i128> {
    let n = rows.len();
    if n == 0 {
        return Some(1);
    }
    let mut a: Vec<Vec<i128>> = rows.to_vec();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if a[k][k] == 0 {
            let swap = (k + 1..n).find(|&i| a[i][k] != 0)?;
            a.swap(k, swap);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let t1 = a[i][j].checked_mul(a[k][k])?;
                let t2 = a[i][k].checked_mul(a[k][j])?;
                a[i][j] = t1.checked_sub(t2)? / prev;
            }
            a[i][k] = 0;
        }
        prev = a[k][k];
    }
    Some(sign * a[n - 1][n - 1])
}

/// Rank of an integer matrix (rows of equal length) over the rationals,
/// by fraction-free elimination.
pub fn rank(rows: &[Vec<i64>]) -> usize {
    let m = rows.len();
    if m == 0 {
        return 0;
    }
    let n = rows[0].len();
    let mut a: Vec<Vec<i128>> = rows
        .iter()
        .map(|r| r.iter().map(|&x| x as i128).collect())
        .collect();
    let mut rank = 0;
    let mut col = 0;
    while rank < m && col < n {
        let piv = (rank..m).find(|&i| a[i][col] != 0);
        let Some(piv) = piv else {
            col += 1;
            continue;
        };
        a.swap(rank, piv);
        for i in rank + 1..m {
            if a[i][col] == 0 {
                continue;
            }
            let g = gcd_i128(a[rank][col], a[i][col]);
            let f_top = a[i][col] / g;
            let f_row = a[rank][col] / g;
            for j in col..n {
                a[i][j] = a[i][j] * f_row - a[rank][j] * f_top;
            }
        }
        rank += 1;
        col += 1;
    }
    rank
}

pub fn gcd_i128(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn gcd_i64(a: i64, b: i64) -> i64 {
    gcd_i128(a as i128, b as i128) as i64
}

/// gcd of all entries.
pub fn content(v: &[i64]) -> i64 {
    v.iter().fold(0i64, |g, &x| gcd_i64(g, x))
}

/// True iff the k x d system of coefficient rows extends to a basis of Z^d,
/// i.e. all elementary divisors of the matrix equal 1. Because the divisors
/// are increasing, this holds exactly when the gcd of all maximal (k x k)
/// minors is 1.
pub fn primitive_system(rows: &[Vec<i64>]) -> bool {
    let k = rows.len();
    if k == 0 {
        return true;
    }
    let d = rows[0].len();
    if k > d {
        return false;
    }
    let mut g: i128 = 0;
    let mut cols = (0..k).collect::<Vec<_>>();
    loop {
        let sub: Vec<Vec<i128>> = rows
            .iter()
            .map(|r| cols.iter().map(|&j| r[j] as i128).collect())
            .collect();
        if let Some(m) = det_i128(&sub) {
            g = gcd_i128(g, m);
            if g == 1 {
                return true;
            }
        }
        // next k-combination of columns
        let mut i = k;
        loop {
            if i == 0 {
                return false;
            }
            i -= 1;
            if cols[i] != i + d - k {
                cols[i] += 1;
                for j in i + 1..k {
                    cols[j] = cols[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Completes a primitive integer vector `c` to a d x d integer matrix with
/// determinant +-1 whose first column is `c`.
///
/// Maintains U = V^{-1} while elementary row operations V reduce a working
/// copy of c to e_1, so that U e_1 = c throughout.
pub fn unimodular_completion(c: &[i64]) -> Option<Vec<Vec<i64>>> {
    let d = c.len();
    if content(c) != 1 {
        return None;
    }
    let mut w: Vec<i128> = c.iter().map(|&x| x as i128).collect();
    // u is column-major: u[j] is the j-th column.
    let mut u: Vec<Vec<i128>> = (0..d)
        .map(|j| (0..d).map(|i| i128::from(i == j)).collect())
        .collect();
    loop {
        // pivot: the nonzero entry of smallest magnitude
        let mut piv: Option<usize> = None;
        for (i, &x) in w.iter().enumerate() {
            if x != 0 && piv.is_none_or(|p| x.abs() < w[p].abs()) {
                piv = Some(i);
            }
        }
        let p = piv?;
        let mut done = true;
        for i in 0..d {
            if i == p || w[i] == 0 {
                continue;
            }
            let q = w[i] / w[p]; // truncated quotient keeps |w_i - q w_p| < |w_p|
            // row op on w: w_i -= q * w_p  <=>  column op on u: col_p += q * col_i
            w[i] -= q * w[p];
            for r in 0..d {
                u[p][r] += q * u[i][r];
            }
            if w[i] != 0 {
                done = false;
            }
        }
        if done {
            // w = (+-1) e_p; move it to slot 0 and fix the sign
            if p != 0 {
                w.swap(0, p);
                u.swap(0, p);
            }
            if w[0] < 0 {
                for r in 0..d {
                    u[0][r] = -u[0][r];
                }
            }
            let out: Vec<Vec<i64>> = u
                .iter()
                .map(|col| col.iter().map(|&x| i64::try_from(x).ok()).collect::<Option<Vec<_>>>())
                .collect::<Option<Vec<_>>>()?;
            return Some(out);
        }
    }
}

/// Cross product of two integer 3-vectors.
pub fn cross3(a: &[i64], b: &[i64]) -> [i64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// One integer solution x of <x, g> = 1 for a primitive vector g, by the
/// extended Euclidean algorithm folded over the coordinates.
pub fn solve_dot_one(g: &[i64]) -> Option<Vec<i64>> {
    let d = g.len();
    let mut x = vec![0i128; d];
    // running gcd of prefix with Bezout coefficients for the prefix entries
    let mut acc: i128 = 0;
    for i in 0..d {
        let (gc, s, t) = ext_gcd(acc, g[i] as i128);
        for xj in x.iter_mut().take(i) {
            *xj *= s;
        }
        x[i] = t;
        acc = gc;
    }
    if acc.abs() != 1 {
        return None;
    }
    if acc == -1 {
        for xj in x.iter_mut() {
            *xj = -*xj;
        }
    }
    x.iter().map(|&v| i64::try_from(v).ok()).collect()
}

/// Extended gcd: returns (g, s, t) with s*a + t*b = g >= 0.
fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    if b == 0 {
        if a < 0 {
            return (-a, -1, 0);
        }
        return (a, if a == 0 { 0 } else { 1 }, 0);
    }
    let (g, s, t) = ext_gcd(b, a.rem_euclid(b));
    // a = b*q + r with r = a - q*b, q = floor div
    let q = (a - a.rem_euclid(b)) / b;
    (g, t, s - q * t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_small() {
        assert_eq!(det_i128(&[vec![1, 2], vec![3, 4]]), Some(-2));
        assert_eq!(
            det_i128(&[vec![2, 0, 1], vec![1, 1, 0], vec![0, 3, 1]]),
            Some(5)
        );
    }

    #[test]
    fn primitivity() {
        assert!(primitive_system(&[vec![1, 0, 0]]));
        assert!(primitive_system(&[vec![2, 3]]));
        assert!(!primitive_system(&[vec![2, 4]]));
        assert!(primitive_system(&[vec![1, 0, 0], vec![0, 1, 0]]));
        // rows spanning an index-2 sublattice of their saturation
        assert!(!primitive_system(&[vec![1, 1, 0], vec![1, -1, 0]]));
        assert!(!primitive_system(&[vec![1, 0], vec![0, 2]]));
    }

    #[test]
    fn completion_has_unit_det_and_right_column() {
        for c in [vec![2i64, 3], vec![6, 10, 15], vec![4, -7, 0, 9], vec![0, 0, 1]] {
            let u = unimodular_completion(&c).unwrap();
            assert_eq!(
                u[0], c,
                "first column must be the input vector (column-major)"
            );
            let rows: Vec<Vec<i128>> = (0..c.len())
                .map(|i| (0..c.len()).map(|j| u[j][i] as i128).collect())
                .collect();
            assert_eq!(det_i128(&rows).unwrap().abs(), 1);
        }
        assert!(unimodular_completion(&[2, 4]).is_none());
    }

    #[test]
    fn bezout_over_vectors() {
        for g in [vec![3i64, 5], vec![6, 10, 15], vec![-7, 12, 0, 5]] {
            let x = solve_dot_one(&g).unwrap();
            let dot: i128 = x
                .iter()
                .zip(&g)
                .map(|(&a, &b)| a as i128 * b as i128)
                .sum();
            assert_eq!(dot, 1);
        }
    }
}
