use crate::error::Result;

use super::{ensure_finite, Mat};

/// Largest singular value, `‖A‖₂`.
pub fn op_norm(a: &Mat) -> Result<f64> {
    ensure_finite(a, "matrix")?;
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(a.singular_values().max())
}

/// `‖A‖_{2→∞}`: the largest Euclidean row norm.
pub fn two_to_inf_norm(a: &Mat) -> Result<f64> {
    ensure_finite(a, "matrix")?;
    Ok(a.row_iter().map(|r| r.norm()).fold(0.0, f64::max))
}

/// `‖A‖_∞`: the largest row ℓ₁ norm.
pub fn inf_norm(a: &Mat) -> Result<f64> {
    ensure_finite(a, "matrix")?;
    Ok(a.row_iter().map(|r| r.lp_norm(1)).fold(0.0, f64::max))
}

pub fn frobenius_norm(a: &Mat) -> Result<f64> {
    ensure_finite(a, "matrix")?;
    Ok(a.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Mat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mat::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    /// Cyclic Jacobi eigenvalues of a symmetric matrix, independent of nalgebra.
    fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
        let n = a.len();
        for _ in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i][j] * a[i][j])
                .sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[k][p], a[k][q]);
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        (0..n).map(|i| a[i][i]).collect()
    }

    #[test]
    fn op_norm_examples() {
        assert_eq!(op_norm(&Mat::identity(2, 2)).unwrap(), 1.0);
        let d =
            Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 1.0])) - Mat::identity(2, 2);
        assert!((op_norm(&d).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn op_norm_matches_jacobi_oracle() {
        for seed in 0..20 {
            let a = random(3, 3, seed);
            let ata = a.transpose() * &a;
            let rows = (0..3)
                .map(|i| (0..3).map(|j| ata[(i, j)]).collect())
                .collect();
            let top = jacobi_eigenvalues(rows)
                .into_iter()
                .fold(f64::MIN, f64::max)
                .sqrt();
            assert!((op_norm(&a).unwrap() - top).abs() < 1e-12, "seed {seed}");
        }
    }

    #[test]
    fn two_to_inf_examples() {
        assert_eq!(two_to_inf_norm(&Mat::identity(2, 2)).unwrap(), 1.0);
        let a = Mat::from_row_slice(2, 2, &[3.0, 4.0, 0.0, 1.0]);
        assert_eq!(two_to_inf_norm(&a).unwrap(), 5.0);
    }

    #[test]
    fn two_to_inf_matches_definition_oracle() {
        // max_{|x|=1} |Ax|_inf over the unit circle: dense grid, then golden-section refinement.
        let a = random(5, 2, 11);
        let f = |t: f64| {
            let x = nalgebra::DVector::from_vec(vec![t.cos(), t.sin()]);
            (&a * x).amax()
        };
        let grid = 20_000;
        let step = std::f64::consts::TAU / grid as f64;
        let best_i = (0..grid)
            .max_by(|&i, &j| f(i as f64 * step).total_cmp(&f(j as f64 * step)))
            .unwrap();
        let (mut lo, mut hi) = ((best_i as f64 - 1.0) * step, (best_i as f64 + 1.0) * step);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let m1 = hi - g * (hi - lo);
            let m2 = lo + g * (hi - lo);
            if f(m1) < f(m2) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        let oracle = f(0.5 * (lo + hi));
        assert!((two_to_inf_norm(&a).unwrap() - oracle).abs() < 1e-6);
    }

    #[test]
    fn inf_norm_examples() {
        assert_eq!(inf_norm(&Mat::identity(3, 3)).unwrap(), 1.0);
        let a = Mat::from_row_slice(2, 2, &[1.0, -2.0, 0.0, 0.0]);
        assert_eq!(inf_norm(&a).unwrap(), 3.0);
    }

    #[test]
    fn inf_norm_matches_sign_vector_oracle() {
        let a = random(4, 4, 5);
        let mut oracle = 0.0_f64;
        for mask in 0..16u32 {
            let x =
                nalgebra::DVector::from_fn(4, |i, _| if mask >> i & 1 == 1 { 1.0 } else { -1.0 });
            oracle = oracle.max((&a * x).amax());
        }
        assert!((inf_norm(&a).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn non_finite_rejected() {
        let a = Mat::from_row_slice(1, 2, &[1.0, f64::INFINITY]);
        assert!(op_norm(&a).is_err());
        assert!(two_to_inf_norm(&a).is_err());
        assert!(inf_norm(&a).is_err());
    }
}
