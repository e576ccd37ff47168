use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_ITERS: usize = 1000;
const TOL: f64 = 1e-10;

/// Points projected onto the top two principal components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection2D {
    pub points: Vec<[f64; 2]>,
    /// Variance along each component, descending.
    pub explained_variance: [f64; 2],
    /// The two unit-length principal axes in input space.
    pub components: [Vec<f64>; 2],
}

/// Projects `vs` onto their first two principal components.
///
/// The sample covariance (denominator `n - 1`) is decomposed by power
/// iteration with deflation, starting every component from the normalized
/// all-ones vector. Each returned axis is oriented so that its entry of
/// largest magnitude is positive.
pub fn pca_project<V: AsRef<[f64]>>(vs: &[V]) -> Result<Projection2D> {
    if vs.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: vs.len(),
        });
    }
    let dim = vs[0].as_ref().len();
    if dim < 2 {
        return Err(Error::InsufficientData { needed: 2, got: dim });
    }
    for v in vs {
        let v = v.as_ref();
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: v.len(),
            });
        }
        super::check_finite(v)?;
    }

    let n = vs.len();
    let mut mean = vec![0.0; dim];
    for v in vs {
        for (m, x) in mean.iter_mut().zip(v.as_ref()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered: Vec<Vec<f64>> = vs
        .iter()
        .map(|v| v.as_ref().iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();

    let scale = vs
        .iter()
        .flat_map(|v| v.as_ref().iter())
        .fold(1.0f64, |acc, x| acc.max(x.abs()));
    let spread = centered
        .iter()
        .flatten()
        .fold(0.0f64, |acc, x| acc.max(x.abs()));
    if spread <= 1e-12 * scale {
        return Err(Error::DegenerateCovariance);
    }

    let mut cov = vec![vec![0.0; dim]; dim];
    for row in &centered {
        for i in 0..dim {
            let ri = row[i];
            if ri == 0.0 {
                continue;
            }
            for j in i..dim {
                cov[i][j] += ri * row[j];
            }
        }
    }
    for i in 0..dim {
        for j in i..dim {
            cov[i][j] /= (n - 1) as f64;
            cov[j][i] = cov[i][j];
        }
    }

    let (l1, v1) = dominant_eigenpair(&cov);
    for i in 0..dim {
        for j in 0..dim {
            cov[i][j] -= l1 * v1[i] * v1[j];
        }
    }
    let (l2, mut v2) = dominant_eigenpair(&cov);
    // Deflation leaves rounding noise; keep the second axis orthogonal.
    let overlap: f64 = v1.iter().zip(&v2).map(|(a, b)| a * b).sum();
    v2.iter_mut().zip(&v1).for_each(|(b, a)| *b -= overlap * a);
    let v2_norm = super::norm(&v2);
    if v2_norm > 0.0 {
        v2.iter_mut().for_each(|x| *x /= v2_norm);
    }
    let v2 = orient(v2);
    let l1 = l1.max(0.0);
    let l2 = l2.max(0.0).min(l1);

    let points = centered
        .iter()
        .map(|row| {
            [
                row.iter().zip(&v1).map(|(a, b)| a * b).sum(),
                row.iter().zip(&v2).map(|(a, b)| a * b).sum(),
            ]
        })
        .collect();

    Ok(Projection2D {
        points,
        explained_variance: [l1, l2],
        components: [v1, v2],
    })
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

fn orient(mut v: Vec<f64>) -> Vec<f64> {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

/// Largest eigenpair of a symmetric positive semi-definite matrix.
fn dominant_eigenpair(m: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let dim = m.len();
    let ones = vec![1.0 / (dim as f64).sqrt(); dim];
    // Fall back to basis vectors when the start lies in the null space.
    let starts = std::iter::once(ones).chain((0..dim).map(|i| {
        let mut e = vec![0.0; dim];
        e[i] = 1.0;
        e
    }));
    for start in starts {
        if let Some(pair) = power_iterate(m, start) {
            return pair;
        }
    }
    let mut e = vec![0.0; dim];
    e[0] = 1.0;
    (0.0, e)
}

fn power_iterate(m: &[Vec<f64>], mut v: Vec<f64>) -> Option<(f64, Vec<f64>)> {
    let scale = m
        .iter()
        .flatten()
        .fold(0.0f64, |acc, x| acc.max(x.abs()));
    let mut lambda = 0.0;
    for _ in 0..MAX_ITERS {
        let w = mat_vec(m, &v);
        let w_norm = super::norm(&w);
        if w_norm <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
            return None;
        }
        let next: Vec<f64> = w.iter().map(|x| x / w_norm).collect();
        let rayleigh: f64 = next
            .iter()
            .zip(mat_vec(m, &next))
            .map(|(a, b)| a * b)
            .sum();
        let value_change = (rayleigh - lambda).abs() / rayleigh.abs().max(f64::MIN_POSITIVE);
        let vector_change = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        v = next;
        lambda = rayleigh;
        if value_change < TOL && vector_change < TOL {
            break;
        }
    }
    Some((lambda, orient(v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, SymmetricEigen};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_oracle(points: &[Vec<f64>]) -> (Vec<[f64; 2]>, [f64; 2]) {
        let n = points.len();
        let d = points[0].len();
        let mut mean = vec![0.0; d];
        for p in points {
            for j in 0..d {
                mean[j] += p[j] / n as f64;
            }
        }
        let x = DMatrix::from_fn(n, d, |i, j| points[i][j] - mean[j]);
        let cov = x.transpose() * &x / (n as f64 - 1.0);
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let proj = (0..n)
            .map(|i| {
                let row = x.row(i);
                [
                    row.dot(&eig.eigenvectors.column(order[0]).transpose()),
                    row.dot(&eig.eigenvectors.column(order[1]).transpose()),
                ]
            })
            .collect();
        (
            proj,
            [eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]],
        )
    }

    fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    }

    #[test]
    fn matches_dense_eigen_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let pts: Vec<Vec<f64>> = (0..5)
                .map(|_| {
                    vec![
                        rng.random_range(-3.0..3.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-0.3..0.3),
                    ]
                })
                .collect();
            let ours = pca_project(&pts).unwrap();
            let (theirs, var) = dense_oracle(&pts);
            assert!((ours.explained_variance[0] - var[0]).abs() < 1e-8);
            assert!((ours.explained_variance[1] - var[1]).abs() < 1e-8);
            for i in 0..5 {
                for j in 0..5 {
                    let a = dist(ours.points[i], ours.points[j]);
                    let b = dist(theirs[i], theirs[j]);
                    assert!((a - b).abs() < 1e-6, "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn collinear_points_have_rank_one() {
        let pts: Vec<Vec<f64>> = (0..6)
            .map(|i| {
                let t = i as f64;
                vec![1.0 + 2.0 * t, -t, 0.5 * t]
            })
            .collect();
        let p = pca_project(&pts).unwrap();
        assert!(p.explained_variance[1] <= 1e-9);
        assert!(p.explained_variance[0] > 1.0);
    }

    #[test]
    fn translation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts: Vec<Vec<f64>> = (0..7)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let shifted: Vec<Vec<f64>> = pts
            .iter()
            .map(|p| p.iter().map(|x| x + 10.0).collect())
            .collect();
        let a = pca_project(&pts).unwrap();
        let b = pca_project(&shifted).unwrap();
        for (p, q) in a.points.iter().zip(&b.points) {
            assert!((p[0] - q[0]).abs() < 1e-9);
            assert!((p[1] - q[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn explained_variance_bounded_by_total() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..10 {
            let pts: Vec<Vec<f64>> = (0..9)
                .map(|_| (0..6).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect();
            let p = pca_project(&pts).unwrap();
            let n = pts.len() as f64;
            let mut total = 0.0;
            for j in 0..6 {
                let m: f64 = pts.iter().map(|r| r[j]).sum::<f64>() / n;
                total += pts.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / (n - 1.0);
            }
            assert!(p.explained_variance[0] >= p.explained_variance[1]);
            assert!(p.explained_variance[1] >= 0.0);
            assert!(p.explained_variance[0] + p.explained_variance[1] <= total + 1e-6);
        }
    }

    #[test]
    fn sign_convention() {
        let pts = vec![
            vec![0.0, 0.0, 1.0],
            vec![-4.0, 1.0, 0.0],
            vec![4.0, -1.0, 0.5],
            vec![1.0, 2.0, -0.5],
        ];
        let p = pca_project(&pts).unwrap();
        for c in &p.components {
            let max = c.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(max > 0.0);
        }
    }

    #[test]
    fn errors() {
        let two = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        assert!(matches!(pca_project(&two), Err(Error::InsufficientData { .. })));
        let same = vec![vec![0.1, 0.7, 0.3]; 3];
        assert!(matches!(pca_project(&same), Err(Error::DegenerateCovariance)));
    }
}
