//! Dense vector arithmetic shared by every stage of the pipeline.
//!
//! Vectors are plain `f64` slices. Functions check dimensions and return
//! [`Error::DimensionMismatch`] instead of panicking.

mod pca;

pub use pca::{pca_project, Projection2D};

use crate::error::{Error, Result};

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(())
}

/// Fails with [`Error::NonFinite`] if any entry is NaN or infinite.
pub fn check_finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dims(a, b)?;
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cosine of the angle between `a` and `b`, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dims(a, b)?;
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNormVector);
    }
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((d / (na * nb)).clamp(-1.0, 1.0))
}

/// `1 - cosine_similarity(a, b)`, in `[0, 2]`.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    cosine_similarity(a, b).map(|c| 1.0 - c)
}

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dims(a, b)?;
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// Componentwise mean, summed in the order given.
///
/// Callers that need permutation invariance should use [`mean_pool_keyed`],
/// which fixes the summation order.
pub fn mean_pool<V: AsRef<[f64]>>(vs: &[V]) -> Result<Vec<f64>> {
    let first = vs.first().ok_or(Error::EmptyInput)?.as_ref();
    let mut acc = vec![0.0; first.len()];
    for v in vs {
        let v = v.as_ref();
        check_dims(&acc, v)?;
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
    }
    let n = vs.len() as f64;
    for a in &mut acc {
        *a /= n;
    }
    Ok(acc)
}

/// Mean of vectors keyed by text id, summed in ascending id order so the
/// result is bit-identical under any permutation of the input.
pub fn mean_pool_keyed<K: Ord, V: AsRef<[f64]>>(items: &[(K, V)]) -> Result<Vec<f64>> {
    let mut order: Vec<&(K, V)> = items.iter().collect();
    order.sort_by(|a, b| a.0.cmp(&b.0));
    let vs: Vec<&[f64]> = order.iter().map(|(_, v)| v.as_ref()).collect();
    mean_pool(&vs)
}

/// Scales `v` to unit L2 norm.
pub fn normalize(v: &[f64]) -> Result<Vec<f64>> {
    let n = norm(v);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::ZeroNormVector);
    }
    Ok(v.iter().map(|x| x / n).collect())
}
