//! Synthetic sparse tensors.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use sdqlite::interp::Value;

/// Sampled values lie in this range, away from zero so zero-elision keeps every entry.
pub const VALUE_RANGE: (f64, f64) = (0.1, 1.0);

#[derive(Debug, Clone, PartialEq)]
pub struct SparseInstance {
    pub dims: Vec<usize>,
    pub density: f64,
    pub seed: u64,
    pub value: Value,
    pub nnz: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DataError {
    #[error("density must lie in (0, 1], got {0}")]
    Density(f64),
    #[error("dimensions must be positive, got {0:?}")]
    Dims(Vec<usize>),
    #[error("cannot place {nnz} entries in a tensor of {volume} coordinates")]
    TooMany { nnz: usize, volume: u128 },
}

fn volume(dims: &[usize]) -> u128 {
    dims.iter().map(|&d| d as u128).product()
}

fn check_dims(dims: &[usize]) -> Result<(), DataError> {
    if dims.contains(&0) {
        return Err(DataError::Dims(dims.to_vec()));
    }
    Ok(())
}

/// Row-major coordinate of linear position `p`.
fn unravel(mut p: u128, dims: &[usize]) -> Vec<i64> {
    let mut c = vec![0; dims.len()];
    for (slot, &d) in c.iter_mut().zip(dims).rev() {
        *slot = (p % d as u128) as i64;
        p /= d as u128;
    }
    c
}

fn build(coords: impl IntoIterator<Item = Vec<i64>>, rng: &mut ChaCha8Rng) -> (Value, usize) {
    let mut v = Value::empty();
    let mut nnz = 0;
    for c in coords {
        let x = rng.gen_range(VALUE_RANGE.0..=VALUE_RANGE.1);
        let leaf = c.iter().rev().fold(Value::Real(x), |acc, &k| Value::singleton(k, acc));
        v.add_assign(leaf).expect("tensor leaves are reals");
        nnz += 1;
    }
    (v, nnz)
}

/// Each coordinate is stored independently with probability `density`.
/// Deterministic per seed; gaps between stored coordinates are drawn
/// geometrically, so the cost is proportional to the number of entries.
pub fn gen_sparse(dims: &[usize], density: f64, seed: u64) -> Result<SparseInstance, DataError> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(DataError::Density(density));
    }
    check_dims(dims)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = volume(dims);
    let mut positions = Vec::new();
    if density >= 1.0 {
        positions.extend(0..total);
    } else {
        let gap = Geometric::new(density).expect("density in (0, 1)");
        let mut p = gap.sample(&mut rng) as u128;
        while p < total {
            positions.push(p);
            p += 1 + gap.sample(&mut rng) as u128;
        }
    }
    let (value, nnz) = build(positions.into_iter().map(|p| unravel(p, dims)).collect::<Vec<_>>(), &mut rng);
    Ok(SparseInstance {
        dims: dims.to_vec(),
        density,
        seed,
        value,
        nnz,
    })
}

/// Exactly `nnz` distinct coordinates chosen uniformly.
pub fn gen_with_nnz(dims: &[usize], nnz: usize, seed: u64) -> Result<SparseInstance, DataError> {
    check_dims(dims)?;
    let total = volume(dims);
    if nnz as u128 > total || nnz == 0 {
        return Err(DataError::TooMany { nnz, volume: total });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = BTreeSet::new();
    if nnz as u128 * 2 > total {
        // Dense enough that rejection sampling would stall: shuffle all positions.
        let mut all: Vec<u128> = (0..total).collect();
        for i in 0..nnz {
            let j = rng.gen_range(i..all.len());
            all.swap(i, j);
        }
        chosen.extend(all.into_iter().take(nnz));
    } else {
        while chosen.len() < nnz {
            chosen.insert(rng.gen_range(0..total));
        }
    }
    let (value, nnz) = build(chosen.into_iter().map(|p| unravel(p, dims)).collect::<Vec<_>>(), &mut rng);
    Ok(SparseInstance {
        dims: dims.to_vec(),
        density: nnz as f64 / total as f64,
        seed,
        value,
        nnz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_density_stores_everything() {
        let s = gen_sparse(&[4], 1.0, 0).unwrap();
        assert_eq!(s.nnz, 4);
        assert_eq!(s.value.nnz(), 4);
        let m = gen_sparse(&[3, 5], 1.0, 1).unwrap();
        assert_eq!(m.value.nnz(), 15);
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(gen_sparse(&[50, 50], 0.1, 9).unwrap(), gen_sparse(&[50, 50], 0.1, 9).unwrap());
        assert_ne!(gen_sparse(&[50, 50], 0.1, 9).unwrap().value, gen_sparse(&[50, 50], 0.1, 10).unwrap().value);
    }

    #[test]
    fn nnz_within_three_sigma() {
        let (n, p): (f64, f64) = (1000.0, 1.0 / 16.0);
        let sigma = (n * p * (1.0 - p)).sqrt();
        for seed in 0..20 {
            let s = gen_sparse(&[1000], p, seed).unwrap();
            assert!((s.nnz as f64 - n * p).abs() <= 3.0 * sigma, "seed {}: {}", seed, s.nnz);
            assert_eq!(s.value.nnz(), s.nnz);
        }
    }

    #[test]
    fn values_in_range() {
        let s = gen_sparse(&[20, 20], 0.5, 3).unwrap();
        for row in s.value.entries() {
            for (_, x) in row.1.entries() {
                let x = x.as_real().unwrap();
                assert!((VALUE_RANGE.0..=VALUE_RANGE.1).contains(&x));
            }
        }
    }

    #[test]
    fn exact_counts() {
        let s = gen_with_nnz(&[1 << 16, 1 << 16], 300, 5).unwrap();
        assert_eq!(s.nnz, 300);
        assert_eq!(s.value.nnz(), 300);
        assert_eq!(gen_with_nnz(&[4], 4, 0).unwrap().nnz, 4);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert_eq!(gen_sparse(&[4], 0.0, 0), Err(DataError::Density(0.0)));
        assert_eq!(gen_sparse(&[4], 1.5, 0), Err(DataError::Density(1.5)));
        assert_eq!(gen_sparse(&[0, 4], 0.5, 0), Err(DataError::Dims(vec![0, 4])));
        assert!(gen_with_nnz(&[2], 3, 0).is_err());
    }
}
