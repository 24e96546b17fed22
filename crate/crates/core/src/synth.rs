//! Synthetic activations with a known sparse dictionary.
//!
//! Each row is a sum of `k_active` distinct unit-norm atoms with coefficients
//! drawn uniformly from `[0.5, 1.5)`. A TopK SAE with `k ≥ k_active` can in
//! principle reconstruct such data exactly, which makes it a convenient
//! stand-in for real encoder activations in tests and demos.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::rng::{bounded_u64, derive_seed, rng_from_seed};
use crate::linalg::DenseMatrix;

const ATOM_STREAM: u64 = 0;
const SAMPLE_STREAM: u64 = 1;

/// A fixed random dictionary and a sampler of sparse combinations of it.
#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryTask {
    d: usize,
    k_active: usize,
    atoms: DenseMatrix,
}

impl DictionaryTask {
    /// Dictionary drawn from seed 0.
    pub fn new(d: usize, n_atoms: usize, k_active: usize) -> Self {
        Self::with_dictionary_seed(d, n_atoms, k_active, 0)
    }

    /// # Panics
    ///
    /// If `d` or `n_atoms` is zero, or `k_active` is not in `1..=n_atoms`.
    pub fn with_dictionary_seed(d: usize, n_atoms: usize, k_active: usize, seed: u64) -> Self {
        assert!(d > 0 && n_atoms > 0, "dictionary needs d > 0 and n_atoms > 0");
        assert!(
            (1..=n_atoms).contains(&k_active),
            "k_active must be in 1..={n_atoms}"
        );
        let mut rng = rng_from_seed(derive_seed(seed, ATOM_STREAM));
        let mut data = Vec::with_capacity(n_atoms * d);
        for _ in 0..n_atoms {
            let row: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            data.extend(row.iter().map(|v| (v / norm) as f32));
        }
        Self {
            d,
            k_active,
            atoms: DenseMatrix::from_parts_unchecked(n_atoms, d, data),
        }
    }

    /// The ground-truth atoms, one per row.
    pub fn atoms(&self) -> &DenseMatrix {
        &self.atoms
    }

    /// `n` rows of sparse atom combinations.
    pub fn sample(&self, n: usize, seed: u64) -> Result<DenseMatrix> {
        if n == 0 {
            return Err(Error::Empty { what: "synthetic sample" });
        }
        let n_atoms = self.atoms.rows();
        let mut rng = rng_from_seed(derive_seed(seed, SAMPLE_STREAM));
        let mut pool: Vec<usize> = (0..n_atoms).collect();
        let mut out = vec![0.0f32; n * self.d];
        let mut acc = vec![0.0f64; self.d];
        for row in out.chunks_exact_mut(self.d) {
            acc.fill(0.0);
            for i in 0..self.k_active {
                let j = i + bounded_u64(&mut rng, (n_atoms - i) as u64) as usize;
                pool.swap(i, j);
                let c: f64 = rng.random_range(0.5..1.5);
                for (a, &v) in acc.iter_mut().zip(self.atoms.row(pool[i])) {
                    *a += c * f64::from(v);
                }
            }
            for (o, a) in row.iter_mut().zip(&acc) {
                *o = *a as f32;
            }
        }
        Ok(DenseMatrix::from_parts_unchecked(n, self.d, out))
    }
}
