//! Seeded sampling helpers.
//!
//! Every randomized object in this crate is generated from an explicit `u64`
//! seed through a counter-based generator, so problem instances and traces
//! are reproducible bit-for-bit on a given platform. Matrices are filled in
//! row-major order; changing the fill order would change the instances, so
//! it is part of the (frozen) generation contract.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::scalar::Scalar;

/// The deterministic generator used everywhere a seed appears.
pub type SeededRng = ChaCha8Rng;

/// Creates the crate's generator for a seed.
pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Row-major matrix with i.i.d. standard-normal entries.
///
/// Sampling happens in f64 and is then converted, so the stream of draws is
/// identical regardless of the working scalar type.
pub fn standard_normal_matrix<T: Scalar>(rng: &mut SeededRng, rows: usize, cols: usize) -> DMatrix<T> {
    let data: Vec<T> = (0..rows * cols)
        .map(|_| nalgebra::convert::<f64, T>(rng.sample::<f64, _>(StandardNormal)))
        .collect();
    DMatrix::from_row_slice(rows, cols, &data)
}

/// Vector with i.i.d. standard-normal entries.
pub fn standard_normal_vector<T: Scalar>(rng: &mut SeededRng, len: usize) -> DVector<T> {
    let data: Vec<T> = (0..len)
        .map(|_| nalgebra::convert::<f64, T>(rng.sample::<f64, _>(StandardNormal)))
        .collect();
    DVector::from_vec(data)
}
