//! Counter-based random streams: a `(seed, stream)` pair always yields the
//! same sequence, and distinct streams never overlap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::Matrix;

/// What a stream is used for, so one seed can feed independent consumers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    ProblemData = 1,
    Init = 2,
    GradientNoise = 3,
    Corpus = 4,
}

pub fn stream(seed: u64, purpose: Purpose) -> ChaCha8Rng {
    stream_indexed(seed, purpose, 0)
}

/// Stream `index` of the given purpose, e.g. one per trial.
pub fn stream_indexed(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 48) | (index & 0xffff_ffff_ffff));
    rng
}

/// Matrix with i.i.d. `N(0, scale²)` entries.
pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| {
        let z: f64 = rng.sample(StandardNormal);
        scale * z
    })
}
