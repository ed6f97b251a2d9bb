//! Block norms over consecutive index blocks.
//!
//! For block size `t`, indices `0..N` split into `⌊N/t⌋` blocks of length `t`
//! followed by one trailing block of length `N mod t`. An empty trailing
//! block contributes nothing. `‖u‖_{t,1}` sums the blockwise ℓ2 norms and
//! `‖u‖_{t,∞}` takes their maximum, so `t = 1` gives ℓ1/ℓ∞ and `t = N` gives ℓ2.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormError {
    #[error("block size {block} is invalid for a vector of length {dim}")]
    InvalidBlockSize { block: usize, dim: usize },
}

fn block_norms(u: &[f64], t: usize) -> Result<impl Iterator<Item = f64> + '_, NormError> {
    if t < 1 || t > u.len() {
        return Err(NormError::InvalidBlockSize {
            block: t,
            dim: u.len(),
        });
    }
    Ok(u.chunks(t)
        .map(|block| block.iter().map(|v| v * v).sum::<f64>().sqrt()))
}

/// `‖u‖_{t,1}`: sum of ℓ2 norms of the consecutive length-`t` blocks.
pub fn block_l1(u: &[f64], t: usize) -> Result<f64, NormError> {
    Ok(block_norms(u, t)?.sum())
}

/// `‖u‖_{t,∞}`: largest ℓ2 norm among the consecutive length-`t` blocks.
pub fn block_linf(u: &[f64], t: usize) -> Result<f64, NormError> {
    Ok(block_norms(u, t)?.fold(0.0, f64::max))
}
