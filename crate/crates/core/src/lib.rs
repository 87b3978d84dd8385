//! Learnable low-displacement-rank structured linear transforms.
//!
//! The crate is organised bottom-up:
//!
//! * [`fft`]: length-n complex FFTs with a per-thread transform counter.
//! * [`circulant`]: f-unit-circulant shifts, dense f-circulant matrices and
//!   the four FFT matvec kernels for circulant / skew-circulant matrices.
//! * [`displacement`]: Sylvester / Stein displacement operators, Krylov
//!   matrices, generator extraction and reconstruction. Dense and slow; this is
//!   the reference used to check everything else.
//! * [`toeplitz_like`]: the learnable transform `M(G, H) = Σ Z₁(gᵢ) Z₋₁(hᵢ)`
//!   with fast batched products and gradients.
//! * [`nn`], [`data`]: a small feedforward trainer and MNIST/IDX ingestion.
//! * [`bench`]: timing harness and FFT budget audits.
//! * [`verify`], [`cli`]: the property suite and command-line driver.

pub mod bench;
pub mod circulant;
pub mod cli;
pub mod data;
pub mod displacement;
mod error;
pub mod fft;
pub mod linalg;
pub mod nn;
pub mod toeplitz_like;
pub mod verify;

pub use error::{Error, Result};
