//! Two-dimensional discrete wavelet transforms over an interleaved coefficient
//! layout, with four interchangeable execution schemes (separable lifting,
//! separable convolution, fused non-separable lifting, and an adapted
//! non-separable factorization whose cross terms stay local to each 2x2 quad).
//!
//! The symbolic side (`poly2`, `schemes`) manipulates exact rational Laurent
//! polynomials so scheme equivalence and invertibility are decided with zero
//! tolerance; the numeric side (`engine`) compiles those matrices to f32
//! kernels with deterministic banded multithreading. `oracle` is an
//! independent direct filter-bank used only to cross-check the engine.

pub mod bench;
pub mod engine;
pub mod imageio;
pub mod oracle;
pub mod poly2;
pub mod schemes;
pub mod verify;
pub mod wavelets;
