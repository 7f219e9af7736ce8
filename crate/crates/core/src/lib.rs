//! Contactless fingerprint enhancement, minutiae extraction, nearest-neighbour
//! minutiae encoding and exhaustive code matching, plus an FVC-style
//! evaluation harness and a synthetic fingerprint generator.
//!
//! The pipeline runs in this order:
//!
//! 1. [`imgio`]: load and normalize a grayscale image.
//! 2. [`ridgefield`]: ROI mask, block orientation field and block ridge frequency.
//! 3. [`enhance`]: Gabor filter bank enhancement, binarization, thinning.
//! 4. [`minutiae`]: quality mask, crossing-number detection, false-minutiae removal.
//! 5. [`encode`]: per-minutia n-nearest-neighbour codes assembled into a [`encode::FingerCode`].
//! 6. [`matching`]: exhaustive neighbour-code matching and similarity score.
//! 7. [`eval`]: genuine/impostor protocol, FMR/FNMR, EER, parameter sweeps.
//!
//! [`pipeline`] chains steps 1–5 under a [`config::Config`].

pub mod angle;
pub mod config;
pub mod encode;
pub mod enhance;
pub mod error;
pub mod eval;
pub mod grid;
pub mod imgio;
pub mod matching;
pub mod minutiae;
pub mod pipeline;
pub mod ridgefield;
pub mod synth;

pub use config::Config;
pub use error::{Error, Result};
pub use imgio::GrayImage;
