//! Sparse regression codes (SPARCs) for lossy compression.
//!
//! A SPARC codebook is an `n x ML` matrix of i.i.d. standard normal entries,
//! split into `L` sections of `M` columns. A codeword picks one column per
//! section and weights it by a fixed coefficient `c_i`; the encoder picks the
//! columns greedily, one section at a time, so that each stage shrinks the
//! residual by a factor of roughly `1 - 2R/L`. After `L` stages the squared
//! error approaches the Gaussian distortion-rate limit `sigma^2 e^{-2R}`.
//!
//! The matrix is never stored: [`Dictionary`] regenerates any column from a
//! 64-bit seed, so encoder and decoder only need to share the parameters.
//!
//! ```
//! use sparc::{derive_params, encode, decode, distortion, Dictionary, SelectionRule};
//! use sparc::sources::{SourceKind, SourceSpec};
//!
//! let params = derive_params(1.0, 8, 2.0, 1.0, 7).unwrap();
//! let dict = Dictionary::new(&params);
//! let source = SourceSpec::new(SourceKind::GaussianIid, 1.0, 99).generate(params.n()).unwrap();
//! let (indices, trace) = encode(&params, &dict, &source, SelectionRule::MinResidual).unwrap();
//! let recon = decode(&params, &dict, &indices).unwrap();
//! let d = distortion(&source, &recon).unwrap();
//! assert!((d - trace.final_distortion()).abs() < 1e-10);
//! ```

pub mod bench;
pub mod bitstream;
pub mod codec;
pub mod dictionary;
mod error;
pub mod kernel;
pub mod params;
pub mod rng;
pub mod sources;
pub mod stream;
pub mod theory;

pub use codec::{
    decode, distortion, encode, encode_batch, encode_exhaustive, select_column, BetaIndices,
    EncodeTrace, SelectionRule,
};
pub use dictionary::Dictionary;
pub use error::{Error, Result};
pub use params::{coefficient_ladder, derive_params, CoefficientLadder, SparcParams};
