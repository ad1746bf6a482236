//! Covariant quantum erasure codes: construction, verification and
//! numerical experiments on dense finite-dimensional Hilbert spaces.

pub mod channels;
pub mod codes;
pub mod error;
pub mod experiments;
pub mod groups;
pub mod hilbert;
pub mod optim;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
pub use hilbert::{
    fidelity, fidelity_pure, operator_norm, partial_trace, psd_func, random_haar_ket, schmidt_decompose,
    tensor_product, trace_norm, CMatrix, CVector, DenseKet, DenseOperator, ModeSpace, PsdFn, C64,
};
