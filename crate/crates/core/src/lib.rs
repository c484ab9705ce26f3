//! Convolution-dominated matrices over relatively separated index sets,
//! quasi-Banach stability transfer, Gabor frames and Weyl symbol inversion.

pub mod acceptance;
pub mod cdmatrix;
pub mod envelopes;
pub mod error;
pub mod extreal;
pub mod gabor;
pub mod harness;
pub mod linalg;
pub mod pointset;
pub mod sequences;
pub mod sjostrand;
pub mod weyl;

pub use cdmatrix::CDMatrix;
pub use envelopes::Envelope;
pub use error::{CdError, Result};
pub use pointset::{enumerate, PointSet, RectangularLattice, RelSep};
pub use sequences::Seq;
