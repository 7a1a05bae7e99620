//! Certificates of path-disconnectedness for semialgebraic sets.

use openblas_src as _;

pub mod certificate;
pub mod driver;
pub mod error;
pub mod horizon;
pub mod linpoly;
pub mod moment;
pub mod poly;
pub mod sdp;
pub mod semialg;
pub mod sos;
pub mod verify;

pub use error::{Error, Result};
