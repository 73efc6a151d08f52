//! Exact p-adic measure calculus for anticyclotomic L-functions.

pub mod characters;
pub mod cyclotomic;
pub mod error;
pub mod json;
pub mod measure;
pub mod assembly;
pub mod modforms;
pub mod padic;
pub mod quadratic;

pub use error::{Error, Result};
pub use cyclotomic::{CycloContext, CycloElt};
pub use padic::{PadicContext, PadicElt};
