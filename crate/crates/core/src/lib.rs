//! Exact arithmetic, value groups and monomialization steps for deciding and
//! certifying essential finite generation of valuation ring extensions.

pub mod error;
pub mod exact_reals;
pub mod extension;
pub mod lattice;
pub mod perron;
pub mod ring_state;
pub mod run;
pub mod scenario;
pub mod transcript;
pub mod value_groups;

pub use error::{Error, Result};
pub use exact_reals::{QuadExt, Sign};
pub use ring_state::{Monomial, ParamPos, Parameter, RingState};
pub use value_groups::{GroupElement, SubgroupEmbedding, ValueGroupSpec};
