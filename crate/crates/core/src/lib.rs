//! Lifted piecewise-linear control policies for distributionally robust
//! multistage mixed-integer control of uncertain linear systems.
//!
//! The pipeline is: describe the support and its breakpoints ([`lifting`]),
//! the system and its costs ([`system_model`]), the ambiguity set
//! ([`ambiguity`]); compile and reformulate into a MILP
//! ([`reformulation`]); solve it with `drmic-milp`; and certify the result
//! against brute-force evaluations ([`oracle`]). [`inventory_bench`] builds
//! the single-item inventory benchmark on top.

pub mod affine;
pub mod ambiguity;
pub mod error;
pub mod inventory_bench;
pub mod lifting;
pub mod oracle;
pub mod reformulation;
pub mod system_model;

pub use error::{Error, Result};
