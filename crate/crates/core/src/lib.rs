//! Robust active preference elicitation.
//!
//! * [`lp`] and [`uncertainty`]: a dense simplex solver and the polyhedral
//!   uncertainty sets it optimizes over.
//! * [`elicit`]: the inconsistency budget schedule, robust recommendation,
//!   robust and random query selection, and lookup tables.
//! * [`policy`]: the critical-care bed allocation simulator that turns
//!   randomly generated scoring trees into alternatives.
//! * [`analysis`]: synthetic agents, response cleaning and the statistics
//!   used to compare elicitation strategies.
//! * [`oracle`]: brute-force reference implementations, and [`selftest`]:
//!   seeded suites comparing the production routines against them.

pub mod analysis;
pub mod elicit;
pub mod error;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod par;
pub mod policy;
pub mod selftest;
pub mod special;
pub mod uncertainty;

pub use error::{Error, Result};
pub use model::{AlternativeSet, Query, QueryHistory, Response};
pub use par::Execution;
