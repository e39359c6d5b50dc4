//! Dyadic transforms, Dixmier envelopes and trace diagnostics for weak ideals
//! `L_g` of compact operators.
//!
//! The crate works with finite-horizon estimates of limit sets: every
//! functional value is reported as a [`seqcore::ValueEnvelope`] over an
//! explicit index window, never as a single number.

pub mod connes;
pub mod error;
pub mod ext;
pub mod functionals;
pub mod num;
pub mod seqcore;
pub mod transforms;
pub mod weights;

pub use error::{Error, Result};
pub use ext::Ext;
pub use seqcore::{DyadicSequence, Index, Side, ValueEnvelope, Verdict};
pub use weights::Weight;
