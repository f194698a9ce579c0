//! Seeded constrained-random sequences, sequencers and virtual sequences.

pub mod constraint;
pub mod rng;
pub mod sequencer;

pub use constraint::{randomize, Assignment, Constraint, ConstraintError, Domain, REJECTION_BOUND};
pub use rng::Rng;
pub use sequencer::{Responder, Sequencer};
