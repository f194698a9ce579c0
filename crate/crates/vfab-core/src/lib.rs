//! Coverage-driven functional verification framework for hardware designs.
//!
//! The crate is organised in layers. [`sim`] provides a deterministic
//! discrete-event kernel on which everything else runs. [`tb`] adds the
//! testbench structure: a component tree, phased execution, a pattern-keyed
//! configuration database and analysis connections. [`uvc`] contains the
//! reusable verification components for the register bus and the video
//! stream protocol plus the interrupt checker. [`reg`] is the register
//! abstraction layer (definitions, mirrors, frontdoor access, passive
//! prediction, built-in sequences). [`ipxact`] turns IP-XACT register
//! descriptions and attribute maps into register models, coverage skeletons
//! and checker bindings. [`seq`] implements seeded constrained-random
//! sequences and virtual sequences, [`cov`] functional coverage, [`check`]
//! bit-accurate frame checking against reference models, and [`sw`] the
//! software-driven verification layer (embedded test programs, the VRI
//! mailbox and randomized software calls).

pub mod check;
pub mod cov;
pub mod ipxact;
pub mod reg;
pub mod seq;
pub mod sim;
pub mod sw;
pub mod tb;
pub mod uvc;
