//! Deterministic discrete-event simulation kernel.
//!
//! Time is a 64-bit tick counter (one tick is one nanosecond). Every
//! scheduled event carries the pair `(fire_time, seq_no)` where `seq_no` is
//! a global insertion ordinal; the pair totally orders the event queue, so
//! two events in the same timestep execute in insertion order and a run is
//! reproducible event for event. Processes are cooperative futures polled
//! by the kernel; they suspend on [`SignalRef::wait_edge`], [`Sim::delay`]
//! and the synchronisation primitives in [`sync`], and they never run
//! concurrently.

mod kernel;
pub mod sync;

pub use kernel::{
    ClockSpec, EdgeKind, EventId, LocalBoxFuture, ProcHandle, ProcId, RunOutcome, SignalId,
    SignalRef, Sim, SimError, WaitTimeout,
};

use std::fmt;
use std::ops::{Add, AddAssign, Sub};

/// A point in simulated time, in ticks. One tick is one nanosecond.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_ticks(ticks: u64) -> Self {
        SimTime(ticks)
    }

    pub const fn ticks(self) -> u64 {
        self.0
    }

    pub const fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }
}

impl Add<u64> for SimTime {
    type Output = SimTime;
    fn add(self, rhs: u64) -> SimTime {
        SimTime(self.0 + rhs)
    }
}

impl AddAssign<u64> for SimTime {
    fn add_assign(&mut self, rhs: u64) {
        self.0 += rhs;
    }
}

impl Sub for SimTime {
    type Output = u64;
    fn sub(self, rhs: SimTime) -> u64 {
        self.0 - rhs.0
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Debug for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}t", self.0)
    }
}

/// Incremental FNV-1a over bytes, used for event-trace hashing.
#[derive(Clone, Copy)]
pub struct TraceHash(u64);

impl TraceHash {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;

    pub fn new() -> Self {
        TraceHash(Self::OFFSET)
    }

    pub fn update(&mut self, bytes: &[u8]) {
        let mut h = self.0;
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(Self::PRIME);
        }
        self.0 = h;
    }

    pub fn value(&self) -> u64 {
        self.0
    }
}

impl Default for TraceHash {
    fn default() -> Self {
        Self::new()
    }
}

/// Hashes a string with FNV-1a, for stable name-keyed derivations.
pub fn fnv1a(s: &str) -> u64 {
    let mut h = TraceHash::new();
    h.update(s.as_bytes());
    h.value()
}
