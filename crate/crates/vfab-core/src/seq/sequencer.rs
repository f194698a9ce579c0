//! Rendezvous point between sequences and a driver.
//!
//! Sequences push items and suspend until the driver reports completion;
//! the driver pulls items one at a time. Arbitration is FIFO per item, so
//! two sequences running on one sequencer interleave at item granularity
//! and a child sequence launched inline shares its parent's slot.

use std::cell::RefCell;
use std::collections::VecDeque;
use std::rc::Rc;

use crate::sim::sync::{Notify, Oneshot};
use crate::sim::Sim;

struct PendingItem<T> {
    item: T,
    reply: Oneshot<T>,
}

/// FIFO sequencer carrying items of type `T`. The driver side calls
/// [`next`](Sequencer::next); the sequence side calls
/// [`send`](Sequencer::send).
pub struct Sequencer<T> {
    sim: Sim,
    path: String,
    queue: RefCell<VecDeque<PendingItem<T>>>,
    available: Notify,
}

impl<T: 'static> Sequencer<T> {
    pub fn new(sim: &Sim, path: &str) -> Rc<Self> {
        Rc::new(Sequencer {
            sim: sim.clone(),
            path: path.to_string(),
            queue: RefCell::new(VecDeque::new()),
            available: Notify::new(),
        })
    }

    pub fn path(&self) -> &str {
        &self.path
    }

    pub fn pending(&self) -> usize {
        self.queue.borrow().len()
    }

    /// Queues an item and suspends until the driver completes it. The
    /// returned value is the item as the driver finished it (for reads,
    /// with response data filled in).
    pub async fn send(&self, item: T) -> T {
        let reply = Oneshot::new();
        self.queue.borrow_mut().push_back(PendingItem {
            item,
            reply: reply.clone(),
        });
        self.available.notify_one(&self.sim);
        reply.wait(&self.sim).await
    }

    /// Driver side: waits for the next queued item. The responder must be
    /// used to complete the hand-off.
    pub async fn next(&self) -> (T, Responder<T>) {
        loop {
            if let Some(p) = self.queue.borrow_mut().pop_front() {
                return (
                    p.item,
                    Responder {
                        sim: self.sim.clone(),
                        reply: p.reply,
                    },
                );
            }
            self.available.wait(&self.sim).await;
        }
    }
}

/// Completion handle for one item pulled from a sequencer.
pub struct Responder<T> {
    sim: Sim,
    reply: Oneshot<T>,
}

impl<T> Responder<T> {
    pub fn respond(self, item: T) {
        self.reply.complete(&self.sim, item);
    }
}
