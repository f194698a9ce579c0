//! Process synchronisation primitives built on the kernel's wake events.
//!
//! Both primitives follow the same discipline as signal waits: waking a
//! process schedules a kernel event at the current time, so hand-offs stay
//! inside the deterministic event order.

use std::cell::{Cell, RefCell};
use std::future::Future;
use std::pin::Pin;
use std::rc::Rc;
use std::task::{Context, Poll, Waker};

use super::kernel::ProcId;
use super::Sim;

/// Single-value rendezvous: one producer completes, one consumer awaits.
pub struct Oneshot<T> {
    inner: Rc<RefCell<OneshotInner<T>>>,
}

struct OneshotInner<T> {
    value: Option<T>,
    waiter: Option<(ProcId, Rc<Cell<bool>>)>,
}

impl<T> Clone for Oneshot<T> {
    fn clone(&self) -> Self {
        Oneshot {
            inner: self.inner.clone(),
        }
    }
}

impl<T> Oneshot<T> {
    pub fn new() -> Self {
        Oneshot {
            inner: Rc::new(RefCell::new(OneshotInner {
                value: None,
                waiter: None,
            })),
        }
    }

    /// Stores the value and wakes the waiter, if any. Completing twice is
    /// a caller bug and panics.
    pub fn complete(&self, sim: &Sim, value: T) {
        let waiter = {
            let mut inner = self.inner.borrow_mut();
            assert!(inner.value.is_none(), "oneshot completed twice");
            inner.value = Some(value);
            inner.waiter.take()
        };
        if let Some((pid, flag)) = waiter {
            sim.schedule_wake_pub(pid, 0, Some(flag));
        }
    }

    pub fn is_complete(&self) -> bool {
        self.inner.borrow().value.is_some()
    }

    /// Takes the value once available. One consumer only.
    pub fn wait(&self, sim: &Sim) -> OneshotWait<T> {
        OneshotWait {
            sim: sim.clone(),
            shot: self.clone(),
            fired: Rc::new(Cell::new(false)),
            registered: false,
        }
    }
}

impl<T> Default for Oneshot<T> {
    fn default() -> Self {
        Self::new()
    }
}

pub struct OneshotWait<T> {
    sim: Sim,
    shot: Oneshot<T>,
    fired: Rc<Cell<bool>>,
    registered: bool,
}

impl<T> Future for OneshotWait<T> {
    type Output = T;

    fn poll(self: Pin<&mut Self>, _cx: &mut Context<'_>) -> Poll<T> {
        let me = self.get_mut();
        {
            let mut inner = me.shot.inner.borrow_mut();
            if let Some(v) = inner.value.take() {
                return Poll::Ready(v);
            }
            if !me.registered {
                let pid = me
                    .sim
                    .current_pid()
                    .expect("oneshot wait outside a kernel process");
                assert!(inner.waiter.is_none(), "oneshot already has a waiter");
                inner.waiter = Some((pid, me.fired.clone()));
                me.registered = true;
            }
        }
        Poll::Pending
    }
}

/// Wait list in the shape of a condition variable. Waiters must re-check
/// their predicate after waking; notifications carry no payload.
pub struct Notify {
    waiters: RefCell<Vec<(ProcId, Rc<Cell<bool>>)>>,
}

impl Notify {
    pub fn new() -> Self {
        Notify {
            waiters: RefCell::new(Vec::new()),
        }
    }

    /// Wakes the longest-waiting process.
    pub fn notify_one(&self, sim: &Sim) {
        let waiter = {
            let mut ws = self.waiters.borrow_mut();
            if ws.is_empty() {
                None
            } else {
                Some(ws.remove(0))
            }
        };
        if let Some((pid, flag)) = waiter {
            sim.schedule_wake_pub(pid, 0, Some(flag));
        }
    }

    /// Wakes every currently registered process, in registration order.
    pub fn notify_all(&self, sim: &Sim) {
        let ws = std::mem::take(&mut *self.waiters.borrow_mut());
        for (pid, flag) in ws {
            sim.schedule_wake_pub(pid, 0, Some(flag));
        }
    }

    /// Registers the calling process and suspends until a notify.
    pub fn wait<'a>(&'a self, sim: &Sim) -> NotifyWait<'a> {
        NotifyWait {
            sim: sim.clone(),
            notify: self,
            fired: Rc::new(Cell::new(false)),
            registered: false,
        }
    }
}

impl Default for Notify {
    fn default() -> Self {
        Self::new()
    }
}

pub struct NotifyWait<'a> {
    sim: Sim,
    notify: &'a Notify,
    fired: Rc<Cell<bool>>,
    registered: bool,
}

impl Future for NotifyWait<'_> {
    type Output = ();

    fn poll(self: Pin<&mut Self>, _cx: &mut Context<'_>) -> Poll<()> {
        let me = self.get_mut();
        if me.fired.get() {
            return Poll::Ready(());
        }
        if !me.registered {
            let pid = me
                .sim
                .current_pid()
                .expect("notify wait outside a kernel process");
            me.notify.waiters.borrow_mut().push((pid, me.fired.clone()));
            me.sim.set_wait_note(pid, "notify wait".to_string());
            me.registered = true;
        }
        Poll::Pending
    }
}

/// Polls a future that must complete without suspending, e.g. register
/// access through an immediate in-memory bus in unit tests.
pub fn expect_ready<F: Future>(fut: F) -> F::Output {
    let mut fut = Box::pin(fut);
    let mut cx = Context::from_waker(Waker::noop());
    match fut.as_mut().poll(&mut cx) {
        Poll::Ready(v) => v,
        Poll::Pending => panic!("future suspended where an immediate result was required"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::SimTime;
    use std::collections::VecDeque;

    #[test]
    fn oneshot_delivers_across_processes() {
        let sim = Sim::new();
        let shot: Oneshot<u32> = Oneshot::new();
        let got = Rc::new(Cell::new(0u32));
        let g = got.clone();
        let s1 = sim.clone();
        let rx = shot.clone();
        sim.spawn("consumer", async move {
            g.set(rx.wait(&s1).await);
        });
        let s2 = sim.clone();
        let tx = shot.clone();
        let sim3 = sim.clone();
        sim.spawn("producer", async move {
            s2.delay(25).await;
            tx.complete(&sim3, 99);
        });
        sim.run_until(SimTime::from_ticks(100));
        assert_eq!(got.get(), 99);
    }

    #[test]
    fn oneshot_completed_before_wait_resolves_immediately() {
        let sim = Sim::new();
        let shot: Oneshot<&str> = Oneshot::new();
        shot.complete(&sim, "early");
        let got = Rc::new(RefCell::new(""));
        let g = got.clone();
        let s = sim.clone();
        let rx = shot.clone();
        sim.spawn("late", async move {
            *g.borrow_mut() = rx.wait(&s).await;
        });
        sim.run_until(SimTime::from_ticks(1));
        assert_eq!(*got.borrow(), "early");
    }

    #[test]
    fn notify_wakes_in_registration_order() {
        let sim = Sim::new();
        let notify = Rc::new(Notify::new());
        let queue: Rc<RefCell<VecDeque<u32>>> = Rc::new(RefCell::new(VecDeque::new()));
        let served = Rc::new(RefCell::new(Vec::new()));
        for name in ["w0", "w1"] {
            let n = notify.clone();
            let q = queue.clone();
            let out = served.clone();
            let s = sim.clone();
            let tag = name.to_string();
            sim.spawn(name, async move {
                loop {
                    let item = loop {
                        if let Some(v) = q.borrow_mut().pop_front() {
                            break v;
                        }
                        n.wait(&s).await;
                    };
                    out.borrow_mut().push((tag.clone(), item));
                }
            });
        }
        let n = notify.clone();
        let q = queue.clone();
        let s = sim.clone();
        sim.spawn("feeder", async move {
            for v in 0..4u32 {
                s.delay(10).await;
                q.borrow_mut().push_back(v);
                n.notify_one(&s);
            }
        });
        sim.run_until(SimTime::from_ticks(200));
        let got = served.borrow();
        assert_eq!(got.len(), 4);
        assert_eq!(got[0], ("w0".to_string(), 0));
        assert_eq!(got[1], ("w1".to_string(), 1));
    }

    #[test]
    fn expect_ready_unwraps_immediate_futures() {
        assert_eq!(expect_ready(async { 7 }), 7);
    }
}
