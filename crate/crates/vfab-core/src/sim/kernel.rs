//! Event queue, signal state and the cooperative process executor.

use std::cell::{Cell, RefCell};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::collections::HashMap;
use std::fmt;
use std::future::Future;
use std::pin::Pin;
use std::rc::Rc;
use std::task::{Context, Poll, Waker};

use thiserror::Error;

use super::{SimTime, TraceHash};

/// Boxed future type used for kernel processes and sequence bodies.
pub type LocalBoxFuture<T> = Pin<Box<dyn Future<Output = T>>>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("signal width {0} outside supported range 1..=64")]
    WidthRange(u32),
    #[error("duplicate signal name {0}")]
    DuplicateSignal(String),
    #[error("no signal named {0}")]
    UnknownSignal(String),
    #[error("value {value:#x} does not fit signal {name} of width {width}")]
    WidthViolation { name: String, width: u32, value: u64 },
    #[error("clock period {0} must be even and at least 2 ticks")]
    BadClockPeriod(u64),
}

/// Returned by [`SignalRef::wait_edge_timeout`] when the window elapses first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WaitTimeout {
    pub at: SimTime,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub struct SignalId(u32);

#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub struct ProcId(u32);

/// Identifies a scheduled event; the id is its global insertion ordinal.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct EventId(pub u64);

/// Edge selector for signal waits. Rising and falling look at the least
/// significant bit; `Any` fires on every value change.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum EdgeKind {
    Rising,
    Falling,
    Any,
}

impl EdgeKind {
    fn matches(self, old: u64, new: u64) -> bool {
        match self {
            EdgeKind::Rising => old & 1 == 0 && new & 1 == 1,
            EdgeKind::Falling => old & 1 == 1 && new & 1 == 0,
            EdgeKind::Any => true,
        }
    }
}

/// Square-wave clock description: 50% duty cycle, low at time zero, first
/// rising edge at `period / 2`.
#[derive(Clone, Copy, Debug)]
pub struct ClockSpec {
    pub period: u64,
}

impl ClockSpec {
    pub fn new(period: u64) -> Result<Self, SimError> {
        if period < 2 || period % 2 != 0 {
            return Err(SimError::BadClockPeriod(period));
        }
        Ok(ClockSpec { period })
    }
}

enum Action {
    Wake {
        pid: ProcId,
        flag: Option<Rc<Cell<bool>>>,
    },
    Drive {
        signal: SignalId,
        value: u64,
    },
    Call(Box<dyn FnOnce(&Sim)>),
}

struct HeapEvent {
    time: SimTime,
    seq: u64,
    label: Rc<str>,
    action: Action,
}

impl PartialEq for HeapEvent {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}
impl Eq for HeapEvent {}

impl PartialOrd for HeapEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed so the BinaryHeap pops the earliest (time, seq) first.
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

struct Waiter {
    edge: EdgeKind,
    pid: ProcId,
    fired: Rc<Cell<bool>>,
}

struct SignalState {
    name: Rc<str>,
    width: u32,
    value: u64,
    last_change: SimTime,
    changes: u64,
    waiters: Vec<Waiter>,
}

struct ProcSlot {
    path: Rc<str>,
    fut: Option<LocalBoxFuture<()>>,
    done: Rc<Cell<bool>>,
    join_waiters: Vec<(ProcId, Rc<Cell<bool>>)>,
    wait_note: String,
}

struct KernelState {
    now: SimTime,
    last_exec: SimTime,
    next_seq: u64,
    executed: u64,
    queue: BinaryHeap<HeapEvent>,
    signals: Vec<SignalState>,
    names: HashMap<String, SignalId>,
    current: Option<ProcId>,
    stop: bool,
    hash: TraceHash,
    log: Option<Vec<String>>,
}

struct SimInner {
    st: RefCell<KernelState>,
    procs: RefCell<Vec<ProcSlot>>,
}

/// Handle to the kernel. Clones share the same simulation; the handle is
/// cheap to copy into processes and components.
#[derive(Clone)]
pub struct Sim {
    inner: Rc<SimInner>,
}

/// Outcome of [`Sim::run_while`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    /// The condition became false.
    ConditionMet(SimTime),
    /// The event queue drained while the condition still held.
    Quiescent(SimTime),
    /// The next pending event lies beyond the time limit.
    LimitReached(SimTime),
    /// A process requested a stop.
    Stopped(SimTime),
}

impl RunOutcome {
    pub fn time(self) -> SimTime {
        match self {
            RunOutcome::ConditionMet(t)
            | RunOutcome::Quiescent(t)
            | RunOutcome::LimitReached(t)
            | RunOutcome::Stopped(t) => t,
        }
    }
}

impl Sim {
    pub fn new() -> Self {
        Sim {
            inner: Rc::new(SimInner {
                st: RefCell::new(KernelState {
                    now: SimTime::ZERO,
                    last_exec: SimTime::ZERO,
                    next_seq: 0,
                    executed: 0,
                    queue: BinaryHeap::new(),
                    signals: Vec::new(),
                    names: HashMap::new(),
                    current: None,
                    stop: false,
                    hash: TraceHash::new(),
                    log: None,
                }),
                procs: RefCell::new(Vec::new()),
            }),
        }
    }

    pub fn now(&self) -> SimTime {
        self.inner.st.borrow().now
    }

    /// Registers a new 2-state signal. Names must be unique; widths run
    /// from 1 to 64 bits. The initial value is 0.
    pub fn add_signal(&self, name: &str, width: u32) -> Result<SignalRef, SimError> {
        if width == 0 || width > 64 {
            return Err(SimError::WidthRange(width));
        }
        let mut st = self.inner.st.borrow_mut();
        if st.names.contains_key(name) {
            return Err(SimError::DuplicateSignal(name.to_string()));
        }
        let id = SignalId(st.signals.len() as u32);
        st.signals.push(SignalState {
            name: Rc::from(name),
            width,
            value: 0,
            last_change: SimTime::ZERO,
            changes: 0,
            waiters: Vec::new(),
        });
        st.names.insert(name.to_string(), id);
        Ok(SignalRef {
            sim: self.clone(),
            id,
        })
    }

    /// Looks a signal up by its registered name.
    pub fn signal(&self, name: &str) -> Result<SignalRef, SimError> {
        let st = self.inner.st.borrow();
        match st.names.get(name) {
            Some(&id) => Ok(SignalRef {
                sim: self.clone(),
                id,
            }),
            None => Err(SimError::UnknownSignal(name.to_string())),
        }
    }

    /// Schedules `f` to run after `delay` ticks. The label shows up in the
    /// event log.
    pub fn schedule_in(
        &self,
        label: &str,
        delay: u64,
        f: impl FnOnce(&Sim) + 'static,
    ) -> EventId {
        let mut st = self.inner.st.borrow_mut();
        let at = st.now + delay;
        Self::push_event(&mut st, at, Rc::from(label), Action::Call(Box::new(f)))
    }

    /// Spawns a cooperative process. The first poll happens through the
    /// event queue at the current time, so spawn order is execution order.
    pub fn spawn(&self, path: &str, fut: impl Future<Output = ()> + 'static) -> ProcHandle {
        let path: Rc<str> = Rc::from(path);
        let done = Rc::new(Cell::new(false));
        let pid = {
            let mut procs = self.inner.procs.borrow_mut();
            let pid = ProcId(procs.len() as u32);
            procs.push(ProcSlot {
                path: path.clone(),
                fut: Some(Box::pin(fut)),
                done: done.clone(),
                join_waiters: Vec::new(),
                wait_note: String::new(),
            });
            pid
        };
        {
            let mut st = self.inner.st.borrow_mut();
            let now = st.now;
            Self::push_event(&mut st, now, path, Action::Wake { pid, flag: None });
        }
        ProcHandle {
            sim: self.clone(),
            pid,
            done,
        }
    }

    /// Suspends the calling process for `ticks`. Zero is a pure yield: the
    /// process resumes later in the same timestep.
    pub fn delay(&self, ticks: u64) -> Delay {
        Delay {
            sim: self.clone(),
            ticks,
            fired: Rc::new(Cell::new(false)),
            armed: false,
        }
    }

    /// Spawns the generator process for a free-running clock on `sig`.
    pub fn start_clock(&self, sig: &SignalRef, spec: ClockSpec) -> ProcHandle {
        let half = spec.period / 2;
        let sim = self.clone();
        let sig = sig.clone();
        let label = format!("clkgen.{}", sig.name());
        self.spawn(&label, async move {
            loop {
                sim.delay(half).await;
                let _ = sig.drive(1, 0);
                sim.delay(half).await;
                let _ = sig.drive(0, 0);
            }
        })
    }

    /// Drives an active-low reset: low immediately, released after `ticks`.
    pub fn reset_pulse(&self, rst_n: &SignalRef, ticks: u64) {
        let _ = rst_n.drive(0, 0);
        let _ = rst_n.drive(1, ticks);
    }

    /// Executes the earliest pending event. Returns its fire time, or
    /// `None` when the queue is empty.
    pub fn step(&self) -> Option<SimTime> {
        let ev = {
            let mut st = self.inner.st.borrow_mut();
            let ev = st.queue.pop()?;
            debug_assert!(ev.time >= st.now, "event queue went backwards");
            st.now = ev.time;
            st.last_exec = ev.time;
            st.executed += 1;
            let line = format!("{}:{}:{}", ev.time, ev.seq, ev.label);
            st.hash.update(line.as_bytes());
            st.hash.update(b"\n");
            if let Action::Drive { signal, value } = ev.action {
                // Driven values are folded into the hash as well so runs
                // that differ only in data disagree on it.
                st.hash.update(&signal.0.to_le_bytes());
                st.hash.update(&value.to_le_bytes());
            }
            if let Some(log) = st.log.as_mut() {
                log.push(line);
            }
            ev
        };
        match ev.action {
            Action::Wake { pid, flag } => {
                if let Some(flag) = flag {
                    flag.set(true);
                }
                self.resume(pid);
            }
            Action::Drive { signal, value } => self.exec_drive(signal, value),
            Action::Call(f) => f(self),
        }
        Some(ev.time)
    }

    /// Executes events with `fire_time <= limit`. Returns the time of the
    /// last executed event, or the current time when nothing ran.
    pub fn run_until(&self, limit: SimTime) -> SimTime {
        loop {
            {
                let st = self.inner.st.borrow();
                match st.queue.peek() {
                    None => return st.last_exec,
                    Some(ev) if ev.time > limit => return st.last_exec,
                    Some(_) => {}
                }
                if st.stop {
                    return st.last_exec;
                }
            }
            self.step();
        }
    }

    /// Executes events while `active()` holds and fire times stay within
    /// `limit`. The testbench run phase sits on top of this.
    pub fn run_while(&self, mut active: impl FnMut() -> bool, limit: SimTime) -> RunOutcome {
        loop {
            if !active() {
                return RunOutcome::ConditionMet(self.now());
            }
            {
                let st = self.inner.st.borrow();
                if st.stop {
                    return RunOutcome::Stopped(st.now);
                }
                match st.queue.peek() {
                    None => return RunOutcome::Quiescent(st.now),
                    Some(ev) if ev.time > limit => return RunOutcome::LimitReached(st.now),
                    Some(_) => {}
                }
            }
            self.step();
        }
    }

    /// Asks the kernel to halt after the event in flight.
    pub fn request_stop(&self) {
        self.inner.st.borrow_mut().stop = true;
    }

    pub fn stop_requested(&self) -> bool {
        self.inner.st.borrow().stop
    }

    /// Running hash over the executed event stream (log lines plus driven
    /// values). Equal hashes mean event-for-event identical runs.
    pub fn trace_hash(&self) -> u64 {
        self.inner.st.borrow().hash.value()
    }

    pub fn executed_events(&self) -> u64 {
        self.inner.st.borrow().executed
    }

    /// Starts capturing `<time>:<seq_no>:<label>` lines for each executed
    /// event. Hashing is always on; capture is opt-in to keep memory flat.
    pub fn capture_log(&self) {
        let mut st = self.inner.st.borrow_mut();
        if st.log.is_none() {
            st.log = Some(Vec::new());
        }
    }

    pub fn take_log(&self) -> Vec<String> {
        self.inner
            .st
            .borrow_mut()
            .log
            .replace(Vec::new())
            .unwrap_or_default()
    }

    /// Paths and wait notes for processes that are alive, for hang reports.
    pub fn live_waits(&self) -> Vec<(String, String)> {
        self.inner
            .procs
            .borrow()
            .iter()
            .filter(|p| !p.done.get())
            .map(|p| (p.path.to_string(), p.wait_note.clone()))
            .collect()
    }

    /// Drops every process future and pending event. Processes capture
    /// clones of this handle, so the cycle must be broken explicitly when a
    /// simulation is finished with.
    pub fn teardown(&self) {
        self.inner.procs.borrow_mut().clear();
        let mut st = self.inner.st.borrow_mut();
        st.queue.clear();
        for sig in &mut st.signals {
            sig.waiters.clear();
        }
    }

    pub(crate) fn current_pid(&self) -> Option<ProcId> {
        self.inner.st.borrow().current
    }

    pub(crate) fn set_wait_note(&self, pid: ProcId, note: String) {
        if let Some(slot) = self.inner.procs.borrow_mut().get_mut(pid.0 as usize) {
            slot.wait_note = note;
        }
    }

    /// The path of the process being polled, or "main" outside any.
    pub fn current_path(&self) -> String {
        match self.current_pid() {
            Some(pid) => self.inner.procs.borrow()[pid.0 as usize].path.to_string(),
            None => "main".to_string(),
        }
    }

    fn push_event(st: &mut KernelState, time: SimTime, label: Rc<str>, action: Action) -> EventId {
        let seq = st.next_seq;
        st.next_seq += 1;
        st.queue.push(HeapEvent {
            time,
            seq,
            label,
            action,
        });
        EventId(seq)
    }

    pub(crate) fn schedule_wake_pub(
        &self,
        pid: ProcId,
        delay: u64,
        flag: Option<Rc<Cell<bool>>>,
    ) -> EventId {
        self.schedule_wake(pid, delay, flag)
    }

    fn schedule_wake(&self, pid: ProcId, delay: u64, flag: Option<Rc<Cell<bool>>>) -> EventId {
        let label = self.inner.procs.borrow()[pid.0 as usize].path.clone();
        let mut st = self.inner.st.borrow_mut();
        let at = st.now + delay;
        Self::push_event(&mut st, at, label, Action::Wake { pid, flag })
    }

    fn exec_drive(&self, id: SignalId, value: u64) {
        let fired: Vec<Waiter> = {
            let mut st = self.inner.st.borrow_mut();
            let now = st.now;
            let sig = &mut st.signals[id.0 as usize];
            if sig.value == value {
                return;
            }
            let old = sig.value;
            sig.value = value;
            sig.last_change = now;
            sig.changes += 1;
            let mut fired = Vec::new();
            sig.waiters.retain_mut(|w| {
                if w.edge.matches(old, value) {
                    fired.push(Waiter {
                        edge: w.edge,
                        pid: w.pid,
                        fired: w.fired.clone(),
                    });
                    false
                } else {
                    true
                }
            });
            fired
        };
        // Wake events are queued in registration order at the current time,
        // so waiters resume deterministically and exactly once per change.
        for w in fired {
            self.schedule_wake(w.pid, 0, Some(w.fired));
        }
    }

    fn resume(&self, pid: ProcId) {
        let fut = {
            let mut procs = self.inner.procs.borrow_mut();
            let Some(slot) = procs.get_mut(pid.0 as usize) else {
                return;
            };
            if slot.done.get() {
                return;
            }
            slot.fut.take()
        };
        // A stale wake can target a process whose future is already gone;
        // those are dropped here.
        let Some(mut fut) = fut else { return };
        self.inner.st.borrow_mut().current = Some(pid);
        let mut cx = Context::from_waker(Waker::noop());
        let poll = fut.as_mut().poll(&mut cx);
        self.inner.st.borrow_mut().current = None;
        match poll {
            Poll::Ready(()) => {
                let waiters = {
                    let mut procs = self.inner.procs.borrow_mut();
                    let slot = &mut procs[pid.0 as usize];
                    slot.done.set(true);
                    slot.wait_note.clear();
                    std::mem::take(&mut slot.join_waiters)
                };
                for (wpid, flag) in waiters {
                    self.schedule_wake(wpid, 0, Some(flag));
                }
            }
            Poll::Pending => {
                self.inner.procs.borrow_mut()[pid.0 as usize].fut = Some(fut);
            }
        }
    }

    fn register_waiter(&self, id: SignalId, edge: EdgeKind, pid: ProcId, fired: Rc<Cell<bool>>) {
        let mut st = self.inner.st.borrow_mut();
        let name = st.signals[id.0 as usize].name.clone();
        st.signals[id.0 as usize].waiters.push(Waiter { edge, pid, fired });
        drop(st);
        self.set_wait_note(pid, format!("edge {edge:?} on {name}"));
    }

    fn deregister_waiter(&self, id: SignalId, fired: &Rc<Cell<bool>>) {
        let mut st = self.inner.st.borrow_mut();
        st.signals[id.0 as usize]
            .waiters
            .retain(|w| !Rc::ptr_eq(&w.fired, fired));
    }
}

impl Default for Sim {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for Sim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let st = self.inner.st.borrow();
        write!(
            f,
            "Sim {{ now: {}, pending: {}, signals: {} }}",
            st.now,
            st.queue.len(),
            st.signals.len()
        )
    }
}

/// Handle to one registered signal.
#[derive(Clone)]
pub struct SignalRef {
    sim: Sim,
    id: SignalId,
}

impl SignalRef {
    pub fn name(&self) -> String {
        self.sim.inner.st.borrow().signals[self.id.0 as usize]
            .name
            .to_string()
    }

    pub fn width(&self) -> u32 {
        self.sim.inner.st.borrow().signals[self.id.0 as usize].width
    }

    /// Current value. Reads see the value as of the last executed event.
    pub fn read(&self) -> u64 {
        self.sim.inner.st.borrow().signals[self.id.0 as usize].value
    }

    pub fn last_change(&self) -> SimTime {
        self.sim.inner.st.borrow().signals[self.id.0 as usize].last_change
    }

    /// Number of value changes since time zero.
    pub fn changes(&self) -> u64 {
        self.sim.inner.st.borrow().signals[self.id.0 as usize].changes
    }

    /// Schedules a value change after `delay` ticks. Within one timestep
    /// the last write wins by queue order. Driving a value that does not
    /// fit the declared width is rejected.
    pub fn drive(&self, value: u64, delay: u64) -> Result<EventId, SimError> {
        let label: Rc<str> = Rc::from(self.sim.current_path());
        let mut st = self.sim.inner.st.borrow_mut();
        let sig = &st.signals[self.id.0 as usize];
        if sig.width < 64 && value >> sig.width != 0 {
            return Err(SimError::WidthViolation {
                name: sig.name.to_string(),
                width: sig.width,
                value,
            });
        }
        let at = st.now + delay;
        Ok(Sim::push_event(
            &mut st,
            at,
            label,
            Action::Drive {
                signal: self.id,
                value,
            },
        ))
    }

    /// Suspends the calling process until the selected edge occurs.
    /// Resolves to the time of the change. Must run inside a kernel
    /// process.
    pub fn wait_edge(&self, edge: EdgeKind) -> EdgeWait {
        EdgeWait {
            sig: self.clone(),
            edge,
            fired: Rc::new(Cell::new(false)),
            registered: false,
        }
    }

    /// Like [`wait_edge`](Self::wait_edge) but gives up after `ticks`,
    /// measured from the first poll.
    pub fn wait_edge_timeout(&self, edge: EdgeKind, ticks: u64) -> EdgeWaitTimeout {
        EdgeWaitTimeout {
            sig: self.clone(),
            edge,
            ticks,
            fired: Rc::new(Cell::new(false)),
            timer: Rc::new(Cell::new(false)),
            armed: false,
        }
    }

    pub fn id(&self) -> SignalId {
        self.id
    }
}

impl fmt::Debug for SignalRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SignalRef({} = {:#x})", self.name(), self.read())
    }
}

/// Handle returned by [`Sim::spawn`].
pub struct ProcHandle {
    sim: Sim,
    pid: ProcId,
    done: Rc<Cell<bool>>,
}

impl ProcHandle {
    pub fn is_done(&self) -> bool {
        self.done.get()
    }

    pub fn pid(&self) -> ProcId {
        self.pid
    }

    /// Waits for the process to finish. Must run inside a kernel process.
    pub fn join(&self) -> JoinWait {
        JoinWait {
            sim: self.sim.clone(),
            pid: self.pid,
            done: self.done.clone(),
            fired: Rc::new(Cell::new(false)),
            registered: false,
        }
    }
}

pub struct EdgeWait {
    sig: SignalRef,
    edge: EdgeKind,
    fired: Rc<Cell<bool>>,
    registered: bool,
}

impl Future for EdgeWait {
    type Output = SimTime;

    fn poll(mut self: Pin<&mut Self>, _cx: &mut Context<'_>) -> Poll<SimTime> {
        if self.fired.get() {
            return Poll::Ready(self.sig.sim.now());
        }
        if !self.registered {
            let pid = self
                .sig
                .sim
                .current_pid()
                .expect("wait_edge outside a kernel process");
            self.sig
                .sim
                .register_waiter(self.sig.id, self.edge, pid, self.fired.clone());
            self.registered = true;
        }
        Poll::Pending
    }
}

pub struct EdgeWaitTimeout {
    sig: SignalRef,
    edge: EdgeKind,
    ticks: u64,
    fired: Rc<Cell<bool>>,
    timer: Rc<Cell<bool>>,
    armed: bool,
}

impl Future for EdgeWaitTimeout {
    type Output = Result<SimTime, WaitTimeout>;

    fn poll(self: Pin<&mut Self>, _cx: &mut Context<'_>) -> Poll<Self::Output> {
        let me = self.get_mut();
        if me.fired.get() {
            return Poll::Ready(Ok(me.sig.sim.now()));
        }
        if me.timer.get() {
            me.sig.sim.deregister_waiter(me.sig.id, &me.fired);
            return Poll::Ready(Err(WaitTimeout {
                at: me.sig.sim.now(),
            }));
        }
        if !me.armed {
            let pid = me
                .sig
                .sim
                .current_pid()
                .expect("wait_edge_timeout outside a kernel process");
            me.sig
                .sim
                .register_waiter(me.sig.id, me.edge, pid, me.fired.clone());
            me.sig.sim.schedule_wake(pid, me.ticks, Some(me.timer.clone()));
            me.armed = true;
        }
        Poll::Pending
    }
}

pub struct Delay {
    sim: Sim,
    ticks: u64,
    fired: Rc<Cell<bool>>,
    armed: bool,
}

impl Future for Delay {
    type Output = SimTime;

    fn poll(mut self: Pin<&mut Self>, _cx: &mut Context<'_>) -> Poll<SimTime> {
        if self.fired.get() {
            return Poll::Ready(self.sim.now());
        }
        if !self.armed {
            let pid = self.sim.current_pid().expect("delay outside a kernel process");
            let until = self.sim.now() + self.ticks;
            self.sim.schedule_wake(pid, self.ticks, Some(self.fired.clone()));
            self.sim.set_wait_note(pid, format!("delay until {until}"));
            self.armed = true;
        }
        Poll::Pending
    }
}

pub struct JoinWait {
    sim: Sim,
    pid: ProcId,
    done: Rc<Cell<bool>>,
    fired: Rc<Cell<bool>>,
    registered: bool,
}

impl Future for JoinWait {
    type Output = ();

    fn poll(mut self: Pin<&mut Self>, _cx: &mut Context<'_>) -> Poll<()> {
        if self.done.get() || self.fired.get() {
            return Poll::Ready(());
        }
        if !self.registered {
            let waiter = self
                .sim
                .current_pid()
                .expect("join outside a kernel process");
            let target_path = {
                let mut procs = self.sim.inner.procs.borrow_mut();
                let slot = &mut procs[self.pid.0 as usize];
                slot.join_waiters.push((waiter, self.fired.clone()));
                slot.path.clone()
            };
            self.sim.set_wait_note(waiter, format!("join {target_path}"));
            self.registered = true;
        }
        Poll::Pending
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::RefCell;

    #[test]
    fn signal_registration_and_lookup() {
        let sim = Sim::new();
        let s = sim.add_signal("top.clk", 1).unwrap();
        assert_eq!(s.name(), "top.clk");
        assert_eq!(s.width(), 1);
        assert_eq!(s.read(), 0);
        assert_eq!(sim.signal("top.clk").unwrap().read(), 0);
        assert!(matches!(
            sim.signal("top.nope"),
            Err(SimError::UnknownSignal(_))
        ));
        assert!(matches!(
            sim.add_signal("top.clk", 1),
            Err(SimError::DuplicateSignal(_))
        ));
        assert!(matches!(sim.add_signal("w0", 0), Err(SimError::WidthRange(0))));
        assert!(matches!(
            sim.add_signal("w65", 65),
            Err(SimError::WidthRange(65))
        ));
    }

    #[test]
    fn drive_rejects_values_wider_than_signal() {
        let sim = Sim::new();
        let s = sim.add_signal("bus.addr", 8).unwrap();
        assert!(s.drive(0xFF, 0).is_ok());
        let err = s.drive(0x100, 0).unwrap_err();
        assert!(matches!(err, SimError::WidthViolation { width: 8, .. }));
        let wide = sim.add_signal("bus.q", 64).unwrap();
        assert!(wide.drive(u64::MAX, 0).is_ok());
    }

    #[test]
    fn run_until_returns_last_executed_event_time() {
        let sim = Sim::new();
        let s = sim.add_signal("s", 8).unwrap();
        s.drive(1, 10).unwrap();
        s.drive(2, 20).unwrap();
        assert_eq!(sim.run_until(SimTime::from_ticks(5)), SimTime::ZERO);
        assert_eq!(sim.run_until(SimTime::from_ticks(15)), SimTime::from_ticks(10));
        assert_eq!(s.read(), 1);
        assert_eq!(sim.run_until(SimTime::from_ticks(100)), SimTime::from_ticks(20));
        assert_eq!(s.read(), 2);
        // Queue now empty: reports the current time.
        assert_eq!(sim.run_until(SimTime::from_ticks(200)), SimTime::from_ticks(20));
    }

    #[test]
    fn same_timestep_drives_apply_in_insertion_order() {
        let sim = Sim::new();
        let s = sim.add_signal("s", 8).unwrap();
        s.drive(5, 10).unwrap();
        s.drive(9, 10).unwrap();
        sim.run_until(SimTime::from_ticks(10));
        assert_eq!(s.read(), 9, "last writer in a timestep wins");
    }

    #[test]
    fn clock_produces_edges_at_expected_times() {
        let sim = Sim::new();
        let clk = sim.add_signal("clk", 1).unwrap();
        sim.start_clock(&clk, ClockSpec::new(10).unwrap());
        let edges = Rc::new(RefCell::new(Vec::new()));
        let log = edges.clone();
        let c = clk.clone();
        sim.spawn("watcher", async move {
            for _ in 0..3 {
                let t = c.wait_edge(EdgeKind::Rising).await;
                log.borrow_mut().push(t.ticks());
            }
        });
        sim.run_until(SimTime::from_ticks(40));
        assert_eq!(*edges.borrow(), vec![5, 15, 25]);
    }

    #[test]
    fn clock_spec_rejects_odd_or_tiny_periods() {
        assert!(ClockSpec::new(0).is_err());
        assert!(ClockSpec::new(7).is_err());
        assert!(ClockSpec::new(2).is_ok());
    }

    #[test]
    fn waiters_wake_exactly_once_per_change() {
        let sim = Sim::new();
        let s = sim.add_signal("s", 4).unwrap();
        let wakes = Rc::new(Cell::new(0u64));
        let n = wakes.clone();
        let sc = s.clone();
        sim.spawn("counter", async move {
            loop {
                sc.wait_edge(EdgeKind::Any).await;
                n.set(n.get() + 1);
            }
        });
        s.drive(1, 10).unwrap();
        s.drive(1, 20).unwrap(); // same value: no change, no wake
        s.drive(2, 30).unwrap();
        s.drive(3, 40).unwrap();
        sim.run_until(SimTime::from_ticks(100));
        assert_eq!(s.changes(), 3);
        assert_eq!(wakes.get(), 3, "one notification per value change");
    }

    #[test]
    fn waiter_fires_once_even_if_value_changes_twice_in_a_timestep() {
        // Matching deregisters the waiter, so a second change in the same
        // timestep finds nobody registered; the wake is not duplicated.
        let sim = Sim::new();
        let s = sim.add_signal("s", 4).unwrap();
        let wakes = Rc::new(Cell::new(0u64));
        let n = wakes.clone();
        let sc = s.clone();
        sim.spawn("counter", async move {
            loop {
                sc.wait_edge(EdgeKind::Any).await;
                n.set(n.get() + 1);
            }
        });
        s.drive(2, 30).unwrap();
        s.drive(3, 30).unwrap();
        sim.run_until(SimTime::from_ticks(100));
        assert_eq!(s.changes(), 2);
        assert_eq!(wakes.get(), 1);
        assert_eq!(s.read(), 3);
    }

    #[test]
    fn falling_and_rising_select_lsb_transitions() {
        let sim = Sim::new();
        let s = sim.add_signal("s", 1).unwrap();
        let seen = Rc::new(RefCell::new(Vec::new()));
        let f = seen.clone();
        let sc = s.clone();
        sim.spawn("fall", async move {
            let t = sc.wait_edge(EdgeKind::Falling).await;
            f.borrow_mut().push(("fall", t.ticks()));
        });
        let r = seen.clone();
        let sc = s.clone();
        sim.spawn("rise", async move {
            let t = sc.wait_edge(EdgeKind::Rising).await;
            r.borrow_mut().push(("rise", t.ticks()));
        });
        s.drive(1, 10).unwrap();
        s.drive(0, 20).unwrap();
        sim.run_until(SimTime::from_ticks(50));
        assert_eq!(*seen.borrow(), vec![("rise", 10), ("fall", 20)]);
    }

    #[test]
    fn delay_and_spawn_join() {
        let sim = Sim::new();
        let order = Rc::new(RefCell::new(Vec::new()));
        let o1 = order.clone();
        let s1 = sim.clone();
        let child = sim.spawn("child", async move {
            s1.delay(30).await;
            o1.borrow_mut().push("child");
        });
        let o2 = order.clone();
        let s2 = sim.clone();
        sim.spawn("parent", async move {
            s2.delay(5).await;
            o2.borrow_mut().push("parent-before-join");
            child.join().await;
            o2.borrow_mut().push("parent-after-join");
            assert_eq!(s2.now().ticks(), 30);
        });
        sim.run_until(SimTime::from_ticks(100));
        assert_eq!(
            *order.borrow(),
            vec!["parent-before-join", "child", "parent-after-join"]
        );
    }

    #[test]
    fn join_on_finished_process_returns_immediately() {
        let sim = Sim::new();
        let done = Rc::new(Cell::new(false));
        let child = sim.spawn("quick", async move {});
        sim.run_until(SimTime::from_ticks(1));
        assert!(child.is_done());
        let d = done.clone();
        sim.spawn("late", async move {
            child.join().await;
            d.set(true);
        });
        sim.run_until(SimTime::from_ticks(2));
        assert!(done.get());
    }

    #[test]
    fn wait_edge_timeout_reports_both_outcomes() {
        let sim = Sim::new();
        let s = sim.add_signal("s", 1).unwrap();
        let results = Rc::new(RefCell::new(Vec::new()));
        let r = results.clone();
        let sc = s.clone();
        sim.spawn("waiter", async move {
            let hit = sc.wait_edge_timeout(EdgeKind::Rising, 50).await;
            r.borrow_mut().push(hit.map(|t| t.ticks()));
            let miss = sc.wait_edge_timeout(EdgeKind::Falling, 5).await;
            r.borrow_mut().push(miss.map(|t| t.ticks()));
        });
        s.drive(1, 20).unwrap();
        sim.run_until(SimTime::from_ticks(100));
        assert_eq!(
            *results.borrow(),
            vec![Ok(20), Err(WaitTimeout { at: SimTime::from_ticks(25) })]
        );
    }

    #[test]
    fn scheduled_calls_run_at_their_fire_time() {
        let sim = Sim::new();
        let at = Rc::new(Cell::new(0u64));
        let a = at.clone();
        sim.schedule_in("cb", 42, move |s| a.set(s.now().ticks()));
        sim.run_until(SimTime::from_ticks(100));
        assert_eq!(at.get(), 42);
    }

    #[test]
    fn stop_request_halts_between_events() {
        let sim = Sim::new();
        let s = sim.add_signal("s", 8).unwrap();
        let sim2 = sim.clone();
        sim.schedule_in("stopper", 10, move |_| sim2.request_stop());
        s.drive(7, 20).unwrap();
        let t = sim.run_until(SimTime::from_ticks(100));
        assert_eq!(t, SimTime::from_ticks(10));
        assert_eq!(s.read(), 0, "event after the stop did not execute");
    }

    #[test]
    fn identical_programs_hash_identically() {
        fn program() -> u64 {
            let sim = Sim::new();
            let clk = sim.add_signal("clk", 1).unwrap();
            let data = sim.add_signal("data", 8).unwrap();
            sim.start_clock(&clk, ClockSpec::new(10).unwrap());
            let d = data.clone();
            let c = clk.clone();
            sim.spawn("writer", async move {
                for i in 0..20u64 {
                    c.wait_edge(EdgeKind::Rising).await;
                    d.drive(i & 0xFF, 0).unwrap();
                }
            });
            sim.run_until(SimTime::from_ticks(500));
            sim.teardown();
            sim.trace_hash()
        }
        assert_eq!(program(), program());
    }

    #[test]
    fn hash_distinguishes_data_only_differences() {
        fn program(v: u64) -> u64 {
            let sim = Sim::new();
            let data = sim.add_signal("data", 8).unwrap();
            data.drive(v, 10).unwrap();
            sim.run_until(SimTime::from_ticks(20));
            sim.trace_hash()
        }
        assert_ne!(program(1), program(2));
    }

    #[test]
    fn log_lines_carry_time_seq_and_label() {
        let sim = Sim::new();
        sim.capture_log();
        let s = sim.add_signal("s", 1).unwrap();
        let sc = s.clone();
        sim.spawn("proc.a", async move {
            sc.wait_edge(EdgeKind::Rising).await;
        });
        s.drive(1, 15).unwrap();
        sim.run_until(SimTime::from_ticks(50));
        let log = sim.take_log();
        // spawn wake, drive, waiter wake
        assert_eq!(log[0], "0:0:proc.a");
        assert!(log.iter().any(|l| l == "15:1:main"));
        assert!(log.iter().any(|l| l.starts_with("15:") && l.ends_with(":proc.a")));
        for line in &log {
            assert_eq!(line.split(':').count(), 3);
        }
    }

    #[test]
    fn live_waits_describe_suspended_processes() {
        let sim = Sim::new();
        let s = sim.add_signal("irq", 1).unwrap();
        let sc = s.clone();
        sim.spawn("env.watcher", async move {
            sc.wait_edge(EdgeKind::Rising).await;
        });
        sim.run_until(SimTime::from_ticks(10));
        let live = sim.live_waits();
        assert_eq!(live.len(), 1);
        assert_eq!(live[0].0, "env.watcher");
        assert!(live[0].1.contains("irq"));
    }

    #[test]
    fn run_while_stops_when_condition_clears() {
        let sim = Sim::new();
        let flag = Rc::new(Cell::new(true));
        let f = flag.clone();
        sim.schedule_in("clear", 30, move |_| f.set(false));
        let s = sim.add_signal("s", 1).unwrap();
        s.drive(1, 60).unwrap();
        let out = sim.run_while(|| flag.get(), SimTime::from_ticks(1000));
        assert_eq!(out, RunOutcome::ConditionMet(SimTime::from_ticks(30)));
        let out = sim.run_while(|| true, SimTime::from_ticks(40));
        assert_eq!(out, RunOutcome::LimitReached(SimTime::from_ticks(30)));
        let out = sim.run_while(|| true, SimTime::from_ticks(1000));
        assert_eq!(out, RunOutcome::Quiescent(SimTime::from_ticks(60)));
    }
}
