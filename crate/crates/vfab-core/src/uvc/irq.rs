//! Interrupt checker: every rise on the interrupt line must match an
//! armed expectation, and every expectation whose predicate held at arm
//! time must see a rise inside its window.

use std::cell::RefCell;
use std::rc::Rc;

use crate::sim::{EdgeKind, Sim, SignalRef, SimTime};
use crate::tb::{CompId, CompKind, FailKind, FailureSink, Tb, TbError};

/// One armed expectation. `window` is (min, max) ticks after `armed_at`
/// inside which the rise must fall. `required` records whether the
/// enabling predicate held when the expectation was armed; rises only
/// match required expectations, so a rise while nothing required is
/// armed is spurious by definition.
#[derive(Debug, Clone)]
pub struct IrqExpectation {
    pub desc: String,
    pub armed_at: SimTime,
    pub window: (u64, u64),
    pub required: bool,
    pub met: bool,
}

struct ChkState {
    expectations: Vec<IrqExpectation>,
    rises: Vec<SimTime>,
}

/// Watches one interrupt line. Arm expectations as stimulus proceeds
/// (typically from a scoreboard callback at output-frame completion),
/// call [`IrqChecker::start`] once in the run phase and
/// [`IrqChecker::check`] in the check phase.
#[derive(Clone)]
pub struct IrqChecker {
    sim: Sim,
    path: String,
    line: SignalRef,
    failures: FailureSink,
    state: Rc<RefCell<ChkState>>,
}

impl IrqChecker {
    pub fn new(sim: &Sim, path: &str, line: SignalRef, failures: FailureSink) -> IrqChecker {
        IrqChecker {
            sim: sim.clone(),
            path: path.to_string(),
            line,
            failures,
            state: Rc::new(RefCell::new(ChkState {
                expectations: Vec::new(),
                rises: Vec::new(),
            })),
        }
    }

    /// Registers the checker as a component and returns it.
    pub fn build(
        tb: &mut Tb,
        parent: CompId,
        name: &str,
        line: SignalRef,
    ) -> Result<IrqChecker, TbError> {
        let id = tb.add_child(parent, name, CompKind::Checker)?;
        let path = tb.tree.path(id).to_string();
        Ok(IrqChecker::new(&tb.sim, &path, line, tb.failures.clone()))
    }

    /// Arms an expectation starting now. `required` is the value of the
    /// enabling predicate at this instant.
    pub fn arm(&self, desc: &str, window: (u64, u64), required: bool) {
        self.state.borrow_mut().expectations.push(IrqExpectation {
            desc: desc.to_string(),
            armed_at: self.sim.now(),
            window,
            required,
            met: false,
        });
    }

    /// Spawns the rise watcher.
    pub fn start(&self) {
        let me = self.clone();
        self.sim.clone().spawn(&self.path, async move {
            loop {
                let t = me.line.wait_edge(EdgeKind::Rising).await;
                me.on_rise(t);
            }
        });
    }

    fn on_rise(&self, t: SimTime) {
        let mut st = self.state.borrow_mut();
        st.rises.push(t);
        let matched = st.expectations.iter_mut().find(|e| {
            e.required && !e.met && t >= e.armed_at + e.window.0 && t <= e.armed_at + e.window.1
        });
        match matched {
            Some(e) => e.met = true,
            None => self.failures.fail(
                &self.path,
                FailKind::IrqSpurious,
                format!("interrupt rise at {t} matched no armed expectation"),
            ),
        }
    }

    /// Check-phase sweep: report every required expectation that never
    /// saw its rise.
    pub fn check(&self) {
        for e in &self.state.borrow().expectations {
            if e.required && !e.met {
                self.failures.fail(
                    &self.path,
                    FailKind::IrqMissing,
                    format!(
                        "expected interrupt `{}` within {}..{} ticks after {} never came",
                        e.desc, e.window.0, e.window.1, e.armed_at
                    ),
                );
            }
        }
    }

    pub fn rise_count(&self) -> usize {
        self.state.borrow().rises.len()
    }

    pub fn expectations(&self) -> Vec<IrqExpectation> {
        self.state.borrow().expectations.clone()
    }
}
