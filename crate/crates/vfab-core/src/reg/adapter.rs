//! Frontdoor access: turning model-level register operations into bus
//! transactions through a pluggable port, with read self-checking
//! against the mirror.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;

use crate::seq::Sequencer;
use crate::sim::LocalBoxFuture;
use crate::tb::{FailKind, FailureSink};
use crate::uvc::{BusKind, BusResp, BusTxn};

use super::{AddressMap, RegError, RegId, RegModel};

/// Anything that can carry one bus transaction to completion. The
/// frontdoor is written against this, so the same register sequence
/// runs on a live agent, a quick loopback, or whatever a test plugs in.
pub trait FrontdoorPort {
    fn txn(&self, txn: BusTxn) -> LocalBoxFuture<BusTxn>;
}

/// Port that forwards each transaction to a bus agent's sequencer and
/// waits for the driver's response.
pub struct SequencerPort {
    sqr: Rc<Sequencer<BusTxn>>,
}

impl SequencerPort {
    pub fn new(sqr: Rc<Sequencer<BusTxn>>) -> SequencerPort {
        SequencerPort { sqr }
    }
}

impl FrontdoorPort for SequencerPort {
    fn txn(&self, txn: BusTxn) -> LocalBoxFuture<BusTxn> {
        let sqr = self.sqr.clone();
        Box::pin(async move { sqr.send(txn).await })
    }
}

#[derive(Default)]
struct LoopState {
    store: BTreeMap<u64, u32>,
    err_addrs: BTreeSet<u64>,
    stuck0: BTreeMap<u64, u32>,
    trace: Vec<BusTxn>,
}

/// Zero-latency bus that stores words in a map. Completes every
/// transaction immediately, records a trace, and can fault individual
/// addresses: error responses, or write bits that stick at zero.
#[derive(Clone, Default)]
pub struct LoopbackBusPort {
    state: Rc<RefCell<LoopState>>,
}

impl LoopbackBusPort {
    pub fn new() -> LoopbackBusPort {
        LoopbackBusPort::default()
    }

    pub fn preload(&self, addr: u64, value: u32) {
        self.state.borrow_mut().store.insert(addr, value);
    }

    pub fn mark_error(&self, addr: u64) {
        self.state.borrow_mut().err_addrs.insert(addr);
    }

    /// Write bits in `mask` at `addr` are forced to zero, like a wire
    /// stuck low inside the device.
    pub fn stuck_at_zero(&self, addr: u64, mask: u32) {
        *self.state.borrow_mut().stuck0.entry(addr).or_insert(0) |= mask;
    }

    pub fn trace(&self) -> Vec<BusTxn> {
        self.state.borrow().trace.clone()
    }

    pub fn peek(&self, addr: u64) -> Option<u32> {
        self.state.borrow().store.get(&addr).copied()
    }
}

impl FrontdoorPort for LoopbackBusPort {
    fn txn(&self, mut txn: BusTxn) -> LocalBoxFuture<BusTxn> {
        let mut st = self.state.borrow_mut();
        let addr = txn.addr as u64;
        if st.err_addrs.contains(&addr) {
            txn.resp = BusResp::Error;
        } else {
            txn.resp = BusResp::Ok;
            match txn.kind {
                BusKind::Write => {
                    let stuck = st.stuck0.get(&addr).copied().unwrap_or(0);
                    st.store.insert(addr, txn.wdata & !stuck);
                }
                BusKind::Read => {
                    txn.rdata = st.store.get(&addr).copied().unwrap_or(0);
                }
            }
        }
        st.trace.push(txn);
        Box::pin(std::future::ready(txn))
    }
}

/// Name-driven register access. Addresses come from the bound map at
/// the moment of access; reads are checked against the mirror and any
/// disagreement lands in the failure list with register and bit names.
pub struct Frontdoor {
    model: RegModel,
    map: Rc<AddressMap>,
    port: Rc<dyn FrontdoorPort>,
    failures: FailureSink,
    source: String,
}

impl Frontdoor {
    pub fn new(
        model: RegModel,
        map: Rc<AddressMap>,
        port: Rc<dyn FrontdoorPort>,
        failures: FailureSink,
        source: &str,
    ) -> Frontdoor {
        Frontdoor {
            model,
            map,
            port,
            failures,
            source: source.to_string(),
        }
    }

    pub fn model(&self) -> &RegModel {
        &self.model
    }

    pub fn map(&self) -> &AddressMap {
        &self.map
    }

    pub(crate) fn fail(&self, kind: FailKind, msg: String) {
        self.failures.fail(&self.source, kind, msg);
    }

    fn addr_of(&self, id: RegId) -> Option<u32> {
        match self.map.address_of(id) {
            Some(a) => Some(u32::try_from(a).expect("register address beyond the 32-bit bus")),
            None => {
                self.fail(
                    FailKind::RegAccess,
                    format!(
                        "register {} is not reachable through map {}",
                        self.model.path(id),
                        self.map.name()
                    ),
                );
                None
            }
        }
    }

    /// Writes the register; the mirror moves only when the bus says Ok.
    pub async fn write(&self, id: RegId, value: u32) -> BusResp {
        let Some(addr) = self.addr_of(id) else {
            return BusResp::Error;
        };
        let txn = self.port.txn(BusTxn::write(addr, value)).await;
        match txn.resp {
            BusResp::Ok => self.model.apply_write(id, value),
            BusResp::Error => self.fail(
                FailKind::RegAccess,
                format!(
                    "write of {value:#010x} to {} at {addr:#010x} returned a bus error",
                    self.model.path(id)
                ),
            ),
        }
        txn.resp
    }

    /// Reads the register and self-checks the observed value against
    /// the mirror on its RW and W1C bits.
    pub async fn read(&self, id: RegId) -> (u32, BusResp) {
        let Some(addr) = self.addr_of(id) else {
            return (0, BusResp::Error);
        };
        let txn = self.port.txn(BusTxn::read(addr)).await;
        match txn.resp {
            BusResp::Ok => {
                let chk = self.model.apply_read_observed(id, txn.rdata);
                if chk.mismatch != 0 {
                    self.fail(
                        FailKind::RegSelfCheck,
                        format!(
                            "register {} self-check failed: expected {:#010x}, observed {:#010x} on bits [{}]",
                            self.model.path(id),
                            chk.expected,
                            txn.rdata & chk.checked_mask,
                            bit_list(chk.mismatch)
                        ),
                    );
                }
            }
            BusResp::Error => self.fail(
                FailKind::RegAccess,
                format!(
                    "read of {} at {addr:#010x} returned a bus error",
                    self.model.path(id)
                ),
            ),
        }
        (txn.rdata, txn.resp)
    }

    pub async fn write_by_name(&self, path: &str, value: u32) -> Result<BusResp, RegError> {
        let id = self.model.lookup(path)?;
        Ok(self.write(id, value).await)
    }

    pub async fn read_by_name(&self, path: &str) -> Result<(u32, BusResp), RegError> {
        let id = self.model.lookup(path)?;
        Ok(self.read(id).await)
    }
}

/// Renders set bits as "0, 3, 17" for failure messages.
pub(crate) fn bit_list(mask: u32) -> String {
    let mut out = String::new();
    for b in 0..32 {
        if mask & (1 << b) != 0 {
            if !out.is_empty() {
                out.push_str(", ");
            }
            out.push_str(&b.to_string());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::toy_block;
    use super::*;
    use crate::sim::sync::expect_ready;
    use crate::sim::{ClockSpec, EdgeKind, Sim, SimTime};
    use crate::tb::FailureSink;

    fn rig() -> (RegModel, Rc<AddressMap>, LoopbackBusPort, FailureSink, Frontdoor, Sim) {
        let sim = Sim::new();
        let model = RegModel::build(vec![toy_block()]).unwrap();
        let map = Rc::new(AddressMap::new("ip", 0x100, &model, &[("blk", 0)]).unwrap());
        let port = LoopbackBusPort::new();
        let failures = FailureSink::new(&sim);
        let fd = Frontdoor::new(
            model.clone(),
            map.clone(),
            Rc::new(port.clone()),
            failures.clone(),
            "tb.env.reg",
        );
        (model, map, port, failures, fd, sim)
    }

    #[test]
    fn write_then_read_round_trips_and_keeps_the_mirror() {
        let (model, _map, port, failures, fd, _sim) = rig();
        let gain = model.lookup("blk.GAIN").unwrap();

        assert_eq!(expect_ready(fd.write(gain, 0x20)), BusResp::Ok);
        assert_eq!(model.mirror(gain), Some(0x20));
        assert_eq!(port.peek(0x104), Some(0x20));

        let (got, resp) = expect_ready(fd.read(gain));
        assert_eq!((got, resp), (0x20, BusResp::Ok));
        assert!(failures.snapshot().is_empty());
    }

    #[test]
    fn read_self_check_names_register_and_bits() {
        let (model, _map, port, failures, fd, _sim) = rig();
        let gain = model.lookup("blk.GAIN").unwrap();

        expect_ready(fd.write(gain, 0x20));
        port.preload(0x104, 0x21);
        let (got, _) = expect_ready(fd.read(gain));
        assert_eq!(got, 0x21);

        let fails = failures.snapshot();
        assert_eq!(fails.len(), 1);
        assert_eq!(fails[0].kind, FailKind::RegSelfCheck);
        assert!(fails[0].msg.contains("blk.GAIN"), "{}", fails[0].msg);
        assert!(fails[0].msg.contains("bits [0]"), "{}", fails[0].msg);
        assert_eq!(fails[0].source, "tb.env.reg");
    }

    #[test]
    fn bus_error_reports_access_failure_and_leaves_mirror_alone() {
        let (model, _map, port, failures, fd, _sim) = rig();
        let gain = model.lookup("blk.GAIN").unwrap();
        expect_ready(fd.write(gain, 0x33));

        port.mark_error(0x104);
        assert_eq!(expect_ready(fd.write(gain, 0x7F)), BusResp::Error);
        assert_eq!(model.mirror(gain), Some(0x33));
        let (_, resp) = expect_ready(fd.read(gain));
        assert_eq!(resp, BusResp::Error);

        let fails = failures.snapshot();
        assert_eq!(fails.len(), 2);
        assert!(fails.iter().all(|f| f.kind == FailKind::RegAccess));
        assert!(fails[0].msg.contains("bus error"));
    }

    #[test]
    fn stuck_write_bit_is_caught_on_the_next_read() {
        let (model, _map, port, failures, fd, _sim) = rig();
        let gain = model.lookup("blk.GAIN").unwrap();
        port.stuck_at_zero(0x104, 0x1);

        expect_ready(fd.write(gain, 0x21));
        expect_ready(fd.read(gain));

        let fails = failures.snapshot();
        assert_eq!(fails.len(), 1);
        assert!(fails[0].msg.contains("bits [0]"), "{}", fails[0].msg);
    }

    #[test]
    fn unmapped_register_fails_without_bus_traffic() {
        let sim = Sim::new();
        let model = RegModel::build(vec![
            toy_block(),
            (
                "spare".to_string(),
                vec![super::super::RegisterDef::new("R", 0, vec![])],
            ),
        ])
        .unwrap();
        let map = Rc::new(AddressMap::new("ip", 0, &model, &[("blk", 0)]).unwrap());
        let port = LoopbackBusPort::new();
        let failures = FailureSink::new(&sim);
        let fd = Frontdoor::new(
            model.clone(),
            map,
            Rc::new(port.clone()),
            failures.clone(),
            "tb.env.reg",
        );
        let spare = model.lookup("spare.R").unwrap();
        assert_eq!(expect_ready(fd.write(spare, 1)), BusResp::Error);
        assert!(failures
            .snapshot()
            .iter()
            .any(|f| f.kind == FailKind::RegAccess && f.msg.contains("not reachable")));
        assert!(port.trace().is_empty());
    }

    #[test]
    fn sequencer_port_carries_transactions_to_a_live_responder() {
        let sim = Sim::new();
        let clk = sim.add_signal("clk", 1).unwrap();
        sim.start_clock(&clk, ClockSpec::new(10).unwrap());
        let model = RegModel::build(vec![toy_block()]).unwrap();
        let map = Rc::new(AddressMap::new("ip", 0, &model, &[("blk", 0)]).unwrap());
        let failures = FailureSink::new(&sim);
        let sqr = Sequencer::<BusTxn>::new(&sim, "tb.sqr");
        let fd = Rc::new(Frontdoor::new(
            model.clone(),
            map,
            Rc::new(SequencerPort::new(sqr.clone())),
            failures.clone(),
            "tb.seq",
        ));

        let regs = Rc::new(RefCell::new(BTreeMap::<u32, u32>::new()));
        let slave_regs = regs.clone();
        let slave_sqr = sqr.clone();
        sim.spawn("tb.drv", async move {
            loop {
                let (mut txn, rsp) = slave_sqr.next().await;
                clk.wait_edge(EdgeKind::Rising).await;
                match txn.kind {
                    BusKind::Write => {
                        slave_regs.borrow_mut().insert(txn.addr, txn.wdata);
                    }
                    BusKind::Read => {
                        txn.rdata = slave_regs.borrow().get(&txn.addr).copied().unwrap_or(0);
                    }
                }
                txn.resp = BusResp::Ok;
                rsp.respond(txn);
            }
        });

        let done = Rc::new(RefCell::new(false));
        let done2 = done.clone();
        let fd2 = fd.clone();
        sim.spawn("tb.stim", async move {
            fd2.write_by_name("blk.GAIN", 0x42).await.unwrap();
            let (got, resp) = fd2.read_by_name("blk.GAIN").await.unwrap();
            assert_eq!((got, resp), (0x42, BusResp::Ok));
            *done2.borrow_mut() = true;
        });

        sim.run_until(SimTime::from_ticks(500));
        assert!(*done.borrow());
        assert_eq!(regs.borrow().get(&0x4), Some(&0x42));
        assert!(failures.snapshot().is_empty());
        assert_eq!(model.mirror(model.lookup("blk.GAIN").unwrap()), Some(0x42));
    }
}
