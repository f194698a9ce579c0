//! SRB register-bus UVC.
//!
//! Wire protocol: the master asserts `req` with `we`/`addr`/`wdata` just
//! after a rising clock edge; the slave answers with `ack` high for
//! exactly one cycle (`rdata` and `err` valid alongside). The master
//! deasserts `req` the cycle after it samples `ack`. One transaction is
//! outstanding at a time. A master that sees no `ack` within
//! [`SRB_TIMEOUT_CYCLES`] gives up and reports the access as errored.

use std::rc::Rc;

use super::{BusKind, BusResp, BusTxn};
use crate::seq::Sequencer;
use crate::sim::{EdgeKind, Sim, SimError, SignalRef};
use crate::tb::{AnalysisPort, CompId, CompKind, FailKind, FailureSink, Tb, TbError};

/// Cycles a master waits for `ack` before declaring the bus hung.
pub const SRB_TIMEOUT_CYCLES: u32 = 64;

/// The nine wires of one SRB interface. `clk` and `rst_n` are shared
/// with the rest of the design; the rest live under a common name
/// prefix, e.g. `dut.srb.req`.
#[derive(Clone)]
pub struct SrbBundle {
    pub clk: SignalRef,
    pub rst_n: SignalRef,
    pub req: SignalRef,
    pub we: SignalRef,
    pub addr: SignalRef,
    pub wdata: SignalRef,
    pub ack: SignalRef,
    pub rdata: SignalRef,
    pub err: SignalRef,
}

impl SrbBundle {
    /// Registers the bundle's signals. Used by DUT models, which own
    /// their interface wires.
    pub fn create(
        sim: &Sim,
        prefix: &str,
        clk: &SignalRef,
        rst_n: &SignalRef,
    ) -> Result<SrbBundle, SimError> {
        Ok(SrbBundle {
            clk: clk.clone(),
            rst_n: rst_n.clone(),
            req: sim.add_signal(&format!("{prefix}.req"), 1)?,
            we: sim.add_signal(&format!("{prefix}.we"), 1)?,
            addr: sim.add_signal(&format!("{prefix}.addr"), 32)?,
            wdata: sim.add_signal(&format!("{prefix}.wdata"), 32)?,
            ack: sim.add_signal(&format!("{prefix}.ack"), 1)?,
            rdata: sim.add_signal(&format!("{prefix}.rdata"), 32)?,
            err: sim.add_signal(&format!("{prefix}.err"), 1)?,
        })
    }

    /// Looks up an existing bundle by prefix. Used by agents, which bind
    /// to wires the DUT registered.
    pub fn resolve(
        sim: &Sim,
        prefix: &str,
        clk: &str,
        rst_n: &str,
    ) -> Result<SrbBundle, SimError> {
        Ok(SrbBundle {
            clk: sim.signal(clk)?,
            rst_n: sim.signal(rst_n)?,
            req: sim.signal(&format!("{prefix}.req"))?,
            we: sim.signal(&format!("{prefix}.we"))?,
            addr: sim.signal(&format!("{prefix}.addr"))?,
            wdata: sim.signal(&format!("{prefix}.wdata"))?,
            ack: sim.signal(&format!("{prefix}.ack"))?,
            rdata: sim.signal(&format!("{prefix}.rdata"))?,
            err: sim.signal(&format!("{prefix}.err"))?,
        })
    }
}

/// Runs one master-side transaction on the bundle and returns the
/// completed item plus a timeout flag. On timeout the response is forced
/// to [`BusResp::Error`]. Shared by the SRB driver and the embedded-core
/// model, so both sides issue bit-identical waveforms.
pub async fn srb_master_txn(
    bundle: &SrbBundle,
    mut txn: BusTxn,
    timeout_cycles: u32,
) -> (BusTxn, bool) {
    bundle.clk.wait_edge(EdgeKind::Rising).await;
    bundle.req.drive(1, 0).unwrap();
    bundle
        .we
        .drive(if txn.is_write() { 1 } else { 0 }, 0)
        .unwrap();
    bundle.addr.drive(txn.addr as u64, 0).unwrap();
    bundle
        .wdata
        .drive(if txn.is_write() { txn.wdata as u64 } else { 0 }, 0)
        .unwrap();

    let mut waited = 0u32;
    let mut timed_out = false;
    loop {
        let t = bundle.clk.wait_edge(EdgeKind::Rising).await;
        waited += 1;
        if waited == 1 {
            txn.issue_time = t;
        }
        if bundle.ack.read() == 1 {
            if txn.kind == BusKind::Read {
                txn.rdata = bundle.rdata.read() as u32;
            }
            txn.resp = if bundle.err.read() == 1 {
                BusResp::Error
            } else {
                BusResp::Ok
            };
            txn.complete_time = t;
            break;
        }
        if waited >= timeout_cycles {
            txn.resp = BusResp::Error;
            txn.complete_time = t;
            timed_out = true;
            break;
        }
    }

    bundle.req.drive(0, 0).unwrap();
    bundle.we.drive(0, 0).unwrap();
    (txn, timed_out)
}

async fn srb_driver(
    bundle: SrbBundle,
    sqr: Rc<Sequencer<BusTxn>>,
    port: AnalysisPort<BusTxn>,
    failures: FailureSink,
    path: String,
    timeout_cycles: u32,
) {
    loop {
        let (txn, responder) = sqr.next().await;
        let (done, timed_out) = srb_master_txn(&bundle, txn, timeout_cycles).await;
        if timed_out {
            let dir = if done.is_write() { "write" } else { "read" };
            failures.fail(
                &path,
                FailKind::BusTimeout,
                format!(
                    "no ack within {timeout_cycles} cycles for {dir} addr {:#010x}",
                    done.addr
                ),
            );
        }
        port.publish(&done);
        responder.respond(done);
    }
}

/// Rebuilds transactions from the wires, with no knowledge of who is
/// driving them. `ack` with no outstanding request is flagged as a
/// protocol violation; a request abandoned without `ack` (master
/// timeout) is dropped, since the master reports it.
async fn srb_monitor(
    bundle: SrbBundle,
    port: AnalysisPort<BusTxn>,
    failures: FailureSink,
    path: String,
) {
    let mut pending: Option<BusTxn> = None;
    loop {
        let now = bundle.clk.wait_edge(EdgeKind::Rising).await;
        if bundle.rst_n.read() == 0 {
            pending = None;
            continue;
        }
        let req = bundle.req.read() == 1;
        let ack = bundle.ack.read() == 1;

        if req && pending.is_none() {
            let mut txn = if bundle.we.read() == 1 {
                BusTxn::write(bundle.addr.read() as u32, bundle.wdata.read() as u32)
            } else {
                BusTxn::read(bundle.addr.read() as u32)
            };
            txn.issue_time = now;
            pending = Some(txn);
        }

        if ack {
            match pending.take() {
                Some(mut txn) => {
                    if txn.kind == BusKind::Read {
                        txn.rdata = bundle.rdata.read() as u32;
                    }
                    txn.resp = if bundle.err.read() == 1 {
                        BusResp::Error
                    } else {
                        BusResp::Ok
                    };
                    txn.complete_time = now;
                    port.publish(&txn);
                }
                None => failures.fail(
                    &path,
                    FailKind::BusProtocol,
                    format!("ack asserted at {now} with no outstanding request"),
                ),
            }
        } else if pending.is_some() && !req {
            pending = None;
        }
    }
}

/// Build-time knobs for [`SrbAgent`]. `binding` is the wire-name prefix
/// of the bundle to attach to; the ConfigDB keys `is_active`, `binding`,
/// `clk_signal` and `rst_signal` override the corresponding fields per
/// agent path.
#[derive(Clone)]
pub struct SrbAgentCfg {
    pub binding: Option<String>,
    pub clk: String,
    pub rst_n: String,
    pub default_active: bool,
    pub timeout_cycles: u32,
}

impl Default for SrbAgentCfg {
    fn default() -> Self {
        SrbAgentCfg {
            binding: None,
            clk: "sys.clk".to_string(),
            rst_n: "sys.rst_n".to_string(),
            default_active: true,
            timeout_cycles: SRB_TIMEOUT_CYCLES,
        }
    }
}

/// Register-bus agent. Active agents own a driver, sequencer and
/// monitor; passive agents only the monitor. The monitor publishes
/// reconstructed transactions on `<path>.mon.txns`, the driver its
/// completed items on `<path>.drv.txns`.
pub struct SrbAgent {
    pub id: CompId,
    pub path: String,
    pub active: bool,
    pub bundle: SrbBundle,
    pub sequencer: Option<Rc<Sequencer<BusTxn>>>,
    pub mon_txns: AnalysisPort<BusTxn>,
    pub drv_txns: Option<AnalysisPort<BusTxn>>,
    timeout_cycles: u32,
}

impl SrbAgent {
    pub fn build(
        tb: &mut Tb,
        parent: CompId,
        name: &str,
        cfg: SrbAgentCfg,
    ) -> Result<SrbAgent, TbError> {
        let id = tb.add_child(parent, name, CompKind::Agent)?;
        let path = tb.tree.path(id).to_string();

        let active = tb
            .cfg
            .get_bool(&path, "is_active")
            .unwrap_or(cfg.default_active);
        let binding = tb
            .cfg
            .get_str(&path, "binding")
            .or(cfg.binding)
            .ok_or_else(|| TbError::MissingBinding(path.clone()))?;
        let clk = tb.cfg.get_str(&path, "clk_signal").unwrap_or(cfg.clk);
        let rst_n = tb.cfg.get_str(&path, "rst_signal").unwrap_or(cfg.rst_n);
        let bundle = SrbBundle::resolve(&tb.sim, &binding, &clk, &rst_n)?;

        let mon = tb.add_child(id, "mon", CompKind::Monitor)?;
        let mon_txns = tb.add_port::<BusTxn>(mon, "txns")?;

        let (sequencer, drv_txns) = if active {
            let drv = tb.add_child(id, "drv", CompKind::Driver)?;
            tb.add_child(id, "sqr", CompKind::Sequencer)?;
            let drv_txns = tb.add_port::<BusTxn>(drv, "txns")?;
            let sqr = Sequencer::new(&tb.sim, &format!("{path}.sqr"));
            (Some(sqr), Some(drv_txns))
        } else {
            (None, None)
        };

        Ok(SrbAgent {
            id,
            path,
            active,
            bundle,
            sequencer,
            mon_txns,
            drv_txns,
            timeout_cycles: cfg.timeout_cycles,
        })
    }

    /// Spawns the agent's run-phase processes.
    pub fn start(&self, tb: &Tb) {
        let mon_path = format!("{}.mon", self.path);
        tb.sim.spawn(
            &mon_path,
            srb_monitor(
                self.bundle.clone(),
                self.mon_txns.clone(),
                tb.failures.clone(),
                mon_path.clone(),
            ),
        );
        if let (Some(sqr), Some(port)) = (&self.sequencer, &self.drv_txns) {
            let drv_path = format!("{}.drv", self.path);
            tb.sim.spawn(
                &drv_path,
                srb_driver(
                    self.bundle.clone(),
                    sqr.clone(),
                    port.clone(),
                    tb.failures.clone(),
                    drv_path.clone(),
                    self.timeout_cycles,
                ),
            );
        }
    }
}
