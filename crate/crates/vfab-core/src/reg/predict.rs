//! Passive register prediction: fold bus traffic observed by a monitor
//! into the shared mirror, self-checking reads on the way through.

use std::cell::RefCell;
use std::rc::Rc;

use crate::tb::{FailKind, FailureSink};
use crate::uvc::{BusKind, BusResp, BusTxn};

use super::adapter::bit_list;
use super::{AddressMap, RegModel};

/// Subscribes to monitored bus transactions and keeps the register
/// mirror current without issuing any traffic of its own. Several
/// predictors at different hierarchy levels may feed the same model;
/// the update rules make that idempotent.
#[derive(Clone)]
pub struct RegPredictor {
    model: RegModel,
    map: Rc<AddressMap>,
    failures: FailureSink,
    source: String,
    ignore: Vec<(u64, u64)>,
    unmapped: Rc<RefCell<Vec<BusTxn>>>,
}

impl RegPredictor {
    pub fn new(
        model: RegModel,
        map: Rc<AddressMap>,
        failures: FailureSink,
        source: &str,
    ) -> RegPredictor {
        RegPredictor {
            model,
            map,
            failures,
            source: source.to_string(),
            ignore: Vec::new(),
            unmapped: Rc::new(RefCell::new(Vec::new())),
        }
    }

    /// Addresses in `lo..=hi` that miss the map are expected (another
    /// block's territory) and will not be recorded.
    pub fn ignore_range(&mut self, lo: u64, hi: u64) {
        self.ignore.push((lo, hi));
    }

    /// Feeds one completed transaction, usually from a monitor's
    /// analysis port. Errored transactions carry no architectural
    /// state and are skipped.
    pub fn observe(&self, txn: &BusTxn) {
        if txn.resp == BusResp::Error {
            return;
        }
        let addr = txn.addr as u64;
        let Some(id) = self.map.resolve(addr) else {
            if !self.ignore.iter().any(|(lo, hi)| (*lo..=*hi).contains(&addr)) {
                self.unmapped.borrow_mut().push(*txn);
            }
            return;
        };
        match txn.kind {
            BusKind::Write => self.model.apply_write(id, txn.wdata),
            BusKind::Read => {
                let chk = self.model.apply_read_observed(id, txn.rdata);
                if chk.mismatch != 0 {
                    self.failures.fail(
                        &self.source,
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
        }
    }

    /// Mapped-miss transactions seen so far.
    pub fn unmapped(&self) -> Vec<BusTxn> {
        self.unmapped.borrow().clone()
    }
}
