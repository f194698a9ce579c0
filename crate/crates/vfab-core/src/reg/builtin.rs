//! Built-in register sequences: reset-value check, per-bit bash of RW
//! fields, and a randomized write/read-back pass. All three run purely
//! through a [`Frontdoor`], so they work at any level the register
//! block is mapped into.

use crate::seq::Rng;
use crate::tb::FailKind;
use crate::uvc::BusResp;

use super::{Access, Frontdoor};

/// What a built-in sequence touched, for logs and reports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuiltinReport {
    pub sequence: &'static str,
    pub visited: Vec<String>,
    pub accesses: u64,
}

/// Resets the mirror, reads every mapped register in address order and
/// compares readable bits against the concatenated field resets.
/// Expects the device itself to have been reset beforehand.
pub async fn reset_check_seq(fd: &Frontdoor) -> BuiltinReport {
    fd.model().reset_model();
    let mut report = BuiltinReport {
        sequence: "reset_check",
        visited: Vec::new(),
        accesses: 0,
    };
    for (_, id) in fd.map().regs_by_address() {
        let def = fd.model().def(id);
        let (got, resp) = fd.read(id).await;
        report.accesses += 1;
        report.visited.push(fd.model().path(id));
        if resp != BusResp::Ok {
            continue;
        }
        let mask = def.readable_mask();
        let want = def.reset_value();
        if (got ^ want) & mask != 0 {
            fd.fail(
                FailKind::ResetValue,
                format!(
                    "register {} reads {got:#010x} after reset, expected {want:#010x}",
                    fd.model().path(id)
                ),
            );
        }
    }
    report
}

/// Walks a one and then a zero through every bit of every RW field,
/// reading back after each write. A discrepancy names the register,
/// field and bit.
pub async fn bitbash_seq(fd: &Frontdoor) -> BuiltinReport {
    let mut report = BuiltinReport {
        sequence: "bitbash",
        visited: Vec::new(),
        accesses: 0,
    };
    for (_, id) in fd.map().regs_by_address() {
        let def = fd.model().def(id);
        let rw_fields: Vec<_> = def.fields.iter().filter(|f| f.access == Access::RW).collect();
        if rw_fields.is_empty() {
            continue;
        }
        report.visited.push(fd.model().path(id));
        for field in rw_fields {
            let ones = if field.width >= 32 {
                u32::MAX
            } else {
                (1u32 << field.width) - 1
            };
            for bit in 0..field.width {
                for (label, pattern) in [("walk-1", 1u32 << bit), ("walk-0", ones ^ (1 << bit))] {
                    fd.write(id, pattern << field.lsb).await;
                    let (got, resp) = fd.read(id).await;
                    report.accesses += 2;
                    if resp != BusResp::Ok {
                        continue;
                    }
                    let got_field = (got >> field.lsb) & ones;
                    if got_field != pattern {
                        fd.fail(
                            FailKind::BitBash,
                            format!(
                                "register {} field {} bit {bit} {label}: wrote {pattern:#x}, read back {got_field:#x}",
                                fd.model().path(id),
                                field.name
                            ),
                        );
                    }
                }
            }
        }
    }
    report
}

/// Writes a seeded random value to the RW bits of every register that
/// has any, then reads back and compares those bits.
pub async fn write_read_all_seq(fd: &Frontdoor, rng: &mut Rng) -> BuiltinReport {
    let mut report = BuiltinReport {
        sequence: "write_read_all",
        visited: Vec::new(),
        accesses: 0,
    };
    for (_, id) in fd.map().regs_by_address() {
        let def = fd.model().def(id);
        let rw = def.rw_mask();
        if rw == 0 {
            continue;
        }
        report.visited.push(fd.model().path(id));
        let value = (rng.next_u64() as u32) & rw;
        fd.write(id, value).await;
        let (got, resp) = fd.read(id).await;
        report.accesses += 2;
        if resp != BusResp::Ok {
            continue;
        }
        if (got ^ value) & rw != 0 {
            fd.fail(
                FailKind::WriteReadBack,
                format!(
                    "register {}: wrote {value:#010x}, read back {got:#010x} on rw bits {rw:#010x}",
                    fd.model().path(id)
                ),
            );
        }
    }
    report
}
