//! Register abstraction layer: field/register/block definitions, the
//! mirrored-value model, address maps, frontdoor access, passive
//! prediction and the built-in register sequences.
//!
//! One [`RegModel`] instance is shared by every environment in a run;
//! each level binds it to its own [`AddressMap`], so a sequence written
//! against register names works unchanged wherever the block lands in
//! the address space.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::rc::Rc;
use thiserror::Error;

mod adapter;
mod builtin;
mod predict;

pub use adapter::{Frontdoor, FrontdoorPort, LoopbackBusPort, SequencerPort};
pub use builtin::{bitbash_seq, reset_check_seq, write_read_all_seq, BuiltinReport};
pub use predict::RegPredictor;

/// Field access policy. RW bits mirror the written value, RO bits only
/// ever update from observed reads, W1C bits clear where a written word
/// has ones, WO bits take writes but read back as zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    RW,
    RO,
    W1C,
    WO,
}

impl std::fmt::Display for Access {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Access::RW => "rw",
            Access::RO => "ro",
            Access::W1C => "w1c",
            Access::WO => "wo",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDef {
    pub name: String,
    pub lsb: u32,
    pub width: u32,
    pub access: Access,
    pub reset: u32,
}

impl FieldDef {
    pub fn new(name: &str, lsb: u32, width: u32, access: Access, reset: u32) -> FieldDef {
        FieldDef {
            name: name.to_string(),
            lsb,
            width,
            access,
            reset,
        }
    }

    /// Bit mask of this field within its 32-bit register.
    pub fn mask(&self) -> u32 {
        if self.width >= 32 {
            u32::MAX
        } else {
            ((1u32 << self.width) - 1) << self.lsb
        }
    }
}

/// One 32-bit register. Bits not covered by any field are reserved:
/// they reset to zero, read as zero and ignore writes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterDef {
    pub name: String,
    pub offset: u64,
    pub fields: Vec<FieldDef>,
}

impl RegisterDef {
    pub fn new(name: &str, offset: u64, fields: Vec<FieldDef>) -> RegisterDef {
        RegisterDef {
            name: name.to_string(),
            offset,
            fields,
        }
    }

    pub fn validate(&self) -> Result<(), RegError> {
        if self.offset % 4 != 0 {
            return Err(RegError::Misaligned {
                reg: self.name.clone(),
                offset: self.offset,
            });
        }
        let mut covered = 0u32;
        for f in &self.fields {
            if f.width == 0 || f.lsb + f.width > 32 {
                return Err(RegError::FieldRange {
                    reg: self.name.clone(),
                    field: f.name.clone(),
                    lsb: f.lsb,
                    width: f.width,
                });
            }
            if f.width < 32 && f.reset >= (1u32 << f.width) {
                return Err(RegError::ResetRange {
                    reg: self.name.clone(),
                    field: f.name.clone(),
                    reset: f.reset,
                    width: f.width,
                });
            }
            if covered & f.mask() != 0 {
                let other = self
                    .fields
                    .iter()
                    .take_while(|o| !std::ptr::eq(*o, f))
                    .find(|o| o.mask() & f.mask() != 0)
                    .map(|o| o.name.clone())
                    .unwrap_or_default();
                return Err(RegError::FieldOverlap {
                    reg: self.name.clone(),
                    a: other,
                    b: f.name.clone(),
                });
            }
            covered |= f.mask();
        }
        Ok(())
    }

    /// Concatenated field reset values; reserved bits are zero.
    pub fn reset_value(&self) -> u32 {
        self.fields
            .iter()
            .fold(0, |v, f| v | (f.reset << f.lsb) & f.mask())
    }

    pub fn mask_of(&self, access: Access) -> u32 {
        self.fields
            .iter()
            .filter(|f| f.access == access)
            .fold(0, |m, f| m | f.mask())
    }

    pub fn rw_mask(&self) -> u32 {
        self.mask_of(Access::RW)
    }

    pub fn ro_mask(&self) -> u32 {
        self.mask_of(Access::RO)
    }

    pub fn w1c_mask(&self) -> u32 {
        self.mask_of(Access::W1C)
    }

    pub fn wo_mask(&self) -> u32 {
        self.mask_of(Access::WO)
    }

    /// Bits that carry meaning on a read: everything except WO fields
    /// (reserved bits read as zero and are included).
    pub fn readable_mask(&self) -> u32 {
        !self.wo_mask()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RegError {
    #[error("register {reg}: offset {offset:#x} is not 4-byte aligned")]
    Misaligned { reg: String, offset: u64 },
    #[error("register {reg}: field {field} does not fit (lsb {lsb}, width {width})")]
    FieldRange {
        reg: String,
        field: String,
        lsb: u32,
        width: u32,
    },
    #[error("register {reg}: field {field} reset {reset:#x} exceeds {width} bits")]
    ResetRange {
        reg: String,
        field: String,
        reset: u32,
        width: u32,
    },
    #[error("register {reg}: fields {a} and {b} overlap")]
    FieldOverlap { reg: String, a: String, b: String },
    #[error("block {block}: duplicate register name {reg}")]
    DupRegName { block: String, reg: String },
    #[error("block {block}: registers {a} and {b} share offset {offset:#x}")]
    DupRegOffset {
        block: String,
        a: String,
        b: String,
        offset: u64,
    },
    #[error("duplicate block name {0}")]
    DupBlock(String),
    #[error("register path `{0}` is not of the form block.REG")]
    BadPath(String),
    #[error("unknown register `{path}`; known here: {near}")]
    UnknownName { path: String, near: String },
    #[error("map {map}: address {addr:#x} claimed by both {a} and {b}")]
    AddressCollision {
        map: String,
        addr: u64,
        a: String,
        b: String,
    },
    #[error("map {map}: register {reg} mapped more than once")]
    DoublyMapped { map: String, reg: String },
    #[error("register {reg} is not reachable through map {map}")]
    NotMapped { map: String, reg: String },
}

/// Identity of one register instance in the model. Stable across maps:
/// looking a name up through any map yields the same id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RegId {
    block: u32,
    reg: u32,
}

struct RegInst {
    def: Rc<RegisterDef>,
    mirror: u32,
    known: bool,
}

struct Block {
    name: String,
    regs: Vec<RegInst>,
}

struct ModelInner {
    blocks: Vec<Block>,
    warnings: Vec<String>,
}

/// Outcome of folding an observed read into the model: which bits were
/// checked, what the mirror predicted there, and which differed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReadCheck {
    pub checked_mask: u32,
    pub expected: u32,
    pub mismatch: u32,
}

/// The mirrored register model. Clones share state, so every
/// environment level predicts into and checks against the same
/// mirrors.
#[derive(Clone)]
pub struct RegModel {
    inner: Rc<RefCell<ModelInner>>,
}

impl RegModel {
    pub fn build(blocks: Vec<(String, Vec<RegisterDef>)>) -> Result<RegModel, RegError> {
        let mut seen_blocks = Vec::new();
        let mut out = Vec::new();
        for (name, regs) in blocks {
            if seen_blocks.contains(&name) {
                return Err(RegError::DupBlock(name));
            }
            seen_blocks.push(name.clone());
            let mut by_name: Vec<&str> = Vec::new();
            let mut by_offset: BTreeMap<u64, &str> = BTreeMap::new();
            for r in &regs {
                r.validate()?;
                if by_name.contains(&r.name.as_str()) {
                    return Err(RegError::DupRegName {
                        block: name,
                        reg: r.name.clone(),
                    });
                }
                by_name.push(&r.name);
                if let Some(other) = by_offset.insert(r.offset, &r.name) {
                    return Err(RegError::DupRegOffset {
                        block: name.clone(),
                        a: other.to_string(),
                        b: r.name.clone(),
                        offset: r.offset,
                    });
                }
            }
            out.push(Block {
                name,
                regs: regs
                    .into_iter()
                    .map(|def| RegInst {
                        def: Rc::new(def),
                        mirror: 0,
                        known: false,
                    })
                    .collect(),
            });
        }
        Ok(RegModel {
            inner: Rc::new(RefCell::new(ModelInner {
                blocks: out,
                warnings: Vec::new(),
            })),
        })
    }

    /// Name lookup, `block.REG`. Never consults addresses.
    pub fn lookup(&self, path: &str) -> Result<RegId, RegError> {
        let Some((block, reg)) = path.split_once('.') else {
            return Err(RegError::BadPath(path.to_string()));
        };
        let inner = self.inner.borrow();
        let Some((bi, b)) = inner
            .blocks
            .iter()
            .enumerate()
            .find(|(_, b)| b.name == block)
        else {
            let near = inner
                .blocks
                .iter()
                .map(|b| b.name.clone())
                .collect::<Vec<_>>()
                .join(", ");
            return Err(RegError::UnknownName {
                path: path.to_string(),
                near,
            });
        };
        match b.regs.iter().position(|r| r.def.name == reg) {
            Some(ri) => Ok(RegId {
                block: bi as u32,
                reg: ri as u32,
            }),
            None => {
                let near = b
                    .regs
                    .iter()
                    .map(|r| r.def.name.clone())
                    .collect::<Vec<_>>()
                    .join(", ");
                Err(RegError::UnknownName {
                    path: path.to_string(),
                    near,
                })
            }
        }
    }

    pub fn block_names(&self) -> Vec<String> {
        self.inner.borrow().blocks.iter().map(|b| b.name.clone()).collect()
    }

    /// Every register id, block-major, in definition order.
    pub fn all_regs(&self) -> Vec<RegId> {
        let inner = self.inner.borrow();
        inner
            .blocks
            .iter()
            .enumerate()
            .flat_map(|(bi, b)| {
                (0..b.regs.len()).map(move |ri| RegId {
                    block: bi as u32,
                    reg: ri as u32,
                })
            })
            .collect()
    }

    pub fn block_regs(&self, block: &str) -> Result<Vec<RegId>, RegError> {
        let inner = self.inner.borrow();
        let Some((bi, b)) = inner
            .blocks
            .iter()
            .enumerate()
            .find(|(_, b)| b.name == block)
        else {
            return Err(RegError::UnknownName {
                path: block.to_string(),
                near: inner
                    .blocks
                    .iter()
                    .map(|b| b.name.clone())
                    .collect::<Vec<_>>()
                    .join(", "),
            });
        };
        Ok((0..b.regs.len())
            .map(|ri| RegId {
                block: bi as u32,
                reg: ri as u32,
            })
            .collect())
    }

    pub fn def(&self, id: RegId) -> Rc<RegisterDef> {
        self.inner.borrow().blocks[id.block as usize].regs[id.reg as usize]
            .def
            .clone()
    }

    pub fn path(&self, id: RegId) -> String {
        let inner = self.inner.borrow();
        let b = &inner.blocks[id.block as usize];
        format!("{}.{}", b.name, b.regs[id.reg as usize].def.name)
    }

    /// Mirror value, or None while the register is still unknown.
    pub fn mirror(&self, id: RegId) -> Option<u32> {
        let inner = self.inner.borrow();
        let r = &inner.blocks[id.block as usize].regs[id.reg as usize];
        r.known.then_some(r.mirror)
    }

    /// Sets every mirror to its concatenated field resets.
    pub fn reset_model(&self) {
        let mut inner = self.inner.borrow_mut();
        for b in &mut inner.blocks {
            for r in &mut b.regs {
                r.mirror = r.def.reset_value();
                r.known = true;
            }
        }
    }

    /// Folds a write into the mirror: RW and WO bits take the value,
    /// W1C bits clear where ones were written, RO bits are untouched
    /// (with a warning when the write aimed at them).
    pub fn apply_write(&self, id: RegId, value: u32) {
        let path = self.path(id);
        let mut inner = self.inner.borrow_mut();
        let r = &mut inner.blocks[id.block as usize].regs[id.reg as usize];
        let def = r.def.clone();
        let mut m = r.mirror;
        m = (m & !def.rw_mask()) | (value & def.rw_mask());
        m &= !(value & def.w1c_mask());
        m = (m & !def.wo_mask()) | (value & def.wo_mask());
        r.mirror = m;
        r.known = true;
        let ro = def.ro_mask();
        if ro != 0 && (value & ro != 0 || def.rw_mask() | def.w1c_mask() | def.wo_mask() == 0) {
            inner.warnings.push(format!(
                "write of {value:#010x} to {path} targets read-only bits {ro:#010x}; mirror unchanged there"
            ));
        }
    }

    /// Folds an observed read value into the mirror and reports how it
    /// compared. RW and W1C bits are checked against the mirror when it
    /// is known; RO bits update silently (volatile); W1C bits can only
    /// be set, never cleared, by an observed read.
    pub fn apply_read_observed(&self, id: RegId, observed: u32) -> ReadCheck {
        let mut inner = self.inner.borrow_mut();
        let r = &mut inner.blocks[id.block as usize].regs[id.reg as usize];
        let def = r.def.clone();
        let checked_mask = if r.known {
            def.rw_mask() | def.w1c_mask()
        } else {
            0
        };
        let expected = r.mirror & checked_mask;
        let mismatch = (observed & checked_mask) ^ expected;
        if r.known {
            r.mirror = (r.mirror & !def.ro_mask()) | (observed & def.ro_mask());
            r.mirror |= observed & def.w1c_mask();
        } else {
            r.mirror = observed;
        }
        r.known = true;
        ReadCheck {
            checked_mask,
            expected,
            mismatch,
        }
    }

    /// Predicts an autonomous status set (e.g. a frame-done flag): ORs
    /// `mask` into the register's W1C bits.
    pub fn predict_status_set(&self, id: RegId, mask: u32) {
        let mut inner = self.inner.borrow_mut();
        let r = &mut inner.blocks[id.block as usize].regs[id.reg as usize];
        let w1c = r.def.w1c_mask();
        r.mirror |= mask & w1c;
    }

    pub fn warnings(&self) -> Vec<String> {
        self.inner.borrow().warnings.clone()
    }
}

/// A view placing model blocks at absolute addresses. Lookup by name
/// goes through the model; only access issue and prediction consult
/// addresses.
#[derive(Debug)]
pub struct AddressMap {
    name: String,
    base: u64,
    by_addr: BTreeMap<u64, RegId>,
    by_id: BTreeMap<RegId, u64>,
}

impl AddressMap {
    /// Places the named blocks at `base + block_offset + reg_offset`.
    pub fn new(
        name: &str,
        base: u64,
        model: &RegModel,
        blocks: &[(&str, u64)],
    ) -> Result<AddressMap, RegError> {
        let mut map = AddressMap {
            name: name.to_string(),
            base,
            by_addr: BTreeMap::new(),
            by_id: BTreeMap::new(),
        };
        for (block, off) in blocks {
            for id in model.block_regs(block)? {
                let addr = base + off + model.def(id).offset;
                map.insert(model, id, addr)?;
            }
        }
        Ok(map)
    }

    /// Composes child maps at sub-bases, re-basing their entries.
    pub fn nested(
        name: &str,
        base: u64,
        model: &RegModel,
        children: &[(u64, &AddressMap)],
    ) -> Result<AddressMap, RegError> {
        let mut map = AddressMap {
            name: name.to_string(),
            base,
            by_addr: BTreeMap::new(),
            by_id: BTreeMap::new(),
        };
        for (sub, child) in children {
            for (addr, id) in &child.by_addr {
                let rebased = base + sub + (addr - child.base);
                map.insert(model, *id, rebased)?;
            }
        }
        Ok(map)
    }

    fn insert(&mut self, model: &RegModel, id: RegId, addr: u64) -> Result<(), RegError> {
        if let Some(prev) = self.by_addr.get(&addr) {
            return Err(RegError::AddressCollision {
                map: self.name.clone(),
                addr,
                a: model.path(*prev),
                b: model.path(id),
            });
        }
        if self.by_id.contains_key(&id) {
            return Err(RegError::DoublyMapped {
                map: self.name.clone(),
                reg: model.path(id),
            });
        }
        self.by_addr.insert(addr, id);
        self.by_id.insert(id, addr);
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn base(&self) -> u64 {
        self.base
    }

    pub fn address_of(&self, id: RegId) -> Option<u64> {
        self.by_id.get(&id).copied()
    }

    pub fn resolve(&self, addr: u64) -> Option<RegId> {
        self.by_addr.get(&addr).copied()
    }

    /// All mapped registers in ascending address order.
    pub fn regs_by_address(&self) -> Vec<(u64, RegId)> {
        self.by_addr.iter().map(|(a, id)| (*a, *id)).collect()
    }

    pub fn len(&self) -> usize {
        self.by_addr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_addr.is_empty()
    }
}

#[cfg(test)]
pub(crate) fn toy_block() -> (String, Vec<RegisterDef>) {
    (
        "blk".to_string(),
        vec![
            RegisterDef::new(
                "CTRL",
                0x00,
                vec![FieldDef::new("en", 0, 1, Access::RW, 0)],
            ),
            RegisterDef::new(
                "GAIN",
                0x04,
                vec![FieldDef::new("gain", 0, 8, Access::RW, 0x10)],
            ),
            RegisterDef::new(
                "INT_STATUS",
                0x08,
                vec![FieldDef::new("done", 0, 2, Access::W1C, 0)],
            ),
            RegisterDef::new(
                "STATUS",
                0x0C,
                vec![FieldDef::new("busy", 0, 1, Access::RO, 0)],
            ),
            RegisterDef::new(
                "KEY",
                0x10,
                vec![FieldDef::new("key", 0, 16, Access::WO, 0)],
            ),
            RegisterDef::new(
                "MIXED",
                0x14,
                vec![
                    FieldDef::new("lo", 0, 4, Access::RW, 0x5),
                    FieldDef::new("flag", 8, 1, Access::W1C, 0),
                    FieldDef::new("ver", 16, 8, Access::RO, 0x2A),
                ],
            ),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> RegModel {
        RegModel::build(vec![toy_block()]).unwrap()
    }

    #[test]
    fn definition_validation_catches_shape_errors() {
        let bad_align = RegisterDef::new("R", 0x02, vec![]);
        assert!(matches!(
            bad_align.validate(),
            Err(RegError::Misaligned { .. })
        ));

        let bad_range = RegisterDef::new(
            "R",
            0x00,
            vec![FieldDef::new("f", 30, 4, Access::RW, 0)],
        );
        assert!(matches!(
            bad_range.validate(),
            Err(RegError::FieldRange { .. })
        ));

        let bad_reset = RegisterDef::new(
            "R",
            0x00,
            vec![FieldDef::new("f", 0, 4, Access::RW, 0x10)],
        );
        assert!(matches!(
            bad_reset.validate(),
            Err(RegError::ResetRange { .. })
        ));

        let overlap = RegisterDef::new(
            "R",
            0x00,
            vec![
                FieldDef::new("a", 0, 8, Access::RW, 0),
                FieldDef::new("b", 4, 8, Access::RW, 0),
            ],
        );
        match overlap.validate() {
            Err(RegError::FieldOverlap { a, b, .. }) => {
                assert_eq!((a.as_str(), b.as_str()), ("a", "b"));
            }
            other => panic!("expected overlap error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_names_and_offsets_are_rejected() {
        let dup_name = RegModel::build(vec![(
            "b".to_string(),
            vec![
                RegisterDef::new("R", 0x0, vec![]),
                RegisterDef::new("R", 0x4, vec![]),
            ],
        )]);
        assert!(matches!(dup_name, Err(RegError::DupRegName { .. })));

        let dup_off = RegModel::build(vec![(
            "b".to_string(),
            vec![
                RegisterDef::new("R1", 0x0, vec![]),
                RegisterDef::new("R2", 0x0, vec![]),
            ],
        )]);
        assert!(matches!(dup_off, Err(RegError::DupRegOffset { .. })));
    }

    #[test]
    fn reset_value_concatenates_fields_with_reserved_bits_zero() {
        let m = model();
        let mixed = m.lookup("blk.MIXED").unwrap();
        assert_eq!(m.def(mixed).reset_value(), 0x002A_0005);
        let gain = m.lookup("blk.GAIN").unwrap();
        assert_eq!(m.def(gain).reset_value(), 0x10);
    }

    #[test]
    fn lookup_is_by_name_and_reports_candidates() {
        let m = model();
        let gain = m.lookup("blk.GAIN").unwrap();
        assert_eq!(m.def(gain).offset, 0x04);
        assert_eq!(m.path(gain), "blk.GAIN");

        match m.lookup("blk.NOPE") {
            Err(RegError::UnknownName { near, .. }) => {
                assert!(near.contains("GAIN") && near.contains("CTRL"));
            }
            other => panic!("expected unknown-name error, got {other:?}"),
        }
        assert!(matches!(m.lookup("GAIN"), Err(RegError::BadPath(_))));
        assert!(m.lookup("nothere.GAIN").is_err());
    }

    #[test]
    fn one_instance_appears_at_different_addresses_in_different_maps() {
        let m = model();
        let ip = AddressMap::new("ip", 0x0, &m, &[("blk", 0x0)]).unwrap();
        let soc = AddressMap::new("soc", 0x4000_0000, &m, &[("blk", 0x0)]).unwrap();
        let gain = m.lookup("blk.GAIN").unwrap();

        assert_eq!(ip.address_of(gain), Some(0x04));
        assert_eq!(soc.address_of(gain), Some(0x4000_0004));
        assert_eq!(ip.resolve(0x04), Some(gain));
        assert_eq!(soc.resolve(0x4000_0004), Some(gain));
        assert_eq!(soc.resolve(0x04), None);
    }

    #[test]
    fn nested_map_equals_direct_construction() {
        let m = model();
        let sub = AddressMap::new("sub", 0x0, &m, &[("blk", 0x1000)]).unwrap();
        let soc_nested =
            AddressMap::nested("soc", 0x4000_0000, &m, &[(0x0, &sub)]).unwrap();
        let soc_direct =
            AddressMap::new("soc", 0x4000_0000, &m, &[("blk", 0x1000)]).unwrap();

        assert_eq!(
            soc_nested.regs_by_address(),
            soc_direct.regs_by_address()
        );
    }

    #[test]
    fn overlapping_placements_collide() {
        let m = RegModel::build(vec![
            (
                "a".to_string(),
                vec![RegisterDef::new("R", 0x0, vec![])],
            ),
            (
                "b".to_string(),
                vec![RegisterDef::new("S", 0x0, vec![])],
            ),
        ])
        .unwrap();
        let err = AddressMap::new("m", 0, &m, &[("a", 0x0), ("b", 0x0)]).unwrap_err();
        assert!(matches!(err, RegError::AddressCollision { .. }));
    }

    #[test]
    fn write_rules_per_access_kind() {
        let m = model();
        m.reset_model();

        let gain = m.lookup("blk.GAIN").unwrap();
        m.apply_write(gain, 0x20);
        assert_eq!(m.mirror(gain), Some(0x20));

        let ist = m.lookup("blk.INT_STATUS").unwrap();
        m.predict_status_set(ist, 0b11);
        assert_eq!(m.mirror(ist), Some(0b11));
        m.apply_write(ist, 0b01);
        assert_eq!(m.mirror(ist), Some(0b10), "W1C clears only written ones");

        let st = m.lookup("blk.STATUS").unwrap();
        m.apply_write(st, 0x1);
        assert_eq!(m.mirror(st), Some(0), "RO mirror ignores writes");
        assert!(m.warnings().iter().any(|w| w.contains("blk.STATUS")));

        let key = m.lookup("blk.KEY").unwrap();
        m.apply_write(key, 0xBEEF);
        assert_eq!(m.mirror(key), Some(0xBEEF), "WO mirror takes the value");

        let mixed = m.lookup("blk.MIXED").unwrap();
        m.apply_write(mixed, 0xFFFF_FF0F);
        // lo takes 0xF, flag had 0 (stays 0: writing 1 clears), ver untouched.
        assert_eq!(m.mirror(mixed), Some(0x002A_000F));
    }

    #[test]
    fn observed_reads_check_rw_and_w1c_and_refresh_volatile_bits() {
        let m = model();
        let mixed = m.lookup("blk.MIXED").unwrap();

        // Unknown mirror: no check, becomes known.
        let chk = m.apply_read_observed(mixed, 0x0055_0103);
        assert_eq!(chk.checked_mask, 0);
        assert_eq!(chk.mismatch, 0);
        assert_eq!(m.mirror(mixed), Some(0x0055_0103));

        // Known: RW+W1C bits are checked; RO updates silently.
        let chk = m.apply_read_observed(mixed, 0x0077_0103);
        assert_eq!(chk.checked_mask, 0x0000_010F);
        assert_eq!(chk.mismatch, 0);
        assert_eq!(m.mirror(mixed), Some(0x0077_0103));

        // RW bit flips under us: mismatch names the bit.
        let chk = m.apply_read_observed(mixed, 0x0077_0102);
        assert_eq!(chk.mismatch, 0x1);

        // W1C bits can be set by a read, never cleared.
        let chk = m.apply_read_observed(mixed, 0x0077_0003);
        assert_eq!(chk.mismatch, 0x0000_0100, "w1c bit vanished without a write");
        assert_eq!(m.mirror(mixed).unwrap() & 0x100, 0x100);
    }

    #[test]
    fn reset_model_is_idempotent_and_makes_everything_known() {
        let m = model();
        assert_eq!(m.mirror(m.lookup("blk.GAIN").unwrap()), None);
        m.reset_model();
        let snapshot: Vec<Option<u32>> = m.all_regs().iter().map(|id| m.mirror(*id)).collect();
        assert!(snapshot.iter().all(|s| s.is_some()));
        m.reset_model();
        let again: Vec<Option<u32>> = m.all_regs().iter().map(|id| m.mirror(*id)).collect();
        assert_eq!(snapshot, again);
        assert_eq!(m.mirror(m.lookup("blk.MIXED").unwrap()), Some(0x002A_0005));
    }
}
