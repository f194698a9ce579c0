//! IP-XACT generation flow: parse a register-map subset of IP-XACT
//! XML plus a line-oriented attribute map, cross-validate them, and
//! emit the canonical `vfab-bundle v1` interchange file that register
//! model, coverage and checker binding are built from at run time.
//!
//! The recognized XML subset is the IEEE 1685 memoryMap tree:
//! memoryMaps / memoryMap / addressBlock / register(name,
//! addressOffset, size, access, reset/value) / field(name, bitOffset,
//! bitWidth, access, modifiedWriteValue). Namespace prefixes are
//! accepted and ignored; unknown elements inside the tree produce
//! warnings, not errors.

use roxmltree::{Document, Node};
use thiserror::Error;

use crate::reg::{Access, FieldDef, RegisterDef};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IpxactError {
    #[error("xml parse error at line {line}: {msg}")]
    Xml { line: u32, msg: String },
    #[error("missing {what} near line {line}")]
    Missing { what: String, line: u32 },
    #[error("bad number `{text}` at line {line}")]
    BadNumber { text: String, line: u32 },
    #[error("unsupported access `{text}` at line {line}")]
    BadAccess { text: String, line: u32 },
    #[error("register {reg}: unsupported size {size}, only 32 is handled")]
    UnsupportedWidth { reg: String, size: u64 },
    #[error("block {block}: registers {a} and {b} overlap")]
    Overlap { block: String, a: String, b: String },
    #[error("block {block}: register {reg} at {offset:#x} exceeds block range {range:#x}")]
    OutOfRange {
        block: String,
        reg: String,
        offset: u64,
        range: u64,
    },
    #[error("register {reg}: field {field} does not fit in 32 bits (lsb {lsb}, width {width})")]
    FieldRange {
        reg: String,
        field: String,
        lsb: u32,
        width: u32,
    },
    #[error("{0}")]
    Semantic(String),
    #[error("attribute map line {line}: {msg}")]
    AttrSyntax { line: usize, msg: String },
    #[error("attribute map line {line}: attribute `{attr}` defined twice")]
    DupAttr { attr: String, line: usize },
    #[error("cross-validation failed: {0}")]
    Validation(String),
    #[error("not a vfab bundle: expected header `vfab-bundle v1`, found `{0}`")]
    BundleVersion(String),
    #[error("corrupt bundle at line {line}: {msg}")]
    BundleCorrupt { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IrField {
    pub name: String,
    pub lsb: u32,
    pub width: u32,
    pub access: Access,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IrRegister {
    pub name: String,
    pub offset: u64,
    pub reset: u32,
    pub fields: Vec<IrField>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IrBlock {
    pub name: String,
    pub base_offset: u64,
    pub range: u64,
    pub registers: Vec<IrRegister>,
}

/// Parsed register map, component plus address blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterMapIR {
    pub component: String,
    pub blocks: Vec<IrBlock>,
}

impl RegisterMapIR {
    /// Blocks sorted by base offset, registers by offset, fields by
    /// lsb; the form emit writes and load returns.
    pub fn canonicalized(&self) -> RegisterMapIR {
        let mut ir = self.clone();
        ir.blocks.sort_by_key(|b| b.base_offset);
        for b in &mut ir.blocks {
            b.registers.sort_by_key(|r| r.offset);
            for r in &mut b.registers {
                r.fields.sort_by_key(|f| f.lsb);
            }
        }
        ir
    }

    /// Converts to register-model block definitions, with field resets
    /// sliced out of each register's reset word.
    pub fn to_blocks(&self) -> Result<Vec<(String, Vec<RegisterDef>)>, IpxactError> {
        let mut out = Vec::new();
        for b in &self.blocks {
            let mut regs = Vec::new();
            for r in &b.registers {
                let fields = r
                    .fields
                    .iter()
                    .map(|f| {
                        let ones = if f.width >= 32 {
                            u32::MAX
                        } else {
                            (1u32 << f.width.min(31)) - 1
                        };
                        FieldDef::new(&f.name, f.lsb, f.width, f.access, (r.reset >> f.lsb) & ones)
                    })
                    .collect();
                let def = RegisterDef::new(&r.name, r.offset, fields);
                def.validate().map_err(|e| IpxactError::Semantic(e.to_string()))?;
                regs.push(def);
            }
            out.push((b.name.clone(), regs));
        }
        Ok(out)
    }

    /// True when `path` (`block.REG` or `block.REG.FIELD`) names
    /// something in this map.
    pub fn resolves(&self, path: &str) -> bool {
        let parts: Vec<&str> = path.split('.').collect();
        if parts.len() != 2 && parts.len() != 3 {
            return false;
        }
        let Some(block) = self.blocks.iter().find(|b| b.name == parts[0]) else {
            return false;
        };
        let Some(reg) = block.registers.iter().find(|r| r.name == parts[1]) else {
            return false;
        };
        parts.len() == 2 || reg.fields.iter().any(|f| f.name == parts[2])
    }
}

/// Successful parse: the map plus non-fatal warnings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parsed {
    pub ir: RegisterMapIR,
    pub warnings: Vec<String>,
}

fn line_of(doc: &Document, n: Node) -> u32 {
    doc.text_pos_at(n.range().start).row
}

fn child_elem<'a, 'i>(n: Node<'a, 'i>, name: &str) -> Option<Node<'a, 'i>> {
    n.children()
        .find(|c| c.is_element() && c.tag_name().name() == name)
}

fn child_text<'a>(n: Node<'a, '_>, name: &str) -> Option<&'a str> {
    child_elem(n, name).and_then(|c| c.text()).map(str::trim)
}

fn req_text<'a>(doc: &Document, n: Node<'a, '_>, name: &str, what: &str) -> Result<&'a str, IpxactError> {
    child_text(n, name).ok_or_else(|| IpxactError::Missing {
        what: what.to_string(),
        line: line_of(doc, n),
    })
}

fn parse_u64(doc: &Document, n: Node, text: &str) -> Result<u64, IpxactError> {
    let t = text.trim();
    let parsed = if let Some(hex) = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        u64::from_str_radix(hex, 16)
    } else {
        t.parse::<u64>()
    };
    parsed.map_err(|_| IpxactError::BadNumber {
        text: t.to_string(),
        line: line_of(doc, n),
    })
}

fn parse_access(text: &str, line: u32) -> Result<Access, IpxactError> {
    match text {
        "read-write" => Ok(Access::RW),
        "read-only" => Ok(Access::RO),
        "write-only" => Ok(Access::WO),
        other => Err(IpxactError::BadAccess {
            text: other.to_string(),
            line,
        }),
    }
}

/// Parses the supported IP-XACT subset into a [`RegisterMapIR`].
pub fn parse_ipxact(xml: &str) -> Result<Parsed, IpxactError> {
    let doc = Document::parse(xml).map_err(|e| IpxactError::Xml {
        line: e.pos().row,
        msg: e.to_string(),
    })?;

    let root = doc.root_element();
    let component = if root.tag_name().name() == "component" {
        root
    } else {
        doc.descendants()
            .find(|n| n.is_element() && n.tag_name().name() == "component")
            .ok_or(IpxactError::Missing {
                what: "component element".to_string(),
                line: 1,
            })?
    };
    let comp_name = req_text(&doc, component, "name", "component name")?.to_string();

    let mut warnings = Vec::new();
    let mut blocks = Vec::new();

    for mmaps in component
        .children()
        .filter(|n| n.is_element() && n.tag_name().name() == "memoryMaps")
    {
        for mmap in mmaps.children().filter(Node::is_element) {
            if mmap.tag_name().name() != "memoryMap" {
                warnings.push(format!(
                    "ignored element `{}` at line {}",
                    mmap.tag_name().name(),
                    line_of(&doc, mmap)
                ));
                continue;
            }
            for child in mmap.children().filter(Node::is_element) {
                match child.tag_name().name() {
                    "name" => {}
                    "addressBlock" => blocks.push(parse_block(&doc, child, &mut warnings)?),
                    other => warnings.push(format!(
                        "ignored element `{other}` at line {}",
                        line_of(&doc, child)
                    )),
                }
            }
        }
    }

    let ir = RegisterMapIR {
        component: comp_name,
        blocks,
    };
    check_layout(&ir)?;
    ir.to_blocks()?;
    Ok(Parsed { ir, warnings })
}

fn parse_block(
    doc: &Document,
    node: Node,
    warnings: &mut Vec<String>,
) -> Result<IrBlock, IpxactError> {
    let name = req_text(doc, node, "name", "addressBlock name")?.to_string();
    let base_text = req_text(doc, node, "baseAddress", "addressBlock baseAddress")?;
    let base_offset = parse_u64(doc, node, base_text)?;
    let range_text = req_text(doc, node, "range", "addressBlock range")?;
    let range = parse_u64(doc, node, range_text)?;

    let mut registers = Vec::new();
    for child in node.children().filter(Node::is_element) {
        match child.tag_name().name() {
            "name" | "baseAddress" | "range" => {}
            "register" => registers.push(parse_register(doc, child, warnings)?),
            other => warnings.push(format!(
                "ignored element `{other}` at line {}",
                line_of(doc, child)
            )),
        }
    }
    Ok(IrBlock {
        name,
        base_offset,
        range,
        registers,
    })
}

fn parse_register(
    doc: &Document,
    node: Node,
    warnings: &mut Vec<String>,
) -> Result<IrRegister, IpxactError> {
    let name = req_text(doc, node, "name", "register name")?.to_string();
    let off_text = req_text(doc, node, "addressOffset", "register addressOffset")?;
    let offset = parse_u64(doc, node, off_text)?;
    let size_text = req_text(doc, node, "size", "register size")?;
    let size = parse_u64(doc, node, size_text)?;
    if size != 32 {
        return Err(IpxactError::UnsupportedWidth { reg: name, size });
    }

    let reg_access = match child_elem(node, "access") {
        Some(a) => Some(parse_access(
            a.text().unwrap_or("").trim(),
            line_of(doc, a),
        )?),
        None => None,
    };

    let mut reset = 0u32;
    if let Some(rst) = child_elem(node, "reset") {
        let val_text = req_text(doc, rst, "value", "reset value")?;
        let v = parse_u64(doc, rst, val_text)?;
        reset = u32::try_from(v).map_err(|_| IpxactError::BadNumber {
            text: val_text.to_string(),
            line: line_of(doc, rst),
        })?;
    }

    let mut fields = Vec::new();
    for child in node.children().filter(Node::is_element) {
        match child.tag_name().name() {
            "name" | "addressOffset" | "size" | "access" | "reset" => {}
            "field" => fields.push(parse_field(doc, child, &name, reg_access, warnings)?),
            other => warnings.push(format!(
                "ignored element `{other}` at line {}",
                line_of(doc, child)
            )),
        }
    }
    Ok(IrRegister {
        name,
        offset,
        reset,
        fields,
    })
}

fn parse_field(
    doc: &Document,
    node: Node,
    reg: &str,
    reg_access: Option<Access>,
    warnings: &mut Vec<String>,
) -> Result<IrField, IpxactError> {
    let name = req_text(doc, node, "name", "field name")?.to_string();
    let lsb = parse_u64(doc, node, req_text(doc, node, "bitOffset", "field bitOffset")?)? as u32;
    let width = parse_u64(doc, node, req_text(doc, node, "bitWidth", "field bitWidth")?)? as u32;
    if width == 0 || lsb.saturating_add(width) > 32 {
        return Err(IpxactError::FieldRange {
            reg: reg.to_string(),
            field: name,
            lsb,
            width,
        });
    }

    let mut access = match child_elem(node, "access") {
        Some(a) => parse_access(a.text().unwrap_or("").trim(), line_of(doc, a))?,
        None => reg_access.unwrap_or(Access::RW),
    };
    if let Some(mwv) = child_elem(node, "modifiedWriteValue") {
        let v = mwv.text().unwrap_or("").trim();
        if v == "oneToClear" && access == Access::RW {
            access = Access::W1C;
        } else {
            warnings.push(format!(
                "ignored modifiedWriteValue `{v}` at line {}",
                line_of(doc, mwv)
            ));
        }
    }

    for child in node.children().filter(Node::is_element) {
        match child.tag_name().name() {
            "name" | "bitOffset" | "bitWidth" | "access" | "modifiedWriteValue" => {}
            other => warnings.push(format!(
                "ignored element `{other}` at line {}",
                line_of(doc, child)
            )),
        }
    }
    Ok(IrField {
        name,
        lsb,
        width,
        access,
    })
}

fn check_layout(ir: &RegisterMapIR) -> Result<(), IpxactError> {
    for b in &ir.blocks {
        let mut sorted: Vec<&IrRegister> = b.registers.iter().collect();
        sorted.sort_by_key(|r| r.offset);
        for pair in sorted.windows(2) {
            if pair[1].offset < pair[0].offset + 4 {
                return Err(IpxactError::Overlap {
                    block: b.name.clone(),
                    a: pair[0].name.clone(),
                    b: pair[1].name.clone(),
                });
            }
        }
        for r in &b.registers {
            if r.offset + 4 > b.range {
                return Err(IpxactError::OutOfRange {
                    block: b.name.clone(),
                    reg: r.name.clone(),
                    offset: r.offset,
                    range: b.range,
                });
            }
        }
    }
    Ok(())
}

/// RTL-to-reference-model attribute map: `path -> attribute` lines.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AttrMap {
    pub entries: Vec<(String, String)>,
}

/// Parses the attribute map text. `#` starts a comment; blank lines
/// are skipped; attribute names must be unique.
pub fn parse_attr_map(text: &str) -> Result<AttrMap, IpxactError> {
    let mut entries: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((lhs, rhs)) = line.split_once("->") else {
            return Err(IpxactError::AttrSyntax {
                line: line_no,
                msg: format!("expected `path -> attribute`, found `{line}`"),
            });
        };
        let (path, attr) = (lhs.trim(), rhs.trim());
        if path.is_empty() || attr.is_empty() || path.contains(char::is_whitespace) || attr.contains(char::is_whitespace)
        {
            return Err(IpxactError::AttrSyntax {
                line: line_no,
                msg: format!("expected `path -> attribute`, found `{line}`"),
            });
        }
        if entries.iter().any(|(_, a)| a == attr) {
            return Err(IpxactError::DupAttr {
                attr: attr.to_string(),
                line: line_no,
            });
        }
        entries.push((path.to_string(), attr.to_string()));
    }
    Ok(AttrMap { entries })
}

/// Outcome of checking an attribute map against a register map.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CrossReport {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl CrossReport {
    pub fn ok(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Every map entry must resolve in the IR; IR fields with no attribute
/// are listed as warnings, since not every register feeds the
/// reference model.
pub fn validate_cross(ir: &RegisterMapIR, amap: &AttrMap) -> CrossReport {
    let mut report = CrossReport::default();
    for (path, attr) in &amap.entries {
        if !ir.resolves(path) {
            report
                .errors
                .push(format!("attribute `{attr}`: path `{path}` does not resolve"));
        }
    }
    for b in &ir.blocks {
        for r in &b.registers {
            for f in &r.fields {
                let fpath = format!("{}.{}.{}", b.name, r.name, f.name);
                let rpath = format!("{}.{}", b.name, r.name);
                if !amap
                    .entries
                    .iter()
                    .any(|(p, _)| *p == fpath || *p == rpath)
                {
                    report
                        .warnings
                        .push(format!("field {fpath} has no model attribute"));
                }
            }
        }
    }
    report
}

/// Emits the canonical bundle text. Pure function of its inputs:
/// identical (ir, amap) pairs produce byte-identical output.
pub fn emit_bundle(ir: &RegisterMapIR, amap: &AttrMap) -> Result<String, IpxactError> {
    let report = validate_cross(ir, amap);
    if !report.ok() {
        return Err(IpxactError::Validation(report.errors.join("; ")));
    }
    let ir = ir.canonicalized();

    let mut s = String::from("vfab-bundle v1\n");
    s.push_str("[regmodel]\n");
    s.push_str(&format!("component {}\n", ir.component));
    for b in &ir.blocks {
        s.push_str(&format!(
            "block {} base={:#x} range={:#x}\n",
            b.name, b.base_offset, b.range
        ));
        for r in &b.registers {
            s.push_str(&format!(
                "reg {} offset={:#x} reset={:#x}\n",
                r.name, r.offset, r.reset
            ));
            for f in &r.fields {
                s.push_str(&format!(
                    "field {} lsb={} width={} access={}\n",
                    f.name, f.lsb, f.width, f.access
                ));
            }
        }
    }
    s.push_str("[covskel]\n");
    for b in &ir.blocks {
        for r in &b.registers {
            for f in r.fields.iter().filter(|f| f.access == Access::RW) {
                s.push_str(&format!(
                    "point {}.{}.{} width={}\n",
                    b.name, r.name, f.name, f.width
                ));
            }
        }
    }
    s.push_str("[binding]\n");
    let mut bindings = amap.entries.clone();
    bindings.sort_by(|a, b| a.1.cmp(&b.1));
    for (path, attr) in &bindings {
        s.push_str(&format!("attr {attr} -> {path}\n"));
    }
    Ok(s)
}

/// One coverage point the bundle asks for: an RW field and its width.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CovPointSpec {
    pub path: String,
    pub width: u32,
}

/// A loaded bundle: the register map, the coverage skeleton, and the
/// attribute bindings, plus warnings for ignored content.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bundle {
    pub ir: RegisterMapIR,
    pub covskel: Vec<CovPointSpec>,
    pub bindings: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

impl Bundle {
    pub fn reg_blocks(&self) -> Result<Vec<(String, Vec<RegisterDef>)>, IpxactError> {
        self.ir.to_blocks()
    }
}

fn kv<'a>(tok: Option<&'a str>, key: &str, line: usize) -> Result<&'a str, IpxactError> {
    tok.and_then(|t| t.strip_prefix(key))
        .and_then(|t| t.strip_prefix('='))
        .ok_or_else(|| IpxactError::BundleCorrupt {
            line,
            msg: format!("expected `{key}=...`"),
        })
}

fn bundle_num(text: &str, line: usize) -> Result<u64, IpxactError> {
    let parsed = if let Some(hex) = text.strip_prefix("0x") {
        u64::from_str_radix(hex, 16)
    } else {
        text.parse::<u64>()
    };
    parsed.map_err(|_| IpxactError::BundleCorrupt {
        line,
        msg: format!("bad number `{text}`"),
    })
}

/// Loads bundle text emitted by [`emit_bundle`]. Unknown sections are
/// skipped with a warning; missing core sections are corrupt.
pub fn load_bundle(text: &str) -> Result<Bundle, IpxactError> {
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(IpxactError::BundleVersion(String::new()));
    };
    if header.trim() != "vfab-bundle v1" {
        return Err(IpxactError::BundleVersion(header.trim().to_string()));
    }

    #[derive(PartialEq)]
    enum Sect {
        None,
        Regmodel,
        Covskel,
        Binding,
        Unknown,
    }
    let mut sect = Sect::None;
    let mut seen = (false, false, false);

    let mut component = String::new();
    let mut blocks: Vec<IrBlock> = Vec::new();
    let mut covskel = Vec::new();
    let mut bindings = Vec::new();
    let mut warnings = Vec::new();

    for (i, raw) in lines {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            sect = match name {
                "regmodel" => {
                    seen.0 = true;
                    Sect::Regmodel
                }
                "covskel" => {
                    seen.1 = true;
                    Sect::Covskel
                }
                "binding" => {
                    seen.2 = true;
                    Sect::Binding
                }
                other => {
                    warnings.push(format!("ignored section [{other}]"));
                    Sect::Unknown
                }
            };
            continue;
        }
        let mut toks = line.split_whitespace();
        let head = toks.next().unwrap_or("");
        match sect {
            Sect::None => {
                return Err(IpxactError::BundleCorrupt {
                    line: line_no,
                    msg: "content before any section header".to_string(),
                })
            }
            Sect::Unknown => {}
            Sect::Regmodel => match head {
                "component" => {
                    component = toks
                        .next()
                        .ok_or(IpxactError::BundleCorrupt {
                            line: line_no,
                            msg: "component needs a name".to_string(),
                        })?
                        .to_string();
                }
                "block" => {
                    let name = toks.next().ok_or(IpxactError::BundleCorrupt {
                        line: line_no,
                        msg: "block needs a name".to_string(),
                    })?;
                    let base = bundle_num(kv(toks.next(), "base", line_no)?, line_no)?;
                    let range = bundle_num(kv(toks.next(), "range", line_no)?, line_no)?;
                    blocks.push(IrBlock {
                        name: name.to_string(),
                        base_offset: base,
                        range,
                        registers: Vec::new(),
                    });
                }
                "reg" => {
                    let name = toks.next().ok_or(IpxactError::BundleCorrupt {
                        line: line_no,
                        msg: "reg needs a name".to_string(),
                    })?;
                    let offset = bundle_num(kv(toks.next(), "offset", line_no)?, line_no)?;
                    let reset = bundle_num(kv(toks.next(), "reset", line_no)?, line_no)? as u32;
                    let block = blocks.last_mut().ok_or(IpxactError::BundleCorrupt {
                        line: line_no,
                        msg: "reg outside any block".to_string(),
                    })?;
                    block.registers.push(IrRegister {
                        name: name.to_string(),
                        offset,
                        reset,
                        fields: Vec::new(),
                    });
                }
                "field" => {
                    let name = toks.next().ok_or(IpxactError::BundleCorrupt {
                        line: line_no,
                        msg: "field needs a name".to_string(),
                    })?;
                    let lsb = bundle_num(kv(toks.next(), "lsb", line_no)?, line_no)? as u32;
                    let width = bundle_num(kv(toks.next(), "width", line_no)?, line_no)? as u32;
                    let access = match kv(toks.next(), "access", line_no)? {
                        "rw" => Access::RW,
                        "ro" => Access::RO,
                        "w1c" => Access::W1C,
                        "wo" => Access::WO,
                        other => {
                            return Err(IpxactError::BundleCorrupt {
                                line: line_no,
                                msg: format!("unknown access `{other}`"),
                            })
                        }
                    };
                    let reg = blocks
                        .last_mut()
                        .and_then(|b| b.registers.last_mut())
                        .ok_or(IpxactError::BundleCorrupt {
                            line: line_no,
                            msg: "field outside any reg".to_string(),
                        })?;
                    reg.fields.push(IrField {
                        name: name.to_string(),
                        lsb,
                        width,
                        access,
                    });
                }
                other => {
                    return Err(IpxactError::BundleCorrupt {
                        line: line_no,
                        msg: format!("unknown regmodel entry `{other}`"),
                    })
                }
            },
            Sect::Covskel => {
                if head != "point" {
                    return Err(IpxactError::BundleCorrupt {
                        line: line_no,
                        msg: format!("unknown covskel entry `{head}`"),
                    });
                }
                let path = toks.next().ok_or(IpxactError::BundleCorrupt {
                    line: line_no,
                    msg: "point needs a path".to_string(),
                })?;
                let width = bundle_num(kv(toks.next(), "width", line_no)?, line_no)? as u32;
                covskel.push(CovPointSpec {
                    path: path.to_string(),
                    width,
                });
            }
            Sect::Binding => {
                if head != "attr" {
                    return Err(IpxactError::BundleCorrupt {
                        line: line_no,
                        msg: format!("unknown binding entry `{head}`"),
                    });
                }
                let attr = toks.next().unwrap_or("").to_string();
                let arrow = toks.next().unwrap_or("");
                let path = toks.next().unwrap_or("").to_string();
                if attr.is_empty() || arrow != "->" || path.is_empty() {
                    return Err(IpxactError::BundleCorrupt {
                        line: line_no,
                        msg: "expected `attr NAME -> PATH`".to_string(),
                    });
                }
                bindings.push((path, attr));
            }
        }
    }

    if !(seen.0 && seen.1 && seen.2) {
        return Err(IpxactError::BundleCorrupt {
            line: text.lines().count(),
            msg: "missing [regmodel], [covskel] or [binding] section".to_string(),
        });
    }
    if component.is_empty() {
        return Err(IpxactError::BundleCorrupt {
            line: 2,
            msg: "regmodel has no component".to_string(),
        });
    }

    let ir = RegisterMapIR { component, blocks };
    check_layout(&ir)?;
    ir.to_blocks()?;
    Ok(Bundle {
        ir,
        covskel,
        bindings,
        warnings,
    })
}
