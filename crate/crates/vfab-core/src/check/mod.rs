//! Bit-accurate data checking: reference models driven by attributes
//! snapshotted from the register mirror, pixel-exact frame comparison,
//! and the ordered frame-matching scoreboard.

use std::cell::RefCell;
use std::collections::{BTreeMap, VecDeque};
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use crate::reg::{RegId, RegModel};
use crate::sim::SimTime;
use crate::tb::{CompId, CompKind, FailKind, FailureSink, Tb, TbError};
use crate::uvc::Frame;

mod pgm;

pub use pgm::{read_pgm, write_pgm};

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("geometry mismatch: expected {expected}, actual {actual}")]
    Geometry { expected: String, actual: String },
    #[error("model {model} is missing attribute `{attr}`")]
    MissingAttr { model: String, attr: String },
    #[error("reference model failed: {0}")]
    RefModel(String),
    #[error("binding path `{path}` does not resolve: {msg}")]
    BindResolve { path: String, msg: String },
    #[error("pgm: {0}")]
    Pgm(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Attribute table handed to a reference model, extracted from the
/// register mirror at a defined snapshot time.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AttributeSet {
    vals: BTreeMap<String, u64>,
}

impl AttributeSet {
    pub fn new() -> AttributeSet {
        AttributeSet::default()
    }

    pub fn set(&mut self, name: &str, v: u64) {
        self.vals.insert(name.to_string(), v);
    }

    pub fn get(&self, name: &str) -> Option<u64> {
        self.vals.get(name).copied()
    }

    /// `name=value` lines, sorted by name.
    pub fn to_lines(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.vals {
            s.push_str(&format!("{k}={v}\n"));
        }
        s
    }

    pub fn from_lines(text: &str) -> Result<AttributeSet, CheckError> {
        let mut a = AttributeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CheckError::RefModel(format!("attrs line {}: expected name=value", i + 1))
            })?;
            let v = v.trim();
            let parsed = if let Some(hex) = v.strip_prefix("0x") {
                u64::from_str_radix(hex, 16)
            } else {
                v.parse()
            }
            .map_err(|_| CheckError::RefModel(format!("attrs line {}: bad value `{v}`", i + 1)))?;
            a.set(k.trim(), parsed);
        }
        Ok(a)
    }
}

fn require(attrs: &AttributeSet, model: &str, name: &str) -> Result<u64, CheckError> {
    attrs.get(name).ok_or_else(|| CheckError::MissingAttr {
        model: model.to_string(),
        attr: name.to_string(),
    })
}

struct BindEntry {
    attr: String,
    id: RegId,
    lsb: u32,
    mask: u32,
}

/// Maps model attribute names to register-mirror fields, built from
/// the bundle's binding section.
pub struct CheckerBinding {
    entries: Vec<BindEntry>,
}

impl CheckerBinding {
    /// `bindings` pairs register/field dot-paths with attribute names,
    /// as loaded from a bundle. A two-segment path takes the whole
    /// register.
    pub fn from_bindings(
        model: &RegModel,
        bindings: &[(String, String)],
    ) -> Result<CheckerBinding, CheckError> {
        let mut entries = Vec::new();
        for (path, attr) in bindings {
            let parts: Vec<&str> = path.split('.').collect();
            if parts.len() != 2 && parts.len() != 3 {
                return Err(CheckError::BindResolve {
                    path: path.clone(),
                    msg: "expected block.REG or block.REG.FIELD".to_string(),
                });
            }
            let id = model
                .lookup(&format!("{}.{}", parts[0], parts[1]))
                .map_err(|e| CheckError::BindResolve {
                    path: path.clone(),
                    msg: e.to_string(),
                })?;
            let (lsb, mask) = if parts.len() == 2 {
                (0, u32::MAX)
            } else {
                let def = model.def(id);
                let field = def
                    .fields
                    .iter()
                    .find(|f| f.name == parts[2])
                    .ok_or_else(|| CheckError::BindResolve {
                        path: path.clone(),
                        msg: format!("register has no field `{}`", parts[2]),
                    })?;
                (field.lsb, field.mask() >> field.lsb)
            };
            entries.push(BindEntry {
                attr: attr.clone(),
                id,
                lsb,
                mask,
            });
        }
        Ok(CheckerBinding { entries })
    }

    /// Reads the bound fields out of the mirror right now. Unknown
    /// mirrors fall back to their reset values.
    pub fn snapshot(&self, model: &RegModel) -> AttributeSet {
        let mut attrs = AttributeSet::new();
        for e in &self.entries {
            let word = model
                .mirror(e.id)
                .unwrap_or_else(|| model.def(e.id).reset_value());
            attrs.set(&e.attr, ((word >> e.lsb) & e.mask) as u64);
        }
        attrs
    }

    pub fn attrs(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.attr.as_str()).collect()
    }
}

/// A golden reference: a pure function of (input frame, attributes).
pub trait RefModel {
    fn id(&self) -> &str;
    fn schema(&self) -> Vec<String>;
    fn eval(&self, input: &Frame, attrs: &AttributeSet) -> Result<Frame, CheckError>;
}

/// Applies `f` to every pixel, producing a frame at `out_bpp`.
/// Parallel when the `parallel` feature is on.
pub fn map_pixels(frame: &Frame, out_bpp: u32, f: impl Fn(u16) -> u16 + Sync + Send) -> Frame {
    #[cfg(feature = "parallel")]
    let pixels: Vec<u16> = {
        use rayon::prelude::*;
        frame.pixels().par_iter().map(|p| f(*p)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let pixels: Vec<u16> = frame.pixels().iter().map(|p| f(*p)).collect();
    Frame::new(frame.width(), frame.height(), out_bpp, pixels)
        .expect("pixel map must respect the output bit depth")
}

/// Single-threaded variant, kept callable so the benchmark can compare
/// the two paths.
pub fn map_pixels_seq(frame: &Frame, out_bpp: u32, f: impl Fn(u16) -> u16) -> Frame {
    let pixels: Vec<u16> = frame.pixels().iter().map(|p| f(*p)).collect();
    Frame::new(frame.width(), frame.height(), out_bpp, pixels)
        .expect("pixel map must respect the output bit depth")
}

/// Gain-and-offset corrector: per pixel, unsigned 4.4 fixed-point gain
/// then a signed 8-bit offset, clipped to 0..=255.
pub struct GancRef;

impl GancRef {
    pub fn pixel(pix: u16, gain: u64, offset: u64) -> u16 {
        let p = pix as i64;
        let g = (gain & 0xFF) as i64;
        let o = ((offset & 0xFF) as u8 as i8) as i64;
        (((p * g) >> 4) + o).clamp(0, 255) as u16
    }
}

impl RefModel for GancRef {
    fn id(&self) -> &str {
        "ganc"
    }

    fn schema(&self) -> Vec<String> {
        vec!["gain".to_string(), "offset".to_string()]
    }

    fn eval(&self, input: &Frame, attrs: &AttributeSet) -> Result<Frame, CheckError> {
        let gain = require(attrs, self.id(), "gain")?;
        let offset = require(attrs, self.id(), "offset")?;
        Ok(map_pixels(input, 8, move |p| Self::pixel(p, gain, offset)))
    }
}

/// Binary thresholder: 255 where pixel ≥ threshold, else 0.
pub struct ThrRef;

impl ThrRef {
    pub fn pixel(pix: u16, thresh: u64) -> u16 {
        if pix as u64 >= (thresh & 0xFF) {
            255
        } else {
            0
        }
    }
}

impl RefModel for ThrRef {
    fn id(&self) -> &str {
        "thr"
    }

    fn schema(&self) -> Vec<String> {
        vec!["threshold".to_string()]
    }

    fn eval(&self, input: &Frame, attrs: &AttributeSet) -> Result<Frame, CheckError> {
        let thresh = require(attrs, self.id(), "threshold")?;
        Ok(map_pixels(input, 8, move |p| Self::pixel(p, thresh)))
    }
}

/// Chains reference models; the expected output of a pipeline is the
/// composition of its stages.
pub struct ComposedRef {
    id: String,
    stages: Vec<Rc<dyn RefModel>>,
}

impl ComposedRef {
    pub fn new(id: &str, stages: Vec<Rc<dyn RefModel>>) -> ComposedRef {
        ComposedRef {
            id: id.to_string(),
            stages,
        }
    }
}

impl RefModel for ComposedRef {
    fn id(&self) -> &str {
        &self.id
    }

    fn schema(&self) -> Vec<String> {
        let mut names = Vec::new();
        for s in &self.stages {
            for n in s.schema() {
                if !names.contains(&n) {
                    names.push(n);
                }
            }
        }
        names
    }

    fn eval(&self, input: &Frame, attrs: &AttributeSet) -> Result<Frame, CheckError> {
        let mut frame = input.clone();
        for s in &self.stages {
            frame = s.eval(&frame, attrs)?;
        }
        Ok(frame)
    }
}

static REF_DIR_SEQ: AtomicU64 = AtomicU64::new(0);

/// Reference model run as an external executable: the input frame is
/// written as `input.pgm`, attributes as `name=value` lines in
/// `attrs.txt`, and the program is invoked with the three file paths
/// (input, attrs, output) appended to its arguments.
pub struct ExternalRefModel {
    id: String,
    schema: Vec<String>,
    program: String,
    args: Vec<String>,
}

impl ExternalRefModel {
    pub fn new(id: &str, schema: &[&str], program: &str, args: &[&str]) -> ExternalRefModel {
        ExternalRefModel {
            id: id.to_string(),
            schema: schema.iter().map(|s| s.to_string()).collect(),
            program: program.to_string(),
            args: args.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl RefModel for ExternalRefModel {
    fn id(&self) -> &str {
        &self.id
    }

    fn schema(&self) -> Vec<String> {
        self.schema.clone()
    }

    fn eval(&self, input: &Frame, attrs: &AttributeSet) -> Result<Frame, CheckError> {
        for name in &self.schema {
            require(attrs, &self.id, name)?;
        }
        let n = REF_DIR_SEQ.fetch_add(1, Ordering::Relaxed);
        let dir = std::env::temp_dir().join(format!(
            "vfab-ref-{}-{}-{n}",
            self.id,
            std::process::id()
        ));
        std::fs::create_dir_all(&dir)?;
        let run = (|| {
            let in_path = dir.join("input.pgm");
            let attr_path = dir.join("attrs.txt");
            let out_path = dir.join("output.pgm");
            std::fs::write(&in_path, write_pgm(input)?)?;
            std::fs::write(&attr_path, attrs.to_lines())?;
            let output = std::process::Command::new(&self.program)
                .args(&self.args)
                .arg(&in_path)
                .arg(&attr_path)
                .arg(&out_path)
                .output()?;
            if !output.status.success() {
                return Err(CheckError::RefModel(format!(
                    "{} exited with {}: {}",
                    self.program,
                    output.status,
                    String::from_utf8_lossy(&output.stderr).trim()
                )));
            }
            let bytes = std::fs::read(&out_path).map_err(|e| {
                CheckError::RefModel(format!("{} produced no output.pgm: {e}", self.program))
            })?;
            read_pgm(&bytes)
                .map_err(|e| CheckError::RefModel(format!("malformed output.pgm: {e}")))
        })();
        let _ = std::fs::remove_dir_all(&dir);
        run
    }
}

pub const MISMATCH_DETAIL_LIMIT: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MismatchDetail {
    pub x: u32,
    pub y: u32,
    pub expected: u16,
    pub actual: u16,
}

/// Outcome of one frame comparison: every differing pixel counted,
/// the first few located.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MismatchReport {
    pub total: u64,
    pub details: Vec<MismatchDetail>,
    pub input_id: u64,
    pub output_id: u64,
}

/// Pixel-exact comparison. Geometry differences are an error, not a
/// pixel count.
pub fn check_frame(actual: &Frame, expected: &Frame) -> Result<MismatchReport, CheckError> {
    if actual.width() != expected.width()
        || actual.height() != expected.height()
        || actual.bpp() != expected.bpp()
    {
        return Err(CheckError::Geometry {
            expected: format!(
                "{}x{}x{}",
                expected.width(),
                expected.height(),
                expected.bpp()
            ),
            actual: format!("{}x{}x{}", actual.width(), actual.height(), actual.bpp()),
        });
    }
    let mut report = MismatchReport::default();
    for (i, (a, e)) in actual.pixels().iter().zip(expected.pixels()).enumerate() {
        if a != e {
            report.total += 1;
            if report.details.len() < MISMATCH_DETAIL_LIMIT {
                let (x, y) = expected.coords(i);
                report.details.push(MismatchDetail {
                    x,
                    y,
                    expected: *e,
                    actual: *a,
                });
            }
        }
    }
    Ok(report)
}

struct SbInner {
    path: String,
    failures: FailureSink,
    model: Rc<dyn RefModel>,
    binding: CheckerBinding,
    regmodel: RegModel,
    pending_attrs: VecDeque<AttributeSet>,
    expected: VecDeque<(u64, Frame)>,
    next_in_id: u64,
    next_out_id: u64,
    mismatch_total: u64,
    frames_checked: u64,
    reports: Vec<MismatchReport>,
}

/// Ordered frame scoreboard: for each observed input frame it
/// snapshots the bound attributes (at that frame's start), computes
/// the expected output, and matches output frames in arrival order.
#[derive(Clone)]
pub struct FrameScoreboard {
    inner: Rc<RefCell<SbInner>>,
}

impl FrameScoreboard {
    pub fn new(
        path: &str,
        failures: FailureSink,
        model: Rc<dyn RefModel>,
        binding: CheckerBinding,
        regmodel: RegModel,
    ) -> FrameScoreboard {
        FrameScoreboard {
            inner: Rc::new(RefCell::new(SbInner {
                path: path.to_string(),
                failures,
                model,
                binding,
                regmodel,
                pending_attrs: VecDeque::new(),
                expected: VecDeque::new(),
                next_in_id: 0,
                next_out_id: 0,
                mismatch_total: 0,
                frames_checked: 0,
                reports: Vec::new(),
            })),
        }
    }

    /// Registers the scoreboard as a component and returns the handle.
    pub fn build(
        tb: &mut Tb,
        parent: CompId,
        name: &str,
        model: Rc<dyn RefModel>,
        binding: CheckerBinding,
        regmodel: RegModel,
    ) -> Result<FrameScoreboard, TbError> {
        let id = tb.add_child(parent, name, CompKind::Scoreboard)?;
        let path = tb.tree.path(id).to_string();
        Ok(FrameScoreboard::new(
            &path,
            tb.failures.clone(),
            model,
            binding,
            regmodel,
        ))
    }

    /// Input-frame start: snapshot the attributes this frame will be
    /// checked against.
    pub fn on_in_start(&self, _t: SimTime) {
        let mut s = self.inner.borrow_mut();
        let attrs = s.binding.snapshot(&s.regmodel);
        s.pending_attrs.push_back(attrs);
    }

    /// Completed input frame: compute and queue the expected output.
    pub fn on_in_frame(&self, f: &Frame) {
        let mut s = self.inner.borrow_mut();
        let attrs = s
            .pending_attrs
            .pop_front()
            .unwrap_or_else(|| s.binding.snapshot(&s.regmodel));
        let id = s.next_in_id;
        s.next_in_id += 1;
        match s.model.eval(f, &attrs) {
            Ok(expected) => s.expected.push_back((id, expected)),
            Err(e) => {
                let (path, msg) = (s.path.clone(), format!("input frame {id}: {e}"));
                s.failures.fail(&path, FailKind::RefModelError, msg);
            }
        }
    }

    /// Completed output frame: match against the oldest expected one.
    pub fn on_out_frame(&self, f: &Frame) {
        let mut s = self.inner.borrow_mut();
        let out_id = s.next_out_id;
        s.next_out_id += 1;
        let Some((in_id, expected)) = s.expected.pop_front() else {
            let (path, msg) = (
                s.path.clone(),
                format!("output frame {out_id} arrived with nothing expected"),
            );
            s.failures.fail(&path, FailKind::UnexpectedFrame, msg);
            return;
        };
        s.frames_checked += 1;
        match check_frame(f, &expected) {
            Err(e) => {
                let (path, msg) = (s.path.clone(), format!("frame {in_id}: {e}"));
                s.failures.fail(&path, FailKind::FrameGeometry, msg);
            }
            Ok(mut report) => {
                report.input_id = in_id;
                report.output_id = out_id;
                if report.total > 0 {
                    s.mismatch_total += report.total;
                    let d = report.details[0];
                    let (path, msg) = (
                        s.path.clone(),
                        format!(
                            "frame {in_id}: {} pixel mismatches, first at ({}, {}): expected {:#04x}, actual {:#04x}",
                            report.total, d.x, d.y, d.expected, d.actual
                        ),
                    );
                    s.failures.fail(&path, FailKind::FrameMismatch, msg);
                }
                s.reports.push(report);
            }
        }
    }

    /// End-of-test check: everything expected must have arrived.
    pub fn check(&self) {
        let s = self.inner.borrow();
        if let Some((first_id, _)) = s.expected.front() {
            s.failures.fail(
                &s.path,
                FailKind::LeftoverExpected,
                format!(
                    "{} expected frame(s) never arrived, first from input frame {first_id}",
                    s.expected.len()
                ),
            );
        }
    }

    pub fn mismatch_total(&self) -> u64 {
        self.inner.borrow().mismatch_total
    }

    pub fn frames_checked(&self) -> u64 {
        self.inner.borrow().frames_checked
    }

    pub fn outstanding(&self) -> usize {
        self.inner.borrow().expected.len()
    }

    pub fn reports(&self) -> Vec<MismatchReport> {
        self.inner.borrow().reports.clone()
    }
}
