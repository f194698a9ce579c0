//! Testbench structure: component tree, phased execution, configuration,
//! factory overrides, analysis connections and end-of-test bookkeeping.
//!
//! An environment implements [`Env`] and is driven through the fixed phase
//! order build, connect, run, extract, check, report by [`run_phases`].
//! During the run phase simulated time advances until every raised
//! objection has dropped or the watchdog expires; a watchdog hit produces
//! a failure that names each suspended process and what it was waiting on.

pub mod analysis;
pub mod config;

pub use analysis::AnalysisPort;
pub use config::{glob_match, CfgValue, ConfigDB};

use std::any::Any;
use std::cell::Cell;
use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::rc::Rc;

use thiserror::Error;

use crate::sim::{Sim, SimError, SimTime};

use analysis::{ExportEntry, PortEntry};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum Phase {
    Build,
    Connect,
    Run,
    Extract,
    Check,
    Report,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Phase::Build => "build",
            Phase::Connect => "connect",
            Phase::Run => "run",
            Phase::Extract => "extract",
            Phase::Check => "check",
            Phase::Report => "report",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum CompKind {
    Env,
    Agent,
    Driver,
    Monitor,
    Sequencer,
    Scoreboard,
    Checker,
    Custom,
}

impl fmt::Display for CompKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CompKind::Env => "env",
            CompKind::Agent => "agent",
            CompKind::Driver => "driver",
            CompKind::Monitor => "monitor",
            CompKind::Sequencer => "sequencer",
            CompKind::Scoreboard => "scoreboard",
            CompKind::Checker => "checker",
            CompKind::Custom => "custom",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub struct CompId(usize);

struct Node {
    name: String,
    path: String,
    kind: CompKind,
    parent: Option<CompId>,
    children: Vec<CompId>,
    stamps: Vec<(Phase, SimTime)>,
}

/// Hierarchy of named components with unique dot-joined paths.
#[derive(Default)]
pub struct ComponentTree {
    nodes: Vec<Node>,
    by_path: HashMap<String, CompId>,
}

impl ComponentTree {
    pub fn new() -> Self {
        ComponentTree::default()
    }

    fn insert(
        &mut self,
        parent: Option<CompId>,
        name: &str,
        kind: CompKind,
    ) -> Result<CompId, TbError> {
        if name.is_empty() || name.contains('.') {
            return Err(TbError::BadName(name.to_string()));
        }
        let path = match parent {
            Some(p) => format!("{}.{}", self.nodes[p.0].path, name),
            None => name.to_string(),
        };
        if self.by_path.contains_key(&path) {
            return Err(TbError::DuplicatePath(path));
        }
        let id = CompId(self.nodes.len());
        self.nodes.push(Node {
            name: name.to_string(),
            path: path.clone(),
            kind,
            parent,
            children: Vec::new(),
            stamps: Vec::new(),
        });
        if let Some(p) = parent {
            self.nodes[p.0].children.push(id);
        }
        self.by_path.insert(path, id);
        Ok(id)
    }

    pub fn lookup(&self, path: &str) -> Option<CompId> {
        self.by_path.get(path).copied()
    }

    pub fn path(&self, id: CompId) -> &str {
        &self.nodes[id.0].path
    }

    pub fn name(&self, id: CompId) -> &str {
        &self.nodes[id.0].name
    }

    pub fn kind(&self, id: CompId) -> CompKind {
        self.nodes[id.0].kind
    }

    pub fn parent(&self, id: CompId) -> Option<CompId> {
        self.nodes[id.0].parent
    }

    pub fn children(&self, id: CompId) -> &[CompId] {
        &self.nodes[id.0].children
    }

    /// The set of child kinds, used by the active/passive agent checks.
    pub fn child_kinds(&self, id: CompId) -> BTreeSet<CompKind> {
        self.nodes[id.0]
            .children
            .iter()
            .map(|c| self.nodes[c.0].kind)
            .collect()
    }

    pub fn stamp(&mut self, id: CompId, phase: Phase, time: SimTime) {
        self.nodes[id.0].stamps.push((phase, time));
    }

    pub fn stamps(&self, id: CompId) -> &[(Phase, SimTime)] {
        &self.nodes[id.0].stamps
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = CompId> + '_ {
        (0..self.nodes.len()).map(CompId)
    }
}

/// Interface profile of an IP: how many interfaces of each class the
/// design exposes. `a` input video, `b` memory, `c` output video,
/// `d` interrupt lines, `e` register interfaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InterfaceProfile {
    pub a: u32,
    pub b: u32,
    pub c: u32,
    pub d: u32,
    pub e: u32,
}

/// Role of video agent `i` in a derived plan.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VideoRole {
    pub drives_input: bool,
    pub monitors_output: bool,
}

/// Instantiation plan derived from an [`InterfaceProfile`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgentPlan {
    pub reg_agents: u32,
    pub video_agents: Vec<VideoRole>,
    pub interrupt_checkers: u32,
    pub warnings: Vec<String>,
}

impl AgentPlan {
    pub fn is_empty(&self) -> bool {
        self.reg_agents == 0 && self.video_agents.is_empty() && self.interrupt_checkers == 0
    }
}

/// Expands a profile into agent instances: one register agent per register
/// interface, max(a, c) video agents where agent `i` drives input `i` when
/// `i < a` and monitors output `i` when `i < c`, and one interrupt checker
/// per interrupt line. Memory interfaces are out of scope and only warned
/// about.
pub fn derive_agent_plan(profile: &InterfaceProfile) -> AgentPlan {
    let m = profile.a.max(profile.c);
    let video_agents = (0..m)
        .map(|i| VideoRole {
            drives_input: i < profile.a,
            monitors_output: i < profile.c,
        })
        .collect();
    let mut warnings = Vec::new();
    if profile.b > 0 {
        warnings.push(format!(
            "profile declares {} memory interface(s); memory UVCs are not supported and were skipped",
            profile.b
        ));
    }
    AgentPlan {
        reg_agents: profile.e,
        video_agents,
        interrupt_checkers: profile.d,
        warnings,
    }
}

/// Classified failure recorded by a checker, scoreboard or sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct Failure {
    pub source: String,
    pub kind: FailKind,
    pub msg: String,
    pub time: SimTime,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FailKind {
    ResetValue,
    BitBash,
    WriteReadBack,
    RegSelfCheck,
    RegAccess,
    BusProtocol,
    BusTimeout,
    FrameMismatch,
    FrameGeometry,
    FrameFraming,
    LeftoverExpected,
    UnexpectedFrame,
    IrqSpurious,
    IrqMissing,
    Hang,
    SequenceError,
    SwError,
    VriError,
    RefModelError,
    ConfigError,
}

impl fmt::Display for FailKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FailKind::ResetValue => "reset_value",
            FailKind::BitBash => "bit_bash",
            FailKind::WriteReadBack => "write_read_back",
            FailKind::RegSelfCheck => "reg_self_check",
            FailKind::RegAccess => "reg_access",
            FailKind::BusProtocol => "bus_protocol",
            FailKind::BusTimeout => "bus_timeout",
            FailKind::FrameMismatch => "frame_mismatch",
            FailKind::FrameGeometry => "frame_geometry",
            FailKind::FrameFraming => "frame_framing",
            FailKind::LeftoverExpected => "leftover_expected",
            FailKind::UnexpectedFrame => "unexpected_frame",
            FailKind::IrqSpurious => "irq_spurious",
            FailKind::IrqMissing => "irq_missing",
            FailKind::Hang => "hang",
            FailKind::SequenceError => "sequence_error",
            FailKind::SwError => "sw_error",
            FailKind::VriError => "vri_error",
            FailKind::RefModelError => "ref_model_error",
            FailKind::ConfigError => "config_error",
        };
        f.write_str(s)
    }
}

/// Shared sink for failures; clones refer to the same list.
#[derive(Clone)]
pub struct FailureSink {
    sim: Sim,
    list: Rc<RefCell<Vec<Failure>>>,
}

impl FailureSink {
    pub fn new(sim: &Sim) -> Self {
        FailureSink {
            sim: sim.clone(),
            list: Rc::new(RefCell::new(Vec::new())),
        }
    }

    pub fn fail(&self, source: &str, kind: FailKind, msg: impl Into<String>) {
        self.list.borrow_mut().push(Failure {
            source: source.to_string(),
            kind,
            msg: msg.into(),
            time: self.sim.now(),
        });
    }

    pub fn count(&self) -> usize {
        self.list.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.list.borrow().is_empty()
    }

    pub fn snapshot(&self) -> Vec<Failure> {
        self.list.borrow().clone()
    }
}

/// Counted end-of-test objections. The run phase keeps time moving while
/// at least one objection is raised.
#[derive(Clone)]
pub struct Objections {
    count: Rc<Cell<i64>>,
}

impl Objections {
    pub fn new() -> Self {
        Objections {
            count: Rc::new(Cell::new(0)),
        }
    }

    pub fn raise(&self) {
        self.count.set(self.count.get() + 1);
    }

    pub fn drop_one(&self) {
        let n = self.count.get() - 1;
        assert!(n >= 0, "objection dropped more times than raised");
        self.count.set(n);
    }

    pub fn pending(&self) -> i64 {
        self.count.get()
    }
}

impl Default for Objections {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Error)]
pub enum TbError {
    #[error("component name `{0}` is empty or contains a dot")]
    BadName(String),
    #[error("duplicate component path {0}")]
    DuplicatePath(String),
    #[error("no component at path {0}")]
    UnknownComponent(String),
    #[error("{op} is only legal in the {want} phase (current phase: {got})")]
    PhaseOrder { op: String, want: Phase, got: Phase },
    #[error("no analysis port named {0}")]
    UnknownPort(String),
    #[error("no analysis export named {0}")]
    UnknownExport(String),
    #[error("duplicate analysis endpoint {0}")]
    DuplicateEndpoint(String),
    #[error("type mismatch connecting {port} ({port_ty}) to {export} ({export_ty})")]
    PortTypeMismatch {
        port: String,
        port_ty: String,
        export: String,
        export_ty: String,
    },
    #[error("active agent {0} has no interface binding")]
    MissingBinding(String),
    #[error("factory has no constructor registered under key {0}")]
    UnknownCtor(String),
    #[error("no resource bound at {0}")]
    UnknownResource(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{0}")]
    Config(String),
}

/// Constructor hook registered with the factory.
pub type Ctor = Rc<dyn Fn(&mut Tb, CompId, &str) -> Result<CompId, TbError>>;

/// Type substitution by path pattern: when a component would be created
/// from `from` at a path matching `pattern`, `to`'s constructor runs
/// instead. The last matching override wins.
#[derive(Default)]
pub struct Factory {
    ctors: HashMap<String, Ctor>,
    overrides: Vec<(String, String, String)>,
}

impl Factory {
    pub fn register(&mut self, key: &str, ctor: Ctor) {
        self.ctors.insert(key.to_string(), ctor);
    }

    pub fn set_override(&mut self, pattern: &str, from: &str, to: &str) {
        self.overrides
            .push((pattern.to_string(), from.to_string(), to.to_string()));
    }

    pub fn resolve(&self, path: &str, requested: &str) -> String {
        self.overrides
            .iter()
            .rev()
            .find(|(pat, from, _)| from == requested && glob_match(pat, path))
            .map(|(_, _, to)| to.clone())
            .unwrap_or_else(|| requested.to_string())
    }

    fn ctor(&self, key: &str) -> Option<Ctor> {
        self.ctors.get(key).cloned()
    }
}

/// Everything an environment needs while being built and run: the kernel,
/// configuration, tree, analysis registry, factory, failure sink and
/// objections, plus a name-keyed resource registry for handles that cross
/// module boundaries (sequencers, register contexts).
pub struct Tb {
    pub sim: Sim,
    pub cfg: ConfigDB,
    pub tree: ComponentTree,
    pub factory: Factory,
    pub failures: FailureSink,
    pub objections: Objections,
    phase: Phase,
    ports: HashMap<String, PortEntry>,
    exports: HashMap<String, ExportEntry>,
    resources: HashMap<String, Box<dyn Any>>,
    coverage: Vec<(String, f64)>,
    mismatches: u64,
    report_lines: Vec<String>,
}

impl Tb {
    pub fn new(sim: Sim) -> Self {
        let failures = FailureSink::new(&sim);
        Tb {
            sim,
            cfg: ConfigDB::new(),
            tree: ComponentTree::new(),
            factory: Factory::default(),
            failures,
            objections: Objections::new(),
            phase: Phase::Build,
            ports: HashMap::new(),
            exports: HashMap::new(),
            resources: HashMap::new(),
            coverage: Vec::new(),
            mismatches: 0,
            report_lines: Vec::new(),
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    fn require_phase(&self, op: &str, want: Phase) -> Result<(), TbError> {
        if self.phase != want {
            return Err(TbError::PhaseOrder {
                op: op.to_string(),
                want,
                got: self.phase,
            });
        }
        Ok(())
    }

    /// Adds a root component. Build phase only.
    pub fn add_top(&mut self, name: &str, kind: CompKind) -> Result<CompId, TbError> {
        self.require_phase("add_top", Phase::Build)?;
        let id = self.tree.insert(None, name, kind)?;
        let now = self.sim.now();
        self.tree.stamp(id, Phase::Build, now);
        Ok(id)
    }

    /// Adds a child component. Build phase only.
    pub fn add_child(
        &mut self,
        parent: CompId,
        name: &str,
        kind: CompKind,
    ) -> Result<CompId, TbError> {
        self.require_phase("add_child", Phase::Build)?;
        let id = self.tree.insert(Some(parent), name, kind)?;
        let now = self.sim.now();
        self.tree.stamp(id, Phase::Build, now);
        Ok(id)
    }

    /// Creates a child through the factory, honoring overrides keyed on
    /// the would-be path of the new component.
    pub fn create(&mut self, key: &str, parent: CompId, name: &str) -> Result<CompId, TbError> {
        let full = format!("{}.{}", self.tree.path(parent), name);
        let resolved = self.factory.resolve(&full, key);
        let ctor = self
            .factory
            .ctor(&resolved)
            .ok_or(TbError::UnknownCtor(resolved))?;
        ctor(self, parent, name)
    }

    /// Declares an analysis port on a component. Build phase only.
    pub fn add_port<T: 'static>(
        &mut self,
        comp: CompId,
        port: &str,
    ) -> Result<AnalysisPort<T>, TbError> {
        self.require_phase("add_port", Phase::Build)?;
        let key = format!("{}.{}", self.tree.path(comp), port);
        if self.ports.contains_key(&key) {
            return Err(TbError::DuplicateEndpoint(key));
        }
        let p = AnalysisPort::new();
        self.ports.insert(key, PortEntry::new(p.clone()));
        Ok(p)
    }

    /// Declares a named export (subscriber callback). Build phase only.
    pub fn add_export<T: 'static>(
        &mut self,
        comp: CompId,
        name: &str,
        cb: impl Fn(&T) + 'static,
    ) -> Result<(), TbError> {
        self.require_phase("add_export", Phase::Build)?;
        let key = format!("{}.{}", self.tree.path(comp), name);
        if self.exports.contains_key(&key) {
            return Err(TbError::DuplicateEndpoint(key));
        }
        let cb: Rc<dyn Fn(&T)> = Rc::new(cb);
        self.exports.insert(key, ExportEntry::new(cb));
        Ok(())
    }

    /// Connects a declared port to a declared export. Connect phase only;
    /// items later published on the port reach the export synchronously.
    pub fn connect_analysis<T: 'static>(
        &mut self,
        port_path: &str,
        export_path: &str,
    ) -> Result<(), TbError> {
        self.require_phase("connect_analysis", Phase::Connect)?;
        let pe = self
            .ports
            .get(port_path)
            .ok_or_else(|| TbError::UnknownPort(port_path.to_string()))?;
        let ee = self
            .exports
            .get(export_path)
            .ok_or_else(|| TbError::UnknownExport(export_path.to_string()))?;
        if pe.type_id != ee.type_id || pe.downcast::<T>().is_none() {
            return Err(TbError::PortTypeMismatch {
                port: port_path.to_string(),
                port_ty: pe.type_name.to_string(),
                export: export_path.to_string(),
                export_ty: ee.type_name.to_string(),
            });
        }
        let port = pe.downcast::<T>().unwrap().clone();
        let cb = ee
            .downcast::<T>()
            .expect("type id matched but downcast failed");
        port.subscribe(export_path, cb);
        Ok(())
    }

    /// Subscribes a bare callback to a port, for recorders and taps that
    /// have no component identity. Connect phase only.
    pub fn tap<T: 'static>(
        &mut self,
        port_path: &str,
        name: &str,
        cb: impl Fn(&T) + 'static,
    ) -> Result<(), TbError> {
        self.require_phase("tap", Phase::Connect)?;
        let pe = self
            .ports
            .get(port_path)
            .ok_or_else(|| TbError::UnknownPort(port_path.to_string()))?;
        let port = pe
            .downcast::<T>()
            .ok_or_else(|| TbError::PortTypeMismatch {
                port: port_path.to_string(),
                port_ty: pe.type_name.to_string(),
                export: name.to_string(),
                export_ty: std::any::type_name::<T>().to_string(),
            })?
            .clone();
        port.subscribe(name, Rc::new(cb));
        Ok(())
    }

    /// Fetches a declared port by path, e.g. for a component that wants to
    /// publish on a port its parent declared.
    pub fn port<T: 'static>(&self, port_path: &str) -> Result<AnalysisPort<T>, TbError> {
        let pe = self
            .ports
            .get(port_path)
            .ok_or_else(|| TbError::UnknownPort(port_path.to_string()))?;
        pe.downcast::<T>()
            .cloned()
            .ok_or_else(|| TbError::UnknownPort(port_path.to_string()))
    }

    /// Binds a shared handle under a name for cross-module lookup.
    pub fn bind<T: 'static>(&mut self, name: &str, value: Rc<T>) {
        self.resources.insert(name.to_string(), Box::new(value));
    }

    pub fn lookup<T: 'static>(&self, name: &str) -> Result<Rc<T>, TbError> {
        self.resources
            .get(name)
            .and_then(|b| b.downcast_ref::<Rc<T>>().cloned())
            .ok_or_else(|| TbError::UnknownResource(name.to_string()))
    }

    pub fn fail(&self, source: &str, kind: FailKind, msg: impl Into<String>) {
        self.failures.fail(source, kind, msg);
    }

    pub fn record_coverage(&mut self, group: &str, pct: f64) {
        self.coverage.push((group.to_string(), pct));
    }

    pub fn add_mismatches(&mut self, n: u64) {
        self.mismatches += n;
    }

    pub fn report_line(&mut self, line: impl Into<String>) {
        self.report_lines.push(line.into());
    }

    fn stamp_all(&mut self, phase: Phase) {
        let now = self.sim.now();
        let ids: Vec<CompId> = self.tree.ids().collect();
        for id in ids {
            self.tree.stamp(id, phase, now);
        }
    }
}

/// Verification environment hooks, one per phase. Build creates tree
/// nodes and declares endpoints, connect wires analysis paths, start
/// spawns run-phase processes, extract pulls statistics, check renders
/// final verdicts, report contributes summary lines.
pub trait Env {
    fn build(&mut self, tb: &mut Tb) -> Result<(), TbError>;
    fn connect(&mut self, _tb: &mut Tb) -> Result<(), TbError> {
        Ok(())
    }
    fn start(&mut self, tb: &mut Tb) -> Result<(), TbError>;
    fn extract(&mut self, _tb: &mut Tb) {}
    fn check(&mut self, _tb: &mut Tb) {}
    fn report(&mut self, _tb: &mut Tb) -> Vec<String> {
        Vec::new()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Verdict {
    Pass,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        })
    }
}

/// Immutable outcome of a phased run.
#[derive(Clone, Debug)]
pub struct TestResult {
    pub verdict: Verdict,
    pub end_time: SimTime,
    pub failures: Vec<Failure>,
    pub trace_hash: u64,
    pub coverage: Vec<(String, f64)>,
    pub mismatches: u64,
    pub report: Vec<String>,
}

/// Runs the full phase sequence over the given environments. A build or
/// connect error aborts into a failed result; a watchdog expiry records a
/// hang failure with a list of suspended processes and then continues
/// with extraction and checking so partial evidence is still reported.
pub fn run_phases(tb: &mut Tb, envs: &mut [&mut dyn Env], watchdog: SimTime) -> TestResult {
    let mut structural_error = None;

    tb.phase = Phase::Build;
    for env in envs.iter_mut() {
        if let Err(e) = env.build(tb) {
            structural_error = Some(format!("build: {e}"));
            break;
        }
    }

    if structural_error.is_none() {
        tb.phase = Phase::Connect;
        tb.stamp_all(Phase::Connect);
        for env in envs.iter_mut() {
            if let Err(e) = env.connect(tb) {
                structural_error = Some(format!("connect: {e}"));
                break;
            }
        }
    }

    if let Some(msg) = structural_error {
        tb.fail("run_phases", FailKind::ConfigError, msg);
        let failures = tb.failures.snapshot();
        return TestResult {
            verdict: Verdict::Fail,
            end_time: tb.sim.now(),
            failures,
            trace_hash: tb.sim.trace_hash(),
            coverage: std::mem::take(&mut tb.coverage),
            mismatches: tb.mismatches,
            report: std::mem::take(&mut tb.report_lines),
        };
    }

    tb.phase = Phase::Run;
    tb.stamp_all(Phase::Run);
    let mut start_error = None;
    for env in envs.iter_mut() {
        if let Err(e) = env.start(tb) {
            start_error = Some(format!("start: {e}"));
            break;
        }
    }
    if let Some(msg) = start_error {
        tb.fail("run_phases", FailKind::ConfigError, msg);
    } else {
        let objections = tb.objections.clone();
        let outcome = tb.sim.run_while(|| objections.pending() > 0, watchdog);
        match outcome {
            crate::sim::RunOutcome::ConditionMet(_) | crate::sim::RunOutcome::Stopped(_) => {}
            crate::sim::RunOutcome::Quiescent(t) => {
                let msg = hang_report(
                    &tb.sim,
                    &format!(
                        "event queue drained at {t} with {} objection(s) still raised",
                        objections.pending()
                    ),
                );
                tb.fail("run_phases", FailKind::Hang, msg);
            }
            crate::sim::RunOutcome::LimitReached(t) => {
                let msg = hang_report(&tb.sim, &format!("watchdog expired at {t}"));
                tb.fail("run_phases", FailKind::Hang, msg);
            }
        }
    }

    tb.phase = Phase::Extract;
    tb.stamp_all(Phase::Extract);
    for env in envs.iter_mut() {
        env.extract(tb);
    }

    tb.phase = Phase::Check;
    tb.stamp_all(Phase::Check);
    for env in envs.iter_mut() {
        env.check(tb);
    }

    tb.phase = Phase::Report;
    tb.stamp_all(Phase::Report);
    let mut report = Vec::new();
    for env in envs.iter_mut() {
        report.extend(env.report(tb));
    }
    report.extend(std::mem::take(&mut tb.report_lines));

    let end_time = tb.sim.now();
    tb.sim.teardown();
    let failures = tb.failures.snapshot();
    TestResult {
        verdict: if failures.is_empty() {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
        end_time,
        failures,
        trace_hash: tb.sim.trace_hash(),
        coverage: std::mem::take(&mut tb.coverage),
        mismatches: tb.mismatches,
        report,
    }
}

fn hang_report(sim: &Sim, head: &str) -> String {
    let live = sim.live_waits();
    if live.is_empty() {
        return format!("{head}; no suspended processes");
    }
    let mut msg = format!("{head}; suspended processes:");
    for (path, note) in live {
        let note = if note.is_empty() {
            "unknown wait".to_string()
        } else {
            note
        };
        msg.push_str(&format!(" [{path}: {note}]"));
    }
    msg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn agent_plan_counts_follow_the_profile() {
        let plan = derive_agent_plan(&InterfaceProfile {
            a: 2,
            b: 1,
            c: 3,
            d: 4,
            e: 1,
        });
        assert_eq!(plan.reg_agents, 1);
        assert_eq!(plan.video_agents.len(), 3);
        assert_eq!(plan.interrupt_checkers, 4);
        assert_eq!(plan.warnings.len(), 1, "memory interfaces warn");
        // Pairing: agent i drives input i iff i < a, monitors output i iff i < c.
        assert_eq!(
            plan.video_agents,
            vec![
                VideoRole { drives_input: true, monitors_output: true },
                VideoRole { drives_input: true, monitors_output: true },
                VideoRole { drives_input: false, monitors_output: true },
            ]
        );
    }

    #[test]
    fn all_zero_profile_gives_empty_plan() {
        let plan = derive_agent_plan(&InterfaceProfile { a: 0, b: 0, c: 0, d: 0, e: 0 });
        assert!(plan.is_empty());
        assert!(plan.warnings.is_empty());
    }

    #[test]
    fn demo_profile_gives_one_of_each() {
        let plan = derive_agent_plan(&InterfaceProfile { a: 1, b: 0, c: 1, d: 1, e: 1 });
        assert_eq!(plan.reg_agents, 1);
        assert_eq!(plan.video_agents.len(), 1);
        assert_eq!(plan.interrupt_checkers, 1);
        assert!(plan.video_agents[0].drives_input && plan.video_agents[0].monitors_output);
    }

    #[test]
    fn tree_paths_are_unique() {
        let mut tb = Tb::new(Sim::new());
        let env = tb.add_top("ganc_env", CompKind::Env).unwrap();
        let agent = tb.add_child(env, "reg_agent", CompKind::Agent).unwrap();
        tb.add_child(agent, "mon", CompKind::Monitor).unwrap();
        let err = tb.add_child(agent, "mon", CompKind::Monitor).unwrap_err();
        assert!(matches!(err, TbError::DuplicatePath(p) if p == "ganc_env.reg_agent.mon"));
        assert_eq!(tb.tree.path(agent), "ganc_env.reg_agent");
        assert_eq!(tb.tree.lookup("ganc_env.reg_agent"), Some(agent));
    }

    #[test]
    fn children_only_during_build() {
        let mut tb = Tb::new(Sim::new());
        let top = tb.add_top("env", CompKind::Env).unwrap();
        tb.phase = Phase::Run;
        let err = tb.add_child(top, "late", CompKind::Monitor).unwrap_err();
        assert!(matches!(err, TbError::PhaseOrder { .. }));
    }

    #[test]
    fn analysis_connection_delivers_to_all_subscribers_in_order() {
        let mut tb = Tb::new(Sim::new());
        let env = tb.add_top("env", CompKind::Env).unwrap();
        let mon = tb.add_child(env, "mon", CompKind::Monitor).unwrap();
        let sb = tb.add_child(env, "sb", CompKind::Scoreboard).unwrap();
        let cov = tb.add_child(env, "cov", CompKind::Custom).unwrap();
        let port: AnalysisPort<u32> = tb.add_port(mon, "txns").unwrap();
        let got = Rc::new(RefCell::new(Vec::new()));
        let g1 = got.clone();
        tb.add_export::<u32>(sb, "in", move |v| g1.borrow_mut().push(("sb", *v)))
            .unwrap();
        let g2 = got.clone();
        tb.add_export::<u32>(cov, "in", move |v| g2.borrow_mut().push(("cov", *v)))
            .unwrap();
        tb.phase = Phase::Connect;
        tb.connect_analysis::<u32>("env.mon.txns", "env.sb.in").unwrap();
        tb.connect_analysis::<u32>("env.mon.txns", "env.cov.in").unwrap();
        port.publish(&5);
        assert_eq!(*got.borrow(), vec![("sb", 5), ("cov", 5)]);
    }

    #[test]
    fn connect_rejected_outside_connect_phase() {
        let mut tb = Tb::new(Sim::new());
        let env = tb.add_top("env", CompKind::Env).unwrap();
        let mon = tb.add_child(env, "mon", CompKind::Monitor).unwrap();
        tb.add_port::<u32>(mon, "txns").unwrap();
        tb.add_export::<u32>(env, "in", |_| {}).unwrap();
        tb.phase = Phase::Run;
        let err = tb
            .connect_analysis::<u32>("env.mon.txns", "env.in")
            .unwrap_err();
        assert!(matches!(err, TbError::PhaseOrder { .. }));
    }

    #[test]
    fn connect_rejects_type_mismatch_and_unknown_names() {
        let mut tb = Tb::new(Sim::new());
        let env = tb.add_top("env", CompKind::Env).unwrap();
        let mon = tb.add_child(env, "mon", CompKind::Monitor).unwrap();
        tb.add_port::<u32>(mon, "txns").unwrap();
        tb.add_export::<String>(env, "in", |_| {}).unwrap();
        tb.phase = Phase::Connect;
        assert!(matches!(
            tb.connect_analysis::<u32>("env.mon.txns", "env.in"),
            Err(TbError::PortTypeMismatch { .. })
        ));
        assert!(matches!(
            tb.connect_analysis::<u32>("env.mon.nope", "env.in"),
            Err(TbError::UnknownPort(_))
        ));
        assert!(matches!(
            tb.connect_analysis::<u32>("env.mon.txns", "env.nope"),
            Err(TbError::UnknownExport(_))
        ));
    }

    #[test]
    fn factory_override_substitutes_by_path_pattern() {
        let mut tb = Tb::new(Sim::new());
        tb.factory.register(
            "plain_mon",
            Rc::new(|tb, parent, name| tb.add_child(parent, name, CompKind::Monitor)),
        );
        tb.factory.register(
            "fancy_mon",
            Rc::new(|tb, parent, name| tb.add_child(parent, name, CompKind::Checker)),
        );
        tb.factory.set_override("env.agent2.*", "plain_mon", "fancy_mon");
        let env = tb.add_top("env", CompKind::Env).unwrap();
        let a1 = tb.add_child(env, "agent1", CompKind::Agent).unwrap();
        let a2 = tb.add_child(env, "agent2", CompKind::Agent).unwrap();
        let m1 = tb.create("plain_mon", a1, "mon").unwrap();
        let m2 = tb.create("plain_mon", a2, "mon").unwrap();
        assert_eq!(tb.tree.kind(m1), CompKind::Monitor);
        assert_eq!(tb.tree.kind(m2), CompKind::Checker, "override applied");
        assert!(matches!(
            tb.create("missing", env, "x"),
            Err(TbError::UnknownCtor(_))
        ));
    }

    struct ToyEnv {
        drop_at: u64,
        fail_msg: Option<&'static str>,
        hang: bool,
    }

    impl Env for ToyEnv {
        fn build(&mut self, tb: &mut Tb) -> Result<(), TbError> {
            tb.add_top("toy", CompKind::Env)?;
            Ok(())
        }
        fn start(&mut self, tb: &mut Tb) -> Result<(), TbError> {
            tb.objections.raise();
            let obj = tb.objections.clone();
            let sim = tb.sim.clone();
            let drop_at = self.drop_at;
            let hang = self.hang;
            tb.sim.spawn("toy.test", async move {
                sim.delay(drop_at).await;
                if hang {
                    // Wait on an edge that never comes.
                    let s = sim.add_signal("toy.never", 1).unwrap();
                    s.wait_edge(crate::sim::EdgeKind::Rising).await;
                }
                obj.drop_one();
            });
            Ok(())
        }
        fn check(&mut self, tb: &mut Tb) {
            if let Some(msg) = self.fail_msg {
                tb.fail("toy.checker", FailKind::FrameMismatch, msg);
            }
        }
    }

    #[test]
    fn run_phases_passes_when_objections_drop() {
        let mut tb = Tb::new(Sim::new());
        let mut env = ToyEnv { drop_at: 5000, fail_msg: None, hang: false };
        let r = run_phases(&mut tb, &mut [&mut env], SimTime::from_ticks(1_000_000));
        assert_eq!(r.verdict, Verdict::Pass);
        assert_eq!(r.end_time, SimTime::from_ticks(5000));
        assert!(r.failures.is_empty());
    }

    #[test]
    fn run_phases_collects_checker_failures() {
        let mut tb = Tb::new(Sim::new());
        let mut env = ToyEnv { drop_at: 10, fail_msg: Some("expected 3 got 4"), hang: false };
        let r = run_phases(&mut tb, &mut [&mut env], SimTime::from_ticks(1_000_000));
        assert_eq!(r.verdict, Verdict::Fail);
        assert_eq!(r.failures.len(), 1);
        assert_eq!(r.failures[0].kind, FailKind::FrameMismatch);
    }

    #[test]
    fn watchdog_expiry_reports_hang_with_suspect_list() {
        let mut tb = Tb::new(Sim::new());
        let mut env = ToyEnv { drop_at: 10, fail_msg: None, hang: true };
        let r = run_phases(&mut tb, &mut [&mut env], SimTime::from_ticks(500));
        assert_eq!(r.verdict, Verdict::Fail);
        assert_eq!(r.failures.len(), 1);
        assert_eq!(r.failures[0].kind, FailKind::Hang);
        assert!(r.failures[0].msg.contains("toy.test"), "names the stuck process");
        assert!(r.failures[0].msg.contains("toy.never"), "names what it waits on");
    }

    #[test]
    fn phase_stamps_are_ordered_per_component() {
        let mut tb = Tb::new(Sim::new());
        let mut env = ToyEnv { drop_at: 100, fail_msg: None, hang: false };
        run_phases(&mut tb, &mut [&mut env], SimTime::from_ticks(1_000_000));
        let id = tb.tree.lookup("toy").unwrap();
        let stamps = tb.tree.stamps(id);
        let phases: Vec<Phase> = stamps.iter().map(|(p, _)| *p).collect();
        assert_eq!(
            phases,
            vec![Phase::Build, Phase::Connect, Phase::Run, Phase::Extract, Phase::Check, Phase::Report]
        );
        for w in stamps.windows(2) {
            assert!(w[0].1 <= w[1].1, "phase times never regress");
        }
    }

    #[test]
    fn build_error_becomes_failed_result() {
        struct BadEnv;
        impl Env for BadEnv {
            fn build(&mut self, tb: &mut Tb) -> Result<(), TbError> {
                tb.add_top("dup", CompKind::Env)?;
                tb.add_top("dup", CompKind::Env)?;
                Ok(())
            }
            fn start(&mut self, _tb: &mut Tb) -> Result<(), TbError> {
                Ok(())
            }
        }
        let mut tb = Tb::new(Sim::new());
        let r = run_phases(&mut tb, &mut [&mut BadEnv], SimTime::from_ticks(100));
        assert_eq!(r.verdict, Verdict::Fail);
        assert_eq!(r.failures[0].kind, FailKind::ConfigError);
        assert!(r.failures[0].msg.contains("duplicate component path"));
    }

    #[test]
    fn resources_round_trip_by_name() {
        let mut tb = Tb::new(Sim::new());
        tb.bind("env.sqr", Rc::new(42u32));
        assert_eq!(*tb.lookup::<u32>("env.sqr").unwrap(), 42);
        assert!(matches!(
            tb.lookup::<String>("env.sqr"),
            Err(TbError::UnknownResource(_))
        ));
        assert!(matches!(
            tb.lookup::<u32>("env.other"),
            Err(TbError::UnknownResource(_))
        ));
    }
}
