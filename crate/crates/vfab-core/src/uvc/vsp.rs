//! VSP video-stream UVC.
//!
//! Wire protocol: a one-cycle `frame_start` pulse announces a frame,
//! then each line is a contiguous `line_valid` run carrying exactly
//! `width` pixels flagged by `data_valid`. The producer may stall
//! mid-line (`line_valid` high, `data_valid` low) but never for more
//! than [`MAX_STALL_RUN`] consecutive cycles, and must leave `line_valid`
//! low for at least one cycle between lines. There is no backpressure:
//! the consumer keeps up by construction.

use std::rc::Rc;

use super::{Frame, VideoCmd, VspTiming};
use crate::seq::{Rng, Sequencer};
use crate::sim::{EdgeKind, Sim, SimError, SignalRef, SimTime};
use crate::tb::{AnalysisPort, CompId, CompKind, FailKind, FailureSink, Tb, TbError, VideoRole};

/// Longest legal run of consecutive stall cycles within a line.
pub const MAX_STALL_RUN: u32 = 16;

/// The six wires of one VSP interface. `data` is `bpp` bits wide.
#[derive(Clone)]
pub struct VspBundle {
    pub clk: SignalRef,
    pub rst_n: SignalRef,
    pub frame_start: SignalRef,
    pub line_valid: SignalRef,
    pub data_valid: SignalRef,
    pub data: SignalRef,
}

impl VspBundle {
    pub fn create(
        sim: &Sim,
        prefix: &str,
        clk: &SignalRef,
        rst_n: &SignalRef,
        bpp: u32,
    ) -> Result<VspBundle, SimError> {
        Ok(VspBundle {
            clk: clk.clone(),
            rst_n: rst_n.clone(),
            frame_start: sim.add_signal(&format!("{prefix}.frame_start"), 1)?,
            line_valid: sim.add_signal(&format!("{prefix}.line_valid"), 1)?,
            data_valid: sim.add_signal(&format!("{prefix}.data_valid"), 1)?,
            data: sim.add_signal(&format!("{prefix}.data"), bpp)?,
        })
    }

    pub fn resolve(
        sim: &Sim,
        prefix: &str,
        clk: &str,
        rst_n: &str,
    ) -> Result<VspBundle, SimError> {
        Ok(VspBundle {
            clk: sim.signal(clk)?,
            rst_n: sim.signal(rst_n)?,
            frame_start: sim.signal(&format!("{prefix}.frame_start"))?,
            line_valid: sim.signal(&format!("{prefix}.line_valid"))?,
            data_valid: sim.signal(&format!("{prefix}.data_valid"))?,
            data: sim.signal(&format!("{prefix}.data"))?,
        })
    }

    /// Pixel depth, taken from the data wire's declared width.
    pub fn bpp(&self) -> u32 {
        self.data.width()
    }
}

/// Drives one frame onto the bundle with the given timing. Stall
/// decisions are drawn from `rng`; with a stall probability of zero the
/// rng is never consumed. Also used by the demo DUT models to emit
/// their output streams, so produced and re-emitted video share one
/// waveform shape.
pub async fn vsp_send_frame(
    bundle: &VspBundle,
    frame: &Frame,
    timing: &VspTiming,
    rng: &mut Rng,
) {
    let stall_p = if timing.validate().is_ok() {
        timing.pixel_stall_probability
    } else {
        0.0
    };

    bundle.clk.wait_edge(EdgeKind::Rising).await;
    bundle.frame_start.drive(1, 0).unwrap();
    bundle.clk.wait_edge(EdgeKind::Rising).await;
    bundle.frame_start.drive(0, 0).unwrap();

    for y in 0..frame.height() {
        for x in 0..frame.width() {
            let mut stalled = 0;
            while stall_p > 0.0 && stalled < MAX_STALL_RUN && rng.chance(stall_p) {
                bundle.line_valid.drive(1, 0).unwrap();
                bundle.data_valid.drive(0, 0).unwrap();
                bundle.clk.wait_edge(EdgeKind::Rising).await;
                stalled += 1;
            }
            bundle.line_valid.drive(1, 0).unwrap();
            bundle.data_valid.drive(1, 0).unwrap();
            bundle.data.drive(frame.get(x, y) as u64, 0).unwrap();
            bundle.clk.wait_edge(EdgeKind::Rising).await;
        }
        bundle.line_valid.drive(0, 0).unwrap();
        bundle.data_valid.drive(0, 0).unwrap();
        for _ in 0..1 + timing.inter_line_gap {
            bundle.clk.wait_edge(EdgeKind::Rising).await;
        }
    }

    for _ in 0..timing.inter_frame_gap {
        bundle.clk.wait_edge(EdgeKind::Rising).await;
    }
}

struct FrameInFlight {
    width: u32,
    height: u32,
    pixels: Vec<u16>,
    line_len: u32,
    lines: u32,
    in_line: bool,
    long_reported: bool,
    poisoned: bool,
}

/// Reassembles frames from the wires. Geometry comes from a provider
/// closure sampled at each frame_start (in the demo environments it
/// reads register mirrors). Lines with the wrong pixel count raise
/// geometry failures; a frame_start mid-frame or pixels outside any
/// frame raise framing failures. Damaged frames are consumed for resync
/// but never published.
async fn vsp_monitor(
    bundle: VspBundle,
    geometry: Rc<dyn Fn() -> (u32, u32)>,
    frames: AnalysisPort<Frame>,
    starts: AnalysisPort<SimTime>,
    failures: FailureSink,
    path: String,
) {
    let bpp = bundle.bpp();
    let mut cur: Option<FrameInFlight> = None;
    let mut orphan_reported = false;
    loop {
        let now = bundle.clk.wait_edge(EdgeKind::Rising).await;
        if bundle.rst_n.read() == 0 {
            cur = None;
            continue;
        }

        if bundle.frame_start.read() == 1 {
            if let Some(c) = &cur {
                if !c.poisoned {
                    failures.fail(
                        &path,
                        FailKind::FrameFraming,
                        format!(
                            "frame_start at {now} after {} of {} lines of the previous frame",
                            c.lines, c.height
                        ),
                    );
                }
            }
            let (width, height) = geometry();
            starts.publish(&now);
            orphan_reported = false;
            if width == 0 || height == 0 {
                failures.fail(
                    &path,
                    FailKind::FrameGeometry,
                    format!("frame_start at {now} with degenerate geometry {width}x{height}"),
                );
                cur = None;
                continue;
            }
            cur = Some(FrameInFlight {
                width,
                height,
                pixels: Vec::with_capacity((width * height) as usize),
                line_len: 0,
                lines: 0,
                in_line: false,
                long_reported: false,
                poisoned: false,
            });
            continue;
        }

        let lv = bundle.line_valid.read() == 1;
        let dv = bundle.data_valid.read() == 1;

        let Some(c) = &mut cur else {
            if (lv || dv) && !orphan_reported {
                failures.fail(
                    &path,
                    FailKind::FrameFraming,
                    format!("video activity at {now} outside any frame"),
                );
                orphan_reported = true;
            }
            continue;
        };

        if lv {
            c.in_line = true;
            if dv {
                if c.line_len < c.width {
                    c.pixels.push(bundle.data.read() as u16);
                } else if !c.long_reported {
                    failures.fail(
                        &path,
                        FailKind::FrameGeometry,
                        format!("line {} exceeds width {}", c.lines, c.width),
                    );
                    c.long_reported = true;
                    c.poisoned = true;
                }
                c.line_len += 1;
            }
        } else if c.in_line {
            if c.line_len != c.width && !c.long_reported {
                failures.fail(
                    &path,
                    FailKind::FrameGeometry,
                    format!(
                        "line {} has {} pixels, expected {}",
                        c.lines, c.line_len, c.width
                    ),
                );
                c.poisoned = true;
            }
            c.lines += 1;
            c.line_len = 0;
            c.in_line = false;
            c.long_reported = false;
            if c.lines == c.height {
                if !c.poisoned {
                    let frame = Frame::new(c.width, c.height, bpp, std::mem::take(&mut c.pixels))
                        .expect("assembled frame is self-consistent");
                    frames.publish(&frame);
                }
                cur = None;
            }
        }
    }
}

async fn vsp_driver(
    bundle: VspBundle,
    sqr: Rc<Sequencer<VideoCmd>>,
    sent: AnalysisPort<Frame>,
    mut rng: Rng,
) {
    loop {
        let (cmd, responder) = sqr.next().await;
        vsp_send_frame(&bundle, &cmd.frame, &cmd.timing, &mut rng).await;
        sent.publish(&cmd.frame);
        responder.respond(cmd);
    }
}

/// Build-time knobs for [`VideoAgent`]. The ConfigDB keys `is_active`,
/// `in_binding`, `out_binding`, `clk_signal`, `rst_signal` and `seed`
/// override per agent path.
#[derive(Clone)]
pub struct VideoAgentCfg {
    pub role: VideoRole,
    pub in_binding: Option<String>,
    pub out_binding: Option<String>,
    pub clk: String,
    pub rst_n: String,
    pub default_active: bool,
    pub geometry: Rc<dyn Fn() -> (u32, u32)>,
}

impl VideoAgentCfg {
    pub fn new(geometry: Rc<dyn Fn() -> (u32, u32)>) -> Self {
        VideoAgentCfg {
            role: VideoRole {
                drives_input: true,
                monitors_output: true,
            },
            in_binding: None,
            out_binding: None,
            clk: "sys.clk".to_string(),
            rst_n: "sys.rst_n".to_string(),
            default_active: true,
            geometry,
        }
    }
}

/// Video agent covering one stream boundary: an optional driver plus
/// sequencer on the input bundle, a monitor per bound bundle. Monitors
/// publish assembled frames on `<path>.<mon>.frames` and frame_start
/// times on `<path>.<mon>.starts`; the driver publishes each frame it
/// finished sending on `<path>.drv.sent`.
pub struct VideoAgent {
    pub id: CompId,
    pub path: String,
    pub active: bool,
    pub in_bundle: Option<VspBundle>,
    pub out_bundle: Option<VspBundle>,
    pub sequencer: Option<Rc<Sequencer<VideoCmd>>>,
    pub sent: Option<AnalysisPort<Frame>>,
    pub in_frames: Option<AnalysisPort<Frame>>,
    pub in_starts: Option<AnalysisPort<SimTime>>,
    pub out_frames: Option<AnalysisPort<Frame>>,
    pub out_starts: Option<AnalysisPort<SimTime>>,
    geometry: Rc<dyn Fn() -> (u32, u32)>,
    drv_rng: Rng,
}

impl VideoAgent {
    pub fn build(
        tb: &mut Tb,
        parent: CompId,
        name: &str,
        cfg: VideoAgentCfg,
    ) -> Result<VideoAgent, TbError> {
        let id = tb.add_child(parent, name, CompKind::Agent)?;
        let path = tb.tree.path(id).to_string();

        let active = tb.cfg.get_bool(&path, "is_active").unwrap_or(
            cfg.default_active && cfg.role.drives_input,
        );
        let in_binding = tb.cfg.get_str(&path, "in_binding").or(cfg.in_binding);
        let out_binding = tb.cfg.get_str(&path, "out_binding").or(cfg.out_binding);
        let clk = tb.cfg.get_str(&path, "clk_signal").unwrap_or(cfg.clk);
        let rst_n = tb.cfg.get_str(&path, "rst_signal").unwrap_or(cfg.rst_n);
        if (active && in_binding.is_none()) || (in_binding.is_none() && out_binding.is_none()) {
            return Err(TbError::MissingBinding(path));
        }

        let in_bundle = in_binding
            .map(|p| VspBundle::resolve(&tb.sim, &p, &clk, &rst_n))
            .transpose()?;
        let out_bundle = out_binding
            .map(|p| VspBundle::resolve(&tb.sim, &p, &clk, &rst_n))
            .transpose()?;

        let (mut in_frames, mut in_starts) = (None, None);
        if in_bundle.is_some() {
            let mon = tb.add_child(id, "in_mon", CompKind::Monitor)?;
            in_frames = Some(tb.add_port::<Frame>(mon, "frames")?);
            in_starts = Some(tb.add_port::<SimTime>(mon, "starts")?);
        }
        let (mut out_frames, mut out_starts) = (None, None);
        if out_bundle.is_some() {
            let mon = tb.add_child(id, "out_mon", CompKind::Monitor)?;
            out_frames = Some(tb.add_port::<Frame>(mon, "frames")?);
            out_starts = Some(tb.add_port::<SimTime>(mon, "starts")?);
        }

        let (sequencer, sent) = if active {
            let drv = tb.add_child(id, "drv", CompKind::Driver)?;
            tb.add_child(id, "sqr", CompKind::Sequencer)?;
            let sent = tb.add_port::<Frame>(drv, "sent")?;
            let sqr = Sequencer::new(&tb.sim, &format!("{path}.sqr"));
            (Some(sqr), Some(sent))
        } else {
            (None, None)
        };

        let seed = tb.cfg.get_u64(&path, "seed").unwrap_or(0);
        let drv_rng = Rng::for_path(seed, &format!("{path}.drv"));

        Ok(VideoAgent {
            id,
            path,
            active,
            in_bundle,
            out_bundle,
            sequencer,
            sent,
            in_frames,
            in_starts,
            out_frames,
            out_starts,
            geometry: cfg.geometry,
            drv_rng,
        })
    }

    /// Spawns the agent's run-phase processes.
    pub fn start(&self, tb: &Tb) {
        if let Some(b) = &self.in_bundle {
            let mon_path = format!("{}.in_mon", self.path);
            tb.sim.spawn(
                &mon_path,
                vsp_monitor(
                    b.clone(),
                    self.geometry.clone(),
                    self.in_frames.clone().unwrap(),
                    self.in_starts.clone().unwrap(),
                    tb.failures.clone(),
                    mon_path.clone(),
                ),
            );
        }
        if let Some(b) = &self.out_bundle {
            let mon_path = format!("{}.out_mon", self.path);
            tb.sim.spawn(
                &mon_path,
                vsp_monitor(
                    b.clone(),
                    self.geometry.clone(),
                    self.out_frames.clone().unwrap(),
                    self.out_starts.clone().unwrap(),
                    tb.failures.clone(),
                    mon_path.clone(),
                ),
            );
        }
        if let (Some(sqr), Some(sent), Some(b)) = (&self.sequencer, &self.sent, &self.in_bundle) {
            let drv_path = format!("{}.drv", self.path);
            tb.sim.spawn(
                &drv_path,
                vsp_driver(b.clone(), sqr.clone(), sent.clone(), self.drv_rng.clone()),
            );
        }
    }
}
