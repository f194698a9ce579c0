//! Protocol UVCs: reusable driver/monitor/agent bundles for the two
//! wire protocols the demo designs speak, plus the interrupt checker.
//!
//! SRB is a single-outstanding register bus (req/ack handshake, 32-bit
//! address and data, error flag). VSP is a valid-qualified video stream
//! (frame_start pulse, line_valid runs, data_valid pixels). Monitors
//! reconstruct traffic from the wires alone so the same agent works in
//! active and passive environments.

mod irq;
mod srb;
mod vsp;

pub use irq::IrqChecker;
pub use srb::{srb_master_txn, SrbAgent, SrbAgentCfg, SrbBundle, SRB_TIMEOUT_CYCLES};
pub use vsp::{vsp_send_frame, VideoAgent, VideoAgentCfg, VspBundle, MAX_STALL_RUN};

use crate::seq::Rng;
use crate::sim::SimTime;

/// Direction of a register-bus transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusKind {
    Read,
    Write,
}

/// Completion status reported on the `err` wire (or synthesized by the
/// master when it gives up waiting for `ack`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusResp {
    Ok,
    Error,
}

/// One register-bus transaction, as driven or as reconstructed from the
/// wires. `issue_time` is the first rising edge where `req` is sampled
/// high, `complete_time` the edge where `ack` is sampled high, so driver
/// and monitor agree field for field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BusTxn {
    pub kind: BusKind,
    pub addr: u32,
    pub wdata: u32,
    pub rdata: u32,
    pub resp: BusResp,
    pub issue_time: SimTime,
    pub complete_time: SimTime,
}

impl BusTxn {
    pub fn read(addr: u32) -> Self {
        BusTxn {
            kind: BusKind::Read,
            addr,
            wdata: 0,
            rdata: 0,
            resp: BusResp::Ok,
            issue_time: SimTime::from_ticks(0),
            complete_time: SimTime::from_ticks(0),
        }
    }

    pub fn write(addr: u32, wdata: u32) -> Self {
        BusTxn {
            kind: BusKind::Write,
            addr,
            wdata,
            rdata: 0,
            resp: BusResp::Ok,
            issue_time: SimTime::from_ticks(0),
            complete_time: SimTime::from_ticks(0),
        }
    }

    pub fn is_write(&self) -> bool {
        self.kind == BusKind::Write
    }
}

/// A raster image: `height` rows of `width` pixels, `bpp` bits each,
/// stored row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct Frame {
    width: u32,
    height: u32,
    bpp: u32,
    pixels: Vec<u16>,
}

impl Frame {
    /// Builds a frame from raw pixels. The pixel count must match the
    /// geometry and every value must fit in `bpp` bits (1..=16).
    pub fn new(width: u32, height: u32, bpp: u32, pixels: Vec<u16>) -> Result<Frame, String> {
        if width == 0 || height == 0 {
            return Err(format!("degenerate geometry {width}x{height}"));
        }
        if !(1..=16).contains(&bpp) {
            return Err(format!("bpp {bpp} out of range 1..=16"));
        }
        let want = width as usize * height as usize;
        if pixels.len() != want {
            return Err(format!(
                "pixel count {} does not match {width}x{height}",
                pixels.len()
            ));
        }
        let max = Frame::max_value(bpp);
        if let Some(p) = pixels.iter().find(|p| **p > max) {
            return Err(format!("pixel {p:#x} exceeds {bpp}-bit range"));
        }
        Ok(Frame {
            width,
            height,
            bpp,
            pixels,
        })
    }

    /// Diagonal ramp pattern, useful as a recognizable default stimulus.
    pub fn ramp(width: u32, height: u32, bpp: u32) -> Frame {
        let max = Frame::max_value(bpp) as u32;
        let pixels = (0..height)
            .flat_map(|y| (0..width).map(move |x| ((x + y) % (max + 1)) as u16))
            .collect();
        Frame::new(width, height, bpp, pixels).expect("ramp geometry")
    }

    pub fn solid(width: u32, height: u32, bpp: u32, value: u16) -> Frame {
        let pixels = vec![value; width as usize * height as usize];
        Frame::new(width, height, bpp, pixels).expect("solid geometry")
    }

    /// Uniformly random pixels drawn from `rng`.
    pub fn random(width: u32, height: u32, bpp: u32, rng: &mut Rng) -> Frame {
        let max = Frame::max_value(bpp) as u64;
        let pixels = (0..width as usize * height as usize)
            .map(|_| rng.in_range(0, max) as u16)
            .collect();
        Frame::new(width, height, bpp, pixels).expect("random geometry")
    }

    pub fn max_value(bpp: u32) -> u16 {
        (((1u32 << bpp) - 1) & 0xFFFF) as u16
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bpp(&self) -> u32 {
        self.bpp
    }

    pub fn pixels(&self) -> &[u16] {
        &self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> u16 {
        assert!(x < self.width && y < self.height, "pixel out of bounds");
        self.pixels[(y * self.width + x) as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: u16) {
        assert!(x < self.width && y < self.height, "pixel out of bounds");
        self.pixels[(y * self.width + x) as usize] = value;
    }

    /// Row-major pixel index back to coordinates.
    pub fn coords(&self, index: usize) -> (u32, u32) {
        (index as u32 % self.width, index as u32 / self.width)
    }
}

impl std::fmt::Debug for Frame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Frame({}x{}x{})", self.width, self.height, self.bpp)
    }
}

/// Knobs for the video driver's waveform shape. Gaps are in clock
/// cycles; `inter_line_gap` counts extra idle cycles on top of the one
/// mandatory line_valid-low cycle between lines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VspTiming {
    pub inter_frame_gap: u32,
    pub inter_line_gap: u32,
    pub pixel_stall_probability: f64,
}

impl VspTiming {
    pub fn validate(&self) -> Result<(), String> {
        if !self.pixel_stall_probability.is_finite()
            || !(0.0..=1.0).contains(&self.pixel_stall_probability)
        {
            return Err(format!(
                "pixel_stall_probability {} outside [0, 1]",
                self.pixel_stall_probability
            ));
        }
        Ok(())
    }
}

impl Default for VspTiming {
    fn default() -> Self {
        VspTiming {
            inter_frame_gap: 4,
            inter_line_gap: 0,
            pixel_stall_probability: 0.0,
        }
    }
}

/// Sequence item for the video driver: one frame plus the timing to
/// send it with.
#[derive(Debug, Clone)]
pub struct VideoCmd {
    pub frame: Frame,
    pub timing: VspTiming,
}

impl VideoCmd {
    pub fn new(frame: Frame) -> Self {
        VideoCmd {
            frame,
            timing: VspTiming::default(),
        }
    }
}
