//! Temporal binning of event streams into dense frame tensors.

use super::{EventError, EventStream};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::Path;

const MAGIC: &[u8; 8] = b"SFFRSEQ1";

/// How events inside one time window are aggregated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RepresentationMode {
    /// 1 if any event hit the cell during the window, else 0.
    Binary,
    /// Number of events that hit the cell during the window.
    Histogram,
}

/// Binned event representation, shape `[T, P=2, H, W]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    data: Vec<u32>,
    pub timesteps: usize,
    pub polarities: usize,
    pub height: usize,
    pub width: usize,
    pub window_us: u32,
    pub mode: RepresentationMode,
}

impl FrameSequence {
    pub fn total_count(&self) -> u64 {
        self.data.iter().map(|&v| v as u64).sum()
    }

    pub fn values(&self) -> &[u32] {
        &self.data
    }

    fn index(&self, t: usize, p: usize, y: usize, x: usize) -> usize {
        ((t * self.polarities + p) * self.height + y) * self.width + x
    }

    pub fn at(&self, t: usize, p: usize, y: usize, x: usize) -> u32 {
        self.data[self.index(t, p, y, x)]
    }

    /// Copy a `[t0, t1)` slice of timesteps, e.g. for stateful runs.
    pub fn slice_bins(&self, t0: usize, t1: usize) -> FrameSequence {
        let plane = self.polarities * self.height * self.width;
        FrameSequence {
            data: self.data[t0 * plane..t1 * plane].to_vec(),
            timesteps: t1 - t0,
            ..self.clone()
        }
    }

    /// The `[P, H, W]` input tensor for one timestep.
    pub fn frame_tensor(&self, t: usize) -> Tensor {
        let plane = self.polarities * self.height * self.width;
        let data: Vec<f64> = self.data[t * plane..(t + 1) * plane]
            .iter()
            .map(|&v| v as f64)
            .collect();
        Tensor::from_vec(&[self.polarities, self.height, self.width], data)
            .expect("plane length follows from shape")
    }
}

/// Bin a stream into `ceil(duration / window)` windows.
///
/// Bin index is `floor(t / window)`, so an event exactly on a boundary
/// `t = k*window` lands in bin `k`. The declared stream duration decides
/// the number of bins; events past it are discarded.
pub fn bin_events(stream: &EventStream, window_us: u32, mode: RepresentationMode) -> FrameSequence {
    assert!(window_us > 0, "window_us must be positive");
    let timesteps = (stream.duration_us as u64).div_ceil(window_us as u64) as usize;
    let (w, h) = (stream.resolution.0 as usize, stream.resolution.1 as usize);
    let mut seq = FrameSequence {
        data: vec![0; timesteps * 2 * h * w],
        timesteps,
        polarities: 2,
        height: h,
        width: w,
        window_us,
        mode,
    };
    for e in &stream.events {
        let bin = (e.t / window_us) as usize;
        if bin >= timesteps {
            continue;
        }
        let idx = seq.index(bin, e.p as usize & 1, e.y as usize, e.x as usize);
        match mode {
            RepresentationMode::Binary => seq.data[idx] = 1,
            RepresentationMode::Histogram => seq.data[idx] += 1,
        }
    }
    seq
}

/// Write the documented container: magic, T, P, H, W, mode, window, then
/// a dense little-endian u16 payload.
pub fn write_frames(path: &Path, seq: &FrameSequence) -> Result<(), EventError> {
    let mut buf = Vec::with_capacity(29 + seq.data.len() * 2);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(seq.timesteps as u32).to_le_bytes());
    buf.extend_from_slice(&(seq.polarities as u32).to_le_bytes());
    buf.extend_from_slice(&(seq.height as u32).to_le_bytes());
    buf.extend_from_slice(&(seq.width as u32).to_le_bytes());
    buf.push(match seq.mode {
        RepresentationMode::Binary => 0,
        RepresentationMode::Histogram => 1,
    });
    buf.extend_from_slice(&seq.window_us.to_le_bytes());
    for &v in &seq.data {
        if v > u16::MAX as u32 {
            return Err(EventError::CountOverflow);
        }
        buf.extend_from_slice(&(v as u16).to_le_bytes());
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

pub fn read_frames(path: &Path) -> Result<FrameSequence, EventError> {
    let buf = fs::read(path)?;
    let bad = || {
        EventError::Io(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            "malformed frame container",
        ))
    };
    if buf.len() < 29 || &buf[..8] != MAGIC {
        return Err(bad());
    }
    let u32_at = |o: usize| u32::from_le_bytes(buf[o..o + 4].try_into().unwrap());
    let timesteps = u32_at(8) as usize;
    let polarities = u32_at(12) as usize;
    let height = u32_at(16) as usize;
    let width = u32_at(20) as usize;
    let mode = match buf[24] {
        0 => RepresentationMode::Binary,
        1 => RepresentationMode::Histogram,
        _ => return Err(bad()),
    };
    let window_us = u32_at(25);
    let len = timesteps * polarities * height * width;
    if buf.len() != 29 + len * 2 {
        return Err(bad());
    }
    let data = buf[29..]
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes(c.try_into().unwrap()) as u32)
        .collect();
    Ok(FrameSequence {
        data,
        timesteps,
        polarities,
        height,
        width,
        window_us,
        mode,
    })
}
