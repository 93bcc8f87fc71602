//! Event-camera data ingestion, generation and binning.
//!
//! Everything here is pure given `(input, seed)` and safe to call from
//! parallel workers.

mod aer;
mod annotations;
mod frames;
mod manifest;
mod split;
mod synth;
mod transform;

pub use aer::{decode_aer, encode_aer};
pub use annotations::{read_boxes_jsonl, write_boxes_jsonl};
pub use frames::{bin_events, read_frames, write_frames, FrameSequence, RepresentationMode};
pub use manifest::{DatasetManifest, SampleEntry};
pub use split::stratified_split;
pub use synth::{synth_moving_box, SynthConfig};
pub use transform::{augment, downsample, AugmentConfig};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EventError {
    #[error("truncated record: buffer length {len} is not a multiple of 5 (offset {offset})")]
    TruncatedRecord { len: usize, offset: usize },
    #[error("event {index} out of bounds: ({x},{y}) for resolution {width}x{height} (byte offset {offset})")]
    OutOfBounds {
        index: usize,
        x: u16,
        y: u16,
        width: u16,
        height: u16,
        offset: usize,
    },
    #[error("non-monotonic timestamp at event {index}: {curr} < {prev} (byte offset {offset})")]
    NonMonotonicTimestamp {
        index: usize,
        prev: u32,
        curr: u32,
        offset: usize,
    },
    #[error("timestamp {t} does not fit in 23 bits")]
    TimestampOverflow { t: u32 },
    #[error("coordinate ({x},{y}) does not fit in one byte")]
    CoordinateOverflow { x: u16, y: u16 },
    #[error("invalid downsample target {target:?} for source {source_res:?}")]
    InvalidTarget {
        target: (u16, u16),
        source_res: (u16, u16),
    },
    #[error("augmentation collapsed a box below 1 px^2")]
    DegenerateBox,
    #[error("stratified split requires at least one sample per class")]
    EmptyClass,
    #[error("histogram count exceeds u16 payload range")]
    CountOverflow,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),
}

/// One sensor event: pixel location, microsecond timestamp, polarity.
///
/// Polarity 1 encodes an ON (+1) brightness change, 0 encodes OFF (-1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub x: u16,
    pub y: u16,
    pub t: u32,
    pub p: u8,
}

/// An ordered event sequence with its sensor geometry.
///
/// `duration_us` is an exclusive end: the stream covers `[0, duration_us)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventStream {
    pub events: Vec<Event>,
    pub resolution: (u16, u16),
    pub duration_us: u32,
}

impl EventStream {
    pub fn new(events: Vec<Event>, resolution: (u16, u16)) -> Self {
        let duration_us = events.last().map_or(0, |e| e.t.saturating_add(1));
        EventStream {
            events,
            resolution,
            duration_us,
        }
    }

    pub fn empty(resolution: (u16, u16)) -> Self {
        EventStream {
            events: Vec::new(),
            resolution,
            duration_us: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Check bounds and timestamp monotonicity.
    pub fn validate(&self) -> Result<(), EventError> {
        let (w, h) = self.resolution;
        let mut prev = 0u32;
        for (i, e) in self.events.iter().enumerate() {
            if e.x >= w || e.y >= h {
                return Err(EventError::OutOfBounds {
                    index: i,
                    x: e.x,
                    y: e.y,
                    width: w,
                    height: h,
                    offset: i * 5,
                });
            }
            if e.t < prev {
                return Err(EventError::NonMonotonicTimestamp {
                    index: i,
                    prev,
                    curr: e.t,
                    offset: i * 5,
                });
            }
            prev = e.t;
        }
        Ok(())
    }
}

/// Axis-aligned box in pixel coordinates with a confidence and class index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub objectness: f64,
    pub label: u32,
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64, objectness: f64, label: u32) -> Self {
        BoundingBox {
            x_min,
            y_min,
            x_max,
            y_max,
            objectness,
            label,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    pub fn is_valid(&self) -> bool {
        self.x_min < self.x_max && self.y_min < self.y_max
    }

    pub fn clamped(&self, width: f64, height: f64) -> BoundingBox {
        BoundingBox {
            x_min: self.x_min.clamp(0.0, width),
            y_min: self.y_min.clamp(0.0, height),
            x_max: self.x_max.clamp(0.0, width),
            y_max: self.y_max.clamp(0.0, height),
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

/// One detection sample: an event stream plus ground-truth boxes.
///
/// When `boxes.len()` equals the number of time bins of the sample, the
/// boxes are per-bin ground truth in bin order (a moving target);
/// otherwise the whole set applies to every bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub stream: EventStream,
    pub boxes: Vec<BoundingBox>,
    pub split_tag: Option<Split>,
}

impl Sample {
    pub fn label(&self) -> u32 {
        self.boxes.first().map_or(0, |b| b.label)
    }

    /// Ground truth for a given bin under the per-bin/static convention.
    pub fn boxes_for_bin(&self, bin: usize, num_bins: usize) -> Vec<BoundingBox> {
        if num_bins > 1 && self.boxes.len() == num_bins {
            self.boxes.get(bin).map(|b| vec![*b]).unwrap_or_default()
        } else {
            self.boxes.clone()
        }
    }
}
