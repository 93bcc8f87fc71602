//! Spatial transforms over streams and samples.

use super::{BoundingBox, Event, EventError, EventStream, Sample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Remap every event to a smaller grid by coordinate flooring.
///
/// Duplicate events landing on one target pixel are kept; histogram
/// binning counts them naturally. Ordering, timestamps and event count
/// are untouched.
pub fn downsample(stream: &EventStream, target: (u16, u16)) -> Result<EventStream, EventError> {
    let source = stream.resolution;
    if target.0 == 0 || target.1 == 0 || target.0 > source.0 || target.1 > source.1 {
        return Err(EventError::InvalidTarget { target, source_res: source });
    }
    if target == source {
        return Ok(stream.clone());
    }
    let events = stream
        .events
        .iter()
        .map(|e| Event {
            x: ((e.x as u32 * target.0 as u32) / source.0 as u32) as u16,
            y: ((e.y as u32 * target.1 as u32) / source.1 as u32) as u16,
            t: e.t,
            p: e.p,
        })
        .collect();
    Ok(EventStream {
        events,
        resolution: target,
        duration_us: stream.duration_us,
    })
}

/// Random scale-and-crop configuration. The scale range must stay
/// within [0.5, 1.5].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub scale_min: f64,
    pub scale_max: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            scale_min: 0.8,
            scale_max: 1.2,
        }
    }
}

/// Apply one seeded random scale-and-crop to events and boxes jointly.
///
/// The affine map is `x' = x * s + shift`; the shift is drawn so the
/// scaled content is placed (s < 1) or cropped (s > 1) inside the frame.
/// Events falling outside the frame are dropped, boxes are clamped.
/// Rejects the sample when a box collapses below 1 px^2.
pub fn augment(sample: &Sample, rng_seed: u64, cfg: &AugmentConfig) -> Result<Sample, EventError> {
    assert!(
        cfg.scale_min >= 0.5 && cfg.scale_max <= 1.5 && cfg.scale_min <= cfg.scale_max,
        "scale range must be within [0.5, 1.5]"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let (w, h) = sample.stream.resolution;
    let (wf, hf) = (w as f64, h as f64);
    let s = if cfg.scale_max > cfg.scale_min {
        rng.gen_range(cfg.scale_min..=cfg.scale_max)
    } else {
        cfg.scale_min
    };
    let span_x = wf - wf * s;
    let span_y = hf - hf * s;
    let shift_x = sample_shift(&mut rng, span_x);
    let shift_y = sample_shift(&mut rng, span_y);
    apply_affine(sample, s, shift_x, shift_y)
}

fn sample_shift(rng: &mut ChaCha8Rng, span: f64) -> f64 {
    if span > 0.0 {
        rng.gen_range(0.0..=span)
    } else if span < 0.0 {
        rng.gen_range(span..=0.0)
    } else {
        0.0
    }
}

/// The deterministic core of [`augment`], exposed for identity checks.
pub(crate) fn apply_affine(
    sample: &Sample,
    s: f64,
    shift_x: f64,
    shift_y: f64,
) -> Result<Sample, EventError> {
    let (w, h) = sample.stream.resolution;
    let (wf, hf) = (w as f64, h as f64);
    let mut events = Vec::with_capacity(sample.stream.events.len());
    for e in &sample.stream.events {
        let nx = (e.x as f64 * s + shift_x).floor();
        let ny = (e.y as f64 * s + shift_y).floor();
        if nx < 0.0 || ny < 0.0 || nx >= wf || ny >= hf {
            continue;
        }
        events.push(Event {
            x: nx as u16,
            y: ny as u16,
            t: e.t,
            p: e.p,
        });
    }
    let mut boxes = Vec::with_capacity(sample.boxes.len());
    for b in &sample.boxes {
        let nb = BoundingBox {
            x_min: b.x_min * s + shift_x,
            y_min: b.y_min * s + shift_y,
            x_max: b.x_max * s + shift_x,
            y_max: b.y_max * s + shift_y,
            ..*b
        }
        .clamped(wf, hf);
        if nb.area() < 1.0 {
            return Err(EventError::DegenerateBox);
        }
        boxes.push(nb);
    }
    Ok(Sample {
        stream: EventStream {
            events,
            resolution: sample.stream.resolution,
            duration_us: sample.stream.duration_us,
        },
        boxes,
        split_tag: sample.split_tag,
    })
}
