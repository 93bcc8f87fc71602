//! Synthetic moving-box recordings.
//!
//! A bright rectangle translates across the frame and bounces off the
//! borders. Pixels newly covered by the rectangle emit ON events,
//! pixels it leaves emit OFF events, plus uniform background noise, so
//! the stream looks like an event camera watching a moving target. An
//! appearance burst at t=0 outlines the initial rectangle; a static box
//! therefore emits nothing after the first window. Lets the full
//! pipeline run with zero external downloads.

use super::{BoundingBox, Event, EventStream, Sample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SynthConfig {
    pub resolution: (u16, u16),
    pub box_width: u16,
    pub box_height: u16,
    /// Translation speed of the rectangle in pixels per second.
    pub speed_px_per_s: f64,
    /// Mean events emitted per pixel brightness transition.
    pub events_per_edge_px: f64,
    pub duration_us: u32,
    /// Uniform background noise in events per second per pixel.
    pub noise_rate_hz_per_px: f64,
    /// Ground-truth sampling window; one box per window.
    pub window_us: u32,
    pub label: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            resolution: (64, 64),
            box_width: 16,
            box_height: 16,
            speed_px_per_s: 220.0,
            events_per_edge_px: 2.0,
            duration_us: 90_000,
            noise_rate_hz_per_px: 1.0,
            window_us: 10_000,
            label: 0,
        }
    }
}

struct BouncePath {
    lo: f64,
    span: f64,
    start: f64,
    velocity: f64,
}

impl BouncePath {
    fn new(lo: f64, hi: f64, start: f64, velocity: f64) -> Self {
        BouncePath {
            lo,
            span: (hi - lo).max(0.0),
            start: start - lo,
            velocity,
        }
    }

    /// Triangle-wave reflection keeping the value inside [lo, hi].
    fn at(&self, t_s: f64) -> f64 {
        if self.span == 0.0 {
            return self.lo;
        }
        let period = 2.0 * self.span;
        let mut m = (self.start + self.velocity * t_s) % period;
        if m < 0.0 {
            m += period;
        }
        self.lo + if m <= self.span { m } else { period - m }
    }
}

/// Integer pixels covered by the box, by the pixel-center rule.
fn coverage(cx: f64, cy: f64, cfg: &SynthConfig) -> (i64, i64, i64, i64) {
    let half_w = cfg.box_width as f64 / 2.0;
    let half_h = cfg.box_height as f64 / 2.0;
    let x0 = (cx - half_w - 0.5).ceil() as i64;
    let x1 = (cx + half_w - 0.5).ceil() as i64;
    let y0 = (cy - half_h - 0.5).ceil() as i64;
    let y1 = (cy + half_h - 0.5).ceil() as i64;
    (x0, x1, y0, y1)
}

/// Generate one seeded moving-box sample with per-window ground truth.
pub fn synth_moving_box(cfg: &SynthConfig, seed: u64) -> Sample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (cfg.resolution.0 as f64, cfg.resolution.1 as f64);
    let half_w = cfg.box_width as f64 / 2.0;
    let half_h = cfg.box_height as f64 / 2.0;
    let cx0 = rng.gen_range(half_w..=(w - half_w).max(half_w));
    let cy0 = rng.gen_range(half_h..=(h - half_h).max(half_h));
    let angle = rng.gen_range(0.0..std::f64::consts::TAU);
    let path_x = BouncePath::new(half_w, w - half_w, cx0, cfg.speed_px_per_s * angle.cos());
    let path_y = BouncePath::new(half_h, h - half_h, cy0, cfg.speed_px_per_s * angle.sin());

    let mut events: Vec<Event> = Vec::new();
    let mut emit = |rng: &mut ChaCha8Rng, x: i64, y: i64, p: u8, t0: f64, t1: f64, mean: f64| {
        if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
            return;
        }
        let n = if mean > 0.0 {
            Poisson::new(mean).expect("positive mean").sample(rng) as u64
        } else {
            0
        };
        for _ in 0..n {
            let t = rng.gen_range(t0..t1.max(t0 + 1.0));
            events.push(Event {
                x: x as u16,
                y: y as u16,
                t: t as u32,
                p,
            });
        }
    };

    // appearance burst: the rectangle outline pops in during the first ms
    let (bx0, bx1, by0, by1) = coverage(path_x.at(0.0), path_y.at(0.0), cfg);
    for y in by0..by1 {
        for x in bx0..bx1 {
            emit(&mut rng, x, y, 1, 0.0, 1_000.0, cfg.events_per_edge_px);
        }
    }

    // edge events from translation, micro-stepped so motion per step <= 0.5 px
    if cfg.speed_px_per_s > 0.0 {
        let step_us = ((0.5 / cfg.speed_px_per_s) * 1e6)
            .min(cfg.window_us as f64 / 4.0)
            .max(50.0);
        let mut prev = coverage(path_x.at(0.0), path_y.at(0.0), cfg);
        let mut t = step_us;
        while t < cfg.duration_us as f64 {
            let t_s = t / 1e6;
            let curr = coverage(path_x.at(t_s), path_y.at(t_s), cfg);
            if curr != prev {
                let xlo = prev.0.min(curr.0);
                let xhi = prev.1.max(curr.1);
                let ylo = prev.2.min(curr.2);
                let yhi = prev.3.max(curr.3);
                for y in ylo..yhi {
                    for x in xlo..xhi {
                        let was = x >= prev.0 && x < prev.1 && y >= prev.2 && y < prev.3;
                        let is = x >= curr.0 && x < curr.1 && y >= curr.2 && y < curr.3;
                        if is && !was {
                            emit(&mut rng, x, y, 1, t - step_us, t, cfg.events_per_edge_px);
                        } else if was && !is {
                            emit(&mut rng, x, y, 0, t - step_us, t, cfg.events_per_edge_px);
                        }
                    }
                }
                prev = curr;
            }
            t += step_us;
        }
    }

    // uniform background noise over the full frame and duration
    if cfg.noise_rate_hz_per_px > 0.0 {
        let mean = cfg.noise_rate_hz_per_px * w * h * (cfg.duration_us as f64 / 1e6);
        let n = Poisson::new(mean).expect("positive mean").sample(&mut rng) as u64;
        for _ in 0..n {
            events.push(Event {
                x: rng.gen_range(0..cfg.resolution.0),
                y: rng.gen_range(0..cfg.resolution.1),
                t: rng.gen_range(0..cfg.duration_us),
                p: rng.gen_range(0..2u8),
            });
        }
    }

    events.retain(|e| e.t < cfg.duration_us);
    events.sort_by_key(|e| e.t);

    // per-window ground truth at window centers
    let bins = (cfg.duration_us as u64).div_ceil(cfg.window_us as u64) as usize;
    let boxes = (0..bins)
        .map(|b| {
            let t_s = ((b as f64 + 0.5) * cfg.window_us as f64).min(cfg.duration_us as f64) / 1e6;
            let cx = path_x.at(t_s);
            let cy = path_y.at(t_s);
            BoundingBox::new(
                (cx - half_w).max(0.0),
                (cy - half_h).max(0.0),
                (cx + half_w).min(w),
                (cy + half_h).min(h),
                1.0,
                cfg.label,
            )
        })
        .collect();

    Sample {
        stream: EventStream {
            events,
            resolution: cfg.resolution,
            duration_us: cfg.duration_us,
        },
        boxes,
        split_tag: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn static_box_emits_nothing_after_first_window() {
        let cfg = SynthConfig {
            speed_px_per_s: 0.0,
            noise_rate_hz_per_px: 0.0,
            ..SynthConfig::default()
        };
        let sample = synth_moving_box(&cfg, 3);
        assert!(!sample.stream.events.is_empty(), "appearance burst expected");
        assert!(
            sample.stream.events.iter().all(|e| e.t < cfg.window_us),
            "static box must stay silent after the first window"
        );
    }

    #[test]
    fn noise_count_matches_poisson_rate() {
        let cfg = SynthConfig {
            speed_px_per_s: 0.0,
            events_per_edge_px: 0.0,
            noise_rate_hz_per_px: 2.0,
            ..SynthConfig::default()
        };
        let sample = synth_moving_box(&cfg, 17);
        let area = cfg.resolution.0 as f64 * cfg.resolution.1 as f64;
        let lambda = cfg.noise_rate_hz_per_px * area * (cfg.duration_us as f64 / 1e6);
        let n = sample.stream.events.len() as f64;
        let sigma = lambda.sqrt();
        assert!(
            (n - lambda).abs() <= 3.0 * sigma,
            "noise count {n} outside 3 sigma of {lambda}"
        );
    }

    #[test]
    fn ground_truth_stays_in_bounds() {
        let cfg = SynthConfig::default();
        for seed in 0..25 {
            let sample = synth_moving_box(&cfg, seed);
            assert_eq!(sample.boxes.len(), 9);
            for b in &sample.boxes {
                assert!(b.is_valid());
                assert!(b.x_min >= 0.0 && b.y_min >= 0.0);
                assert!(b.x_max <= cfg.resolution.0 as f64);
                assert!(b.y_max <= cfg.resolution.1 as f64);
            }
        }
    }

    #[test]
    fn stream_is_sorted_and_in_bounds() {
        let cfg = SynthConfig::default();
        let sample = synth_moving_box(&cfg, 42);
        sample.stream.validate().unwrap();
        assert!(sample.stream.len() > 100, "expected substantial event output");
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let cfg = SynthConfig::default();
        assert_eq!(synth_moving_box(&cfg, 9), synth_moving_box(&cfg, 9));
        assert_ne!(
            synth_moving_box(&cfg, 9).stream.events,
            synth_moving_box(&cfg, 10).stream.events
        );
    }
}
