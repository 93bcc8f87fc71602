//! Dataset manifests: a JSON index of AER event files and their JSONL
//! box sidecars, with split tags and content checksums.

use super::{
    decode_aer, downsample, encode_aer, read_boxes_jsonl, write_boxes_jsonl, EventError, Sample,
    Split,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleEntry {
    pub id: String,
    pub aer: String,
    pub boxes: String,
    pub split: Option<Split>,
    pub label: u32,
    pub event_count: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub seed: u64,
    pub resolution: (u16, u16),
    pub window_us: u32,
    pub samples: Vec<SampleEntry>,
}

impl DatasetManifest {
    pub fn save(&self, path: &Path) -> Result<(), EventError> {
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, EventError> {
        let json = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&json)?)
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Materialize samples as AER + JSONL files under `dir` and return the
/// manifest (also written to `dir/manifest.json`). Sample order and
/// checksums are deterministic, so re-running with the same inputs is
/// idempotent.
pub fn write_dataset(
    dir: &Path,
    samples: &[Sample],
    seed: u64,
    window_us: u32,
) -> Result<DatasetManifest, EventError> {
    fs::create_dir_all(dir.join("events"))?;
    fs::create_dir_all(dir.join("boxes"))?;
    let resolution = samples
        .first()
        .map(|s| s.stream.resolution)
        .unwrap_or((0, 0));
    let mut entries = Vec::with_capacity(samples.len());
    for (i, sample) in samples.iter().enumerate() {
        let id = format!("sample_{i:04}");
        let aer_rel = format!("events/{id}.aer");
        let boxes_rel = format!("boxes/{id}.jsonl");
        let bytes = encode_aer(&sample.stream)?;
        fs::write(dir.join(&aer_rel), &bytes)?;
        write_boxes_jsonl(&dir.join(&boxes_rel), &sample.boxes)?;
        entries.push(SampleEntry {
            id,
            aer: aer_rel,
            boxes: boxes_rel,
            split: sample.split_tag,
            label: sample.label(),
            event_count: sample.stream.len(),
            sha256: hex_digest(&bytes),
        });
    }
    let manifest = DatasetManifest {
        version: 1,
        seed,
        resolution,
        window_us,
        samples: entries,
    };
    manifest.save(&dir.join("manifest.json"))?;
    Ok(manifest)
}

/// Load every sample referenced by a manifest, verifying checksums.
pub fn load_dataset(manifest_path: &Path) -> Result<(DatasetManifest, Vec<Sample>), EventError> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let mut samples = Vec::with_capacity(manifest.samples.len());
    for entry in &manifest.samples {
        let bytes = fs::read(dir.join(&entry.aer))?;
        if hex_digest(&bytes) != entry.sha256 {
            return Err(EventError::Io(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("checksum mismatch for {}", entry.aer),
            )));
        }
        let mut stream = decode_aer(&bytes, manifest.resolution)?;
        // declared duration covers trailing silence up to a whole window
        let window = manifest.window_us as u64;
        if window > 0 {
            let bins = (stream.duration_us as u64).div_ceil(window).max(1);
            stream.duration_us = (bins * window) as u32;
        }
        let boxes = read_boxes_jsonl(&dir.join(&entry.boxes))?;
        samples.push(Sample {
            stream,
            boxes,
            split_tag: entry.split,
        });
    }
    Ok((manifest, samples))
}

/// Ingest a directory of real 5-byte AER recordings with `.jsonl` box
/// sidecars, optionally downsampling to a target resolution (boxes are
/// rescaled by the same factor). Files are discovered in sorted order.
pub fn ingest_aer_dir(
    dir: &Path,
    source_resolution: (u16, u16),
    target_resolution: Option<(u16, u16)>,
    label: u32,
) -> Result<Vec<Sample>, EventError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|s| s.to_str()),
                Some("bin") | Some("aer")
            )
        })
        .collect();
    paths.sort();
    let mut samples = Vec::with_capacity(paths.len());
    for path in paths {
        let bytes = fs::read(&path)?;
        let mut stream = decode_aer(&bytes, source_resolution)?;
        let sidecar = path.with_extension("jsonl");
        let mut boxes = if sidecar.exists() {
            read_boxes_jsonl(&sidecar)?
        } else {
            Vec::new()
        };
        for b in &mut boxes {
            b.label = label;
        }
        if let Some(target) = target_resolution {
            let sx = target.0 as f64 / source_resolution.0 as f64;
            let sy = target.1 as f64 / source_resolution.1 as f64;
            stream = downsample(&stream, target)?;
            for b in &mut boxes {
                b.x_min *= sx;
                b.x_max *= sx;
                b.y_min *= sy;
                b.y_max *= sy;
            }
        }
        samples.push(Sample {
            stream,
            boxes,
            split_tag: None,
        });
    }
    Ok(samples)
}
