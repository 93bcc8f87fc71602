//! JSONL bounding-box sidecar files: one box object per line with keys
//! `x_min, y_min, x_max, y_max, objectness, label`.

use super::{BoundingBox, EventError};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

pub fn write_boxes_jsonl(path: &Path, boxes: &[BoundingBox]) -> Result<(), EventError> {
    let mut file = fs::File::create(path)?;
    for b in boxes {
        let line = serde_json::to_string(b)?;
        writeln!(file, "{line}")?;
    }
    Ok(())
}

pub fn read_boxes_jsonl(path: &Path) -> Result<Vec<BoundingBox>, EventError> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut boxes = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        boxes.push(serde_json::from_str(&line)?);
    }
    Ok(boxes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip() {
        let dir = std::env::temp_dir().join("sf_annot_test");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("boxes.jsonl");
        let boxes = vec![
            BoundingBox::new(1.0, 2.0, 30.5, 40.25, 1.0, 0),
            BoundingBox::new(5.0, 5.0, 10.0, 10.0, 0.75, 2),
        ];
        write_boxes_jsonl(&path, &boxes).unwrap();
        assert_eq!(read_boxes_jsonl(&path).unwrap(), boxes);
    }

    #[test]
    fn reader_accepts_external_key_order() {
        let dir = std::env::temp_dir().join("sf_annot_test");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("external.jsonl");
        fs::write(
            &path,
            "{\"label\":0,\"objectness\":1.0,\"x_max\":8.0,\"x_min\":2.0,\"y_max\":9.0,\"y_min\":3.0}\n",
        )
        .unwrap();
        let boxes = read_boxes_jsonl(&path).unwrap();
        assert_eq!(boxes, vec![BoundingBox::new(2.0, 3.0, 8.0, 9.0, 1.0, 0)]);
    }
}
