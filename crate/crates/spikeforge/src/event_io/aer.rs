//! 5-byte AER record codec.
//!
//! Record layout: byte0 = x, byte1 = y, byte2 bit 7 = polarity, the
//! remaining 23 bits (byte2 bits 6..0, byte3, byte4, big-endian) are the
//! timestamp in microseconds. This matches the common event-camera
//! dataset distribution format, so real recordings load unmodified.

use super::{Event, EventError, EventStream};

const RECORD: usize = 5;
const T_MAX: u32 = (1 << 23) - 1;

/// Decode a raw AER buffer into an event stream, validating geometry and
/// timestamp order.
pub fn decode_aer(bytes: &[u8], resolution: (u16, u16)) -> Result<EventStream, EventError> {
    if bytes.len() % RECORD != 0 {
        return Err(EventError::TruncatedRecord {
            len: bytes.len(),
            offset: bytes.len() - bytes.len() % RECORD,
        });
    }
    let (w, h) = resolution;
    let mut events = Vec::with_capacity(bytes.len() / RECORD);
    let mut prev_t = 0u32;
    for (i, rec) in bytes.chunks_exact(RECORD).enumerate() {
        let x = rec[0] as u16;
        let y = rec[1] as u16;
        let p = rec[2] >> 7;
        let t = (((rec[2] & 0x7f) as u32) << 16) | ((rec[3] as u32) << 8) | rec[4] as u32;
        if x >= w || y >= h {
            return Err(EventError::OutOfBounds {
                index: i,
                x,
                y,
                width: w,
                height: h,
                offset: i * RECORD,
            });
        }
        if t < prev_t {
            return Err(EventError::NonMonotonicTimestamp {
                index: i,
                prev: prev_t,
                curr: t,
                offset: i * RECORD,
            });
        }
        prev_t = t;
        events.push(Event { x, y, t, p });
    }
    Ok(EventStream::new(events, resolution))
}

/// Encode a stream back to the 5-byte record format, bit-exactly
/// invertible by [`decode_aer`].
pub fn encode_aer(stream: &EventStream) -> Result<Vec<u8>, EventError> {
    let mut out = Vec::with_capacity(stream.events.len() * RECORD);
    for e in &stream.events {
        if e.t > T_MAX {
            return Err(EventError::TimestampOverflow { t: e.t });
        }
        if e.x > 0xff || e.y > 0xff {
            return Err(EventError::CoordinateOverflow { x: e.x, y: e.y });
        }
        out.push(e.x as u8);
        out.push(e.y as u8);
        out.push(((e.p & 1) << 7) | ((e.t >> 16) as u8 & 0x7f));
        out.push((e.t >> 8) as u8);
        out.push(e.t as u8);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decode_single_record() {
        let stream = decode_aer(&[0x0a, 0x14, 0x80, 0x00, 0x64], (128, 128)).unwrap();
        assert_eq!(
            stream.events,
            vec![Event {
                x: 10,
                y: 20,
                t: 100,
                p: 1
            }]
        );
        assert_eq!(stream.duration_us, 101);
    }

    #[test]
    fn empty_buffer_decodes_to_empty_stream() {
        let stream = decode_aer(&[], (64, 64)).unwrap();
        assert!(stream.is_empty());
        assert_eq!(stream.duration_us, 0);
    }

    #[test]
    fn encode_inverts_decode_example() {
        let stream = EventStream::new(
            vec![Event {
                x: 10,
                y: 20,
                t: 100,
                p: 1,
            }],
            (128, 128),
        );
        assert_eq!(encode_aer(&stream).unwrap(), vec![0x0a, 0x14, 0x80, 0x00, 0x64]);
    }

    #[test]
    fn truncated_buffer_is_rejected_with_offset() {
        let err = decode_aer(&[1, 2, 3], (64, 64)).unwrap_err();
        match err {
            EventError::TruncatedRecord { len: 3, offset: 0 } => {}
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn out_of_bounds_is_rejected() {
        let err = decode_aer(&[200, 0, 0, 0, 0], (128, 128)).unwrap_err();
        assert!(matches!(err, EventError::OutOfBounds { x: 200, .. }));
    }

    #[test]
    fn non_monotonic_timestamp_is_rejected() {
        let bytes = [0, 0, 0x00, 0x01, 0x00, 0, 0, 0x00, 0x00, 0x50];
        let err = decode_aer(&bytes, (64, 64)).unwrap_err();
        assert!(matches!(
            err,
            EventError::NonMonotonicTimestamp { index: 1, prev: 256, curr: 80, .. }
        ));
    }

    #[test]
    fn timestamp_overflow_is_rejected() {
        let stream = EventStream::new(
            vec![Event {
                x: 0,
                y: 0,
                t: 1 << 23,
                p: 0,
            }],
            (64, 64),
        );
        assert!(matches!(
            encode_aer(&stream),
            Err(EventError::TimestampOverflow { t }) if t == 1 << 23
        ));
    }

    #[test]
    fn max_timestamp_round_trips() {
        let stream = EventStream::new(
            vec![Event {
                x: 255,
                y: 255,
                t: (1 << 23) - 1,
                p: 0,
            }],
            (256, 256),
        );
        let decoded = decode_aer(&encode_aer(&stream).unwrap(), (256, 256)).unwrap();
        assert_eq!(decoded.events, stream.events);
    }
}
