use super::{Event, EventStream, SensorGeometry, FORMAT_VERSION, HEADER_LEN, MAGIC, RECORD_LEN};
use crate::error::{Error, Result};

pub(super) fn encode(stream: &EventStream) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + RECORD_LEN * stream.events.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&stream.version.to_le_bytes());
    out.extend_from_slice(&stream.geometry.width.to_le_bytes());
    out.extend_from_slice(&stream.geometry.height.to_le_bytes());
    out.extend_from_slice(&(stream.events.len() as u64).to_le_bytes());
    for e in &stream.events {
        out.extend_from_slice(&e.t_us.to_le_bytes());
        out.extend_from_slice(&e.x.to_le_bytes());
        out.extend_from_slice(&e.y.to_le_bytes());
        out.push(e.polarity);
    }
    out
}

fn u16_at(bytes: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([bytes[at], bytes[at + 1]])
}

pub(super) fn decode(bytes: &[u8]) -> Result<EventStream> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::parse_byte(
            bytes.len() as u64,
            format!("truncated header ({} of {HEADER_LEN} bytes)", bytes.len()),
        ));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::parse_byte(0, "bad magic, expected \"AERS\""));
    }
    let version = u16_at(bytes, 4);
    if version != FORMAT_VERSION {
        return Err(Error::parse_byte(4, format!("unsupported version {version}")));
    }
    let width = u16_at(bytes, 6);
    let height = u16_at(bytes, 8);
    if width == 0 || height == 0 {
        return Err(Error::parse_byte(6, format!("zero sensor dimension {width}x{height}")));
    }
    let count = u64::from_le_bytes(bytes[10..18].try_into().unwrap());
    let body = bytes.len() - HEADER_LEN;
    let expected = count.checked_mul(RECORD_LEN as u64);
    if expected != Some(body as u64) {
        return Err(Error::parse_byte(
            10,
            format!("record count {count} does not match {body} payload bytes"),
        ));
    }

    let geometry = SensorGeometry::new(width, height);
    let mut events = Vec::with_capacity(count as usize);
    let mut previous = 0u32;
    for (i, rec) in bytes[HEADER_LEN..].chunks_exact(RECORD_LEN).enumerate() {
        let offset = (HEADER_LEN + i * RECORD_LEN) as u64;
        let t_us = u32::from_le_bytes(rec[0..4].try_into().unwrap());
        let x = u16_at(rec, 4);
        let y = u16_at(rec, 6);
        let polarity = rec[8];
        if !geometry.contains(x, y) {
            return Err(Error::parse_byte(
                offset,
                format!("address ({x}, {y}) outside {width}x{height} sensor"),
            ));
        }
        if t_us < previous {
            return Err(Error::parse_byte(
                offset,
                format!("timestamp {t_us} precedes {previous}"),
            ));
        }
        if polarity > 1 {
            return Err(Error::parse_byte(offset + 8, format!("polarity {polarity}")));
        }
        previous = t_us;
        events.push(Event {
            t_us,
            x,
            y,
            polarity,
        });
    }
    Ok(EventStream {
        geometry,
        version,
        events,
        label: None,
    })
}
