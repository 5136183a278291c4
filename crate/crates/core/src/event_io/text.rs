use std::fmt::Write as _;

use super::{Event, EventStream, SensorGeometry, FORMAT_VERSION};
use crate::error::{Error, Result};

pub(super) const COLUMNS: &str = "t_us,x,y,p";

pub(super) fn encode(stream: &EventStream) -> String {
    let mut out = String::with_capacity(40 + stream.events.len() * 16);
    let _ = writeln!(
        out,
        "# width={},height={},version={}",
        stream.geometry.width, stream.geometry.height, stream.version
    );
    out.push_str(COLUMNS);
    out.push('\n');
    for e in &stream.events {
        let _ = writeln!(out, "{},{},{},{}", e.t_us, e.x, e.y, e.polarity);
    }
    out
}

fn parse_geometry(line: &str) -> Result<(u16, u16, u16)> {
    let bad = |msg: &str| Error::parse_line(1, msg.to_string());
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| bad("expected geometry line '# width=W,height=H,version=1'"))?;
    let (mut width, mut height, mut version) = (None, None, None);
    for field in body.trim().split(',') {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| bad("geometry field without '='"))?;
        let value: u16 = value
            .trim()
            .parse()
            .map_err(|_| bad("geometry value is not an integer"))?;
        match key.trim() {
            "width" => width = Some(value),
            "height" => height = Some(value),
            "version" => version = Some(value),
            other => return Err(bad(&format!("unknown geometry key '{other}'"))),
        }
    }
    match (width, height, version) {
        (Some(w), Some(h), Some(v)) if w > 0 && h > 0 => Ok((w, h, v)),
        (Some(_), Some(_), Some(_)) => Err(bad("zero sensor dimension")),
        _ => Err(bad("geometry line must give width, height and version")),
    }
}

pub(super) fn decode(text: &str) -> Result<EventStream> {
    let mut lines = text.lines();
    let (width, height, version) = parse_geometry(lines.next().unwrap_or(""))?;
    if version != FORMAT_VERSION {
        return Err(Error::parse_line(1, format!("unsupported version {version}")));
    }
    if lines.next().map(str::trim) != Some(COLUMNS) {
        return Err(Error::parse_line(2, format!("expected column header '{COLUMNS}'")));
    }
    let geometry = SensorGeometry::new(width, height);
    let mut events = Vec::new();
    let mut previous = 0u32;
    for (i, line) in lines.enumerate() {
        let line_no = i as u64 + 3;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let mut next = |name: &str| {
            fields
                .next()
                .ok_or_else(|| Error::parse_line(line_no, format!("missing field {name}")))
        };
        let t_us: u32 = parse_field(next("t_us")?, "t_us", line_no)?;
        let x: u16 = parse_field(next("x")?, "x", line_no)?;
        let y: u16 = parse_field(next("y")?, "y", line_no)?;
        let polarity: u8 = parse_field(next("p")?, "p", line_no)?;
        if fields.next().is_some() {
            return Err(Error::parse_line(line_no, "too many fields"));
        }
        if !geometry.contains(x, y) {
            return Err(Error::parse_line(
                line_no,
                format!("address ({x}, {y}) outside {width}x{height} sensor"),
            ));
        }
        if t_us < previous {
            return Err(Error::parse_line(
                line_no,
                format!("timestamp {t_us} precedes {previous}"),
            ));
        }
        if polarity > 1 {
            return Err(Error::parse_line(line_no, format!("polarity {polarity}")));
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

fn parse_field<T: std::str::FromStr>(raw: &str, name: &str, line: u64) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| Error::parse_line(line, format!("field {name} = '{raw}' is not valid")))
}
