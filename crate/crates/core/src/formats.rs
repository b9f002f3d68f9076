//! On-disk formats.
//!
//! # EVS1 event files
//!
//! All integers little-endian, no padding:
//!
//! ```text
//! offset  size  field
//! 0       4     magic  "EVS1" (45 56 53 31)
//! 4       2     width  u16, >= 1
//! 6       2     height u16, >= 1
//! 8       8     count  u64, number of records
//! 16      13*n  records
//!
//! record: t u64 (us) | x u16 | y u16 | p u8 (0 or 1)
//! ```
//!
//! Record `i` starts at byte `16 + 13 * i`. Timestamps are absolute and
//! non-decreasing; the file ends exactly after the last record.
//!
//! # Text formats
//!
//! * event CSV: header `t,x,y,p`, then one decimal record per line
//! * labels: `class cx cy w h` per line, 6-decimal fixed point
//! * predictions: `image_id class confidence cx cy w h` per line

use std::io::{BufRead, Read, Write};

use crate::bbox::{BBox, ClassId};
use crate::dataset::Annotation;
use crate::error::{Error, FormatError, LineError, Result};
use crate::metrics::Detection;
use crate::scalar::Scalar;
use crate::simulator::{Event, EventStream, Polarity};

pub const EVS_MAGIC: [u8; 4] = *b"EVS1";
pub const EVS_HEADER_LEN: usize = 16;
pub const EVS_RECORD_LEN: usize = 13;
pub const CSV_HEADER: &str = "t,x,y,p";

/// Byte size of an EVS1 file holding `count` records.
pub fn evs_file_len(count: u64) -> u64 {
    EVS_HEADER_LEN as u64 + EVS_RECORD_LEN as u64 * count
}

/// Writes `stream` as EVS1 and returns the number of bytes written.
pub fn write_events<W: Write>(stream: &EventStream, sink: W) -> Result<u64> {
    write_event_records(stream.width(), stream.height(), stream.events(), sink)
}

/// Validates then writes raw records. Nothing is written if validation fails.
pub fn write_event_records<W: Write>(width: u16, height: u16, events: &[Event], mut sink: W) -> Result<u64> {
    validate_records(width, height, events.iter().map(|e| (e.t, e.x, e.y, e.p.as_u8())))?;
    let mut buf = Vec::with_capacity(EVS_HEADER_LEN + EVS_RECORD_LEN * events.len());
    buf.extend_from_slice(&EVS_MAGIC);
    buf.extend_from_slice(&width.to_le_bytes());
    buf.extend_from_slice(&height.to_le_bytes());
    buf.extend_from_slice(&(events.len() as u64).to_le_bytes());
    for e in events {
        buf.extend_from_slice(&e.t.to_le_bytes());
        buf.extend_from_slice(&e.x.to_le_bytes());
        buf.extend_from_slice(&e.y.to_le_bytes());
        buf.push(e.p.as_u8());
    }
    sink.write_all(&buf)?;
    sink.flush()?;
    Ok(buf.len() as u64)
}

pub fn read_events<R: Read>(mut source: R) -> Result<EventStream> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    parse_events(&bytes)
}

/// Header fields of an EVS1 buffer, validated against the buffer length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvsHeader {
    pub width: u16,
    pub height: u16,
    pub count: u64,
}

pub fn parse_header(bytes: &[u8]) -> Result<EvsHeader, FormatError> {
    if bytes.len() >= 4 && bytes[..4] != EVS_MAGIC {
        return Err(FormatError::BadMagic(bytes[..4].try_into().unwrap()));
    }
    if bytes.len() < EVS_HEADER_LEN {
        return Err(FormatError::TruncatedHeader { len: bytes.len() });
    }
    let width = u16::from_le_bytes([bytes[4], bytes[5]]);
    let height = u16::from_le_bytes([bytes[6], bytes[7]]);
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    if width == 0 {
        return Err(FormatError::ZeroDimension("width"));
    }
    if height == 0 {
        return Err(FormatError::ZeroDimension("height"));
    }
    let body = (bytes.len() - EVS_HEADER_LEN) as u64;
    let complete = body / EVS_RECORD_LEN as u64;
    match count.checked_mul(EVS_RECORD_LEN as u64) {
        Some(expected) if expected == body => Ok(EvsHeader { width, height, count }),
        Some(expected) if expected < body => Err(FormatError::TrailingBytes {
            count,
            offset: EVS_HEADER_LEN as u64 + expected,
            extra: body - expected,
        }),
        _ => Err(FormatError::TruncatedRecord { offset: evs_file_len(complete) }),
    }
}

pub fn parse_events(bytes: &[u8]) -> Result<EventStream> {
    let header = parse_header(bytes)?;
    let records = bytes[EVS_HEADER_LEN..].chunks_exact(EVS_RECORD_LEN).map(|r| {
        let t = u64::from_le_bytes(r[0..8].try_into().unwrap());
        let x = u16::from_le_bytes([r[8], r[9]]);
        let y = u16::from_le_bytes([r[10], r[11]]);
        (t, x, y, r[12])
    });
    validate_records(header.width, header.height, records.clone())?;
    let events = records
        .map(|(t, x, y, p)| Event::new(x, y, t, Polarity::from_u8(p).expect("validated")))
        .collect();
    EventStream::new(header.width, header.height, events)
}

fn validate_records(
    width: u16,
    height: u16,
    records: impl Iterator<Item = (u64, u16, u16, u8)>,
) -> Result<(), FormatError> {
    if width == 0 {
        return Err(FormatError::ZeroDimension("width"));
    }
    if height == 0 {
        return Err(FormatError::ZeroDimension("height"));
    }
    let mut prev = 0;
    for (index, (t, x, y, p)) in records.enumerate() {
        let index = index as u64;
        if p > 1 {
            return Err(FormatError::BadPolarity { index, value: p });
        }
        if x >= width || y >= height {
            return Err(FormatError::OutOfBounds { index, x, y, width, height });
        }
        if t < prev {
            return Err(FormatError::DecreasingTimestamp { index, t, prev });
        }
        prev = t;
    }
    Ok(())
}

pub fn write_events_csv<W: Write>(stream: &EventStream, mut sink: W) -> Result<()> {
    writeln!(sink, "{CSV_HEADER}")?;
    for e in stream.events() {
        writeln!(sink, "{},{},{},{}", e.t, e.x, e.y, e.p.as_u8())?;
    }
    sink.flush()?;
    Ok(())
}

/// Reads the CSV interchange format, applying the same checks as the binary reader.
pub fn read_events_csv<R: BufRead>(source: R, width: u16, height: u16) -> Result<EventStream> {
    if width == 0 || height == 0 {
        return Err(FormatError::ZeroDimension(if width == 0 { "width" } else { "height" }).into());
    }
    let mut lines = source.lines();
    match lines.next().transpose()? {
        Some(h) if h.trim() == CSV_HEADER => {}
        _ => return Err(Error::parse(1, LineError::Header(CSV_HEADER))),
    }
    let mut events = Vec::new();
    let mut prev = 0;
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields = split_fields(line, ',', 4).map_err(|k| Error::parse(line_no, k))?;
        let t: u64 = parse_int(fields[0]).map_err(|k| Error::parse(line_no, k))?;
        let x: u16 = parse_int(fields[1]).map_err(|k| Error::parse(line_no, k))?;
        let y: u16 = parse_int(fields[2]).map_err(|k| Error::parse(line_no, k))?;
        let p = match fields[3] {
            "0" => Polarity::Off,
            "1" => Polarity::On,
            other => return Err(Error::parse(line_no, LineError::Polarity(other.to_string()))),
        };
        if x >= width {
            return Err(Error::parse(line_no, LineError::OutOfRange { field: "x", value: x.to_string() }));
        }
        if y >= height {
            return Err(Error::parse(line_no, LineError::OutOfRange { field: "y", value: y.to_string() }));
        }
        if t < prev {
            return Err(Error::parse(line_no, LineError::Unsorted));
        }
        prev = t;
        events.push(Event::new(x, y, t, p));
    }
    EventStream::new(width, height, events)
}

/// One label line per annotation: `class cx cy w h`.
pub fn write_labels<T: Scalar, W: Write>(annotations: &[Annotation<T>], mut sink: W) -> Result<()> {
    for a in annotations {
        let [cx, cy, w, h] = a.bbox.as_array().map(Scalar::as_f64);
        writeln!(sink, "{} {cx:.6} {cy:.6} {w:.6} {h:.6}", a.class.index())?;
    }
    sink.flush()?;
    Ok(())
}

pub fn read_labels<T: Scalar, R: BufRead>(source: R) -> Result<Vec<Annotation<T>>> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        out.push(parse_label_line(line).map_err(|k| Error::parse(i + 1, k))?);
    }
    Ok(out)
}

pub fn parse_label_line<T: Scalar>(line: &str) -> Result<Annotation<T>, LineError> {
    let f = split_whitespace_fields(line, 5)?;
    let class = parse_class(f[0])?;
    let bbox = parse_box(&f[1..5])?;
    Ok(Annotation { class, bbox })
}

pub fn write_predictions<T: Scalar, W: Write>(detections: &[Detection<T>], mut sink: W) -> Result<()> {
    for d in detections {
        if d.image_id.is_empty() || d.image_id.contains(char::is_whitespace) {
            return Err(Error::Data(format!("image id {:?} cannot be written", d.image_id)));
        }
        let [cx, cy, w, h] = d.bbox.as_array().map(Scalar::as_f64);
        writeln!(
            sink,
            "{} {} {:.6} {cx:.6} {cy:.6} {w:.6} {h:.6}",
            d.image_id,
            d.class.index(),
            d.confidence.as_f64()
        )?;
    }
    sink.flush()?;
    Ok(())
}

pub fn read_predictions<T: Scalar, R: BufRead>(source: R) -> Result<Vec<Detection<T>>> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        out.push(parse_prediction_line(line).map_err(|k| Error::parse(i + 1, k))?);
    }
    Ok(out)
}

pub fn parse_prediction_line<T: Scalar>(line: &str) -> Result<Detection<T>, LineError> {
    let f = split_whitespace_fields(line, 7)?;
    let class = parse_class(f[1])?;
    let confidence: f64 = parse_float(f[2])?;
    if !(0.0..=1.0).contains(&confidence) {
        return Err(LineError::OutOfRange { field: "confidence", value: f[2].to_string() });
    }
    let bbox = parse_box(&f[3..7])?;
    Ok(Detection { image_id: f[0].to_string(), class, confidence: T::of(confidence), bbox })
}

fn parse_class(s: &str) -> Result<ClassId, LineError> {
    s.parse::<u8>()
        .ok()
        .and_then(ClassId::from_index)
        .ok_or_else(|| LineError::UnknownClass(s.to_string()))
}

fn parse_box<T: Scalar>(f: &[&str]) -> Result<BBox<T>, LineError> {
    const NAMES: [&str; 4] = ["cx", "cy", "w", "h"];
    let mut v = [0.0f64; 4];
    for (i, s) in f.iter().enumerate() {
        v[i] = parse_float(s)?;
        let ok = if i < 2 { (0.0..=1.0).contains(&v[i]) } else { v[i] > 0.0 && v[i] <= 1.0 };
        if !ok {
            return Err(LineError::OutOfRange { field: NAMES[i], value: s.to_string() });
        }
    }
    Ok(BBox::new(T::of(v[0]), T::of(v[1]), T::of(v[2]), T::of(v[3])))
}

fn parse_float(s: &str) -> Result<f64, LineError> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(LineError::Malformed(s.to_string())),
    }
}

fn parse_int<I: std::str::FromStr>(s: &str) -> Result<I, LineError> {
    s.trim().parse().map_err(|_| LineError::Malformed(s.to_string()))
}

fn split_fields(line: &str, sep: char, expected: usize) -> Result<Vec<&str>, LineError> {
    let f: Vec<&str> = line.split(sep).map(str::trim).collect();
    if f.len() != expected {
        return Err(LineError::FieldCount { expected, found: f.len() });
    }
    Ok(f)
}

fn split_whitespace_fields(line: &str, expected: usize) -> Result<Vec<&str>, LineError> {
    let f: Vec<&str> = line.split_whitespace().collect();
    if f.len() != expected {
        return Err(LineError::FieldCount { expected, found: f.len() });
    }
    Ok(f)
}
