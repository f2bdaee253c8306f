//! `MRRTAGS1` binary tag files and `timestamp_ps,channel` CSV.
//!
//! Binary layout, all little-endian:
//!
//! | offset | size | field          |
//! |--------|------|----------------|
//! | 0      | 8    | magic `MRRTAGS1` |
//! | 8      | 2    | version (1)    |
//! | 10     | 4    | resolution, ps |
//! | 14     | 1    | channel count  |
//! | 15     | 8    | record count   |
//! | 23     | 9·n  | records: u64 timestamp in ticks, u8 channel |

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::atomic_write;
use crate::error::{Error, Result};
use crate::stream::{Tag, TagStream};

pub const MAGIC: &[u8; 8] = b"MRRTAGS1";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 23;
pub const RECORD_LEN: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TagFileHeader {
    pub version: u16,
    pub resolution_ps: u32,
    pub channel_count: u8,
    pub record_count: u64,
}

impl TagFileHeader {
    fn to_bytes(self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[..8].copy_from_slice(MAGIC);
        b[8..10].copy_from_slice(&self.version.to_le_bytes());
        b[10..14].copy_from_slice(&self.resolution_ps.to_le_bytes());
        b[14] = self.channel_count;
        b[15..23].copy_from_slice(&self.record_count.to_le_bytes());
        b
    }

    fn from_bytes(b: &[u8; HEADER_LEN]) -> Result<Self> {
        if &b[..8] != MAGIC {
            return Err(Error::Format("bad magic: not an MRRTAGS1 file".into()));
        }
        let h = TagFileHeader {
            version: u16::from_le_bytes([b[8], b[9]]),
            resolution_ps: u32::from_le_bytes(b[10..14].try_into().unwrap()),
            channel_count: b[14],
            record_count: u64::from_le_bytes(b[15..23].try_into().unwrap()),
        };
        if h.version != VERSION {
            return Err(Error::Format(format!("unsupported version {}", h.version)));
        }
        if h.resolution_ps == 0 {
            return Err(Error::Format("zero resolution in header".into()));
        }
        Ok(h)
    }
}

pub fn encode_tags<W: Write>(stream: &TagStream, mut w: W) -> std::io::Result<()> {
    let header = TagFileHeader {
        version: VERSION,
        resolution_ps: stream.resolution(),
        channel_count: stream.channel_count(),
        record_count: stream.len() as u64,
    };
    w.write_all(&header.to_bytes())?;
    let res = stream.resolution() as u64;
    let mut rec = [0u8; RECORD_LEN];
    for t in stream.tags() {
        rec[..8].copy_from_slice(&(t.time / res).to_le_bytes());
        rec[8] = t.channel;
        w.write_all(&rec)?;
    }
    w.flush()
}

pub fn decode_tags<R: Read>(mut r: R) -> Result<TagStream> {
    let short = |e: std::io::Error, what: &str| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Format(format!("truncated {what}"))
        } else {
            Error::Format(e.to_string())
        }
    };
    let mut hb = [0u8; HEADER_LEN];
    r.read_exact(&mut hb).map_err(|e| short(e, "header"))?;
    let h = TagFileHeader::from_bytes(&hb)?;
    let res = h.resolution_ps as u64;
    let mut tags = Vec::with_capacity(h.record_count.min(1 << 24) as usize);
    let mut rec = [0u8; RECORD_LEN];
    for i in 0..h.record_count {
        r.read_exact(&mut rec).map_err(|e| {
            short(
                e,
                &format!("body: header declares {} records, found {i}", h.record_count),
            )
        })?;
        let ticks = u64::from_le_bytes(rec[..8].try_into().unwrap());
        let time = ticks
            .checked_mul(res)
            .ok_or_else(|| Error::Format(format!("record {i} overflows the picosecond range")))?;
        tags.push(Tag::new(time, rec[8]));
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra).map_err(|e| Error::Format(e.to_string()))? != 0 {
        return Err(Error::Format(format!(
            "trailing bytes after {} records",
            h.record_count
        )));
    }
    TagStream::new(tags, h.resolution_ps, h.channel_count)
}

pub fn write_tags(path: &Path, stream: &TagStream) -> Result<()> {
    atomic_write(path, |w| encode_tags(stream, BufWriter::new(w)))
}

pub fn read_tags(path: &Path) -> Result<TagStream> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    decode_tags(BufReader::new(f)).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        e => e,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    timestamp_ps: u64,
    channel: u8,
}

pub fn encode_tags_csv<W: Write>(stream: &TagStream, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for t in stream.tags() {
        out.serialize(CsvRow {
            timestamp_ps: t.time,
            channel: t.channel,
        })
        .map_err(|e| Error::Format(e.to_string()))?;
    }
    if stream.is_empty() {
        out.write_record(["timestamp_ps", "channel"])
            .map_err(|e| Error::Format(e.to_string()))?;
    }
    out.flush().map_err(|e| Error::Format(e.to_string()))
}

/// Parses CSV rows. Out-of-order rows are an error unless `sort` is set,
/// in which case they are sorted with a warning.
pub fn decode_tags_csv<R: Read>(r: R, resolution_ps: u32, channel_count: Option<u8>, sort: bool) -> Result<TagStream> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut tags = Vec::new();
    for (i, row) in rdr.deserialize::<CsvRow>().enumerate() {
        let row = row.map_err(|e| Error::Format(format!("row {}: {e}", i + 1)))?;
        tags.push(Tag::new(row.timestamp_ps, row.channel));
    }
    let channels = match channel_count {
        Some(c) => c,
        None => tags.iter().map(|t| t.channel).max().map_or(1, |m| m.saturating_add(1)),
    };
    if let Some(i) = (1..tags.len()).find(|&i| tags[i].time < tags[i - 1].time) {
        if !sort {
            return Err(Error::Unsorted { index: i });
        }
        log::warn!("timestamps out of order at row {}; sorting", i + 1);
        return TagStream::from_unsorted(tags, resolution_ps, channels);
    }
    TagStream::new(tags, resolution_ps, channels)
}

pub fn write_tags_csv(path: &Path, stream: &TagStream) -> Result<()> {
    atomic_write(path, |w| {
        encode_tags_csv(stream, w).map_err(|e| std::io::Error::other(e.to_string()))
    })
}

pub fn read_tags_csv(path: &Path, resolution_ps: u32, channel_count: Option<u8>, sort: bool) -> Result<TagStream> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    decode_tags_csv(BufReader::new(f), resolution_ps, channel_count, sort)
}

/// Ingestion seam for time-tagger dumps in other formats.
///
/// Implement this for a vendor format and pass it to [`import_with`]. Only the
/// two native formats ship with the crate.
pub trait TagImporter {
    fn name(&self) -> &str;
    fn import(&self, input: &mut dyn Read) -> Result<TagStream>;
}

pub struct NativeBinary;

impl TagImporter for NativeBinary {
    fn name(&self) -> &str {
        "mrrtags"
    }
    fn import(&self, input: &mut dyn Read) -> Result<TagStream> {
        decode_tags(input)
    }
}

pub struct CsvImporter {
    pub resolution_ps: u32,
    pub channel_count: Option<u8>,
    pub sort: bool,
}

impl TagImporter for CsvImporter {
    fn name(&self) -> &str {
        "csv"
    }
    fn import(&self, input: &mut dyn Read) -> Result<TagStream> {
        decode_tags_csv(input, self.resolution_ps, self.channel_count, self.sort)
    }
}

pub fn import_with(importer: &dyn TagImporter, path: &Path) -> Result<TagStream> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(f);
    importer.import(&mut r)
}
