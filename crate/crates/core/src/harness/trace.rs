use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::compression::CacheLineData;

pub const BINARY_MAGIC: &[u8; 4] = b"CMS1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Op {
    Read,
    Write,
}

impl Op {
    pub fn is_write(self) -> bool {
        self == Op::Write
    }
}

/// One memory access with the line's contents at that point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    /// Cumulative instruction count.
    pub icount: u64,
    pub op: Op,
    pub addr: u64,
    pub data: CacheLineData,
}

impl TraceRecord {
    pub fn line_addr(&self) -> u64 {
        self.addr & !(self.data.line_size() as u64 - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceFormat {
    Text,
    Binary,
}

impl std::str::FromStr for TraceFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(TraceFormat::Text),
            "binary" | "bin" => Ok(TraceFormat::Binary),
            _ => Err(format!("unknown trace format {s:?} (expected text or binary)")),
        }
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> HarnessError {
    HarnessError::Parse {
        line,
        msg: msg.into(),
    }
}

/// Parses one `ACC <icount> <R|W> 0x<addr> <hex>` line.
pub fn parse_text_line(text: &str, line_no: usize) -> Result<TraceRecord, HarnessError> {
    let mut fields = text.split_whitespace();
    let mut next = |what: &str| fields.next().ok_or_else(|| parse_err(line_no, format!("missing {what}")));
    let tag = next("record tag")?;
    if tag != "ACC" {
        return Err(parse_err(line_no, format!("expected ACC, found {tag:?}")));
    }
    let icount = next("icount")?
        .parse::<u64>()
        .map_err(|e| parse_err(line_no, format!("bad icount: {e}")))?;
    let op = match next("op")? {
        "R" => Op::Read,
        "W" => Op::Write,
        other => return Err(parse_err(line_no, format!("bad op {other:?} (expected R or W)"))),
    };
    let addr_text = next("address")?;
    let hex_addr = addr_text
        .strip_prefix("0x")
        .ok_or_else(|| parse_err(line_no, format!("address {addr_text:?} lacks 0x prefix")))?;
    let addr = u64::from_str_radix(hex_addr, 16).map_err(|e| parse_err(line_no, format!("bad address: {e}")))?;
    let bytes = hex::decode(next("line data")?).map_err(|e| parse_err(line_no, format!("bad line data: {e}")))?;
    let data = CacheLineData::new(bytes).map_err(|e| parse_err(line_no, e.to_string()))?;
    if fields.next().is_some() {
        return Err(parse_err(line_no, "trailing fields"));
    }
    Ok(TraceRecord { icount, op, addr, data })
}

/// Streaming reader for the text format. Blank lines and `#` comments are
/// skipped.
pub struct TextTraceReader<R> {
    inner: R,
    line_no: usize,
    last_icount: u64,
    buf: String,
}

impl<R: BufRead> TextTraceReader<R> {
    pub fn new(inner: R) -> Self {
        Self {
            inner,
            line_no: 0,
            last_icount: 0,
            buf: String::new(),
        }
    }
}

impl<R: BufRead> Iterator for TextTraceReader<R> {
    type Item = Result<TraceRecord, HarnessError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.inner.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.line_no += 1;
            let text = self.buf.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let rec = parse_text_line(text, self.line_no).and_then(|r| {
                if r.icount < self.last_icount {
                    Err(parse_err(self.line_no, "icount decreases"))
                } else {
                    Ok(r)
                }
            });
            if let Ok(r) = &rec {
                self.last_icount = r.icount;
            }
            return Some(rec);
        }
    }
}

/// Streaming reader for the binary format; the line size is not stored in
/// the file and must be supplied.
pub struct BinaryTraceReader<R> {
    inner: R,
    line_size: usize,
    index: usize,
    last_icount: u64,
    started: bool,
}

impl<R: Read> BinaryTraceReader<R> {
    pub fn new(inner: R, line_size: usize) -> Self {
        Self {
            inner,
            line_size,
            index: 0,
            last_icount: 0,
            started: false,
        }
    }

    /// Fills `buf`, returning false on a clean end of stream before any byte.
    fn fill(&mut self, buf: &mut [u8]) -> Result<bool, HarnessError> {
        let mut got = 0;
        while got < buf.len() {
            match self.inner.read(&mut buf[got..]) {
                Ok(0) if got == 0 => return Ok(false),
                Ok(0) => return Err(HarnessError::Truncated { record: self.index }),
                Ok(n) => got += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        Ok(true)
    }

    fn read_record(&mut self) -> Result<Option<TraceRecord>, HarnessError> {
        if !self.started {
            self.started = true;
            let mut magic = [0u8; 4];
            if !self.fill(&mut magic)? || &magic != BINARY_MAGIC {
                return Err(HarnessError::BadMagic);
            }
            CacheLineData::zeroed(self.line_size).map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        let mut rec = vec![0u8; 17 + self.line_size];
        if !self.fill(&mut rec)? {
            return Ok(None);
        }
        let icount = u64::from_le_bytes(rec[..8].try_into().unwrap());
        let op = match rec[8] {
            0 => Op::Read,
            1 => Op::Write,
            other => {
                return Err(HarnessError::Record {
                    record: self.index,
                    msg: format!("bad op byte {other}"),
                })
            }
        };
        let addr = u64::from_le_bytes(rec[9..17].try_into().unwrap());
        if icount < self.last_icount {
            return Err(HarnessError::Record {
                record: self.index,
                msg: "icount decreases".into(),
            });
        }
        self.last_icount = icount;
        self.index += 1;
        let data = CacheLineData::new(rec[17..].to_vec()).expect("line size checked");
        Ok(Some(TraceRecord { icount, op, addr, data }))
    }
}

impl<R: Read> Iterator for BinaryTraceReader<R> {
    type Item = Result<TraceRecord, HarnessError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.read_record().transpose()
    }
}

/// Reads a whole trace. `line_size` is only consulted for the binary format.
pub fn parse_trace(path: &Path, format: TraceFormat, line_size: usize) -> Result<Vec<TraceRecord>, HarnessError> {
    let file = File::open(path)?;
    match format {
        TraceFormat::Text => TextTraceReader::new(BufReader::new(file)).collect(),
        TraceFormat::Binary => BinaryTraceReader::new(BufReader::new(file), line_size).collect(),
    }
}

pub fn format_text_line(r: &TraceRecord) -> String {
    let op = match r.op {
        Op::Read => 'R',
        Op::Write => 'W',
    };
    format!("ACC {} {} 0x{:x} {}", r.icount, op, r.addr, hex::encode(r.data.as_bytes()))
}

pub fn write_text<W: Write>(out: W, records: &[TraceRecord]) -> io::Result<()> {
    let mut out = BufWriter::new(out);
    for r in records {
        writeln!(out, "{}", format_text_line(r))?;
    }
    out.flush()
}

pub fn write_binary<W: Write>(out: W, records: &[TraceRecord]) -> io::Result<()> {
    let mut out = BufWriter::new(out);
    out.write_all(BINARY_MAGIC)?;
    for r in records {
        out.write_all(&r.icount.to_le_bytes())?;
        out.write_all(&[r.op.is_write() as u8])?;
        out.write_all(&r.addr.to_le_bytes())?;
        out.write_all(r.data.as_bytes())?;
    }
    out.flush()
}

pub fn write_trace(path: &Path, format: TraceFormat, records: &[TraceRecord]) -> io::Result<()> {
    let file = File::create(path)?;
    match format {
        TraceFormat::Text => write_text(file, records),
        TraceFormat::Binary => write_binary(file, records),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(icount: u64, op: Op, addr: u64, fill: u8) -> TraceRecord {
        TraceRecord {
            icount,
            op,
            addr,
            data: CacheLineData::new(vec![fill; 64]).unwrap(),
        }
    }

    #[test]
    fn zero_line_text_record() {
        let text = format!("ACC 10 R 0x1000 {}", "0".repeat(128));
        let r = parse_text_line(&text, 1).unwrap();
        assert_eq!((r.icount, r.op, r.addr), (10, Op::Read, 0x1000));
        assert!(r.data.is_zero());
    }

    #[test]
    fn bad_op_names_the_line() {
        let text = format!("ACC 1 R 0x0 {}\n\nACC 2 X 0x40 {}\n", "0".repeat(128), "0".repeat(128));
        let out: Vec<_> = TextTraceReader::new(text.as_bytes()).collect();
        assert!(out[0].is_ok());
        match &out[1] {
            Err(HarnessError::Parse { line, msg }) => {
                assert_eq!(*line, 3);
                assert!(msg.contains("bad op"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn text_rejects_odd_lengths_and_decreasing_icount() {
        assert!(parse_text_line(&format!("ACC 1 R 0x0 {}", "0".repeat(100)), 1).is_err());
        assert!(parse_text_line(&format!("ACC 1 R 1000 {}", "0".repeat(128)), 1).is_err());
        let text = format!("ACC 5 R 0x0 {z}\nACC 4 R 0x0 {z}\n", z = "0".repeat(128));
        let out: Vec<_> = TextTraceReader::new(text.as_bytes()).collect();
        assert!(out[1].is_err());
    }

    #[test]
    fn roundtrips() {
        let records: Vec<_> = (0..20).map(|i| rec(i * 3, if i % 3 == 0 { Op::Write } else { Op::Read }, i * 64, i as u8)).collect();
        let mut bin = Vec::new();
        write_binary(&mut bin, &records).unwrap();
        let back: Vec<_> = BinaryTraceReader::new(bin.as_slice(), 64).collect::<Result<_, _>>().unwrap();
        assert_eq!(back, records);
        let mut text = Vec::new();
        write_text(&mut text, &records).unwrap();
        let back: Vec<_> = TextTraceReader::new(text.as_slice()).collect::<Result<_, _>>().unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn truncated_binary_reports_record_index() {
        let records: Vec<_> = (0..3).map(|i| rec(i, Op::Read, i * 64, 1)).collect();
        let mut bin = Vec::new();
        write_binary(&mut bin, &records).unwrap();
        bin.truncate(bin.len() - 5);
        let out: Vec<_> = BinaryTraceReader::new(bin.as_slice(), 64).collect();
        assert!(matches!(out.last(), Some(Err(HarnessError::Truncated { record: 2 }))));
        let bad: Vec<_> = BinaryTraceReader::new(&b"XXXX"[..], 64).collect();
        assert!(matches!(bad[0], Err(HarnessError::BadMagic)));
    }
}
