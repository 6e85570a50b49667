//! On-disk formats: event streams, FASTA reads, ground-truth sidecars and
//! state-path dumps.
//!
//! Event text: one decimal per line, `#` comments and blank lines ignored.
//!
//! Event binary (little-endian):
//!
//! ```text
//! "PPEV" | version u8 = 1 | channel u32 | count u64 | count x f32
//! ```
//!
//! Truth sidecar:
//!
//! ```text
//! POREPATH-TRUTH v1
//! channel <u32>
//! bases <ACGT...>
//! <event_index>\t<state_index>      one row per event
//! ```

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read as IoRead, Write};
use std::path::Path;

use thiserror::Error;

use crate::model::decode_kmer;
use crate::simulator::GroundTruth;
use crate::traceback::{Read, StatePath};

pub const EVENT_MAGIC: &[u8; 4] = b"PPEV";
pub const EVENT_VERSION: u8 = 1;
pub const TRUTH_MAGIC: &str = "POREPATH-TRUTH v1";
pub const FASTA_WIDTH: usize = 80;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Stream(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("binary event file: {0}")]
    Binary(String),
}

impl FormatError {
    fn parse(line: usize, msg: impl Into<String>) -> Self {
        Self::Parse { line, msg: msg.into() }
    }

    /// True when the error came from the filesystem rather than the content.
    pub fn is_io(&self) -> bool {
        matches!(self, Self::Io { .. } | Self::Stream(_))
    }
}

fn open(path: &Path) -> Result<BufReader<File>, FormatError> {
    File::open(path).map(BufReader::new).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, FormatError> {
    File::create(path).map(BufWriter::new).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Event values with the channel they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct EventFile {
    pub channel_id: u32,
    pub events: Vec<f64>,
}

pub fn read_events_text<R: BufRead>(r: R) -> Result<Vec<f64>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let v: f64 = t
            .parse()
            .map_err(|_| FormatError::parse(i + 1, format!("not a number: '{t}'")))?;
        if !v.is_finite() {
            return Err(FormatError::parse(i + 1, format!("event not finite: {t}")));
        }
        out.push(v);
    }
    Ok(out)
}

pub fn write_events_text<W: Write>(mut w: W, events: &[f64]) -> io::Result<()> {
    for v in events {
        writeln!(w, "{v}")?;
    }
    Ok(())
}

/// Writes the binary format. Values are stored as `f32`.
pub fn write_events_binary<W: Write>(mut w: W, channel_id: u32, events: &[f64]) -> io::Result<()> {
    w.write_all(EVENT_MAGIC)?;
    w.write_all(&[EVENT_VERSION])?;
    w.write_all(&channel_id.to_le_bytes())?;
    w.write_all(&(events.len() as u64).to_le_bytes())?;
    for &v in events {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_events_binary<R: IoRead>(mut r: R) -> Result<EventFile, FormatError> {
    let truncated = |e: io::Error| match e.kind() {
        io::ErrorKind::UnexpectedEof => FormatError::Binary("truncated file".into()),
        _ => FormatError::Stream(e),
    };
    let mut head = [0u8; 17];
    r.read_exact(&mut head).map_err(truncated)?;
    if &head[..4] != EVENT_MAGIC {
        return Err(FormatError::Binary("bad magic".into()));
    }
    if head[4] != EVENT_VERSION {
        return Err(FormatError::Binary(format!("unsupported version {}", head[4])));
    }
    let channel_id = u32::from_le_bytes(head[5..9].try_into().expect("4 bytes"));
    let count = u64::from_le_bytes(head[9..17].try_into().expect("8 bytes"));
    let mut events = Vec::with_capacity(count.min(1 << 24) as usize);
    let mut buf = [0u8; 4];
    for i in 0..count {
        r.read_exact(&mut buf).map_err(truncated)?;
        let v = f32::from_le_bytes(buf);
        if !v.is_finite() {
            return Err(FormatError::Binary(format!("event {i} not finite")));
        }
        events.push(v as f64);
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(FormatError::Binary("trailing bytes after events".into()));
    }
    Ok(EventFile { channel_id, events })
}

/// Reads either event format, choosing by the leading magic. Text files
/// report channel 0.
pub fn load_events(path: impl AsRef<Path>) -> Result<EventFile, FormatError> {
    let path = path.as_ref();
    let mut r = open(path)?;
    let is_binary = r.fill_buf()?.starts_with(EVENT_MAGIC);
    if is_binary {
        read_events_binary(r)
    } else {
        Ok(EventFile {
            channel_id: 0,
            events: read_events_text(r)?,
        })
    }
}

pub fn save_events_binary(path: impl AsRef<Path>, channel_id: u32, events: &[f64]) -> Result<(), FormatError> {
    let mut w = create(path.as_ref())?;
    write_events_binary(&mut w, channel_id, events)?;
    w.flush()?;
    Ok(())
}

/// One FASTA record per read, wrapped at 80 columns.
pub fn write_fasta<W: Write>(mut w: W, reads: &[Read]) -> io::Result<()> {
    for read in reads {
        writeln!(w, ">ch{}:{}-{}", read.channel_id, read.chunk_span.0, read.chunk_span.1)?;
        for line in read.bases.as_bytes().chunks(FASTA_WIDTH) {
            w.write_all(line)?;
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FastaRecord {
    pub header: String,
    pub seq: String,
}

impl FastaRecord {
    /// Channel from a `ch<channel>:<start>-<end>` header.
    pub fn channel_id(&self) -> Option<u32> {
        self.header.strip_prefix("ch")?.split(':').next()?.parse().ok()
    }
}

pub fn read_fasta<R: BufRead>(r: R) -> Result<Vec<FastaRecord>, FormatError> {
    let mut out: Vec<FastaRecord> = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim_end();
        if let Some(h) = t.strip_prefix('>') {
            out.push(FastaRecord {
                header: h.to_string(),
                seq: String::new(),
            });
        } else if !t.is_empty() {
            let rec = out
                .last_mut()
                .ok_or_else(|| FormatError::parse(i + 1, "sequence before first header"))?;
            rec.seq.push_str(t);
        }
    }
    Ok(out)
}

pub fn load_fasta(path: impl AsRef<Path>) -> Result<Vec<FastaRecord>, FormatError> {
    read_fasta(open(path.as_ref())?)
}

/// Truth sidecar contents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthFile {
    pub channel_id: u32,
    pub bases: String,
    pub states: Vec<u32>,
}

pub fn write_truth<W: Write>(mut w: W, channel_id: u32, truth: &GroundTruth) -> io::Result<()> {
    writeln!(w, "{TRUTH_MAGIC}")?;
    writeln!(w, "channel {channel_id}")?;
    writeln!(w, "bases {}", truth.bases)?;
    for (i, s) in truth.true_states.iter().enumerate() {
        writeln!(w, "{i}\t{s}")?;
    }
    Ok(())
}

pub fn read_truth<R: BufRead>(r: R) -> Result<TruthFile, FormatError> {
    let mut lines = r.lines().enumerate();
    let mut next = |what: &str| -> Result<(usize, String), FormatError> {
        match lines.next() {
            Some((i, l)) => Ok((i + 1, l?)),
            None => Err(FormatError::parse(0, format!("missing {what}"))),
        }
    };
    let (n, magic) = next("header")?;
    if magic.trim() != TRUTH_MAGIC {
        return Err(FormatError::parse(n, format!("expected '{TRUTH_MAGIC}'")));
    }
    let (n, ch) = next("channel line")?;
    let channel_id = ch
        .strip_prefix("channel ")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| FormatError::parse(n, "expected 'channel <id>'"))?;
    let (n, b) = next("bases line")?;
    let bases = b
        .strip_prefix("bases ")
        .map(|v| v.trim().to_string())
        .filter(|v| v.bytes().all(|c| b"ACGT".contains(&c)))
        .ok_or_else(|| FormatError::parse(n, "expected 'bases <ACGT...>'"))?;
    let mut states = Vec::new();
    while let Ok((n, line)) = next("") {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let mut parts = t.split('\t');
        let (idx, state) = (parts.next(), parts.next());
        match (idx.and_then(|v| v.parse::<usize>().ok()), state.and_then(|v| v.parse::<u32>().ok())) {
            (Some(i), Some(s)) if i == states.len() => states.push(s),
            (Some(i), Some(_)) => return Err(FormatError::parse(n, format!("expected event index {}, got {i}", states.len()))),
            _ => return Err(FormatError::parse(n, "expected '<event_index>\\t<state_index>'")),
        }
    }
    Ok(TruthFile {
        channel_id,
        bases,
        states,
    })
}

pub fn load_truth(path: impl AsRef<Path>) -> Result<TruthFile, FormatError> {
    read_truth(open(path.as_ref())?)
}

pub fn save_truth(path: impl AsRef<Path>, channel_id: u32, truth: &GroundTruth) -> Result<(), FormatError> {
    let mut w = create(path.as_ref())?;
    write_truth(&mut w, channel_id, truth)?;
    w.flush()?;
    Ok(())
}

/// `event_index\tstate_index\tkmer` rows.
pub fn write_states_tsv<W: Write>(mut w: W, path: &StatePath, k: usize) -> io::Result<()> {
    for (i, &s) in path.states.iter().enumerate() {
        writeln!(w, "{i}\t{s}\t{}", decode_kmer(s, k))?;
    }
    Ok(())
}

/// State column of a state TSV; `#` lines separate channels and are skipped.
pub fn read_states_tsv<R: BufRead>(r: R) -> Result<Vec<u32>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let state = t
            .split('\t')
            .nth(1)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| FormatError::parse(i + 1, "expected '<event_index>\\t<state_index>\\t<kmer>'"))?;
        out.push(state);
    }
    Ok(out)
}

pub fn load_states_tsv(path: impl AsRef<Path>) -> Result<Vec<u32>, FormatError> {
    read_states_tsv(open(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transitions::TransitionClass;

    #[test]
    fn text_events_skip_comments() {
        let ev = read_events_text("# header\n1.5\n\n  -2\n# x\n3e2\n".as_bytes()).unwrap();
        assert_eq!(ev, vec![1.5, -2.0, 300.0]);
        let err = read_events_text("1\nabc\n".as_bytes()).unwrap_err();
        assert!(matches!(err, FormatError::Parse { line: 2, .. }));
        assert!(read_events_text("NaN\n".as_bytes()).is_err());
    }

    #[test]
    fn text_events_round_trip_exactly() {
        let ev = vec![0.1, 100.0 + 1.0 / 3.0, -7.25e-9];
        let mut buf = Vec::new();
        write_events_text(&mut buf, &ev).unwrap();
        assert_eq!(read_events_text(&buf[..]).unwrap(), ev);
    }

    #[test]
    fn binary_events_layout_and_round_trip() {
        let ev = vec![100.0, 101.5, 99.25];
        let mut buf = Vec::new();
        write_events_binary(&mut buf, 7, &ev).unwrap();
        assert_eq!(buf.len(), 17 + 12);
        assert_eq!(&buf[..5], b"PPEV\x01");
        assert_eq!(&buf[5..9], &7u32.to_le_bytes());
        assert_eq!(&buf[9..17], &3u64.to_le_bytes());
        let f = read_events_binary(&buf[..]).unwrap();
        assert_eq!(f, EventFile { channel_id: 7, events: ev });
        assert!(read_events_binary(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[4] = 2;
        assert!(read_events_binary(&bad[..]).is_err());
        buf.push(0);
        assert!(read_events_binary(&buf[..]).is_err());
    }

    #[test]
    fn fasta_wraps_and_parses() {
        let read = Read {
            bases: "A".repeat(170),
            channel_id: 3,
            chunk_span: (0, 200),
            junction_breaks: vec![],
        };
        let mut buf = Vec::new();
        write_fasta(&mut buf, &[read.clone()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], ">ch3:0-200");
        assert_eq!(lines.iter().skip(1).map(|l| l.len()).collect::<Vec<_>>(), vec![80, 80, 10]);
        let recs = read_fasta(text.as_bytes()).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].seq, read.bases);
        assert_eq!(recs[0].channel_id(), Some(3));
        assert!(read_fasta("ACGT\n".as_bytes()).is_err());
    }

    #[test]
    fn truth_round_trip() {
        let truth = GroundTruth {
            bases: "ACGT".into(),
            true_states: vec![6, 6, 27],
            events: vec![1.0, 1.0, 2.0],
            moves: vec![TransitionClass::Stay, TransitionClass::Step],
        };
        let mut buf = Vec::new();
        write_truth(&mut buf, 4, &truth).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "POREPATH-TRUTH v1\nchannel 4\nbases ACGT\n0\t6\n1\t6\n2\t27\n"
        );
        let t = read_truth(&buf[..]).unwrap();
        assert_eq!(t, TruthFile { channel_id: 4, bases: "ACGT".into(), states: vec![6, 6, 27] });
        assert!(read_truth("POREPATH-TRUTH v1\nchannel 4\nbases ACGT\n1\t6\n".as_bytes()).is_err());
        assert!(read_truth("nope\n".as_bytes()).is_err());
    }

    #[test]
    fn states_tsv_round_trip() {
        let mut buf = Vec::new();
        write_states_tsv(&mut buf, &StatePath::from_states(vec![6, 27]), 3).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "0\t6\tACG\n1\t27\tCGT\n");
        assert_eq!(read_states_tsv(&buf[..]).unwrap(), vec![6, 27]);
    }
}
