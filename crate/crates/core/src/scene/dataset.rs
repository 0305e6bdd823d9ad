//! Dataset persistence.
//!
//! Binary layout (little-endian), one file per split:
//!
//! ```text
//! magic    4 bytes  "MCDS"
//! version  u16      1
//! kind     u8       0 = Nyquist frames (f64 pairs), 1 = coset records (f32 pairs)
//! reserved u8
//! L        u32
//! N        u32      samples per coset stream (frame length = N·L)
//! P        u32      coset count (0 for kind 0)
//! count    u64      number of frame records
//! rate     f64      Nyquist rate in Hz
//! offsets  P × u16  coset offsets (kind 1 only)
//! records  count × (N·L·16)       kind 0
//!          count × (P·N·8)        kind 1
//! ```
//!
//! Per-frame metadata lives in a JSON-lines sidecar at `<path>.meta.jsonl`
//! (one record per frame, same order). Sample payloads are bit-exact on
//! round trip.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coset::{CosetPattern, CosetSampleSet};
use crate::dsp::ComplexSignal;

use super::{EmissionMeta, MultibandFrame, SceneError};

const MAGIC: &[u8; 4] = b"MCDS";
const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayloadKind {
    NyquistF64,
    CosetF32,
}

impl PayloadKind {
    fn code(self) -> u8 {
        match self {
            PayloadKind::NyquistF64 => 0,
            PayloadKind::CosetF32 => 1,
        }
    }

    fn from_code(c: u8) -> Result<Self, SceneError> {
        match c {
            0 => Ok(PayloadKind::NyquistF64),
            1 => Ok(PayloadKind::CosetF32),
            other => Err(SceneError::Corrupt(format!("unknown payload kind {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetHeader {
    pub kind: PayloadKind,
    pub l: usize,
    pub n: usize,
    pub p: usize,
    pub count: u64,
    pub nyquist_rate_hz: f64,
    pub offsets: Vec<usize>,
}

impl DatasetHeader {
    pub fn record_bytes(&self) -> u64 {
        match self.kind {
            PayloadKind::NyquistF64 => (self.n * self.l * 16) as u64,
            PayloadKind::CosetF32 => (self.p * self.n * 8) as u64,
        }
    }

    pub fn header_bytes(&self) -> u64 {
        (4 + 2 + 1 + 1 + 4 + 4 + 4 + 8 + 8 + 2 * self.offsets.len()) as u64
    }

    pub fn expected_file_bytes(&self) -> u64 {
        self.header_bytes() + self.count * self.record_bytes()
    }

    pub fn pattern(&self) -> Option<CosetPattern> {
        if self.kind == PayloadKind::CosetF32 {
            CosetPattern::new(self.l, self.offsets.clone()).ok()
        } else {
            None
        }
    }
}

/// Frame metadata record (sidecar line).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMeta {
    pub index: u64,
    pub seed: u64,
    pub snr_db: Option<f64>,
    pub occupancy: Vec<usize>,
    pub emissions: Vec<EmissionMeta>,
}

fn meta_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".meta.jsonl");
    PathBuf::from(p)
}

pub struct DatasetWriter {
    file: BufWriter<File>,
    meta: BufWriter<File>,
    header: DatasetHeader,
    path: PathBuf,
}

impl DatasetWriter {
    pub fn create(
        path: &Path,
        kind: PayloadKind,
        l: usize,
        n: usize,
        pattern: Option<&CosetPattern>,
        nyquist_rate_hz: f64,
    ) -> Result<Self, SceneError> {
        let offsets = pattern.map(|p| p.offsets.clone()).unwrap_or_default();
        let header = DatasetHeader {
            kind,
            l,
            n,
            p: offsets.len(),
            count: 0,
            nyquist_rate_hz,
            offsets,
        };
        let mut file = BufWriter::new(File::create(path)?);
        write_header(&mut file, &header)?;
        let meta = BufWriter::new(File::create(meta_path(path))?);
        Ok(Self { file, meta, header, path: path.to_path_buf() })
    }

    pub fn append_frame(&mut self, frame: &MultibandFrame) -> Result<(), SceneError> {
        assert_eq!(self.header.kind, PayloadKind::NyquistF64);
        assert_eq!(frame.nyquist.len(), self.header.n * self.header.l);
        let mut buf = Vec::with_capacity(frame.nyquist.len() * 16);
        for s in &frame.nyquist.samples {
            buf.extend_from_slice(&s.re.to_le_bytes());
            buf.extend_from_slice(&s.im.to_le_bytes());
        }
        self.file.write_all(&buf)?;
        self.write_meta(&frame.meta(self.header.count))?;
        self.header.count += 1;
        Ok(())
    }

    pub fn append_coset_record(
        &mut self,
        samples: &CosetSampleSet,
        meta: &FrameMeta,
    ) -> Result<(), SceneError> {
        assert_eq!(self.header.kind, PayloadKind::CosetF32);
        assert_eq!(samples.n(), self.header.n);
        assert_eq!(samples.pattern.offsets, self.header.offsets);
        let mut buf = Vec::with_capacity(self.header.p * self.header.n * 8);
        for stream in &samples.y {
            for s in stream {
                buf.extend_from_slice(&(s.re as f32).to_le_bytes());
                buf.extend_from_slice(&(s.im as f32).to_le_bytes());
            }
        }
        self.file.write_all(&buf)?;
        self.write_meta(meta)?;
        self.header.count += 1;
        Ok(())
    }

    fn write_meta(&mut self, meta: &FrameMeta) -> Result<(), SceneError> {
        let line = serde_json::to_string(meta).map_err(|e| SceneError::Serde(e.to_string()))?;
        self.meta.write_all(line.as_bytes())?;
        self.meta.write_all(b"\n")?;
        Ok(())
    }

    /// Flush buffers and rewrite the header with the final record count.
    pub fn finish(mut self) -> Result<DatasetHeader, SceneError> {
        self.file.flush()?;
        self.meta.flush()?;
        drop(self.file);
        drop(self.meta);
        let mut f = File::options().write(true).open(&self.path)?;
        write_header(&mut f, &self.header)?;
        Ok(self.header)
    }
}

fn write_header(w: &mut impl Write, h: &DatasetHeader) -> Result<(), SceneError> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[h.kind.code(), 0u8])?;
    w.write_all(&(h.l as u32).to_le_bytes())?;
    w.write_all(&(h.n as u32).to_le_bytes())?;
    w.write_all(&(h.p as u32).to_le_bytes())?;
    w.write_all(&h.count.to_le_bytes())?;
    w.write_all(&h.nyquist_rate_hz.to_le_bytes())?;
    for &c in &h.offsets {
        w.write_all(&(c as u16).to_le_bytes())?;
    }
    Ok(())
}

/// Convenience one-shot writer for a list of frames.
pub fn write_frames(path: &Path, frames: &[MultibandFrame]) -> Result<DatasetHeader, SceneError> {
    if frames.is_empty() {
        return Err(SceneError::InvalidSpec("refusing to write an empty dataset".into()));
    }
    let l0 = frames[0].occupancy.len();
    let n0 = frames[0].nyquist.len() / l0;
    let mut w = DatasetWriter::create(
        path,
        PayloadKind::NyquistF64,
        l0,
        n0,
        None,
        frames[0].nyquist.rate_hz,
    )?;
    for f in frames {
        w.append_frame(f)?;
    }
    w.finish()
}

/// Streaming dataset reader; frames are fetched by index, so corpora need
/// not fit in memory and independent cursors can coexist.
pub struct DatasetReader {
    file: BufReader<File>,
    pub header: DatasetHeader,
    pub meta: Vec<FrameMeta>,
}

impl DatasetReader {
    pub fn open(path: &Path) -> Result<Self, SceneError> {
        let mut file = BufReader::new(File::open(path)?);
        let header = read_header(&mut file)?;
        let actual = file.get_ref().metadata()?.len();
        if actual != header.expected_file_bytes() {
            return Err(SceneError::Corrupt(format!(
                "file is {actual} bytes, header declares {}",
                header.expected_file_bytes()
            )));
        }
        let meta_file = meta_path(path);
        let mut meta = Vec::new();
        if meta_file.exists() {
            let text = std::fs::read_to_string(&meta_file)?;
            for line in text.lines() {
                if line.trim().is_empty() {
                    continue;
                }
                meta.push(
                    serde_json::from_str(line).map_err(|e| SceneError::Serde(e.to_string()))?,
                );
            }
            if meta.len() as u64 != header.count {
                return Err(SceneError::Corrupt(format!(
                    "sidecar has {} records, header declares {}",
                    meta.len(),
                    header.count
                )));
            }
        }
        Ok(Self { file, header, meta })
    }

    pub fn len(&self) -> usize {
        self.header.count as usize
    }

    pub fn is_empty(&self) -> bool {
        self.header.count == 0
    }

    fn seek_record(&mut self, index: usize) -> Result<(), SceneError> {
        if index as u64 >= self.header.count {
            return Err(SceneError::Corrupt(format!("frame index {index} out of range")));
        }
        let pos = self.header.header_bytes() + index as u64 * self.header.record_bytes();
        self.file.seek(SeekFrom::Start(pos))?;
        Ok(())
    }

    /// Read a Nyquist-rate frame record (kind 0).
    pub fn read_frame(&mut self, index: usize) -> Result<MultibandFrame, SceneError> {
        assert_eq!(self.header.kind, PayloadKind::NyquistF64);
        self.seek_record(index)?;
        let total = self.header.n * self.header.l;
        let mut buf = vec![0u8; total * 16];
        self.file.read_exact(&mut buf)?;
        let samples: Vec<Complex64> = buf
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[0..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..16].try_into().unwrap()),
                )
            })
            .collect();
        let meta = self.meta.get(index).cloned().ok_or_else(|| {
            SceneError::Corrupt("missing metadata sidecar for frame read".into())
        })?;
        let mut occupancy = vec![false; self.header.l];
        for &l in &meta.occupancy {
            occupancy[l] = true;
        }
        Ok(MultibandFrame {
            nyquist: ComplexSignal { samples, rate_hz: self.header.nyquist_rate_hz },
            emissions: meta.emissions,
            occupancy,
            snr_db: meta.snr_db,
            seed: meta.seed,
        })
    }

    /// Read a coset record (kind 1) as interleaved (re, im) f32 per
    /// stream, the layout training consumes directly.
    pub fn read_coset_f32(&mut self, index: usize) -> Result<Vec<f32>, SceneError> {
        assert_eq!(self.header.kind, PayloadKind::CosetF32);
        self.seek_record(index)?;
        let total = self.header.p * self.header.n * 2;
        let mut buf = vec![0u8; total * 4];
        self.file.read_exact(&mut buf)?;
        Ok(buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn read_header(r: &mut impl Read) -> Result<DatasetHeader, SceneError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| SceneError::Corrupt("truncated header".into()))?;
    if &magic != MAGIC {
        return Err(SceneError::Corrupt("bad magic".into()));
    }
    let mut b2 = [0u8; 2];
    r.read_exact(&mut b2)?;
    let version = u16::from_le_bytes(b2);
    if version != VERSION {
        return Err(SceneError::Corrupt(format!("unsupported version {version}")));
    }
    let mut kb = [0u8; 2];
    r.read_exact(&mut kb)?;
    let kind = PayloadKind::from_code(kb[0])?;
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let l = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b4)?;
    let n = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b4)?;
    let p = u32::from_le_bytes(b4) as usize;
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let count = u64::from_le_bytes(b8);
    r.read_exact(&mut b8)?;
    let nyquist_rate_hz = f64::from_le_bytes(b8);
    let mut offsets = Vec::with_capacity(p);
    for _ in 0..p {
        r.read_exact(&mut b2)?;
        offsets.push(u16::from_le_bytes(b2) as usize);
    }
    Ok(DatasetHeader { kind, l, n, p, count, nyquist_rate_hz, offsets })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{compose_scene, ScenarioSpec};

    fn small_spec() -> ScenarioSpec {
        ScenarioSpec { ..Default::default() }
    }

    #[test]
    fn frame_round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("frames.mcds");
        let spec = small_spec();
        let frames: Vec<_> = (0..3).map(|s| compose_scene(&spec, s).unwrap()).collect();
        write_frames(&path, &frames).unwrap();
        let mut reader = DatasetReader::open(&path).unwrap();
        assert_eq!(reader.len(), 3);
        for (i, f) in frames.iter().enumerate() {
            let back = reader.read_frame(i).unwrap();
            assert_eq!(back.nyquist.samples, f.nyquist.samples);
            assert_eq!(back.emissions, f.emissions);
            assert_eq!(back.occupancy, f.occupancy);
        }
    }

    #[test]
    fn empty_file_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.mcds");
        std::fs::write(&path, b"").unwrap();
        assert!(matches!(DatasetReader::open(&path), Err(SceneError::Corrupt(_))));
    }

    #[test]
    fn truncated_file_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("frames.mcds");
        let spec = small_spec();
        let frames: Vec<_> = (0..2).map(|s| compose_scene(&spec, s).unwrap()).collect();
        write_frames(&path, &frames).unwrap();
        let full = std::fs::read(&path).unwrap();
        std::fs::write(&path, &full[..full.len() - 100]).unwrap();
        assert!(matches!(DatasetReader::open(&path), Err(SceneError::Corrupt(_))));
    }

    #[test]
    fn coset_record_size_arithmetic() {
        use crate::coset::CosetPattern;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cosets.mcds");
        let spec = small_spec();
        let pattern = CosetPattern::low_coherence(40, 8, &(0..16).collect::<Vec<_>>());
        let mut w = DatasetWriter::create(
            &path,
            PayloadKind::CosetF32,
            40,
            2400,
            Some(&pattern),
            2e9,
        )
        .unwrap();
        let count = 5u64;
        for s in 0..count {
            let frame = compose_scene(&spec, s).unwrap();
            let y = frame.coset_sample(&pattern).unwrap();
            w.append_coset_record(&y, &frame.meta(s)).unwrap();
        }
        let header = w.finish().unwrap();
        let size = std::fs::metadata(&path).unwrap().len();
        // Declared layout: header + offsets + count·P·N·8 bytes.
        let expected = (4 + 2 + 2 + 4 + 4 + 4 + 8 + 8 + 2 * 8) as u64 + count * 8 * 2400 * 8;
        assert_eq!(size, expected);
        assert_eq!(size, header.expected_file_bytes());
        // A 1000-frame dataset at this geometry lands at the same formula.
        let thousand = header.header_bytes() + 1000 * header.record_bytes();
        assert_eq!(thousand, header.header_bytes() + 1000 * 8 * 2400 * 8);

        let mut reader = DatasetReader::open(&path).unwrap();
        assert_eq!(reader.header.pattern().unwrap(), pattern);
        let rec = reader.read_coset_f32(2).unwrap();
        assert_eq!(rec.len(), 8 * 2400 * 2);
        // Spot-check against a recomputed frame.
        let frame = compose_scene(&spec, 2).unwrap();
        let y = frame.coset_sample(&pattern).unwrap();
        assert_eq!(rec[0], y.y[0][0].re as f32);
        assert_eq!(rec[1], y.y[0][0].im as f32);
    }
}
