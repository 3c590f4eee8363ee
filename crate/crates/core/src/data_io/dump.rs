use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::bilm::ContextVectors;
use crate::error::{Error, Result};
use crate::tensor::NDArray;

const MAGIC: &[u8; 4] = b"BLMV";
pub const DUMP_VERSION: u16 = 1;

/// Header fields of a vector dump.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DumpHeader {
    /// `L + 1`
    pub layers: usize,
    /// `2d`
    pub dim: usize,
    pub count: usize,
}

impl DumpHeader {
    pub const BYTES: usize = 4 + 2 + 3 * 4;
}

struct Crc<W> {
    inner: W,
    hasher: crc32fast::Hasher,
}

impl<W: Write> Write for Crc<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

impl<R: Read> Read for Crc<R> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }
}

fn u32_of(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Format(format!("{what} {n} exceeds u32")))
}

/// Writes records one at a time; the record count is fixed up front.
pub struct VectorDumpWriter<W: Write> {
    out: Crc<W>,
    header: DumpHeader,
    written: usize,
}

impl VectorDumpWriter<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>, header: DumpHeader) -> Result<Self> {
        VectorDumpWriter::new(BufWriter::new(File::create(path)?), header)
    }
}

impl<W: Write> VectorDumpWriter<W> {
    pub fn new(inner: W, header: DumpHeader) -> Result<Self> {
        let mut out = Crc {
            inner,
            hasher: crc32fast::Hasher::new(),
        };
        out.write_all(MAGIC)?;
        out.write_all(&DUMP_VERSION.to_le_bytes())?;
        for n in [header.layers, header.dim, header.count] {
            out.write_all(&u32_of(n, "header field")?.to_le_bytes())?;
        }
        Ok(VectorDumpWriter {
            out,
            header,
            written: 0,
        })
    }

    pub fn write(&mut self, record: &ContextVectors) -> Result<()> {
        if self.written == self.header.count {
            return Err(Error::Format(format!(
                "header declares {} records",
                self.header.count
            )));
        }
        if record.num_layers() != self.header.layers || record.dim() != self.header.dim {
            return Err(Error::Format(format!(
                "record has {} layers of dim {}, header says {} of dim {}",
                record.num_layers(),
                record.dim(),
                self.header.layers,
                self.header.dim
            )));
        }
        let mut body = Vec::new();
        body.extend_from_slice(&u32_of(record.len(), "token count")?.to_le_bytes());
        for t in record.tokens() {
            body.extend_from_slice(&u32_of(t.len(), "token length")?.to_le_bytes());
            body.extend_from_slice(t.as_bytes());
        }
        for layer in record.layers() {
            for &v in layer.data() {
                body.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        self.out.write_all(&u32_of(body.len(), "record length")?.to_le_bytes())?;
        self.out.write_all(&body)?;
        self.written += 1;
        Ok(())
    }

    /// Appends the checksum trailer and returns the underlying writer.
    pub fn finish(mut self) -> Result<W> {
        if self.written != self.header.count {
            return Err(Error::Format(format!(
                "wrote {} records, header declares {}",
                self.written, self.header.count
            )));
        }
        let crc = self.out.hasher.clone().finalize();
        self.out.inner.write_all(&crc.to_le_bytes())?;
        self.out.inner.flush()?;
        Ok(self.out.inner)
    }
}

/// Writes `records`, taking layer count and dim from the first record
/// (or `empty_shape` when there are none).
pub fn write_vector_dump(
    path: impl AsRef<Path>,
    records: &[ContextVectors],
    empty_shape: (usize, usize),
) -> Result<()> {
    let (layers, dim) = records
        .first()
        .map_or(empty_shape, |r| (r.num_layers(), r.dim()));
    let mut w = VectorDumpWriter::create(
        path,
        DumpHeader {
            layers,
            dim,
            count: records.len(),
        },
    )?;
    for r in records {
        w.write(r)?;
    }
    w.finish()?;
    Ok(())
}

/// Streams records; the checksum is verified after the last record, so a
/// corrupted file yields an error as the final item.
pub struct VectorDumpReader<R: Read> {
    input: Crc<R>,
    header: DumpHeader,
    read: usize,
    done: bool,
}

impl VectorDumpReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        VectorDumpReader::new(BufReader::new(File::open(path)?))
    }
}

fn truncated(e: io::Error) -> Error {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        Error::Format("vector dump is truncated".into())
    } else {
        Error::Io(e)
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

impl<R: Read> VectorDumpReader<R> {
    pub fn new(inner: R) -> Result<Self> {
        let mut input = Crc {
            inner,
            hasher: crc32fast::Hasher::new(),
        };
        let mut head = [0u8; 6];
        input.read_exact(&mut head).map_err(truncated)?;
        if &head[..4] != MAGIC {
            return Err(Error::Format("bad magic bytes, expected \"BLMV\"".into()));
        }
        let found = u16::from_le_bytes([head[4], head[5]]);
        if found != DUMP_VERSION {
            return Err(Error::Version {
                found,
                expected: DUMP_VERSION,
            });
        }
        let layers = read_u32(&mut input)? as usize;
        let dim = read_u32(&mut input)? as usize;
        let count = read_u32(&mut input)? as usize;
        Ok(VectorDumpReader {
            input,
            header: DumpHeader { layers, dim, count },
            read: 0,
            done: false,
        })
    }

    pub fn header(&self) -> DumpHeader {
        self.header
    }

    fn next_record(&mut self) -> Result<ContextVectors> {
        let len = read_u32(&mut self.input)? as usize;
        let mut body = Vec::new();
        (&mut self.input).take(len as u64).read_to_end(&mut body)?;
        if body.len() != len {
            return Err(Error::Format("vector dump is truncated".into()));
        }
        let mut r = body.as_slice();
        let n = read_u32(&mut r)? as usize;
        let mut tokens = Vec::with_capacity(n.min(len));
        for _ in 0..n {
            let tl = read_u32(&mut r)? as usize;
            if tl > r.len() {
                return Err(Error::Format(format!("record {}: token overruns record", self.read)));
            }
            let (t, rest) = r.split_at(tl);
            tokens.push(
                String::from_utf8(t.to_vec())
                    .map_err(|_| Error::Format(format!("record {}: token is not UTF-8", self.read)))?,
            );
            r = rest;
        }
        let per_layer = n * self.header.dim;
        if r.len() != 4 * per_layer * self.header.layers {
            return Err(Error::Format(format!(
                "record {}: payload of {} bytes inconsistent with header",
                self.read,
                r.len()
            )));
        }
        let values: Vec<f64> = r
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        let layers = values
            .chunks(per_layer.max(1))
            .take(self.header.layers)
            .map(|c| NDArray::new(vec![n, self.header.dim], c.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        ContextVectors::new(tokens, layers)
    }

    fn verify_trailer(&mut self) -> Result<()> {
        let computed = self.input.hasher.clone().finalize();
        let mut b = [0u8; 4];
        self.input.inner.read_exact(&mut b).map_err(truncated)?;
        let stored = u32::from_le_bytes(b);
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }
        let mut extra = [0u8; 1];
        if self.input.inner.read(&mut extra)? != 0 {
            return Err(Error::Format("trailing bytes after checksum".into()));
        }
        Ok(())
    }
}

impl<R: Read> Iterator for VectorDumpReader<R> {
    type Item = Result<ContextVectors>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = if self.read < self.header.count {
            self.read += 1;
            self.next_record()
        } else {
            self.done = true;
            return self.verify_trailer().err().map(Err);
        };
        if item.is_err() {
            self.done = true;
        }
        Some(item)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorDump {
    pub header: DumpHeader,
    pub records: Vec<ContextVectors>,
}

/// Reads a whole dump, checking the trailer before decoding any record.
pub fn read_vector_dump(path: impl AsRef<Path>) -> Result<VectorDump> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < DumpHeader::BYTES + 4 {
        return Err(Error::Format("vector dump is truncated".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    let reader = VectorDumpReader::new(bytes.as_slice())?;
    let header = reader.header();
    let records = reader.collect::<Result<Vec<_>>>()?;
    Ok(VectorDump { header, records })
}
