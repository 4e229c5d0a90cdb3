//! Disk-backed block storage of the state vector.
//!
//! File layout (all integers little-endian):
//!
//! | bytes   | field                                   |
//! |---------|-----------------------------------------|
//! | 0..4    | magic `QVSV`                            |
//! | 4..8    | version, `u32` = 1                      |
//! | 8..12   | qubit count, `u32`                      |
//! | 12..20  | amplitudes per block, `u64`             |
//! | 20..32  | reserved, zero                          |
//! | 32..    | amplitudes in index order, `f64` re, im |
//!
//! Amplitude `i` lives in block `i / block_amps` at offset `i % block_amps`.
//! Reads and writes go through positional I/O on a shared handle, so
//! different threads may touch disjoint blocks concurrently.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::metrics::{IoCounters, IoSnapshot};
use crate::model::{ComplexAmp, AMP_BYTES};

pub const MAGIC: [u8; 4] = *b"QVSV";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_BYTES: u64 = 32;
/// 1 MiB blocks.
pub const DEFAULT_BLOCK_AMPS: u64 = 1 << 16;
pub const MAX_QUBITS: usize = 58;

/// `2^n × 16`: bytes needed for the amplitudes of `n` qubits.
pub fn total_bytes(n: usize) -> Result<u64> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::QubitCountOutOfRange(n));
    }
    Ok((1u64 << n) * AMP_BYTES)
}

/// Number of blocks `2^n / block_amps`.
pub fn block_layout(n: usize, block_amps: u64) -> Result<u64> {
    let total = total_bytes(n)?;
    let dim = 1u64 << n;
    if !block_amps.is_power_of_two() || block_amps > dim {
        return Err(Error::InvalidBlockSize {
            n_qubits: n,
            block_amps,
        });
    }
    Ok(total / (block_amps * AMP_BYTES))
}

/// Default block size capped at the state size.
pub fn default_block_amps(n: usize) -> u64 {
    DEFAULT_BLOCK_AMPS.min(1u64 << n.min(63))
}

/// Human-readable data size in binary units: `1M`, `256M`, `1G`.
pub fn format_size(bytes: u64) -> String {
    const UNITS: [&str; 5] = ["", "K", "M", "G", "T"];
    let mut value = bytes;
    let mut unit = 0;
    while value >= 1024 && value.is_multiple_of(1024) && unit < UNITS.len() - 1 {
        value /= 1024;
        unit += 1;
    }
    format!("{value}{}", UNITS[unit])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StoreHeader {
    pub n_qubits: u32,
    pub block_amps: u64,
}

impl StoreHeader {
    pub fn new(n_qubits: usize, block_amps: u64) -> Result<Self> {
        block_layout(n_qubits, block_amps)?;
        Ok(Self {
            n_qubits: n_qubits as u32,
            block_amps,
        })
    }

    pub fn encode(&self) -> [u8; HEADER_BYTES as usize] {
        let mut out = [0u8; HEADER_BYTES as usize];
        out[0..4].copy_from_slice(&MAGIC);
        out[4..8].copy_from_slice(&FORMAT_VERSION.to_le_bytes());
        out[8..12].copy_from_slice(&self.n_qubits.to_le_bytes());
        out[12..20].copy_from_slice(&self.block_amps.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8; HEADER_BYTES as usize]) -> Result<Self> {
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(Error::BadMagic(magic));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::VersionMismatch(version));
        }
        if bytes[20..].iter().any(|&b| b != 0) {
            return Err(Error::BadHeader("reserved bytes are not zero".into()));
        }
        let n_qubits = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        let block_amps = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
        Self::new(n_qubits as usize, block_amps)
    }

    /// Expected file length: header plus `2^n × 16`.
    pub fn file_len(&self) -> u64 {
        HEADER_BYTES + (1u64 << self.n_qubits) * AMP_BYTES
    }
}

/// One block's worth of amplitudes held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockBuffer {
    pub block_id: usize,
    pub amps: Vec<ComplexAmp>,
    pub dirty: bool,
}

impl BlockBuffer {
    pub fn new(block_id: usize, amps: Vec<ComplexAmp>) -> Self {
        Self {
            block_id,
            amps,
            dirty: false,
        }
    }

    pub fn bytes(&self) -> u64 {
        self.amps.len() as u64 * AMP_BYTES
    }
}

#[derive(Debug)]
pub struct BlockStore {
    path: PathBuf,
    file: File,
    header: StoreHeader,
    n_blocks: usize,
    io: IoCounters,
}

impl BlockStore {
    /// Creates a store initialised to `|0…0⟩`.
    pub fn create(
        path: impl AsRef<Path>,
        n_qubits: usize,
        block_amps: u64,
        overwrite: bool,
    ) -> Result<Self> {
        let path = path.as_ref();
        let header = StoreHeader::new(n_qubits, block_amps)?;
        let mut opts = OpenOptions::new();
        opts.read(true).write(true);
        if overwrite {
            opts.create(true).truncate(true);
        } else {
            opts.create_new(true);
        }
        let mut file = opts.open(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::AlreadyExists => Error::AlreadyExists(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        file.write_all(&header.encode())?;
        file.set_len(header.file_len())?;
        let one = Complex64::new(1.0, 0.0);
        file.write_all_at(&encode_amp(one), HEADER_BYTES)?;
        Self::from_parts(path, file, header)
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = OpenOptions::new().read(true).write(true).open(path)?;
        let mut raw = [0u8; HEADER_BYTES as usize];
        let found = file.metadata()?.len();
        if found < HEADER_BYTES {
            return Err(Error::LengthMismatch {
                expected: HEADER_BYTES,
                found,
            });
        }
        file.read_exact_at(&mut raw, 0)?;
        let header = StoreHeader::decode(&raw)?;
        if found != header.file_len() {
            return Err(Error::LengthMismatch {
                expected: header.file_len(),
                found,
            });
        }
        Self::from_parts(path, file, header)
    }

    /// Opens `path` if it exists with matching size, otherwise creates it.
    pub fn open_or_create(
        path: impl AsRef<Path>,
        n_qubits: usize,
        block_amps: u64,
    ) -> Result<Self> {
        let path = path.as_ref();
        if path.exists() {
            let store = Self::open(path)?;
            if store.n_qubits() != n_qubits {
                return Err(Error::Config(format!(
                    "{} holds {} qubits, circuit needs {n_qubits}",
                    path.display(),
                    store.n_qubits()
                )));
            }
            Ok(store)
        } else {
            Self::create(path, n_qubits, block_amps, false)
        }
    }

    fn from_parts(path: &Path, file: File, header: StoreHeader) -> Result<Self> {
        let n_blocks = block_layout(header.n_qubits as usize, header.block_amps)? as usize;
        Ok(Self {
            path: path.to_path_buf(),
            file,
            header,
            n_blocks,
            io: IoCounters::default(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn header(&self) -> StoreHeader {
        self.header
    }

    pub fn n_qubits(&self) -> usize {
        self.header.n_qubits as usize
    }

    pub fn dim(&self) -> u64 {
        1u64 << self.header.n_qubits
    }

    pub fn block_amps(&self) -> usize {
        self.header.block_amps as usize
    }

    pub fn block_bytes(&self) -> u64 {
        self.header.block_amps * AMP_BYTES
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    pub fn io(&self) -> IoSnapshot {
        self.io.snapshot()
    }

    fn block_offset(&self, b: usize) -> Result<u64> {
        if b >= self.n_blocks {
            return Err(Error::BlockOutOfRange {
                block: b,
                n_blocks: self.n_blocks,
            });
        }
        Ok(HEADER_BYTES + b as u64 * self.block_bytes())
    }

    pub fn read_block(&self, b: usize) -> Result<BlockBuffer> {
        let mut buf = BlockBuffer::new(b, Vec::new());
        self.read_block_into(b, &mut buf)?;
        Ok(buf)
    }

    /// Reads block `b` into `buf`, reusing its allocation.
    pub fn read_block_into(&self, b: usize, buf: &mut BlockBuffer) -> Result<()> {
        let offset = self.block_offset(b)?;
        buf.amps.resize(self.block_amps(), Complex64::new(0.0, 0.0));
        self.file
            .read_exact_at(bytemuck::cast_slice_mut(&mut buf.amps), offset)?;
        from_le_in_place(&mut buf.amps);
        buf.block_id = b;
        buf.dirty = false;
        self.io.add_read(self.block_bytes());
        Ok(())
    }

    pub fn write_block(&self, buf: &BlockBuffer) -> Result<()> {
        let offset = self.block_offset(buf.block_id)?;
        if buf.amps.len() != self.block_amps() {
            return Err(Error::BufferLength {
                expected: self.block_amps(),
                got: buf.amps.len(),
            });
        }
        if !buf.amps.iter().all(|a| a.is_finite()) {
            return Err(Error::NonFinite("block amplitudes"));
        }
        write_amps_at(&self.file, &buf.amps, offset)?;
        self.io.add_write(self.block_bytes());
        Ok(())
    }

    /// Reads the block holding amplitude `i` and returns that amplitude.
    pub fn read_amplitude(&self, i: u64) -> Result<ComplexAmp> {
        if i >= self.dim() {
            return Err(Error::IndexOutOfRange {
                index: i,
                n_qubits: self.n_qubits(),
            });
        }
        let ba = self.header.block_amps;
        let block = self.read_block((i / ba) as usize)?;
        Ok(block.amps[(i % ba) as usize])
    }

    /// `√Σ|α_i|²`, streaming each block once.
    pub fn norm(&self) -> Result<f64> {
        let mut buf = BlockBuffer::new(0, Vec::with_capacity(self.block_amps()));
        let mut acc = 0.0;
        for b in 0..self.n_blocks {
            self.read_block_into(b, &mut buf)?;
            acc += buf.amps.iter().map(|a| a.norm_sqr()).sum::<f64>();
        }
        Ok(acc.sqrt())
    }

    /// Whole state vector in memory. Only sensible for small states.
    pub fn load_all(&self) -> Result<Vec<ComplexAmp>> {
        let mut out = Vec::with_capacity(self.dim() as usize);
        let mut buf = BlockBuffer::new(0, Vec::with_capacity(self.block_amps()));
        for b in 0..self.n_blocks {
            self.read_block_into(b, &mut buf)?;
            out.extend_from_slice(&buf.amps);
        }
        Ok(out)
    }

    /// Overwrites the whole state, block by block.
    pub fn store_all(&self, amps: &[ComplexAmp]) -> Result<()> {
        if amps.len() as u64 != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim() as usize,
                got: amps.len(),
            });
        }
        for (b, chunk) in amps.chunks_exact(self.block_amps()).enumerate() {
            self.write_block(&BlockBuffer::new(b, chunk.to_vec()))?;
        }
        Ok(())
    }

    /// The `k` largest-magnitude amplitudes, ties broken by lower index.
    pub fn top_amplitudes(&self, k: usize) -> Result<Vec<(u64, ComplexAmp)>> {
        let mut top: Vec<(u64, ComplexAmp)> = Vec::with_capacity(k + 1);
        let mut buf = BlockBuffer::new(0, Vec::with_capacity(self.block_amps()));
        let ba = self.block_amps() as u64;
        let better = |a: &(u64, ComplexAmp), b: &(u64, ComplexAmp)| {
            b.1.norm_sqr()
                .total_cmp(&a.1.norm_sqr())
                .then(a.0.cmp(&b.0))
        };
        for b in 0..self.n_blocks {
            self.read_block_into(b, &mut buf)?;
            for (j, &amp) in buf.amps.iter().enumerate() {
                if k == 0 {
                    break;
                }
                let cand = (b as u64 * ba + j as u64, amp);
                if top.len() == k && better(&cand, top.last().unwrap()).is_ge() {
                    continue;
                }
                let pos = top.partition_point(|e| better(e, &cand).is_lt());
                top.insert(pos, cand);
                top.truncate(k);
            }
        }
        Ok(top)
    }

    pub fn sync(&self) -> Result<()> {
        self.file.sync_data()?;
        Ok(())
    }
}

fn encode_amp(a: ComplexAmp) -> [u8; 16] {
    let mut out = [0u8; 16];
    out[..8].copy_from_slice(&a.re.to_le_bytes());
    out[8..].copy_from_slice(&a.im.to_le_bytes());
    out
}

#[cfg(target_endian = "little")]
fn from_le_in_place(_amps: &mut [ComplexAmp]) {}

#[cfg(target_endian = "big")]
fn from_le_in_place(amps: &mut [ComplexAmp]) {
    for a in amps {
        a.re = f64::from_bits(a.re.to_bits().swap_bytes());
        a.im = f64::from_bits(a.im.to_bits().swap_bytes());
    }
}

#[cfg(target_endian = "little")]
fn write_amps_at(file: &File, amps: &[ComplexAmp], offset: u64) -> std::io::Result<()> {
    file.write_all_at(bytemuck::cast_slice(amps), offset)
}

#[cfg(target_endian = "big")]
fn write_amps_at(file: &File, amps: &[ComplexAmp], offset: u64) -> std::io::Result<()> {
    let bytes: Vec<u8> = amps.iter().flat_map(|&a| encode_amp(a)).collect();
    file.write_all_at(&bytes, offset)
}
