//! Binary map format, little-endian throughout:
//!
//! ```text
//! u32 version | f64 voxel_size | u32 dim | u64 entry_count
//! entry_count x ( 3 x i64 index | dim x f32 vector | f32 mass )
//! [ u64 geometry_count | geometry_count x 3 x i64 index ]   (optional)
//! ```
//!
//! The trailing geometry section may be absent; readers treat end-of-file
//! after the entries as an empty geometry layer.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{MemoryError, VoxelIndex, VoxelMap};

pub const MAP_FORMAT_VERSION: u32 = 1;

impl VoxelMap {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), MemoryError> {
        let f = self.finalized()?;
        w.write_all(&MAP_FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&self.voxel_size.to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(f.indices.len() as u64).to_le_bytes())?;
        for (idx, v, mass) in self.entries() {
            write_index(&mut w, &idx)?;
            for x in v {
                w.write_all(&x.to_le_bytes())?;
            }
            w.write_all(&mass.to_le_bytes())?;
        }
        w.write_all(&(f.geometry.len() as u64).to_le_bytes())?;
        for idx in &f.geometry {
            write_index(&mut w, idx)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, MemoryError> {
        let version = u32::from_le_bytes(read_array(&mut r)?);
        if version != MAP_FORMAT_VERSION {
            return Err(MemoryError::Format(format!("unsupported version {version}")));
        }
        let voxel_size = f64::from_le_bytes(read_array(&mut r)?);
        let dim = u32::from_le_bytes(read_array(&mut r)?) as usize;
        let count = u64::from_le_bytes(read_array(&mut r)?);
        let mut entries = Vec::new();
        for _ in 0..count {
            let idx = read_index(&mut r)?;
            let v = (0..dim).map(|_| read_array(&mut r).map(f32::from_le_bytes)).collect::<Result<Vec<_>, _>>()?;
            let mass = f32::from_le_bytes(read_array(&mut r)?);
            entries.push((idx, v, mass));
        }
        let mut geometry = Vec::new();
        let mut head = [0u8; 8];
        match r.read_exact(&mut head) {
            Ok(()) => {
                let n = u64::from_le_bytes(head);
                for _ in 0..n {
                    geometry.push(read_index(&mut r)?);
                }
            }
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => {}
            Err(e) => return Err(e.into()),
        }
        Self::from_entries(voxel_size, dim, entries, geometry)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, MemoryError> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(buf)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), MemoryError> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MemoryError> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

fn write_index<W: Write>(w: &mut W, idx: &VoxelIndex) -> io::Result<()> {
    for c in idx.0 {
        w.write_all(&c.to_le_bytes())?;
    }
    Ok(())
}

fn read_index<R: Read>(r: &mut R) -> Result<VoxelIndex, MemoryError> {
    let mut out = [0i64; 3];
    for c in &mut out {
        *c = i64::from_le_bytes(read_array(r)?);
    }
    Ok(VoxelIndex(out))
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N], MemoryError> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => MemoryError::Format("truncated map".into()),
        _ => e.into(),
    })?;
    Ok(buf)
}
