//! Binary snapshots of grid fields with a JSON sidecar.
//!
//! Layout: five little-endian 64-bit header words (rank, channels, N as u64;
//! X, t as f64) followed by interior node values as f64, ordered by
//! component slot, channel, then x¹, x², x³ with x³ fastest.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::grid::{Grid, GridField};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub rank: u64,
    pub channels: u64,
    pub n: u64,
    pub extent: f64,
    pub t: f64,
}

fn io(e: std::io::Error) -> Error {
    Error::Io(e.to_string())
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Write `field` to `path` and its header to `path.json`.
pub fn write_snapshot<T: Real>(field: &GridField<T>, path: &Path) -> Result<()> {
    let g = field.grid();
    let header = SnapshotHeader {
        rank: field.rank() as u64,
        channels: field.channels() as u64,
        n: g.n as u64,
        extent: g.extent,
        t: field.time(),
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for v in [header.rank, header.channels, header.n] {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    for v in [header.extent, header.t] {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    for arr in field.arrays() {
        for i in g.interior() {
            for j in g.interior() {
                for k in g.interior() {
                    w.write_all(&arr[g.at(i, j, k)].to_f64_lossy().to_le_bytes()).map_err(io)?;
                }
            }
        }
    }
    w.flush().map_err(io)?;
    let json = serde_json::to_string_pretty(&header).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(sidecar(path), json).map_err(io)
}

/// Read a snapshot; ghosts are left stale.
pub fn read_snapshot(path: &Path) -> Result<GridField<f64>> {
    let mut r = BufReader::new(File::open(path).map_err(io)?);
    let mut word = [0u8; 8];
    let mut next = |r: &mut BufReader<File>| -> Result<[u8; 8]> {
        r.read_exact(&mut word).map_err(io)?;
        Ok(word)
    };
    let rank = u64::from_le_bytes(next(&mut r)?) as usize;
    let channels = u64::from_le_bytes(next(&mut r)?) as usize;
    let n = u64::from_le_bytes(next(&mut r)?) as usize;
    let extent = f64::from_le_bytes(next(&mut r)?);
    let t = f64::from_le_bytes(next(&mut r)?);
    if rank > 2 || channels == 0 {
        return Err(Error::Io("corrupt snapshot header".into()));
    }
    let g = Grid::new(n, extent)?;
    let count = 4usize.pow(rank as u32) * channels;
    let mut comps = Vec::with_capacity(count);
    for _ in 0..count {
        let mut arr = vec![0.0; g.len()];
        for i in g.interior() {
            for j in g.interior() {
                for k in g.interior() {
                    arr[g.at(i, j, k)] = f64::from_le_bytes(next(&mut r)?);
                }
            }
        }
        comps.push(arr);
    }
    GridField::from_arrays(g, rank, channels, t, comps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("phi.bin");
        let g = Grid::new(6, 1.5).unwrap();
        let f = GridField::<f64>::from_fn(g, 1, 2, 0.25, |s, c, x| s as f64 + 10.0 * c as f64 + x[2]);
        write_snapshot(&f, &path).unwrap();
        let back = read_snapshot(&path).unwrap();
        assert_eq!(back.time(), 0.25);
        assert!(!back.ghosts_valid());
        g.for_each_interior(|o, _| assert_eq!(back.comp(3, 1)[o], f.comp(3, 1)[o]));
        let header: SnapshotHeader =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("phi.bin.json")).unwrap()).unwrap();
        assert_eq!(header.n, 6);
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 40 + 8 * 8 * 216);
    }
}
