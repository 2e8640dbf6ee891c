//! Occupancy grid dump: a JSON header plus a run-length-encoded body.
//!
//! The body stores the raw (pre-inflation) lattice in x-fastest order as
//! little-endian `u32` run lengths of alternating values, starting with a
//! run of free cells (possibly empty). Loading re-inflates with the
//! header's `inflation_radius`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{OccupancyGrid, SceneError};
use crate::geometry::{from_array, to_array};

const ENCODING: &str = "rle-u32le-alternating-free-first";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub origin: [f64; 3],
    pub resolution: f64,
    pub dims: [usize; 3],
    pub inflation_radius: f64,
    pub encoding: String,
}

pub fn write_grid<H: Write, B: Write>(grid: &OccupancyGrid, mut header: H, mut body: B) -> std::io::Result<()> {
    let h = GridHeader {
        origin: to_array(&grid.origin()),
        resolution: grid.resolution(),
        dims: grid.dims(),
        inflation_radius: grid.inflation_radius(),
        encoding: ENCODING.to_string(),
    };
    serde_json::to_writer_pretty(&mut header, &h)?;
    header.write_all(b"\n")?;

    let mut current = false;
    let mut run: u32 = 0;
    for &cell in grid.raw_lattice() {
        if cell == current {
            run += 1;
        } else {
            body.write_all(&run.to_le_bytes())?;
            current = cell;
            run = 1;
        }
    }
    body.write_all(&run.to_le_bytes())?;
    Ok(())
}

pub fn read_grid(header: &[u8], body: &[u8]) -> Result<OccupancyGrid, SceneError> {
    let h: GridHeader = serde_json::from_slice(header).map_err(|e| SceneError::Format(format!("grid header: {e}")))?;
    if h.encoding != ENCODING {
        return Err(SceneError::Format(format!("unknown grid encoding `{}`", h.encoding)));
    }
    if !body.len().is_multiple_of(4) {
        return Err(SceneError::Format("grid body is not a whole number of u32 runs".into()));
    }
    let total: usize = h.dims.iter().product();
    let mut raw = Vec::with_capacity(total);
    let mut value = false;
    for chunk in body.chunks_exact(4) {
        let run = u32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]) as usize;
        if raw.len() + run > total {
            return Err(SceneError::Format("grid body overruns the lattice".into()));
        }
        raw.extend(std::iter::repeat_n(value, run));
        value = !value;
    }
    if raw.len() != total {
        return Err(SceneError::Format(format!("grid body covers {} of {} cells", raw.len(), total)));
    }
    Ok(OccupancyGrid::from_raw(from_array(h.origin), h.resolution, h.dims, raw, h.inflation_radius))
}
