//! Binary container for grid states.
//!
//! Layout (little endian):
//!
//! ```text
//! magic "BOAS", version u32 = 1
//! dim u32, nodes u64 × dim, extents f64 × 2·dim, offset u8
//! eps f64, kind u8 (0 molecular, 1 nucleonic), components u32
//! values: complex64 (f32 re, f32 im), row-major nodes, component fastest
//! ```

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridSpec};
use crate::num::{lit, to_f64, Real, C};
use crate::state::State;

const MAGIC: &[u8; 4] = b"BOAS";
const VERSION: u32 = 1;

/// What a stored state represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StateKind {
    /// `m` electronic components.
    Molecular,
    /// `ℓ` band components.
    Nucleonic,
}

/// Writes `psi`; amplitudes are narrowed to `f32`.
pub fn write_state<T: Real>(mut out: impl Write, psi: &State<T>, kind: StateKind) -> Result<()> {
    let spec = psi.grid().spec();
    out.write_all(MAGIC)?;
    out.write_u32::<LittleEndian>(VERSION)?;
    out.write_u32::<LittleEndian>(spec.nodes.len() as u32)?;
    for n in &spec.nodes {
        out.write_u64::<LittleEndian>(*n as u64)?;
    }
    for e in &spec.extents {
        out.write_f64::<LittleEndian>(e[0])?;
        out.write_f64::<LittleEndian>(e[1])?;
    }
    out.write_u8(spec.offset as u8)?;
    out.write_f64::<LittleEndian>(to_f64(psi.eps()))?;
    out.write_u8(match kind {
        StateKind::Molecular => 0,
        StateKind::Nucleonic => 1,
    })?;
    out.write_u32::<LittleEndian>(psi.components() as u32)?;
    for z in psi.values() {
        out.write_f32::<LittleEndian>(to_f64(z.re) as f32)?;
        out.write_f32::<LittleEndian>(to_f64(z.im) as f32)?;
    }
    Ok(())
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("truncated state container".into())
    } else {
        Error::Io(e)
    }
}

/// Reads a container written by [`write_state`].
pub fn read_state<T: Real>(mut input: impl Read) -> Result<(State<T>, StateKind)> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic).map_err(truncated)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = input.read_u32::<LittleEndian>().map_err(truncated)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let dim = input.read_u32::<LittleEndian>().map_err(truncated)? as usize;
    if !(1..=2).contains(&dim) {
        return Err(Error::Format(format!("grid dimension {dim}")));
    }
    let mut nodes = Vec::with_capacity(dim);
    for _ in 0..dim {
        nodes.push(input.read_u64::<LittleEndian>().map_err(truncated)? as usize);
    }
    let mut extents = Vec::with_capacity(dim);
    for _ in 0..dim {
        let a = input.read_f64::<LittleEndian>().map_err(truncated)?;
        let b = input.read_f64::<LittleEndian>().map_err(truncated)?;
        extents.push([a, b]);
    }
    let offset = input.read_u8().map_err(truncated)? != 0;
    let eps = input.read_f64::<LittleEndian>().map_err(truncated)?;
    let kind = match input.read_u8().map_err(truncated)? {
        0 => StateKind::Molecular,
        1 => StateKind::Nucleonic,
        k => return Err(Error::Format(format!("unknown state kind {k}"))),
    };
    let comps = input.read_u32::<LittleEndian>().map_err(truncated)? as usize;
    let grid: Grid<T> = GridSpec { extents, nodes, offset }.build().map_err(|e| Error::Format(e.to_string()))?;
    if comps == 0 {
        return Err(Error::Format("zero components".into()));
    }
    let count = grid.len() * comps;
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        let r = input.read_f32::<LittleEndian>().map_err(truncated)?;
        let i = input.read_f32::<LittleEndian>().map_err(truncated)?;
        values.push(C::new(lit::<T>(r as f64), lit::<T>(i as f64)));
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after state values".into()));
    }
    Ok((State::from_values(&grid, comps, lit(eps), values)?, kind))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::cplx;

    #[test]
    fn round_trip_and_corruption() {
        let g = Grid::<f64>::new_2d([-1.0, 1.0], [-2.0, 2.0], [16, 32], true).unwrap();
        let psi = State::from_fn(&g, 2, 0.05, |x| vec![cplx(x[0], x[1]), cplx(1.0, -x[0])]);
        let mut buf = Vec::new();
        write_state(&mut buf, &psi, StateKind::Molecular).unwrap();
        let (back, kind) = read_state::<f64>(&buf[..]).unwrap();
        assert_eq!(kind, StateKind::Molecular);
        assert_eq!(back.grid(), psi.grid());
        assert!(back.distance(&psi).unwrap() < 1e-6);
        assert!(matches!(read_state::<f64>(&buf[..buf.len() - 3]), Err(Error::Format(_))));
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_state::<f64>(&bad[..]), Err(Error::Format(_))));
    }
}
