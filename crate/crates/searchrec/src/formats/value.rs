//! Binary value tables.
//!
//! Little-endian layout:
//! `b"SRVT"`, version `u32`, then the lattice descriptor `k: u32`, `g: u32`,
//! `horizon: u32`, `n_actions: u32`, the actions (`3 × u8` each), for every
//! `t = 1..T` a `u64` length followed by that many `f64` values, and for every
//! `t = 1..T-1` a `u64` length followed by that many `u16` argmax indices.

use std::path::Path;

use searchrec_core::dpsolver::enumerate_actions;
use searchrec_core::{RecAction, SimplexLattice, ValueTable};

use super::write_bytes;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SRVT";
pub const VALUE_VERSION: u32 = 1;

pub fn encode(table: &ValueTable) -> Vec<u8> {
    let mut b = Vec::new();
    b.extend_from_slice(MAGIC);
    for v in [VALUE_VERSION, table.k as u32, table.lattice.granularity(), table.horizon as u32, table.actions.len() as u32] {
        b.extend_from_slice(&v.to_le_bytes());
    }
    for a in &table.actions {
        b.extend(a.slots().iter().map(|&s| s as u8));
    }
    for slice in &table.values {
        b.extend_from_slice(&(slice.len() as u64).to_le_bytes());
        for v in slice {
            b.extend_from_slice(&v.to_le_bytes());
        }
    }
    for slice in &table.argmax {
        b.extend_from_slice(&(slice.len() as u64).to_le_bytes());
        for v in slice {
            b.extend_from_slice(&v.to_le_bytes());
        }
    }
    b
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or("truncated value table")?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> std::result::Result<ValueTable, String> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err("not a value table (bad magic)".into());
    }
    let version = c.u32()?;
    if version != VALUE_VERSION {
        return Err(format!("unsupported value-table version {version}"));
    }
    let (k, g, horizon, n_actions) = (c.u32()? as usize, c.u32()?, c.u32()? as usize, c.u32()? as usize);
    if k == 0 || g == 0 || horizon == 0 {
        return Err("degenerate lattice descriptor".into());
    }
    let mut actions = Vec::with_capacity(n_actions);
    for _ in 0..n_actions {
        let s = c.take(3)?;
        if s.iter().any(|&x| x as usize >= k) {
            return Err("action cluster out of range".into());
        }
        actions.push(RecAction::new([s[0] as usize, s[1] as usize, s[2] as usize]));
    }
    if actions != enumerate_actions(k) {
        return Err("action list does not match the lattice descriptor".into());
    }
    let lattice = SimplexLattice::new(k, g);
    let p = lattice.num_points();
    let states = |t: usize| if t == 1 { k } else { k * p * p };
    let mut values = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let n = c.u64()? as usize;
        if n != states(t) {
            return Err(format!("period {t}: expected {} values, found {n}", states(t)));
        }
        let raw = c.take(n.checked_mul(8).ok_or("length overflow")?)?;
        values.push(raw.chunks_exact(8).map(|x| f64::from_le_bytes(x.try_into().unwrap())).collect());
    }
    let mut argmax = Vec::with_capacity(horizon.saturating_sub(1));
    for t in 1..horizon {
        let n = c.u64()? as usize;
        if n != states(t) {
            return Err(format!("period {t}: expected {} actions, found {n}", states(t)));
        }
        let raw = c.take(n.checked_mul(2).ok_or("length overflow")?)?;
        let v: Vec<u16> = raw.chunks_exact(2).map(|x| u16::from_le_bytes(x.try_into().unwrap())).collect();
        if v.iter().any(|&a| a as usize >= n_actions) {
            return Err("argmax index out of range".into());
        }
        argmax.push(v);
    }
    if c.pos != bytes.len() {
        return Err("trailing bytes after value table".into());
    }
    Ok(ValueTable { k, horizon, lattice, actions, values, argmax })
}

pub fn write_value_table(path: &Path, table: &ValueTable) -> Result<()> {
    write_bytes(path, &encode(table))
}

pub fn read_value_table(path: &Path) -> Result<ValueTable> {
    let bytes = std::fs::read(path).map_err(|e| Error::input(path, e))?;
    decode(&bytes).map_err(|m| Error::input(path, m))
}
