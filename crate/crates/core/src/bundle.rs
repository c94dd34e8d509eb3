//! Binary persistence of trained Q-tables.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic      8 bytes  "QLBUNDLE"
//! version    u32
//! cfg_hash   u64
//! n_cs       u32
//! n_theta    u32
//! n_steps    u32      number of step records that follow (<= n_cs + 1)
//! converged  u8       1 if every step met the stopping rule
//! sigma      f64
//! sigma_a    f64
//! step record, n_steps times:
//!   index      u32
//!   is_latest  u8
//!   p_lim v_lim a_lim p_goal v_goal a_goal   6 x f64
//!   q_a        n_states * 3 x f64   row-major [state][action]
//!   q_b        n_states * 3 x f64
//!   visits     n_states * 3 x u64
//! ```
//!
//! `n_states = 27 * (2 * n_theta + 1)`. Trailing bytes are rejected.

use std::path::Path;

use crate::discretization::{CurriculumGeometry, DiscreteState, StepGeometry};
use crate::double_q::{QTablePair, N_ACTIONS};
use crate::error::{Error, Result};
use crate::evaluation::Policy;

pub const MAGIC: &[u8; 8] = b"QLBUNDLE";
pub const VERSION: u32 = 1;

const MAX_N_THETA: u32 = 1 << 12;
const MAX_STEPS: u32 = 1 << 10;

#[derive(Debug, Clone, PartialEq)]
pub struct QBundle {
    pub config_hash: u64,
    pub n_cs: u32,
    pub n_theta: u32,
    pub converged: bool,
    pub geometry: CurriculumGeometry,
    pub tables: Vec<QTablePair>,
}

impl QBundle {
    pub fn policy(&self) -> Result<Policy> {
        Policy::new(self.tables.clone(), self.geometry.clone())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let entries = self.tables.first().map_or(0, |t| t.q_a.len());
        let mut out = Vec::with_capacity(48 + self.tables.len() * (53 + entries * 24));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.config_hash.to_le_bytes());
        out.extend_from_slice(&self.n_cs.to_le_bytes());
        out.extend_from_slice(&self.n_theta.to_le_bytes());
        out.extend_from_slice(&(self.tables.len() as u32).to_le_bytes());
        out.push(u8::from(self.converged));
        out.extend_from_slice(&self.geometry.sigma.to_le_bytes());
        out.extend_from_slice(&self.geometry.sigma_a.to_le_bytes());
        for (g, t) in self.geometry.steps.iter().zip(&self.tables) {
            out.extend_from_slice(&(g.index as u32).to_le_bytes());
            out.push(u8::from(g.is_latest));
            for v in [g.p_lim, g.v_lim, g.a_lim, g.p_goal, g.v_goal, g.a_goal] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            for q in t.q_a.iter().chain(&t.q_b) {
                out.extend_from_slice(&q.to_le_bytes());
            }
            for n in &t.visits {
                out.extend_from_slice(&n.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Format("not a Q-table bundle (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported bundle version {version}")));
        }
        let config_hash = r.u64()?;
        let n_cs = r.u32()?;
        let n_theta = r.u32()?;
        let n_steps = r.u32()?;
        if n_theta == 0 || n_theta > MAX_N_THETA {
            return Err(Error::Format(format!("implausible n_theta {n_theta}")));
        }
        if n_cs >= MAX_STEPS || n_steps == 0 || n_steps > n_cs + 1 {
            return Err(Error::Format(format!("{n_steps} step records for n_cs = {n_cs}")));
        }
        let converged = match r.u8()? {
            0 => false,
            1 => true,
            other => return Err(Error::Format(format!("bad status byte {other}"))),
        };
        let sigma = r.f64()?;
        let sigma_a = r.f64()?;

        let entries = DiscreteState::count(n_theta) * N_ACTIONS;
        let record = 4 + 1 + 6 * 8 + entries * 24;
        let expected = record
            .checked_mul(n_steps as usize)
            .ok_or_else(|| Error::Format("bundle size overflow".into()))?;
        if r.remaining() != expected {
            return Err(Error::Format(format!(
                "expected {expected} bytes of step records, found {}",
                r.remaining()
            )));
        }

        let mut steps = Vec::with_capacity(n_steps as usize);
        let mut tables = Vec::with_capacity(n_steps as usize);
        for k in 0..n_steps as usize {
            let index = r.u32()? as usize;
            let is_latest = match r.u8()? {
                0 => false,
                1 => true,
                other => return Err(Error::Format(format!("bad latest flag {other}"))),
            };
            if index != k || is_latest != (k + 1 == n_steps as usize) {
                return Err(Error::Format(format!("step record {k} is out of order")));
            }
            let mut g = [0.0; 6];
            for v in &mut g {
                *v = r.f64()?;
            }
            steps.push(StepGeometry {
                index,
                p_lim: g[0],
                v_lim: g[1],
                a_lim: g[2],
                p_goal: g[3],
                v_goal: g[4],
                a_goal: g[5],
                is_latest,
            });
            let q_a = (0..entries).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            let q_b = (0..entries).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            let visits = (0..entries).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
            tables.push(QTablePair { q_a, q_b, visits });
        }
        Ok(Self {
            config_hash,
            n_cs,
            n_theta,
            converged,
            geometry: CurriculumGeometry { steps, sigma, sigma_a },
            tables,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Format(format!("truncated bundle at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        self.array().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64> {
        self.array().map(u64::from_le_bytes)
    }

    fn f64(&mut self) -> Result<f64> {
        self.array().map(f64::from_le_bytes)
    }
}
