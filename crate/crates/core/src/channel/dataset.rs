//! Dataset container and the WBDS binary file format.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic "WBDS" | version u16 = 1 | M u32 | N u32 | record_count u32 | alpha f64
//! per record:
//!   position x f64, y f64
//!   los u8
//!   channel: M*N complex entries, interleaved re/im f32, row-major
//!            (antenna-major: all subcarriers of antenna 0 first)
//! train_count u32, train u32[...]
//! val_count u32,   val u32[...]
//! test_count u32,  test u32[...]
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha12Rng;

use crate::error::{CoreError, Result};
use crate::wire::*;

use super::geometry::Point;
use super::matrix::ChannelMatrix;
use super::UserRecord;

pub const WBDS_MAGIC: &[u8; 4] = b"WBDS";
const WBDS_VERSION: u16 = 1;

/// Disjoint train/val/test index lists covering the whole dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Seeded shuffle, then 60/20/20 by count (train and val round down).
    pub fn new_60_20_20(n: usize, rng: &mut ChaCha12Rng) -> Self {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(rng);
        let n_train = n * 6 / 10;
        let n_val = n * 2 / 10;
        Self {
            train: idx[..n_train].to_vec(),
            val: idx[n_train..n_train + n_val].to_vec(),
            test: idx[n_train + n_val..].to_vec(),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for &i in self.train.iter().chain(&self.val).chain(&self.test) {
            if i >= n || seen[i] {
                return Err(CoreError::Config(format!(
                    "split index {i} out of range or duplicated"
                )));
            }
            seen[i] = true;
        }
        if seen.iter().all(|s| *s) {
            Ok(())
        } else {
            Err(CoreError::Config("split does not cover all records".into()))
        }
    }
}

/// Normalized user records with split assignment.
#[derive(Debug, Clone)]
pub struct Dataset {
    records: Vec<UserRecord>,
    norm_factor: f64,
    split: Split,
}

impl Dataset {
    pub fn new(records: Vec<UserRecord>, norm_factor: f64, split: Split) -> Result<Self> {
        if norm_factor <= 0.0 {
            return Err(CoreError::Config(format!(
                "normalization factor must be > 0, got {norm_factor}"
            )));
        }
        split.validate(records.len())?;
        Ok(Self {
            records,
            norm_factor,
            split,
        })
    }

    pub fn records(&self) -> &[UserRecord] {
        &self.records
    }

    pub fn record(&self, i: usize) -> &UserRecord {
        &self.records[i]
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn norm_factor(&self) -> f64 {
        self.norm_factor
    }

    pub fn split(&self) -> &Split {
        &self.split
    }

    pub fn num_antennas(&self) -> usize {
        self.records.first().map_or(0, |r| r.channel.num_antennas())
    }

    pub fn num_subcarriers(&self) -> usize {
        self.records
            .first()
            .map_or(0, |r| r.channel.num_subcarriers())
    }

    /// Mean squared channel entry magnitude over all records.
    pub fn mean_entry_power(&self) -> f64 {
        let mut total = 0.0;
        let mut count = 0usize;
        for r in &self.records {
            total += r.channel.entries().iter().map(|c| c.norm_sqr()).sum::<f64>();
            count += r.channel.entries().len();
        }
        total / count as f64
    }
}

pub fn save_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(WBDS_MAGIC)?;
    write_u16(&mut w, WBDS_VERSION)?;
    write_u32(&mut w, ds.num_antennas() as u32)?;
    write_u32(&mut w, ds.num_subcarriers() as u32)?;
    write_u32(&mut w, ds.records.len() as u32)?;
    write_f64(&mut w, ds.norm_factor)?;
    for r in &ds.records {
        write_f64(&mut w, r.position.x)?;
        write_f64(&mut w, r.position.y)?;
        write_u8(&mut w, u8::from(r.los))?;
        for e in r.channel.entries() {
            write_f32(&mut w, e.re as f32)?;
            write_f32(&mut w, e.im as f32)?;
        }
    }
    for part in [&ds.split.train, &ds.split.val, &ds.split.test] {
        write_u32(&mut w, part.len() as u32)?;
        for &i in part {
            write_u32(&mut w, i as u32)?;
        }
    }
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let mut r = BufReader::new(File::open(path).map_err(|e| {
        CoreError::Io(format!("cannot open dataset {}: {e}", path.display()))
    })?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != WBDS_MAGIC {
        return Err(CoreError::Io(format!(
            "{} is not a WBDS dataset",
            path.display()
        )));
    }
    let version = read_u16(&mut r)?;
    if version != WBDS_VERSION {
        return Err(CoreError::Io(format!("unsupported WBDS version {version}")));
    }
    let m = read_u32(&mut r)? as usize;
    let n = read_u32(&mut r)? as usize;
    let count = read_u32(&mut r)? as usize;
    let alpha = read_f64(&mut r)?;
    let mut records = Vec::with_capacity(count);
    for _ in 0..count {
        let x = read_f64(&mut r)?;
        let y = read_f64(&mut r)?;
        let los = read_u8(&mut r)? != 0;
        let mut entries = Vec::with_capacity(m * n);
        for _ in 0..m * n {
            let re = read_f32(&mut r)? as f64;
            let im = read_f32(&mut r)? as f64;
            entries.push(Complex64::new(re, im));
        }
        records.push(UserRecord {
            position: Point::new(x, y),
            channel: ChannelMatrix::new(m, n, entries)?,
            los,
        });
    }
    let mut parts = Vec::with_capacity(3);
    for _ in 0..3 {
        let len = read_u32(&mut r)? as usize;
        let mut part = Vec::with_capacity(len);
        for _ in 0..len {
            part.push(read_u32(&mut r)? as usize);
        }
        parts.push(part);
    }
    let split = Split {
        test: parts.pop().expect("three parts"),
        val: parts.pop().expect("three parts"),
        train: parts.pop().expect("three parts"),
    };
    Dataset::new(records, alpha, split)
}
