//! Time-stamped `{t, p, q, f}` episode streams and their CSV encoding.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::UnitQuaternion;
use crate::net::Wrench;

/// Column header of the episode CSV format.
pub const CSV_HEADER: [&str; 14] = [
    "t", "px", "py", "pz", "qw", "qx", "qy", "qz", "fx", "fy", "fz", "tx", "ty", "tz",
];

/// Tolerance on the sample spacing of a recorded episode.
pub const SPACING_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRow {
    /// Seconds since episode start.
    pub t: f64,
    /// Commanded tool position, m.
    pub p: Vector3<f64>,
    pub q: UnitQuaternion,
    /// Measured wrench on the tool: force (N) then torque (N·m).
    pub f: Wrench,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeRecord {
    pub rows: Vec<EpisodeRow>,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    t: f64,
    px: f64,
    py: f64,
    pz: f64,
    qw: f64,
    qx: f64,
    qy: f64,
    qz: f64,
    fx: f64,
    fy: f64,
    fz: f64,
    tx: f64,
    ty: f64,
    tz: f64,
}

impl EpisodeRecord {
    pub fn new(rows: Vec<EpisodeRow>) -> Self {
        EpisodeRecord { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn positions(&self) -> Vec<Vector3<f64>> {
        self.rows.iter().map(|r| r.p).collect()
    }

    pub fn orientations(&self) -> Vec<UnitQuaternion> {
        self.rows.iter().map(|r| r.q).collect()
    }

    pub fn wrenches(&self) -> Vec<Wrench> {
        self.rows.iter().map(|r| r.f).collect()
    }

    pub fn duration(&self) -> f64 {
        match (self.rows.first(), self.rows.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    /// Checks strictly increasing timestamps.
    pub fn check_monotonic(&self) -> Result<()> {
        for (k, w) in self.rows.windows(2).enumerate() {
            if !(w[1].t > w[0].t) {
                return Err(Error::NonMonotonicTime(k + 1));
            }
        }
        Ok(())
    }

    /// Checks uniform spacing `dt` within [`SPACING_TOLERANCE`] and unit
    /// quaternions on every row.
    pub fn validate(&self, dt: f64) -> Result<()> {
        self.check_monotonic()?;
        for (k, w) in self.rows.windows(2).enumerate() {
            if ((w[1].t - w[0].t) - dt).abs() > SPACING_TOLERANCE {
                return Err(Error::Misaligned(format!(
                    "row {}: spacing {} differs from {dt}",
                    k + 1,
                    w[1].t - w[0].t
                )));
            }
        }
        for r in &self.rows {
            if (r.q.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "non-unit quaternion at t = {}",
                    r.t
                )));
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::WriterBuilder::new().has_headers(true).from_writer(w);
        for r in &self.rows {
            let [qw, qx, qy, qz] = r.q.components();
            wr.serialize(CsvRow {
                t: r.t,
                px: r.p.x,
                py: r.p.y,
                pz: r.p.z,
                qw,
                qx,
                qy,
                qz,
                fx: r.f[0],
                fy: r.f[1],
                fz: r.f[2],
                tx: r.f[3],
                ty: r.f[4],
                tz: r.f[5],
            })?;
        }
        if self.rows.is_empty() {
            wr.write_record(CSV_HEADER)?;
        }
        wr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
        if header != CSV_HEADER {
            return Err(Error::InvalidArgument(format!(
                "unexpected episode header: {}",
                header.join(",")
            )));
        }
        let mut rows = Vec::new();
        for rec in rd.deserialize() {
            let c: CsvRow = rec?;
            rows.push(EpisodeRow {
                t: c.t,
                p: Vector3::new(c.px, c.py, c.pz),
                q: UnitQuaternion::new(c.qw, c.qx, c.qy, c.qz)?,
                f: [c.fx, c.fy, c.fz, c.tx, c.ty, c.tz],
            });
        }
        Ok(EpisodeRecord { rows })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}
