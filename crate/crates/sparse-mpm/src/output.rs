//! Particle frame files.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sparse_mpm_core::ParticleSet;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleRow {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub speed: f64,
}

pub fn frame_file_name(frame: usize) -> String {
    format!("frame_{frame:06}.csv")
}

pub fn particle_rows(particles: &ParticleSet) -> impl Iterator<Item = ParticleRow> + '_ {
    particles.iter().enumerate().map(|(id, p)| ParticleRow {
        id,
        x: p.x.x,
        y: p.x.y,
        z: p.x.z,
        vx: p.v.x,
        vy: p.v.y,
        vz: p.v.z,
        speed: p.v.norm(),
    })
}

fn write_rows(path: &Path, rows: impl Iterator<Item = ParticleRow>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(BufWriter::new(file));
    w.write_record(["id", "x", "y", "z", "vx", "vy", "vz", "speed"])
        .map_err(|e| Error::csv(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `frame_NNNNNN.csv` into `dir` and returns its path.
pub fn write_particles(frame: usize, particles: &ParticleSet, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let path = dir.as_ref().join(frame_file_name(frame));
    write_rows(&path, particle_rows(particles))?;
    Ok(path)
}

pub fn read_particles(path: impl AsRef<Path>) -> Result<Vec<ParticleRow>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    r.deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::csv(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use sparse_mpm_core::math::Vec3;
    use sparse_mpm_core::Particle;

    #[test]
    fn empty_frame_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_particles(0, &ParticleSet::default(), dir.path()).unwrap();
        assert_eq!(path.file_name().unwrap(), "frame_000000.csv");
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "id,x,y,z,vx,vy,vz,speed\n");
        assert!(read_particles(&path).unwrap().is_empty());
    }

    #[test]
    fn frame_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let ps = ParticleSet::new(vec![
            Particle::new(Vec3::new(0.1, 1.0 / 3.0, -2.5e-7), 1.0, 1.0, 0).with_velocity(Vec3::new(1e300, -0.0, 3.0)),
            Particle::new(Vec3::new(12345.678, f64::MIN_POSITIVE, 0.0), 1.0, 1.0, 0),
        ]);
        let path = write_particles(42, &ps, dir.path()).unwrap();
        assert!(path.ends_with("frame_000042.csv"));
        let rows = read_particles(&path).unwrap();
        let want: Vec<ParticleRow> = particle_rows(&ps).collect();
        assert_eq!(rows.len(), 2);
        for (a, b) in rows.iter().zip(&want) {
            assert_eq!(a.id, b.id);
            for (x, y) in [(a.x, b.x), (a.y, b.y), (a.z, b.z), (a.vx, b.vx), (a.vy, b.vy), (a.vz, b.vz)] {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn missing_directory_reports_the_path() {
        let err = write_particles(1, &ParticleSet::default(), "/nonexistent/dir").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/frame_000001.csv"));
    }
}
