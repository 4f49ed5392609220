//! Atomic file output and PPM rasters.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ifslab::{GridMeasure, Interval, Orbit};

use crate::Failure;

pub const STRIP_WIDTH: usize = 1024;
pub const STRIP_HEIGHT: usize = 64;
pub const ORBIT_HEIGHT: usize = 256;

pub struct OutDir(PathBuf);

impl OutDir {
    pub fn create(path: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(path)
            .map_err(|e| Failure::Internal(format!("cannot create {}: {e}", path.display())))?;
        Ok(OutDir(path.to_path_buf()))
    }

    /// Writes through a temporary sibling and renames it into place.
    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, Failure> {
        let dest = self.0.join(name);
        let tmp = self.0.join(format!(".{name}.tmp"));
        let io = |e: std::io::Error| Failure::Internal(format!("writing {}: {e}", dest.display()));
        let mut f = fs::File::create(&tmp).map_err(io)?;
        f.write_all(bytes).map_err(io)?;
        f.sync_all().map_err(io)?;
        fs::rename(&tmp, &dest).map_err(io)?;
        Ok(dest)
    }
}

fn ppm(width: usize, height: usize, gray: &[u8]) -> Vec<u8> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.reserve(gray.len() * 3);
    for &g in gray {
        out.extend_from_slice(&[g, g, g]);
    }
    out
}

/// Column `c` is darkened in proportion to the mass of the bins it covers.
pub fn density_strip(mu: &GridMeasure) -> Vec<u8> {
    let n = mu.n_bins();
    let mut column = vec![0.0f64; STRIP_WIDTH];
    for (i, &m) in mu.masses().iter().enumerate() {
        // spread each bin over the columns it overlaps
        let a = i as f64 * STRIP_WIDTH as f64 / n as f64;
        let b = (i + 1) as f64 * STRIP_WIDTH as f64 / n as f64;
        let mut c = a.floor() as usize;
        while c < STRIP_WIDTH && (c as f64) < b {
            let overlap = (b.min(c as f64 + 1.0) - a.max(c as f64)).max(0.0);
            column[c] += m * overlap / (b - a);
            c += 1;
        }
    }
    let peak = column.iter().copied().fold(0.0, f64::max);
    let row: Vec<u8> = column
        .iter()
        .map(|&m| if peak > 0.0 { 255 - (255.0 * m / peak).round() as u8 } else { 255 })
        .collect();
    let gray: Vec<u8> = (0..STRIP_HEIGHT).flat_map(|_| row.iter().copied()).collect();
    ppm(STRIP_WIDTH, STRIP_HEIGHT, &gray)
}

/// Scatter of `(n, x_n)`: orbit index left to right (downsampled to at most
/// `STRIP_WIDTH` columns), position bottom to top.
pub fn orbit_scatter(orbit: &Orbit, domain: Interval) -> Vec<u8> {
    let n = orbit.len();
    let width = n.clamp(1, STRIP_WIDTH);
    let mut gray = vec![255u8; width * ORBIT_HEIGHT];
    for (i, &x) in orbit.points.iter().enumerate() {
        let col = i * width / n.max(1);
        let t = ((x - domain.lo) / domain.width()).clamp(0.0, 1.0);
        let row = ORBIT_HEIGHT - 1 - ((t * (ORBIT_HEIGHT - 1) as f64).round() as usize);
        gray[row * width + col] = 0;
    }
    ppm(width, ORBIT_HEIGHT, &gray)
}
