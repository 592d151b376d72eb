//! Density snapshots on disk.
//!
//! A `.grid` file is an ASCII header, one `key value` pair per line in fixed
//! order and terminated by `end`, followed by `nx·ny` little-endian f64 values
//! in row-major order (rows along x, first row at the lowest y):
//!
//! ```text
//! boxes-field 1
//! nx 512
//! ny 512
//! dx 5
//! dy 5
//! origin_x -480
//! origin_y -480
//! time 3000
//! quantity psi_density
//! end
//! ```
//!
//! The `.pgm` companion is a binary P5 greymap scaled so the maximum maps to
//! 255, with the top image row at the highest y.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiment::{Quantity, Snapshot};
use crate::grid::GridSpec;

const MAGIC: &str = "boxes-field 1";

#[derive(Debug, Clone, PartialEq)]
pub struct FieldFile {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub origin: [f64; 2],
    pub time: f64,
    pub quantity: Quantity,
    pub values: Vec<f64>,
}

impl FieldFile {
    pub fn new(spec: &GridSpec, time: f64, quantity: Quantity, values: Vec<f64>) -> Result<Self> {
        let file = Self {
            nx: spec.nx,
            ny: spec.ny,
            dx: spec.dx,
            dy: spec.dy,
            origin: spec.origin,
            time,
            quantity,
            values,
        };
        file.validate()?;
        Ok(file)
    }

    pub fn from_snapshot(snapshot: &Snapshot) -> Result<Self> {
        Self::new(
            snapshot.field.spec(),
            snapshot.time,
            snapshot.quantity,
            snapshot.density(),
        )
    }

    fn validate(&self) -> Result<()> {
        if self.values.len() != self.nx * self.ny {
            return Err(Error::MalformedFieldFile(format!(
                "header declares {}x{} samples but payload has {}",
                self.nx,
                self.ny,
                self.values.len()
            )));
        }
        if !self.values.iter().all(|v| v.is_finite() && *v >= 0.0) {
            return Err(Error::MalformedFieldFile("values must be finite and >= 0".into()));
        }
        Ok(())
    }

    pub fn write_grid<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        // `{}` on f64 prints the shortest string that parses back to the same bits.
        write!(
            w,
            "{MAGIC}\nnx {}\nny {}\ndx {}\ndy {}\norigin_x {}\norigin_y {}\ntime {}\nquantity {}\nend\n",
            self.nx,
            self.ny,
            self.dx,
            self.dy,
            self.origin[0],
            self.origin[1],
            self.time,
            self.quantity.tag()
        )?;
        let mut payload = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&payload)
    }

    pub fn read_grid<R: BufRead>(mut r: R) -> Result<Self> {
        let mut line = String::new();
        let mut next = |expect: &str| -> Result<String> {
            line.clear();
            r.read_line(&mut line)
                .map_err(|e| Error::MalformedFieldFile(e.to_string()))?;
            let text = line.trim_end_matches('\n');
            if expect.is_empty() {
                return Ok(text.to_string());
            }
            text.strip_prefix(expect)
                .and_then(|rest| rest.strip_prefix(' '))
                .map(str::to_string)
                .ok_or_else(|| Error::MalformedFieldFile(format!("expected `{expect}`, found `{text}`")))
        };
        if next("")? != MAGIC {
            return Err(Error::MalformedFieldFile("missing magic line".into()));
        }
        let int = |s: String| s.parse::<usize>().map_err(|e| Error::MalformedFieldFile(e.to_string()));
        let real = |s: String| s.parse::<f64>().map_err(|e| Error::MalformedFieldFile(e.to_string()));
        let nx = int(next("nx")?)?;
        let ny = int(next("ny")?)?;
        let dx = real(next("dx")?)?;
        let dy = real(next("dy")?)?;
        let ox = real(next("origin_x")?)?;
        let oy = real(next("origin_y")?)?;
        let time = real(next("time")?)?;
        let tag = next("quantity")?;
        let quantity =
            Quantity::from_tag(&tag).ok_or_else(|| Error::MalformedFieldFile(format!("unknown quantity `{tag}`")))?;
        if next("")? != "end" {
            return Err(Error::MalformedFieldFile("missing `end` line".into()));
        }

        let mut payload = Vec::new();
        r.read_to_end(&mut payload)
            .map_err(|e| Error::MalformedFieldFile(e.to_string()))?;
        if payload.len() % 8 != 0 {
            return Err(Error::MalformedFieldFile("payload is not a whole number of f64".into()));
        }
        let values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let file = Self {
            nx,
            ny,
            dx,
            dy,
            origin: [ox, oy],
            time,
            quantity,
            values,
        };
        file.validate()?;
        Ok(file)
    }

    pub fn write_pgm<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let max = self.values.iter().copied().fold(0.0, f64::max);
        write!(w, "P5\n{} {}\n255\n", self.nx, self.ny)?;
        let mut pixels = Vec::with_capacity(self.values.len());
        for j in (0..self.ny).rev() {
            for v in &self.values[j * self.nx..(j + 1) * self.nx] {
                let level = if max > 0.0 { (255.0 * v / max).round() } else { 0.0 };
                pixels.push(level as u8);
            }
        }
        w.write_all(&pixels)
    }

    /// Writes `<stem>.grid` and `<stem>.pgm` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        let grid_path = dir.join(format!("{stem}.grid"));
        let mut bytes = Vec::new();
        self.write_grid(&mut bytes).map_err(|e| Error::io(&grid_path, e))?;
        std::fs::write(&grid_path, bytes).map_err(|e| Error::io(&grid_path, e))?;

        let pgm_path = dir.join(format!("{stem}.pgm"));
        let mut bytes = Vec::new();
        self.write_pgm(&mut bytes).map_err(|e| Error::io(&pgm_path, e))?;
        std::fs::write(&pgm_path, bytes).map_err(|e| Error::io(&pgm_path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_grid(std::io::BufReader::new(file))
    }
}
