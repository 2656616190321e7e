use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};

const FIELD_MAGIC: &[u8; 8] = b"SFFIELD1";

/// Complex pressure samples on a uniform grid.
///
/// Node `(i, j)` sits at `(origin.0 + i·dx, origin.1 + j·dy)` and is stored
/// row-major (`j·nx + i`). When `bloch` is set the field is quasi-periodic in
/// x with period `nx·dx`: `p(x + nx·dx, y) = bloch · p(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub origin: (f64, f64),
    pub bloch: Option<Complex64>,
    pub values: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(nx: usize, ny: usize, dx: f64, dy: f64, origin: (f64, f64)) -> Self {
        Self {
            nx,
            ny,
            dx,
            dy,
            origin,
            bloch: None,
            values: vec![Complex64::new(0.0, 0.0); nx * ny],
        }
    }

    /// Samples a function on the grid.
    pub fn from_fn(
        nx: usize,
        ny: usize,
        dx: f64,
        dy: f64,
        origin: (f64, f64),
        f: impl Fn(f64, f64) -> Complex64,
    ) -> Self {
        let mut out = Self::zeros(nx, ny, dx, dy, origin);
        for j in 0..ny {
            for i in 0..nx {
                let (x, y) = out.node(i, j);
                out.values[j * nx + i] = f(x, y);
            }
        }
        out
    }

    pub fn with_bloch(mut self, bloch: Complex64) -> Self {
        self.bloch = Some(bloch);
        self
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.origin.0 + i as f64 * self.dx,
            self.origin.1 + j as f64 * self.dy,
        )
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.values[j * self.nx + i]
    }

    pub fn row(&self, j: usize) -> &[Complex64] {
        &self.values[j * self.nx..(j + 1) * self.nx]
    }

    /// Horizontal extent; the period when quasi-periodic.
    pub fn width(&self) -> f64 {
        match self.bloch {
            Some(_) => self.nx as f64 * self.dx,
            None => (self.nx - 1) as f64 * self.dx,
        }
    }

    pub fn height(&self) -> f64 {
        (self.ny - 1) as f64 * self.dy
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Column index and Floquet factor for integer column `i` (may be
    /// outside `0..nx` when quasi-periodic).
    fn wrap_column(&self, i: i64) -> Option<(usize, Complex64)> {
        let nx = self.nx as i64;
        match self.bloch {
            Some(b) => {
                let periods = i.div_euclid(nx);
                let col = i.rem_euclid(nx) as usize;
                Some((col, b.powi(periods as i32)))
            }
            None if (0..nx).contains(&i) => Some((i as usize, Complex64::new(1.0, 0.0))),
            None => None,
        }
    }

    /// Bilinear interpolation.
    pub fn bilinear(&self, x: f64, y: f64) -> Result<Complex64> {
        let fx = (x - self.origin.0) / self.dx;
        let fy = (y - self.origin.1) / self.dy;
        let out = || Error::OutsideDomain { x, y };
        if !(fy >= 0.0 && fy <= (self.ny - 1) as f64) || !fx.is_finite() {
            return Err(out());
        }
        let i0 = fx.floor() as i64;
        let j0 = (fy.floor() as usize).min(self.ny.saturating_sub(2));
        let tx = fx - i0 as f64;
        let ty = fy - j0 as f64;
        let (c0, p0) = self.wrap_column(i0).ok_or_else(out)?;
        let (c1, p1) = if tx == 0.0 {
            (c0, p0)
        } else {
            self.wrap_column(i0 + 1).ok_or_else(out)?
        };
        let v00 = self.at(c0, j0) * p0;
        let v10 = self.at(c1, j0) * p1;
        let v01 = self.at(c0, j0 + 1) * p0;
        let v11 = self.at(c1, j0 + 1) * p1;
        Ok(v00 * ((1.0 - tx) * (1.0 - ty))
            + v10 * (tx * (1.0 - ty))
            + v01 * ((1.0 - tx) * ty)
            + v11 * (tx * ty))
    }

    /// Writes the binary dump: magic, then `nx, ny` as u64, `dx, dy, x0, y0`
    /// and the Floquet factor (re, im; NaN when absent) as f64, followed by
    /// row-major `(re, im)` pairs. All little-endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(FIELD_MAGIC)?;
        w.write_all(&(self.nx as u64).to_le_bytes())?;
        w.write_all(&(self.ny as u64).to_le_bytes())?;
        let bloch = self.bloch.unwrap_or(Complex64::new(f64::NAN, f64::NAN));
        for v in [self.dx, self.dy, self.origin.0, self.origin.1, bloch.re, bloch.im] {
            w.write_all(&v.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.values.len() * 16);
        for v in &self.values {
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != FIELD_MAGIC {
            return Err(Error::Format("not a field dump".into()));
        }
        let mut u = [0u8; 8];
        let mut read_u64 = |r: &mut R| -> Result<u64> {
            r.read_exact(&mut u)?;
            Ok(u64::from_le_bytes(u))
        };
        let nx = read_u64(&mut r)? as usize;
        let ny = read_u64(&mut r)? as usize;
        let mut f = [0.0; 6];
        for v in f.iter_mut() {
            *v = f64::from_bits(read_u64(&mut r)?);
        }
        let len = nx.checked_mul(ny).ok_or_else(|| Error::Format("bad dims".into()))?;
        let mut payload = vec![0u8; len * 16];
        r.read_exact(&mut payload)?;
        let values = payload
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        let bloch = (!f[4].is_nan()).then(|| Complex64::new(f[4], f[5]));
        Ok(Self {
            nx,
            ny,
            dx: f[0],
            dy: f[1],
            origin: (f[2], f[3]),
            bloch,
            values,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_reproduces_linear_functions() {
        let f = ComplexField::from_fn(9, 7, 0.5, 0.25, (1.0, -1.0), |x, y| {
            Complex64::new(2.0 * x - y, x + 3.0 * y)
        });
        let v = f.bilinear(2.3, -0.4).unwrap();
        assert!((v - Complex64::new(2.0 * 2.3 + 0.4, 2.3 - 1.2)).norm() < 1e-12);
        assert!(f.bilinear(0.9, 0.0).is_err());
        assert!(f.bilinear(2.0, 0.6).is_err());
    }

    #[test]
    fn quasi_periodic_wrap() {
        let kx = 1.3;
        let nx = 16;
        let dx = 0.1;
        let w = nx as f64 * dx;
        let bloch = Complex64::from_polar(1.0, kx * w);
        let f = ComplexField::from_fn(nx, 3, dx, 0.5, (0.0, 0.0), |x, _| {
            Complex64::from_polar(1.0, kx * x)
        })
        .with_bloch(bloch);
        let a = f.bilinear(w + 0.3, 0.5).unwrap();
        let b = f.bilinear(0.3, 0.5).unwrap() * bloch;
        assert!((a - b).norm() < 1e-12);
        let c = f.bilinear(-0.25, 0.1).unwrap();
        let d = f.bilinear(w - 0.25, 0.1).unwrap() / bloch;
        assert!((c - d).norm() < 1e-12);
    }

    #[test]
    fn binary_roundtrip() {
        let f = ComplexField::from_fn(4, 3, 0.1, 0.2, (0.5, -2.0), |x, y| Complex64::new(x, y))
            .with_bloch(Complex64::new(0.0, 1.0));
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 16 + 48 + 12 * 16);
        let g = ComplexField::read_binary(&buf[..]).unwrap();
        assert_eq!(f, g);
        buf[0] = b'X';
        assert!(ComplexField::read_binary(&buf[..]).is_err());
    }
}
