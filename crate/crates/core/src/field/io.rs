//! Field persistence.
//!
//! Binary format `NSF1`: magic bytes "NSF1", little-endian u32 dimension,
//! u32 points per axis, f64 box edge, u8 complex flag, then raw little-endian
//! f64 samples in row-major order (re/im interleaved when complex).

use super::{Field, FieldError, Grid};
use num_complex::Complex64;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"NSF1";

pub fn write_nsf1(field: &Field, path: &Path) -> Result<(), FieldError> {
    let mut w = BufWriter::new(File::create(path)?);
    let grid = field.grid();
    w.write_all(MAGIC)?;
    w.write_all(&grid.dim().to_le_bytes())?;
    w.write_all(&(grid.points_per_axis() as u32).to_le_bytes())?;
    w.write_all(&grid.edge().to_le_bytes())?;
    w.write_all(&[u8::from(!field.is_real())])?;
    for v in field.values() {
        w.write_all(&v.re.to_le_bytes())?;
        if !field.is_real() {
            w.write_all(&v.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_nsf1(path: &Path) -> Result<Field, FieldError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(FieldError::BadFormat(format!("bad magic {magic:?}")));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let n = u32::from_le_bytes(b4);
    r.read_exact(&mut b4)?;
    let m = u32::from_le_bytes(b4) as usize;
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let l = f64::from_le_bytes(b8);
    let mut flag = [0u8; 1];
    r.read_exact(&mut flag)?;
    let complex = flag[0] != 0;
    let grid = Grid::new(n, m, l)?;
    let total = grid.total_points();
    let mut values = Vec::with_capacity(total);
    for _ in 0..total {
        r.read_exact(&mut b8)?;
        let re = f64::from_le_bytes(b8);
        let im = if complex {
            r.read_exact(&mut b8)?;
            f64::from_le_bytes(b8)
        } else {
            0.0
        };
        values.push(Complex64::new(re, im));
    }
    Field::from_values(grid, values)
}

/// CSV of the samples along one coordinate axis through the box center.
pub fn axis_profile_csv(field: &Field, axis: u32, header: &str) -> String {
    let grid = field.grid();
    let m = grid.points_per_axis();
    let n = grid.dim();
    assert!(axis < n, "axis {axis} out of range");
    let mut out = String::from(header);
    out.push_str("x,re,im,abs2\n");
    let mid = m / 2;
    let stride = m.pow(n - 1 - axis);
    // Center the remaining axes.
    let mut base = 0usize;
    for d in 0..n {
        if d != axis {
            base += mid * m.pow(n - 1 - d);
        }
    }
    for j in 0..m {
        let idx = base + j * stride;
        let x = grid.coords(idx)[axis as usize];
        let v = field.values()[idx];
        out.push_str(&format!("{x:.16e},{:.16e},{:.16e},{:.16e}\n", v.re, v.im, v.norm_sqr()));
    }
    out
}

/// CSV of the radially binned mean of |u|².
pub fn radial_profile_csv(field: &Field, header: &str) -> String {
    let grid = field.grid();
    let n = grid.dim() as usize;
    let bins = grid.points_per_axis() / 2;
    let dr = 0.5 * grid.edge() / bins as f64;
    let mut sums = vec![0.0f64; bins];
    let mut counts = vec![0usize; bins];
    for (idx, v) in field.values().iter().enumerate() {
        let x = grid.coords(idx);
        let r: f64 = x[..n].iter().map(|xi| xi * xi).sum::<f64>().sqrt();
        let bin = (r / dr) as usize;
        if bin < bins {
            sums[bin] += v.norm_sqr();
            counts[bin] += 1;
        }
    }
    let mut out = String::from(header);
    out.push_str("r,mean_abs2\n");
    for (i, (s, c)) in sums.iter().zip(&counts).enumerate() {
        if *c > 0 {
            out.push_str(&format!("{:.16e},{:.16e}\n", (i as f64 + 0.5) * dr, s / *c as f64));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn nsf1_round_trip_real_and_complex() {
        let dir = std::env::temp_dir().join("nls_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let grid = Grid::new(2, 16, 10.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for real in [true, false] {
            let u = Field::random_localized(grid, 2.0, 2.0, &[0.0, 0.0], real, &mut rng);
            let path = dir.join(if real { "r.nsf" } else { "c.nsf" });
            write_nsf1(&u, &path).unwrap();
            let back = read_nsf1(&path).unwrap();
            assert_eq!(back.grid(), grid);
            assert_eq!(back.is_real(), real);
            for (a, b) in u.values().iter().zip(back.values()) {
                assert_eq!(a, b, "round trip must be bit exact");
            }
        }
        let bogus = dir.join("bogus.nsf");
        std::fs::write(&bogus, b"NOPE").unwrap();
        assert!(read_nsf1(&bogus).is_err());
    }

    #[test]
    fn axis_profile_has_all_points() {
        let grid = Grid::new(1, 32, 8.0).unwrap();
        let u = Field::gaussian(grid, &[0.0], 1.0);
        let csv = axis_profile_csv(&u, 0, "# test\n");
        assert_eq!(csv.lines().count(), 2 + 32);
        let radial = radial_profile_csv(&u, "");
        assert!(radial.lines().count() > 4);
    }
}
