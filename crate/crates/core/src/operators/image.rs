use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major image on a `width × height` pixel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl GridImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width * height != pixels.len() {
            return Err(Error::DimensionMismatch {
                context: "image pixels",
                expected: width * height,
                actual: pixels.len(),
            });
        }
        if pixels.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument("image pixels must be finite".into()));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    /// Binary PGM (P5) with 16-bit big-endian samples; values are clamped
    /// to `[0, 1]` and scaled to `0..=65535`.
    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n65535\n", self.width, self.height).into_bytes();
        for &p in &self.pixels {
            let s = (p.clamp(0.0, 1.0) * 65535.0).round() as u16;
            out.extend_from_slice(&s.to_be_bytes());
        }
        out
    }

    pub fn from_pgm_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let err = |message: &str| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: message.to_string(),
        };
        // header: magic, width, height, maxval separated by whitespace, '#' comments
        let mut fields = Vec::new();
        let mut i = 0;
        while fields.len() < 4 {
            while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'#' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                continue;
            }
            let start = i;
            while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            if start == i {
                return Err(err("truncated PGM header"));
            }
            fields.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
        }
        i += 1;
        if fields[0] != "P5" {
            return Err(err("not a binary PGM (P5) file"));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|_| err("bad PGM dimension"));
        let (w, h, maxval) = (parse(&fields[1])?, parse(&fields[2])?, parse(&fields[3])?);
        if maxval != 65535 {
            return Err(err("only 16-bit PGM (maxval 65535) is supported"));
        }
        let body = bytes.get(i..).unwrap_or_default();
        if body.len() != 2 * w * h {
            return Err(err("PGM sample count does not match its dimensions"));
        }
        let pixels = body
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / 65535.0)
            .collect();
        Self::new(w, h, pixels)
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_pgm_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read_pgm(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_pgm_bytes(&bytes, path)
    }

    /// One image row per line, comma separated, exact round-trip values.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.pixels.chunks(self.width.max(1)) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, path: &Path) -> Result<Self> {
        let mut pixels = Vec::new();
        let mut width = None;
        let mut height = 0;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split(',')
                .map(|f| {
                    f.trim().parse::<f64>().map_err(|_| Error::Parse {
                        path: path.to_path_buf(),
                        line: i + 1,
                        message: format!("cannot parse '{f}'"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            match width {
                None => width = Some(row.len()),
                Some(w) if w != row.len() => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: i + 1,
                        message: format!("row has {} values, expected {w}", row.len()),
                    })
                }
                _ => {}
            }
            pixels.extend(row);
            height += 1;
        }
        Self::new(width.unwrap_or(0), height, pixels)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text, path)
    }
}

fn check_grid(grid_n: usize) -> Result<()> {
    if grid_n < 16 {
        return Err(Error::InvalidArgument(format!(
            "test images need grid_n >= 16, got {grid_n}"
        )));
    }
    Ok(())
}

/// Pixel-centre coordinates in `[-1, 1]²`, `v` pointing up.
fn centres(grid_n: usize) -> impl Iterator<Item = (f64, f64)> {
    let n = grid_n as f64;
    (0..grid_n).flat_map(move |r| {
        (0..grid_n).map(move |c| {
            let u = 2.0 * (c as f64 + 0.5) / n - 1.0;
            let v = 1.0 - 2.0 * (r as f64 + 0.5) / n;
            (u, v)
        })
    })
}

/// Modified Shepp–Logan ellipse phantom, shrunk to 85% so it stays clear of
/// the border.
pub fn shepp_phantom(grid_n: usize) -> Result<GridImage> {
    check_grid(grid_n)?;
    // (intensity, semi-axis a, semi-axis b, centre x, centre y, rotation in degrees)
    const ELLIPSES: [(f64, f64, f64, f64, f64, f64); 10] = [
        (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
        (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
        (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
        (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
        (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
        (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
        (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
        (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
        (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
        (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
    ];
    const SHRINK: f64 = 0.85;
    let pixels = centres(grid_n)
        .map(|(u, v)| {
            let (u, v) = (u / SHRINK, v / SHRINK);
            let value: f64 = ELLIPSES
                .iter()
                .filter(|&&(_, a, b, x0, y0, deg)| {
                    let (s, c) = deg.to_radians().sin_cos();
                    let (du, dv) = (u - x0, v - y0);
                    let xr = du * c + dv * s;
                    let yr = -du * s + dv * c;
                    (xr / a).powi(2) + (yr / b).powi(2) <= 1.0
                })
                .map(|e| e.0)
                .sum();
            value.clamp(0.0, 1.0)
        })
        .collect();
    GridImage::new(grid_n, grid_n, pixels)
}

/// Piecewise-smooth image: a plateau, a disk and a tapered Gaussian bump.
pub fn blur_truth(grid_n: usize) -> Result<GridImage> {
    check_grid(grid_n)?;
    let pixels = centres(grid_n)
        .map(|(u, v)| {
            let mut value = 0.0;
            if (-0.7..=-0.1).contains(&u) && (0.1..=0.7).contains(&v) {
                value += 0.5;
            }
            if (u - 0.35).powi(2) + (v + 0.35).powi(2) <= 0.3 * 0.3 {
                value += 0.4;
            }
            let r2 = u * u + v * v;
            if r2 <= 0.8 * 0.8 {
                value += 0.4 * (-r2 / 0.1).exp();
            }
            f64::clamp(value, 0.0, 1.0)
        })
        .collect();
    GridImage::new(grid_n, grid_n, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn support_clear_of_ring(img: &GridImage) -> bool {
        let ring = img.width / 16;
        (0..img.height).all(|r| {
            (0..img.width).all(|c| {
                let inside = r >= ring && r < img.height - ring && c >= ring && c < img.width - ring;
                inside || img.get(r, c) == 0.0
            })
        })
    }

    #[test]
    fn phantoms_in_unit_range_and_deterministic() {
        for n in [16, 32, 64] {
            for make in [shepp_phantom, blur_truth] {
                let a = make(n).unwrap();
                assert!(a.pixels.iter().all(|p| (0.0..=1.0).contains(p)));
                assert!(a.pixels.iter().any(|&p| p > 0.0));
                assert_eq!(a.to_pgm_bytes(), make(n).unwrap().to_pgm_bytes());
                assert!(support_clear_of_ring(&a), "n = {n}");
            }
        }
    }

    #[test]
    fn too_small_grid_rejected() {
        assert!(shepp_phantom(8).is_err());
        assert!(blur_truth(15).is_err());
    }

    #[test]
    fn pgm_round_trip_quantizes_to_16_bits() {
        let img = shepp_phantom(16).unwrap();
        let back = GridImage::from_pgm_bytes(&img.to_pgm_bytes(), Path::new("x.pgm")).unwrap();
        assert_eq!((back.width, back.height), (16, 16));
        for (a, b) in img.pixels.iter().zip(&back.pixels) {
            assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-15);
        }
        let header = &img.to_pgm_bytes()[..15];
        assert_eq!(header, b"P5\n16 16\n65535\n");
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let img = GridImage::new(3, 2, vec![0.1, -2.5, 1e-300, 3.0, 0.0, 1.0 / 3.0]).unwrap();
        let back = GridImage::from_csv(&img.to_csv(), Path::new("x.csv")).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn ragged_csv_rejected() {
        assert!(GridImage::from_csv("1,2\n3\n", Path::new("x.csv")).is_err());
    }
}
