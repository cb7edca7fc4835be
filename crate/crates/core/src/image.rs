//! Row-major 8-bit grayscale frames and binary PGM I/O.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// A row-major grayscale image with intensities in `[0, 255]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Parameter(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::Parameter(format!(
                "image data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn map(&self, f: impl Fn(u8) -> u8) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Copies the `w`x`h` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(Error::Parameter(format!(
                "crop window ({x0},{y0},{w},{h}) exceeds {}x{}",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            let row = y * self.width;
            data.extend_from_slice(&self.data[row + x0..row + x0 + w]);
        }
        Self::new(w, h, data)
    }

    /// Rotates the image by 90° clockwise.
    pub fn rotate90(&self) -> Self {
        let (w, h) = (self.width, self.height);
        let mut data = vec![0u8; w * h];
        // new image is h wide and w tall; (x, y) -> (h - 1 - y, x)
        for y in 0..h {
            for x in 0..w {
                let nx = h - 1 - y;
                let ny = x;
                data[ny * h + nx] = self.data[y * w + x];
            }
        }
        Self {
            width: h,
            height: w,
            data,
        }
    }

    pub fn flip_horizontal(&self) -> Self {
        let (w, h) = (self.width, self.height);
        let mut data = vec![0u8; w * h];
        for y in 0..h {
            for x in 0..w {
                data[y * w + (w - 1 - x)] = self.data[y * w + x];
            }
        }
        Self {
            width: w,
            height: h,
            data,
        }
    }

    pub fn flip_vertical(&self) -> Self {
        let (w, h) = (self.width, self.height);
        let mut data = vec![0u8; w * h];
        for y in 0..h {
            data[(h - 1 - y) * w..(h - y) * w].copy_from_slice(&self.data[y * w..(y + 1) * w]);
        }
        Self {
            width: w,
            height: h,
            data,
        }
    }

    /// Serializes as binary PGM (`P5`, maxval 255).
    pub fn write_pgm(&self, mut out: impl Write) -> std::io::Result<()> {
        write!(out, "P5\n{} {}\n255\n", self.width, self.height)?;
        out.write_all(&self.data)
    }

    pub fn save_pgm(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_pgm(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load_pgm(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_pgm(BufReader::new(file), path)
    }

    fn read_pgm(mut reader: impl BufRead, path: &Path) -> Result<Self> {
        let mut tokens = Vec::with_capacity(4);
        let mut line = String::new();
        let mut line_no = 0;
        while tokens.len() < 4 {
            line.clear();
            line_no += 1;
            let n = reader
                .read_line(&mut line)
                .map_err(|e| Error::io(path, e))?;
            if n == 0 {
                return Err(Error::malformed(path, line_no, "truncated PGM header"));
            }
            let content = line.split('#').next().unwrap_or("");
            tokens.extend(content.split_whitespace().map(str::to_owned));
        }
        if tokens[0] != "P5" {
            return Err(Error::malformed(path, 1, "expected binary PGM magic P5"));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::malformed(path, line_no, format!("bad header field {s:?}")))
        };
        let width = parse(&tokens[1])?;
        let height = parse(&tokens[2])?;
        let maxval = parse(&tokens[3])?;
        if maxval != 255 {
            return Err(Error::malformed(path, line_no, "only maxval 255 is supported"));
        }
        let mut data = vec![0u8; width * height];
        reader
            .read_exact(&mut data)
            .map_err(|_| Error::malformed(path, line_no + 1, "truncated PGM raster"))?;
        Self::new(width, height, data)
    }
}
