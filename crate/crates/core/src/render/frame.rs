use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PpmError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("malformed P6 header: {0}")]
    Header(String),
    #[error("truncated pixel data: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
}

/// An 8-bit, 3-channel image stored row-major in blue, green, red order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl Frame {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            pixels: vec![0; width as usize * height as usize * 3],
        }
    }

    /// Wraps a BGR buffer; returns `None` if its length is not `w * h * 3`.
    pub fn from_bgr(width: u32, height: u32, pixels: Vec<u8>) -> Option<Self> {
        (pixels.len() == width as usize * height as usize * 3).then_some(Self { width, height, pixels })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn as_bgr(&self) -> &[u8] {
        &self.pixels
    }

    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 3
    }

    /// `[b, g, r]` at column `x`, row `y`.
    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let o = self.offset(x, y);
        [self.pixels[o], self.pixels[o + 1], self.pixels[o + 2]]
    }

    pub fn set(&mut self, x: u32, y: u32, bgr: [u8; 3]) {
        let o = self.offset(x, y);
        self.pixels[o..o + 3].copy_from_slice(&bgr);
    }

    /// Bilinear sample at continuous pixel coordinates (pixel centers at
    /// `i + 0.5`). Returns `None` outside the frame.
    pub fn sample_bilinear(&self, u: f64, v: f64) -> Option<[f64; 3]> {
        let (w, h) = (self.width as f64, self.height as f64);
        if !(0.0..=w).contains(&u) || !(0.0..=h).contains(&v) {
            return None;
        }
        let fx = (u - 0.5).clamp(0.0, w - 1.0);
        let fy = (v - 0.5).clamp(0.0, h - 1.0);
        let x0 = fx.floor() as u32;
        let y0 = fy.floor() as u32;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let (ax, ay) = (fx - x0 as f64, fy - y0 as f64);
        let mut out = [0.0; 3];
        let corners = [
            (x0, y0, (1.0 - ax) * (1.0 - ay)),
            (x1, y0, ax * (1.0 - ay)),
            (x0, y1, (1.0 - ax) * ay),
            (x1, y1, ax * ay),
        ];
        for (x, y, wgt) in corners {
            let px = self.get(x, y);
            for c in 0..3 {
                out[c] += wgt * px[c] as f64;
            }
        }
        Some(out)
    }

    /// Area-averaging resize (bilinear when upsampling).
    pub fn resize(&self, width: u32, height: u32) -> Frame {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let mut out = Frame::new(width, height);
        for y in 0..height {
            for x in 0..width {
                let px = if sx >= 1.0 && sy >= 1.0 {
                    self.box_average(x as f64 * sx, y as f64 * sy, sx, sy)
                } else {
                    self.sample_bilinear((x as f64 + 0.5) * sx, (y as f64 + 0.5) * sy)
                        .unwrap_or([0.0; 3])
                };
                out.set(x, y, px.map(|c| c.round().clamp(0.0, 255.0) as u8));
            }
        }
        out
    }

    fn box_average(&self, u0: f64, v0: f64, sx: f64, sy: f64) -> [f64; 3] {
        let mut acc = [0.0; 3];
        let mut total = 0.0;
        let (u1, v1) = (u0 + sx, v0 + sy);
        for y in v0.floor() as u32..(v1.ceil() as u32).min(self.height) {
            let wy = (v1.min(y as f64 + 1.0) - v0.max(y as f64)).max(0.0);
            for x in u0.floor() as u32..(u1.ceil() as u32).min(self.width) {
                let wx = (u1.min(x as f64 + 1.0) - u0.max(x as f64)).max(0.0);
                let wgt = wx * wy;
                let px = self.get(x, y);
                for c in 0..3 {
                    acc[c] += wgt * px[c] as f64;
                }
                total += wgt;
            }
        }
        acc.map(|a| a / total)
    }

    /// Writes a binary portable pixmap (P6, RGB byte order on disk).
    pub fn write_ppm<W: Write>(&self, mut out: W) -> io::Result<()> {
        write!(out, "P6\n{} {}\n255\n", self.width, self.height)?;
        let mut rgb = Vec::with_capacity(self.pixels.len());
        for px in self.pixels.chunks_exact(3) {
            rgb.extend_from_slice(&[px[2], px[1], px[0]]);
        }
        out.write_all(&rgb)
    }

    pub fn save_ppm(&self, path: impl AsRef<Path>) -> io::Result<()> {
        let file = std::fs::File::create(path)?;
        let mut writer = io::BufWriter::new(file);
        self.write_ppm(&mut writer)?;
        writer.flush()
    }

    pub fn read_ppm<R: Read>(input: R) -> Result<Frame, PpmError> {
        let mut reader = BufReader::new(input);
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            let token = read_token(&mut reader)?;
            if token.is_empty() {
                return Err(PpmError::Header("unexpected end of header".into()));
            }
            fields.push(token);
        }
        if fields[0] != "P6" {
            return Err(PpmError::Header(format!("bad magic {:?}", fields[0])));
        }
        let parse = |s: &str| {
            s.parse::<u32>()
                .map_err(|_| PpmError::Header(format!("bad number {s:?}")))
        };
        let (width, height, maxval) = (parse(&fields[1])?, parse(&fields[2])?, parse(&fields[3])?);
        if maxval != 255 {
            return Err(PpmError::Header(format!("unsupported maxval {maxval}")));
        }
        let expected = width as usize * height as usize * 3;
        let mut rgb = Vec::with_capacity(expected);
        reader.take(expected as u64).read_to_end(&mut rgb)?;
        if rgb.len() != expected {
            return Err(PpmError::Truncated {
                expected,
                got: rgb.len(),
            });
        }
        for px in rgb.chunks_exact_mut(3) {
            px.swap(0, 2);
        }
        Ok(Frame {
            width,
            height,
            pixels: rgb,
        })
    }

    pub fn load_ppm(path: impl AsRef<Path>) -> Result<Frame, PpmError> {
        Frame::read_ppm(std::fs::File::open(path)?)
    }
}

/// Reads one whitespace-delimited header token, skipping `#` comments. The
/// single whitespace byte after the token is consumed.
fn read_token<R: BufRead>(reader: &mut R) -> io::Result<String> {
    let mut token = String::new();
    let mut byte = [0u8; 1];
    loop {
        if reader.read(&mut byte)? == 0 {
            return Ok(token);
        }
        let b = byte[0];
        if b == b'#' && token.is_empty() {
            let mut skip = Vec::new();
            reader.read_until(b'\n', &mut skip)?;
            continue;
        }
        if b.is_ascii_whitespace() {
            if token.is_empty() {
                continue;
            }
            return Ok(token);
        }
        token.push(b as char);
    }
}
