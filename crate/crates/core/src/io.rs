//! File formats: 16-bit grayscale images with a scale sidecar, and raw
//! complex k-space (`KSP1`).
//!
//! Images are quantized as `round(value / value_max * 65535)` and the scale
//! is stored next to the image in `<path>.meta` as a single
//! `value_max=<decimal>` line. KSP1 is a 4-byte magic `KSP1`, little-endian
//! `u32` rows (`n_fe`) and columns (`n_pe`), then row-major interleaved
//! little-endian `f32` real/imaginary pairs.
//!
//! Concurrent writes to the same path are not coordinated.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use image::{ImageBuffer, Luma};
use log::warn;
use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{Image, KSpace};

pub const KSP1_MAGIC: &[u8; 4] = b"KSP1";
const KSP1_HEADER: usize = 12;
const QUANT_MAX: f64 = 65535.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ImageFormat {
    #[default]
    Png16,
    Pgm16,
}

impl ImageFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "png" => Some(ImageFormat::Png16),
            "pgm" => Some(ImageFormat::Pgm16),
            _ => None,
        }
    }
}

impl FromStr for ImageFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "png16" | "png" => Ok(ImageFormat::Png16),
            "pgm16" | "pgm" => Ok(ImageFormat::Pgm16),
            _ => Err(Error::Config(format!("unknown image format '{s}'"))),
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn quantize(image: &Image) -> (f64, Vec<u16>) {
    let max = image.max();
    let value_max = if max > 0.0 { max } else { 1.0 };
    let samples = image
        .data()
        .iter()
        .map(|&v| ((v.clamp(0.0, value_max) / value_max) * QUANT_MAX).round() as u16)
        .collect();
    (value_max, samples)
}

fn encode_pgm16(n_fe: usize, n_pe: usize, samples: &[u16]) -> Vec<u8> {
    let mut out = format!("P5\n{n_pe} {n_fe}\n65535\n").into_bytes();
    out.reserve(samples.len() * 2);
    for s in samples {
        out.extend_from_slice(&s.to_be_bytes());
    }
    out
}

/// Writes a 16-bit grayscale image and its `.meta` sidecar.
pub fn save_image(image: &Image, path: &Path, format: ImageFormat) -> Result<()> {
    let (value_max, samples) = quantize(image);
    let (n_fe, n_pe) = image.dim();
    match format {
        ImageFormat::Png16 => {
            let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
                ImageBuffer::from_raw(n_pe as u32, n_fe as u32, samples)
                    .expect("buffer matches dimensions");
            buf.save_with_format(path, image::ImageFormat::Png)
                .map_err(|source| Error::Codec {
                    path: path.to_owned(),
                    source,
                })?;
        }
        ImageFormat::Pgm16 => {
            fs::write(path, encode_pgm16(n_fe, n_pe, &samples)).map_err(|e| Error::io(path, e))?;
        }
    }
    let meta = sidecar_path(path);
    fs::write(&meta, format!("value_max={value_max:.16e}\n")).map_err(|e| Error::io(&meta, e))
}

fn read_value_max(path: &Path) -> Result<f64> {
    let meta = sidecar_path(path);
    let text = match fs::read_to_string(&meta) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            warn!("{} not found; assuming value_max=1.0", meta.display());
            return Ok(1.0);
        }
        Err(e) => return Err(Error::io(&meta, e)),
    };
    for line in text.lines() {
        if let Some(v) = line.trim().strip_prefix("value_max=") {
            return v
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v > 0.0)
                .ok_or_else(|| Error::Format {
                    path: meta.clone(),
                    offset: 0,
                    msg: format!("bad value_max '{v}'"),
                });
        }
    }
    Err(Error::Format {
        path: meta,
        offset: 0,
        msg: "missing value_max entry".into(),
    })
}

struct PgmReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl PgmReader<'_> {
    fn fail(&self, msg: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.to_owned(),
            offset: self.pos as u64,
            msg: msg.into(),
        }
    }

    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| self.fail("expected an unsigned integer"))
    }
}

fn decode_pgm16(bytes: &[u8], path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let mut rd = PgmReader { bytes, pos: 2, path };
    if !bytes.starts_with(b"P5") {
        rd.pos = 0;
        return Err(rd.fail("missing P5 magic"));
    }
    let width = rd.number()?;
    let height = rd.number()?;
    let maxval = rd.number()?;
    if maxval == 0 || maxval > 65535 {
        return Err(rd.fail(format!("unsupported maxval {maxval}")));
    }
    if rd.pos >= bytes.len() || !bytes[rd.pos].is_ascii_whitespace() {
        return Err(rd.fail("expected whitespace after header"));
    }
    rd.pos += 1;
    let wide = maxval > 255;
    let per = if wide { 2 } else { 1 };
    let need = width * height * per;
    if bytes.len() - rd.pos < need {
        rd.pos = bytes.len();
        return Err(rd.fail(format!("truncated raster, expected {need} bytes")));
    }
    let raster = &bytes[rd.pos..rd.pos + need];
    let scale = 1.0 / maxval as f64;
    let values = if wide {
        raster
            .chunks_exact(2)
            .map(|b| u16::from_be_bytes([b[0], b[1]]) as f64 * scale)
            .collect()
    } else {
        raster.iter().map(|&b| b as f64 * scale).collect()
    };
    Ok((height, width, values))
}

/// Loads a grayscale image, rescaling by the sidecar `value_max` (1.0 when
/// the sidecar is missing).
pub fn load_image(path: &Path) -> Result<Image> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (n_fe, n_pe, unit) = if bytes.starts_with(b"P5") {
        decode_pgm16(&bytes, path)?
    } else {
        let img = image::load_from_memory(&bytes)
            .map_err(|source| Error::Codec {
                path: path.to_owned(),
                source,
            })?
            .into_luma16();
        let (w, h) = img.dimensions();
        let values = img.into_raw().into_iter().map(|v| v as f64 / QUANT_MAX).collect();
        (h as usize, w as usize, values)
    };
    let value_max = read_value_max(path)?;
    Image::from_vec(n_fe, n_pe, unit.into_iter().map(|v| v * value_max).collect())
}

pub fn encode_kspace(kspace: &KSpace) -> Vec<u8> {
    let (n_fe, n_pe) = kspace.dim();
    let mut out = Vec::with_capacity(KSP1_HEADER + n_fe * n_pe * 8);
    out.extend_from_slice(KSP1_MAGIC);
    out.extend_from_slice(&(n_fe as u32).to_le_bytes());
    out.extend_from_slice(&(n_pe as u32).to_le_bytes());
    for v in kspace.data() {
        out.extend_from_slice(&(v.re as f32).to_le_bytes());
        out.extend_from_slice(&(v.im as f32).to_le_bytes());
    }
    out
}

pub fn decode_kspace(bytes: &[u8], path: &Path) -> Result<KSpace> {
    let fail = |offset: usize, msg: String| Error::Format {
        path: path.to_owned(),
        offset: offset as u64,
        msg,
    };
    if bytes.len() < 4 || &bytes[..4] != KSP1_MAGIC {
        return Err(fail(0, "missing KSP1 magic".into()));
    }
    if bytes.len() < KSP1_HEADER {
        return Err(fail(bytes.len(), format!("truncated header, expected {KSP1_HEADER} bytes")));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    let (n_fe, n_pe) = (word(4), word(8));
    if n_fe < 2 || n_pe < 2 {
        return Err(fail(4, format!("invalid grid {n_fe}x{n_pe}")));
    }
    let expected = n_fe
        .checked_mul(n_pe)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(KSP1_HEADER))
        .ok_or_else(|| fail(4, "grid size overflows".into()))?;
    if bytes.len() < expected {
        return Err(fail(bytes.len(), format!("truncated payload, expected {expected} bytes")));
    }
    if bytes.len() > expected {
        return Err(fail(expected, format!("{} trailing bytes", bytes.len() - expected)));
    }
    let float = |at: usize| f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as f64;
    let mut values = Vec::with_capacity(n_fe * n_pe);
    for idx in 0..n_fe * n_pe {
        let at = KSP1_HEADER + idx * 8;
        let v = Complex64::new(float(at), float(at + 4));
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(fail(at, "non-finite sample".into()));
        }
        values.push(v);
    }
    let data = Array2::from_shape_vec((n_fe, n_pe), values).expect("length checked");
    KSpace::from_array(data).map_err(|e| fail(KSP1_HEADER, e.to_string()))
}

pub fn save_kspace(kspace: &KSpace, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode_kspace(kspace)).map_err(|e| Error::io(path, e))
}

pub fn load_kspace(path: &Path) -> Result<KSpace> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_kspace(&bytes, path)
}

/// True when the file at `path` starts with the KSP1 magic.
pub fn is_kspace_file(path: &Path) -> Result<bool> {
    use std::io::Read;
    let mut head = [0u8; 4];
    let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    match f.read_exact(&mut head) {
        Ok(()) => Ok(&head == KSP1_MAGIC),
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => Ok(false),
        Err(e) => Err(Error::io(path, e)),
    }
}
