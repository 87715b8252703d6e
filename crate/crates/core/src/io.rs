//! Binary on-disk formats. All integers and floats are little-endian; complex
//! payloads are interleaved `(re, im)` 64-bit floats.
//!
//! Complex image stack (`.cimg`, images and coil maps):
//!
//! ```text
//! "JRCIMG\0\0" | version u32 = 1 | width u32 | height u32 | count u32 | payload
//! ```
//!
//! K-space (`.ksp`):
//!
//! ```text
//! "JRKSPC\0\0" | version u32 = 1 | num_coils u32 | num_coords u64 | noise_std f64 | payload
//! ```
//!
//! Trajectory (`.traj`):
//!
//! ```text
//! "JRTRAJ\0\0" | version u32 = 1 | n u32 | etl u32 | accel f64 | num_trs u32
//!   | per TR: line count u32, line indices u32...
//!   | num_coords u64 | (kx f64, ky f64)...
//! ```

use num_complex::Complex64;
use std::path::Path;

use crate::acquisition::KSpaceData;
use crate::gridmath::{ComplexImage, KCoords};
use crate::phantom::{CoilMaps, SampledTrajectory};
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const IMAGE_MAGIC: &[u8; 8] = b"JRCIMG\0\0";
pub const KSPACE_MAGIC: &[u8; 8] = b"JRKSPC\0\0";
pub const TRAJECTORY_MAGIC: &[u8; 8] = b"JRTRAJ\0\0";

/// Cursor over a little-endian byte buffer.
pub struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < len {
            return Err(Error::Format("unexpected end of file".into()));
        }
        let out = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn complex(&mut self) -> Result<Complex64> {
        Ok(Complex64::new(self.f64()?, self.f64()?))
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

fn put_complex(out: &mut Vec<u8>, values: &[Complex64]) {
    for v in values {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
}

fn header(out: &mut Vec<u8>, magic: &[u8; 8]) {
    out.extend_from_slice(magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
}

fn check_header(r: &mut ByteReader<'_>, magic: &[u8; 8], what: &str) -> Result<()> {
    if r.take(8)? != magic {
        return Err(Error::Format(format!("bad magic for {what} file")));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported {what} format version {version}")));
    }
    Ok(())
}

pub fn encode_images(images: &[ComplexImage]) -> Result<Vec<u8>> {
    let n = images.first().map(|i| i.side()).unwrap_or(0);
    if images.iter().any(|i| i.side() != n) {
        return Err(Error::Dimension("images in a stack must share a size".into()));
    }
    let mut out = Vec::with_capacity(28 + images.len() * n * n * 16);
    header(&mut out, IMAGE_MAGIC);
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&(images.len() as u32).to_le_bytes());
    for img in images {
        put_complex(&mut out, img.data());
    }
    Ok(out)
}

pub fn decode_images(bytes: &[u8]) -> Result<Vec<ComplexImage>> {
    let mut r = ByteReader::new(bytes);
    check_header(&mut r, IMAGE_MAGIC, "image")?;
    let width = r.u32()? as usize;
    let height = r.u32()? as usize;
    let count = r.u32()? as usize;
    let mut images = Vec::with_capacity(count.min(4096));
    for _ in 0..count {
        let data = (0..width * height).map(|_| r.complex()).collect::<Result<Vec<_>>>()?;
        images.push(ComplexImage::from_vec(width, height, data)?);
    }
    r.finish()?;
    Ok(images)
}

pub fn encode_image(image: &ComplexImage) -> Vec<u8> {
    encode_images(std::slice::from_ref(image)).expect("single image")
}

pub fn decode_image(bytes: &[u8]) -> Result<ComplexImage> {
    let mut images = decode_images(bytes)?;
    if images.len() != 1 {
        return Err(Error::Format(format!("expected one image, found {}", images.len())));
    }
    Ok(images.remove(0))
}

pub fn encode_kspace(y: &KSpaceData) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + y.samples.len() * 16);
    header(&mut out, KSPACE_MAGIC);
    out.extend_from_slice(&(y.num_coils as u32).to_le_bytes());
    out.extend_from_slice(&(y.num_coords() as u64).to_le_bytes());
    out.extend_from_slice(&y.noise_std.to_le_bytes());
    put_complex(&mut out, &y.samples);
    out
}

pub fn decode_kspace(bytes: &[u8]) -> Result<KSpaceData> {
    let mut r = ByteReader::new(bytes);
    check_header(&mut r, KSPACE_MAGIC, "k-space")?;
    let num_coils = r.u32()? as usize;
    let num_coords = r.u64()? as usize;
    let noise_std = r.f64()?;
    let total = num_coils
        .checked_mul(num_coords)
        .ok_or_else(|| Error::Format("k-space header overflows".into()))?;
    let samples = (0..total).map(|_| r.complex()).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    KSpaceData::new(samples, num_coils, noise_std)
}

pub fn encode_trajectory(t: &SampledTrajectory) -> Vec<u8> {
    let mut out = Vec::new();
    header(&mut out, TRAJECTORY_MAGIC);
    out.extend_from_slice(&(t.n as u32).to_le_bytes());
    out.extend_from_slice(&(t.etl as u32).to_le_bytes());
    out.extend_from_slice(&t.accel.to_le_bytes());
    out.extend_from_slice(&(t.num_trs() as u32).to_le_bytes());
    for lines in &t.tr_lines {
        out.extend_from_slice(&(lines.len() as u32).to_le_bytes());
        for &l in lines {
            out.extend_from_slice(&(l as u32).to_le_bytes());
        }
    }
    out.extend_from_slice(&(t.coords.len() as u64).to_le_bytes());
    for k in t.coords.iter() {
        out.extend_from_slice(&k[0].to_le_bytes());
        out.extend_from_slice(&k[1].to_le_bytes());
    }
    out
}

pub fn decode_trajectory(bytes: &[u8]) -> Result<SampledTrajectory> {
    let mut r = ByteReader::new(bytes);
    check_header(&mut r, TRAJECTORY_MAGIC, "trajectory")?;
    let n = r.u32()? as usize;
    let etl = r.u32()? as usize;
    let accel = r.f64()?;
    let num_trs = r.u32()? as usize;
    let mut tr_lines = Vec::with_capacity(num_trs.min(1 << 16));
    let mut tr_boundaries = Vec::with_capacity(num_trs.min(1 << 16));
    let mut start = 0;
    for _ in 0..num_trs {
        let count = r.u32()? as usize;
        let lines = (0..count).map(|_| r.u32().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        tr_boundaries.push(start..start + count * n);
        start += count * n;
        tr_lines.push(lines);
    }
    let num_coords = r.u64()? as usize;
    if num_coords != start {
        return Err(Error::Format(format!("trajectory holds {num_coords} coordinates, TR table implies {start}")));
    }
    let coords = (0..num_coords).map(|_| Ok([r.f64()?, r.f64()?])).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    Ok(SampledTrajectory { n, etl, accel, coords: KCoords::new(coords), tr_boundaries, tr_lines })
}

pub fn write_bytes(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn save_image(path: impl AsRef<Path>, image: &ComplexImage) -> Result<()> {
    write_bytes(path, &encode_image(image))
}

pub fn load_image(path: impl AsRef<Path>) -> Result<ComplexImage> {
    decode_image(&std::fs::read(path)?)
}

pub fn save_coil_maps(path: impl AsRef<Path>, maps: &CoilMaps) -> Result<()> {
    write_bytes(path, &encode_images(&maps.maps)?)
}

pub fn load_coil_maps(path: impl AsRef<Path>) -> Result<CoilMaps> {
    CoilMaps::new(decode_images(&std::fs::read(path)?)?)
}

pub fn save_kspace(path: impl AsRef<Path>, y: &KSpaceData) -> Result<()> {
    write_bytes(path, &encode_kspace(y))
}

pub fn load_kspace(path: impl AsRef<Path>) -> Result<KSpaceData> {
    decode_kspace(&std::fs::read(path)?)
}

pub fn save_trajectory(path: impl AsRef<Path>, t: &SampledTrajectory) -> Result<()> {
    write_bytes(path, &encode_trajectory(t))
}

pub fn load_trajectory(path: impl AsRef<Path>) -> Result<SampledTrajectory> {
    decode_trajectory(&std::fs::read(path)?)
}
