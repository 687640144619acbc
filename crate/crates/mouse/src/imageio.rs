//! Binary depth/label image files and the JSON ground-truth sidecar.
//!
//! Both image kinds share a little-endian header: 4-byte magic, `u32`
//! width, `u32` height, `f32` millimetres per stored unit. Depth pixels
//! follow row-major as `u16` units; label pixels as `u8` class ids.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::render::{DepthImage, LabelImage, PartLabel};
use crate::skeleton::SkeletonPose;
use crate::synth::SyntheticImage;

pub const DEPTH_MAGIC: &[u8; 4] = b"DFDP";
pub const LABEL_MAGIC: &[u8; 4] = b"DFLB";
/// Default depth quantum: 0.05 mm, so 600 mm is 12000 units.
pub const DEFAULT_DEPTH_SCALE: f32 = 0.05;

fn write_header<W: Write>(w: &mut W, magic: &[u8; 4], width: usize, height: usize, scale: f32) -> Result<()> {
    w.write_all(magic)?;
    w.write_u32::<LittleEndian>(width as u32)?;
    w.write_u32::<LittleEndian>(height as u32)?;
    w.write_f32::<LittleEndian>(scale)?;
    Ok(())
}

fn read_header<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<(usize, usize, f32)> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m).map_err(|_| Error::Format("file too short for a header".into()))?;
    if &m != magic {
        return Err(Error::Format(format!(
            "expected magic {:?}, found {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(&m)
        )));
    }
    let short = |_| Error::Format("truncated header".into());
    let w = r.read_u32::<LittleEndian>().map_err(short)? as usize;
    let h = r.read_u32::<LittleEndian>().map_err(short)? as usize;
    let scale = r.read_f32::<LittleEndian>().map_err(short)?;
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Format(format!("invalid scale {scale}")));
    }
    Ok((w, h, scale))
}

/// Quantise to `scale` mm units. Foreground values never round onto the
/// background unit.
pub fn write_depth(image: &DepthImage, scale: f32, path: &Path) -> Result<()> {
    let bg_units = (image.background / scale).round();
    if !(bg_units <= f32::from(u16::MAX)) {
        return Err(Error::Format(format!(
            "background {} mm does not fit 16 bits at {scale} mm per unit",
            image.background
        )));
    }
    let bg_units = bg_units as u16;
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, DEPTH_MAGIC, image.width, image.height, scale)?;
    for &d in &image.values {
        let units = if d < image.background {
            ((d / scale).round() as u16).min(bg_units.saturating_sub(1))
        } else {
            bg_units
        };
        w.write_u16::<LittleEndian>(units)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a depth file; pixels at `background` (after quantisation) are
/// background.
pub fn read_depth(path: &Path, background: f32) -> Result<DepthImage> {
    let mut r = BufReader::new(File::open(path)?);
    let (width, height, scale) = read_header(&mut r, DEPTH_MAGIC)?;
    let bg_units = (background / scale).round() as u16;
    let mut values = Vec::with_capacity(width * height);
    for _ in 0..width * height {
        let u = r
            .read_u16::<LittleEndian>()
            .map_err(|_| Error::Format("truncated depth data".into()))?;
        values.push(if u >= bg_units { background } else { f32::from(u) * scale });
    }
    Ok(DepthImage {
        width,
        height,
        values,
        background,
    })
}

pub fn write_labels(image: &LabelImage, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, LABEL_MAGIC, image.width, image.height, 1.0)?;
    let bytes: Vec<u8> = image.values.iter().map(|l| l.id()).collect();
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

pub fn read_labels(path: &Path) -> Result<LabelImage> {
    let mut r = BufReader::new(File::open(path)?);
    let (width, height, _) = read_header(&mut r, LABEL_MAGIC)?;
    let mut bytes = vec![0u8; width * height];
    r.read_exact(&mut bytes)
        .map_err(|_| Error::Format("truncated label data".into()))?;
    let values = bytes
        .into_iter()
        .map(|b| PartLabel::from_id(b).ok_or_else(|| Error::Format(format!("unknown class id {b}"))))
        .collect::<Result<_>>()?;
    Ok(LabelImage { width, height, values })
}

/// Ground truth stored next to each image pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Sidecar {
    pub joints: Vec<[f64; 3]>,
    pub camera: Camera,
    pub pose: SkeletonPose,
    pub noise_sigma: f64,
}

impl Sidecar {
    pub fn new(image: &SyntheticImage, camera: &Camera, noise_sigma: f64) -> Self {
        Sidecar {
            joints: image.joints.iter().map(|p| [p.x, p.y, p.z]).collect(),
            camera: *camera,
            pose: image.pose.clone(),
            noise_sigma,
        }
    }

    pub fn joint_points(&self) -> Vec<Point3<f64>> {
        self.joints.iter().map(|&p| Point3::from(p)).collect()
    }
}

pub fn write_sidecar(sidecar: &Sidecar, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, sidecar)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}
