use std::path::Path;

use super::{read_bytes, write_bytes};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const POINT_RECORD: usize = 16;

/// `N` points in meters with optional per-point intensity.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud<T> {
    points: Vec<[T; 3]>,
    intensity: Option<Vec<T>>,
}

impl<T: Scalar> PointCloud<T> {
    pub fn new(points: Vec<[T; 3]>, intensity: Option<Vec<T>>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::Data {
                index: i,
                msg: "non-finite coordinate".into(),
            });
        }
        if let Some(int) = &intensity {
            if int.len() != points.len() {
                return Err(Error::arg(format!(
                    "{} intensities for {} points",
                    int.len(),
                    points.len()
                )));
            }
        }
        Ok(Self { points, intensity })
    }

    pub fn points(&self) -> &[[T; 3]] {
        &self.points
    }

    pub fn intensity(&self) -> Option<&[T]> {
        self.intensity.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn cast<U: Scalar>(&self) -> PointCloud<U> {
        let conv = |v: T| U::lit(v.to_f64_lossy());
        PointCloud {
            points: self.points.iter().map(|p| p.map(conv)).collect(),
            intensity: self
                .intensity
                .as_ref()
                .map(|i| i.iter().copied().map(conv).collect()),
        }
    }

    /// Points whose semantic label equals `class`, in original order.
    pub fn select(&self, semantic: &[u16], class: u16) -> Vec<[T; 3]> {
        self.points
            .iter()
            .zip(semantic)
            .filter(|(_, &l)| l == class)
            .map(|(p, _)| *p)
            .collect()
    }
}

pub fn decode_point_cloud(bytes: &[u8]) -> Result<PointCloud<f32>> {
    if !bytes.len().is_multiple_of(POINT_RECORD) {
        let offset = bytes.len() - bytes.len() % POINT_RECORD;
        return Err(Error::format(
            offset as u64,
            format!(
                "truncated point record ({} trailing bytes)",
                bytes.len() - offset
            ),
        ));
    }
    let n = bytes.len() / POINT_RECORD;
    let mut points = Vec::with_capacity(n);
    let mut intensity = Vec::with_capacity(n);
    for rec in bytes.chunks_exact(POINT_RECORD) {
        let f = |i: usize| {
            f32::from_le_bytes([rec[4 * i], rec[4 * i + 1], rec[4 * i + 2], rec[4 * i + 3]])
        };
        points.push([f(0), f(1), f(2)]);
        intensity.push(f(3));
    }
    PointCloud::new(points, Some(intensity))
}

/// Missing intensity is written as 0.
pub fn encode_point_cloud(pc: &PointCloud<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(pc.len() * POINT_RECORD);
    for (i, p) in pc.points().iter().enumerate() {
        let int = pc.intensity().map_or(0.0, |v| v[i]);
        for v in [p[0], p[1], p[2], int] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn read_point_cloud(path: impl AsRef<Path>) -> Result<PointCloud<f32>> {
    decode_point_cloud(&read_bytes(path.as_ref())?)
}

pub fn write_point_cloud(pc: &PointCloud<f32>, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_point_cloud(pc))
}

/// Per-point semantic class and panoptic instance id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FrameLabels {
    pub semantic: Vec<u16>,
    pub instance: Vec<u16>,
}

impl FrameLabels {
    pub fn new(semantic: Vec<u16>, instance: Vec<u16>) -> Result<Self> {
        if semantic.len() != instance.len() {
            return Err(Error::arg(format!(
                "{} semantic ids but {} instance ids",
                semantic.len(),
                instance.len()
            )));
        }
        Ok(Self { semantic, instance })
    }

    pub fn len(&self) -> usize {
        self.semantic.len()
    }

    pub fn is_empty(&self) -> bool {
        self.semantic.is_empty()
    }

    /// Recombined 32-bit label word: `instance << 16 | semantic`.
    pub fn word(&self, i: usize) -> u32 {
        (u32::from(self.instance[i]) << 16) | u32::from(self.semantic[i])
    }

    pub fn from_words(words: impl IntoIterator<Item = u32>) -> Self {
        let (semantic, instance) = words
            .into_iter()
            .map(|w| ((w & 0xFFFF) as u16, (w >> 16) as u16))
            .unzip();
        Self { semantic, instance }
    }

    /// Applies a raw-to-train id mapping to the semantic channel.
    pub fn remap(&mut self, map: impl Fn(u16) -> u16) {
        for s in &mut self.semantic {
            *s = map(*s);
        }
    }

    /// Checks the pairing with a point cloud and the label range.
    pub fn validate_for<T: Scalar>(
        &self,
        pc: &PointCloud<T>,
        num_classes: u16,
        ignore: u16,
    ) -> Result<()> {
        if self.len() != pc.len() {
            return Err(Error::arg(format!(
                "{} labels for {} points",
                self.len(),
                pc.len()
            )));
        }
        if let Some(i) = self
            .semantic
            .iter()
            .position(|&s| s >= num_classes && s != ignore)
        {
            return Err(Error::Data {
                index: i,
                msg: format!("semantic id {} out of range", self.semantic[i]),
            });
        }
        Ok(())
    }
}

pub fn decode_labels(bytes: &[u8]) -> Result<FrameLabels> {
    if !bytes.len().is_multiple_of(4) {
        let offset = bytes.len() - bytes.len() % 4;
        return Err(Error::format(offset as u64, "truncated label word"));
    }
    Ok(FrameLabels::from_words(
        bytes
            .chunks_exact(4)
            .map(|w| u32::from_le_bytes([w[0], w[1], w[2], w[3]])),
    ))
}

pub fn encode_labels(labels: &FrameLabels) -> Vec<u8> {
    (0..labels.len())
        .flat_map(|i| labels.word(i).to_le_bytes())
        .collect()
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<FrameLabels> {
    decode_labels(&read_bytes(path.as_ref())?)
}

pub fn write_labels(labels: &FrameLabels, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_labels(labels))
}
