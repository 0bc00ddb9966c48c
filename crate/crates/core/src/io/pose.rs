use std::fmt::Write as _;
use std::path::Path;

use super::{read_bytes, write_bytes};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const ORTHO_TOL: f64 = 1e-6;
const READ_ORTHO_TOL: f64 = 1e-3;

/// Rigid transform `p -> R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseSE3<T> {
    rotation: [[T; 3]; 3],
    translation: [T; 3],
}

impl<T: Scalar> PoseSE3<T> {
    /// Rejects rotations that are not orthonormal with determinant +1 (within 1e-6).
    pub fn new(rotation: [[T; 3]; 3], translation: [T; 3]) -> Result<Self> {
        let err = orthonormality_error(&rotation);
        if err.is_nan() || err > ORTHO_TOL {
            return Err(Error::arg(format!(
                "rotation is not orthonormal (deviation {err:e})"
            )));
        }
        if translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("translation must be finite"));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Self {
            rotation: [[o, z, z], [z, o, z], [z, z, o]],
            translation: [z; 3],
        }
    }

    pub fn from_translation(t: [T; 3]) -> Self {
        Self {
            translation: t,
            ..Self::identity()
        }
    }

    /// Rotation about +z by `yaw` radians followed by translation `t`.
    pub fn from_yaw_translation(yaw: T, t: [T; 3]) -> Self {
        let (s, c) = yaw.sin_cos();
        let (o, z) = (T::one(), T::zero());
        Self {
            rotation: [[c, -s, z], [s, c, z], [z, z, o]],
            translation: t,
        }
    }

    pub fn rotation(&self) -> &[[T; 3]; 3] {
        &self.rotation
    }

    pub fn translation(&self) -> [T; 3] {
        self.translation
    }

    pub fn apply(&self, p: [T; 3]) -> [T; 3] {
        let r = &self.rotation;
        [0, 1, 2].map(|i| r[i][0] * p[0] + r[i][1] * p[1] + r[i][2] * p[2] + self.translation[i])
    }

    pub fn inverse(&self) -> Self {
        let r = &self.rotation;
        let rt = [0, 1, 2].map(|i| [r[0][i], r[1][i], r[2][i]]);
        let t = self.translation;
        let nt = [0, 1, 2].map(|i| -(rt[i][0] * t[0] + rt[i][1] * t[1] + rt[i][2] * t[2]));
        Self {
            rotation: rt,
            translation: nt,
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        let a = &self.rotation;
        let b = &other.rotation;
        let rotation = [0, 1, 2]
            .map(|i| [0, 1, 2].map(|j| a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j]));
        Self {
            rotation,
            translation: self.apply(other.translation),
        }
    }

    /// Transform taking frame `source` coordinates into frame `target`, given
    /// both poses relative to a common frame: `target⁻¹ ∘ source`.
    pub fn relative(target: &Self, source: &Self) -> Self {
        target.inverse().compose(source)
    }

    pub fn cast<U: Scalar>(&self) -> PoseSE3<U> {
        let c = |v: T| U::lit(v.to_f64_lossy());
        PoseSE3 {
            rotation: self.rotation.map(|row| row.map(c)),
            translation: self.translation.map(c),
        }
    }
}

/// Max of `|RᵀR − I|` entries and `|det R − 1|`.
fn orthonormality_error<T: Scalar>(r: &[[T; 3]; 3]) -> f64 {
    let m = r.map(|row| row.map(|v| v.to_f64_lossy()));
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    let mut err: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let dot: f64 = (0..3).map(|k| m[k][i] * m[k][j]).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            err = err.max((dot - target).abs());
        }
    }
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    err.max((det - 1.0).abs())
}

/// Gram-Schmidt on the rows; used for rotations printed with limited digits.
fn orthonormalize(r: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let norm = |v: [f64; 3]| {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        v.map(|x| x / n)
    };
    let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let r0 = norm(r[0]);
    let d = dot(r[1], r0);
    let r1 = norm([0, 1, 2].map(|i| r[1][i] - d * r0[i]));
    let r2 = [
        r0[1] * r1[2] - r0[2] * r1[1],
        r0[2] * r1[0] - r0[0] * r1[2],
        r0[0] * r1[1] - r0[1] * r1[0],
    ];
    [r0, r1, r2]
}

/// Parses KITTI odometry poses: one row-major 3x4 matrix per nonempty line.
///
/// Rotations deviating from orthonormal by more than 1e-6 but at most 1e-3
/// are re-orthonormalized; larger deviations are data errors.
pub fn decode_poses(text: &str) -> Result<Vec<PoseSE3<f64>>> {
    let mut poses = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 12 {
            return Err(Error::FormatLine {
                line: line_no,
                msg: format!("expected 12 numbers, found {}", fields.len()),
            });
        }
        let mut v = [0f64; 12];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f.parse().map_err(|_| Error::FormatLine {
                line: line_no,
                msg: format!("invalid number {f:?}"),
            })?;
            if !slot.is_finite() {
                return Err(Error::Data {
                    index: poses.len(),
                    msg: format!("non-finite value on line {line_no}"),
                });
            }
        }
        let mut rotation = [[v[0], v[1], v[2]], [v[4], v[5], v[6]], [v[8], v[9], v[10]]];
        let translation = [v[3], v[7], v[11]];
        let err = orthonormality_error(&rotation);
        if err > READ_ORTHO_TOL {
            return Err(Error::Data {
                index: poses.len(),
                msg: format!("rotation on line {line_no} is not orthonormal (deviation {err:e})"),
            });
        }
        if err > ORTHO_TOL {
            rotation = orthonormalize(rotation);
        }
        poses.push(
            PoseSE3::new(rotation, translation).map_err(|e| Error::Data {
                index: poses.len(),
                msg: e.to_string(),
            })?,
        );
    }
    Ok(poses)
}

/// Shortest round-trip decimal representation, one pose per line.
pub fn encode_poses(poses: &[PoseSE3<f64>]) -> String {
    let mut out = String::new();
    for p in poses {
        let r = p.rotation();
        let t = p.translation();
        let vals = [
            r[0][0], r[0][1], r[0][2], t[0], r[1][0], r[1][1], r[1][2], t[1], r[2][0], r[2][1],
            r[2][2], t[2],
        ];
        let line: Vec<String> = vals.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

pub fn read_poses(path: impl AsRef<Path>) -> Result<Vec<PoseSE3<f64>>> {
    let bytes = read_bytes(path.as_ref())?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| Error::format(e.valid_up_to() as u64, "pose file is not UTF-8"))?;
    decode_poses(text)
}

pub fn write_poses(poses: &[PoseSE3<f64>], path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), encode_poses(poses).as_bytes())
}
