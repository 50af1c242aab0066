//! `HPMOT1` motion files.
//!
//! ```text
//! magic     6 bytes  "HPMOT1"
//! fps       f32
//! n_frames  u32
//! name_len  u16
//! name      name_len bytes, UTF-8
//! frames    n_frames × 852-byte records:
//!             52 × (w, x, y, z) f32   pelvis + 21 body joints, then 30 hand joints
//!             root translation 3 × f32
//!             timestamp f64
//! ```
//! All values little-endian.

use std::path::Path;

use nalgebra::Vector3;

use super::skeleton::{NUM_BODY_JOINTS, NUM_HAND_JOINTS};
use super::{HumanPoseFrame, MotionSequence};
use crate::codec::{read_file, write_file, Reader, Writer};
use crate::error::{Error, Result};
use crate::rotation::Rotation;

pub const MOTION_MAGIC: &[u8; 6] = b"HPMOT1";
pub const QUATS_PER_FRAME: usize = NUM_BODY_JOINTS + NUM_HAND_JOINTS;
pub const FRAME_RECORD_SIZE: usize = QUATS_PER_FRAME * 16 + 12 + 8;

/// Stored quaternions further than this from unit norm mean a misaligned record.
const NORM_TOLERANCE: f64 = 1e-3;

pub fn header_size(name: &str) -> usize {
    MOTION_MAGIC.len() + 4 + 4 + 2 + name.len()
}

pub fn write_motion(seq: &MotionSequence) -> Result<Vec<u8>> {
    let name_len = u16::try_from(seq.name.len())
        .map_err(|_| Error::InvalidArgument("motion name longer than 65535 bytes".into()))?;
    let mut w = Writer::default();
    w.buf.reserve(header_size(&seq.name) + seq.len() * FRAME_RECORD_SIZE);
    w.bytes(MOTION_MAGIC);
    w.f32(seq.fps() as f32);
    w.u32(seq.len() as u32);
    w.u16(name_len);
    w.bytes(seq.name.as_bytes());
    for (i, f) in seq.frames().iter().enumerate() {
        f.check_dims(i)?;
        for r in f.body.iter().chain(&f.hands) {
            for c in r.quaternion() {
                w.f32(c as f32);
            }
        }
        for c in f.root_translation.iter() {
            w.f32(*c as f32);
        }
        w.f64(f.timestamp);
    }
    Ok(w.buf)
}

pub fn read_motion(bytes: &[u8], source: &str) -> Result<MotionSequence> {
    let mut r = Reader::new(bytes);
    r.magic(MOTION_MAGIC)?;
    let fps_at = r.offset();
    let fps = r.f32("fps")? as f64;
    if !(fps.is_finite() && fps > 0.0) {
        return Err(Error::Parse {
            offset: fps_at,
            message: format!("fps must be positive, got {fps}"),
        });
    }
    let n_frames = r.u32("frame count")? as usize;
    let name_len = r.u16("name length")? as usize;
    let name = r.string(name_len, "name")?;
    if n_frames < 2 {
        return Err(r.err(format!("a motion needs at least 2 frames, header says {n_frames}")));
    }

    let mut frames = Vec::with_capacity(n_frames.min(r.remaining() / FRAME_RECORD_SIZE + 1));
    for k in 0..n_frames {
        if r.remaining() < FRAME_RECORD_SIZE {
            return Err(Error::FrameDimension {
                frame: k,
                message: format!(
                    "record truncated: {} bytes left, {FRAME_RECORD_SIZE} expected",
                    r.remaining()
                ),
            });
        }
        let mut rots = Vec::with_capacity(QUATS_PER_FRAME);
        for j in 0..QUATS_PER_FRAME {
            let mut q = [0.0f64; 4];
            for c in &mut q {
                *c = r.f32("quaternion")? as f64;
            }
            let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::FrameDimension {
                    frame: k,
                    message: format!(
                        "joint slot {j} does not hold a unit quaternion (norm {norm}); \
                         record length does not match {NUM_BODY_JOINTS} body + {NUM_HAND_JOINTS} hand joints"
                    ),
                });
            }
            rots.push(Rotation::from_quaternion_raw(q));
        }
        let hands = rots.split_off(NUM_BODY_JOINTS);
        let tx = r.f32("translation")? as f64;
        let ty = r.f32("translation")? as f64;
        let tz = r.f32("translation")? as f64;
        let ts_at = r.offset();
        let timestamp = r.f64("timestamp")?;
        if !timestamp.is_finite() || ![tx, ty, tz].iter().all(|v| v.is_finite()) {
            return Err(Error::Parse {
                offset: ts_at,
                message: format!("frame {k} has non-finite values"),
            });
        }
        if let Some(prev) = frames.last().map(|f: &HumanPoseFrame| f.timestamp) {
            if timestamp <= prev {
                return Err(Error::Parse {
                    offset: ts_at,
                    message: format!("frame {k} timestamp {timestamp} not after {prev}"),
                });
            }
        }
        frames.push(HumanPoseFrame {
            body: rots,
            hands,
            root_translation: Vector3::new(tx, ty, tz),
            timestamp,
        });
    }
    if r.remaining() != 0 {
        return Err(r.err(format!("{} trailing bytes after last frame", r.remaining())));
    }
    MotionSequence::new(frames, fps, name, source)
}

pub fn load_motion(path: impl AsRef<Path>) -> Result<MotionSequence> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    read_motion(&bytes, &path.display().to_string())
}

pub fn save_motion(seq: &MotionSequence, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &write_motion(seq)?)
}
