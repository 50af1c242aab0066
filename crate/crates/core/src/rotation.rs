//! 3D rotations backed by unit quaternions.
//!
//! Euler angles follow the roll-pitch-yaw convention used throughout the
//! toolkit: `R = Rz(yaw) · Ry(pitch) · Rx(roll)`. At gimbal lock
//! (|pitch| within 1e-6 of π/2) the decomposition returns `roll = 0`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::Mul;

use nalgebra::{Matrix3, Quaternion, Unit, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

/// Pitch magnitude beyond which the Euler decomposition is treated as gimbal-locked.
pub const GIMBAL_EPS: f64 = 1e-6;

/// A rotation in 3D space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation(UnitQuaternion<f64>);

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation(UnitQuaternion::identity())
    }

    /// Builds a rotation from quaternion components `(w, x, y, z)`, normalizing them.
    pub fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let q = Quaternion::new(w, x, y, z);
        let n = q.norm();
        if !n.is_finite() || n < 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "quaternion ({w}, {x}, {y}, {z}) cannot be normalized"
            )));
        }
        Ok(Rotation(UnitQuaternion::new_unchecked(q / n)))
    }

    /// Wraps stored components verbatim. Used by file readers so that values
    /// round-trip bit-exactly; callers check the norm themselves.
    pub(crate) fn from_quaternion_raw(q: [f64; 4]) -> Self {
        Rotation(UnitQuaternion::new_unchecked(Quaternion::new(
            q[0], q[1], q[2], q[3],
        )))
    }

    /// Builds a rotation from a 3×3 matrix, rejecting non-orthonormal input.
    pub fn from_matrix(m: &Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite matrix".into()));
        }
        let err = (m.transpose() * m - Matrix3::identity()).amax();
        if err > 1e-6 || (m.determinant() - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "matrix is not a proper rotation (orthonormality error {err:e})"
            )));
        }
        let rot = nalgebra::Rotation3::from_matrix_unchecked(*m);
        Ok(Rotation(UnitQuaternion::from_rotation_matrix(&rot)))
    }

    /// Rotation of `angle` radians about `axis` (normalized internally).
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        match Unit::try_new(*axis, 1e-15) {
            Some(a) => Rotation(UnitQuaternion::from_axis_angle(&a, angle)),
            None => Self::identity(),
        }
    }

    pub fn rx(angle: f64) -> Self {
        Self::from_axis_angle(&Vector3::x(), angle)
    }

    pub fn ry(angle: f64) -> Self {
        Self::from_axis_angle(&Vector3::y(), angle)
    }

    pub fn rz(angle: f64) -> Self {
        Self::from_axis_angle(&Vector3::z(), angle)
    }

    pub fn from_euler(roll: f64, pitch: f64, yaw: f64) -> Result<Self> {
        euler_to_rotation(roll, pitch, yaw)
    }

    pub fn to_euler(&self) -> (f64, f64, f64) {
        rotation_to_euler(self)
    }

    /// Quaternion components `(w, x, y, z)`.
    pub fn quaternion(&self) -> [f64; 4] {
        let q = self.0.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn unit_quaternion(&self) -> &UnitQuaternion<f64> {
        &self.0
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        self.0.to_rotation_matrix().into_inner()
    }

    pub fn inverse(&self) -> Self {
        Rotation(self.0.inverse())
    }

    /// `self · other`, renormalized.
    pub fn compose(&self, other: &Rotation) -> Self {
        Rotation(UnitQuaternion::new_normalize(
            self.0.into_inner() * other.0.into_inner(),
        ))
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0.transform_vector(v)
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(&self) -> f64 {
        self.0.angle()
    }

    /// Geodesic distance to another rotation, in radians.
    pub fn angle_to(&self, other: &Rotation) -> f64 {
        relative_rotation(self, other).angle()
    }

    /// Sign-insensitive component comparison.
    pub fn approx_eq(&self, other: &Rotation, tol: f64) -> bool {
        let a = self.quaternion();
        let b = other.quaternion();
        let same = a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= tol);
        let flipped = a.iter().zip(&b).all(|(x, y)| (x + y).abs() <= tol);
        same || flipped
    }

    pub fn norm_error(&self) -> f64 {
        (self.0.quaternion().norm() - 1.0).abs()
    }

    /// Spherical linear interpolation along the shortest arc.
    pub fn slerp(&self, other: &Rotation, t: f64) -> Rotation {
        if t <= 0.0 {
            return *self;
        }
        if t >= 1.0 {
            return *other;
        }
        let a = self.0.quaternion();
        let mut b = *other.0.quaternion();
        let mut dot = a.dot(&b);
        if dot < 0.0 {
            b = -b;
            dot = -dot;
        }
        let q = if dot > 1.0 - 1e-12 {
            a * (1.0 - t) + b * t
        } else {
            let theta = dot.min(1.0).acos();
            let s = theta.sin();
            a * (((1.0 - t) * theta).sin() / s) + b * ((t * theta).sin() / s)
        };
        Rotation(UnitQuaternion::new_normalize(q))
    }

    /// Signed angle of the twist component about `axis` (swing-twist decomposition),
    /// wrapped to `(-π, π]`. A pure swing of π (undefined twist) yields 0.
    pub fn twist_angle(&self, axis: &Vector3<f64>) -> f64 {
        let Some(axis) = Unit::try_new(*axis, 1e-15) else {
            return 0.0;
        };
        let q = self.0.quaternion();
        let proj = q.imag().dot(&axis);
        if proj.abs() < 1e-15 && q.w.abs() < 1e-15 {
            return 0.0;
        }
        wrap_angle(2.0 * proj.atan2(q.w))
    }
}

impl Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        self.compose(&rhs)
    }
}

impl Mul<Vector3<f64>> for Rotation {
    type Output = Vector3<f64>;

    fn mul(self, rhs: Vector3<f64>) -> Vector3<f64> {
        self.rotate(&rhs)
    }
}

/// `Rz(yaw) · Ry(pitch) · Rx(roll)`.
pub fn euler_to_rotation(roll: f64, pitch: f64, yaw: f64) -> Result<Rotation> {
    if !(roll.is_finite() && pitch.is_finite() && yaw.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "non-finite Euler angles ({roll}, {pitch}, {yaw})"
        )));
    }
    let (sr, cr) = (0.5 * roll).sin_cos();
    let (sp, cp) = (0.5 * pitch).sin_cos();
    let (sy, cy) = (0.5 * yaw).sin_cos();
    let q = Quaternion::new(
        cy * cp * cr + sy * sp * sr,
        cy * cp * sr - sy * sp * cr,
        cy * sp * cr + sy * cp * sr,
        sy * cp * cr - cy * sp * sr,
    );
    Ok(Rotation(UnitQuaternion::new_normalize(q)))
}

/// Inverse of [`euler_to_rotation`]; returns `(roll, pitch, yaw)`.
pub fn rotation_to_euler(r: &Rotation) -> (f64, f64, f64) {
    let m = r.matrix();
    let pitch = (-m[(2, 0)]).atan2(m[(0, 0)].hypot(m[(1, 0)]));
    if pitch.abs() >= FRAC_PI_2 - GIMBAL_EPS {
        let yaw = (-m[(0, 1)]).atan2(m[(1, 1)]);
        return (0.0, pitch.signum() * FRAC_PI_2, yaw);
    }
    let roll = m[(2, 1)].atan2(m[(2, 2)]);
    let yaw = m[(1, 0)].atan2(m[(0, 0)]);
    (roll, pitch, yaw)
}

/// `a⁻¹ · b`: the rotation taking frame `a` to frame `b`, expressed in `a`.
pub fn relative_rotation(a: &Rotation, b: &Rotation) -> Rotation {
    a.inverse().compose(b)
}

/// Wraps an angle to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut x = (a + PI).rem_euclid(2.0 * PI) - PI;
    if x <= -PI {
        x += 2.0 * PI;
    }
    x
}

/// Heading (yaw) of a rotation.
pub fn yaw_of(r: &Rotation) -> f64 {
    let m = r.matrix();
    m[(1, 0)].atan2(m[(0, 0)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn elementary(roll: f64, pitch: f64, yaw: f64) -> Matrix3<f64> {
        let (sr, cr) = roll.sin_cos();
        let (sp, cp) = pitch.sin_cos();
        let (sy, cy) = yaw.sin_cos();
        let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cr, -sr, 0.0, sr, cr);
        let ry = Matrix3::new(cp, 0.0, sp, 0.0, 1.0, 0.0, -sp, 0.0, cp);
        let rz = Matrix3::new(cy, -sy, 0.0, sy, cy, 0.0, 0.0, 0.0, 1.0);
        rz * ry * rx
    }

    fn random_rotation(rng: &mut impl Rng) -> Rotation {
        loop {
            let q: [f64; 4] = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            let n = q.iter().map(|v| v * v).sum::<f64>();
            if n > 1e-3 && n <= 1.0 {
                return Rotation::from_quaternion(q[0], q[1], q[2], q[3]).unwrap();
            }
        }
    }

    #[test]
    fn zero_euler_is_identity() {
        let r = euler_to_rotation(0.0, 0.0, 0.0).unwrap();
        assert_eq!(r.quaternion(), [1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn quarter_turn_about_x() {
        let r = euler_to_rotation(FRAC_PI_2, 0.0, 0.0).unwrap();
        // axis-angle exponential: (cos(θ/2), sin(θ/2)·x)
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let q = r.quaternion();
        for (a, b) in q.iter().zip([h, h, 0.0, 0.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn euler_matches_elementary_product() {
        let r = euler_to_rotation(0.1, 0.2, 0.3).unwrap();
        let err = (r.matrix() - elementary(0.1, 0.2, 0.3)).amax();
        assert!(err < 1e-12, "err={err}");
        // frozen values from an independent script
        let expected = Matrix3::new(
            0.936_293_363_584_199_2,
            -0.275_095_847_318_243_7,
            0.218_350_663_146_334_44,
            0.289_629_477_625_515_55,
            0.956_425_085_849_232_5,
            -0.036_957_013_524_625_08,
            -0.198_669_330_795_061_22,
            0.097_843_395_007_255_71,
            0.975_170_327_201_816,
        );
        assert!((r.matrix() - expected).amax() < 1e-12);
    }

    #[test]
    fn non_finite_euler_rejected() {
        assert!(euler_to_rotation(f64::NAN, 0.0, 0.0).is_err());
        assert!(euler_to_rotation(0.0, f64::INFINITY, 0.0).is_err());
    }

    #[test]
    fn euler_round_trip() {
        assert_eq!(Rotation::identity().to_euler(), (0.0, 0.0, 0.0));
        let (r, p, y) = euler_to_rotation(0.3, -0.2, 1.0).unwrap().to_euler();
        assert!((r - 0.3).abs() < 1e-9 && (p + 0.2).abs() < 1e-9 && (y - 1.0).abs() < 1e-9);
    }

    #[test]
    fn gimbal_lock_forces_zero_roll() {
        let m = elementary(0.4, FRAC_PI_2, 0.7);
        let rot = Rotation::from_matrix(&m).unwrap();
        let (r, p, y) = rot.to_euler();
        assert_eq!(r, 0.0);
        assert!((p - FRAC_PI_2).abs() < 1e-12);
        let back = euler_to_rotation(r, p, y).unwrap();
        assert!((back.matrix() - m).norm() < 1e-8);
    }

    #[test]
    fn relative_rotation_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let r = random_rotation(&mut rng);
        assert!(relative_rotation(&r, &r).approx_eq(&Rotation::identity(), 1e-12));
        assert!(relative_rotation(&Rotation::identity(), &r).approx_eq(&r, 1e-12));
        // quaternion-multiplication oracle: conj(qa)·qb with qa, qb written out by hand
        let rel = relative_rotation(&Rotation::rx(0.2), &Rotation::rx(0.5));
        let (s1, c1) = 0.1f64.sin_cos();
        let (s2, c2) = 0.25f64.sin_cos();
        let w = c1 * c2 + s1 * s2;
        let x = c1 * s2 - s1 * c2;
        assert!((rel.quaternion()[0] - w).abs() < 1e-12);
        assert!((rel.quaternion()[1] - x).abs() < 1e-12);
        assert!(rel.approx_eq(&Rotation::rx(0.3), 1e-9));
    }

    #[test]
    fn random_quaternion_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let r = random_rotation(&mut rng);
            let (a, b, c) = r.to_euler();
            let back = euler_to_rotation(a, b, c).unwrap();
            assert!((back.matrix() - r.matrix()).norm() < 1e-8);
            let m = r.matrix();
            assert!((m.transpose() * m - Matrix3::identity()).amax() < 1e-9);
        }
    }

    #[test]
    fn composition_preserves_unit_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut acc = Rotation::identity();
        for _ in 0..10_000 {
            acc = acc * random_rotation(&mut rng);
        }
        assert!(acc.norm_error() < 1e-9);
        let a = random_rotation(&mut rng);
        let b = random_rotation(&mut rng);
        assert!(relative_rotation(&a, &a.compose(&b)).approx_eq(&b, 1e-9));
    }

    #[test]
    fn slerp_midpoint_matches_axis_angle_scaling() {
        let mid = Rotation::identity().slerp(&Rotation::rx(1.0), 0.5);
        assert!(mid.approx_eq(&Rotation::rx(0.5), 1e-12));
        let a = Rotation::rz(0.3);
        assert_eq!(a.slerp(&Rotation::rz(1.0), 0.0).quaternion(), a.quaternion());
    }

    #[test]
    fn twist_of_pure_rotations() {
        let z = Vector3::z();
        assert!((Rotation::rz(0.6).twist_angle(&z) - 0.6).abs() < 1e-12);
        assert!(Rotation::rx(0.9).twist_angle(&z).abs() < 1e-12);
        // swing about x then twist about z: twist recovered exactly
        let r = Rotation::rx(0.4) * Rotation::rz(-0.7);
        let twist = r.twist_angle(&z);
        let swing = r * Rotation::rz(-twist);
        assert!(swing.twist_angle(&z).abs() < 1e-12);
        assert!((twist + 0.7).abs() < 1e-12);
    }

    #[test]
    fn wrap_angle_range() {
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(0.5) - 0.5).abs() < 1e-15);
    }
}
