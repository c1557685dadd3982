//! Geometric primitives, rigid transforms, the SVD pose solver and pose
//! error metrics.

use nalgebra::{Matrix3, Matrix4, Rotation3, Unit, Vector3, SVD};

use crate::error::{Error, Result};

pub type Point3 = nalgebra::Point3<f64>;
pub type UnitVec3 = Unit<Vector3<f64>>;

/// Tolerance on `RᵀR = I` and `det R = 1` accepted by [`RigidTransform::new`].
pub const SO3_TOLERANCE: f64 = 1e-9;

/// Relative cutoff on the second singular value of the cross-covariance
/// below which a point set is treated as collinear.
pub const DEGENERACY_RATIO: f64 = 1e-12;

/// A putative match between a source point and a target point.
#[derive(Debug, Clone, PartialEq)]
pub struct Correspondence {
    pub source: Point3,
    pub target: Point3,
    pub source_normal: Option<UnitVec3>,
    pub target_normal: Option<UnitVec3>,
    /// Position in the initial correspondence set.
    pub index: usize,
}

impl Correspondence {
    pub fn new(index: usize, source: Point3, target: Point3) -> Self {
        Self {
            source,
            target,
            source_normal: None,
            target_normal: None,
            index,
        }
    }

    pub fn with_normals(mut self, source_normal: UnitVec3, target_normal: UnitVec3) -> Self {
        self.source_normal = Some(source_normal);
        self.target_normal = Some(target_normal);
        self
    }

    pub fn has_normals(&self) -> bool {
        self.source_normal.is_some() && self.target_normal.is_some()
    }
}

/// Rotation in SO(3) followed by a translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    /// Validates that `rotation` is a proper rotation within [`SO3_TOLERANCE`].
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter(
                "transform has non-finite entries".into(),
            ));
        }
        let orth = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        let det = rotation.determinant();
        if orth > SO3_TOLERANCE || (det - 1.0).abs() > SO3_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "rotation is not in SO(3): orthogonality error {orth:e}, det {det}"
            )));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    pub fn from_rotation(rotation: &Rotation3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: *rotation.matrix(),
            translation,
        }
    }

    /// Rotation of `angle_rad` about `axis` (need not be normalized), then `translation`.
    pub fn from_axis_angle(axis: Vector3<f64>, angle_rad: f64, translation: Vector3<f64>) -> Self {
        let rotation = Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle_rad);
        Self::from_rotation(&rotation, translation)
    }

    /// Projects an almost-rigid 4×4 matrix onto the nearest rigid transform.
    ///
    /// The upper-left block is replaced by its closest rotation in the
    /// Frobenius sense; the bottom row is ignored.
    pub fn from_matrix_projected(m: &Matrix4<f64>) -> Result<Self> {
        let block: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into_owned();
        let rotation = nearest_rotation(&block)?;
        Self::new(rotation, m.fixed_view::<3, 1>(0, 3).into_owned())
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Row-major 4×4 homogeneous matrix.
    pub fn to_rows(&self) -> [[f64; 4]; 4] {
        let m = self.to_matrix();
        std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)]))
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// `R·p + t`.
    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn apply_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }
}

/// Free-function form of [`RigidTransform::apply`].
pub fn apply_transform(transform: &RigidTransform, p: &Point3) -> Point3 {
    transform.apply(p)
}

/// Closest rotation matrix to `m` in Frobenius norm.
pub fn nearest_rotation(m: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let svd = SVD::new(*m, true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::DegenerateInput("SVD did not converge".into())),
    };
    let d = (u * v_t).determinant().signum();
    Ok(u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * v_t)
}

/// Weighted least-squares rigid transform mapping sources onto targets.
///
/// Minimizes `Σ wᵢ‖R·pᵢˢ + t − pᵢᵗ‖²`. Without weights every pair counts
/// equally. A reflection in the raw SVD solution is corrected by negating
/// the direction of the smallest singular value.
pub fn kabsch_svd<'a, I>(pairs: I, weights: Option<&[f64]>) -> Result<RigidTransform>
where
    I: IntoIterator<Item = &'a Correspondence>,
{
    let pairs: Vec<&Correspondence> = pairs.into_iter().collect();
    if pairs.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "{} pairs given, at least 3 required",
            pairs.len()
        )));
    }
    if let Some(w) = weights {
        if w.len() != pairs.len() {
            return Err(Error::InvalidParameter(format!(
                "{} weights for {} pairs",
                w.len(),
                pairs.len()
            )));
        }
        if w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidParameter(
                "weights must be finite and nonnegative".into(),
            ));
        }
    }
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);
    let total: f64 = (0..pairs.len()).map(weight).sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateInput("weights sum to zero".into()));
    }

    let mut src_centroid = Vector3::zeros();
    let mut tgt_centroid = Vector3::zeros();
    for (i, c) in pairs.iter().enumerate() {
        src_centroid += weight(i) * c.source.coords;
        tgt_centroid += weight(i) * c.target.coords;
    }
    src_centroid /= total;
    tgt_centroid /= total;

    let mut cross = Matrix3::zeros();
    for (i, c) in pairs.iter().enumerate() {
        let ps = c.source.coords - src_centroid;
        let pt = c.target.coords - tgt_centroid;
        cross += (weight(i) / total) * pt * ps.transpose();
    }

    // cross = U Σ Vᵀ, R = U diag(1, 1, d) Vᵀ
    let svd = SVD::new(cross, true, true);
    let s = svd.singular_values;
    let largest = s.max();
    let mut sorted = [s[0], s[1], s[2]];
    sorted.sort_by(|a, b| b.total_cmp(a));
    if !(largest > 0.0) || sorted[1] < DEGENERACY_RATIO * largest {
        return Err(Error::DegenerateInput(
            "source points are collinear or coincident".into(),
        ));
    }
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::DegenerateInput("SVD did not converge".into())),
    };
    let mut flip = Vector3::new(1.0, 1.0, 1.0);
    if (u * v_t).determinant() < 0.0 {
        let smallest = (0..3).min_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap_or(2);
        flip[smallest] = -1.0;
    }
    let rotation = u * Matrix3::from_diagonal(&flip) * v_t;
    let translation = tgt_centroid - rotation * src_centroid;
    Ok(RigidTransform {
        rotation,
        translation,
    })
}

/// Geodesic angle between two rotations, in degrees within `[0, 180]`.
pub fn rotation_error(r_est: &Matrix3<f64>, r_gt: &Matrix3<f64>) -> f64 {
    // atan2 keeps full precision near zero, where acos of the trace does not
    let m = r_gt.transpose() * r_est;
    let cos = (m.trace() - 1.0) / 2.0;
    let sin = Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]).norm() / 2.0;
    sin.atan2(cos).to_degrees()
}

pub fn translation_error(t_est: &Vector3<f64>, t_gt: &Vector3<f64>) -> f64 {
    (t_est - t_gt).norm()
}

/// Root mean square distance between the source points mapped by the
/// estimated and by the ground-truth transform.
pub fn rmse_alignment(points: &[Point3], est: &RigidTransform, gt: &RigidTransform) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let sum: f64 = points
        .iter()
        .map(|p| (est.apply(p) - gt.apply(p)).norm_squared())
        .sum();
    (sum / points.len() as f64).sqrt()
}
