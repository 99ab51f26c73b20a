//! Closed-form similarity alignment of canonical coordinates to frame-space
//! points, symmetry-aware rotation error and the pose losses.

use nalgebra::SVD;
use serde::{Deserialize, Serialize};

use crate::geom::{rot_z, Mat3, SimilarityTransform, Vec3};
use crate::{Error, Result};

/// Below this second singular value the point set counts as collinear.
pub const COLLINEAR_EPS: f64 = 1e-9;
const VARIANCE_EPS: f64 = 1e-12;

/// Paired canonical (`canonical[i]`, unitless) and frame-space
/// (`frame[i]`, meters) points.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet {
    canonical: Vec<Vec3>,
    frame: Vec<Vec3>,
}

impl CorrespondenceSet {
    pub fn new(canonical: Vec<Vec3>, frame: Vec<Vec3>) -> Result<Self> {
        if canonical.len() != frame.len() {
            return Err(Error::InvalidArgument(format!(
                "{} canonical points vs {} frame points",
                canonical.len(),
                frame.len()
            )));
        }
        if canonical.len() < 3 {
            return Err(Error::DegenerateCorrespondences(format!(
                "need at least 3 points, got {}",
                canonical.len()
            )));
        }
        Ok(Self { canonical, frame })
    }

    pub fn len(&self) -> usize {
        self.canonical.len()
    }

    pub fn is_empty(&self) -> bool {
        self.canonical.is_empty()
    }

    pub fn canonical(&self) -> &[Vec3] {
        &self.canonical
    }

    pub fn frame(&self) -> &[Vec3] {
        &self.frame
    }

    /// Root of the summed squared residual of `t` on this set.
    pub fn residual(&self, t: &SimilarityTransform) -> f64 {
        self.canonical
            .iter()
            .zip(&self.frame)
            .map(|(n, o)| (o - t.apply(n)).norm_squared())
            .sum::<f64>()
            .sqrt()
    }
}

fn mean(points: &[Vec3]) -> Vec3 {
    points.iter().fold(Vec3::zeros(), |a, p| a + p) / points.len() as f64
}

/// Least-squares similarity transform with `frame ≈ c·R·canonical + t`.
///
/// With `Σ = (1/N) Σᵢ (oᵢ − μ_o)(nᵢ − μ_n)ᵀ = U D Vᵀ` and
/// `S = diag(1, 1, det(U Vᵀ))` the optimum is `R = U S Vᵀ`,
/// `c = tr(D S) / σ_n`, `t = μ_o − c R μ_n`, where `σ_n` is the mean squared
/// deviation of the canonical points from their mean. Planar input is
/// accepted; collinear or coincident input is an error.
pub fn umeyama_solve(corr: &CorrespondenceSet) -> Result<SimilarityTransform> {
    let n = corr.len() as f64;
    let mu_n = mean(&corr.canonical);
    let mu_o = mean(&corr.frame);

    let mut cov = Mat3::zeros();
    let mut sigma_n = 0.0;
    for (pn, po) in corr.canonical.iter().zip(&corr.frame) {
        let dn = pn - mu_n;
        let d_o = po - mu_o;
        cov += d_o * dn.transpose();
        sigma_n += dn.norm_squared();
    }
    cov /= n;
    sigma_n /= n;
    if !(sigma_n > VARIANCE_EPS) {
        return Err(Error::DegenerateCorrespondences(format!(
            "canonical variance {sigma_n:e} is zero"
        )));
    }

    let mut svd = SVD::new(cov, true, true);
    svd.sort_by_singular_values();
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::DegenerateCorrespondences("SVD did not converge".into())),
    };
    let d = svd.singular_values;
    if d[1] <= COLLINEAR_EPS {
        return Err(Error::DegenerateCorrespondences(format!(
            "second singular value {:e} (collinear points)",
            d[1]
        )));
    }

    let reflect = if (u * v_t).determinant() < 0.0 { -1.0 } else { 1.0 };
    let s = Vec3::new(1.0, 1.0, reflect);
    let rotation = u * Mat3::from_diagonal(&s) * v_t;
    let scale = (d[0] * s[0] + d[1] * s[1] + d[2] * s[2]) / sigma_n;
    if !(scale > 0.0) {
        return Err(Error::DegenerateCorrespondences(format!("non-positive scale {scale}")));
    }
    let translation = mu_o - scale * (rotation * mu_n);
    Ok(SimilarityTransform::from_parts_unchecked(scale, rotation, translation))
}

/// Rotational symmetry about the canonical up axis (+z).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryClass {
    #[default]
    None,
    TwoFold,
    FourFold,
    Cylindrical,
}

impl SymmetryClass {
    /// Discrete group elements; `None` for the continuous (cylindrical) case.
    pub fn discrete_group(self) -> Option<Vec<Mat3>> {
        use std::f64::consts::{FRAC_PI_2, PI};
        match self {
            SymmetryClass::None => Some(vec![Mat3::identity()]),
            SymmetryClass::TwoFold => Some(vec![Mat3::identity(), rot_z(PI)]),
            SymmetryClass::FourFold => Some(
                (0..4)
                    .map(|k| rot_z(k as f64 * FRAC_PI_2))
                    .collect(),
            ),
            SymmetryClass::Cylindrical => None,
        }
    }
}

/// `gᵀ · targetᵀ · pred` for the group element `g` maximizing its trace,
/// i.e. the relative rotation to the closest symmetric copy of `target`.
fn closest_relative(pred: &Mat3, target: &Mat3, sym: SymmetryClass) -> Mat3 {
    let m = target.transpose() * pred;
    match sym.discrete_group() {
        Some(group) => group
            .iter()
            .map(|g| g.transpose() * m)
            .max_by(|a, b| a.trace().total_cmp(&b.trace()))
            .expect("group has the identity"),
        None => {
            // tr(Rz(θ)ᵀ M) = cosθ (m00 + m11) + sinθ (m10 − m01) + m22
            let theta = (m[(1, 0)] - m[(0, 1)]).atan2(m[(0, 0)] + m[(1, 1)]);
            rot_z(theta).transpose() * m
        }
    }
}

/// Rotation angle of a rotation matrix, radians; accurate near zero.
fn angle_of(m: &Mat3) -> f64 {
    let cos = (m.trace() - 1.0) / 2.0;
    let sin = Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]).norm() / 2.0;
    sin.atan2(cos)
}

/// Geodesic angle in degrees between `pred` and the closest
/// `target · g`, `g` in the symmetry group.
pub fn rotation_error(pred: &Mat3, target: &Mat3, sym: SymmetryClass) -> f64 {
    angle_of(&closest_relative(pred, target, sym)).to_degrees()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseLosses {
    pub rotation: f64,
    pub scale: f64,
    pub translation: f64,
}

/// Frobenius rotation loss (minimized over the symmetry group), ℓ1 scale
/// loss and ℓ2 translation loss (meters).
pub fn pose_losses(pred: &SimilarityTransform, target: &SimilarityTransform, sym: SymmetryClass) -> PoseLosses {
    let rel = closest_relative(pred.rotation(), target.rotation(), sym);
    PoseLosses {
        // ‖R_pred − R_target·g‖_F = ‖gᵀ R_targetᵀ R_pred − I‖_F
        rotation: (rel - Mat3::identity()).norm(),
        scale: (pred.scale() - target.scale()).abs(),
        translation: (pred.translation() - target.translation()).norm(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::rot_x;
    use nalgebra::{Rotation3, Unit};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn random_rotation(rng: &mut impl Rng) -> Mat3 {
        let axis = loop {
            let a = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if a.norm() > 0.1 {
                break a;
            }
        };
        *Rotation3::from_axis_angle(&Unit::new_normalize(axis), rng.gen_range(-PI..PI)).matrix()
    }

    fn random_transform(rng: &mut impl Rng) -> SimilarityTransform {
        SimilarityTransform::new(
            rng.gen_range(0.5..2.0),
            random_rotation(rng),
            Vec3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)),
        )
        .unwrap()
    }

    fn random_points(rng: &mut impl Rng, n: usize) -> Vec<Vec3> {
        (0..n)
            .map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen()))
            .collect()
    }

    fn frobenius(a: &Mat3, b: &Mat3) -> f64 {
        (a - b).norm()
    }

    #[test]
    fn identity_and_translation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pn = random_points(&mut rng, 20);
        let t = umeyama_solve(&CorrespondenceSet::new(pn.clone(), pn.clone()).unwrap()).unwrap();
        assert!((t.scale() - 1.0).abs() < 1e-12);
        assert!(frobenius(t.rotation(), &Mat3::identity()) < 1e-12);
        assert!(t.translation().norm() < 1e-12);

        let shift = Vec3::new(1.0, 2.0, 3.0);
        let po = pn.iter().map(|p| p + shift).collect();
        let t = umeyama_solve(&CorrespondenceSet::new(pn, po).unwrap()).unwrap();
        assert!((t.scale() - 1.0).abs() < 1e-12);
        assert!(frobenius(t.rotation(), &Mat3::identity()) < 1e-12);
        assert!((t.translation() - shift).norm() < 1e-12);
    }

    #[test]
    fn generate_then_recover() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let gen = random_transform(&mut rng);
            let pn = random_points(&mut rng, 50);
            let po = pn.iter().map(|p| gen.apply(p)).collect();
            let t = umeyama_solve(&CorrespondenceSet::new(pn, po).unwrap()).unwrap();
            assert!((t.scale() - gen.scale()).abs() < 1e-9);
            for (a, b) in t.rotation().iter().zip(gen.rotation().iter()) {
                assert!((a - b).abs() < 1e-9);
            }
            assert!((t.translation() - gen.translation()).amax() < 1e-9);
        }
    }

    /// Brute-force residual minimum over a rotation grid, optimal scale and
    /// translation solved per candidate in closed form.
    fn grid_search_residual(corr: &CorrespondenceSet, steps: usize) -> f64 {
        let mu_n = mean(corr.canonical());
        let mu_o = mean(corr.frame());
        let mut best = f64::INFINITY;
        for i in 0..steps {
            for j in 0..steps {
                for k in 0..steps {
                    let a = 2.0 * PI * i as f64 / steps as f64;
                    let b = PI * j as f64 / steps as f64;
                    let c = 2.0 * PI * k as f64 / steps as f64;
                    let r = rot_z(a) * rot_x(b) * rot_z(c);
                    let (mut num, mut den) = (0.0, 0.0);
                    for (n, o) in corr.canonical().iter().zip(corr.frame()) {
                        let rn = r * (n - mu_n);
                        num += rn.dot(&(o - mu_o));
                        den += rn.norm_squared();
                    }
                    let s = (num / den).max(1e-9);
                    let t = mu_o - s * (r * mu_n);
                    let cand = SimilarityTransform::new(s, r, t).unwrap();
                    best = best.min(corr.residual(&cand));
                }
            }
        }
        best
    }

    #[test]
    fn reflection_trap_keeps_proper_rotation() {
        // planar, asymmetric 4-point set and its mirror image
        let pn = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 2.0, 0.0),
            Vec3::new(0.7, 0.4, 0.0),
        ];
        let mirror = Mat3::from_diagonal(&Vec3::new(-1.0, 1.0, 1.0));
        let po: Vec<Vec3> = pn.iter().map(|p| mirror * p * 1.3 + Vec3::new(0.2, 0.0, 1.0)).collect();
        let corr = CorrespondenceSet::new(pn, po).unwrap();
        let t = umeyama_solve(&corr).unwrap();
        assert!((t.rotation().determinant() - 1.0).abs() < 1e-12);
        // planar mirror images are related by a proper rotation (flip about an in-plane axis)
        let brute = grid_search_residual(&corr, 24);
        assert!(corr.residual(&t) <= brute + 1e-9, "{} > {}", corr.residual(&t), brute);
    }

    #[test]
    fn non_planar_reflection_corrected() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pn = random_points(&mut rng, 12);
        let mirror = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        let po: Vec<Vec3> = pn.iter().map(|p| mirror * p).collect();
        let corr = CorrespondenceSet::new(pn, po).unwrap();
        let t = umeyama_solve(&corr).unwrap();
        assert!((t.rotation().determinant() - 1.0).abs() < 1e-12);
        assert!(corr.residual(&t) <= grid_search_residual(&corr, 20) + 1e-9);
    }

    #[test]
    fn degenerate_inputs_fail() {
        let line: Vec<Vec3> = (0..5).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        assert!(matches!(
            umeyama_solve(&CorrespondenceSet::new(line.clone(), line).unwrap()),
            Err(Error::DegenerateCorrespondences(_))
        ));
        let same = vec![Vec3::repeat(0.3); 4];
        assert!(umeyama_solve(&CorrespondenceSet::new(same.clone(), same).unwrap()).is_err());
        assert!(CorrespondenceSet::new(vec![Vec3::zeros(); 2], vec![Vec3::zeros(); 2]).is_err());
        assert!(CorrespondenceSet::new(vec![Vec3::zeros(); 3], vec![Vec3::zeros(); 4]).is_err());
    }

    #[test]
    fn recovery_is_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let gen = random_transform(&mut rng);
            let rigid = SimilarityTransform::rigid(random_rotation(&mut rng), Vec3::new(1.0, -4.0, 2.0)).unwrap();
            let pn = random_points(&mut rng, 30);
            let po: Vec<Vec3> = pn.iter().map(|p| gen.apply(p)).collect();
            let moved: Vec<Vec3> = po.iter().map(|p| rigid.apply(p)).collect();
            let a = umeyama_solve(&CorrespondenceSet::new(pn.clone(), moved).unwrap()).unwrap();
            let b = rigid.compose(&umeyama_solve(&CorrespondenceSet::new(pn, po).unwrap()).unwrap());
            assert!((a.scale() - b.scale()).abs() < 1e-9);
            assert!(frobenius(a.rotation(), b.rotation()) < 1e-9);
            assert!((a.translation() - b.translation()).norm() < 1e-9);
        }
    }

    #[test]
    fn beats_random_candidates() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let gen = random_transform(&mut rng);
        let pn = random_points(&mut rng, 40);
        let po: Vec<Vec3> = pn
            .iter()
            .map(|p| gen.apply(p) + Vec3::new(rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05), 0.0))
            .collect();
        let corr = CorrespondenceSet::new(pn, po).unwrap();
        let best = corr.residual(&umeyama_solve(&corr).unwrap());
        for _ in 0..1000 {
            // random candidates, half of them near the generator
            let cand = if rng.gen_bool(0.5) {
                random_transform(&mut rng)
            } else {
                let jitter = SimilarityTransform::new(
                    1.0 + rng.gen_range(-0.01..0.01),
                    *Rotation3::from_euler_angles(
                        rng.gen_range(-0.01..0.01),
                        rng.gen_range(-0.01..0.01),
                        rng.gen_range(-0.01..0.01),
                    )
                    .matrix(),
                    Vec3::new(rng.gen_range(-0.01..0.01), 0.0, 0.0),
                )
                .unwrap();
                jitter.compose(&gen)
            };
            assert!(best <= corr.residual(&cand) + 1e-12);
        }
    }

    /// Median rotation error under i.i.d. frame-space noise σ stays below
    /// `C · σ / (spread · √N)` rad with C = 3, where spread is the RMS
    /// distance of the posed points from their centroid.
    #[test]
    fn noise_robustness() {
        const C: f64 = 3.0;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
        let n = 100;
        for sigma in [0.001, 0.01, 0.03] {
            let mut errs = Vec::new();
            let mut bound = 0.0;
            for _ in 0..100 {
                let gen = random_transform(&mut rng);
                let pn = random_points(&mut rng, n);
                let clean: Vec<Vec3> = pn.iter().map(|p| gen.apply(p)).collect();
                let mu = mean(&clean);
                let spread = (clean.iter().map(|p| (p - mu).norm_squared()).sum::<f64>() / n as f64).sqrt();
                let po = clean
                    .iter()
                    .map(|p| {
                        p + sigma
                            * Vec3::new(rng.sample(normal), rng.sample(normal), rng.sample(normal))
                    })
                    .collect();
                let t = umeyama_solve(&CorrespondenceSet::new(pn, po).unwrap()).unwrap();
                errs.push(rotation_error(t.rotation(), gen.rotation(), SymmetryClass::None).to_radians());
                bound += C * sigma / (spread * (n as f64).sqrt());
            }
            errs.sort_by(f64::total_cmp);
            let median = errs[errs.len() / 2];
            assert!(median <= bound / 100.0, "σ={sigma}: {median} > {}", bound / 100.0);
        }
    }

    #[test]
    fn rotation_error_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let target = random_rotation(&mut rng);
        for sym in [
            SymmetryClass::None,
            SymmetryClass::TwoFold,
            SymmetryClass::FourFold,
            SymmetryClass::Cylindrical,
        ] {
            assert!(rotation_error(&target, &target, sym) < 1e-6);
        }
        let flipped = target * rot_z(PI);
        assert!(rotation_error(&flipped, &target, SymmetryClass::TwoFold) < 1e-6);
        let quarter = target * rot_z(FRAC_PI_2);
        // explicit minimum over {0°, 180°}
        let oracle = [0.0f64, 180.0]
            .iter()
            .map(|g| {
                let r = target * rot_z(g.to_radians());
                (((r.transpose() * quarter).trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos().to_degrees()
            })
            .fold(f64::INFINITY, f64::min);
        let got = rotation_error(&quarter, &target, SymmetryClass::TwoFold);
        assert!((got - oracle).abs() < 1e-9);
        assert!((got - 90.0).abs() < 1e-6);
        assert!(rotation_error(&quarter, &target, SymmetryClass::FourFold) < 1e-6);
        assert!(rotation_error(&(target * rot_z(1.234)), &target, SymmetryClass::Cylindrical) < 1e-6);
        // tilt is not absorbed by yaw symmetry
        let tilt = target * rot_x(0.3);
        assert!((rotation_error(&tilt, &target, SymmetryClass::Cylindrical) - 0.3f64.to_degrees()).abs() < 1e-6);
    }

    #[test]
    fn cylindrical_matches_dense_yaw_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a = random_rotation(&mut rng);
            let b = random_rotation(&mut rng);
            let dense = (0..20_000)
                .map(|k| rotation_error(&a, &(b * rot_z(2.0 * PI * k as f64 / 20_000.0)), SymmetryClass::None))
                .fold(f64::INFINITY, f64::min);
            let analytic = rotation_error(&a, &b, SymmetryClass::Cylindrical);
            assert!(analytic <= dense + 1e-9);
            assert!(dense - analytic < 0.02, "{dense} vs {analytic}");
        }
    }

    #[test]
    fn rotation_error_symmetric_in_arguments() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for sym in [SymmetryClass::None, SymmetryClass::TwoFold, SymmetryClass::FourFold, SymmetryClass::Cylindrical] {
            for _ in 0..50 {
                let a = random_rotation(&mut rng);
                let b = random_rotation(&mut rng);
                let ab = rotation_error(&a, &b, sym);
                let ba = rotation_error(&b, &a, sym);
                assert!((ab - ba).abs() < 1e-6, "{sym:?}: {ab} vs {ba}");
                assert!(ab >= 0.0);
            }
        }
    }

    #[test]
    fn pose_loss_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let target = random_transform(&mut rng);
        let l = pose_losses(&target, &target, SymmetryClass::None);
        assert!(l.rotation < 1e-6 && l.scale == 0.0 && l.translation == 0.0);

        let scaled = SimilarityTransform::new(target.scale() + 0.25, *target.rotation(), *target.translation()).unwrap();
        let l = pose_losses(&scaled, &target, SymmetryClass::None);
        assert!(l.rotation < 1e-6);
        assert!((l.scale - 0.25).abs() < 1e-12);
        assert_eq!(l.translation, 0.0);

        let flipped = SimilarityTransform::new(target.scale(), target.rotation() * rot_z(PI), *target.translation()).unwrap();
        let l = pose_losses(&flipped, &target, SymmetryClass::None);
        let direct = (Mat3::from_diagonal(&Vec3::new(-1.0, -1.0, 1.0)) - Mat3::identity()).norm();
        assert!((direct - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!((l.rotation - direct).abs() < 1e-7);
        assert!(pose_losses(&flipped, &target, SymmetryClass::TwoFold).rotation < 1e-6);
    }
}
