use mvga_core::geometry::{attach_features, icosphere};
use mvga_core::math::{axis_angle, cross, dot, normalize, sub, Mat3, Vec3};
use mvga_core::render::{camera_rig, rasterize, render_views, shade_features, Camera};
use mvga_core::{FeatureMatrix, RenderConfig, SubdivisionLevel, TriangleMesh};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sphere(level: u32) -> TriangleMesh {
    icosphere(SubdivisionLevel::new(level).unwrap())
}

fn with_features(mesh: TriangleMesh, f: impl Fn(Vec3) -> Vec<f64>) -> TriangleMesh {
    let rows: Vec<Vec3> = mesh.vertices().to_vec();
    let channels = f(rows[0]).len();
    let feats = FeatureMatrix::from_fn(rows.len(), channels, |i| f(rows[i])).unwrap();
    attach_features(mesh, feats).unwrap()
}

fn smooth_features(p: Vec3) -> Vec<f64> {
    vec![
        p[0],
        p[1] * p[2],
        (3.0 * p[0]).sin() + p[2],
        0.5 + 0.25 * (2.0 * p[1]).cos(),
    ]
}

/// Fraction of pixel-center rays hitting the unit sphere, from the camera
/// pose alone.
fn ray_sphere_fraction(cam: &Camera, res: usize) -> f64 {
    let o = cam.position();
    let f = normalize(sub(cam.target(), o));
    let r = normalize(cross(f, cam.up_hint()));
    let u = cross(r, f);
    let t = (cam.fov_y_deg().to_radians() / 2.0).tan();
    let mut hits = 0usize;
    for y in 0..res {
        for x in 0..res {
            let nx = (x as f64 + 0.5) / res as f64 * 2.0 - 1.0;
            let ny = 1.0 - (y as f64 + 0.5) / res as f64 * 2.0;
            let d = normalize([0, 1, 2].map(|i| f[i] + nx * t * r[i] + ny * t * u[i]));
            let b = dot(o, d);
            if b * b - (dot(o, o) - 1.0) >= 0.0 {
                hits += 1;
            }
        }
    }
    hits as f64 / (res * res) as f64
}

#[test]
fn coverage_matches_projected_disk() {
    let mesh = sphere(4);
    let cfg = RenderConfig::default();
    let rig = cfg.rig().unwrap();
    let radius = (1.0 / cfg.distance).asin().tan() / (cfg.fov_y_deg.to_radians() / 2.0).tan();
    let analytic = std::f64::consts::PI * radius * radius / 4.0;
    assert!((analytic - 0.4488).abs() < 1e-3);
    for cam in &rig.cameras {
        let frags = rasterize(&mesh, cam, cfg.resolution).unwrap();
        let rays = ray_sphere_fraction(cam, cfg.resolution);
        assert!(
            (frags.coverage() - analytic).abs() <= 0.02,
            "coverage {}",
            frags.coverage()
        );
        assert!(
            (frags.coverage() - rays).abs() <= 0.02,
            "{} vs ray count {rays}",
            frags.coverage()
        );
        // the inscribed polyhedron never covers more than the sphere
        assert!(frags.coverage() <= rays);
    }
}

#[test]
fn fragment_invariants_at_full_resolution() {
    let mesh = sphere(4);
    let rig = RenderConfig::default().rig().unwrap();
    for cam in &rig.cameras {
        let frags = rasterize(&mesh, cam, rig.resolution).unwrap();
        for (i, &face) in frags.face_index().iter().enumerate() {
            let b = frags.barycentric()[i];
            if face < 0 {
                assert_eq!(face, -1);
                assert_eq!(b, [0.0; 3]);
                assert!(frags.depth()[i].is_infinite());
            } else {
                assert!((b.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
                assert!(b.iter().all(|&w| w >= -1e-9));
                assert!((face as usize) < mesh.num_faces());
            }
        }
    }
}

#[test]
fn constant_feature_and_exact_background() {
    let mesh = with_features(sphere(4), |_| vec![0.73, -2.5]);
    let rig = RenderConfig::default().rig().unwrap();
    let stack = render_views(&mesh, &rig).unwrap();
    for (v, cam) in rig.cameras.iter().enumerate() {
        let frags = rasterize(&mesh, cam, rig.resolution).unwrap();
        for c in 0..2 {
            let expected = [0.73, -2.5][c];
            for y in 0..rig.resolution {
                for x in 0..rig.resolution {
                    let px = stack.get(v, c, y, x) as f64;
                    if frags.face_at(y, x) < 0 {
                        assert_eq!(px, 0.0);
                    } else {
                        assert!((px - expected).abs() <= 1e-5, "{px}");
                    }
                }
            }
        }
    }
}

#[test]
fn shading_is_linear_in_features() {
    let base = sphere(3);
    let f = with_features(base.clone(), |p| vec![p[0], p[1] * p[1]]);
    let g = with_features(base.clone(), |p| vec![(2.0 * p[2]).sin(), 1.0]);
    let h = with_features(base.clone(), |p| {
        vec![
            2.0 * p[0] - 3.0 * (2.0 * p[2]).sin(),
            2.0 * p[1] * p[1] - 3.0,
        ]
    });
    let cam = &camera_rig(2.5, 60.0, 96).unwrap().cameras[5];
    let frags = rasterize(&base, cam, 96).unwrap();
    let (sf, sg, sh) = (
        shade_features(&f, &frags).unwrap(),
        shade_features(&g, &frags).unwrap(),
        shade_features(&h, &frags).unwrap(),
    );
    for i in 0..sh.len() {
        let combo = 2.0 * sf[i] as f64 - 3.0 * sg[i] as f64;
        assert!((sh[i] as f64 - combo).abs() <= 1e-5);
    }
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Mat3 {
    let axis = normalize([0; 3].map(|_| rng.gen_range(-1.0..1.0)));
    axis_angle(axis, rng.gen_range(0.1..std::f64::consts::PI))
}

#[test]
fn joint_rotation_equivariance() {
    let mesh = with_features(sphere(4), smooth_features);
    let rig = RenderConfig::default().rig().unwrap();
    let reference = render_views(&mesh, &rig).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..5 {
        let r = random_rotation(&mut rng);
        let rotated_mesh = mesh.map_vertices(|v| mvga_core::math::mat3_mul_vec(&r, v));
        let stack = render_views(&rotated_mesh, &rig.rotated(&r).unwrap()).unwrap();
        let diffs: Vec<f64> = reference
            .data()
            .iter()
            .zip(stack.data())
            .map(|(a, b)| (a - b).abs() as f64)
            .collect();
        let close = diffs.iter().filter(|&&d| d <= 1e-4).count() as f64 / diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        assert!(close >= 0.99, "only {close} of values within 1e-4");
        assert!(mean < 1e-3, "mean abs diff {mean}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn fragment_map_invariants_hold_for_any_pose(
        level in 0u32..4,
        res in 16usize..48,
        dir in prop::array::uniform3(-1.0f64..1.0),
        dist in 1.3f64..5.0,
        fov in 20.0f64..100.0,
    ) {
        prop_assume!(dot(dir, dir) > 1e-2);
        let mesh = sphere(level);
        let pos = mvga_core::math::scale(normalize(dir), dist);
        let cam = Camera::new(pos, [0.0; 3], [0.0, 0.0, 1.0], fov, 0.01, 10.0).unwrap();
        let frags = rasterize(&mesh, &cam, res).unwrap();
        prop_assert_eq!(frags.face_index().len(), res * res);
        prop_assert!(frags.coverage() > 0.0);
        for (i, &face) in frags.face_index().iter().enumerate() {
            let b = frags.barycentric()[i];
            if face < 0 {
                prop_assert_eq!(b, [0.0; 3]);
            } else {
                prop_assert!((face as usize) < mesh.num_faces());
                prop_assert!((b.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
                // every mesh point lies in the unit ball
                let d = frags.depth()[i];
                prop_assert!(d >= dist - 1.0 - 1e-9 && d <= dist + 1.0 + 1e-9, "depth {}", d);
            }
        }
    }
}
