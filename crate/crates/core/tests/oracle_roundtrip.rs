use uavscale::pipeline::ScaleModel;
use uavscale::sensitivity::{focal_fd_check, pitch_fd_check, FdQuantity};
use uavscale::synth::{
    generate_orthophoto, generate_scene, layout_vehicles, project_cuboid, Layout, OrthoSpec,
    SceneSpec, VehiclePlacement,
};
use uavscale::{CameraIntrinsics, CameraPose, Estimator, VehiclePrior};

fn camera() -> CameraIntrinsics {
    CameraIntrinsics::centered(1000.0, 640.0, 480.0).unwrap()
}

fn scene(theta_deg: f64, seed: u64, n: usize, layout: Layout) -> SceneSpec {
    let mut s = SceneSpec::new(
        100.0,
        CameraPose::from_degrees(theta_deg).unwrap(),
        camera(),
    );
    s.rng_seed = seed;
    s.vehicles = layout_vehicles(&s, layout, n, VehiclePrior::default()).unwrap();
    s
}

fn estimator(s: &SceneSpec) -> Estimator {
    Estimator::perspective(s.intrinsics, s.pose().unwrap())
}

#[test]
fn nadir_center_is_exact_for_every_yaw() {
    let s = scene(-90.0, 0, 12, Layout::Center);
    let out = generate_scene(&s).unwrap();
    assert_eq!(out.detections.len(), 12);
    let est = estimator(&s).estimate(&out.detections).unwrap();
    for x in est.scales() {
        assert!((x - 0.1).abs() / 0.1 <= 1e-9, "{x}");
    }
    let g = est.report.global_scale().unwrap();
    assert!((g - 0.1).abs() / 0.1 <= 1e-9);
    assert!((est.report.altitude_m().unwrap() - 100.0).abs() <= 1e-7);
}

#[test]
fn nadir_roof_projects_to_dims_over_scale() {
    let s = scene(-90.0, 0, 0, Layout::Center);
    for (x, y) in [(0.0, 0.0), (8.0, -5.0), (-12.0, 9.0)] {
        let flat = VehiclePrior::new(4.4, 1.9, 0.0).unwrap();
        let mut s = s.clone();
        // flat vehicle, so its top face is the ground plane
        s.roof_reference_m = 0.0;
        let d = project_cuboid(
            &s,
            &VehiclePlacement {
                x,
                y,
                yaw: 0.3,
                dims: flat,
            },
        )
        .unwrap()
        .unwrap();
        assert!((d.len_pix - 44.0).abs() < 1e-9);
        assert!((d.wid_pix - 19.0).abs() < 1e-9);
    }
}

#[test]
fn oblique_center_stays_close() {
    // at the principal point the model is only approximate off nadir
    for th in [-80.0, -70.0] {
        let s = scene(th, 0, 8, Layout::Center);
        let est = estimator(&s)
            .estimate(&generate_scene(&s).unwrap().detections)
            .unwrap();
        let g = est.report.global_scale().unwrap();
        assert!((g - 0.1).abs() / 0.1 < 0.05, "theta {th}: {g}");
    }
}

#[test]
fn outliers_are_rejected_at_nadir() {
    for seed in 0..20 {
        let mut s = scene(-90.0, seed, 20, Layout::Uniform);
        let clean = estimator(&s)
            .estimate(&generate_scene(&s).unwrap().detections)
            .unwrap();
        s.outlier_fraction = 0.2;
        let out = generate_scene(&s).unwrap();
        assert_eq!(out.outlier_mask.iter().filter(|&&m| m).count(), 4);
        let dirty = estimator(&s).estimate(&out.detections).unwrap();
        let (c, d) = (
            clean.report.global_scale().unwrap(),
            dirty.report.global_scale().unwrap(),
        );
        assert!((d - c).abs() / c <= 0.02, "seed {seed}: {c} vs {d}");
        for (rec, &bad) in dirty.instances.iter().zip(&out.outlier_mask) {
            if bad {
                assert!(!rec.inlier);
            }
        }
    }
}

#[test]
fn noise_raises_instance_error() {
    let sigmas = [0.0, 0.03, 0.06, 0.12];
    let mape: Vec<f64> = sigmas
        .iter()
        .map(|&sigma| {
            let (mut sum, mut n) = (0.0, 0usize);
            for seed in 0..60 {
                let mut s = scene(-90.0, seed, 20, Layout::Uniform);
                s.dim_noise_sigma = sigma;
                let est = estimator(&s)
                    .estimate(&generate_scene(&s).unwrap().detections)
                    .unwrap();
                for x in est.scales() {
                    sum += (x - s.true_scale()).abs() / s.true_scale();
                    n += 1;
                }
            }
            sum / n as f64
        })
        .collect();
    for w in mape.windows(2) {
        assert!(w[1] >= w[0], "{mape:?}");
    }
}

#[test]
fn orthophoto_round_trip() {
    for seed in 0..10 {
        let mut o = OrthoSpec {
            gsd_m: 0.08,
            width_px: 1200.0,
            height_px: 900.0,
            vehicles: vec![],
            rng_seed: seed,
            dim_noise_sigma: 0.0,
            outlier_fraction: 0.2,
        };
        o.layout_uniform(15, VehiclePrior::default());
        let out = generate_orthophoto(&o).unwrap();
        let est = Estimator::orthophoto(1200.0, 900.0)
            .unwrap()
            .estimate(&out.detections)
            .unwrap();
        let g = est.report.global_scale().unwrap();
        assert!((g - 0.08).abs() / 0.08 <= 1e-9);
        assert_eq!(est.report.altitude_m(), None);
    }
}

#[test]
fn naive_and_decoupled_agree_at_nadir_center() {
    let s = scene(-90.0, 0, 6, Layout::Center);
    let dets = generate_scene(&s).unwrap().detections;
    let a = estimator(&s).estimate(&dets).unwrap();
    let b = estimator(&s)
        .with_model(ScaleModel::Naive)
        .estimate(&dets)
        .unwrap();
    let (x, y) = (
        a.report.global_scale().unwrap(),
        b.report.global_scale().unwrap(),
    );
    assert!((x - y).abs() <= 1e-12);
}

#[test]
fn pitch_linearization_over_random_scenes() {
    for seed in 0..30u64 {
        let th = -90.0 + (seed as f64 * 37.0) % 55.0;
        let s = scene(th, seed, 15, Layout::Uniform);
        let step = 1e-3 * s.pitch_rad.abs();
        let e = pitch_fd_check(
            &estimator(&s),
            &generate_scene(&s).unwrap().detections,
            step,
        )
        .unwrap()
        .unwrap();
        assert!(e.within(0.02, 1e-4), "theta {th}: {e:?}");
    }
}

#[test]
fn focal_linearization_on_principal_axes() {
    let k = CameraIntrinsics::centered(1000.0, 4000.0, 3000.0).unwrap();
    let pose = CameraPose::nadir();
    let det = |u: f64, v: f64| {
        uavscale::OrientedDetection::new([u, v], 40.0, 18.0, [1.0, 0.0], 0.9, "sv").unwrap()
    };
    let find = |v: &[uavscale::sensitivity::FdEntry], q| {
        v.iter().find(|e| e.quantity == q).unwrap().clone()
    };
    let e = focal_fd_check(&k, &pose, &det(2500.0, 1500.0), None, 1.0).unwrap();
    assert!(find(&e, FdQuantity::AlphaEstimator).within(0.01, 0.0));
    // on the principal column the off-axis angle is the planar gamma angle
    let (u, v) = (2000.0, 2100.0);
    let off_axis = |f: &CameraIntrinsics| {
        std::f64::consts::FRAC_PI_2 - uavscale::viewing_elevation(f, &pose, u, v).unwrap()
    };
    let fd = (off_axis(&k.with_focal_offset(1.0).unwrap())
        - off_axis(&k.with_focal_offset(-1.0).unwrap()))
        / 2.0;
    let analytic = uavscale::focal_sensitivity(&k, u, v)
        .unwrap()
        .d_gamma_per_d_f;
    assert!(
        (fd - analytic).abs() / analytic.abs() < 0.01,
        "{fd} vs {analytic}"
    );
}
