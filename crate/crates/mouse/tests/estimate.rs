use discforest::{Forest, JointLeaf, LeafModel, Mode, TrainParams, Tree};
use discforest_mouse::camera::Camera;
use discforest_mouse::estimate::{confusion_matrix, estimate_joints, joint_error, Confidence, JointEstimate, JointGuess};
use discforest_mouse::pipeline::ik_round_trip;
use discforest_mouse::pixels::sample_pixel_locations;
use discforest_mouse::poses::{default_library, sample_poses, PerturbationRanges};
use discforest_mouse::render::{LabelImage, PartLabel};
use discforest_mouse::skeleton::{SkeletonModel, NUM_MAIN_JOINTS};
use discforest_mouse::synth::render_pose;
use discforest_mouse::SkeletonPose;
use nalgebra::{Point3, Vector3};

#[test]
fn ik_recovers_limbs_of_sampled_poses() {
    let m = SkeletonModel::mouse();
    let poses = sample_poses(&m, &default_library(&m), &PerturbationRanges::default(), 1000, 21).unwrap();
    let r = ik_round_trip(&m, &poses).unwrap();
    assert_eq!(r.poses, 1000);
    assert!(r.max_length_error < 1e-6, "{}", r.max_length_error);
    assert!(r.max_angle_error < 1e-6, "{}", r.max_angle_error);
    assert_eq!(r.main_moved, 0);
}

fn regression_forest(joints: Vec<JointLeaf<f64>>) -> Forest<f64> {
    let tree = Tree::single_leaf(LeafModel::Regression { joints }, 1, 1);
    Forest::new(vec![tree.clone(), tree], Mode::Regression, TrainParams::axis_classification(0))
}

#[test]
fn estimate_is_mean_pixel_point_plus_leaf_offset() {
    let m = SkeletonModel::mouse();
    let cam = Camera::desk();
    let img = render_pose(&m, &SkeletonPose::default(), &cam, 0.0, 0, 0).unwrap();
    let offsets: Vec<[f64; 3]> = (0..NUM_MAIN_JOINTS).map(|j| [j as f64, -2.0, 5.0]).collect();
    let joints = offsets
        .iter()
        .enumerate()
        .map(|(j, o)| JointLeaf {
            mean_offset: *o,
            low_confidence: j == 3,
            support: usize::from(j != 5),
        })
        .collect();
    let forest = regression_forest(joints);
    let est = estimate_joints(&forest, &img.depth, &cam, 40, 9).unwrap();

    let px = sample_pixel_locations(&[&img.depth], 40, 9);
    assert_eq!(px.len(), 40);
    let centroid = px
        .iter()
        .map(|e| cam.backproject(e.u as usize, e.v as usize, f64::from(img.depth.get(e.u as usize, e.v as usize))).coords)
        .sum::<Vector3<f64>>()
        / px.len() as f64;
    for (j, g) in est.joints.iter().enumerate() {
        if j == 5 {
            assert!(g.is_none());
            continue;
        }
        let g = g.unwrap();
        let want = centroid + Vector3::from(offsets[j]);
        assert!((Vector3::from(g.position) - want).norm() < 1e-9);
        let conf = if j == 3 { Confidence::Low } else { Confidence::High };
        assert_eq!(g.confidence, conf);
    }
    let err = joint_error(&est, &vec![Point3::origin(); NUM_MAIN_JOINTS]).unwrap();
    assert_eq!(err.missing, vec![5]);
}

#[test]
fn joint_error_by_hand() {
    let guess = |p: [f64; 3]| {
        Some(JointGuess {
            position: p,
            confidence: Confidence::High,
        })
    };
    let est = JointEstimate {
        joints: vec![guess([3.0, 4.0, 0.0]), None, guess([1.0, 1.0, 1.0])],
    };
    let truth = [Point3::origin(), Point3::origin(), Point3::new(1.0, 1.0, 2.0)];
    let r = joint_error(&est, &truth).unwrap();
    assert_eq!(r.per_joint, vec![Some(5.0), None, Some(1.0)]);
    assert_eq!(r.mean, 3.0);
    assert_eq!(r.missing, vec![1]);
    assert!(joint_error(&est, &truth[..2]).is_err());
}

fn labels(ids: &[u8]) -> LabelImage {
    LabelImage {
        width: ids.len(),
        height: 1,
        values: ids.iter().map(|&i| PartLabel::from_id(i).unwrap()).collect(),
    }
}

#[test]
fn confusion_by_hand() {
    // Truth: head x3, tail x1, background x1. Prediction gets two heads.
    let truth = labels(&[0, 0, 0, 5, 6]);
    let pred = labels(&[0, 0, 2, 5, 6]);
    let c = confusion_matrix(&pred, &truth).unwrap();
    assert_eq!(c.counts[0][0], 2);
    assert_eq!(c.counts[0][2], 1);
    assert_eq!(c.counts[5][5], 1);
    let n = c.normalized();
    assert!((n[0][0] - 2.0 / 3.0).abs() < 1e-15 && (n[0][2] - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(c.accuracy(), 0.75);
    assert_eq!(c.empty_rows(), vec![1, 2, 3, 4]);
    for row in &n {
        let s: f64 = row.iter().sum();
        assert!(s == 0.0 || (s - 1.0).abs() < 1e-12);
    }
    // Masks must agree.
    assert!(confusion_matrix(&labels(&[0, 6]), &labels(&[0, 0])).is_err());
}
