mod support;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sslsod::datakit::{depth_contour_gt, dilate, erode, Plane, StructuringElement};

#[test]
fn dilate_erode_contour_match_sliding_window_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..40 {
        let map = support::random_plane(&mut rng, 16, 16);
        for m in [1, 3, 5, 7] {
            let se = StructuringElement::new(m).unwrap();
            assert_eq!(dilate(&map, se), support::oracle::dilate(&map, m));
            assert_eq!(erode(&map, se), support::oracle::erode(&map, m));
            assert_eq!(depth_contour_gt(&map, m).unwrap(), support::oracle::contour(&map, m));
        }
    }
}

#[test]
fn non_square_maps() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let map = support::random_plane(&mut rng, 5, 13);
    let se = StructuringElement::new(5).unwrap();
    assert_eq!(dilate(&map, se), support::oracle::dilate(&map, 5));
    assert_eq!(erode(&map, se), support::oracle::erode(&map, 5));
}

#[test]
fn documented_step_examples() {
    let step = Plane::new(1, 6, vec![0., 0., 0., 1., 1., 1.]).unwrap();
    let se = StructuringElement::new(3).unwrap();
    assert_eq!(dilate(&step, se).data(), &[0., 0., 1., 1., 1., 1.]);
    assert_eq!(erode(&step, se).data(), &[0., 0., 0., 0., 1., 1.]);
}

#[test]
fn single_peak_grows_to_a_block() {
    let mut p = Plane::zeros(5, 5);
    p.set(2, 2, 1.0);
    let d = dilate(&p, StructuringElement::new(3).unwrap());
    for y in 0..5 {
        for x in 0..5 {
            let inside = (1..=3).contains(&y) && (1..=3).contains(&x);
            assert_eq!(d.get(y, x), inside as u8 as f64);
        }
    }
}

#[test]
fn step_edge_gives_band_of_width_four() {
    let step = Plane::from_fn(3, 12, |_, x| (x >= 6) as u8 as f64);
    let c = depth_contour_gt(&step, 5).unwrap();
    for y in 0..3 {
        let row: Vec<f64> = (0..12).map(|x| c.get(y, x)).collect();
        assert_eq!(row, [0., 0., 0., 0., 1., 1., 1., 1., 0., 0., 0., 0.]);
    }
}

#[test]
fn flat_depth_has_no_contour() {
    for v in [0.0, 0.37, 1.0] {
        let c = depth_contour_gt(&Plane::filled(9, 7, v), 5).unwrap();
        assert!(c.data().iter().all(|&x| x == 0.0));
    }
}

#[test]
fn even_or_zero_window_is_rejected() {
    assert!(StructuringElement::new(0).is_err());
    assert!(StructuringElement::new(4).is_err());
    assert!(depth_contour_gt(&Plane::zeros(4, 4), 2).is_err());
}
