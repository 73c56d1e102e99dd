use hetrob_bench::{uniform_points, uniform_profile};

#[test]
fn inputs_are_seeded() {
    assert_eq!(uniform_profile(100, 3), uniform_profile(100, 3));
    assert_ne!(uniform_profile(100, 3), uniform_profile(100, 4));
    let pts = uniform_points(50, 2, 9);
    assert_eq!(pts.len(), 100);
    assert!(pts.iter().all(|x| (-1.0..1.0).contains(x)));
}
