use kselect_core::dataset::{generate, load_csv, parse_csv, save_csv, GeneratorSpec};
use kselect_core::{Dataset, Family, Placement};

#[test]
fn uniform_1d_variance_matches_domain() {
    let domain = 4.0;
    let data = generate(&GeneratorSpec::new(Family::Uniform, 100_000, 3).dim(1).domain(domain)).unwrap();
    let mean = data.mean()[0];
    let var = data.points().map(|p| (p[0] - mean).powi(2)).sum::<f64>() / data.n() as f64;
    let expected = domain * domain / 12.0;
    assert!((var / expected - 1.0).abs() < 0.05, "variance {var} vs {expected}");
    assert!(data.points().all(|p| (0.0..=domain).contains(&p[0])));
}

#[test]
fn generators_are_seeded_and_sized() {
    for family in Family::ALL {
        let spec = GeneratorSpec::new(family, 250, 11);
        let a = generate(&spec).unwrap();
        assert_eq!(a.n(), 250, "{family}");
        assert_eq!(a.d(), 2, "{family}");
        assert_eq!(a.true_k(), Some(family.true_k()));
        assert_eq!(a, generate(&spec).unwrap());
        assert_ne!(a, generate(&GeneratorSpec::new(family, 250, 12)).unwrap());
    }
    let random = generate(&GeneratorSpec::new(Family::ManyBlobs, 300, 1).placement(Placement::Random)).unwrap();
    assert_eq!(random.n(), 300);
}

#[test]
fn csv_round_trip_is_lossless() {
    let data = generate(&GeneratorSpec::new(Family::Overlapping, 120, 5)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("points.csv");
    save_csv(&data, &path).unwrap();
    let back = load_csv(&path).unwrap();
    assert_eq!(back.as_flat(), data.as_flat());
    assert_eq!(back.d(), data.d());
}

#[test]
fn csv_parsing_rejects_bad_input() {
    assert!(parse_csv("").is_err());
    assert!(parse_csv("1,2\n3\n").is_err());
    assert!(parse_csv("1,2\n3,x\n").is_err());
    assert!(parse_csv("1,2\n3,NaN\n").is_err());
    let ok: Dataset = parse_csv("1,2\n3,4\n").unwrap();
    assert_eq!(ok.n(), 2);
}
