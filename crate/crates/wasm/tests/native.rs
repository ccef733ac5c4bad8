use sodbayes_wasm::{design, simulate_fields, star_values, MAX_NX};

#[test]
fn sod_layout_and_agreement() {
    let nx = 200;
    let v = simulate_fields(1.0, 1.0, 0.125, 0.1, nx).unwrap();
    assert_eq!(v.len(), 7 * nx);
    let rho = &v[nx..2 * nx];
    let rho_exact = &v[4 * nx..5 * nx];
    let l1: f64 = rho.iter().zip(rho_exact).map(|(a, b)| (a - b).abs()).sum::<f64>() / nx as f64;
    assert!(l1 < 1e-2, "L1 density error {l1}");
    assert!((v[0] - 0.5 / nx as f64).abs() < 1e-15);
}

#[test]
fn star_state_of_sod() {
    // classical values for the Sod problem
    let s = star_values(1.0, 1.0, 0.125, 0.1).unwrap();
    assert!((s[0] - 0.30313).abs() < 1e-5);
    assert!((s[1] - 0.92745).abs() < 1e-5);
}

#[test]
fn design_is_stratified_and_bounded() {
    let n = 16;
    let d = design(n, 3).unwrap();
    assert_eq!(d.len(), 4 * n);
    let bounds = [(0.5, 1.5), (0.5, 1.5), (0.05, 0.15), (0.05, 0.15)];
    for (k, &(lo, hi)) in bounds.iter().enumerate() {
        let mut bins: Vec<usize> = (0..n).map(|i| ((d[4 * i + k] - lo) / (hi - lo) * n as f64) as usize).collect();
        bins.sort_unstable();
        assert_eq!(bins, (0..n).collect::<Vec<_>>());
    }
    assert_eq!(design(n, 3).unwrap(), d);
}

#[test]
fn bad_requests_are_rejected() {
    assert!(simulate_fields(-1.0, 1.0, 0.125, 0.1, 100).is_err());
    assert!(simulate_fields(1.0, 1.0, 0.125, 0.1, MAX_NX + 1).is_err());
    assert!(simulate_fields(1.0, 1.0, 0.125, 0.1, 4).is_err());
    assert!(design(0, 1).is_err());
    assert!(star_values(1.0, 0.0, 0.125, 0.1).is_err());
}
