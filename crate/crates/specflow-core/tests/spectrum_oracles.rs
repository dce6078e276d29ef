//! Frozen large-scale oracles for the spectrum constructions. The census
//! counts were produced by an independent prototype enumeration and are
//! exact integers; the finite-difference targets are continuum eigenvalues,
//! so the tolerances are the known O(h^2) discretization error.

use specflow_core::spectrum::{
    disk_spectrum, fd_dirichlet_spectrum, rectangle_spectrum, DomainMask,
};

const PI: f64 = std::f64::consts::PI;

#[test]
fn square_census_at_1e5() {
    // Build past the query energy so the forward density window stays
    // inside the completeness bound.
    let s = rectangle_spectrum(1.0, 1.0, 1.01e5).unwrap();
    assert_eq!(s.counting_function(1.0e5).unwrap(), 7861);

    // Leading Weyl density A / 4 pi; the census window sits within 5%.
    let nu = s.density_of_states(1.0e5, 1.0e3).unwrap();
    let weyl = 1.0 / (4.0 * PI);
    assert!(
        (nu - weyl).abs() / weyl < 0.05,
        "density {nu} vs Weyl {weyl}"
    );
}

#[test]
fn disk_census_at_4e4() {
    let s = disk_spectrum(1.0, 4.0e4).unwrap();
    assert_eq!(s.len(), 9905);
    let j01 = 2.404_825_557_695_773_f64;
    assert!((s.values()[0] - j01 * j01).abs() < 1e-9);
}

#[test]
fn fd_square_fine_grid_lowest_ten() {
    let mask = DomainMask::rectangle(1.0, 1.0, 1.0 / 128.0);
    let s = fd_dirichlet_spectrum(&mask, 10, 7).unwrap();
    let v = s.values();
    let lam1 = 2.0 * PI * PI;
    assert!(
        (v[0] - lam1).abs() / lam1 < 5e-3,
        "ground state {} vs {lam1}",
        v[0]
    );
    // The (1,2)/(2,1) pair is exactly degenerate on the grid: both copies
    // must be present and agree to solver precision.
    let lam2 = 5.0 * PI * PI;
    for &x in &v[1..3] {
        assert!((x - lam2).abs() / lam2 < 5e-3, "doublet member {x} vs {lam2}");
    }
    assert!(
        (v[1] - v[2]).abs() / lam2 < 1e-7,
        "doublet split {} vs {}",
        v[1],
        v[2]
    );
}

#[test]
fn fd_disk_fine_grid_ground_state() {
    let mask = DomainMask::disk(1.0, 1.0 / 128.0);
    let s = fd_dirichlet_spectrum(&mask, 1, 11).unwrap();
    let want = 5.783_185_962_946_784_5_f64; // j_{0,1}^2
    let got = s.values()[0];
    assert!((got - want).abs() / want < 1e-2, "ground state {got} vs {want}");
}
